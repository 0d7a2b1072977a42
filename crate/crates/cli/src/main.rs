use clap::Parser;
use trajphase_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("trajphase: {e}");
        std::process::exit(e.exit_code());
    }
}
