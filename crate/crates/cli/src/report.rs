//! Run reports and warning capture.

use std::sync::Mutex;
use std::time::Duration;

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde::Serialize;
use sha2::{Digest, Sha256};

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

/// Forwards records to `env_logger` and keeps every warning for the report.
struct CaptureLogger {
    inner: env_logger::Logger,
    quiet: bool,
}

impl Log for CaptureLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Warn || self.inner.enabled(metadata)
    }

    fn log(&self, record: &Record) {
        if record.level() <= Level::Warn {
            if let Ok(mut w) = WARNINGS.lock() {
                w.push(record.args().to_string());
            }
        }
        let show = if self.quiet {
            record.level() == Level::Error
        } else {
            self.inner.matches(record)
        };
        if show {
            self.inner.log(record);
        }
    }

    fn flush(&self) {
        self.inner.flush();
    }
}

/// Installs the logger once; later calls only reset the captured warnings.
pub fn init_logging(quiet: bool) {
    let inner = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).build();
    let level = inner.filter().max(LevelFilter::Warn);
    if log::set_boxed_logger(Box::new(CaptureLogger { inner, quiet })).is_ok() {
        log::set_max_level(level);
    }
    take_warnings();
}

pub fn take_warnings() -> Vec<String> {
    WARNINGS.lock().map(|mut w| std::mem::take(&mut *w)).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub trajphase: &'static str,
    pub cli: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_origin: String,
    /// SHA-256 of the effective configuration after command-line overrides.
    pub config_digest: String,
    pub seed: u64,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config_origin: &str, effective_config: &str, seed: u64) -> Self {
        RunReport {
            command: command.to_string(),
            config_origin: config_origin.to_string(),
            config_digest: sha256_hex(effective_config.as_bytes()),
            seed,
            versions: Versions {
                trajphase: trajphase::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            wall_time_s: 0.0,
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.wall_time_s = elapsed.as_secs_f64();
        self.warnings.extend(take_warnings());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
