//! CSV tables with a fixed, locale-free number format.

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# trajphase-schema: {SCHEMA_VERSION}\n").into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&self.columns).expect("in-memory write");
            for row in &self.rows {
                w.write_record(row).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        String::from_utf8(out).expect("utf-8 cells")
    }
}

/// Column names for the independent entries of a `dim x dim` density
/// matrix: real diagonals, then real and imaginary parts above the diagonal.
pub fn density_columns(dim: usize) -> Vec<String> {
    let mut cols = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                cols.push(format!("rho{i}{j}"));
            } else {
                cols.push(format!("re_rho{i}{j}"));
                cols.push(format!("im_rho{i}{j}"));
            }
        }
    }
    cols
}

pub fn density_cells(rho: &trajphase::operators::Operator) -> Vec<Cell> {
    let d = rho.dim();
    let mut cells = Vec::new();
    for i in 0..d {
        for j in i..d {
            let z = rho.get(i, j);
            if i == j {
                cells.push(Cell::Num(z.re));
            } else {
                cells.push(Cell::Num(z.re));
                cells.push(Cell::Num(z.im));
            }
        }
    }
    cells
}

/// Parses a table written by [`Table::to_csv`]: header names and rows of raw
/// cells.
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map(|h| h.iter().map(str::to_string).collect()).unwrap_or_default();
    let rows = r
        .records()
        .filter_map(|rec| rec.ok())
        .map(|rec| rec.iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}
