//! Experiment drivers behind the command-line tool. Each driver writes its
//! tables into an output directory and returns a serialisable summary.

pub mod heatmap;
pub mod phase;
pub mod rates;
pub mod searches;
pub mod verify;
pub mod worst;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use rand::Rng;

use crate::dynamics::RSState;
use crate::error::{Error, Result};
use crate::numeric::ScalarContext;

/// Runs `$body` with `$ctx` bound to the concrete context inside a
/// [`Backend`](crate::numeric::Backend).
#[macro_export]
macro_rules! with_backend {
    ($backend:expr, |$ctx:ident| $body:expr) => {
        match $backend {
            $crate::numeric::Backend::Hardware($ctx) => $body,
            $crate::numeric::Backend::Extended($ctx) => $body,
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rows of decimal strings under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Array of objects keyed by the header; values stay strings.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(k, v)| ((*k).to_owned(), Value::String(v.clone())))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Outcome of one command: pass/fail plus machine-readable details.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub passed: bool,
    pub details: Value,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
}

/// Parses a decimal or a fraction `a/b` at full context precision.
pub fn parse_scalar<C: ScalarContext>(ctx: &C, text: &str) -> Result<C::Scalar> {
    match text.split_once('/') {
        Some((num, den)) => {
            let den = ctx.parse(den)?;
            if den == ctx.zero() {
                return Err(Error::Parse(text.to_owned()));
            }
            Ok(ctx.parse(num)? / den)
        }
        None => ctx.parse(text),
    }
}

/// `text` parsed, or `default` when absent.
pub fn scalar_or<C: ScalarContext>(ctx: &C, text: Option<&str>, default: C::Scalar) -> Result<C::Scalar> {
    text.map_or(Ok(default), |t| parse_scalar(ctx, t))
}

/// Uniform point of the closed unit ball in `R^d`, by rejection from the cube.
pub fn sample_unit_ball<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return x;
        }
    }
}

/// `t,r,s` rows for a sequence of states.
pub fn rs_table<C: ScalarContext>(ctx: &C, states: &[RSState<C::Scalar>]) -> Table {
    let mut t = Table::new(&["t", "r", "s"]);
    for (i, st) in states.iter().enumerate() {
        t.push(vec![i.to_string(), ctx.to_decimal(&st.r), ctx.to_decimal(&st.s)]);
    }
    t
}

/// Output directory plus table format.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>, format: Format) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, format })
    }

    pub fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}.{ext}"))
    }

    /// Writes `stem.csv` or `stem.json` depending on the format.
    pub fn table(&self, stem: &str, table: &Table) -> Result<PathBuf> {
        let path = self.path(stem, self.format.extension());
        let file = fs::File::create(&path)?;
        match self.format {
            Format::Csv => table.write_csv(file)?,
            Format::Json => serde_json::to_writer_pretty(file, &table.to_json())?,
        }
        Ok(path)
    }

    /// Always JSON, regardless of the table format.
    pub fn json(&self, stem: &str, value: &Value) -> Result<PathBuf> {
        let path = self.path(stem, "json");
        let mut file = fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut file, value)?;
        file.write_all(b"\n")?;
        Ok(path)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// File name of `path` for summaries.
pub(crate) fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default()
}
