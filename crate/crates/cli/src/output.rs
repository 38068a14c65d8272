//! CSV/JSON emission. All floating output uses 17 significant digits so
//! reruns compare byte-for-byte.

use qho_kam::matrix_spaces::fmt_f64;
use std::io::Write;
use std::path::Path;

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            buf: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        let parts: Vec<String> = cells.iter().map(|c| c.render()).collect();
        self.buf.push_str(&parts.join(","));
        self.buf.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.buf.as_bytes())
    }
}

pub enum CsvCell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Float(v) => fmt_f64(*v),
            CsvCell::Text(s) => s.clone(),
        }
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
