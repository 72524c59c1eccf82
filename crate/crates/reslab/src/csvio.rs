//! CSV emission. All floats print with 17 significant digits so a reader
//! recovers the exact f64 bit pattern.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

/// Shortest-round-trip would be prettier; fixed 17 keeps files diffable
/// across runs regardless of which branch produced a value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvTable {
    text: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> CsvTable {
        let mut text = String::new();
        let _ = writeln!(text, "{}", header.join(", "));
        CsvTable { text, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        let _ = writeln!(self.text, "{}", cells.join(", "));
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 727.855_318_282_499_09, -2.5e-13, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new(&["n", "re_r", "im_r"]);
        t.row(&["2".into(), fmt_f64(0.5), fmt_f64(-0.5)]);
        let text = t.into_text();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n, re_r, im_r");
        assert!(lines.next().unwrap().starts_with("2, 5.0000000000000000e-1"));
    }
}
