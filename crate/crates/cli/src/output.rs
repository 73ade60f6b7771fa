use std::fs;
use std::path::Path;

use anyhow::Result;

/// A table rendered as CSV for files and as markdown for the terminal.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV preceded by a `# manifest_sha256=` comment line.
    pub fn to_csv(&self, manifest_hash: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner()?)?;
        Ok(format!("# manifest_sha256={manifest_hash}\n{body}"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |\n", self.header.join(" | "));
        s += &format!("|{}\n", "---|".repeat(self.header.len()));
        for r in &self.rows {
            s += &format!("| {} |\n", r.join(" | "));
        }
        s
    }

    pub fn write_csv(&self, path: &Path, manifest_hash: &str) -> Result<()> {
        fs::write(path, self.to_csv(manifest_hash)?)?;
        Ok(())
    }
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_markdown() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_csv("h").unwrap(), "# manifest_sha256=h\na,b\n1,\"x,y\"\n");
        assert_eq!(t.to_markdown(), "| a | b |\n|---|---|\n| 1 | x,y |\n");
    }
}
