//! Numeric CSV with a `#` metadata preamble.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

/// Shortest round-trip decimal, so output is exact and stable.
fn render_cell(c: Cell, out: &mut String) {
    match c {
        Cell::Int(v) => write!(out, "{v}").unwrap(),
        Cell::Real(v) if v.is_nan() => out.push_str("nan"),
        Cell::Real(v) if v.is_infinite() => out.push_str(if v > 0.0 { "inf" } else { "-inf" }),
        Cell::Real(v) => write!(out, "{v:?}").unwrap(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub preamble: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.preamble.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.preamble {
            let v = v.replace('\n', " ");
            writeln!(s, "# {k}: {v}").unwrap();
        }
        writeln!(s, "{}", self.header.join(",")).unwrap();
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                render_cell(*c, &mut s);
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_exact_numbers() {
        let mut t = Table::new(&["a", "b", "n"]);
        t.meta("model", "barrier");
        t.push(vec![0.1.into(), f64::NAN.into(), u64::MAX.into()]);
        t.push(vec![1e-300.into(), 2.0.into(), 3usize.into()]);
        assert_eq!(t.render(), "# model: barrier\na,b,n\n0.1,nan,18446744073709551615\n1e-300,2.0,3\n");
    }
}
