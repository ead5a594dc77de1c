//! Column tables written as CSV with exact float round trip.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<(String, Column)>,
}

/// `{:.16e}` carries 17 significant digits, enough to restore any f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn float(mut self, name: &str, v: Vec<f64>) -> Self {
        self.columns.push((name.into(), Column::Float(v)));
        self
    }

    pub fn text(mut self, name: &str, v: Vec<String>) -> Self {
        self.columns.push((name.into(), Column::Text(v)));
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn get(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.0 == name).map(|c| &c.1)
    }

    pub fn floats(&self, name: &str) -> Result<&[f64]> {
        match self.get(name) {
            Some(Column::Float(v)) => Ok(v),
            _ => Err(Error::Usage(format!("no numeric column {name:?}"))),
        }
    }

    pub fn render(&self) -> Result<String> {
        let n = self.rows();
        if self.columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::Usage("ragged table".into()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.0.as_str())).map_err(io_err)?;
        for i in 0..n {
            let row = self.columns.iter().map(|(_, col)| match col {
                Column::Float(v) => format_float(v[i]),
                Column::Text(v) => v[i].clone(),
            });
            w.write_record(row).map_err(io_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Columns whose every cell parses as f64 come back as `Float`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let names: Vec<String> = r.headers().map_err(io_err)?.iter().map(String::from).collect();
        if names.is_empty() {
            return Err(Error::Usage("empty csv".into()));
        }
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for rec in r.records() {
            let rec = rec.map_err(io_err)?;
            for (c, p) in cells.iter_mut().zip(rec.iter()) {
                c.push(p.to_string());
            }
        }
        let columns = names
            .into_iter()
            .zip(cells)
            .map(|(name, c)| {
                let parsed: Option<Vec<f64>> = c.iter().map(|x| x.parse().ok()).collect();
                let col = match parsed {
                    Some(v) => Column::Float(v),
                    None => Column::Text(c),
                };
                (name, col)
            })
            .collect();
        Ok(Table { columns })
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let v = vec![0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, f64::MIN_POSITIVE, 0.0, 12.466];
        let t = Table::new().float("x", v.clone()).text("c", vec!["a".into(); v.len()]);
        let back = Table::parse(&t.render().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn ragged_is_rejected() {
        let t = Table::new().float("x", vec![1.0]).float("y", vec![]);
        assert!(t.render().is_err());
    }
}
