//! Locale-independent CSV formatting.

use crate::error::Result;

/// Four decimals, as printed in the published tables.
pub fn fmt4(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.4}")
}

/// Shortest representation that round-trips.
pub fn full(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:?}")
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn opt_full(x: Option<f64>) -> String {
    x.map(full).unwrap_or_default()
}

pub fn opt4(x: Option<f64>) -> String {
    x.map(fmt4).unwrap_or_default()
}

/// Builds a CSV document in memory.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> Result<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| crate::error::CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_is_fixed() {
        assert_eq!(fmt4(25.27771), "25.2777");
        assert_eq!(fmt4(30.0), "30.0000");
        assert_eq!(full(0.1), "0.1");
        assert_eq!(full(f64::INFINITY), "inf");
        assert_eq!(fmt4(f64::INFINITY), "inf");
        assert_eq!(opt4(None), "");
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row(["x;y", "1,2"]).unwrap();
        assert_eq!(t.finish().unwrap(), "a,b\nx;y,\"1,2\"\n");
    }
}
