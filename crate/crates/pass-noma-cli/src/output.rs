//! CSV assembly with provenance comments and atomic write-then-rename.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

pub struct CsvOutput {
    buffer: String,
}

impl CsvOutput {
    /// Starts a CSV document with `#`-prefixed provenance comments.
    pub fn new(config_sha256: &str, seed: u64) -> CsvOutput {
        let mut buffer = String::new();
        let _ = writeln!(buffer, "# pass-noma {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(buffer, "# config sha256: {config_sha256}");
        let _ = writeln!(buffer, "# seed: {seed}");
        CsvOutput { buffer }
    }

    pub fn header(&mut self, columns: &[&str]) {
        let _ = writeln!(self.buffer, "{}", columns.join(","));
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buffer, "{}", fields.join(","));
    }

    /// Writes to a temporary sibling and renames, so a failed run never
    /// leaves a partial file at the destination.
    pub fn write_atomic(&self, path: &Path) -> Result<(), CliError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.buffer.as_bytes())
            .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, path).map_err(|e| {
            CliError::Numerical(format!("cannot move output into place: {e}"))
        })
    }
}

/// Scientific notation for probabilities and standard errors; shortest
/// round-trip mantissa, deterministic across runs.
pub fn sci(v: f64) -> String {
    format!("{v:e}")
}

/// Plain decimal for coordinates, powers, and dB values.
pub fn plain(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_then_header_then_rows() {
        let mut out = CsvOutput::new("abc123", 7);
        out.header(&["a", "b"]);
        out.row(&[plain(1.5), sci(0.25)]);
        let text = out.buffer;
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# pass-noma "));
        assert_eq!(lines[1], "# config sha256: abc123");
        assert_eq!(lines[2], "# seed: 7");
        assert_eq!(lines[3], "a,b");
        assert_eq!(lines[4], "1.5,2.5e-1");
    }
}
