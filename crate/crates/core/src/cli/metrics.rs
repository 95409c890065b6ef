use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("row {row} has {got} fields, schema has {expected}")]
    SchemaMismatch { row: usize, expected: usize, got: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Write `rows` under a header of `schema` as `\n`-terminated CSV. Every
/// row is checked against the schema before the file is touched.
pub fn write_metrics_csv<S: AsRef<str>>(rows: &[Vec<S>], schema: &[&str], path: &Path) -> Result<(), MetricsError> {
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != schema.len()) {
        return Err(MetricsError::SchemaMismatch {
            row,
            expected: schema.len(),
            got: r.len(),
        });
    }
    let io_err = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let to_io = |e: csv::Error| io_err(e.into());
    w.write_record(schema).map_err(to_io)?;
    for r in rows {
        w.write_record(r.iter().map(AsRef::as_ref)).map_err(to_io)?;
    }
    w.into_inner()
        .map_err(|e| io_err(e.into_error()))?
        .flush()
        .map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics_csv::<String>(&[], &["a", "b"], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
    }

    #[test]
    fn rows_are_written_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![vec!["1", "x"], vec!["2", "y,z"]];
        write_metrics_csv(&rows, &["n", "s"], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "n,s\n1,x\n2,\"y,z\"\n");
    }

    #[test]
    fn mismatch_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let err = write_metrics_csv(&[vec!["1"]], &["a", "b"], &path).unwrap_err();
        assert!(matches!(err, MetricsError::SchemaMismatch { row: 0, expected: 2, got: 1 }));
        assert!(!path.exists());
    }

    #[test]
    fn io_failure_is_surfaced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("m.csv");
        assert!(matches!(
            write_metrics_csv::<String>(&[], &["a"], &path),
            Err(MetricsError::Io { .. })
        ));
    }
}
