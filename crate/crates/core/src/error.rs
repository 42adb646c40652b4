//! Error type shared by every module in the crate.

use std::fmt;
use std::io;

/// Convenient alias used by all fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error for ingest, training, recovery, and persistence.
#[derive(Debug)]
pub enum Error {
    /// An underlying I/O failure, prefixed with what was being attempted,
    /// e.g. `cannot open /path/to/file`.
    Io { what: String, source: io::Error },
    /// A sample in a text recording could not be parsed. Line numbers are
    /// 1-based and count physical lines of the input file.
    Parse { line: usize, detail: String },
    /// A binary artifact is structurally unusable (bad magic, unsupported
    /// version, truncated or trailing bytes).
    Format(String),
    /// A deserialized or assembled bundle violates its invariants. Each
    /// entry describes one violation.
    InvalidBundle(Vec<String>),
    /// Arguments violate a documented precondition (dimension mismatch,
    /// empty inputs, out-of-range parameters).
    InvalidInput(String),
    /// An iterative solver could not produce a usable result.
    Solver(String),
    /// Adds pipeline-stage context to an underlying error; rendered as
    /// `<stage>: <detail>`.
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    /// Wraps `err` with the name of the pipeline stage that failed.
    pub fn in_stage(stage: &'static str, err: Error) -> Error {
        Error::Stage { stage, source: Box::new(err) }
    }

    /// I/O error while opening `path` for reading.
    pub fn cannot_open(path: &std::path::Path, source: io::Error) -> Error {
        Error::Io { what: format!("cannot open {}", path.display()), source }
    }

    /// I/O error while creating or writing `path`.
    pub fn cannot_write(path: &std::path::Path, source: io::Error) -> Error {
        Error::Io { what: format!("cannot write {}", path.display()), source }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { what, source } => write!(f, "{what}: {source}"),
            Error::Parse { line, detail } => {
                write!(f, "unparseable sample at line {line}")?;
                if !detail.is_empty() {
                    write!(f, ": {detail}")?;
                }
                Ok(())
            }
            Error::Format(msg) => f.write_str(msg),
            Error::InvalidBundle(violations) => {
                write!(f, "invalid bundle: {}", violations.join("; "))
            }
            Error::InvalidInput(msg) => f.write_str(msg),
            Error::Solver(msg) => f.write_str(msg),
            Error::Stage { stage, source } => write!(f, "{stage}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Stage { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_reports_line_number() {
        let err = Error::Parse { line: 1, detail: "abc".into() };
        assert_eq!(err.to_string(), "unparseable sample at line 1: abc");
    }

    #[test]
    fn stage_context_prefixes_message() {
        let inner = Error::Format("not a DDCS file".into());
        let err = Error::in_stage("train", inner);
        assert_eq!(err.to_string(), "train: not a DDCS file");
    }

    #[test]
    fn bundle_violations_joined() {
        let err = Error::InvalidBundle(vec!["m must be < n".into(), "zero-norm atom at index 3".into()]);
        assert_eq!(err.to_string(), "invalid bundle: m must be < n; zero-norm atom at index 3");
    }
}
