use std::fmt;

use cosym::{Error, ParseError};

/// A failure mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input; exit code 2.
    Input(String),
    /// A numerical failure on valid input; exit code 1.
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }

    /// Engine error raised while handling the expression `src`; parse
    /// errors get a caret under the offending byte.
    pub fn in_expression(e: Error, what: &str, src: &str) -> Self {
        match e {
            Error::Parse(p) => CliError::Input(caret(what, src, &p)),
            other => CliError::from(other).context(&format!("{what} `{src}`")),
        }
    }

    fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
        }
    }
}

fn caret(what: &str, src: &str, p: &ParseError) -> String {
    let col = src.get(..p.offset.min(src.len())).map_or(p.offset, |s| s.chars().count());
    format!("{what}: {p}\n  {src}\n  {}^", " ".repeat(col))
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularFlat | Error::Degenerate(_) | Error::Solver(_) => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
