//! Process exit codes and the error type carried to `main`.

pub const OK: i32 = 0;
pub const PARSE: i32 = 1;
pub const NOT_CONVERGED: i32 = 2;
pub const SINGULAR: i32 = 3;
pub const MISMATCH: i32 = 4;
/// Failed verification, infeasible weights or out-of-domain family parameters.
pub const INVALID: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Document to print despite the failure (best-so-far results, verification report).
    pub output: Option<String>,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            output: None,
        }
    }

    pub fn parse(m: impl Into<String>) -> Self {
        Self::new(PARSE, m)
    }

    pub fn singular(m: impl Into<String>) -> Self {
        Self::new(SINGULAR, m)
    }

    pub fn mismatch(m: impl Into<String>) -> Self {
        Self::new(MISMATCH, m)
    }

    pub fn invalid(m: impl Into<String>) -> Self {
        Self::new(INVALID, m)
    }

    pub fn not_converged(m: impl Into<String>, output: String) -> Self {
        Failure {
            code: NOT_CONVERGED,
            message: m.into(),
            output: Some(output),
        }
    }

    pub fn with_output(mut self, output: String) -> Self {
        self.output = Some(output);
        self
    }
}
