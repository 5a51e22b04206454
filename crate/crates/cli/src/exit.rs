use std::fmt;

use qduhamel::Error as CoreError;

pub const VERIFICATION_FAILED: i32 = 1;
pub const INPUT_ERROR: i32 = 2;
pub const NUMERICAL_ERROR: i32 = 3;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub fn input_error(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: INPUT_ERROR,
        error: error.into(),
    }
}

/// Pole, overflow and non-finite evaluations are numerical failures;
/// everything else is blamed on the input.
pub fn classify(error: impl Into<anyhow::Error>) -> CliError {
    let error = error.into();
    let numerical = error.chain().any(|e| {
        matches!(
            e.downcast_ref::<CoreError>(),
            Some(CoreError::Pole { .. } | CoreError::StepSize(_) | CoreError::Evaluation { .. } | CoreError::Radius { .. })
        )
    });
    CliError {
        code: if numerical { NUMERICAL_ERROR } else { INPUT_ERROR },
        error,
    }
}
