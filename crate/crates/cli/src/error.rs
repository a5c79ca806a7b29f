//! Command-line error taxonomy and exit codes.
//!
//! Every failure prints a machine-parsable first line
//! `error: <CODE>: <detail>` on standard error and exits with the code's
//! fixed number, so scripts can branch on failures without scraping prose.

use phaseforge_core::formats::FormatError;
use phaseforge_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Configuration file missing, unparsable, or failing validation.
    Config(String),
    /// A pipeline stage failed; the embedded error carries the cause.
    Core(CoreError),
    /// An input file is not a valid instance of its format.
    Format(FormatError),
    /// Any other I/O failure.
    Io(std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        CliError::Core(e)
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> CliError {
        match e {
            FormatError::Io(io) => CliError::Io(io),
            malformed => CliError::Format(malformed),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e)
    }
}

impl CliError {
    /// Stable machine-parsable code for the first stderr line.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "CONFIG",
            CliError::Core(e) => match e.root() {
                CoreError::NonMonotoneLut { .. } => "NONMONOTONE_LUT",
                CoreError::DeflectionBudgetExceeded { .. } => "BUDGET",
                _ => "PIPELINE",
            },
            CliError::Format(_) => "FORMAT",
            CliError::Io(_) => "IO",
        }
    }

    /// Process exit code: 2 config, 3 non-monotone table, 4 deflection
    /// budget, 5 malformed file, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "CONFIG" => 2,
            "NONMONOTONE_LUT" => 3,
            "BUDGET" => 4,
            "FORMAT" => 5,
            _ => 1,
        }
    }

    pub fn detail(&self) -> String {
        match self {
            CliError::Config(msg) => msg.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::Format(e) => e.to_string(),
            CliError::Io(e) => e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_map_to_documented_exit_numbers() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::Core(CoreError::NonMonotoneLut { index: 3 }).exit_code(),
            3
        );
        let budget = CoreError::DeflectionBudgetExceeded {
            pixel: Some(7),
            required: 0.1,
            available_min: -0.03,
            available_max: 0.03,
        };
        // Stage wrappers must not hide the root cause.
        let staged = CliError::Core(budget.at_stage("slope planning"));
        assert_eq!(staged.exit_code(), 4);
        assert_eq!(staged.code(), "BUDGET");
        assert!(staged.detail().contains("pixel 7"));
        let malformed = CliError::Format(FormatError::Malformed {
            offset: 12,
            message: "bad".into(),
        });
        assert_eq!(malformed.exit_code(), 5);
        assert!(malformed.detail().contains("byte 12"));
        let other = CliError::Core(CoreError::EmptyInput);
        assert_eq!(other.exit_code(), 1);
    }
}
