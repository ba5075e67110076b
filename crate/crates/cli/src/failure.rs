use strainmix::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INFERENCE: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }

    pub fn inference(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INFERENCE,
            error: error.into(),
        }
    }
}

/// Library errors raised while reading or validating input are input
/// failures; everything raised by a chain is an inference failure.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::InitFailed(_) | Error::EmptyChain | Error::Fit { .. } => {
                Self::inference(e)
            }
            _ => Self::input(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::input(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::input(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::input(e)
    }
}

pub type CmdResult<T = u8> = std::result::Result<T, Failure>;
