use sinesteer::codec::CodecError;
use sinesteer::dataset::DatasetError;
use sinesteer::harness::HarnessError;
use sinesteer::kv::KvError;
use sinesteer::metrics::MetricsError;
use sinesteer::neural::NeuralError;
use sinesteer::signal::SignalError;

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const NUMERIC: u8 = 3;

/// An error with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: DATA,
            message: message.into(),
        }
    }

    /// Prefixes the message with where it happened.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

fn codec_code(e: &CodecError) -> u8 {
    match e {
        CodecError::DegenerateWave { .. } | CodecError::PhaseOutOfRange { .. } => NUMERIC,
        _ => DATA,
    }
}

fn neural_code(e: &NeuralError) -> u8 {
    match e {
        NeuralError::NonFinite(_) => NUMERIC,
        NeuralError::Codec(c) => codec_code(c),
        _ => DATA,
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        Self {
            code: codec_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        Self {
            code: neural_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::NonfiniteLoss { .. } => NUMERIC,
            HarnessError::Neural(n) => neural_code(n),
            HarnessError::Codec(c) => codec_code(c),
            _ => DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::data(e.to_string())
            }
        }
    )*};
}

data_errors!(
    DatasetError,
    SignalError,
    MetricsError,
    KvError,
    csv::Error,
    std::io::Error
);
