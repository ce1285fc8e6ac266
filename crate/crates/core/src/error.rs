use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, lengths, ranges).
    Contract(String),
    /// A non-finite value showed up where a finite one is required.
    NonFinite { what: String },
    /// An environment name that is not registered.
    UnknownEnv { name: String, available: &'static [&'static str] },
    /// Stepping an environment after its episode finished.
    EpisodeDone,
    /// The scripted expert failed to produce a successful demonstration.
    ExpertFailed { attempts: usize },
    /// A replay record was rejected.
    BadRecord(String),
    /// Parameter table lookup or compatibility failure.
    Params(String),
    /// Invalid configuration value.
    Config(String),
    /// Writing run output failed.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::UnknownEnv { name, available } => {
                write!(f, "unknown environment `{name}` (available: {})", available.join(", "))
            }
            Error::EpisodeDone => write!(f, "contract violation: step called after episode end"),
            Error::ExpertFailed { attempts } => {
                write!(f, "scripted expert failed to succeed after {attempts} attempts")
            }
            Error::BadRecord(msg) => write!(f, "malformed episode record: {msg}"),
            Error::Params(msg) => write!(f, "parameter error: {msg}"),
            Error::Config(msg) => write!(f, "invalid config: {msg}"),
            Error::Io(msg) => write!(f, "output error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! contract {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err($crate::Error::Contract(alloc::format!($($arg)*)));
        }
    };
}
pub(crate) use contract;
