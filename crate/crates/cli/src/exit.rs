//! Process exit codes.
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success                                             |
//! | 1    | anything not covered below                          |
//! | 2    | usage or configuration error                        |
//! | 3    | input error (missing/malformed file, id mismatch)   |
//! | 4    | external scorer failure                             |

use std::fmt;

use mtsel_core::Error;

pub const OTHER: i32 = 1;
pub const CONFIG: i32 = 2;
pub const INPUT: i32 = 3;
pub const SCORER: i32 = 4;

/// Marks a bad flag combination or config file value.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

pub fn code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Scorer(_) => SCORER,
                Error::ColumnExists(_) | Error::UnknownColumn(_) => CONFIG,
                _ => INPUT,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return INPUT;
        }
    }
    OTHER
}
