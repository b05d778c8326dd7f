//! Command implementations behind the `enoch` binary.

pub mod commands;
pub mod config;

use enoch::{Error, ErrorKind};

/// Process exit status for an error: 2 configuration, 3 data, 4 numeric.
pub fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}
