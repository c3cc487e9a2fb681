//! Command implementations behind the `scfind-tuner` binary.

pub mod commands;
pub mod config;
pub mod svg;

use scfind_tuner::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        return EXIT_NUMERIC;
    }
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Json(_) => EXIT_USAGE,
        Error::Env { source, .. } => exit_code(source),
        _ => EXIT_DATA,
    }
}

/// A comma-separated number list taken as a single argument.
pub type NumList = Vec<f64>;

/// Parse `a,b,c` into numbers.
pub fn parse_list(s: &str) -> Result<NumList, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}"))).collect()
}

/// Comma-joined shortest round-trip representation.
pub fn format_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
