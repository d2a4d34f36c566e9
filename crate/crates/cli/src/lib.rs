//! File formats and report rendering behind the `crossloss` binary,
//! exposed as a library so integration tests can exercise them directly.

pub mod io;
pub mod report;
