//! One module per subcommand. Each `run` validates its inputs first, then
//! either stops there (`--dry-run`) or computes and writes its artifacts,
//! returning the output list and a summary for the stdout status line.

pub mod analyze;
pub mod bem;
pub mod reproduce;
pub mod simulate;
pub mod solve_x;
pub mod trace;
pub mod verify;
