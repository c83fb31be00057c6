//! Front end for the `weightlab` binary: run configs, reports, the acceptance
//! suite and the statement trace.

pub mod config;
pub mod report;
pub mod run;
pub mod suite;
pub mod trace;
