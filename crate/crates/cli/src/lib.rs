//! Library side of the `entropy-lab` command: documents, the sampler,
//! reports and the command implementations.

pub mod commands;
pub mod doc;
pub mod report;
pub mod sample;
