//! Search-based unit-test generation for MiniDyn modules.
//!
//! The crate is organised around a pipeline: MiniDyn source is parsed and
//! compiled to bytecode ([`minidyn`]), executed under instrumentation
//! ([`executor`]), and searched over by one of several generation algorithms
//! ([`engines`]) that evolve test cases ([`testmodel`]) using genetic
//! operators ([`operators`]) guided by branch-distance fitness ([`fitness`]).
//! Regression assertions come from a mutation-analysis pass ([`oracle`]), and
//! [`harness`] ties everything together for the `sbgen` binary.

pub mod cluster;
pub mod engines;
pub mod executor;
pub mod fitness;
pub mod harness;
pub mod operators;
pub mod oracle;
pub mod minidyn;
pub mod stats;
pub mod testmodel;
