//! Deterministic driving simulator that injects conflict situations into
//! scripted scenarios and raises takeover requests when the automation
//! becomes uncertain.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conflicts;
pub mod control;
pub mod dynamics;
pub mod engine;
pub mod geom;
pub mod perception;
pub mod roadnet;
pub mod scenario;
pub mod supervisor;
