//! Static must-call resource leak checking for MiniOO programs.
//!
//! The pipeline is: [`frontend`] parses `.moo` files, [`model`] resolves
//! names and computes the resource type set, [`cfg`] builds per-method
//! control-flow graphs, [`alias`] relates flow nodes that may hold the same
//! resource, and [`leakcheck`] verifies that every obligation is discharged
//! on every path. [`diagnostics`] wires it together and renders reports.

pub mod alias;
pub mod cfg;
pub mod diagnostics;
pub mod frontend;
pub mod leakcheck;
pub mod model;
