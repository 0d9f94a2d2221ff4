//! Evaluation harness for the must-call checker: golden corpus runner,
//! brute-force path oracle, random program generator and metamorphic
//! rewrites.

pub mod corpus;
pub mod generate;
pub mod oracle;
pub mod transform;
