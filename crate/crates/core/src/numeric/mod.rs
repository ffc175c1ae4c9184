//! Exact and floating-point jet evaluation of tensor expressions on explicit
//! metrics: the independent oracle for the symbolic layer.

pub mod jet;
pub mod scalar;
pub mod spec;
pub mod geometry;
pub mod eval;
pub mod quadrature;
