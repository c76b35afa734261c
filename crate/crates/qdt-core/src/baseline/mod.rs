//! Comparison methods: phase-space kernels and the full joint fit.

pub mod joint;
pub mod pfunction;
