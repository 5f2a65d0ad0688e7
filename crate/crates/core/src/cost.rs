//! Operation counters used as the portable cost metric.
//!
//! Counts are floating-point operation estimates (a multiply-add counts as
//! two). They are deterministic functions of the mesh, the truncation and
//! the solver path, so they can be compared across machines.

use core::ops::{Add, AddAssign};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    /// Synthesizing `log k` from the KL modes and exponentiating it.
    pub field: u64,
    pub assembly: u64,
    pub factorization: u64,
    /// Triangular solves or iterative solver work.
    pub solve: u64,
    /// Level transfer, prolongation and differencing.
    pub transfer: u64,
    /// Number of linear systems solved.
    pub solves: u64,
    pub factorizations: u64,
}

impl OpCount {
    pub fn flops(&self) -> u64 {
        self.field + self.assembly + self.factorization + self.solve + self.transfer
    }

    /// Work spent in linear solves (factorization plus substitution).
    pub fn solver_flops(&self) -> u64 {
        self.factorization + self.solve
    }
}

impl Add for OpCount {
    type Output = OpCount;

    fn add(mut self, rhs: OpCount) -> OpCount {
        self += rhs;
        self
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: OpCount) {
        self.field += rhs.field;
        self.assembly += rhs.assembly;
        self.factorization += rhs.factorization;
        self.solve += rhs.solve;
        self.transfer += rhs.transfer;
        self.solves += rhs.solves;
        self.factorizations += rhs.factorizations;
    }
}

impl core::iter::Sum for OpCount {
    fn sum<I: Iterator<Item = OpCount>>(iter: I) -> Self {
        iter.fold(OpCount::default(), Add::add)
    }
}
