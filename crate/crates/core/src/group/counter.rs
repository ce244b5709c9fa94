//! Thread-local operation counters.
//!
//! Every exponentiation, multiplication and pairing performed through the
//! [`group`](crate::group) types bumps a per-thread tally. [`counter_scope`]
//! reports the delta accumulated while a closure runs, which is how the bench
//! suite and the tests reproduce closed-form cost formulas.

use std::cell::Cell;
use std::fmt;
use std::ops::Sub;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounter {
    pub exp_g: u64,
    pub mul_g: u64,
    pub exp_gt: u64,
    pub mul_gt: u64,
    pub pairings: u64,
    pub exp_zp: u64,
}

impl Sub for OpCounter {
    type Output = OpCounter;

    fn sub(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            exp_g: self.exp_g - rhs.exp_g,
            mul_g: self.mul_g - rhs.mul_g,
            exp_gt: self.exp_gt - rhs.exp_gt,
            mul_gt: self.mul_gt - rhs.mul_gt,
            pairings: self.pairings - rhs.pairings,
            exp_zp: self.exp_zp - rhs.exp_zp,
        }
    }
}

impl fmt::Display for OpCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "exp_G={} mul_G={} exp_GT={} mul_GT={} pairings={} exp_Zp={}",
            self.exp_g, self.mul_g, self.exp_gt, self.mul_gt, self.pairings, self.exp_zp
        )
    }
}

thread_local! {
    static TALLY: Cell<OpCounter> = const { Cell::new(OpCounter {
        exp_g: 0, mul_g: 0, exp_gt: 0, mul_gt: 0, pairings: 0, exp_zp: 0,
    }) };
}

#[derive(Clone, Copy)]
pub(crate) enum Op {
    ExpG,
    MulG,
    ExpGt,
    MulGt,
    Pairing,
    ExpZp,
}

#[inline]
pub(crate) fn record(op: Op) {
    TALLY.with(|t| {
        let mut c = t.get();
        match op {
            Op::ExpG => c.exp_g += 1,
            Op::MulG => c.mul_g += 1,
            Op::ExpGt => c.exp_gt += 1,
            Op::MulGt => c.mul_gt += 1,
            Op::Pairing => c.pairings += 1,
            Op::ExpZp => c.exp_zp += 1,
        }
        t.set(c);
    });
}

/// Current running totals for this thread.
pub fn snapshot() -> OpCounter {
    TALLY.with(|t| t.get())
}

/// Runs `f` and returns its result with the group operations it executed on
/// this thread. Scopes may nest; each reports only its own delta.
pub fn counter_scope<R>(f: impl FnOnce() -> R) -> (R, OpCounter) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}
