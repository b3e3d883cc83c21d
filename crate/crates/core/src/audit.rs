//! Separation between what learners may see and what only evaluation may read.
//!
//! True rewards travel in [`HiddenReward`]. Reading one while a
//! [`TrainingScope`] is active on the current thread bumps a leak counter,
//! which the harness reports and the tests require to stay at zero.

use std::cell::Cell;

thread_local! {
    static TRAINING_DEPTH: Cell<u32> = const { Cell::new(0) };
    static LEAKS: Cell<u64> = const { Cell::new(0) };
}

/// RAII marker for code paths that feed critics or agents.
#[derive(Debug)]
pub struct TrainingScope {
    _private: (),
}

impl TrainingScope {
    pub fn enter() -> Self {
        TRAINING_DEPTH.with(|d| d.set(d.get() + 1));
        Self { _private: () }
    }
}

impl Drop for TrainingScope {
    fn drop(&mut self) {
        TRAINING_DEPTH.with(|d| d.set(d.get() - 1));
    }
}

pub fn in_training() -> bool {
    TRAINING_DEPTH.with(|d| d.get() > 0)
}

/// Number of hidden-reward reads that happened inside a training scope on
/// this thread since the last [`reset_leaks`].
pub fn leak_count() -> u64 {
    LEAKS.with(|l| l.get())
}

pub fn reset_leaks() {
    LEAKS.with(|l| l.set(0));
}

/// A true reward that only evaluation code should read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenReward(f64);

impl HiddenReward {
    pub fn new(value: f64) -> Self {
        Self(value)
    }

    /// Evaluation-only access.
    pub fn reveal(&self) -> f64 {
        if in_training() {
            LEAKS.with(|l| l.set(l.get() + 1));
        }
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reveal_inside_training_counts_as_leak() {
        reset_leaks();
        let h = HiddenReward::new(1.5);
        assert_eq!(h.reveal(), 1.5);
        assert_eq!(leak_count(), 0);
        {
            let _s = TrainingScope::enter();
            let _nested = TrainingScope::enter();
            let _ = h.reveal();
        }
        assert_eq!(leak_count(), 1);
        assert!(!in_training());
        reset_leaks();
    }
}
