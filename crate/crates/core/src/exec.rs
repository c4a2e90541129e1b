//! Execution policy for the quadrant recursions.
//!
//! Every recursive kernel in this crate (multiplication, SpAMM, CSE) funnels
//! its fan-out through [`Exec::join`]. The parallel policy hands the two
//! closures to `rayon::join`; the sequential policy runs them in order. The
//! combination of results is done by the caller in a fixed operand order, so
//! the two policies produce bitwise-identical output.
//!
//! Without the `parallel` feature, [`Exec::Parallel`] degrades to sequential
//! execution.

/// How a recursive kernel schedules independent sub-problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Runs `a` and `b`, possibly concurrently, and returns both results.
    #[inline]
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            Exec::Sequential => (a(), b()),
            Exec::Parallel => par_join(a, b),
        }
    }

    /// Four-way join used for the four output quadrants of an inner node.
    #[inline]
    pub fn join4<F0, F1, F2, F3, R>(self, f0: F0, f1: F1, f2: F2, f3: F3) -> [R; 4]
    where
        F0: FnOnce() -> R + Send,
        F1: FnOnce() -> R + Send,
        F2: FnOnce() -> R + Send,
        F3: FnOnce() -> R + Send,
        R: Send,
    {
        let ((r0, r1), (r2, r3)) = self.join(|| self.join(f0, f1), || self.join(f2, f3));
        [r0, r1, r2, r3]
    }

    /// Policy to use for a sub-problem `levels` above the leaves. Near the
    /// leaves the work per task is too small to be worth a steal.
    #[inline]
    pub(crate) fn at_level(self, levels: u32) -> Exec {
        if levels < 2 {
            Exec::Sequential
        } else {
            self
        }
    }

    /// True when this policy actually runs work on a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

#[cfg(feature = "parallel")]
#[inline]
fn par_join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
#[inline]
fn par_join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    (a(), b())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join4_preserves_order() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(exec.join4(|| 0, || 1, || 2, || 3), [0, 1, 2, 3]);
        }
    }

    #[test]
    fn leaf_levels_run_sequentially() {
        assert_eq!(Exec::Parallel.at_level(0), Exec::Sequential);
        assert_eq!(Exec::Parallel.at_level(1), Exec::Sequential);
        assert_eq!(Exec::Parallel.at_level(2), Exec::Parallel);
    }
}
