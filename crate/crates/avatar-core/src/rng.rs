//! Small deterministic PRNG (splitmix64) so seeded outputs are stable
//! across platforms and dependency upgrades.

/// Deterministic 64-bit generator. Identical seeds yield identical streams
/// on every platform; that is the whole point of hand-rolling it.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derive an independent stream for a labeled sub-task (e.g. one per
    /// sub-clip job) without consuming this stream.
    pub fn fork(&self, label: u64) -> Rng {
        let mut mixed = self.state ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        mixed = splitmix(&mut mixed);
        Rng { state: mixed }
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix(&mut self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n) for n > 0.
    pub fn below(&mut self, n: u64) -> u64 {
        // Modulo bias is irrelevant at the scales used here (n << 2^64).
        self.next_u64() % n
    }

    /// Uniform integer in [lo, hi] inclusive.
    pub fn range_u64(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forks_are_independent_of_parent_consumption() {
        let mut parent = Rng::new(42);
        let mut f1 = parent.fork(3);
        let _ = parent.next_u64(); // consuming the parent later is fine
        let mut f2 = Rng::new(42).fork(3);
        assert_eq!(f1.next_u64(), f2.next_u64());
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut r = Rng::new(1);
        for _ in 0..1000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }
}
