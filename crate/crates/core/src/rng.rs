//! Counter-based random substreams.
//!
//! Every draw is a pure hash of `(seed, block, user, slot, lane, counter)`,
//! so simulation results do not depend on evaluation order or on how blocks
//! are partitioned across workers.

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn absorb(h: u64, v: u64) -> u64 {
    mix64(h ^ v.wrapping_mul(GOLDEN).wrapping_add(GOLDEN))
}

/// Independent draw lanes within one (block, user, slot) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Bernoulli packet arrival.
    Traffic = 0,
    /// Channel SNR inverse-CDF draw.
    Channel = 1,
    /// Action sampling in state-driven mode.
    Action = 2,
}

/// A keyed substream of uniform variates.
///
/// `keyed` addresses the (block, user) cell of a simulation; draws are then
/// addressed by slot and lane. `new` gives a plain sequential stream for
/// callers outside the slot grid (tests, mutant grids).
#[derive(Debug, Clone)]
pub struct SlotRng {
    key: u64,
    counter: u64,
}

impl SlotRng {
    pub fn new(seed: u64) -> Self {
        Self { key: mix64(seed ^ GOLDEN), counter: 0 }
    }

    pub fn keyed(seed: u64, block: u64, user: u64) -> Self {
        let mut k = mix64(seed ^ GOLDEN);
        k = absorb(k, block);
        k = absorb(k, user);
        Self { key: k, counter: 0 }
    }

    /// Uniform in (0, 1] addressed by (slot, lane); independent of call order.
    pub fn uniform_at(&self, slot: u64, lane: Lane) -> f64 {
        let h = absorb(absorb(self.key, slot), lane as u64);
        // 53 mantissa bits, shifted into (0, 1] so that -ln(u) is finite
        (((h >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Next uniform in (0, 1] from the sequential counter.
    pub fn next_uniform(&mut self) -> f64 {
        let h = absorb(self.key, self.counter);
        self.counter += 1;
        (((h >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }
}
