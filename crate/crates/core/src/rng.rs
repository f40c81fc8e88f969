//! Counter-based random substreams.
//!
//! Every draw in a simulation is addressed by `(owner, epoch, query, slot)`.
//! The substream for an address is a pure function of the master seed and the
//! address, so the order in which owners are simulated (or the number of
//! worker threads) never changes a result.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Stafford variant 13).
#[inline(always)]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Response slot of the dual/triple-response protocols. Single-response
/// mechanisms always use [`Slot::A`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    A,
    B,
    C,
}

impl Slot {
    pub const fn index(self) -> usize {
        match self {
            Slot::A => 0,
            Slot::B => 1,
            Slot::C => 2,
        }
    }
}

/// Address of one substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub owner: u64,
    pub epoch: u64,
    pub query: u64,
    pub slot: Slot,
}

impl StreamKey {
    pub const fn new(owner: u64, epoch: u64, query: u64, slot: Slot) -> Self {
        Self {
            owner,
            epoch,
            query,
            slot,
        }
    }
}

/// A deterministic random stream: the `i`-th output is `mix64(base + (i+1)·γ)`.
///
/// Not cryptographically secure; it only decides simulated coin tosses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substream {
    base: u64,
    counter: u64,
}

impl Substream {
    /// Stream for `key` under `master_seed`.
    pub fn new(master_seed: u64, key: StreamKey) -> Self {
        let mut h = mix64(master_seed ^ 0x616C_705F_7365_6564);
        h = mix64(h ^ key.owner);
        h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ key.epoch);
        h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ key.query);
        h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ key.slot.index() as u64);
        Self::from_raw(h)
    }

    /// Stream seeded directly from a 64-bit value.
    pub fn from_raw(base: u64) -> Self {
        Self { base, counter: 0 }
    }

    /// Uniform double in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for Substream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(
            self.base
                .wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Uniform double in `[0, 1)` from any generator.
#[inline]
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_stream() {
        let key = StreamKey::new(7, 3, 0, Slot::B);
        let mut a = Substream::new(42, key);
        let mut b = Substream::new(42, key);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn neighbouring_keys_differ() {
        let base = StreamKey::new(7, 3, 0, Slot::A);
        let first = Substream::new(42, base).next_u64();
        let variants = [
            StreamKey { owner: 8, ..base },
            StreamKey { epoch: 4, ..base },
            StreamKey { query: 1, ..base },
            StreamKey {
                slot: Slot::B,
                ..base
            },
        ];
        for key in variants {
            assert_ne!(Substream::new(42, key).next_u64(), first, "{key:?}");
        }
        assert_ne!(Substream::new(43, base).next_u64(), first);
    }

    #[test]
    fn uniform_mean_is_half() {
        let mut s = Substream::from_raw(1);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| s.next_f64()).sum::<f64>() / n as f64;
        // sd of the mean is sqrt(1/12/n) ~ 6.5e-4
        assert!((mean - 0.5).abs() < 4e-3, "{mean}");
    }
}
