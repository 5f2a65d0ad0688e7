//! Counter-based keying of random streams.
//!
//! Every random draw is a pure function of an [`RngKey`]. The key is mapped
//! injectively onto a ChaCha8 (key, stream) pair, so samples can be computed
//! in any order or in parallel and still reproduce bit for bit.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest sample index representable in a key (exclusive).
pub const MAX_SAMPLE_INDEX: u64 = 1 << 40;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Role {
    /// KL amplitudes of the coefficient field.
    Field = 0,
    /// Anything else a sampler needs (toy models, bootstrap resampling).
    Auxiliary = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RngKey {
    pub seed: u64,
    pub level: u16,
    pub index: u64,
    pub role: Role,
    /// Redraw counter used when a realization is rejected.
    pub attempt: u8,
}

impl RngKey {
    pub fn new(seed: u64, level: usize, index: u64, role: Role) -> Self {
        assert!(level < (1 << 16), "level {level} does not fit in a key");
        assert!(index < MAX_SAMPLE_INDEX, "sample index {index} does not fit in a key");
        RngKey { seed, level: level as u16, index, role, attempt: 0 }
    }

    pub fn field(seed: u64, level: usize, index: u64) -> Self {
        Self::new(seed, level, index, Role::Field)
    }

    /// The key used after `self` produced a rejected realization.
    pub fn next_attempt(self) -> Self {
        RngKey { attempt: self.attempt.checked_add(1).expect("too many rejected draws"), ..self }
    }

    /// 64-bit ChaCha stream id; injective in (level, role, attempt, index).
    pub fn stream_id(&self) -> u64 {
        ((self.level as u64) << 48) | ((self.role as u64) << 44) | (((self.attempt & 0x0f) as u64) << 40) | self.index
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed;
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(self.stream_id());
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `m` independent standard normal variates from the stream keyed by `key`.
pub fn draw_xi(key: RngKey, m: usize) -> Vec<f64> {
    let mut rng = key.rng();
    (0..m).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_draws() {
        let key = RngKey::field(7, 1, 42);
        let a = draw_xi(key, 64);
        let b = draw_xi(key, 64);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn prefix_stable_in_length() {
        let key = RngKey::field(1, 0, 3);
        assert_eq!(draw_xi(key, 5)[..], draw_xi(key, 10)[..5]);
    }

    #[test]
    fn stream_ids_are_distinct() {
        let keys = [
            RngKey::field(1, 0, 0),
            RngKey::field(1, 1, 0),
            RngKey::field(1, 0, 1),
            RngKey::new(1, 0, 0, Role::Auxiliary),
            RngKey::field(1, 0, 0).next_attempt(),
        ];
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                assert_ne!(a.stream_id(), b.stream_id());
                assert_ne!(draw_xi(*a, 4), draw_xi(*b, 4));
            }
        }
        assert_ne!(draw_xi(RngKey::field(1, 0, 0), 4), draw_xi(RngKey::field(2, 0, 0), 4));
    }

    #[test]
    fn first_amplitude_has_zero_mean() {
        // CLT bound: |mean| < 4 / sqrt(n).
        let n = 1_000_000u64;
        let mean = (0..n).map(|i| draw_xi(RngKey::field(11, 0, i), 1)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn distinct_keys_are_uncorrelated() {
        let n = 10_000u64;
        let (mut sxy, mut sxx, mut syy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let x = draw_xi(RngKey::field(5, 0, i), 1)[0];
            let y = draw_xi(RngKey::field(5, 1, i), 1)[0];
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / (nf * nf);
        let corr = cov / libm::sqrt((sxx / nf - sx * sx / (nf * nf)) * (syy / nf - sy * sy / (nf * nf)));
        // Four standard errors of a sample correlation.
        assert!(corr.abs() < 4.0 / libm::sqrt(nf), "corr {corr}");
    }
}
