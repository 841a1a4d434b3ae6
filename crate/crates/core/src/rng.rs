//! Counter-keyed random streams.
//!
//! Every draw in the crate comes from a [`Stream`] keyed by
//! `(seed, x_id, trial)`, so results never depend on scheduling or thread count.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, x_id: u64, trial: u64) -> Self {
        let mut state = seed ^ 0x6A09_E667_F3BC_C908;
        let mut key = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            splitmix64(&mut state) ^ x_id,
            splitmix64(&mut state) ^ trial,
            splitmix64(&mut state),
        ];
        for (i, w) in words.iter().enumerate() {
            key[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        // x_id and trial also select the stream so nearby keys never share output
        rng.set_stream(x_id.rotate_left(32) ^ trial);
        Stream { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse CDF.
    pub fn normal(&mut self) -> f64 {
        math::normal_quantile(self.uniform_open())
    }

    /// Inverse-CDF draw from a probability vector.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                last = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_stream() {
        let mut a = Stream::new(42, 3, 7);
        let mut b = Stream::new(42, 3, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_keys_differ() {
        let mut a = Stream::new(42, 3, 7);
        let mut b = Stream::new(42, 3, 8);
        let mut c = Stream::new(42, 4, 7);
        let xa = a.next_u64();
        assert_ne!(xa, b.next_u64());
        assert_ne!(xa, c.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut s = Stream::new(1, 0, 0);
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.normal();
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 4.0 / (n as f64).sqrt());
        assert!((m2 - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}
