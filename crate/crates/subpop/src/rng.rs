//! Keyed, platform-independent random streams.
//!
//! A stream is a ChaCha20 generator whose 32-byte seed is
//! `SHA-256(seed.to_le_bytes() || for each key part: len_le_u64 || bytes)`.
//! Integer ranges use rejection sampling on `next_u64`, and subset draws use a
//! partial Fisher-Yates pass written here, so outputs do not depend on the
//! internals of any `rand` version.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

pub struct Stream {
    inner: ChaCha20Rng,
}

impl Stream {
    pub fn new(seed: u64, parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Stream {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    /// Stream for a named purpose and a string key (e.g. a superclass node).
    pub fn keyed(seed: u64, purpose: &str, key: &str) -> Self {
        Self::new(seed, &[purpose.as_bytes(), key.as_bytes()])
    }

    /// Stream for a named purpose and an integer index (e.g. a bootstrap resample).
    pub fn indexed(seed: u64, purpose: &str, index: u64) -> Self {
        Self::new(seed, &[purpose.as_bytes(), &index.to_le_bytes()])
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        // reject the top partial block so every residue is equally likely
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Uniform float in [0, 1) with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        let n = xs.len();
        for i in 0..n.saturating_sub(1) {
            let j = i + self.below((n - i) as u64) as usize;
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order (partial Fisher-Yates).
    pub fn choose_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot choose {k} of {n}");
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}
