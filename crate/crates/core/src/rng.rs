//! Counter-based deterministic random stream.
//!
//! One generator per run, split per agent by agent index. Output is a pure
//! function of (key, counter), so identical seeds give identical runs on
//! every platform.

/// splitmix64 finalizer; the standard constants.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct DetRng {
    key: u64,
    counter: u64,
}

impl DetRng {
    pub fn new(seed: u64) -> DetRng {
        DetRng {
            key: mix(seed ^ 0x5851_f42d_4c95_7f2d),
            counter: 0,
        }
    }

    /// Derive an independent stream, e.g. one per agent index or trial.
    pub fn derive(&self, label: &str, index: u64) -> DetRng {
        let mut k = self.key;
        for b in label.bytes() {
            k = mix(k ^ u64::from(b));
        }
        DetRng {
            key: mix(k ^ index.wrapping_mul(0xa076_1d64_78bd_642f)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key ^ mix(self.counter));
        self.counter += 1;
        out
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli trial; `p` outside [0,1] saturates.
    pub fn chance(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            // Still consume a draw so stream positions stay aligned.
            self.next_u64();
            return true;
        }
        if p <= 0.0 {
            self.next_u64();
            return false;
        }
        self.next_f64() < p
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Desk-scale n: modulo bias is negligible and determinism is what matters.
        self.next_u64() % n
    }
}
