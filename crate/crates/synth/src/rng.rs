//! Seed streams and inverse-CDF samplers.
//!
//! Every stochastic unit (a replication, a worker, a cohort) owns a ChaCha8
//! stream keyed by `stream_seed(parent, index)`, so draws never depend on the
//! order in which units are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Discrete, DiscreteCDF, Normal, Poisson};

pub type SynthRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child `index` under `parent`.
pub fn stream_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_for(parent: u64, index: u64) -> SynthRng {
    SynthRng::seed_from_u64(stream_seed(parent, index))
}

/// Uniform on the open interval (0, 1).
pub fn open01(rng: &mut SynthRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Unit-rate exponential.
pub fn exp1(rng: &mut SynthRng) -> f64 {
    -open01(rng).ln()
}

pub fn std_normal(rng: &mut SynthRng) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(open01(rng))
}

/// Index drawn with probabilities `p` (assumed to sum to one).
pub fn categorical(rng: &mut SynthRng, p: &[f64]) -> usize {
    let u = open01(rng);
    let mut acc = 0.0;
    for (k, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Uniform integer in `lo..=hi`.
pub fn uniform_int(rng: &mut SynthRng, lo: i64, hi: i64) -> i64 {
    rng.random_range(lo..=hi)
}

/// Poisson draws by inversion. Small rates walk the CDF up from zero; larger
/// ones start at the mode, whose CDF is computed once, and walk towards `u`
/// in about `sqrt(lambda)` steps.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSampler {
    lambda: f64,
    mode: u64,
    cdf_mode: f64,
    pmf_mode: f64,
}

impl PoissonSampler {
    pub fn new(lambda: f64) -> Self {
        let lambda = lambda.max(0.0);
        if lambda < 30.0 {
            return Self {
                lambda,
                mode: 0,
                cdf_mode: (-lambda).exp(),
                pmf_mode: (-lambda).exp(),
            };
        }
        let dist = Poisson::new(lambda).expect("positive rate");
        let mode = lambda.floor() as u64;
        Self {
            lambda,
            mode,
            cdf_mode: dist.cdf(mode),
            pmf_mode: dist.pmf(mode),
        }
    }

    pub fn sample(&self, rng: &mut SynthRng) -> u64 {
        if self.lambda <= 0.0 {
            return 0;
        }
        let u = open01(rng);
        let (mut k, mut cdf, mut pk) = (self.mode, self.cdf_mode, self.pmf_mode);
        if u <= cdf {
            // step down while P(X <= k - 1) still covers u
            while k > 0 && u <= cdf - pk {
                cdf -= pk;
                pk *= k as f64 / self.lambda;
                k -= 1;
            }
        } else {
            while u > cdf && pk > 0.0 {
                k += 1;
                pk *= self.lambda / k as f64;
                cdf += pk;
            }
        }
        k
    }
}

pub fn poisson(rng: &mut SynthRng, lambda: f64) -> u64 {
    PoissonSampler::new(lambda).sample(rng)
}

pub fn binomial(rng: &mut SynthRng, n: u32, p: f64) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        return n - binomial(rng, n, 1.0 - p);
    }
    let q = 1.0 - p;
    let p0 = (n as f64 * q.ln()).exp();
    if p0 < 1e-280 {
        let half = n / 2;
        return binomial(rng, half, p) + binomial(rng, n - half, p);
    }
    let u = open01(rng);
    let ratio = p / q;
    let mut pk = p0;
    let mut cdf = p0;
    let mut k = 0u32;
    while u > cdf && k < n {
        pk *= ratio * (n - k) as f64 / (k + 1) as f64;
        k += 1;
        cdf += pk;
    }
    k
}
