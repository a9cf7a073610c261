//! Seeded random streams and measurement-matrix ensembles.
//!
//! Every randomized routine in the crate takes an [`RngSpec`]. The uniform
//! generator is SplitMix64; Gaussian entries come from Box-Muller applied to
//! consecutive pairs of uniforms, and Rademacher entries from the top bit of
//! each output.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::{Ensemble, MeasurementMatrix};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer (a bijection on `u64`).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream. Stream 0
    /// is plain SplitMix64 seeded with `seed`.
    pub fn generator(&self) -> SplitMix64 {
        let offset = if self.stream == 0 { 0 } else { mix64(self.stream) };
        SplitMix64::new(self.seed.wrapping_add(offset))
    }

    /// Parses a seed written in decimal or `0x`-prefixed hexadecimal.
    pub fn parse_seed(text: &str) -> Result<u64> {
        let t = text.trim();
        let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => t.parse::<u64>(),
        };
        parsed.map_err(|e| invalid(format!("bad seed '{text}': {e}")))
    }
}

impl fmt::Display for RngSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}/{:#x}", self.seed, self.stream)
    }
}

/// Deterministic child stream number `index` of `rng`.
pub fn derive_substream(rng: RngSpec, index: u64) -> RngSpec {
    let stream = mix64(
        mix64(rng.stream ^ GOLDEN_GAMMA)
            .wrapping_add(index)
            .wrapping_add(GOLDEN_GAMMA),
    );
    RngSpec {
        seed: rng.seed,
        // keep stream 0 reserved for the root stream
        stream: if stream == 0 { GOLDEN_GAMMA } else { stream },
    }
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    fn next_f64_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `+1` when the top bit of the next output is set, otherwise `-1`.
    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform integer in `[0, bound)` (Lemire's multiply-shift, slightly biased
    /// for huge bounds, which never occur here).
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}

/// Standard normal draws by Box-Muller over consecutive uniform pairs. Each
/// pair yields two variates, the cosine branch first.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(spec: RngSpec) -> Self {
        Self {
            rng: spec.generator(),
            spare: None,
        }
    }

    #[inline]
    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_f64_open_closed();
        let u2 = self.rng.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }
}

/// `m x n` matrix of i.i.d. standard normal entries, filled in row-major order.
pub fn gen_gaussian_matrix(rng: RngSpec, m: usize, n: usize) -> Result<MeasurementMatrix> {
    let len = m
        .checked_mul(n)
        .ok_or_else(|| invalid(format!("matrix size {m} x {n} overflows")))?;
    let mut normals = NormalStream::new(rng);
    let entries = (0..len).map(|_| normals.next()).collect();
    MeasurementMatrix::new(m, n, entries, Ensemble::Gaussian, Some(rng.seed))
}

/// `m x n` matrix of i.i.d. uniform signs, filled in row-major order.
pub fn gen_rademacher_matrix(rng: RngSpec, m: usize, n: usize) -> Result<MeasurementMatrix> {
    let len = m
        .checked_mul(n)
        .ok_or_else(|| invalid(format!("matrix size {m} x {n} overflows")))?;
    let mut g = rng.generator();
    let entries = (0..len).map(|_| g.next_sign()).collect();
    MeasurementMatrix::new(m, n, entries, Ensemble::Rademacher, Some(rng.seed))
}

/// Dispatches on the ensemble tag; `Explicit` has no generator.
pub fn gen_matrix(ensemble: Ensemble, rng: RngSpec, m: usize, n: usize) -> Result<MeasurementMatrix> {
    match ensemble {
        Ensemble::Gaussian => gen_gaussian_matrix(rng, m, n),
        Ensemble::Rademacher => gen_rademacher_matrix(rng, m, n),
        Ensemble::Explicit => Err(crate::Error::UnsupportedEnsemble(
            "explicit matrices cannot be sampled".into(),
        )),
    }
}
