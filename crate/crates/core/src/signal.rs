//! Signals, measurement matrices and the sign-measurement operator.
//!
//! Indices are 0-based in memory. Every serialized form uses 1-based
//! coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Whether a signal class admits supports of size exactly `k` or at most `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SupportSizeMode {
    #[default]
    ExactlyK,
    AtMostK,
}

/// The class `X_k(R)` of `k`-sparse vectors in `R^n` whose nonzero magnitudes
/// differ by at most a factor `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalClassSpec {
    pub n: usize,
    pub k: usize,
    pub dynamic_range: f64,
    #[serde(default)]
    pub support_size_mode: SupportSizeMode,
}

impl SignalClassSpec {
    pub fn new(n: usize, k: usize, dynamic_range: f64, mode: SupportSizeMode) -> Result<Self> {
        if k == 0 || k > n {
            return Err(invalid(format!("need 1 <= k <= n, got n={n}, k={k}")));
        }
        if !(dynamic_range >= 1.0) || !dynamic_range.is_finite() {
            return Err(invalid(format!(
                "dynamic range must be a finite real >= 1, got {dynamic_range}"
            )));
        }
        Ok(Self {
            n,
            k,
            dynamic_range,
            support_size_mode: mode,
        })
    }

    pub fn exactly(n: usize, k: usize, dynamic_range: f64) -> Result<Self> {
        Self::new(n, k, dynamic_range, SupportSizeMode::ExactlyK)
    }

    /// Support sizes admitted by the class (excluding the empty support).
    pub fn support_sizes(&self) -> std::ops::RangeInclusive<usize> {
        match self.support_size_mode {
            SupportSizeMode::ExactlyK => self.k..=self.k,
            SupportSizeMode::AtMostK => 1..=self.k,
        }
    }

    pub fn contains(&self, x: &SparseSignal) -> bool {
        if x.n != self.n {
            return false;
        }
        let size_ok = match self.support_size_mode {
            SupportSizeMode::ExactlyK => x.support_len() == self.k,
            SupportSizeMode::AtMostK => x.support_len() <= self.k,
        };
        if !size_ok {
            return false;
        }
        match x.dynamic_range() {
            Ok(ratio) => ratio <= self.dynamic_range,
            Err(_) => true,
        }
    }
}

/// A vector stored by its support and nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalRepr", into = "SignalRepr")]
pub struct SparseSignal {
    n: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSignal {
    /// Builds a signal from `(index, value)` entries with 0-based indices.
    /// Entries may come in any order.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("duplicate support index {}", w[0].0 + 1)));
            }
        }
        for &(i, v) in &entries {
            if i >= n {
                return Err(invalid(format!("support index {} outside [1, {n}]", i + 1)));
            }
            if v == 0.0 || !v.is_finite() {
                return Err(invalid(format!(
                    "value at index {} must be finite and nonzero, got {v}",
                    i + 1
                )));
            }
        }
        let (support, values) = entries.into_iter().unzip();
        Ok(Self { n, support, values })
    }

    /// Builds a signal from a dense vector; zeros are dropped from the support.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::from_entries(
            dense.len(),
            dense
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v)),
        )
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted 0-based support indices.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, v) in self.entries() {
            out[i] = v;
        }
        out
    }

    /// Ratio of the largest to the smallest nonzero magnitude.
    pub fn dynamic_range(&self) -> Result<f64> {
        if self.support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let (lo, hi) = self
            .values
            .iter()
            .map(|v| v.abs())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(a), hi.max(a)));
        Ok(hi / lo)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_entries(self.n, self.entries().map(|(i, v)| (i, v * c)))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Serialize, Deserialize)]
struct SignalRepr {
    n: usize,
    /// 1-based coordinates.
    support: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<SignalRepr> for SparseSignal {
    type Error = Error;

    fn try_from(r: SignalRepr) -> Result<Self> {
        if r.support.len() != r.values.len() {
            return Err(Error::DimensionMismatch {
                expected: r.support.len(),
                got: r.values.len(),
            });
        }
        if r.support.contains(&0) {
            return Err(invalid("support indices are 1-based"));
        }
        SparseSignal::from_entries(r.n, r.support.into_iter().map(|i| i - 1).zip(r.values))
    }
}

impl From<SparseSignal> for SignalRepr {
    fn from(s: SparseSignal) -> Self {
        SignalRepr {
            n: s.n,
            support: s.support.iter().map(|i| i + 1).collect(),
            values: s.values,
        }
    }
}

/// Provenance of a measurement matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Gaussian,
    Rademacher,
    Explicit,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::Rademacher => "rademacher",
            Ensemble::Explicit => "explicit",
        })
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Ensemble::Gaussian),
            "rademacher" => Ok(Ensemble::Rademacher),
            "explicit" => Ok(Ensemble::Explicit),
            other => Err(invalid(format!("unknown ensemble '{other}'"))),
        }
    }
}

/// A dense `m x n` matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMatrix {
    m: usize,
    n: usize,
    entries: Vec<f64>,
    ensemble: Ensemble,
    seed: Option<u64>,
}

impl MeasurementMatrix {
    pub fn new(
        m: usize,
        n: usize,
        entries: Vec<f64>,
        ensemble: Ensemble,
        seed: Option<u64>,
    ) -> Result<Self> {
        let expected = m
            .checked_mul(n)
            .ok_or_else(|| invalid(format!("matrix size {m} x {n} overflows")))?;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: entries.len(),
            });
        }
        if n == 0 {
            return Err(invalid("matrix needs at least one column"));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("matrix entry {bad} is not finite")));
        }
        if ensemble == Ensemble::Rademacher {
            if let Some(bad) = entries.iter().find(|&&v| v != 1.0 && v != -1.0) {
                return Err(invalid(format!("rademacher entry {bad} not in {{-1, +1}}")));
            }
        }
        Ok(Self {
            m,
            n,
            entries,
            ensemble,
            seed,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], ensemble: Ensemble) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::new(rows.len(), n, rows.concat(), ensemble, None)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.m).map(move |i| self.row(i))
    }

    /// Row `i` restricted to its first `n - 2` coordinates.
    pub fn truncated_row(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.n.saturating_sub(2)]
    }

    /// The first `rows` rows as a new matrix (same provenance).
    pub fn top_rows(&self, rows: usize) -> Self {
        let rows = rows.min(self.m);
        Self {
            m: rows,
            n: self.n,
            entries: self.entries[..rows * self.n].to_vec(),
            ensemble: self.ensemble,
            seed: self.seed,
        }
    }
}

/// A vector over `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern {
    bits: Vec<i8>,
}

impl SignPattern {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(invalid(format!("sign bit {b} not in {{-1, +1}}")));
        }
        Ok(Self { bits })
    }

    pub(crate) fn from_bits_unchecked(bits: Vec<i8>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SignPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(invalid(format!("unexpected sign character '{other}'"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(|bits| Self { bits })
    }
}

/// `sign(0) = +1`.
#[inline]
pub fn sign_of(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Inner product of row `i` with the signal, over the support only.
#[inline]
pub(crate) fn row_dot(a: &MeasurementMatrix, i: usize, x: &SparseSignal) -> f64 {
    let row = a.row(i);
    x.entries().map(|(j, v)| row[j] * v).sum()
}

/// `b = sign(Ax)` with the convention `sign(0) = +1`.
pub fn sign_measure(a: &MeasurementMatrix, x: &SparseSignal) -> Result<SignPattern> {
    if x.n() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: x.n(),
        });
    }
    Ok(SignPattern::from_bits_unchecked(
        (0..a.m()).map(|i| sign_of(row_dot(a, i, x))).collect(),
    ))
}

/// True when `x` and `y` have different supports but the same sign pattern,
/// i.e. the pair shows that `a` is not a valid universal measurement matrix.
pub fn confusable(a: &MeasurementMatrix, x: &SparseSignal, y: &SparseSignal) -> Result<bool> {
    let bx = sign_measure(a, x)?;
    let by = sign_measure(a, y)?;
    Ok(x.support() != y.support() && bx == by)
}

/// Serde adapter writing 0-based index lists as 1-based.
pub(crate) mod one_based {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(idx: &[usize], s: S) -> Result<S::Ok, S::Error> {
        idx.iter().map(|i| i + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        raw.into_iter()
            .map(|i| {
                i.checked_sub(1)
                    .ok_or_else(|| serde::de::Error::custom("indices are 1-based"))
            })
            .collect()
    }
}
