//! Vector balancing and the reduction from unbalanced families to invalid
//! measurement matrices.
//!
//! A family `V` of vectors in `R^n` is `(n, l, d)`-balanced when every
//! `l`-subset `S` of coordinates has some `v` in `V` with `|sum_S v| <= d`.
//! Witness queries scan subsets in lexicographic order with prefix sums, so
//! the first hit is the lexicographically smallest violator; long scans are
//! split across threads by combinadic rank. Counting uses the revolving-door
//! order with one-in/one-out sum updates.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinations::{binomial_u128, next_lex, unrank_lex, RevolvingDoor};
use crate::ensembles::{derive_substream, gen_matrix, RngSpec};
use crate::probability::ProbabilityEstimate;
use crate::error::{invalid, precondition, Error, Result};
use crate::signal::{confusable, one_based, Ensemble, MeasurementMatrix, SparseSignal};

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 100_000_000;

/// Below this many subsets a scan runs on the calling thread.
const PARALLEL_THRESHOLD: u128 = 1 << 15;
/// Incremental sums are recomputed from scratch this often.
const RESYNC_INTERVAL: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub n: usize,
    pub ell: usize,
    pub d: f64,
}

impl BalanceSpec {
    pub fn new(n: usize, ell: usize, d: f64) -> Result<Self> {
        if ell == 0 || ell > n {
            return Err(invalid(format!("need 1 <= ell <= n, got n={n}, ell={ell}")));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(invalid(format!("margin d must be finite and >= 0, got {d}")));
        }
        Ok(Self { n, ell, d })
    }

    /// The instance `(n - 2, k - 1, sqrt(4 ln m) / R)` for the truncated
    /// rows of an `m x n` matrix.
    pub fn gaussian_reduction(n: usize, k: usize, m: usize, r: f64) -> Result<Self> {
        if m < 2 {
            return Err(precondition(format!("need m >= 2 so that log m > 0, got m={m}")));
        }
        if k < 2 || n < k + 1 {
            return Err(precondition(format!("need 2 <= k and n >= k + 1, got n={n}, k={k}")));
        }
        Self::new(n - 2, k - 1, tail_threshold(m) / r)
    }

    pub fn subset_count(&self) -> u128 {
        binomial_u128(self.n as u64, self.ell as u64).unwrap_or(u128::MAX)
    }
}

/// `sqrt(4 ln m)`.
pub fn tail_threshold(m: usize) -> f64 {
    (4.0 * (m as f64).ln()).sqrt()
}

/// A finite family of vectors of a common dimension, stored coordinate-major
/// so that the contributions of one coordinate to every vector are adjacent.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFamily {
    dim: usize,
    count: usize,
    cols: Vec<f64>,
}

impl VectorFamily {
    pub fn from_vectors(dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let count = vectors.len();
        let mut cols = vec![0.0; dim * count];
        for (v, vec) in vectors.iter().enumerate() {
            if vec.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: vec.len(),
                });
            }
            for (i, &x) in vec.iter().enumerate() {
                cols[i * count + v] = x;
            }
        }
        Ok(Self { dim, count, cols })
    }

    /// The rows of `a` restricted to their first `ncols` coordinates.
    pub fn from_matrix(a: &MeasurementMatrix, ncols: usize) -> Result<Self> {
        if ncols > a.n() {
            return Err(Error::DimensionMismatch {
                expected: a.n(),
                got: ncols,
            });
        }
        let count = a.m();
        let mut cols = vec![0.0; ncols * count];
        for v in 0..count {
            for (i, &x) in a.row(v)[..ncols].iter().enumerate() {
                cols[i * count + v] = x;
            }
        }
        Ok(Self {
            dim: ncols,
            count,
            cols,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn vector(&self, v: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.cols[i * self.count + v]).collect()
    }

    #[inline]
    fn coord(&self, i: usize) -> &[f64] {
        &self.cols[i * self.count..(i + 1) * self.count]
    }

    /// Whether no vector balances `subset`.
    pub fn violates(&self, subset: &[usize], d: f64) -> bool {
        (0..self.count).all(|v| subset.iter().map(|&i| self.coord(i)[v]).sum::<f64>().abs() > d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BalanceOutcome {
    Balanced,
    Unbalanced {
        #[serde(with = "one_based")]
        witness: Vec<usize>,
    },
}

impl BalanceOutcome {
    pub fn is_balanced(&self) -> bool {
        matches!(self, BalanceOutcome::Balanced)
    }
}

fn check_inputs(family: &VectorFamily, spec: &BalanceSpec, budget: u128) -> Result<u128> {
    if family.dim != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: family.dim,
        });
    }
    let total = spec.subset_count();
    if total > budget {
        return Err(Error::BudgetExceeded {
            required: total,
            budget,
        });
    }
    Ok(total)
}

/// Lexicographic scan of a rank range with per-position prefix sums.
struct LexScan<'a> {
    family: &'a VectorFamily,
    d: f64,
    combo: Vec<usize>,
    partial: Vec<f64>,
}

impl<'a> LexScan<'a> {
    fn new(family: &'a VectorFamily, spec: &BalanceSpec, rank: u128) -> Self {
        let combo = unrank_lex(spec.n, spec.ell, rank);
        let mut s = Self {
            family,
            d: spec.d,
            partial: vec![0.0; spec.ell * family.count],
            combo,
        };
        s.refresh(0);
        s
    }

    fn refresh(&mut self, from: usize) {
        let m = self.family.count;
        for pos in from..self.combo.len() {
            let col = self.family.coord(self.combo[pos]);
            let (before, here) = self.partial.split_at_mut(pos * m);
            let here = &mut here[..m];
            if pos == 0 {
                here.copy_from_slice(col);
            } else {
                let prev = &before[(pos - 1) * m..];
                for v in 0..m {
                    here[v] = prev[v] + col[v];
                }
            }
        }
    }

    #[inline]
    fn violates(&self) -> bool {
        let m = self.family.count;
        let last = &self.partial[(self.combo.len() - 1) * m..];
        last.iter().all(|s| s.abs() > self.d)
    }

    /// Visits `len` subsets starting at the current one.
    fn run(&mut self, len: u128, mut f: impl FnMut(&[usize]) -> ControlFlow<()>) -> ControlFlow<()> {
        let n = self.family.dim;
        for step in 0..len {
            if self.violates() {
                f(&self.combo)?;
            }
            if step + 1 < len {
                match next_lex(n, &mut self.combo) {
                    Some(pos) => self.refresh(pos),
                    None => break,
                }
            }
        }
        ControlFlow::Continue(())
    }
}

fn chunks(total: u128) -> Vec<(u128, u128)> {
    let pieces = (rayon::current_num_threads() as u128 * 8).max(1);
    let size = total.div_ceil(pieces).max(PARALLEL_THRESHOLD / 4);
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let len = size.min(total - start);
        out.push((start, len));
        start += len;
    }
    out
}

/// Decides `(n, l, d)`-balancedness; on failure returns the
/// lexicographically smallest violating subset.
pub fn is_balanced(family: &VectorFamily, spec: &BalanceSpec, budget: u128) -> Result<BalanceOutcome> {
    Ok(match find_unbalanced_sets(family, spec, 1, budget)?.pop() {
        None => BalanceOutcome::Balanced,
        Some(witness) => BalanceOutcome::Unbalanced { witness },
    })
}

/// Up to `limit` violating subsets, in lexicographic order.
pub fn find_unbalanced_sets(
    family: &VectorFamily,
    spec: &BalanceSpec,
    limit: usize,
    budget: u128,
) -> Result<Vec<Vec<usize>>> {
    let total = check_inputs(family, spec, budget)?;
    if limit == 0 {
        return Ok(Vec::new());
    }
    let collect = |start: u128, len: u128| {
        let mut found = Vec::new();
        let mut scan = LexScan::new(family, spec, start);
        let _ = scan.run(len, |s| {
            found.push(s.to_vec());
            if found.len() >= limit {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        found
    };
    if total < PARALLEL_THRESHOLD {
        return Ok(collect(0, total));
    }
    if limit == 1 {
        let first = chunks(total)
            .into_par_iter()
            .find_map_first(|(start, len)| collect(start, len).pop());
        return Ok(first.into_iter().collect());
    }
    let per_chunk: Vec<Vec<Vec<usize>>> = chunks(total)
        .into_par_iter()
        .map(|(start, len)| collect(start, len))
        .collect();
    Ok(per_chunk.into_iter().flatten().take(limit).collect())
}

/// Calls `visit` on violating subsets in lexicographic order until it breaks.
pub fn for_each_unbalanced(
    family: &VectorFamily,
    spec: &BalanceSpec,
    budget: u128,
    visit: impl FnMut(&[usize]) -> ControlFlow<()>,
) -> Result<()> {
    let total = check_inputs(family, spec, budget)?;
    let _ = LexScan::new(family, spec, 0).run(total, visit);
    Ok(())
}

/// Number of violating subsets, enumerated in revolving-door order.
pub fn count_unbalanced_sets(family: &VectorFamily, spec: &BalanceSpec, budget: u128) -> Result<u128> {
    check_inputs(family, spec, budget)?;
    let m = family.count;
    let mut sums = vec![0.0; m];
    let mut count = 0u128;
    let mut steps = 0u64;
    RevolvingDoor::new(spec.n, spec.ell).for_each(|combo, swap| {
        match swap {
            Some(s) if steps % RESYNC_INTERVAL != 0 => {
                let (out, into) = (family.coord(s.out), family.coord(s.into));
                for v in 0..m {
                    sums[v] += into[v] - out[v];
                }
            }
            _ => {
                sums.iter_mut().for_each(|x| *x = 0.0);
                for &i in combo {
                    for (acc, x) in sums.iter_mut().zip(family.coord(i)) {
                        *acc += x;
                    }
                }
            }
        }
        steps += 1;
        if sums.iter().all(|s| s.abs() > spec.d) {
            count += 1;
        }
    });
    Ok(count)
}

/// Two signals with different supports that a matrix cannot tell apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    #[serde(with = "one_based")]
    pub subset: Vec<usize>,
    /// The coordinates completing `x` and `y` respectively.
    #[serde(with = "one_based")]
    pub reserved: Vec<usize>,
    pub x: SparseSignal,
    pub y: SparseSignal,
    pub dynamic_range: f64,
    /// Whether every row satisfies `|R sum_S a| > max(|a_x|, |a_y|)`.
    pub dominance: bool,
}

/// Per-row dominance of the common part over the two distinguishing entries.
pub fn dominance_holds(a: &MeasurementMatrix, subset: &[usize], r: f64, ex: usize, ey: usize) -> bool {
    a.rows().all(|row| {
        let s: f64 = subset.iter().map(|&j| row[j]).sum();
        (r * s).abs() > row[ex].abs().max(row[ey].abs())
    })
}

/// `x = R` on `subset` plus `1` at `ex`; `y = R` on `subset` plus `1` at `ey`.
pub fn build_witness_pair_at(
    a: &MeasurementMatrix,
    subset: &[usize],
    r: f64,
    ex: usize,
    ey: usize,
) -> Result<WitnessPair> {
    let n = a.n();
    if !(r >= 1.0) || !r.is_finite() {
        return Err(invalid(format!("dynamic range must be finite and >= 1, got {r}")));
    }
    if ex == ey || ex >= n || ey >= n {
        return Err(precondition(format!(
            "distinguishing coordinates {} and {} must be distinct and in [1, {n}]",
            ex + 1,
            ey + 1
        )));
    }
    if subset.is_empty() {
        return Err(precondition("subset must be nonempty"));
    }
    for w in subset.windows(2) {
        if w[0] >= w[1] {
            return Err(precondition("subset must be strictly increasing"));
        }
    }
    if let Some(&bad) = subset.iter().find(|&&j| j >= n || j == ex || j == ey) {
        return Err(precondition(format!(
            "subset index {} overlaps the distinguishing coordinates or exceeds n={n}",
            bad + 1
        )));
    }
    let common = subset.iter().map(|&j| (j, r));
    let x = SparseSignal::from_entries(n, common.clone().chain([(ex, 1.0)]))?;
    let y = SparseSignal::from_entries(n, common.chain([(ey, 1.0)]))?;
    Ok(WitnessPair {
        subset: subset.to_vec(),
        reserved: vec![ex, ey],
        x,
        y,
        dynamic_range: r,
        dominance: dominance_holds(a, subset, r, ex, ey),
    })
}

/// The witness pair on the last two coordinates.
pub fn build_witness_pair(a: &MeasurementMatrix, subset: &[usize], r: f64) -> Result<WitnessPair> {
    let n = a.n();
    if n < 3 {
        return Err(precondition(format!("need n >= 3, got n={n}")));
    }
    build_witness_pair_at(a, subset, r, n - 2, n - 1)
}

/// Whether every entry of the last two columns is at most `sqrt(4 ln m)`
/// in magnitude.
pub fn column_tail_check(a: &MeasurementMatrix) -> Result<bool> {
    let (m, n) = (a.m(), a.n());
    if m < 2 {
        return Err(precondition(format!("need m >= 2, got m={m}")));
    }
    if n < 2 {
        return Err(precondition(format!("need n >= 2, got n={n}")));
    }
    let t = tail_threshold(m);
    Ok(a.rows().all(|row| row[n - 2].abs() <= t && row[n - 1].abs() <= t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Truncated rows, margin `sqrt(4 ln m) / R`, last two columns reserved.
    GaussianTail,
    /// Truncated rows, margin `1 / R`; entries of size one make the tail
    /// bound automatic.
    RademacherTail,
    /// Full rows, margin `1`, distinguishing coordinates picked outside `S`.
    RademacherFullRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoCertificateReason {
    /// The family is balanced: no subset violates.
    Balanced,
    /// Violating subsets exist but none satisfies row dominance.
    DominanceFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PipelineOutcome {
    Certificate { witness: WitnessPair },
    NoCertificate { reason: NoCertificateReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub outcome: PipelineOutcome,
    pub reduction: Reduction,
    pub spec: BalanceSpec,
    /// Result of [`column_tail_check`] where the reduction uses it.
    pub tail_check: Option<bool>,
    pub unbalanced_seen: u64,
}

impl PipelineReport {
    pub fn certificate(&self) -> Option<&WitnessPair> {
        match &self.outcome {
            PipelineOutcome::Certificate { witness } => Some(witness),
            PipelineOutcome::NoCertificate { .. } => None,
        }
    }
}

/// Searches for a confusable pair in `X_k(R)` through an unbalanced subset
/// of the rows of `a`. A certificate is verified with [`confusable`] before
/// it is returned; the absence of one says nothing about validity.
pub fn invalidity_pipeline(a: &MeasurementMatrix, k: usize, r: f64, budget: u128) -> Result<PipelineReport> {
    let n = a.n();
    if k < 2 || n < k + 1 {
        return Err(precondition(format!("need 2 <= k and n >= k + 1, got n={n}, k={k}")));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(invalid(format!("dynamic range must be finite and >= 1, got {r}")));
    }
    let (reduction, spec, tail_check, family) = match a.ensemble() {
        Ensemble::Rademacher if r == 1.0 => (
            Reduction::RademacherFullRow,
            BalanceSpec::new(n, k - 1, 1.0)?,
            None,
            VectorFamily::from_matrix(a, n)?,
        ),
        Ensemble::Rademacher => (
            Reduction::RademacherTail,
            BalanceSpec::new(n - 2, k - 1, 1.0 / r)?,
            None,
            VectorFamily::from_matrix(a, n - 2)?,
        ),
        Ensemble::Gaussian | Ensemble::Explicit => (
            Reduction::GaussianTail,
            BalanceSpec::gaussian_reduction(n, k, a.m(), r)?,
            Some(column_tail_check(a)?),
            VectorFamily::from_matrix(a, n - 2)?,
        ),
    };
    let mut seen = 0u64;
    let mut found: Option<Result<WitnessPair>> = None;
    for_each_unbalanced(&family, &spec, budget, |s| {
        seen += 1;
        let (ex, ey) = match reduction {
            Reduction::RademacherFullRow => {
                let mut free = (0..n).filter(|j| s.binary_search(j).is_err());
                (free.next().unwrap_or(0), free.next().unwrap_or(0))
            }
            _ => (n - 2, n - 1),
        };
        if !dominance_holds(a, s, r, ex, ey) {
            return ControlFlow::Continue(());
        }
        let pair = build_witness_pair_at(a, s, r, ex, ey);
        let verified = pair
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|p| confusable(a, &p.x, &p.y));
        match verified {
            Ok(true) => {
                found = Some(pair);
                ControlFlow::Break(())
            }
            // dominance held but rounding broke the tie; keep looking
            Ok(false) => ControlFlow::Continue(()),
            Err(e) => {
                found = Some(Err(e));
                ControlFlow::Break(())
            }
        }
    })?;
    let outcome = match found {
        Some(pair) => PipelineOutcome::Certificate { witness: pair? },
        None => PipelineOutcome::NoCertificate {
            reason: if seen == 0 {
                NoCertificateReason::Balanced
            } else {
                NoCertificateReason::DominanceFailed
            },
        },
    };
    Ok(PipelineReport {
        outcome,
        reduction,
        spec,
        tail_check,
        unbalanced_seen: seen,
    })
}

/// Monte Carlo estimate of the probability that `m` fresh vectors from the
/// ensemble fail to be `(n, l, d)`-balanced. Trial `i` draws its family from
/// substream `i` of `rng`.
pub fn estimate_unbalanced_probability(
    spec: &BalanceSpec,
    m: usize,
    ensemble: Ensemble,
    rng: RngSpec,
    trials: u64,
    budget: u128,
) -> Result<ProbabilityEstimate> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let total = spec.subset_count();
    if total > budget {
        return Err(Error::BudgetExceeded {
            required: total,
            budget,
        });
    }
    let hits: Result<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let a = gen_matrix(ensemble, derive_substream(rng, i), m, spec.n)?;
            let family = VectorFamily::from_matrix(&a, spec.n)?;
            Ok(!is_balanced(&family, spec, budget)?.is_balanced())
        })
        .collect();
    let successes = hits?.into_iter().filter(|&h| h).count() as u64;
    Ok(ProbabilityEstimate::monte_carlo(successes, trials))
}
