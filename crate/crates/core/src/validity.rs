//! Exhaustive universal-validity checking and support decoding.
//!
//! For a support `S` and a sign assignment `sigma` on `S`, every signal
//! `x = sigma * u` with `u` in `[1, R]^|S|` is a class member up to scaling.
//! The sign patterns such signals can produce are enumerated by a depth-first
//! search over the rows, where each branch is kept only if a max-margin LP
//! certifies that the partial pattern is realizable. Two supports collide
//! when their pattern sets intersect.
//!
//! A row `a` with required sign `-1` is encoded as `a . x <= -delta` with
//! `delta = 1e-9 * |a| * R * sqrt(k)`; required sign `+1` is `a . x >= 0`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinations::{binomial_u128, LexCombinations};
use crate::ensembles::SplitMix64;
use crate::error::{invalid, Error, Result};
use crate::lp::{FeasibilityMethod, MarginLp};
use crate::signal::{
    confusable, sign_measure, MeasurementMatrix, SignPattern, SignalClassSpec,
    SparseSignal, SupportSizeMode,
};

pub const DEFAULT_LP_BUDGET: u64 = 20_000_000;
const STRICT_FACTOR: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-12;
/// Supports are processed in batches so a collision stops the search early.
const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityOptions {
    /// Maximum number of LP solves.
    pub budget: u64,
    pub method: FeasibilityMethod,
    /// Treat the zero vector as a class member under `at_most_k`.
    pub include_empty_support: bool,
}

impl Default for ValidityOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_LP_BUDGET,
            method: FeasibilityMethod::Simplex,
            include_empty_support: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub x: SparseSignal,
    pub y: SparseSignal,
    pub pattern: SignPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    /// Unordered support pairs whose pattern sets were compared.
    pub pairs_checked: u128,
    pub lp_solves: u64,
    pub method_notes: String,
}

/// All supports admitted by the class, smallest size first, then lexicographic.
pub fn class_supports(spec: &SignalClassSpec, include_empty: bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if include_empty && spec.support_size_mode == SupportSizeMode::AtMostK {
        out.push(Vec::new());
    }
    for size in spec.support_sizes() {
        out.extend(LexCombinations::new(spec.n, size));
    }
    out
}

fn support_count(spec: &SignalClassSpec) -> u128 {
    spec.support_sizes()
        .map(|s| binomial_u128(spec.n as u64, s as u64).unwrap_or(u128::MAX))
        .fold(0u128, u128::saturating_add)
}

fn check_dims(a: &MeasurementMatrix, spec: &SignalClassSpec) -> Result<()> {
    if a.n() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: spec.n,
        });
    }
    Ok(())
}

/// Shared LP-solve counter; solving stops once the budget is spent.
struct Budget {
    used: AtomicU64,
    limit: u64,
}

impl Budget {
    fn take(&self) -> bool {
        self.used.fetch_add(1, Ordering::Relaxed) < self.limit
    }
}

struct RowData {
    /// `delta` for each row.
    strict: Vec<f64>,
}

impl RowData {
    fn new(a: &MeasurementMatrix, spec: &SignalClassSpec) -> Self {
        let scale = STRICT_FACTOR * spec.dynamic_range * (spec.k as f64).sqrt();
        Self {
            strict: a
                .rows()
                .map(|r| scale * r.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect(),
        }
    }
}

/// Coefficients of row `i` on the support, with the sign assignment folded in.
fn folded_row(a: &MeasurementMatrix, i: usize, support: &[usize], sigma: &[f64]) -> Vec<f64> {
    let row = a.row(i);
    support.iter().zip(sigma).map(|(&j, s)| row[j] * s).collect()
}

fn push_row(lp: &mut MarginLp, coeffs: &[f64], bit: i8, strict: f64) {
    if bit > 0 {
        lp.push(coeffs.to_vec(), 0.0);
    } else {
        lp.push(coeffs.iter().map(|c| -c).collect(), strict);
    }
}

fn signal_from(n: usize, support: &[usize], sigma: &[f64], u: &[f64]) -> SparseSignal {
    SparseSignal::from_entries(
        n,
        support.iter().zip(sigma.iter().zip(u)).map(|(&j, (s, u))| (j, s * u)),
    )
    .expect("box points are finite and nonzero")
}

fn sigmas(size: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u64..1 << size).map(move |mask| {
        (0..size)
            .map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 })
            .collect()
    })
}

/// Every sign pattern realizable on `support`, each with one realizing signal.
/// `None` when the budget runs out.
fn realizable_patterns(
    a: &MeasurementMatrix,
    spec: &SignalClassSpec,
    rows: &RowData,
    support: &[usize],
    method: FeasibilityMethod,
    budget: &Budget,
) -> Option<Vec<(Vec<i8>, SparseSignal)>> {
    let (m, n) = (a.m(), a.n());
    if support.is_empty() {
        return Some(vec![(vec![1; m], SparseSignal::zero(n))]);
    }
    let mut found: HashMap<Vec<i8>, SparseSignal> = HashMap::new();
    for sigma in sigmas(support.len()) {
        let coeffs: Vec<Vec<f64>> = (0..m).map(|i| folded_row(a, i, support, &sigma)).collect();
        let mut lp = MarginLp::new(support.len(), 1.0, spec.dynamic_range);
        if !budget.take() {
            return None;
        }
        let root = lp.solve(method);
        let mut prefix = Vec::with_capacity(m);
        let ok = dfs(
            &coeffs, rows, &mut lp, &mut prefix, root.margin, root.point, method, budget,
            &mut |bits, u| {
                found
                    .entry(bits.to_vec())
                    .or_insert_with(|| signal_from(n, support, &sigma, u));
            },
        );
        if !ok {
            return None;
        }
    }
    let mut out: Vec<_> = found.into_iter().collect();
    out.sort_by(|p, q| p.0.cmp(&q.0));
    Some(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    coeffs: &[Vec<f64>],
    rows: &RowData,
    lp: &mut MarginLp,
    prefix: &mut Vec<i8>,
    margin: f64,
    point: Vec<f64>,
    method: FeasibilityMethod,
    budget: &Budget,
    leaf: &mut impl FnMut(&[i8], &[f64]),
) -> bool {
    let i = prefix.len();
    if i == coeffs.len() {
        leaf(prefix, &point);
        return true;
    }
    let c = &coeffs[i];
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = c.iter().zip(&point).map(|(x, u)| x * u).sum();
    for bit in [1i8, -1] {
        // the parent point already realizes this child with slack
        let child_margin_at_point = if norm == 0.0 {
            if bit > 0 { f64::INFINITY } else { f64::NEG_INFINITY }
        } else if bit > 0 {
            dot / norm
        } else {
            (-dot - rows.strict[i]) / norm
        };
        push_row(lp, c, bit, rows.strict[i]);
        let (m, p) = if margin > 0.0 && child_margin_at_point > 0.0 {
            (margin.min(child_margin_at_point), point.clone())
        } else {
            if !budget.take() {
                lp.pop();
                return false;
            }
            let s = lp.solve(method);
            (s.margin, s.point)
        };
        prefix.push(bit);
        let ok = m < -FEASIBILITY_TOL || dfs(coeffs, rows, lp, prefix, m, p, method, budget, leaf);
        prefix.pop();
        lp.pop();
        if !ok {
            return false;
        }
    }
    true
}

fn method_notes(options: &ValidityOptions, spec: &SignalClassSpec) -> String {
    format!(
        "{}; depth-first search over rows per (support, sign assignment); strict rows use delta = 1e-9*|a_i|*R*sqrt(k) = 1e-9*|a_i|*{}; empty support {}",
        options.method.describe(),
        spec.dynamic_range * (spec.k as f64).sqrt(),
        if options.include_empty_support { "included" } else { "excluded" }
    )
}

/// Decides whether `a` distinguishes every pair of class members with
/// different supports.
pub fn validate_universal(
    a: &MeasurementMatrix,
    spec: &SignalClassSpec,
    options: &ValidityOptions,
) -> Result<ValidityReport> {
    check_dims(a, spec)?;
    let supports_total = support_count(spec);
    let sign_total = supports_total.saturating_mul(1u128 << spec.k.min(100));
    let mut report = ValidityReport {
        verdict: Verdict::Valid,
        counterexample: None,
        pairs_checked: 0,
        lp_solves: 0,
        method_notes: method_notes(options, spec),
    };
    if sign_total > options.budget as u128 {
        report.verdict = Verdict::Inconclusive;
        report.method_notes.push_str(&format!(
            "; inconclusive: {sign_total} (support, sign) LP roots exceed the budget of {}",
            options.budget
        ));
        return Ok(report);
    }
    let supports = class_supports(spec, options.include_empty_support);
    let rows = RowData::new(a, spec);
    let budget = Budget {
        used: AtomicU64::new(0),
        limit: options.budget,
    };
    let mut seen: HashMap<Vec<i8>, (usize, SparseSignal)> = HashMap::new();
    let mut unverified = 0u64;
    'outer: for (batch_no, batch) in supports.chunks(BATCH).enumerate() {
        let results: Vec<Option<Vec<(Vec<i8>, SparseSignal)>>> = batch
            .par_iter()
            .map(|s| realizable_patterns(a, spec, &rows, s, options.method, &budget))
            .collect();
        for (offset, res) in results.into_iter().enumerate() {
            let idx = batch_no * BATCH + offset;
            let Some(patterns) = res else {
                report.verdict = Verdict::Inconclusive;
                report.method_notes.push_str(&format!(
                    "; inconclusive: LP budget of {} exhausted",
                    options.budget
                ));
                break 'outer;
            };
            report.pairs_checked += idx as u128;
            for (bits, x) in patterns {
                match seen.get(&bits) {
                    Some((other, y)) if *other != idx => {
                        if confusable(a, y, &x)? {
                            report.verdict = Verdict::Invalid;
                            report.counterexample = Some(Counterexample {
                                x: y.clone(),
                                y: x,
                                pattern: SignPattern::new(bits)?,
                            });
                            break 'outer;
                        }
                        unverified += 1;
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(bits, (idx, x));
                    }
                }
            }
        }
    }
    report.lp_solves = budget.used.load(Ordering::Relaxed).min(options.budget);
    if report.verdict == Verdict::Valid && unverified > 0 {
        report.verdict = Verdict::Inconclusive;
        report.method_notes.push_str(&format!(
            "; inconclusive: {unverified} pattern collisions found within tolerance but not confirmed by direct sign evaluation"
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    #[serde(with = "support_list")]
    pub supports: Vec<Vec<usize>>,
    pub lp_solves: u64,
}

mod support_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.iter().map(|i| i + 1).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
        let raw = Vec::<Vec<usize>>::deserialize(d)?;
        raw.into_iter()
            .map(|x| {
                x.into_iter()
                    .map(|i| i.checked_sub(1).ok_or_else(|| serde::de::Error::custom("indices are 1-based")))
                    .collect()
            })
            .collect()
    }
}

/// Every support consistent with the observed pattern.
pub fn decode_support(
    a: &MeasurementMatrix,
    b: &SignPattern,
    spec: &SignalClassSpec,
    options: &ValidityOptions,
) -> Result<DecodeReport> {
    check_dims(a, spec)?;
    if b.len() != a.m() {
        return Err(Error::DimensionMismatch {
            expected: a.m(),
            got: b.len(),
        });
    }
    let required = support_count(spec).saturating_mul(1u128 << spec.k.min(100));
    if required > options.budget as u128 {
        return Err(Error::BudgetExceeded {
            required,
            budget: options.budget as u128,
        });
    }
    let rows = RowData::new(a, spec);
    let supports = class_supports(spec, options.include_empty_support);
    let hits: Vec<(bool, u64)> = supports
        .par_iter()
        .map(|s| {
            if s.is_empty() {
                return (b.bits().iter().all(|&x| x > 0), 0);
            }
            let mut solves = 0;
            for sigma in sigmas(s.len()) {
                let mut lp = MarginLp::new(s.len(), 1.0, spec.dynamic_range);
                for i in 0..a.m() {
                    push_row(&mut lp, &folded_row(a, i, s, &sigma), b.bits()[i], rows.strict[i]);
                }
                solves += 1;
                if lp.is_feasible(options.method, FEASIBILITY_TOL) {
                    return (true, solves);
                }
            }
            (false, solves)
        })
        .collect();
    Ok(DecodeReport {
        supports: supports
            .iter()
            .zip(&hits)
            .filter(|(_, h)| h.0)
            .map(|(s, _)| s.clone())
            .collect(),
        lp_solves: hits.iter().map(|h| h.1).sum(),
    })
}

/// `1 / sqrt((k - 1) R^2 + 1)`, the smallest entry a unit-norm class member
/// can have.
pub fn min_support_separation(k: usize, r: f64) -> Result<f64> {
    if k == 0 || !(r >= 1.0) {
        return Err(invalid(format!("need k >= 1 and R >= 1, got k={k}, R={r}")));
    }
    Ok(1.0 / (((k - 1) as f64) * r * r + 1.0).sqrt())
}

/// `constant * R * k^1.5 * ln n`.
pub fn required_m_upper(n: f64, k: usize, r: f64, constant: f64) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(invalid(format!("need n >= 2, got n={n}")));
    }
    Ok(constant * r * (k as f64).powf(1.5) * n.ln())
}

/// The extremal pair: `x` is unit-norm with `k - 1` entries `R` times its
/// smallest entry, and `y` is `x` with that smallest entry removed, so that
/// `|x - y|` equals the smallest entry exactly.
pub fn extremal_separation_pair(k: usize, r: f64) -> Result<(SparseSignal, SparseSignal)> {
    let small = min_support_separation(k, r)?;
    let x = SparseSignal::from_entries(
        k,
        (0..k).map(|j| (j, if j + 1 == k { small } else { r * small })),
    )?;
    let y = if k == 1 {
        SparseSignal::zero(1)
    } else {
        SparseSignal::from_entries(k, (0..k - 1).map(|j| (j, r * small)))?
    };
    Ok((x, y))
}

/// A random class member of support size exactly `size` in dimension `n`,
/// scaled to unit norm. Magnitudes are drawn from `[1, R]`, with the
/// endpoints drawn with positive probability to reach the extremes.
pub fn sample_unit_class_member(gen: &mut SplitMix64, n: usize, size: usize, r: f64) -> SparseSignal {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = i + gen.next_below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    let entries: Vec<(usize, f64)> = idx[..size]
        .iter()
        .map(|&j| {
            let mag = match gen.next_below(4) {
                0 => 1.0,
                1 => r,
                _ => 1.0 + (r - 1.0) * gen.next_f64(),
            };
            (j, mag * gen.next_sign())
        })
        .collect();
    let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    SparseSignal::from_entries(n, entries.into_iter().map(|(j, v)| (j, v / norm)))
        .expect("nonzero finite entries")
}

/// Euclidean distance between two signals of the same dimension.
pub fn distance(x: &SparseSignal, y: &SparseSignal) -> f64 {
    x.to_dense()
        .iter()
        .zip(y.to_dense())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Convenience: the pattern of `x` under `a` and its decoded supports.
pub fn roundtrip_decode(
    a: &MeasurementMatrix,
    x: &SparseSignal,
    spec: &SignalClassSpec,
    options: &ValidityOptions,
) -> Result<DecodeReport> {
    decode_support(a, &sign_measure(a, x)?, spec, options)
}
