//! Probability kernels for balancing-failure events.
//!
//! For a subset `s` of size `k` and a random vector `v`, the event that `v`
//! balances `s` is `|sum_s v| <= d`. The failure event `F_s` is that none of
//! `m` independent vectors balances `s`. Two subsets sharing `t = beta k`
//! coordinates give correlated events; their joint kernel is the
//! probability that one vector balances both.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{derive_substream, NormalStream, RngSpec};
use crate::error::{invalid, Error, Result};
use crate::exact::{big_binomial, DyadicRational};
use crate::quadrature::integrate;
use crate::signal::Ensemble;
use crate::special::{erf, ln_gamma, normal_interval_prob, normal_pdf};

const QUADRATURE_REL_TOL: f64 = 1e-12;
const QUADRATURE_SPAN: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ExactRational,
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    /// Zero for every method except Monte Carlo.
    pub standard_error: f64,
    pub method: EstimateMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<DyadicRational>,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub successes: Option<u64>,
}

impl ProbabilityEstimate {
    fn closed_form(value: f64) -> Self {
        Self {
            value,
            standard_error: 0.0,
            method: EstimateMethod::ClosedForm,
            exact: None,
            trials: 0,
            successes: None,
        }
    }

    fn exact(r: DyadicRational) -> Self {
        Self {
            value: r.to_f64(),
            standard_error: 0.0,
            method: EstimateMethod::ExactRational,
            exact: Some(r),
            trials: 0,
            successes: None,
        }
    }

    pub fn monte_carlo(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
            method: EstimateMethod::MonteCarlo,
            exact: None,
            trials,
            successes: Some(successes),
        }
    }
}

/// The events `F_s` for subsets of size `k`, margin `d`, and `m` vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureModel {
    pub k: usize,
    pub d: f64,
    pub m: usize,
    pub ensemble: Ensemble,
}

impl FailureModel {
    pub fn new(k: usize, d: f64, m: usize, ensemble: Ensemble) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(invalid(format!("margin d must be finite and >= 0, got {d}")));
        }
        if ensemble == Ensemble::Explicit {
            return Err(Error::UnsupportedEnsemble("failure model needs a random ensemble".into()));
        }
        Ok(Self { k, d, m, ensemble })
    }
}

/// Overlap size `t = beta k`, which must be a nonnegative integer.
pub fn overlap_from_beta(k: usize, beta: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    let t = beta * k as f64;
    let rounded = t.round();
    if (t - rounded).abs() > 1e-9 {
        return Err(invalid(format!("beta k = {t} is not an integer")));
    }
    Ok(rounded as usize)
}

fn check_overlap(k: usize, t: usize) -> Result<()> {
    if t > k {
        return Err(invalid(format!("overlap {t} exceeds subset size {k}")));
    }
    Ok(())
}

/// Lower and upper small-ball bounds
/// `sqrt(2/pi) delta - delta^3 / sqrt(2 pi) <= Pr[|X| <= delta sigma] <= sqrt(2/pi) delta`.
pub fn gaussian_small_ball_bounds(delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let upper = c * delta;
    let lower = upper - delta.powi(3) / (2.0 * std::f64::consts::PI).sqrt();
    Ok((lower, upper))
}

/// `r = sqrt(2 / (pi k~))` with `k~ = k / d^2`.
pub fn small_ball_scale(k: usize, d: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * d / (k as f64).sqrt()
}

/// `Pr[|N(0, k)| <= d] = erf(d / sqrt(2k))`.
pub fn gaussian_single_exact(k: usize, d: f64) -> Result<ProbabilityEstimate> {
    FailureModel::new(k, d, 0, Ensemble::Gaussian)?;
    Ok(ProbabilityEstimate::closed_form(erf(d / (2.0 * k as f64).sqrt())))
}

/// Probability that one Gaussian vector balances two `k`-subsets sharing `t`
/// coordinates: the integral over the shared sum `z ~ N(0, t)` of the squared
/// probability that an independent `N(0, k - t)` lands in `[-z - d, -z + d]`.
pub fn gaussian_joint_exact(k: usize, d: f64, t: usize) -> Result<ProbabilityEstimate> {
    check_overlap(k, t)?;
    let single = gaussian_single_exact(k, d)?;
    if t == k {
        return Ok(single);
    }
    if t == 0 {
        return Ok(ProbabilityEstimate::closed_form(single.value * single.value));
    }
    if d == 0.0 {
        return Ok(ProbabilityEstimate::closed_form(0.0));
    }
    let (tv, rest) = (t as f64, (k - t) as f64);
    let sd = tv.sqrt();
    let r = integrate(
        |u| {
            let z = sd * u;
            let g = normal_interval_prob(-z - d, -z + d, rest);
            normal_pdf(u, 1.0) * g * g
        },
        -QUADRATURE_SPAN,
        QUADRATURE_SPAN,
        QUADRATURE_REL_TOL,
    );
    Ok(ProbabilityEstimate {
        value: r.value.clamp(0.0, 1.0),
        standard_error: 0.0,
        method: EstimateMethod::Quadrature,
        exact: None,
        trials: 0,
        successes: None,
    })
}

/// `r^2 / (1 - beta)`, the joint-kernel bound for `beta <= 0.9`.
pub fn gaussian_joint_bound(k: usize, d: f64, t: usize) -> f64 {
    let r = small_ball_scale(k, d);
    r * r / (1.0 - t as f64 / k as f64)
}

fn require_even(k: usize) -> Result<()> {
    if k < 2 || k % 2 == 1 {
        return Err(invalid(format!(
            "Rademacher small-ball kernels need even k >= 2, got k={k}"
        )));
    }
    Ok(())
}

/// `Pr[sum of k signs = 0] = C(k, k/2) / 2^k` for even `k`.
pub fn rademacher_small_ball_exact(k: usize) -> Result<ProbabilityEstimate> {
    require_even(k)?;
    Ok(ProbabilityEstimate::exact(DyadicRational::new(
        big_binomial(k as u64, k as u64 / 2),
        k as u64,
    )))
}

/// `sum_i C(t,i) 2^-t (C(k-t, k/2-i) 2^-(k-t))^2`: both sums vanish for one
/// sign vector when the subsets share `t` coordinates.
pub fn rademacher_joint_exact(k: usize, t: usize) -> Result<ProbabilityEstimate> {
    require_even(k)?;
    check_overlap(k, t)?;
    let (k64, t64) = (k as u64, t as u64);
    let rest = k64 - t64;
    let mut num = BigUint::from(0u32);
    for i in 0..=t64.min(k64 / 2) {
        let inner = big_binomial(rest, k64 / 2 - i);
        num += big_binomial(t64, i) * &inner * &inner;
    }
    Ok(ProbabilityEstimate::exact(DyadicRational::new(num, t64 + 2 * rest)))
}

/// Number of sign vectors of length `len` whose sum lies in `[lo, hi]`, and
/// the sum values, as (sum, count) pairs.
fn sign_sum_counts(len: u64) -> Vec<(i64, BigUint)> {
    (0..=len)
        .map(|j| (2 * j as i64 - len as i64, big_binomial(len, j)))
        .collect()
}

/// `Pr[|sum of k signs| <= d]` for any `k` and `d`, exactly.
pub fn rademacher_single_general(k: usize, d: f64) -> Result<ProbabilityEstimate> {
    FailureModel::new(k, d, 0, Ensemble::Rademacher)?;
    let num: BigUint = sign_sum_counts(k as u64)
        .into_iter()
        .filter(|(s, _)| (*s as f64).abs() <= d)
        .map(|(_, c)| c)
        .sum();
    Ok(ProbabilityEstimate::exact(DyadicRational::new(num, k as u64)))
}

/// Joint balancing probability of two `k`-subsets sharing `t` coordinates,
/// for any `k` and `d`, exactly.
pub fn rademacher_joint_general(k: usize, d: f64, t: usize) -> Result<ProbabilityEstimate> {
    FailureModel::new(k, d, 0, Ensemble::Rademacher)?;
    check_overlap(k, t)?;
    let rest = (k - t) as u64;
    let tail = sign_sum_counts(rest);
    let mut num = BigUint::from(0u32);
    for (a, ca) in sign_sum_counts(t as u64) {
        let inner: BigUint = tail
            .iter()
            .filter(|(b, _)| ((a + b) as f64).abs() <= d)
            .map(|(_, c)| c.clone())
            .sum();
        num += ca * &inner * &inner;
    }
    Ok(ProbabilityEstimate::exact(DyadicRational::new(num, t as u64 + 2 * rest)))
}

/// `ln(4^n / sqrt(pi n) (1 - 1/(8n)))`.
pub fn ln_central_binomial_stirling(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let nf = n as f64;
    Ok(nf * 4f64.ln() - 0.5 * (std::f64::consts::PI * nf).ln() + (-1.0 / (8.0 * nf)).ln_1p())
}

/// Two-term Stirling approximation of `C(2n, n)`; infinite past `f64` range.
pub fn central_binomial_stirling(n: u64) -> Result<f64> {
    Ok(ln_central_binomial_stirling(n)?.exp())
}

/// `ln C(2n, n)` via log-gamma, for comparisons at large `n`.
pub fn ln_central_binomial(n: u64) -> f64 {
    ln_gamma(2.0 * n as f64 + 1.0) - 2.0 * ln_gamma(n as f64 + 1.0)
}

/// Coordinates of the two subsets: `s = [0, k)`, `t = [k - overlap, 2k - overlap)`.
fn mc_trial(model: &FailureModel, overlap: Option<usize>, rng: RngSpec) -> bool {
    let k = model.k;
    let shared = overlap.unwrap_or(k);
    let union = 2 * k - shared;
    let d = model.d;
    match model.ensemble {
        Ensemble::Rademacher if union <= 64 => {
            let mut g = rng.generator();
            let mask_s = low_mask(k);
            let mask_t = low_mask(union) & !low_mask(k - shared);
            for _ in 0..model.m {
                let bits = g.next_u64();
                let sum = |mask: u64| 2.0 * (bits & mask).count_ones() as f64 - k as f64;
                if sum(mask_s).abs() <= d || (overlap.is_some() && sum(mask_t).abs() <= d) {
                    return false;
                }
            }
            true
        }
        _ => {
            let mut normals = NormalStream::new(rng);
            let mut g = rng.generator();
            let mut v = vec![0.0; union];
            for _ in 0..model.m {
                for x in v.iter_mut() {
                    *x = if model.ensemble == Ensemble::Gaussian {
                        normals.next()
                    } else {
                        g.next_sign()
                    };
                }
                let s: f64 = v[..k].iter().sum();
                let t: f64 = v[k - shared..].iter().sum();
                if s.abs() <= d || (overlap.is_some() && t.abs() <= d) {
                    return false;
                }
            }
            true
        }
    }
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Monte Carlo estimate of `Pr[F_s]`, or of `Pr[F_s and F_t]` when the
/// overlap `t` is given. Trial `i` uses substream `i`, so the estimate does
/// not depend on scheduling.
pub fn mc_failure_prob(
    model: &FailureModel,
    overlap: Option<usize>,
    rng: RngSpec,
    trials: u64,
) -> Result<ProbabilityEstimate> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    FailureModel::new(model.k, model.d, model.m, model.ensemble)?;
    if let Some(t) = overlap {
        check_overlap(model.k, t)?;
    }
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|i| mc_trial(model, overlap, derive_substream(rng, i)) as u64)
        .sum();
    Ok(ProbabilityEstimate::monte_carlo(successes, trials))
}

/// Monte Carlo estimate of the probability that one random vector balances
/// both of two `k`-subsets sharing `t` coordinates.
pub fn mc_joint_small_ball(
    k: usize,
    d: f64,
    t: usize,
    ensemble: Ensemble,
    rng: RngSpec,
    trials: u64,
) -> Result<ProbabilityEstimate> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    FailureModel::new(k, d, 1, ensemble)?;
    check_overlap(k, t)?;
    let union = 2 * k - t;
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let sub = derive_substream(rng, i);
            let (mut normals, mut g) = (NormalStream::new(sub), sub.generator());
            let v: Vec<f64> = (0..union)
                .map(|_| match ensemble {
                    Ensemble::Gaussian => normals.next(),
                    _ => g.next_sign(),
                })
                .collect();
            let s: f64 = v[..k].iter().sum();
            let u: f64 = v[k - t..].iter().sum();
            (s.abs() <= d && u.abs() <= d) as u64
        })
        .sum();
    Ok(ProbabilityEstimate::monte_carlo(successes, trials))
}

/// de Caen's lower bound `sum_i p_i^2 / sum_j p_ij` on the probability of a
/// union, with `p_ii = p_i`. Events with `p_i = 0` contribute nothing.
pub fn decaen_lower_bound(event_probs: &[f64], pairwise: &[Vec<f64>]) -> Result<f64> {
    const TOL: f64 = 1e-12;
    let n = event_probs.len();
    if pairwise.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pairwise.len(),
        });
    }
    for (i, row) in pairwise.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        let pi = event_probs[i];
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::InconsistentProbabilities(format!("p_{} = {pi} outside [0, 1]", i + 1)));
        }
        if (row[i] - pi).abs() > TOL {
            return Err(Error::InconsistentProbabilities(format!(
                "p_{0}{0} = {1} differs from p_{0} = {pi}",
                i + 1,
                row[i]
            )));
        }
        for (j, &pij) in row.iter().enumerate() {
            let cap = pi.min(event_probs[j]);
            if pij < 0.0 || pij > cap + TOL {
                return Err(Error::InconsistentProbabilities(format!(
                    "p_{}{} = {pij} outside [0, min(p_i, p_j)] = [0, {cap}]",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(event_probs
        .iter()
        .zip(pairwise)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, row)| p * p / row.iter().sum::<f64>())
        .sum())
}
