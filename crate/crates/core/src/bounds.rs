//! Evaluation of the second-moment lower bound on the probability that a
//! random family is not balanced.
//!
//! For `k`-subsets `s`, `F_s` is the event that none of `m` random vectors
//! balances `s`. De Caen's inequality gives
//! `Pr[union F_s] >= alpha / (A + B + C)` with `alpha = C(n,k) Pr[F_s]^2` and
//! `A + B + C = sum_beta v_beta`, where
//! `v_beta = C(k,(1-beta)k) C(n-k,(1-beta)k) Pr_beta[F_s and F_t]` collects the
//! subsets `t` overlapping `s` in `beta k` coordinates. Everything is carried
//! in the log domain. Exact quantities come from the probability kernels;
//! the closed-form bounds of the analysis are reported next to them with
//! every hidden constant exposed in [`BoundConstants`].

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::exact::{big_binomial, ln_big};
use crate::probability::{
    gaussian_joint_exact, gaussian_single_exact, overlap_from_beta, rademacher_joint_general,
    rademacher_single_general, small_ball_scale,
};
use crate::signal::Ensemble;
use crate::special::{binary_entropy_nats, ln_gamma, ln_one_minus, log_sum_exp, log_value};

/// Upper end of the middle overlap range.
pub const UPPER_CUT: f64 = 0.9;
const CUT_TOL: f64 = 1e-12;
const EXACT_BINOMIAL_MAX_N: u64 = 60;
const DIRECT_SUM_MAX_TERMS: u64 = 100_000;

/// Constants standing in for the unspecified `O(.)` and "sufficiently small"
/// factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Factor of the overall measurement threshold.
    pub c: f64,
    /// Factor of `k^1.5 / d^3` in the small-overlap range.
    pub c_prime: f64,
    /// Factor of `k^1.5 log(k) / d` in the middle and large-overlap ranges.
    pub c_doubleprime: f64,
    /// Factor of the `m / k~` remainder in the `v_beta` bound.
    pub big_c: f64,
    /// Factor of the achievability threshold `R k^1.5 log n`.
    #[serde(default = "one")]
    pub c_upper: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_prime: 1.0,
            c_doubleprime: 1.0,
            big_c: 1.0,
            c_upper: 1.0,
        }
    }
}

impl BoundConstants {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c", self.c),
            ("c_prime", self.c_prime),
            ("c_doubleprime", self.c_doubleprime),
            ("big_c", self.big_c),
            ("c_upper", self.c_upper),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub d: f64,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub dynamic_range: f64,
    pub ensemble: Ensemble,
    #[serde(default)]
    pub constants: BoundConstants,
}

impl BoundParams {
    /// Parameters with `epsilon = 0.1`, `R = 1` and unit constants.
    pub fn new(n: usize, k: usize, m: usize, d: f64, ensemble: Ensemble) -> Result<Self> {
        let p = Self {
            n,
            k,
            m,
            d,
            epsilon: 0.1,
            dynamic_range: 1.0,
            ensemble,
            constants: BoundConstants::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dynamic_range(mut self, r: f64) -> Result<Self> {
        self.dynamic_range = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_constants(mut self, constants: BoundConstants) -> Result<Self> {
        self.constants = constants;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(invalid(format!(
                "need 1 <= k <= n, got n={}, k={}",
                self.n, self.k
            )));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(invalid(format!("margin d must be positive, got {}", self.d)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 2.0 / 3.0) {
            return Err(invalid(format!(
                "epsilon must lie in (0, 2/3), got {}",
                self.epsilon
            )));
        }
        if !(self.dynamic_range >= 1.0 && self.dynamic_range.is_finite()) {
            return Err(invalid(format!(
                "dynamic range must be >= 1, got {}",
                self.dynamic_range
            )));
        }
        if self.ensemble == Ensemble::Explicit {
            return Err(Error::UnsupportedEnsemble(
                "bounds need a random ensemble".into(),
            ));
        }
        self.constants.validate()
    }

    /// `k~ = k / d^2`.
    pub fn k_tilde(&self) -> f64 {
        self.k as f64 / (self.d * self.d)
    }

    /// `r = sqrt(2 / (pi k~))`.
    pub fn r(&self) -> f64 {
        small_ball_scale(self.k, self.d)
    }

    /// Boundary between the small and middle overlap ranges.
    pub fn cut(&self) -> f64 {
        match self.ensemble {
            Ensemble::Rademacher => (self.k as f64).powf(-0.5),
            _ => self.k_tilde().powf(-0.5),
        }
    }

    /// Probability that one random vector balances a fixed `k`-subset.
    pub fn single_prob(&self) -> Result<f64> {
        Ok(match self.ensemble {
            Ensemble::Rademacher => rademacher_single_general(self.k, self.d)?.value,
            _ => gaussian_single_exact(self.k, self.d)?.value,
        })
    }

    /// Probability that one random vector balances two `k`-subsets sharing
    /// `t` coordinates.
    pub fn joint_prob(&self, t: usize) -> Result<f64> {
        Ok(match self.ensemble {
            Ensemble::Rademacher => rademacher_joint_general(self.k, self.d, t)?.value,
            _ => gaussian_joint_exact(self.k, self.d, t)?.value,
        })
    }

    /// `k <= n^(2/3 - epsilon)`.
    pub fn sparsity_condition(&self) -> Condition {
        sparsity_condition(self.n as f64, self.k as f64, self.epsilon)
    }

    /// The admissible range of `d`:
    /// `max(4^(1/(1+e)) k^1.5 / n^(1/(1+e)), k^(e-0.5) sqrt(4 log m)) <= d <= sqrt(4 log m)`.
    pub fn d_range_condition(&self) -> Condition {
        let (n, k, e) = (self.n as f64, self.k as f64, self.epsilon);
        let root = (4.0 * (self.m as f64).ln()).sqrt();
        if self.m < 2 {
            return Condition::new(
                "d_range",
                false,
                format!("needs m >= 2 so that log m > 0, got m={}", self.m),
            );
        }
        let lo1 = 4f64.powf(1.0 / (1.0 + e)) * k.powf(1.5) / n.powf(1.0 / (1.0 + e));
        let lo2 = k.powf(e - 0.5) * root;
        let lo = lo1.max(lo2);
        Condition::new(
            "d_range",
            self.d >= lo && self.d <= root,
            format!("{lo:.6} <= d={} <= {root:.6}", self.d),
        )
    }

    /// `R <= n^(0.5 epsilon)` together with the induced-margin inequality.
    pub fn induced_margin_condition(&self) -> Condition {
        lemma_d_condition(
            self.n as f64,
            self.k as f64,
            self.dynamic_range,
            self.epsilon,
            self.m as f64,
        )
    }
}

/// A named inequality and whether it held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Condition {
    pub fn new(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            holds,
            detail: detail.into(),
        }
    }
}

fn sparsity_condition(n: f64, k: f64, epsilon: f64) -> Condition {
    let cap = n.powf(2.0 / 3.0 - epsilon);
    Condition::new(
        "sparsity",
        k <= cap,
        format!("k={k} <= n^(2/3-eps)={cap:.6}"),
    )
}

fn lemma_d_condition(n: f64, k: f64, r: f64, epsilon: f64, m: f64) -> Condition {
    if !(m > 1.0) {
        return Condition::new("induced_margin", false, format!("needs m > 1, got {m}"));
    }
    let lhs = ((4.0 * m.ln()).sqrt() / r).powf(1.0 + epsilon);
    let rhs = 4.0 * k.powf(1.5 * (1.0 + epsilon)) / n;
    Condition::new(
        "induced_margin",
        lhs >= rhs,
        format!("(sqrt(4 log m)/R)^(1+eps)={lhs:.6} >= 4k^(1.5(1+eps))/n={rhs:.6}"),
    )
}

/// `ln C(n, k)`: big-integer exact for `n <= 60`, a direct sum of logs when
/// `min(k, n-k)` is moderate, and log-gamma beyond that.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(invalid(format!("log_binomial needs k <= n, got n={n}, k={k}")));
    }
    Ok(log_binomial_unchecked(n, k))
}

fn log_binomial_unchecked(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let j = k.min(n - k);
    if j == 0 {
        return 0.0;
    }
    if n <= EXACT_BINOMIAL_MAX_N {
        return ln_big(&big_binomial(n, k));
    }
    if j <= DIRECT_SUM_MAX_TERMS {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for i in 0..j {
            let term = ((n - i) as f64 / (i + 1) as f64).ln() - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        return sum;
    }
    let (nf, kf) = (n as f64, k as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
}

/// `k log(n/k)`, the leading term of `ln C(n, k)` when `k = o(n)`.
pub fn log_binomial_sparse(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(invalid(format!("need k <= n, got n={n}, k={k}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    Ok(k as f64 * (n as f64 / k as f64).ln())
}

/// `n H2(k/n)`, the leading term of `ln C(n, k)` when `k = Theta(n)`.
pub fn log_binomial_entropy(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(invalid(format!("need k <= n, got n={n}, k={k}")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(n as f64 * binary_entropy(k as f64 / n as f64)?)
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("entropy needs p in [0, 1], got {p}")));
    }
    Ok(binary_entropy_nats(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBound {
    pub log_binomial: f64,
    /// `ln C(n,k) + 2m ln(1 - p)`.
    pub log_alpha_exact: f64,
    /// `ln C(n,k) + m ln(1 - 2r + r^2)`.
    pub log_alpha_lower: f64,
    /// `ln C(n,k) - 2mr - 2mr^2`.
    pub log_alpha_lower_loose: f64,
    pub r: f64,
}

/// Lower bounds on `ln alpha`. Needs `r < 1/2`.
pub fn eval_log_alpha_lower(params: &BoundParams) -> Result<AlphaBound> {
    params.validate()?;
    let r = params.r();
    if r >= 0.5 {
        return Err(precondition(format!(
            "r = sqrt(2/(pi k~)) = {r:.6} must be below 1/2; d is too large for k"
        )));
    }
    let lb = log_binomial_unchecked(params.n as u64, params.k as u64);
    let m = params.m as f64;
    let p = params.single_prob()?;
    Ok(AlphaBound {
        log_binomial: lb,
        log_alpha_exact: log_alpha_exact(lb, params.m, p),
        log_alpha_lower: lb + 2.0 * m * ln_one_minus(r),
        log_alpha_lower_loose: lb - 2.0 * m * r - 2.0 * m * r * r,
        r,
    })
}

fn log_alpha_exact(log_binom: f64, m: usize, p: f64) -> f64 {
    if m == 0 {
        log_binom
    } else {
        log_binom + 2.0 * m as f64 * ln_one_minus(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OverlapRange {
    A,
    B,
    C,
}

/// Range owning overlap `t` of `k`; a value on a cut goes to the lower range.
pub fn overlap_range(t: usize, k: usize, cut: f64) -> OverlapRange {
    let beta = t as f64 / k as f64;
    if beta <= cut + CUT_TOL {
        OverlapRange::A
    } else if beta <= UPPER_CUT + CUT_TOL {
        OverlapRange::B
    } else {
        OverlapRange::C
    }
}

/// One row of the `v_beta` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VBetaTerm {
    /// Overlap `beta k`.
    pub t: usize,
    pub beta: f64,
    pub range: OverlapRange,
    /// `ln(C(k,(1-beta)k) C(n-k,(1-beta)k))`.
    #[serde(with = "log_value")]
    pub log_multiplicity: f64,
    /// `m ln(1 - 2p + p_joint)`.
    #[serde(with = "log_value")]
    pub log_probability: f64,
    #[serde(with = "log_value")]
    pub log_exact: f64,
    /// `(1+e) k H2(beta) + ln C(n-k,(1-beta)k) - 2mr + big_C m / k~`, for
    /// `beta <= 0.9`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_bound: Option<f64>,
    /// Smallest `big_C` for which the remainder term provably covers the
    /// exact kernel: `r + 2 / (pi sqrt(1 - beta))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sufficient_big_c: Option<f64>,
    /// The bound form applies and its constant is large enough.
    pub bound_admissible: bool,
}

/// The `v_beta` table entry for `beta = t / k`, given `p = single_prob()`.
fn vbeta_term(params: &BoundParams, t: usize, p: f64) -> Result<VBetaTerm> {
    let (n, k, m) = (params.n as u64, params.k as u64, params.m);
    let l = k - t as u64;
    let log_multiplicity = log_binomial_unchecked(k, l) + log_binomial_unchecked(n - k, l);
    let log_probability = if m == 0 {
        0.0
    } else {
        let pj = params.joint_prob(t)?;
        m as f64 * (pj - 2.0 * p).max(-1.0).ln_1p()
    };
    let log_exact = if log_multiplicity == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        log_multiplicity + log_probability
    };
    let beta = t as f64 / params.k as f64;
    let (log_bound, sufficient_big_c, bound_admissible) = if beta <= UPPER_CUT + CUT_TOL {
        let r = params.r();
        let kt = params.k_tilde();
        let bound = (1.0 + params.epsilon) * params.k as f64 * binary_entropy_nats(beta)
            + log_binomial_unchecked(n - k, l)
            - 2.0 * m as f64 * r
            + params.constants.big_c * m as f64 / kt;
        let suff = r + 2.0 / (std::f64::consts::PI * (1.0 - beta).sqrt());
        let form_applies = match params.ensemble {
            Ensemble::Rademacher => params.d == 1.0 && params.k % 2 == 0,
            _ => true,
        };
        (
            Some(bound),
            Some(suff),
            form_applies && params.constants.big_c >= suff,
        )
    } else {
        (None, None, false)
    };
    Ok(VBetaTerm {
        t,
        beta,
        range: overlap_range(t, params.k, params.cut()),
        log_multiplicity,
        log_probability,
        log_exact,
        log_bound,
        sufficient_big_c,
        bound_admissible,
    })
}

/// `ln v_beta` exactly and, for `beta <= 0.9`, its closed-form upper bound.
pub fn eval_log_vbeta_upper(params: &BoundParams, beta: f64) -> Result<VBetaTerm> {
    params.validate()?;
    let t = overlap_from_beta(params.k, beta)?;
    vbeta_term(params, t, params.single_prob()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSums {
    pub cut: f64,
    #[serde(with = "log_value")]
    pub log_a: f64,
    #[serde(with = "log_value")]
    pub log_b: f64,
    #[serde(with = "log_value")]
    pub log_c: f64,
    /// Log-sum-exp over every term, independent of the split.
    #[serde(with = "log_value")]
    pub log_total: f64,
    pub terms: Vec<VBetaTerm>,
}

impl PartitionSums {
    pub fn log_sum(&self, range: OverlapRange) -> f64 {
        match range {
            OverlapRange::A => self.log_a,
            OverlapRange::B => self.log_b,
            OverlapRange::C => self.log_c,
        }
    }
}

/// Exact `v_beta` for every `t = 0..=k`, summed per overlap range.
pub fn eval_partition_sums(params: &BoundParams) -> Result<PartitionSums> {
    params.validate()?;
    let p = params.single_prob()?;
    let terms: Vec<VBetaTerm> = (0..=params.k)
        .into_par_iter()
        .map(|t| vbeta_term(params, t, p))
        .collect::<Result<_>>()?;
    let sum_of = |range: OverlapRange| {
        let xs: Vec<f64> = terms
            .iter()
            .filter(|v| v.range == range)
            .map(|v| v.log_exact)
            .collect();
        log_sum_exp(&xs)
    };
    let all: Vec<f64> = terms.iter().map(|v| v.log_exact).collect();
    Ok(PartitionSums {
        cut: params.cut(),
        log_a: sum_of(OverlapRange::A),
        log_b: sum_of(OverlapRange::B),
        log_c: sum_of(OverlapRange::C),
        log_total: log_sum_exp(&all),
        terms,
    })
}

/// Outcome of one of the three range lemmas on a concrete instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub range: OverlapRange,
    /// The claimed ratio: 1.5 for A, 0.25 for B and C.
    pub factor: f64,
    pub preconditions: Vec<Condition>,
    pub preconditions_hold: bool,
    /// `ln(sum) - ln(factor alpha)`; the claim holds when this is `<= 0`.
    #[serde(with = "log_value")]
    pub log_margin: f64,
    pub holds: bool,
}

fn range_lemma_checks(params: &BoundParams, sums: &PartitionSums, log_alpha: f64) -> Vec<LemmaCheck> {
    let (n, k, d, m) = (params.n as f64, params.k as f64, params.d, params.m as f64);
    let sparsity = params.sparsity_condition();
    let small_m = {
        let cap = params.constants.c_prime * k.powf(1.5) / d.powi(3);
        Condition::new("m_small_overlap", m <= cap, format!("m={m} <= {cap:.6}"))
    };
    let mid_m = {
        let cap = params.constants.c_doubleprime * k.powf(1.5) / d * k.ln();
        Condition::new("m_large_overlap", m <= cap, format!("m={m} <= {cap:.6}"))
    };
    let mut middle = vec![mid_m.clone(), sparsity.clone()];
    if params.ensemble != Ensemble::Rademacher {
        middle.push(params.d_range_condition());
    }
    let mut upper = middle.clone();
    upper.push(Condition::new("k_at_least_20", k >= 20.0, format!("k={k}")));
    let lhs = 0.6 * k + k.ln() + 0.2f64.ln();
    let rhs = 0.05 * k * n.ln() - 4f64.ln();
    upper.push(Condition::new(
        "large_n",
        lhs < rhs,
        format!("0.6k + log k + log 0.2 = {lhs:.6} < 0.05 k log n - log 4 = {rhs:.6}"),
    ));
    let budget = 2.0 * m * d / k.sqrt() + params.constants.big_c * m * d * d / k;
    let half = k / 2.0 * (n / k).ln();
    upper.push(Condition::new(
        "alpha_budget",
        budget <= half,
        format!("2md/sqrt(k) + big_C m d^2/k = {budget:.6} <= (k/2) log(n/k) = {half:.6}"),
    ));
    [
        (OverlapRange::A, 1.5f64, vec![small_m, sparsity]),
        (OverlapRange::B, 0.25, middle),
        (OverlapRange::C, 0.25, upper),
    ]
    .into_iter()
    .map(|(range, factor, preconditions)| {
        let log_margin = sums.log_sum(range) - (factor.ln() + log_alpha);
        LemmaCheck {
            range,
            factor,
            preconditions_hold: preconditions.iter().all(|c| c.holds),
            preconditions,
            log_margin,
            holds: log_margin <= 1e-12,
        }
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub params: BoundParams,
    pub k_tilde: f64,
    pub r: f64,
    pub single_prob: f64,
    #[serde(with = "log_value")]
    pub log_alpha: f64,
    /// `None` when `r >= 1/2`.
    #[serde(default)]
    pub log_alpha_lower: Option<f64>,
    pub vbeta_table: Vec<VBetaTerm>,
    pub cut: f64,
    #[serde(with = "log_value")]
    pub sum_a: f64,
    #[serde(with = "log_value")]
    pub sum_b: f64,
    #[serde(with = "log_value")]
    pub sum_c: f64,
    #[serde(with = "log_value")]
    pub log_total: f64,
    /// `alpha / (A + B + C)` clamped to `[0, 1]`.
    pub decaen_value: f64,
    pub admissibility: Vec<Condition>,
    pub lemmas: Vec<LemmaCheck>,
    pub monotonicity: MonotoneReport,
}

impl BoundEvaluation {
    pub fn admissible(&self) -> bool {
        self.admissibility.iter().all(|c| c.holds)
    }
}

/// De Caen's bound `alpha / (A + B + C)` from exact kernels, with the
/// analysis's side conditions evaluated on the instance.
pub fn union_failure_lower_bound(params: &BoundParams) -> Result<BoundEvaluation> {
    params.validate()?;
    let p = params.single_prob()?;
    let sums = eval_partition_sums(params)?;
    let log_binom = log_binomial_unchecked(params.n as u64, params.k as u64);
    let log_alpha = log_alpha_exact(log_binom, params.m, p);
    let decaen_value = if params.m == 0 {
        zero_measurement_ratio(params.n as u64, params.k as u64)
    } else {
        (log_alpha - sums.log_total).exp().clamp(0.0, 1.0)
    };
    let log_alpha_lower = eval_log_alpha_lower(params).ok().map(|a| a.log_alpha_lower);
    let monotonicity = check_f_monotone(params)?;
    let mut admissibility = vec![
        Condition::new(
            "k_tilde_above_one",
            params.k_tilde() > 1.0,
            format!("k~ = {:.6}", params.k_tilde()),
        ),
        Condition::new("r_below_half", params.r() < 0.5, format!("r = {:.6}", params.r())),
        params.sparsity_condition(),
    ];
    if params.ensemble == Ensemble::Rademacher {
        admissibility.push(Condition::new(
            "binary_scheme",
            params.d == 1.0 && params.k % 2 == 0,
            format!("d={}, k={}", params.d, params.k),
        ));
    } else {
        let rmax = (params.n as f64).powf(0.5 * params.epsilon);
        admissibility.push(params.d_range_condition());
        admissibility.push(Condition::new(
            "range_vs_n",
            params.dynamic_range <= rmax,
            format!("R={} <= n^(0.5 eps)={rmax:.6}", params.dynamic_range),
        ));
        admissibility.push(params.induced_margin_condition());
    }
    admissibility.push(Condition::new(
        "monotone",
        monotonicity.pass,
        monotonicity.note.clone().unwrap_or_else(|| "grid derivative signs".into()),
    ));
    let lemmas = range_lemma_checks(params, &sums, log_alpha);
    Ok(BoundEvaluation {
        params: *params,
        k_tilde: params.k_tilde(),
        r: params.r(),
        single_prob: p,
        log_alpha,
        log_alpha_lower,
        cut: sums.cut,
        sum_a: sums.log_a,
        sum_b: sums.log_b,
        sum_c: sums.log_c,
        log_total: sums.log_total,
        vbeta_table: sums.terms,
        decaen_value,
        admissibility,
        lemmas,
        monotonicity,
    })
}

/// `C(n,k) / sum_l C(k,l) C(n-k,l)` in exact arithmetic.
fn zero_measurement_ratio(n: u64, k: u64) -> f64 {
    let total: BigUint = (0..=k)
        .map(|l| big_binomial(k, l) * big_binomial(n - k, l))
        .sum();
    let alpha = big_binomial(n, k);
    if alpha == total {
        1.0
    } else {
        (ln_big(&alpha) - ln_big(&total)).exp().clamp(0.0, 1.0)
    }
}

fn require_nondegenerate(params: &BoundParams) -> Result<()> {
    params.validate()?;
    if params.n <= params.k {
        return Err(precondition(format!(
            "f(beta) needs n > k, got n={}, k={}",
            params.n, params.k
        )));
    }
    Ok(())
}

/// `f(beta) = beta k log((n-k)/k) - (1+e) k H2(beta)`.
pub fn f_beta(params: &BoundParams, beta: f64) -> Result<f64> {
    require_nondegenerate(params)?;
    let k = params.k as f64;
    let h = binary_entropy(beta)?;
    Ok(beta * k * ((params.n as f64 - k) / k).ln() - (1.0 + params.epsilon) * k * h)
}

/// `f'(beta) = k log((n-k)/k (beta/(1-beta))^(1+e))`, with `-inf` at 0 and
/// `+inf` at 1.
pub fn f_beta_derivative(params: &BoundParams, beta: f64) -> Result<f64> {
    require_nondegenerate(params)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    if beta == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if beta == 1.0 {
        return Ok(f64::INFINITY);
    }
    let k = params.k as f64;
    Ok(k * (((params.n as f64 - k) / k).ln()
        + (1.0 + params.epsilon) * (beta.ln() - (-beta).ln_1p())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonePoint {
    pub t: usize,
    pub beta: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub cut: f64,
    pub admissibility: Vec<Condition>,
    pub admissible: bool,
    pub grid: Vec<MonotonePoint>,
    /// Every grid derivative is positive (Gaussian) or nonnegative
    /// (Rademacher). An empty grid passes.
    pub pass: bool,
    pub vacuous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Sign of `f'` over the overlaps `beta = t/k` in `[cut, 0.9]`.
pub fn check_f_monotone(params: &BoundParams) -> Result<MonotoneReport> {
    params.validate()?;
    let cut = params.cut();
    let mut admissibility = vec![params.sparsity_condition()];
    if params.ensemble != Ensemble::Rademacher {
        admissibility.push(params.d_range_condition());
    }
    let admissible = admissibility.iter().all(|c| c.holds);
    if params.n <= params.k {
        return Ok(MonotoneReport {
            cut,
            admissibility,
            admissible,
            grid: Vec::new(),
            pass: true,
            vacuous: true,
            note: Some("n = k leaves a single subset; f is undefined".into()),
        });
    }
    let grid: Vec<MonotonePoint> = (0..=params.k)
        .map(|t| (t, t as f64 / params.k as f64))
        .filter(|&(_, beta)| beta >= cut - CUT_TOL && beta <= UPPER_CUT + CUT_TOL)
        .map(|(t, beta)| {
            Ok(MonotonePoint {
                t,
                beta,
                derivative: f_beta_derivative(params, beta)?,
            })
        })
        .collect::<Result<_>>()?;
    let strict = params.ensemble != Ensemble::Rademacher;
    let pass = grid
        .iter()
        .all(|p| if strict { p.derivative > 0.0 } else { p.derivative >= 0.0 });
    let vacuous = grid.is_empty();
    let note = vacuous.then(|| {
        format!("no overlap t/k lies in [{cut:.6}, {UPPER_CUT}]; the range is empty")
    });
    Ok(MonotoneReport {
        cut,
        admissibility,
        admissible,
        grid,
        pass,
        vacuous,
        note,
    })
}

/// `c R (k / log k)^1.5 min(R^2, log^2 k)` for real `k > 1`.
pub fn lower_m_threshold(k: f64, r: f64, c: f64) -> f64 {
    let lk = k.ln();
    c * r * (k / lk).powf(1.5) * (r * r).min(lk * lk)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "R")]
    pub dynamic_range: f64,
    pub epsilon: f64,
    /// Below this many measurements random matrices fail.
    pub lower_threshold: f64,
    /// `c_upper R k^1.5 log n` measurements suffice.
    pub upper_threshold: f64,
    /// `sqrt(4 log m) / R` at `m = lower_threshold`; absent when that is at
    /// most 1.
    #[serde(default)]
    pub induced_d: Option<f64>,
    pub assumptions: Vec<Condition>,
}

/// Measurement thresholds and the scaling assumptions behind them.
pub fn m_thresholds(
    n: usize,
    k: usize,
    r: f64,
    epsilon: f64,
    constants: &BoundConstants,
) -> Result<ThresholdReport> {
    constants.validate()?;
    if k < 2 || n <= k {
        return Err(invalid(format!("need 2 <= k < n, got n={n}, k={k}")));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(invalid(format!("dynamic range must be >= 1, got {r}")));
    }
    if !(epsilon > 0.0 && epsilon < 2.0 / 3.0) {
        return Err(invalid(format!("epsilon must lie in (0, 2/3), got {epsilon}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let lower = lower_m_threshold(kf, r, constants.c);
    let upper = constants.c_upper * r * kf.powf(1.5) * nf.ln();
    let induced_d = (lower > 1.0).then(|| (4.0 * lower.ln()).sqrt() / r);
    let rcap = nf.powf(0.5 * epsilon).min(kf.powf(0.5 - epsilon));
    let assumptions = vec![
        sparsity_condition(nf, kf, epsilon),
        Condition::new(
            "range_cap",
            r <= rcap,
            format!("R={r} <= min(n^(0.5 eps), k^(0.5-eps))={rcap:.6}"),
        ),
        lemma_d_condition(nf, kf, r, epsilon, lower),
    ];
    Ok(ThresholdReport {
        n,
        k,
        dynamic_range: r,
        epsilon,
        lower_threshold: lower,
        upper_threshold: upper,
        induced_d,
        assumptions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDifferenceCheck {
    /// `ln C(n,k) - ln C(n-k,(1-beta)k)`.
    pub lhs: f64,
    /// `beta k ln((n-k)/k)`.
    pub rhs: f64,
    /// `C(n,k) k^(beta k) >= C(n-k,(1-beta)k) (n-k)^(beta k)` in integers;
    /// evaluated for `n <= 60`.
    #[serde(default)]
    pub exact_holds: Option<bool>,
}

/// Both sides of `ln C(n,k) - ln C(n-k,(1-beta)k) >= beta k ln((n-k)/k)`.
pub fn log_diff_binomial_lower(n: usize, k: usize, beta: f64) -> Result<LogDifferenceCheck> {
    if k == 0 || n <= 2 * k {
        return Err(invalid(format!("need k >= 1 and n > 2k, got n={n}, k={k}")));
    }
    let t = overlap_from_beta(k, beta)?;
    let (n64, k64, t64) = (n as u64, k as u64, t as u64);
    let l = k64 - t64;
    let lhs = log_binomial_unchecked(n64, k64) - log_binomial_unchecked(n64 - k64, l);
    let rhs = t as f64 * ((n - k) as f64 / k as f64).ln();
    let exact_holds = (n64 <= EXACT_BINOMIAL_MAX_N).then(|| {
        let left = big_binomial(n64, k64) * BigUint::from(k64).pow(t as u32);
        let right = big_binomial(n64 - k64, l) * BigUint::from(n64 - k64).pow(t as u32);
        left >= right
    });
    Ok(LogDifferenceCheck {
        lhs,
        rhs,
        exact_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gauss(n: usize, k: usize, m: usize, d: f64) -> BoundParams {
        BoundParams::new(n, k, m, d, Ensemble::Gaussian).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(BoundParams::new(5, 6, 1, 0.3, Ensemble::Gaussian).is_err());
        assert!(BoundParams::new(5, 0, 1, 0.3, Ensemble::Gaussian).is_err());
        assert!(BoundParams::new(5, 2, 1, 0.0, Ensemble::Gaussian).is_err());
        assert!(BoundParams::new(5, 2, 1, 0.3, Ensemble::Explicit).is_err());
        assert!(gauss(5, 2, 1, 0.3).with_epsilon(0.7).is_err());
        assert!(gauss(5, 2, 1, 0.3).with_dynamic_range(0.5).is_err());
        let bad = BoundConstants {
            big_c: 0.0,
            ..Default::default()
        };
        assert!(gauss(5, 2, 1, 0.3).with_constants(bad).is_err());
    }

    #[test]
    fn log_binomial_values() {
        assert_eq!(log_binomial(7, 0).unwrap(), 0.0);
        assert!((log_binomial(5, 2).unwrap() - 10f64.ln()).abs() < 1e-15);
        assert!(log_binomial(3, 4).is_err());
        let exact = ln_big(&big_binomial(100, 50));
        let got = log_binomial(100, 50).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-12);
        // the log-gamma path against the direct sum
        let (n, k) = (10_000_000u64, 200_000u64);
        let direct: f64 = (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum();
        let via_gamma = log_binomial(n, k).unwrap();
        assert!(((via_gamma - direct) / direct).abs() < 1e-10);
    }

    #[test]
    fn asymptotic_variants_track_the_exact_value() {
        let exact = log_binomial(1_000_000, 10).unwrap();
        let sparse = log_binomial_sparse(1_000_000, 10).unwrap();
        assert!(sparse <= exact && exact <= sparse + 10.0);
        let dense = log_binomial_entropy(2000, 1000).unwrap();
        let exact = log_binomial(2000, 1000).unwrap();
        assert!(dense >= exact && dense - exact < 5.0);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        let h = -0.1 * 0.1f64.ln() - 0.9 * 0.9f64.ln();
        assert!((binary_entropy(0.1).unwrap() - h).abs() < 1e-15);
        assert!((binary_entropy(0.1).unwrap() - 0.325_083).abs() < 1e-6);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn alpha_bounds() {
        let p = gauss(20, 4, 0, 0.3);
        let a = eval_log_alpha_lower(&p).unwrap();
        assert_eq!(a.log_alpha_lower, 4845f64.ln());
        let p = gauss(20, 4, 5, 0.3);
        let a = eval_log_alpha_lower(&p).unwrap();
        let single = gaussian_single_exact(4, 0.3).unwrap().value;
        let oracle = 4845f64.ln() + 10.0 * (1.0 - single).ln();
        assert!((a.log_alpha_exact - oracle).abs() < 1e-9);
        assert!(a.log_alpha_lower <= oracle);
        assert!(a.log_alpha_lower_loose <= a.log_alpha_lower);
        let mut prev = f64::INFINITY;
        for m in 0..20 {
            let a = eval_log_alpha_lower(&gauss(20, 4, m, 0.3)).unwrap();
            assert!(a.log_alpha_lower < prev);
            prev = a.log_alpha_lower;
        }
        assert!(matches!(
            eval_log_alpha_lower(&gauss(20, 4, 5, 2.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn vbeta_edges() {
        let p = gauss(20, 4, 0, 0.3);
        let v = eval_log_vbeta_upper(&p, 0.5).unwrap();
        let mult = (big_binomial(4, 2) * big_binomial(16, 2)).to_string();
        assert!((v.log_exact - mult.parse::<f64>().unwrap().ln()).abs() < 1e-12);
        let p = gauss(20, 4, 3, 0.3);
        let v0 = eval_log_vbeta_upper(&p, 0.0).unwrap();
        let s = gaussian_single_exact(4, 0.3).unwrap().value;
        let expect = 3.0 * (1.0 - s).powi(2).ln() + (big_binomial(16, 4).to_string().parse::<f64>().unwrap()).ln();
        assert!((v0.log_exact - expect).abs() < 1e-12);
        let v1 = eval_log_vbeta_upper(&p, 1.0).unwrap();
        assert!(v1.log_bound.is_none());
        assert!((v1.log_exact - 3.0 * (1.0 - s).ln()).abs() < 1e-12);
        assert!(eval_log_vbeta_upper(&p, 0.3).is_err());
    }

    #[test]
    fn partition_ownership_and_completeness() {
        // k~ = 16 / 4 = 4, so the cut 0.5 lands on t = 8 of 16.
        let p = gauss(40, 16, 2, 2.0);
        let s = eval_partition_sums(&p).unwrap();
        assert_eq!(s.cut, 0.5);
        for v in &s.terms {
            let want = if v.t <= 8 {
                OverlapRange::A
            } else if v.t * 10 <= 9 * 16 {
                OverlapRange::B
            } else {
                OverlapRange::C
            };
            assert_eq!(v.range, want, "t={}", v.t);
        }
        let joined = log_sum_exp(&[s.log_a, s.log_b, s.log_c]);
        assert!((joined - s.log_total).abs() <= 1e-12 * s.log_total.abs().max(1.0));
        assert_eq!(overlap_range(9, 10, 0.3), OverlapRange::B);
    }

    #[test]
    fn zero_measurements_give_vandermonde() {
        for (n, k) in [(10, 3), (20, 4), (12, 6), (7, 7)] {
            let p = gauss(n, k, 0, 0.3);
            let s = eval_partition_sums(&p).unwrap();
            let total: BigUint = (0..=k as u64)
                .map(|l| big_binomial(k as u64, l) * big_binomial((n - k) as u64, l))
                .sum();
            assert_eq!(total, big_binomial(n as u64, k as u64));
            assert!((s.log_total - ln_big(&total)).abs() < 1e-12 * ln_big(&total).max(1.0));
            assert_eq!(union_failure_lower_bound(&p).unwrap().decaen_value, 1.0);
        }
    }

    #[test]
    fn single_subset_bound_is_the_event_probability() {
        for ens in [Ensemble::Gaussian, Ensemble::Rademacher] {
            let d = if ens == Ensemble::Gaussian { 0.4 } else { 1.0 };
            let p = BoundParams::new(4, 4, 3, d, ens).unwrap();
            let e = union_failure_lower_bound(&p).unwrap();
            let pf = (1.0 - p.single_prob().unwrap()).powi(3);
            assert!((e.decaen_value - pf).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_claims_hold_when_preconditions_do() {
        let p = gauss(20, 4, 3, 0.3);
        let e = union_failure_lower_bound(&p).unwrap();
        assert_eq!(e.lemmas.len(), 3);
        for l in &e.lemmas {
            if l.preconditions_hold {
                assert!(l.holds, "{:?}", l);
            }
        }
        // the middle-range margin requirement fails for this small n
        assert!(!e.lemmas[1].preconditions_hold);
        assert!(e.decaen_value > 0.0 && e.decaen_value <= 1.0);
    }

    #[test]
    fn f_values_and_derivative() {
        let p = gauss(100, 5, 10, 1.0);
        assert_eq!(f_beta(&p, 0.0).unwrap(), 0.0);
        assert!((f_beta(&p, 1.0).unwrap() - 5.0 * 19f64.ln()).abs() < 1e-12);
        let h = 1e-6;
        let fd = (f_beta(&p, 0.5 + h).unwrap() - f_beta(&p, 0.5 - h).unwrap()) / (2.0 * h);
        let an = f_beta_derivative(&p, 0.5).unwrap();
        assert!(((fd - an) / an).abs() < 1e-6);
        assert_eq!(f_beta_derivative(&p, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(f_beta_derivative(&p, 1.0).unwrap(), f64::INFINITY);
        assert!(f_beta_derivative(&p, 1.5).is_err());
        assert!(f_beta(&gauss(5, 5, 1, 1.0), 0.5).is_err());
    }

    #[test]
    fn monotonicity_reports() {
        let p = gauss(10_000, 10, 100, 2.0);
        let r = check_f_monotone(&p).unwrap();
        assert!(r.admissible, "{:?}", r.admissibility);
        assert!(r.pass && !r.vacuous);
        let bad = gauss(10_000, 10, 100, 0.5);
        let r = check_f_monotone(&bad).unwrap();
        assert!(!r.admissible);
        assert!(r.admissibility.iter().any(|c| c.name == "d_range" && !c.holds));
        // cut sqrt(d^2/k) = 0.95 leaves no overlap in [0.95, 0.9]
        let empty = gauss(200, 10, 100, 0.95 * 10f64.sqrt());
        let r = check_f_monotone(&empty).unwrap();
        assert!(r.vacuous && r.pass && r.note.is_some());
    }

    #[test]
    fn threshold_values() {
        let e = std::f64::consts::E;
        assert!((lower_m_threshold(e, 1.0, 1.0) - e.powf(1.5)).abs() < 1e-12);
        let t = m_thresholds(1_000_000, 50, 2.0, 0.1, &BoundConstants::default()).unwrap();
        let want = 2.0 * (50.0 / 50f64.ln()).powf(1.5) * 4.0;
        assert!((t.lower_threshold - want).abs() < 1e-9);
        assert!((t.lower_threshold - 365.6).abs() < 0.2);
        assert!((t.upper_threshold - 2.0 * 50f64.powf(1.5) * 1e6f64.ln()).abs() < 1e-9);
        assert!(t.induced_d.is_some());
        let t = m_thresholds(100, 80, 1.0, 0.1, &BoundConstants::default()).unwrap();
        assert!(!t.assumptions[0].holds);
        assert!(m_thresholds(10, 1, 1.0, 0.1, &BoundConstants::default()).is_err());
    }

    #[test]
    fn log_difference_examples() {
        let c = log_diff_binomial_lower(20, 4, 0.0).unwrap();
        assert_eq!(c.rhs, 0.0);
        assert!(c.lhs >= 0.0 && c.exact_holds == Some(true));
        let c = log_diff_binomial_lower(20, 4, 0.5).unwrap();
        assert!((c.rhs - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!(c.lhs >= c.rhs && c.exact_holds == Some(true));
        let c = log_diff_binomial_lower(20, 4, 1.0).unwrap();
        assert!((c.lhs - 4845f64.ln()).abs() < 1e-12);
        assert!(c.lhs >= c.rhs);
        assert!(log_diff_binomial_lower(8, 4, 0.5).is_err());
        assert!(log_diff_binomial_lower(20, 4, 0.3).is_err());
    }

    #[test]
    fn evaluation_serde_roundtrip() {
        let e = union_failure_lower_bound(&gauss(12, 3, 2, 0.5)).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        let back: BoundEvaluation = serde_json::from_str(&text).unwrap();
        assert_eq!(back.decaen_value, e.decaen_value);
        assert_eq!(back.vbeta_table.len(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_terms_respect_bound_forms(
            n in 6usize..40,
            k_frac in 0.05f64..0.5,
            m in 0usize..30,
            d in 0.05f64..1.5,
            big_c in 0.5f64..4.0,
        ) {
            let k = 1 + ((n as f64 * k_frac) as usize).min(n - 1);
            let constants = BoundConstants { big_c, ..Default::default() };
            let p = gauss(n, k, m, d).with_constants(constants).unwrap();
            let s = eval_partition_sums(&p).unwrap();
            for v in &s.terms {
                if v.bound_admissible {
                    prop_assert!(v.log_exact <= v.log_bound.unwrap() + 1e-9, "{:?}", v);
                }
            }
            if let Ok(a) = eval_log_alpha_lower(&p) {
                prop_assert!(a.log_alpha_lower <= a.log_alpha_exact + 1e-12);
            }
            let e = union_failure_lower_bound(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&e.decaen_value));
        }

        #[test]
        fn rademacher_terms_respect_bound_forms(half_k in 1usize..8, extra in 0usize..20, m in 0usize..40) {
            let k = 2 * half_k;
            let p = BoundParams::new(k + extra + 1, k, m, 1.0, Ensemble::Rademacher)
                .unwrap()
                .with_constants(BoundConstants { big_c: 3.0, ..Default::default() })
                .unwrap();
            for v in eval_partition_sums(&p).unwrap().terms {
                if v.bound_admissible {
                    prop_assert!(v.log_exact <= v.log_bound.unwrap() + 1e-9, "{:?}", v);
                }
            }
        }

        #[test]
        fn log_difference_holds_exactly(n in 3usize..=40, k_frac in 0.0f64..1.0) {
            let kmax = n / 3;
            prop_assume!(kmax >= 1);
            let k = 1 + ((kmax - 1) as f64 * k_frac) as usize;
            for t in 0..=k {
                let c = log_diff_binomial_lower(n, k, t as f64 / k as f64).unwrap();
                prop_assert_eq!(c.exact_holds, Some(true));
                prop_assert!(c.lhs >= c.rhs - 1e-9);
            }
        }
    }
}
