//! Scalar special functions and log-domain helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub use statrs::function::erf::{erf, erfc};
pub use statrs::function::gamma::ln_gamma;

/// `Pr[lo <= N(0, var) <= hi]`, computed from the tail on the side that
/// keeps precision. A variance of zero gives the point-mass answer.
pub fn normal_interval_prob(lo: f64, hi: f64, var: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    if var <= 0.0 {
        return if lo <= 0.0 && 0.0 <= hi { 1.0 } else { 0.0 };
    }
    let scale = FRAC_1_SQRT_2 / var.sqrt();
    let (a, b) = (lo * scale, hi * scale);
    if a >= 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else if b <= 0.0 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        0.5 * (erf(b) - erf(a))
    }
}

/// Density of `N(0, var)` at `z`.
pub fn normal_pdf(z: f64, var: f64) -> f64 {
    (-(z * z) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `log(sum(exp(x)))` with the max trick. Empty input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(1 - p)` for `p` in `[0, 1]`.
pub fn ln_one_minus(p: f64) -> f64 {
    (-p).ln_1p()
}

/// Binary entropy in nats with `0 log 0 = 0`.
pub fn binary_entropy_nats(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// Serde adapter for log-domain values: `-inf` (log of zero) is written as
/// `null` and read back from it.
pub mod log_value {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}
