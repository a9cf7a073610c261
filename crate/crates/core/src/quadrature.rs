//! Adaptive Gauss-Legendre integration.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const RULE_POINTS: usize = 15;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(RULE_POINTS))
}

fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Sum of the accepted per-panel discrepancies.
    pub error_estimate: f64,
    pub panels: usize,
    /// Whether every panel met its tolerance before the depth limit.
    pub converged: bool,
}

/// Integrates `f` over `[a, b]`, bisecting panels until a panel and its two
/// halves agree to within the panel's share of `rel_tol * |integral|`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Integral {
    const INITIAL: usize = 16;
    const MAX_DEPTH: u32 = 40;
    let h = (b - a) / INITIAL as f64;
    let pieces: Vec<(f64, f64, f64)> = (0..INITIAL)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == INITIAL { b } else { lo + h };
            (lo, hi, panel(&f, lo, hi))
        })
        .collect();
    let coarse: f64 = pieces.iter().map(|p| p.2).sum();
    let abs_floor = f64::MIN_POSITIVE;
    let tol = (rel_tol * coarse.abs()).max(abs_floor);
    let mut out = Integral {
        value: 0.0,
        error_estimate: 0.0,
        panels: 0,
        converged: true,
    };
    let width = b - a;
    let mut stack: Vec<(f64, f64, f64, u32)> = pieces.into_iter().map(|(l, r, v)| (l, r, v, 0)).collect();
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (left, right) = (panel(&f, lo, mid), panel(&f, mid, hi));
        let diff = (left + right - whole).abs();
        let share = tol * (hi - lo) / width;
        if diff <= share || depth >= MAX_DEPTH {
            if diff > share {
                out.converged = false;
            }
            out.value += left + right;
            out.error_estimate += diff;
            out.panels += 2;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    out
}
