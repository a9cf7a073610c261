//! Maximum-margin linear feasibility over a box.
//!
//! A [`MarginLp`] asks for `u` in `[lower, upper]^dim` and a margin `s`
//! maximizing `s` subject to `g . u >= h + s * |g|` for each half-space
//! `(g, h)`, with `s` capped at `margin_cap`. The system is feasible with
//! slack exactly when the optimal margin is nonnegative.
//!
//! Two solvers are provided: a dense primal simplex with Bland's rule and
//! an exhaustive vertex enumeration that serves as an independent check.

use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityMethod {
    #[default]
    Simplex,
    VertexEnumeration,
}

impl FeasibilityMethod {
    pub fn describe(self) -> &'static str {
        match self {
            FeasibilityMethod::Simplex => "dense primal simplex (Bland's rule) on a max-margin LP",
            FeasibilityMethod::VertexEnumeration => {
                "exhaustive vertex enumeration of the box intersected with half-spaces"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginLp {
    pub dim: usize,
    pub lower: f64,
    pub upper: f64,
    pub margin_cap: f64,
    pub constraints: Vec<HalfSpace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSolution {
    /// Optimal margin; `-inf` when a constraint with zero normal is violated.
    pub margin: f64,
    pub point: Vec<f64>,
}

impl MarginLp {
    pub fn new(dim: usize, lower: f64, upper: f64) -> Self {
        Self {
            dim,
            lower,
            upper,
            margin_cap: 1.0,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, normal: Vec<f64>, offset: f64) {
        debug_assert_eq!(normal.len(), self.dim);
        self.constraints.push(HalfSpace { normal, offset });
    }

    pub fn pop(&mut self) {
        self.constraints.pop();
    }

    pub fn solve(&self, method: FeasibilityMethod) -> MarginSolution {
        let mut active = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let norm = norm(&c.normal);
            if norm == 0.0 {
                if c.offset > 0.0 {
                    return MarginSolution {
                        margin: f64::NEG_INFINITY,
                        point: vec![self.lower; self.dim],
                    };
                }
            } else {
                active.push((c, norm));
            }
        }
        match method {
            FeasibilityMethod::Simplex => self.simplex(&active),
            FeasibilityMethod::VertexEnumeration => self.vertices(&active),
        }
    }

    /// Optimal margin with at least slack `-tol`.
    pub fn is_feasible(&self, method: FeasibilityMethod, tol: f64) -> bool {
        self.solve(method).margin >= -tol
    }

    fn simplex(&self, active: &[(&HalfSpace, f64)]) -> MarginSolution {
        // Variables: w = u - lower in [0, upper - lower], and t = s + shift >= 0,
        // where the shift makes the origin feasible so no phase one is needed.
        let dim = self.dim;
        let shift = active
            .iter()
            .map(|(c, nrm)| (c.offset - self.lower * c.normal.iter().sum::<f64>()) / nrm)
            .fold(0.0f64, f64::max)
            + 1.0;
        let rows = active.len() + dim + 1;
        let vars = dim + 1;
        let cols = vars + rows + 1;
        let mut t = vec![0.0; (rows + 1) * cols];
        let rhs = cols - 1;
        let mut basis: Vec<usize> = (vars..vars + rows).collect();
        for (r, (c, nrm)) in active.iter().enumerate() {
            let row = &mut t[r * cols..(r + 1) * cols];
            for j in 0..dim {
                row[j] = -c.normal[j];
            }
            row[dim] = *nrm;
            row[vars + r] = 1.0;
            let gl = self.lower * c.normal.iter().sum::<f64>();
            row[rhs] = (gl - c.offset + shift * nrm).max(0.0);
        }
        for j in 0..dim {
            let r = active.len() + j;
            let row = &mut t[r * cols..(r + 1) * cols];
            row[j] = 1.0;
            row[vars + r] = 1.0;
            row[rhs] = self.upper - self.lower;
        }
        {
            let r = rows - 1;
            let row = &mut t[r * cols..(r + 1) * cols];
            row[dim] = 1.0;
            row[vars + r] = 1.0;
            row[rhs] = self.margin_cap + shift;
        }
        // objective row stores reduced costs of "maximize t"
        let obj = rows * cols;
        t[obj + dim] = 1.0;

        let max_iter = 50 * (rows + cols) + 1000;
        for _ in 0..max_iter {
            let Some(enter) = (0..cols - 1).find(|&j| t[obj + j] > EPS) else {
                break;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..rows {
                let a = t[r * cols + enter];
                if a > EPS {
                    let ratio = t[r * cols + rhs] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - EPS
                                || (ratio <= lratio + EPS && basis[r] < basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            // bounded by construction: t <= cap + shift
            let Some((pr, _)) = leave else { break };
            pivot(&mut t, cols, rows + 1, pr, enter);
            basis[pr] = enter;
        }
        let mut x = vec![0.0; vars];
        for (r, &b) in basis.iter().enumerate() {
            if b < vars {
                x[b] = t[r * cols + rhs];
            }
        }
        let point: Vec<f64> = x[..dim]
            .iter()
            .map(|w| (self.lower + w).clamp(self.lower, self.upper))
            .collect();
        // report the margin actually achieved by the returned point
        let margin = achieved_margin(&point, active).min(self.margin_cap);
        MarginSolution { margin, point }
    }

    fn vertices(&self, active: &[(&HalfSpace, f64)]) -> MarginSolution {
        // rows a . (u, s) >= b
        let dim = self.dim;
        let n = dim + 1;
        let mut sys: Vec<(Vec<f64>, f64)> = Vec::new();
        for (c, nrm) in active {
            let mut a = c.normal.clone();
            a.push(-nrm);
            sys.push((a, c.offset));
        }
        for j in 0..dim {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            sys.push((a.clone(), self.lower));
            a[j] = -1.0;
            sys.push((a, -self.upper));
        }
        let mut cap = vec![0.0; n];
        cap[dim] = -1.0;
        sys.push((cap, -self.margin_cap));

        let mut best = MarginSolution {
            margin: f64::NEG_INFINITY,
            point: vec![self.lower; dim],
        };
        for combo in crate::combinations::LexCombinations::new(sys.len(), n) {
            let mut m: Vec<Vec<f64>> = combo
                .iter()
                .map(|&i| {
                    let mut r = sys[i].0.clone();
                    r.push(sys[i].1);
                    r
                })
                .collect();
            let Some(z) = solve_dense(&mut m) else { continue };
            let feasible = sys.iter().all(|(a, b)| {
                let lhs: f64 = a.iter().zip(&z).map(|(x, y)| x * y).sum();
                lhs >= b - 1e-9 * (1.0 + b.abs())
            });
            if feasible && z[dim] > best.margin {
                best = MarginSolution {
                    margin: z[dim],
                    point: z[..dim].to_vec(),
                };
            }
        }
        best
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn achieved_margin(point: &[f64], active: &[(&HalfSpace, f64)]) -> f64 {
    active
        .iter()
        .map(|(c, nrm)| {
            let lhs: f64 = c.normal.iter().zip(point).map(|(a, u)| a * u).sum();
            (lhs - c.offset) / nrm
        })
        .fold(f64::INFINITY, f64::min)
}

fn pivot(t: &mut [f64], cols: usize, rows: usize, pr: usize, pc: usize) {
    let p = t[pr * cols + pc];
    for j in 0..cols {
        t[pr * cols + j] /= p;
    }
    let prow: Vec<f64> = t[pr * cols..(pr + 1) * cols].to_vec();
    for r in 0..rows {
        if r == pr {
            continue;
        }
        let f = t[r * cols + pc];
        if f != 0.0 {
            for j in 0..cols {
                t[r * cols + j] -= f * prow[j];
            }
            t[r * cols + pc] = 0.0;
        }
    }
}

/// Solves a square system given as augmented rows; `None` when singular.
fn solve_dense(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for j in col..=n {
                        m[r][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
