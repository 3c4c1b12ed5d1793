//! Gradient descent on convex quadratics with known smoothness, used to
//! check the sufficient-decrease inequality and the iteration bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{matmul, matmul_tn, Matrix, Rng};

/// `⌈2L(f0 - f*) / eps⌉`.
pub fn min_iterations_bound(l: f64, f0: f64, fstar: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidBound(format!("smoothness constant {l} must be positive")));
    }
    if f0 < fstar {
        return Err(Error::InvalidBound(format!("f0 = {f0} is below the optimum {fstar}")));
    }
    Ok((2.0 * l * (f0 - fstar) / eps).ceil() as u64)
}

/// `f(w) = ½ wᵀAw - bᵀw` with `A = U diag(λ) Uᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Largest eigenvalue, the gradient's Lipschitz constant.
    pub l: f64,
    pub w_star: Vec<f64>,
    pub f_star: f64,
}

impl Quadratic {
    /// Random orthogonal eigenbasis, eigenvalues uniform in `[lo, hi]`.
    pub fn random(dim: usize, lo: f64, hi: f64, rng: &mut Rng) -> Result<Self> {
        if dim == 0 || !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("bad quadratic: dim {dim}, eigenvalues [{lo}, {hi}]")));
        }
        let u = orthonormal(dim, rng);
        let eigenvalues: Vec<f64> = (0..dim).map(|_| rng.uniform(lo, hi)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        Self::from_parts(&u, eigenvalues, b)
    }

    /// Builds `A = U diag(λ) Uᵀ` for orthonormal `U`.
    pub fn from_parts(u: &Matrix, eigenvalues: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if u.shape() != (n, n) || b.len() != n {
            return Err(Error::Dimension("eigenbasis, eigenvalues and b disagree".into()));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidBound("eigenvalues must be positive".into()));
        }
        let scaled = |d: &dyn Fn(f64) -> f64| {
            let mut us = u.clone();
            for r in 0..n {
                for (c, v) in us.row_mut(r).iter_mut().enumerate() {
                    *v *= d(eigenvalues[c]);
                }
            }
            us
        };
        let a = crate::numeric::matmul_nt(&scaled(&|l| l), u)?;
        let inv = crate::numeric::matmul_nt(&scaled(&|l| 1.0 / l), u)?;
        let w_star = matmul(&inv, &Matrix::column_vector(&b))?.into_vec();
        let f_star = -0.5 * b.iter().zip(&w_star).map(|(x, y)| x * y).sum::<f64>();
        let l = eigenvalues.iter().copied().fold(0.0, f64::max);
        Ok(Quadratic {
            a,
            b,
            eigenvalues,
            l,
            w_star,
            f_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let aw = matmul(&self.a, &Matrix::column_vector(w)).expect("shapes agree");
        w.iter()
            .zip(aw.as_slice())
            .zip(&self.b)
            .map(|((wi, awi), bi)| 0.5 * wi * awi - bi * wi)
            .sum()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let aw = matmul_tn(&self.a, &Matrix::column_vector(w)).expect("shapes agree");
        aw.as_slice().iter().zip(&self.b).map(|(x, b)| x - b).collect()
    }
}

/// Gram-Schmidt on a Gaussian matrix; columns are orthonormal.
fn orthonormal(n: usize, rng: &mut Rng) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= dot * ci;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut u = Matrix::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            u[(r, c)] = *v;
        }
    }
    u
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Runs `steps` gradient steps at rate `eta` and returns the largest
/// `f(w_{k+1}) - f(w_k) + ‖∇f(w_k)‖² / (2L)`; non-positive means the
/// decrease inequality held at every step.
pub fn decrease_violation(q: &Quadratic, w0: &[f64], eta: f64, steps: usize) -> f64 {
    let mut w = w0.to_vec();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        let g = q.gradient(&w);
        let f = q.value(&w);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= eta * gi;
        }
        worst = worst.max(q.value(&w) - f + sq_norm(&g) / (2.0 * q.l));
    }
    worst
}

/// First `k >= 0` with `‖∇f(w_k)‖² <= eps` when stepping at `1/L`, or
/// `None` if `cap` steps are not enough.
pub fn iterations_to_tolerance(q: &Quadratic, w0: &[f64], eps: f64, cap: u64) -> Option<u64> {
    let mut w = w0.to_vec();
    for k in 0..=cap {
        let g = q.gradient(&w);
        if sq_norm(&g) <= eps {
            return Some(k);
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= gi / q.l;
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationCheck {
    pub quadratic: usize,
    pub eps: f64,
    pub observed: Option<u64>,
    pub bound: u64,
}

impl IterationCheck {
    pub fn holds(&self) -> bool {
        self.observed.is_some_and(|k| k <= self.bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub quadratics: usize,
    pub steps_per_quadratic: usize,
    /// Largest decrease-inequality slack over all steps (must be <= 1e-10).
    pub max_decrease_violation: f64,
    pub decrease_holds: bool,
    pub iteration_checks: Vec<IterationCheck>,
    pub iterations_hold: bool,
    /// `η = 2/L` keeps |w| constant and `η = 2.1/L` grows it on `½Lw²`.
    pub divergence_boundary_holds: bool,
}

impl BoundCheckReport {
    pub fn all_hold(&self) -> bool {
        self.decrease_holds && self.iterations_hold && self.divergence_boundary_holds
    }
}

/// Slack allowed in the decrease inequality for rounding.
pub const DECREASE_SLACK: f64 = 1e-10;

/// Checks the decrease inequality and the iteration bound on `count` random
/// quadratics of dimension 1 to `max_dim`.
pub fn run_bound_check(count: usize, max_dim: usize, eps_list: &[f64], seed: u64) -> Result<BoundCheckReport> {
    if max_dim == 0 {
        return Err(Error::Config("max dimension must be at least 1".into()));
    }
    if let Some(&e) = eps_list.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::InvalidTolerance(e));
    }
    let mut rng = Rng::new(seed);
    let steps = 50;
    let mut worst = f64::NEG_INFINITY;
    let mut checks = Vec::new();
    for i in 0..count {
        let dim = 1 + (rng.next_u64() % max_dim as u64) as usize;
        let q = Quadratic::random(dim, 0.1, 10.0, &mut rng)?;
        let w0: Vec<f64> = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect();
        worst = worst.max(decrease_violation(&q, &w0, 1.0 / q.l, steps));
        let f0 = q.value(&w0);
        for &eps in eps_list {
            let bound = min_iterations_bound(q.l, f0, q.f_star.min(f0), eps)?;
            checks.push(IterationCheck {
                quadratic: i,
                eps,
                observed: iterations_to_tolerance(&q, &w0, eps, bound.saturating_add(1)),
                bound,
            });
        }
    }
    Ok(BoundCheckReport {
        quadratics: count,
        steps_per_quadratic: steps,
        max_decrease_violation: worst,
        decrease_holds: count == 0 || worst <= DECREASE_SLACK,
        iterations_hold: checks.iter().all(IterationCheck::holds),
        iteration_checks: checks,
        divergence_boundary_holds: divergence_boundary(3.0),
    })
}

/// On `½Lw²`, `η = 2/L` flips the sign of `w` without changing `|w|` and
/// `η = 2.1/L` strictly grows `|w|`.
pub fn divergence_boundary(l: f64) -> bool {
    let run = |eta: f64| {
        let mut w: f64 = 1.0;
        let mut mags = vec![w.abs()];
        for _ in 0..20 {
            w -= eta * l * w;
            mags.push(w.abs());
        }
        mags
    };
    let edge = run(2.0 / l);
    let beyond = run(2.1 / l);
    edge.windows(2).all(|p| (p[1] - p[0]).abs() <= 1e-12 * p[0])
        && beyond.windows(2).all(|p| p[1] > p[0])
}
