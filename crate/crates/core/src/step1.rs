//! Step I: can every user hit its upper SINR at once within the budget?
//!
//! Requiring `gamma_n = gamma_n^max` for all users is linear in the powers:
//! `(I - F) P = u` with `F[n][m] = beta gamma_n^max / L_n` off the diagonal
//! and `u[n] = eta_n gamma_n^max / (L_n G_n)`. A positive solution exists iff
//! the spectral radius of the nonnegative matrix `F` is below one.

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::rate::{PowerAllocation, SinrBounds};

pub const RADIUS_TOL: f64 = 1e-10;
pub const RADIUS_MAX_ITERS: usize = 10_000;
/// Radii within this distance of one are classified infeasible.
pub const RADIUS_MARGIN: f64 = 1e-8;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n.max(1))
            .take(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// The linear system for the users with positive demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSystem {
    pub matrix: Matrix,
    pub rhs: Vec<f64>,
    /// Indices (into the caller's user list) of the rows of the system.
    pub members: Vec<usize>,
    /// Size of the caller's user list.
    pub users: usize,
}

/// Builds `F` and `u`. Users with `gamma_max = 0` are left out; they
/// receive zero power.
pub fn build_system(bounds: &[SinrBounds], channels: &[ChannelState]) -> SinrSystem {
    assert_eq!(bounds.len(), channels.len());
    let members: Vec<usize> = (0..bounds.len()).filter(|&n| bounds[n].gamma_max > 0.0).collect();
    let k = members.len();
    let mut matrix = Matrix::zeros(k);
    let mut rhs = Vec::with_capacity(k);
    for (i, &n) in members.iter().enumerate() {
        let c = &channels[n];
        let g = bounds[n].gamma_max;
        let off = c.orthogonality * g / c.proc_gain;
        for j in 0..k {
            if j != i {
                matrix.set(i, j, off);
            }
        }
        rhs.push(c.noise * g / (c.proc_gain * c.gain));
    }
    SinrSystem {
        matrix,
        rhs,
        members,
        users: bounds.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the bracket closed (or,
    /// for [`radius_below`], before it settled the comparison).
    pub converged: bool,
}

/// Perron root of a nonnegative matrix by power iteration on `I + F`,
/// bracketed with Collatz-Wielandt bounds
/// `min_i (Fx)_i / x_i <= rho <= max_i (Fx)_i / x_i`. The shift keeps the
/// iteration from cycling on periodic matrices such as `[[0,1],[1,0]]`.
pub fn spectral_radius(matrix: &Matrix, tol: f64, max_iters: usize) -> SpectralRadius {
    bracket(matrix, max_iters, |lo, hi| hi - lo <= tol * hi.max(f64::MIN_POSITIVE) || hi == 0.0)
}

/// Same iteration, stopped as soon as the bracket lies entirely on one side
/// of `threshold` or has closed to `tol`.
pub fn radius_below(matrix: &Matrix, threshold: f64, tol: f64, max_iters: usize) -> SpectralRadius {
    bracket(matrix, max_iters, |lo, hi| {
        lo >= threshold || hi < threshold || hi - lo <= tol * hi.max(f64::MIN_POSITIVE) || hi == 0.0
    })
}

fn bracket(matrix: &Matrix, max_iters: usize, done: impl Fn(f64, f64) -> bool) -> SpectralRadius {
    let n = matrix.dim();
    if n == 0 {
        return SpectralRadius {
            value: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for it in 1..=max_iters {
        let fx = matrix.mul_vec(&x);
        let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
        for (a, b) in fx.iter().zip(&x) {
            let r = a / b;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        lo = f64::max(lo, rmin);
        hi = f64::min(hi, rmax);
        if done(lo, hi) {
            return SpectralRadius {
                value: 0.5 * (lo + hi),
                lower: lo,
                upper: hi,
                iterations: it,
                converged: true,
            };
        }
        // x <- (I + F) x, normalized; stays strictly positive
        let mut next: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a + b).collect();
        let norm: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= norm);
        x = next;
    }
    SpectralRadius {
        value: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        iterations: max_iters,
        converged: false,
    }
}

/// Gaussian elimination with partial pivoting. `None` if a pivot vanishes.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.dim();
    let mut m = a.data.clone();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[pivot * n + col].abs() <= f64::EPSILON * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            rhs.swap(pivot, col);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row * n + row];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step1Status {
    /// Every user reaches its upper SINR within budget.
    Optimal(PowerAllocation),
    /// No nonnegative solution exists (radius at or above one).
    InfeasibleSpectral,
    /// Solvable, but the solution needs more than the budget.
    ExceedsBudget(PowerAllocation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step1Outcome {
    pub status: Step1Status,
    pub spectral_radius: SpectralRadius,
}

impl Step1Outcome {
    pub fn optimal(&self) -> Option<&PowerAllocation> {
        match &self.status {
            Step1Status::Optimal(a) => Some(a),
            _ => None,
        }
    }
}

pub fn solve_step1(system: &SinrSystem, budget: f64) -> Result<Step1Outcome> {
    let radius = radius_below(&system.matrix, 1.0 - RADIUS_MARGIN, RADIUS_TOL, RADIUS_MAX_ITERS);
    if !radius.converged || radius.upper >= 1.0 - RADIUS_MARGIN {
        return Ok(Step1Outcome {
            status: Step1Status::InfeasibleSpectral,
            spectral_radius: radius,
        });
    }
    let k = system.members.len();
    let mut i_minus_f = Matrix::zeros(k);
    for r in 0..k {
        for c in 0..k {
            let id = if r == c { 1.0 } else { 0.0 };
            i_minus_f.set(r, c, id - system.matrix.get(r, c));
        }
    }
    let solution = solve_linear(&i_minus_f, &system.rhs).ok_or_else(|| {
        Error::IllConditioned(format!("I - F singular with spectral radius {}", radius.value))
    })?;
    if solution.iter().zip(&system.rhs).any(|(p, u)| *u > 0.0 && !(*p > 0.0)) {
        // radius < 1 implies (I - F)^-1 > 0; a nonpositive entry is roundoff
        return Ok(Step1Outcome {
            status: Step1Status::InfeasibleSpectral,
            spectral_radius: radius,
        });
    }
    let mut powers = vec![0.0; system.users];
    for (&n, p) in system.members.iter().zip(solution) {
        powers[n] = p.max(0.0);
    }
    let alloc = PowerAllocation { powers, budget };
    let status = if alloc.total() <= budget {
        Step1Status::Optimal(alloc)
    } else {
        Step1Status::ExceedsBudget(alloc)
    };
    Ok(Step1Outcome {
        status,
        spectral_radius: radius,
    })
}
