//! Linearization `H = -d^2/dx^2 + f'(phi) + c` about a solitary wave, the generalized
//! kernel of `dx H` and of its adjoint, the pairing matrix and the spectral projection.

use crate::banded::{BandMatrix, BorderedSystem};
use crate::error::{GkdvError, Result};
use crate::grid::{d1_stencil, d2_stencil, first_derivative, second_derivative, Grid};
use crate::nonlinearity::Nonlinearity;
use crate::soliton::{build_profile, SolitonProfile};
use num_complex::Complex64;
use serde::Serialize;

/// Growth-indicator threshold above which a decaying solve is rejected.
pub const FREDHOLM_THRESHOLD: f64 = 1e3;
/// Relative size of `<e1, R>` treated as quadrature rounding.
pub const PAIRING_FLOOR: f64 = 1e-12;
const CHAIN_MAX_ITER: usize = 30;
/// Nodes dropped at each end when measuring differential residuals.
pub const EDGE_SKIP: usize = 4;

/// Boundary condition at `x = -L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LeftBc {
    /// `u' = sqrt(c) u`.
    Decay,
    /// `u(-L) = value`.
    Constant(f64),
}

/// Potential `f'(phi) + c` of the operator.
fn potential(nl: &Nonlinearity, profile: &SolitonProfile) -> Vec<f64> {
    let c = profile.speed();
    profile.values().iter().map(|&p| nl.df(p) + c).collect()
}

/// `H v` with fourth-order differences (one-sided at the ends).
pub fn apply_h(nl: &Nonlinearity, profile: &SolitonProfile, v: &[f64]) -> Result<Vec<f64>> {
    profile.grid().check(v)?;
    let d2 = second_derivative(v, profile.grid().spacing());
    let q = potential(nl, profile);
    Ok(v.iter().zip(&d2).zip(&q).map(|((&vi, &di), &qi)| -di + qi * vi).collect())
}

/// Result of a bordered solve of `H u = R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HSolve {
    pub solution: Vec<f64>,
    /// Coefficient of `e1` absorbed by the border.
    pub multiplier: f64,
    /// Predicted left-edge amplitude of the growing mode relative to `max |u|`;
    /// `None` for the constant left condition.
    pub growth_indicator: Option<f64>,
}

fn assemble_h(nl: &Nonlinearity, profile: &SolitonProfile, left: LeftBc) -> BandMatrix {
    let grid = profile.grid();
    let n = grid.len();
    let h = grid.spacing();
    let k = profile.speed().sqrt();
    let q = potential(nl, profile);
    let mut a = BandMatrix::zeros(n, 4, 4);
    match left {
        LeftBc::Decay => {
            for (j, w) in d1_stencil(0, n).entries(0, 1.0 / h) {
                a.add(0, j, w);
            }
            a.add(0, 0, -k);
        }
        LeftBc::Constant(_) => a.set(0, 0, 1.0),
    }
    for i in 1..n - 1 {
        for (j, w) in d2_stencil(i, n).entries(i, -1.0 / (h * h)) {
            a.add(i, j, w);
        }
        a.add(i, i, q[i]);
    }
    for (j, w) in d1_stencil(n - 1, n).entries(n - 1, 1.0 / h) {
        a.add(n - 1, j, w);
    }
    a.add(n - 1, n - 1, k);
    a
}

/// Predicted size of the left-growing component of the `+L`-decaying solution,
/// from the Wronskian of `e1` with the growing solution, relative to `max |u|`.
fn growth_indicator(profile: &SolitonProfile, e1: &[f64], r: &[f64], u: &[f64]) -> f64 {
    let grid = profile.grid();
    let k = profile.speed().sqrt();
    let l = grid.half_length();
    let probe = grid.center() / 2;
    let amp = e1[probe].abs() * (k * grid.x(probe).abs()).exp();
    let floor = PAIRING_FLOOR * grid.norm(e1) * grid.norm(r);
    let pairing = grid.inner(e1, r).abs() - floor;
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if pairing <= 0.0 {
        return 0.0;
    }
    let log = pairing.ln() - (2.0 * k * amp).ln() + k * l - scale.ln();
    log.min(700.0).exp()
}

/// Solves `H u = R` on the grid, decaying at `+L`, with `<e1, u> = 0`.
pub fn solve_h(nl: &Nonlinearity, profile: &SolitonProfile, r: &[f64], left: LeftBc) -> Result<Vec<f64>> {
    solve_h_report(nl, profile, r, left).map(|s| s.solution)
}

pub fn solve_h_report(nl: &Nonlinearity, profile: &SolitonProfile, r: &[f64], left: LeftBc) -> Result<HSolve> {
    let grid = profile.grid();
    grid.check(r)?;
    let n = grid.len();
    let e1 = profile.translation_mode();
    let lu = assemble_h(nl, profile, left).factor()?;
    let mut col = e1.clone();
    col[0] = 0.0;
    col[n - 1] = 0.0;
    let weights = grid.weights();
    let row: Vec<f64> = e1.iter().zip(&weights).map(|(a, w)| a * w).collect();
    let sys = BorderedSystem::new(&lu, &col, &row, 0.0)?;
    let mut rhs = r.to_vec();
    rhs[0] = match left {
        LeftBc::Decay => 0.0,
        LeftBc::Constant(v) => v,
    };
    rhs[n - 1] = 0.0;
    let sol = sys.solve(&rhs, 0.0);
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(GkdvError::SingularSystem("non-finite solution".into()));
    }
    let growth_indicator = match left {
        LeftBc::Decay => {
            let g = growth_indicator(profile, &e1, r, &sol.x);
            if g > FREDHOLM_THRESHOLD {
                return Err(GkdvError::FredholmViolation { indicator: g, threshold: FREDHOLM_THRESHOLD });
            }
            Some(g)
        }
        LeftBc::Constant(_) => None,
    };
    Ok(HSolve { solution: sol.x, multiplier: sol.y, growth_indicator })
}

/// Solution `(lambda, e3)` of `dx H e3 = e2 + lambda e3` with `<e1, e3> = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSolution {
    pub lambda: f64,
    pub e3: Vec<f64>,
    pub iterations: usize,
}

/// Newton iteration on the first-order-integrated chain
/// `H e3 - lambda E = Theta`, `E' = e3`, `E(L) = 0`, bordered by `<e1, e3> = 0`.
pub fn lambda_and_e3(
    nl: &Nonlinearity,
    profile: &SolitonProfile,
    e2: &[f64],
    theta: &[f64],
    lambda0: f64,
    e3_guess: &[f64],
) -> Result<ChainSolution> {
    let grid = profile.grid();
    let n = grid.len();
    let h = grid.spacing();
    let c = profile.speed();
    let k = c.sqrt();
    let q = potential(nl, profile);
    let e1 = profile.translation_mode();
    let weights = grid.weights();
    grid.check(e2)?;
    grid.check(theta)?;
    grid.check(e3_guess)?;

    let big_e = grid.cumulative_from_right(e3_guess);
    let mut z = vec![0.0; 2 * n];
    for i in 0..n {
        z[2 * i] = e3_guess[i];
        z[2 * i + 1] = big_e[i];
    }
    let mut lambda = lambda0;
    let mut border_row = vec![0.0; 2 * n];
    for i in 0..n {
        border_row[2 * i] = weights[i] * e1[i];
    }
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n - 1 {
        rhs[2 * i] = theta[i];
    }
    let lambda_scale = lambda_bound(nl, profile).max(f64::MIN_POSITIVE);

    let mut last = f64::INFINITY;
    for iter in 1..=CHAIN_MAX_ITER {
        let mut a = BandMatrix::zeros(2 * n, 10, 10);
        a.set(0, 0, c);
        a.set(0, 1, -lambda);
        for i in 1..n - 1 {
            for (j, w) in d2_stencil(i, n).entries(i, -1.0 / (h * h)) {
                a.add(2 * i, 2 * j, w);
            }
            a.add(2 * i, 2 * i, q[i]);
            a.add(2 * i, 2 * i + 1, -lambda);
        }
        for (j, w) in d1_stencil(n - 1, n).entries(n - 1, 1.0 / h) {
            a.add(2 * (n - 1), 2 * j, w);
        }
        a.add(2 * (n - 1), 2 * (n - 1), k);
        for i in 0..n - 1 {
            let r = 2 * i + 1;
            a.add(r, 2 * i + 3, 1.0);
            a.add(r, 2 * i + 1, -1.0);
            a.add(r, 2 * i, -0.5 * h);
            a.add(r, 2 * i + 2, -0.5 * h);
            for (j, w) in d1_stencil(i + 1, n).entries(i + 1, h / 12.0) {
                a.add(r, 2 * j, w);
            }
            for (j, w) in d1_stencil(i, n).entries(i, -h / 12.0) {
                a.add(r, 2 * j, w);
            }
        }
        a.set(2 * n - 1, 2 * n - 1, 1.0);

        let az = a.mul_vec(&z);
        let f: Vec<f64> = az.iter().zip(&rhs).map(|(x, b)| b - x).collect();
        let g = -dot(&border_row, &z);
        let mut col = vec![0.0; 2 * n];
        for i in 0..n - 1 {
            col[2 * i] = -z[2 * i + 1];
        }
        let lu = a.factor()?;
        let sys = BorderedSystem::new(&lu, &col, &border_row, 0.0)?;
        let step = sys.solve(&f, g);
        for (zi, di) in z.iter_mut().zip(&step.x) {
            *zi += di;
        }
        lambda += step.y;
        let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dmax = step.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !lambda.is_finite() || !zmax.is_finite() {
            return Err(GkdvError::NoConvergence { what: "chain Newton", iterations: iter, residual: f64::NAN });
        }
        last = dmax / zmax.max(f64::MIN_POSITIVE);
        if last <= 1e-11 && step.y.abs() <= 1e-13 * lambda_scale + 1e-10 * lambda.abs() {
            let e3 = (0..n).map(|i| z[2 * i]).collect();
            return Ok(ChainSolution { lambda, e3, iterations: iter });
        }
    }
    Err(GkdvError::NoConvergence { what: "chain Newton", iterations: CHAIN_MAX_ITER, residual: last })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max |f''(phi) phi'|`, a bound for real eigenvalues.
pub fn lambda_bound(nl: &Nonlinearity, profile: &SolitonProfile) -> f64 {
    profile
        .values()
        .iter()
        .zip(profile.derivative())
        .map(|(&p, &dp)| (nl.d2f(p) * dp).abs())
        .fold(0.0, f64::max)
}

/// How the third chain vector is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum ChainMode {
    /// Eigenvalue-consistent chain `dx H e3 = e2 + lambda e3`.
    #[default]
    Eigen,
    /// `H e3 = Theta` with `lambda = 0`; usable away from critical speeds.
    Static,
}

/// Relative residuals certifying the discrete frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameResiduals {
    /// `||H e1|| / ||e1||`.
    pub kernel: f64,
    /// `||dx H e2 - e1|| / ||e1||`.
    pub chain2: f64,
    /// `||dx H e3 - e2 - lambda e3|| / ||e1||`.
    pub chain3: f64,
    /// `||dx H psi - lambda psi|| / ||psi||`, `psi = e1 + lambda e2 + lambda^2 e3`.
    pub eigen: f64,
}

/// Generalized kernel of `dx H` and of `-H dx` at one speed.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizationFrame {
    pub c: f64,
    pub mu: f64,
    #[serde(skip)]
    pub profile: SolitonProfile,
    #[serde(skip)]
    pub e: [Vec<f64>; 3],
    #[serde(skip)]
    pub g: [Vec<f64>; 3],
    #[serde(skip)]
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub lambda_bound: f64,
    pub t: [[f64; 3]; 3],
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_prime: f64,
    pub i_prime: f64,
    pub chain: ChainMode,
    pub chain_iterations: usize,
    pub residuals: FrameResiduals,
}

/// `min(0.3 sqrt(c), 0.5 sqrt(c/3))`.
pub fn default_mu(c: f64) -> f64 {
    (0.3 * c.sqrt()).min(0.5 * (c / 3.0).sqrt())
}

/// `e2 = d phi / dc` from `H e2 = -phi`.
pub fn speed_mode(nl: &Nonlinearity, profile: &SolitonProfile) -> Result<Vec<f64>> {
    let r: Vec<f64> = profile.values().iter().map(|v| -v).collect();
    solve_h(nl, profile, &r, LeftBc::Decay)
}

fn interior_norm(v: &[f64], grid: &Grid) -> f64 {
    let n = v.len();
    let s: f64 = v[EDGE_SKIP..n - EDGE_SKIP].iter().map(|x| x * x).sum();
    (s * grid.spacing()).sqrt()
}

fn frame_residuals(
    nl: &Nonlinearity,
    profile: &SolitonProfile,
    e: &[Vec<f64>; 3],
    lambda: f64,
) -> Result<FrameResiduals> {
    let grid = profile.grid();
    let h = grid.spacing();
    let ne1 = interior_norm(&e[0], grid);
    let he: Vec<Vec<f64>> = e.iter().map(|v| apply_h(nl, profile, v)).collect::<Result<_>>()?;
    let dhe2 = first_derivative(&he[1], h);
    let dhe3 = first_derivative(&he[2], h);
    let r2: Vec<f64> = dhe2.iter().zip(&e[0]).map(|(a, b)| a - b).collect();
    let r3: Vec<f64> = (0..grid.len()).map(|i| dhe3[i] - e[1][i] - lambda * e[2][i]).collect();
    let psi: Vec<f64> = (0..grid.len()).map(|i| e[0][i] + lambda * e[1][i] + lambda * lambda * e[2][i]).collect();
    Ok(FrameResiduals {
        kernel: interior_norm(&he[0], grid) / ne1,
        chain2: interior_norm(&r2, grid) / ne1,
        chain3: interior_norm(&r3, grid) / ne1,
        eigen: eigen_residual_of(nl, profile, &psi, lambda)?,
    })
}

fn eigen_residual_of(nl: &Nonlinearity, profile: &SolitonProfile, psi: &[f64], lambda: f64) -> Result<f64> {
    let grid = profile.grid();
    let hpsi = apply_h(nl, profile, psi)?;
    let d = first_derivative(&hpsi, grid.spacing());
    let r: Vec<f64> = d.iter().zip(psi).map(|(a, p)| a - lambda * p).collect();
    Ok(interior_norm(&r, grid) / interior_norm(psi, grid))
}

/// Options for [`build_frame_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameOptions {
    pub chain: ChainMode,
    /// Overrides the starting eigenvalue of the chain Newton iteration.
    pub lambda_guess: Option<f64>,
}

pub fn build_frame(nl: &Nonlinearity, c: f64, grid: &Grid, mu: f64) -> Result<LinearizationFrame> {
    build_frame_with(nl, c, grid, mu, FrameOptions::default())
}

pub fn build_frame_with(
    nl: &Nonlinearity,
    c: f64,
    grid: &Grid,
    mu: f64,
    opts: FrameOptions,
) -> Result<LinearizationFrame> {
    if !(mu > 0.0 && mu < c.sqrt()) {
        return Err(GkdvError::InvalidArgument(format!("weight mu = {mu} must lie in (0, sqrt(c))")));
    }
    let profile = build_profile(nl, c, grid)?;
    frame_from_profile(nl, profile, mu, opts)
}

pub fn frame_from_profile(
    nl: &Nonlinearity,
    profile: SolitonProfile,
    mu: f64,
    opts: FrameOptions,
) -> Result<LinearizationFrame> {
    let grid = *profile.grid();
    let c = profile.speed();
    let e1 = profile.translation_mode();
    let e2 = speed_mode(nl, &profile)?;
    let theta = grid.cumulative_from_right(&e2);
    let phi = profile.values().to_vec();
    let n_prime = grid.inner(&phi, &e2);
    let i_prime = grid.integrate(&e2);
    let shelf = theta[0] / c;
    let e3_static = solve_h(nl, &profile, &theta, LeftBc::Constant(shelf))?;
    let (lambda, e3, iterations) = match opts.chain {
        ChainMode::Static => (0.0, e3_static, 0),
        ChainMode::Eigen => {
            let lambda0 = opts.lambda_guess.unwrap_or(-n_prime / grid.inner(&phi, &e3_static));
            let sol = lambda_and_e3(nl, &profile, &e2, &theta, lambda0, &e3_static)?;
            (sol.lambda, sol.e3, sol.iterations)
        }
    };
    let big_e3 = grid.cumulative_from_right(&e3);
    let g1 = phi.clone();
    let g2 = grid.cumulative_from_left(&e2);
    let g3: Vec<f64> = Grid::reflect(&big_e3).iter().map(|v| -v).collect();
    let e = [e1, e2, e3];
    let g = [g1, g2, g3];
    let mut t = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            t[j][k] = grid.inner(&g[j], &e[k]);
        }
    }
    let residuals = frame_residuals(nl, &profile, &e, lambda)?;
    Ok(LinearizationFrame {
        c,
        mu,
        lambda_bound: lambda_bound(nl, &profile),
        profile,
        alpha: t[0][2],
        beta: t[1][2],
        gamma: t[2][2],
        e,
        g,
        theta,
        lambda,
        t,
        n_prime,
        i_prime,
        chain: opts.chain,
        chain_iterations: iterations,
        residuals,
    })
}

impl LinearizationFrame {
    pub fn grid(&self) -> &Grid {
        self.profile.grid()
    }

    /// `psi = e1 + lambda e2 + lambda^2 e3`.
    pub fn eigenvector(&self) -> Vec<f64> {
        let l = self.lambda;
        (0..self.grid().len()).map(|i| self.e[0][i] + l * self.e[1][i] + l * l * self.e[2][i]).collect()
    }

    /// Largest relative asymmetry of `T` over the off-diagonal pairs.
    pub fn t_asymmetry(&self) -> f64 {
        let scale = self.t.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for j in 0..3 {
            for k in j + 1..3 {
                worst = worst.max((self.t[j][k] - self.t[k][j]).abs());
            }
        }
        worst / scale
    }

    /// Pairings `<g_k, v>`.
    pub fn pairings(&self, v: &[f64]) -> Result<[f64; 3]> {
        self.grid().check(v)?;
        let grid = self.grid();
        Ok([grid.inner(&self.g[0], v), grid.inner(&self.g[1], v), grid.inner(&self.g[2], v)])
    }

    /// Weighted norm `||e^{mu x} v||` (the weight is applied to the function).
    pub fn weighted_norm(&self, v: &[f64]) -> f64 {
        let grid = self.grid();
        let w: Vec<f64> = v.iter().enumerate().map(|(i, x)| x * (self.mu * grid.x(i)).exp()).collect();
        grid.norm(&w)
    }
}

/// `||dx H psi - lambda psi|| / ||psi||` on the grid interior.
pub fn eigen_residual(nl: &Nonlinearity, frame: &LinearizationFrame) -> Result<f64> {
    eigen_residual_of(nl, &frame.profile, &frame.eigenvector(), frame.lambda)
}

/// Solves the 3x3 system `T x = b` by partial-pivoting elimination.
pub fn solve3(t: &[[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let det = det3(t);
    let scale = t.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(det.abs() > 1e-14 * scale.powi(3)) {
        return Err(GkdvError::SingularT { det });
    }
    let mut a = [[t[0][0], t[0][1], t[0][2], b[0]], [t[1][0], t[1][1], t[1][2], b[1]], [t[2][0], t[2][1], t[2][2], b[2]]];
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        a.swap(col, piv);
        for r in col + 1..3 {
            let m = a[r][col] / a[col][col];
            for k in col..4 {
                a[r][k] -= m * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][3] - s) / a[r][r];
    }
    Ok(x)
}

pub fn det3(t: &[[f64; 3]; 3]) -> f64 {
    t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
        + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])
}

/// Discrete-mode projection `P v` and its complement `v - P v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: [f64; 3],
    pub range: Vec<f64>,
    pub complement: Vec<f64>,
}

/// `P v = sum_{j,k} (T^{-1})_{jk} <g_k, v> e_j`.
pub fn project_discrete(frame: &LinearizationFrame, v: &[f64]) -> Result<Projection> {
    let b = frame.pairings(v)?;
    let a = solve3(&frame.t, b)?;
    let n = v.len();
    let range: Vec<f64> = (0..n).map(|i| a[0] * frame.e[0][i] + a[1] * frame.e[1][i] + a[2] * frame.e[2][i]).collect();
    let complement = v.iter().zip(&range).map(|(x, p)| x - p).collect();
    Ok(Projection { coefficients: a, range, complement })
}

/// Essential spectrum curve `(mu - ik)^3 - c (mu - ik)` on `k_samples` points of `[-k_max, k_max]`.
pub fn essential_spectrum_range(c: f64, mu: f64, k_max: f64, k_samples: usize) -> Vec<(f64, Complex64)> {
    let m = k_samples.max(2);
    (0..m)
        .map(|j| {
            let k = -k_max + 2.0 * k_max * j as f64 / (m - 1) as f64;
            let z = Complex64::new(mu, -k);
            (k, z * z * z - c * z)
        })
        .collect()
}

/// Essential spectrum with `k_max = 4 max(1, sqrt(c))`.
pub fn essential_spectrum(c: f64, mu: f64, k_samples: usize) -> Vec<Complex64> {
    essential_spectrum_range(c, mu, 4.0 * c.sqrt().max(1.0), k_samples).into_iter().map(|(_, l)| l).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kdv_frame() -> (Nonlinearity, LinearizationFrame) {
        let nl = Nonlinearity::kdv();
        let g = Grid::new(30.0, 4001).unwrap();
        let f = build_frame_with(&nl, 1.0, &g, default_mu(1.0), FrameOptions { chain: ChainMode::Static, lambda_guess: None })
            .unwrap();
        (nl, f)
    }

    #[test]
    fn kdv_speed_mode_matches_closed_form() {
        let (_, f) = kdv_frame();
        // d/dc [c/2 sech^2(sqrt(c) x/2)] at c = 1.
        for (i, &x) in f.grid().nodes().iter().enumerate() {
            let s = 1.0 / (0.5 * x).cosh();
            let t = (0.5 * x).tanh();
            let exact = 0.5 * s * s - 0.25 * x * s * s * t;
            assert!((f.e[1][i] - exact).abs() < 1e-8, "x={x} got {} exact {exact}", f.e[1][i]);
        }
    }

    #[test]
    fn kdv_pairings() {
        let (_, f) = kdv_frame();
        // N = c^{3/2}/3, I = 2 sqrt(c)
        assert!((f.n_prime - 0.5).abs() < 1e-8, "{:?}", (f.n_prime, f.i_prime, f.t));
        assert!((f.i_prime - 1.0).abs() < 1e-8, "{}", f.i_prime);
        assert!((f.t[1][1] - 0.5).abs() < 1e-7);
        assert!(f.t[0][0].abs() < 1e-12);
        assert!((f.t[0][1] - f.t[1][0]).abs() < 1e-8);
        assert!(f.t_asymmetry() < 1e-7, "asym {}", f.t_asymmetry());
    }

    #[test]
    fn projection_is_identity_on_frame() {
        let (_, f) = kdv_frame();
        for j in 0..3 {
            let p = project_discrete(&f, &f.e[j]).unwrap();
            let scale = f.e[j].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = p.complement.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-8 * scale, "j={j} err={err}");
        }
    }

    #[test]
    fn fredholm_violation_for_translation_mode() {
        let (nl, f) = kdv_frame();
        let r = f.e[0].clone();
        assert!(matches!(solve_h(&nl, &f.profile, &r, LeftBc::Decay), Err(GkdvError::FredholmViolation { .. })));
    }

    #[test]
    fn essential_spectrum_values() {
        let l = essential_spectrum_range(1.0, 0.1, 1.0, 3);
        assert!((l[1].1.re + 0.099).abs() < 1e-15 && l[1].1.im.abs() < 1e-15);
        assert!(essential_spectrum(1.0, 0.0, 101).iter().all(|z| z.re == 0.0));
    }

    #[test]
    fn solve3_matches() {
        let t = [[0.0, 2.0, 1.0], [2.0, 3.0, 0.5], [1.0, 0.5, 4.0]];
        let x = solve3(&t, [1.0, 2.0, 3.0]).unwrap();
        for r in 0..3 {
            let s: f64 = (0..3).map(|k| t[r][k] * x[k]).sum();
            assert!((s - [1.0, 2.0, 3.0][r]).abs() < 1e-12);
        }
        assert!(solve3(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0; 3]).is_err());
    }
}
