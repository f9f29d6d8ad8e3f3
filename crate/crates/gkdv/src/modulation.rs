//! Modulation coordinates `(xi, eta, zeta)` of a field near the critical soliton, and
//! orbital distances to a soliton orbit.
//!
//! Frames are tabulated on a fine finite-difference grid, sampled onto the periodic grid
//! and windowed at the seam: `e3` carries a constant shelf toward `-inf` and the pairing
//! functions `g2`, `g3` are non-decaying toward `+inf`.

use crate::error::{GkdvError, Result};
use crate::evolution::{smooth_step, PeriodicGrid, Spectral};
use crate::grid::Grid;
use crate::linearization::{build_frame_with, solve3, ChainMode, FrameOptions, FrameResiduals};
use crate::nonlinearity::Nonlinearity;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Seam windows as fractions of the half-length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Windows {
    /// `e3` vanishes left of `left.0 L` and is untouched right of `left.1 L`.
    pub left: (f64, f64),
    /// `g2`, `g3` are untouched left of `right.0 L` and vanish right of `right.1 L`.
    pub right: (f64, f64),
}

impl Default for Windows {
    fn default() -> Self {
        Windows { left: (-0.8, -0.6), right: (0.75, 0.95) }
    }
}

impl Windows {
    pub fn left_at(&self, x: f64, l: f64) -> f64 {
        smooth_step((x / l - self.left.0) / (self.left.1 - self.left.0))
    }

    pub fn right_at(&self, x: f64, l: f64) -> f64 {
        1.0 - smooth_step((x / l - self.right.0) / (self.right.1 - self.right.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableOptions {
    /// Oriented offsets covered, `eta_lo < 0 < eta_hi`.
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// Node spacing in `eta`.
    pub eta_step: f64,
    pub mu: f64,
    pub windows: Windows,
    /// Target spacing of the finite-difference grid the frames are built on.
    pub fd_spacing: f64,
    pub chain: ChainMode,
}

impl TableOptions {
    /// Covers `[-eta1/4, 3 eta1/2]` with spacing `eta1/8`.
    pub fn for_tube(eta1: f64, mu: f64) -> Self {
        TableOptions {
            eta_lo: -0.25 * eta1,
            eta_hi: 1.5 * eta1,
            eta_step: eta1 / 8.0,
            mu,
            windows: Windows::default(),
            fd_spacing: 0.06,
            chain: ChainMode::Eigen,
        }
    }
}

/// One tabulated frame, sampled on the periodic grid.
#[derive(Debug, Clone)]
pub struct FrameNode {
    pub eta: f64,
    pub c: f64,
    pub lambda: f64,
    pub phi: Vec<f64>,
    pub e2: Vec<f64>,
    /// Windowed.
    pub e3: Vec<f64>,
    /// `g1 = phi`; `g2`, `g3` windowed.
    pub g: [Vec<f64>; 3],
    pub residuals: FrameResiduals,
    g_hat: [Vec<Complex64>; 3],
}

/// Frames at `c_star + orientation * eta` on equispaced `eta` nodes.
#[derive(Debug, Clone)]
pub struct FrameTable {
    pub c_star: f64,
    pub orientation: f64,
    pub mu: f64,
    pub nodes: Vec<FrameNode>,
    grid: PeriodicGrid,
    spec: Spectral,
    k: Vec<f64>,
    eta_first: f64,
    eta_step: f64,
    /// `<g_j^m, phi^n>` at `[m * M + n][j]`.
    p: Vec<[f64; 3]>,
    /// `<g_j^m, e3^n>` at `[m * M + n][j]`.
    q: Vec<[f64; 3]>,
}

fn periodic_inner(grid: &PeriodicGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * grid.spacing()
}

pub fn build_frame_table(
    nl: &Nonlinearity,
    c_star: f64,
    orientation: f64,
    grid: PeriodicGrid,
    opts: TableOptions,
) -> Result<FrameTable> {
    if !(opts.eta_lo <= 0.0 && opts.eta_hi > 0.0 && opts.eta_step > 0.0) || orientation.abs() != 1.0 {
        return Err(GkdvError::InvalidArgument("frame table needs eta_lo <= 0 < eta_hi, eta_step > 0, orientation +-1".into()));
    }
    let first = (opts.eta_lo / opts.eta_step).floor() as i64;
    let last = (opts.eta_hi / opts.eta_step).ceil() as i64;
    if last - first + 1 < 4 {
        return Err(GkdvError::InvalidArgument("frame table needs at least 4 nodes".into()));
    }
    let stride = (grid.spacing() / opts.fd_spacing).ceil().max(1.0) as usize;
    let n = grid.len();
    let fine = Grid::new(grid.half_length(), stride * n + 1)?;
    let l = grid.half_length();
    let xs = grid.nodes();
    let left: Vec<f64> = xs.iter().map(|&x| opts.windows.left_at(x, l)).collect();
    let right: Vec<f64> = xs.iter().map(|&x| opts.windows.right_at(x, l)).collect();
    let spec = Spectral::new(n);
    let sample = |v: &[f64]| -> Vec<f64> { (0..n).map(|j| v[j * stride]).collect() };
    let nodes: Vec<FrameNode> = (first..=last)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&m| {
            let eta = m as f64 * opts.eta_step;
            let c = c_star + orientation * eta;
            let frame = build_frame_with(nl, c, &fine, opts.mu, FrameOptions { chain: opts.chain, lambda_guess: None })?;
            let phi = sample(frame.profile.values());
            let e2 = sample(&frame.e[1]);
            let e3: Vec<f64> = sample(&frame.e[2]).iter().zip(&left).map(|(v, w)| v * w).collect();
            let g2: Vec<f64> = sample(&frame.g[1]).iter().zip(&right).map(|(v, w)| v * w).collect();
            let g3: Vec<f64> = sample(&frame.g[2]).iter().zip(&right).map(|(v, w)| v * w).collect();
            let g = [phi.clone(), g2, g3];
            let g_hat = [spec.forward(&g[0]), spec.forward(&g[1]), spec.forward(&g[2])];
            Ok(FrameNode { eta, c, lambda: frame.lambda, phi, e2, e3, g, residuals: frame.residuals, g_hat })
        })
        .collect::<Result<_>>()?;
    let mm = nodes.len();
    let mut p = vec![[0.0; 3]; mm * mm];
    let mut q = vec![[0.0; 3]; mm * mm];
    for a in 0..mm {
        for b in 0..mm {
            for j in 0..3 {
                p[a * mm + b][j] = periodic_inner(&grid, &nodes[a].g[j], &nodes[b].phi);
                q[a * mm + b][j] = periodic_inner(&grid, &nodes[a].g[j], &nodes[b].e3);
            }
        }
    }
    Ok(FrameTable {
        c_star,
        orientation,
        mu: opts.mu,
        nodes,
        k: grid.wavenumbers(),
        grid,
        spec,
        eta_first: first as f64 * opts.eta_step,
        eta_step: opts.eta_step,
        p,
        q,
    })
}

/// Four-point Lagrange weights and their derivatives at `t` (nodes at 0, 1, 2, 3).
fn lagrange4(t: f64) -> ([f64; 4], [f64; 4]) {
    let mut w = [0.0; 4];
    let mut dw = [0.0; 4];
    for i in 0..4 {
        let xi = i as f64;
        let mut prod = 1.0;
        let mut den = 1.0;
        for j in 0..4 {
            if j != i {
                prod *= t - j as f64;
                den *= xi - j as f64;
            }
        }
        let mut d = 0.0;
        for skip in 0..4 {
            if skip == i {
                continue;
            }
            let mut term = 1.0;
            for j in 0..4 {
                if j != i && j != skip {
                    term *= t - j as f64;
                }
            }
            d += term;
        }
        w[i] = prod / den;
        dw[i] = d / den;
    }
    (w, dw)
}

impl FrameTable {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spec
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn eta_range(&self) -> (f64, f64) {
        (self.eta_first, self.eta_first + self.eta_step * (self.nodes.len() - 1) as f64)
    }

    pub fn speed(&self, eta: f64) -> f64 {
        self.c_star + self.orientation * eta
    }

    /// Node index of `eta = 0`.
    pub fn center_node(&self) -> usize {
        (-self.eta_first / self.eta_step).round() as usize
    }

    /// First node and interpolation weights (with `d/deta`) for `eta`.
    pub fn stencil(&self, eta: f64) -> Option<(usize, [f64; 4], [f64; 4])> {
        let (lo, hi) = self.eta_range();
        if !(eta >= lo && eta <= hi) {
            return None;
        }
        let s = (eta - self.eta_first) / self.eta_step;
        let m0 = (s.floor() as i64 - 1).clamp(0, self.nodes.len() as i64 - 4) as usize;
        let (w, dw) = lagrange4(s - m0 as f64);
        Some((m0, w, dw.map(|d| d / self.eta_step)))
    }

    /// Interpolated `phi_{c(eta)} + zeta e3_{c(eta)}`.
    pub fn ansatz(&self, eta: f64, zeta: f64) -> Result<Vec<f64>> {
        let (m0, w, _) = self.stencil(eta).ok_or_else(|| GkdvError::InvalidArgument(format!("eta = {eta} outside frame table")))?;
        let mut out = vec![0.0; self.grid.len()];
        for (i, wi) in w.iter().enumerate() {
            let node = &self.nodes[m0 + i];
            for (o, (p, e)) in out.iter_mut().zip(node.phi.iter().zip(&node.e3)) {
                *o += wi * (p + zeta * e);
            }
        }
        Ok(out)
    }

    /// Interpolated `lambda(eta)`.
    pub fn lambda_at(&self, eta: f64) -> Option<f64> {
        let (m0, w, _) = self.stencil(eta)?;
        Some((0..4).map(|i| w[i] * self.nodes[m0 + i].lambda).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtractOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { tol: 1e-10, max_iter: 25, damping: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Modulation {
    /// Soliton position in the field's coordinates.
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
    pub iterations: usize,
    /// Largest scaled constraint residual.
    pub residual: f64,
    /// `u(. + xi) - phi_{c(eta)} - zeta e3_{c(eta)}`.
    #[serde(skip)]
    pub upsilon: Vec<f64>,
}

struct Constraint {
    value: [f64; 3],
    scale: [f64; 3],
    jac: [[f64; 3]; 3],
}

impl FrameTable {
    fn shifted_hat(&self, uh: &[Complex64], xi: f64) -> Vec<Complex64> {
        uh.iter().zip(&self.k).map(|(z, &k)| z * Complex64::from_polar(1.0, k * xi)).collect()
    }

    fn constraint(&self, uh: &[Complex64], xi: f64, eta: f64, zeta: f64) -> Option<Constraint> {
        let (m0, w, dw) = self.stencil(eta)?;
        let vh = self.shifted_hat(uh, xi);
        let norm = self.grid.spacing() / self.grid.len() as f64;
        let mm = self.nodes.len();
        let mut out = Constraint { value: [0.0; 3], scale: [0.0; 3], jac: [[0.0; 3]; 3] };
        for j in 0..3 {
            let (mut a, mut a_xi, mut a_eta) = (0.0, 0.0, 0.0);
            for i in 0..4 {
                let gh = &self.nodes[m0 + i].g_hat[j];
                let (mut s, mut ds) = (0.0, 0.0);
                for ((g, v), &k) in gh.iter().zip(&vh).zip(&self.k) {
                    let z = g.conj() * v;
                    s += z.re;
                    ds -= k * z.im;
                }
                a += w[i] * s * norm;
                a_xi += w[i] * ds * norm;
                a_eta += dw[i] * s * norm;
            }
            let (mut b, mut b_eta, mut b_zeta) = (0.0, 0.0, 0.0);
            for i in 0..4 {
                for l in 0..4 {
                    let idx = (m0 + i) * mm + m0 + l;
                    let pq = self.p[idx][j] + zeta * self.q[idx][j];
                    b += w[i] * w[l] * pq;
                    b_eta += (dw[i] * w[l] + w[i] * dw[l]) * pq;
                    b_zeta += w[i] * w[l] * self.q[idx][j];
                }
            }
            out.value[j] = a - b;
            out.scale[j] = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            out.jac[j] = [a_xi, a_eta - b_eta, -b_zeta];
        }
        Some(out)
    }

    /// Damped Newton solve of the three pairing constraints.
    pub fn extract(&self, u: &[f64], guess: (f64, f64, f64), opts: ExtractOptions) -> Result<Modulation> {
        if u.len() != self.grid.len() {
            return Err(GkdvError::GridMismatch { expected: self.grid.len(), got: u.len() });
        }
        let uh = self.spec.forward(u);
        let (mut xi, mut eta, mut zeta) = guess;
        let merit = |c: &Constraint| (0..3).map(|j| (c.value[j] / c.scale[j]).abs()).fold(0.0, f64::max);
        let diverged = |residual: f64| GkdvError::NewtonDiverged { t: f64::NAN, residual };
        let mut cur = self.constraint(&uh, xi, eta, zeta).ok_or_else(|| diverged(f64::INFINITY))?;
        let mut res = merit(&cur);
        let mut iterations = 0;
        while res > opts.tol {
            if iterations >= opts.max_iter {
                return Err(GkdvError::NoConvergence { what: "modulation extraction", iterations, residual: res });
            }
            iterations += 1;
            let mut jac = cur.jac;
            let mut rhs = [0.0; 3];
            for r in 0..3 {
                rhs[r] = -cur.value[r] / cur.scale[r];
                for v in jac[r].iter_mut() {
                    *v /= cur.scale[r];
                }
            }
            let mut col = [0.0f64; 3];
            for c in 0..3 {
                col[c] = (0..3).map(|r| jac[r][c].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                for row in jac.iter_mut() {
                    row[c] /= col[c];
                }
            }
            let d = solve3(&jac, rhs)?;
            let step = [d[0] / col[0], d[1] / col[1], d[2] / col[2]];
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..20 {
                let trial = (xi + alpha * step[0], eta + alpha * step[1], zeta + alpha * step[2]);
                if let Some(c) = self.constraint(&uh, trial.0, trial.1, trial.2) {
                    let r = merit(&c);
                    if r < res {
                        accepted = Some((trial, c, r));
                        break;
                    }
                }
                alpha *= opts.damping;
            }
            let Some((trial, c, r)) = accepted else {
                return Err(diverged(res));
            };
            (xi, eta, zeta) = trial;
            cur = c;
            res = r;
        }
        let vh = self.shifted_hat(&uh, xi);
        let mut upsilon = self.spec.inverse(&vh);
        let a = self.ansatz(eta, zeta)?;
        for (v, a) in upsilon.iter_mut().zip(&a) {
            *v -= a;
        }
        Ok(Modulation { xi, eta, zeta, iterations, residual: res, upsilon })
    }

    /// `||v||` in `L^2(min(1, e^{mu x}) dx)` and the matching `H^1` norm.
    pub fn weighted_norms(&self, v: &[f64]) -> (f64, f64) {
        weighted_norms(&self.grid, &self.spec, &self.k, v, 0.0, self.mu)
    }
}

fn weight(x: f64, center: f64, l: f64, mu: f64) -> f64 {
    let mut d = x - center;
    let period = 2.0 * l;
    d -= period * ((d + l) / period).floor();
    (mu * d).exp().min(1.0)
}

fn derivative(spec: &Spectral, k: &[f64], v: &[f64]) -> Vec<f64> {
    let mut vh = spec.forward(v);
    for (z, &kk) in vh.iter_mut().zip(k) {
        *z *= Complex64::new(0.0, kk);
    }
    spec.inverse(&vh)
}

/// `L^2` and `H^1` norms under the measure `min(1, e^{mu (x - center)}) dx`.
pub fn weighted_norms(grid: &PeriodicGrid, spec: &Spectral, k: &[f64], v: &[f64], center: f64, mu: f64) -> (f64, f64) {
    let dv = derivative(spec, k, v);
    let (mut a, mut b) = (0.0, 0.0);
    for (j, (x, d)) in v.iter().zip(&dv).enumerate() {
        let w = weight(grid.x(j), center, grid.half_length(), mu);
        a += w * x * x;
        b += w * d * d;
    }
    let h = grid.spacing();
    ((a * h).sqrt(), ((a + b) * h).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitalDistance {
    pub distance: f64,
    /// Translation of the reference attaining the infimum.
    pub shift: f64,
}

fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best grid translate of `reference` against `u` in the `H^1` inner product.
fn correlation_peak(grid: &PeriodicGrid, spec: &Spectral, k: &[f64], uh: &[Complex64], rh: &[Complex64]) -> f64 {
    let n = grid.len();
    let mut z: Vec<Complex64> = (0..n).map(|m| (uh[m] * rh[m].conj()) * (1.0 + k[m] * k[m])).collect();
    spec.inverse_in_place(&mut z);
    let best = (0..n).max_by(|&a, &b| z[a].re.total_cmp(&z[b].re)).unwrap_or(0);
    let s = best as f64 * grid.spacing();
    if s > grid.half_length() {
        s - 2.0 * grid.half_length()
    } else {
        s
    }
}

/// `inf_s ||u - reference(. - s)||_{H^1}` with the correlation peak refined by golden section.
pub fn orbital_distance(grid: &PeriodicGrid, u: &[f64], reference: &[f64]) -> OrbitalDistance {
    let spec = Spectral::new(grid.len());
    let k = grid.wavenumbers();
    orbital_distance_with(grid, &spec, &k, u, reference)
}

pub fn orbital_distance_with(grid: &PeriodicGrid, spec: &Spectral, k: &[f64], u: &[f64], reference: &[f64]) -> OrbitalDistance {
    let uh = spec.forward(u);
    let rh = spec.forward(reference);
    let norm = grid.spacing() / grid.len() as f64;
    let sq = |v: &[Complex64]| v.iter().zip(k).map(|(z, kk)| (1.0 + kk * kk) * z.norm_sqr()).sum::<f64>() * norm;
    let (nu, nr) = (sq(&uh), sq(&rh));
    let dist2 = |s: f64| {
        let cross: f64 = uh
            .iter()
            .zip(&rh)
            .zip(k)
            .map(|((a, b), &kk)| (1.0 + kk * kk) * (a.conj() * b * Complex64::from_polar(1.0, -kk * s)).re)
            .sum::<f64>()
            * norm;
        (nu + nr - 2.0 * cross).max(0.0)
    };
    let s0 = correlation_peak(grid, spec, k, &uh, &rh);
    let h = grid.spacing();
    let (s, d2) = golden(dist2, s0 - h, s0 + h, 1e-10 * (1.0 + s0.abs()));
    let (s, d2) = if dist2(s0) < d2 { (s0, dist2(s0)) } else { (s, d2) };
    OrbitalDistance { distance: d2.sqrt(), shift: s }
}

/// Orbital distance in the weighted `H^1` norm, the weight re-centred on the candidate shift.
pub fn weighted_orbital_distance(
    grid: &PeriodicGrid,
    spec: &Spectral,
    k: &[f64],
    u: &[f64],
    reference: &[f64],
    mu: f64,
    search: f64,
) -> OrbitalDistance {
    let uh = spec.forward(u);
    let rh = spec.forward(reference);
    let dist = |s: f64| {
        let mut d: Vec<Complex64> =
            uh.iter().zip(&rh).zip(k).map(|((a, b), &kk)| a - b * Complex64::from_polar(1.0, -kk * s)).collect();
        let mut dx: Vec<Complex64> = d.iter().zip(k).map(|(z, &kk)| z * Complex64::new(0.0, kk)).collect();
        spec.inverse_in_place(&mut d);
        spec.inverse_in_place(&mut dx);
        let mut acc = 0.0;
        for j in 0..grid.len() {
            acc += weight(grid.x(j), s, grid.half_length(), mu) * (d[j].re * d[j].re + dx[j].re * dx[j].re);
        }
        (acc * grid.spacing()).sqrt()
    };
    let s0 = correlation_peak(grid, spec, k, &uh, &rh);
    let (s, d) = golden(dist, s0 - search, s0 + search, 1e-8 * (1.0 + s0.abs()));
    OrbitalDistance { distance: d, shift: s }
}
