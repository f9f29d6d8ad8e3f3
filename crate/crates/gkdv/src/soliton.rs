//! Solitary-wave profiles: amplitude root, profile integration, implicit quadrature.
//!
//! The profile solves `phi'' = c phi + f(phi)` with `phi(0) = xi`, `phi'(0) = 0`.
//! Near the crest the regular second-order system is integrated; once the profile
//! has dropped to half its amplitude the first integral is used in logarithmic form,
//! `(ln phi)' = -sqrt(c + 2 F(phi) / phi^2)`, which keeps the tail relatively accurate.

use crate::error::{GkdvError, Result};
use crate::grid::{second_derivative, Grid};
use crate::nonlinearity::Nonlinearity;
use serde::Serialize;

const SCAN_LO: f64 = 1.0e-12;
const SCAN_HI: f64 = 1.0e6;
const SCAN_RATIO: f64 = 1.02;
const RK_SUBSTEP: f64 = 0.002;

/// `c/2 + F(u)/u^2`; its first positive zero is the amplitude.
fn amplitude_function(nl: &Nonlinearity, c: f64, u: f64) -> f64 {
    0.5 * c + nl.primitive_over_square(u)
}

fn geometric_scan() -> impl Iterator<Item = f64> {
    let steps = ((SCAN_HI / SCAN_LO).ln() / SCAN_RATIO.ln()).ceil() as usize;
    (0..=steps).map(|k| SCAN_LO * SCAN_RATIO.powi(k as i32))
}

/// Crest height `xi_c`: smallest `u > 0` with `c u^2/2 + F(u) = 0`.
pub fn amplitude(nl: &Nonlinearity, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(GkdvError::InvalidArgument(format!("speed c = {c} must be positive")));
    }
    let g = |u: f64| amplitude_function(nl, c, u);
    let mut prev = SCAN_LO;
    let mut bracket = None;
    for u in geometric_scan() {
        if g(u) <= 0.0 {
            bracket = Some((prev, u));
            break;
        }
        prev = u;
    }
    let (mut lo, mut hi) = bracket.ok_or(GkdvError::NoSolitaryWave { c })?;
    if g(hi) == 0.0 {
        lo = hi;
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (lo, hi);
    let mut x0 = lo;
    let mut x1 = hi;
    for _ in 0..3 {
        let (g0, g1) = (g(x0), g(x1));
        if g1 == g0 {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if !(x2 >= a && x2 <= b) {
            break;
        }
        x0 = x1;
        x1 = x2;
    }
    let xi = if g(x1).abs() <= g(hi).abs().min(g(lo).abs()) { x1 } else { 0.5 * (lo + hi) };
    let slope = c * xi + nl.f(xi);
    if slope >= -1e-12 * c * xi {
        return Err(GkdvError::SonicLimit { c, slope });
    }
    Ok(xi)
}

/// End of the admissible speed interval and the crest height there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SonicPoint {
    pub speed: f64,
    pub amplitude: f64,
}

/// Largest speed `c_1` up to which the amplitude depends continuously on `c`:
/// the first record local maximum of `-2F(u)/u^2`. `None` when the profile exists for all `c > 0`
/// within the scan range.
pub fn sonic_limit(nl: &Nonlinearity) -> Option<SonicPoint> {
    let h = |u: f64| -2.0 * nl.primitive_over_square(u);
    let us: Vec<f64> = geometric_scan().collect();
    let hs: Vec<f64> = us.iter().map(|&u| h(u)).collect();
    let mut record = f64::NEG_INFINITY;
    for i in 1..us.len() - 1 {
        record = record.max(hs[i - 1]);
        if hs[i] > 0.0 && hs[i] >= record && hs[i] >= hs[i - 1] && hs[i] > hs[i + 1] {
            let (mut a, mut b) = (us[i - 1], us[i + 1]);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - r * (b - a);
            let mut x2 = a + r * (b - a);
            let (mut h1, mut h2) = (h(x1), h(x2));
            while b - a > 1e-12 * b {
                if h1 > h2 {
                    b = x2;
                    x2 = x1;
                    h2 = h1;
                    x1 = b - r * (b - a);
                    h1 = h(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    h1 = h2;
                    x2 = a + r * (b - a);
                    h2 = h(x2);
                }
            }
            let u = 0.5 * (a + b);
            return Some(SonicPoint { speed: h(u), amplitude: u });
        }
    }
    None
}

/// Grid-sampled solitary wave of speed `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolitonProfile {
    c: f64,
    amplitude: f64,
    grid: Grid,
    values: Vec<f64>,
    derivative: Vec<f64>,
    switch_node: usize,
}

/// Knobs for [`build_profile_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Stationary-residual tolerance relative to `c * xi`.
    pub residual_tol: f64,
    /// Node offset from the crest at which the crest integrator hands over to the tail
    /// integrator. Pinning it makes the profile a smooth function of `c`.
    pub switch_node: Option<usize>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { residual_tol: 1e-6, switch_node: None }
    }
}

impl SolitonProfile {
    pub fn speed(&self) -> f64 {
        self.c
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    /// Node offset where the tail integrator took over.
    pub fn switch_node(&self) -> usize {
        self.switch_node
    }

    /// `max |-phi'' + c phi + f(phi)|` with fourth-order differences.
    pub fn stationary_residual(&self, nl: &Nonlinearity) -> f64 {
        let d2 = second_derivative(&self.values, self.grid.spacing());
        self.values
            .iter()
            .zip(&d2)
            .map(|(&p, &pp)| (-pp + self.c * p + nl.f(p)).abs())
            .fold(0.0, f64::max)
    }

    /// `max |phi'^2 - c phi^2 - 2F(phi)|` over nodes with `x >= h`.
    pub fn first_integral_defect(&self, nl: &Nonlinearity) -> f64 {
        (self.grid.center() + 1..self.grid.len())
            .map(|i| {
                let p = self.values[i];
                let dp = self.derivative[i];
                (dp * dp - self.c * p * p - 2.0 * nl.big_f(p)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Fitted constants of `C1 e^{-sqrt(c)|x|} <= phi <= C2 e^{-sqrt(c)|x|}` on `|x| >= 1`.
    pub fn decay_constants(&self) -> (f64, f64) {
        let k = self.c.sqrt();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (i, &p) in self.values.iter().enumerate() {
            let x = self.grid.x(i).abs();
            if x >= 1.0 {
                let s = p * (k * x).exp();
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        (lo, hi)
    }

    /// `e1 = -phi'`.
    pub fn translation_mode(&self) -> Vec<f64> {
        self.derivative.iter().map(|d| -d).collect()
    }
}

/// `h^4 max|phi^(6)| / 90`, the expected error of the residual stencil on an exact profile.
fn stencil_truncation(profile: &SolitonProfile) -> f64 {
    let h = profile.grid.spacing();
    let mut d = profile.values.clone();
    for _ in 0..3 {
        d = second_derivative(&d, h);
    }
    let n = d.len();
    let edge = 12.min(n / 4);
    let top = d[edge..n - edge].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    h.powi(4) * top / 90.0
}

/// Builds the profile with default options.
pub fn build_profile(nl: &Nonlinearity, c: f64, grid: &Grid) -> Result<SolitonProfile> {
    build_profile_with(nl, c, grid, ProfileOptions::default())
}

pub fn build_profile_with(
    nl: &Nonlinearity,
    c: f64,
    grid: &Grid,
    opts: ProfileOptions,
) -> Result<SolitonProfile> {
    let xi = amplitude(nl, c)?;
    let n = grid.len();
    let mid = grid.center();
    let h = grid.spacing();
    let m = ((h * c.sqrt().max(1.0) / RK_SUBSTEP).ceil() as usize).max(1);
    let s = h / m as f64;

    let mut right_v = Vec::with_capacity(n - mid);
    let mut right_d = Vec::with_capacity(n - mid);
    right_v.push(xi);
    right_d.push(0.0);

    let accel = |p: f64| c * p + nl.f(p);
    let (mut p, mut q) = (xi, 0.0f64);
    let mut k = 1;
    while k < n - mid {
        for _ in 0..m {
            let (k1p, k1q) = (q, accel(p));
            let (k2p, k2q) = (q + 0.5 * s * k1q, accel(p + 0.5 * s * k1p));
            let (k3p, k3q) = (q + 0.5 * s * k2q, accel(p + 0.5 * s * k2p));
            let (k4p, k4q) = (q + s * k3q, accel(p + s * k3p));
            p += s / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            q += s / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        }
        if !(p > 0.0) || q > 0.0 {
            return Err(GkdvError::NoSolitaryWave { c });
        }
        right_v.push(p);
        right_d.push(q);
        k += 1;
        let done = match opts.switch_node {
            Some(j) => k >= j,
            None => p <= 0.5 * xi,
        };
        if done {
            break;
        }
    }
    let switch_node = k;

    let slope = |v: f64| -(c + 2.0 * nl.primitive_over_square(v.exp())).max(0.0).sqrt();
    let mut v = p.ln();
    while k < n - mid {
        for _ in 0..m {
            let k1 = slope(v);
            let k2 = slope(v + 0.5 * s * k1);
            let k3 = slope(v + 0.5 * s * k2);
            let k4 = slope(v + s * k3);
            v += s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let p = v.exp();
        right_v.push(p);
        right_d.push(p * slope(v));
        k += 1;
    }

    let mut values = vec![0.0; n];
    let mut derivative = vec![0.0; n];
    for j in 0..n - mid {
        values[mid + j] = right_v[j];
        values[mid - j] = right_v[j];
        derivative[mid + j] = right_d[j];
        derivative[mid - j] = -right_d[j];
    }
    let profile = SolitonProfile { c, amplitude: xi, grid: *grid, values, derivative, switch_node };
    let residual = profile.stationary_residual(nl);
    let tol = opts.residual_tol * c * xi + 2.0 * stencil_truncation(&profile);
    if !(residual <= tol) {
        return Err(GkdvError::ResidualTooLarge { residual, tol });
    }
    Ok(profile)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-15 * whole.abs()) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Position `x >= 0` at which the profile takes the value `level`, from the quadrature
/// `x = int_level^xi du / sqrt(c u^2 + 2F(u))`.
///
/// The crest singularity is removed by `u = xi - s^2`; below `xi/2` the integral is taken in `ln u`.
pub fn implicit_abscissa(nl: &Nonlinearity, c: f64, level: f64) -> Result<f64> {
    let xi = amplitude(nl, c)?;
    if !(level > 0.0 && level <= xi) {
        return Err(GkdvError::InvalidArgument(format!("level {level} outside (0, {xi}]")));
    }
    let potential = |u: f64| (c * u * u + 2.0 * nl.big_f(u)).max(0.0);
    let split = level.max(0.5 * xi);
    let g1 = 2.0 * (c * xi + nl.f(xi));
    let g2 = 2.0 * (c + nl.df(xi));
    let g3 = 2.0 * nl.d2f(xi);
    let g4 = 2.0 * nl.eval(xi, 3).unwrap_or(0.0);
    let crest = |s: f64| {
        let t = s * s;
        if t < 1e-3 * xi {
            let ratio = -g1 + 0.5 * g2 * t - g3 * t * t / 6.0 + g4 * t * t * t / 24.0;
            2.0 / ratio.sqrt()
        } else {
            2.0 * s / potential(xi - t).sqrt()
        }
    };
    let mut x = adaptive_simpson(&crest, 0.0, (xi - split).sqrt(), 1e-13);
    if level < split {
        let tail = |w: f64| 1.0 / (c + 2.0 * nl.primitive_over_square(w.exp())).sqrt();
        x += adaptive_simpson(&tail, level.ln(), split.ln(), 1e-13);
    }
    Ok(x)
}
