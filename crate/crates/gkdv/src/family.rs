//! Conserved functionals along the solitary-wave branch, the momentum curve and critical speeds.

use crate::error::{GkdvError, Result};
use crate::grid::{default_half_length, Grid, DEFAULT_POINTS};
use crate::nonlinearity::Nonlinearity;
use crate::soliton::{build_profile_with, sonic_limit, ProfileOptions, SolitonProfile};
use rayon::prelude::*;
use serde::Serialize;

/// Relative speed step of the finite differences in `c`.
pub const SPEED_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals {
    /// `int (phi'^2/2 + F(phi))`.
    pub energy: f64,
    /// `int phi^2 / 2`.
    pub momentum: f64,
    /// `int phi`.
    pub mass: f64,
}

/// Trapezoid quadrature, spectrally accurate for the decaying integrands.
pub fn functionals(profile: &SolitonProfile, nl: &Nonlinearity) -> Functionals {
    let grid = profile.grid();
    let phi = profile.values();
    let dphi = profile.derivative();
    let dens: Vec<f64> = phi.iter().zip(dphi).map(|(&p, &d)| 0.5 * d * d + nl.big_f(p)).collect();
    Functionals {
        energy: grid.integrate(&dens),
        momentum: 0.5 * grid.inner(phi, phi),
        mass: grid.integrate(phi),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub c: f64,
    pub energy: f64,
    pub momentum: f64,
    pub mass: f64,
    pub de_dc: f64,
    pub dn_dc: f64,
    pub di_dc: f64,
    pub d2n_dc2: f64,
}

impl BranchPoint {
    /// `|E' + c N'| / max(|E'|, c|N'|)`.
    pub fn energy_relation_defect(&self) -> f64 {
        let scale = self.de_dc.abs().max((self.c * self.dn_dc).abs()).max(f64::MIN_POSITIVE);
        (self.de_dc + self.c * self.dn_dc).abs() / scale
    }
}

fn d1_five(f: &[f64; 9], s: usize, d: f64) -> f64 {
    // samples at offsets -4..4 (index 4 is the center); `s` is the stride.
    (f[4 - 2 * s] - 8.0 * f[4 - s] + 8.0 * f[4 + s] - f[4 + 2 * s]) / (12.0 * d * s as f64)
}

fn d2_five(f: &[f64; 9], s: usize, d: f64) -> f64 {
    let ds = d * s as f64;
    (-f[4 - 2 * s] + 16.0 * f[4 - s] - 30.0 * f[4] + 16.0 * f[4 + s] - f[4 + 2 * s]) / (12.0 * ds * ds)
}

fn richardson(fine: f64, coarse: f64) -> f64 {
    (16.0 * fine - coarse) / 15.0
}

/// Branch point on the speed's default grid.
pub fn branch_point(nl: &Nonlinearity, c: f64) -> Result<BranchPoint> {
    branch_point_on(nl, c, &Grid::default_for_speed(c))
}

/// Functionals at `c` and their `c`-derivatives by five-point differences with step
/// `1e-4 c` and one Richardson level, every neighbour built on the same grid.
pub fn branch_point_on(nl: &Nonlinearity, c: f64, grid: &Grid) -> Result<BranchPoint> {
    let center = build_profile_with(nl, c, grid, ProfileOptions::default())?;
    let opts = ProfileOptions { switch_node: Some(center.switch_node()), ..ProfileOptions::default() };
    let d = SPEED_STEP * c;
    let mut e = [0.0; 9];
    let mut n = [0.0; 9];
    let mut m = [0.0; 9];
    for off in [-4i32, -2, -1, 0, 1, 2, 4] {
        let idx = (off + 4) as usize;
        let fun = if off == 0 {
            functionals(&center, nl)
        } else {
            functionals(&build_profile_with(nl, c + off as f64 * d, grid, opts)?, nl)
        };
        e[idx] = fun.energy;
        n[idx] = fun.momentum;
        m[idx] = fun.mass;
    }
    let deriv = |f: &[f64; 9]| richardson(d1_five(f, 1, d), d1_five(f, 2, d));
    Ok(BranchPoint {
        c,
        energy: e[4],
        momentum: n[4],
        mass: m[4],
        de_dc: deriv(&e),
        dn_dc: deriv(&n),
        di_dc: deriv(&m),
        d2n_dc2: richardson(d2_five(&n, 1, d), d2_five(&n, 2, d)),
    })
}

/// A speed of the requested range where no admissible wave exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSpeed {
    pub c: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumCurve {
    pub points: Vec<BranchPoint>,
    pub skipped: Vec<SkippedSpeed>,
}

impl MomentumCurve {
    /// Smallest and largest admissible sampled speeds.
    pub fn admissible_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.c, self.points.last()?.c))
    }
}

/// Chebyshev–Lobatto speeds (clustered at both ends) in `[c_min, c_max]`.
pub fn chebyshev_speeds(c_min: f64, c_max: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![0.5 * (c_min + c_max)];
    }
    let mid = 0.5 * (c_min + c_max);
    let half = 0.5 * (c_max - c_min);
    (0..samples)
        .map(|j| {
            let v = mid - half * (std::f64::consts::PI * j as f64 / (samples - 1) as f64).cos();
            v.clamp(c_min, c_max)
        })
        .collect()
}

/// Branch points at Chebyshev-clustered speeds; inadmissible speeds are listed, not fatal.
pub fn momentum_curve(nl: &Nonlinearity, c_min: f64, c_max: f64, samples: usize) -> Result<MomentumCurve> {
    if !(c_min > 0.0 && c_min < c_max) || samples == 0 {
        return Err(GkdvError::InvalidArgument(format!("bad speed range [{c_min}, {c_max}] x {samples}")));
    }
    let results: Vec<(f64, Result<BranchPoint>)> = chebyshev_speeds(c_min, c_max, samples)
        .into_par_iter()
        .map(|c| (c, branch_point(nl, c)))
        .collect();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (c, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e @ (GkdvError::NoSolitaryWave { .. } | GkdvError::SonicLimit { .. })) => {
                skipped.push(SkippedSpeed { c, reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MomentumCurve { points, skipped })
}

/// Critical speed with its non-degeneracy data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalReport {
    pub c_star: f64,
    pub dn_dc: f64,
    pub d2n_dc2: f64,
    pub di_dc: f64,
    pub momentum: f64,
    pub mass: f64,
    /// `-2 N'' / I'^2`, the slope of the unstable eigenvalue through `c_star`.
    pub lambda_prime: f64,
    pub nondegenerate: bool,
    pub iterations: usize,
    pub grid: Grid,
}

/// Relative tolerance of the root in `c`.
pub const CRITICAL_TOL: f64 = 1e-8;

/// Grid covering the widest wave of the bracket at the resolution of the narrowest.
pub fn bracket_grid(lo: f64, hi: f64) -> Grid {
    let half = default_half_length(lo);
    let h = 2.0 * default_half_length(hi) / (DEFAULT_POINTS - 1) as f64;
    let n = ((2.0 * half / h).ceil() as usize + 1).max(DEFAULT_POINTS);
    Grid::new(half, n).expect("positive extent")
}

/// Brent root of `c -> dN/dc` on `[c_lo, c_hi]`, all evaluations on one [`bracket_grid`].
pub fn critical_speed(nl: &Nonlinearity, bracket: (f64, f64)) -> Result<CriticalReport> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && lo < hi) {
        return Err(GkdvError::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
    }
    let grid = bracket_grid(lo, hi);
    let eval = |c: f64| branch_point_on(nl, c, &grid);
    let pa = eval(lo)?;
    let pb = eval(hi)?;
    if pa.dn_dc.signum() == pb.dn_dc.signum() {
        return Err(GkdvError::NoSignChange { lo, hi });
    }
    let (root, iterations) = brent(|c| eval(c).map(|p| p.dn_dc), (lo, pa.dn_dc), (hi, pb.dn_dc), CRITICAL_TOL)?;
    let p = eval(root)?;
    let n_scale = p.momentum / (root * root);
    let i_scale = p.mass / root;
    let nondegenerate = p.d2n_dc2.abs() > 1e-6 * n_scale && p.di_dc.abs() > 1e-6 * i_scale;
    Ok(CriticalReport {
        c_star: root,
        dn_dc: p.dn_dc,
        d2n_dc2: p.d2n_dc2,
        di_dc: p.di_dc,
        momentum: p.momentum,
        mass: p.mass,
        lambda_prime: -2.0 * p.d2n_dc2 / (p.di_dc * p.di_dc),
        nondegenerate,
        iterations,
        grid,
    })
}

/// Requested and effective critical-speed brackets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketResolution {
    pub requested: (f64, f64),
    pub used: (f64, f64),
    /// Upper end of the admissible speeds, if the branch has a sonic limit.
    pub sonic_speed: Option<f64>,
    pub clamped: bool,
    pub widened: bool,
}

/// Default bracket `[0.1 c1, 0.9 c1]` below the sonic limit `c1`.
pub fn default_bracket(nl: &Nonlinearity) -> Option<(f64, f64)> {
    sonic_limit(nl).map(|s| (0.1 * s.speed, 0.9 * s.speed))
}

/// Clamps `requested` below `0.9 c1` and halves the lower end until `dN/dc` changes sign.
pub fn resolve_bracket(nl: &Nonlinearity, requested: (f64, f64)) -> Result<BracketResolution> {
    let (lo0, hi0) = requested;
    if !(lo0 > 0.0 && lo0 < hi0) {
        return Err(GkdvError::InvalidArgument(format!("bad bracket [{lo0}, {hi0}]")));
    }
    let sonic = sonic_limit(nl).map(|s| s.speed);
    let (mut lo, mut hi) = (lo0, hi0);
    let mut clamped = false;
    if let Some(c1) = sonic {
        if hi > 0.9 * c1 {
            hi = 0.9 * c1;
            clamped = true;
        }
        if lo >= hi {
            lo = 0.1 * c1;
            clamped = true;
        }
    }
    let sign_at = |c: f64, grid: &Grid| branch_point_on(nl, c, grid).map(|p| p.dn_dc.signum());
    let mut widened = false;
    loop {
        let grid = bracket_grid(lo, hi);
        if sign_at(lo, &grid)? != sign_at(hi, &grid)? {
            break;
        }
        if lo < 1e-3 * hi {
            return Err(GkdvError::NoSignChange { lo, hi });
        }
        lo *= 0.5;
        widened = true;
    }
    Ok(BracketResolution { requested, used: (lo, hi), sonic_speed: sonic, clamped, widened })
}

/// Brent's method (inverse quadratic interpolation with bisection safeguard).
pub fn brent<F>(mut f: F, a: (f64, f64), b: (f64, f64), rel_tol: f64) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut fa) = a;
    let (mut b, mut fb) = b;
    if fa == 0.0 {
        return Ok((a, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0));
    }
    if fa.signum() == fb.signum() {
        return Err(GkdvError::NoSignChange { lo: a.min(b), hi: a.max(b) });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs();
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok((b, iter));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(GkdvError::NoConvergence { what: "Brent", iterations: 200, residual: fb.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdv_functionals_closed_form() {
        let nl = Nonlinearity::kdv();
        let p = crate::soliton::build_profile(&nl, 1.0, &Grid::default_for_speed(1.0)).unwrap();
        let f = functionals(&p, &nl);
        assert!((f.mass - 2.0).abs() < 1e-10);
        assert!((f.momentum - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn power_branch_derivatives() {
        // N_c = N_1 c^{(5-p)/(2(p-1))}
        let p = 3.0;
        let nl = Nonlinearity::power(p).unwrap();
        let bp = branch_point(&nl, 1.0).unwrap();
        let a = (5.0 - p) / (2.0 * (p - 1.0));
        assert!((bp.dn_dc - a * bp.momentum).abs() < 1e-7 * bp.momentum);
        assert!((bp.d2n_dc2 - a * (a - 1.0) * bp.momentum).abs() < 1e-5 * bp.momentum);
        assert!(bp.energy_relation_defect() < 1e-6);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let (r, _) = brent(|x| Ok(x * x * x - 2.0), (0.0, -2.0), (2.0, 6.0), 1e-12).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-11);
        assert!(brent(|x| Ok(x * x + 1.0), (0.0, 1.0), (1.0, 2.0), 1e-12).is_err());
    }

    #[test]
    fn chebyshev_speeds_cluster() {
        let s = chebyshev_speeds(1.0, 2.0, 5);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[4], 2.0);
        assert!(s[1] - s[0] < s[2] - s[1]);
    }
}
