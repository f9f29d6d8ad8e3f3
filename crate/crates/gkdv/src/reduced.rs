//! Two-dimensional modulation system near a critical speed and its saddle-node normal form.
//!
//! Coordinates are oriented: `eta = s (c - c_star)` with `s = sign(lambda')`, so that
//! `lambda(eta) > 0` for `eta > 0` regardless of which side of `c_star` is unstable.

use crate::error::{GkdvError, Result};
use crate::grid::Grid;
use crate::linearization::{build_frame_with, default_mu, FrameOptions};
use crate::nonlinearity::Nonlinearity;
use rayon::prelude::*;
use serde::Serialize;

/// Tabulated `lambda(eta)` on `[0, eta_max]` and its antiderivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaTable {
    pub c_star: f64,
    /// `+1` or `-1`: `c = c_star + orientation * eta`.
    pub orientation: f64,
    pub eta_max: f64,
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `int_0^eta lambda`, exact for the piecewise-linear interpolant.
    pub big_lambda: Vec<f64>,
}

impl LambdaTable {
    /// Builds a table from samples; `eta` must be increasing and start at 0.
    pub fn from_samples(c_star: f64, orientation: f64, eta: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if eta.len() < 2 || eta.len() != lambda.len() || eta[0] != 0.0 || eta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GkdvError::InvalidArgument("lambda table needs increasing samples from 0".into()));
        }
        let mut big = vec![0.0; eta.len()];
        for i in 1..eta.len() {
            big[i] = big[i - 1] + 0.5 * (eta[i] - eta[i - 1]) * (lambda[i] + lambda[i - 1]);
        }
        Ok(LambdaTable { c_star, orientation, eta_max: *eta.last().unwrap_or(&0.0), eta, lambda, big_lambda: big })
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.eta.len();
        if x <= self.eta[0] {
            return 0;
        }
        if x >= self.eta[n - 1] {
            return n - 2;
        }
        match self.eta.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }

    /// Piecewise-linear `lambda`, extended linearly outside the table.
    pub fn lambda_at(&self, x: f64) -> f64 {
        let i = self.locate(x);
        let (x0, x1) = (self.eta[i], self.eta[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.lambda[i] + t * (self.lambda[i + 1] - self.lambda[i])
    }

    /// Exact integral of [`lambda_at`](Self::lambda_at) from 0.
    pub fn big_lambda_at(&self, x: f64) -> f64 {
        let i = self.locate(x);
        let x0 = self.eta[i];
        let slope = (self.lambda[i + 1] - self.lambda[i]) / (self.eta[i + 1] - x0);
        let d = x - x0;
        self.big_lambda[i] + self.lambda[i] * d + 0.5 * slope * d * d
    }

    /// `lambda(eta_1) / eta_1` from the first interval.
    pub fn slope_at_zero(&self) -> f64 {
        (self.lambda[1] - self.lambda[0]) / (self.eta[1] - self.eta[0])
    }

    /// Speed for an oriented offset.
    pub fn speed(&self, eta: f64) -> f64 {
        self.c_star + self.orientation * eta
    }

    /// Worst value of `Lambda(eta) / (eta lambda(eta))` over the table (bounded by 4 in theory).
    pub fn integral_ratio(&self) -> f64 {
        (1..self.eta.len())
            .filter(|&i| self.lambda[i] > 0.0)
            .map(|i| self.big_lambda[i] / (self.eta[i] * self.lambda[i]))
            .fold(0.0, f64::max)
    }
}

/// `lambda(eta)` from frames at `c_star + orientation * eta` for `samples` equispaced offsets.
pub fn build_lambda_table(
    nl: &Nonlinearity,
    c_star: f64,
    orientation: f64,
    eta_max: f64,
    samples: usize,
    grid: &Grid,
) -> Result<LambdaTable> {
    if samples < 2 || !(eta_max > 0.0) || orientation.abs() != 1.0 {
        return Err(GkdvError::InvalidArgument("lambda table needs >= 2 samples, eta_max > 0, orientation +-1".into()));
    }
    let etas: Vec<f64> = (0..samples).map(|j| eta_max * j as f64 / (samples - 1) as f64).collect();
    let lambdas: Vec<f64> = etas
        .par_iter()
        .map(|&eta| {
            let c = c_star + orientation * eta;
            build_frame_with(nl, c, grid, default_mu(c), FrameOptions::default()).map(|f| f.lambda)
        })
        .collect::<Result<_>>()?;
    let mut lambdas = lambdas;
    lambdas[0] = 0.0;
    LambdaTable::from_samples(c_star, orientation, etas, lambdas)
}

/// Remainder terms added to the truncated system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Remainder {
    None,
    /// `R1 = s1 C6 zeta^2`, `R2 = s2 C6 zeta^2` with `s1, s2 = +-1`.
    Bounded { c6: f64, s1: f64, s2: f64 },
}

impl Remainder {
    fn eval(&self, zeta: f64) -> (f64, f64) {
        match *self {
            Remainder::None => (0.0, 0.0),
            Remainder::Bounded { c6, s1, s2 } => (s1 * c6 * zeta * zeta, s2 * c6 * zeta * zeta),
        }
    }

    /// The four sign patterns of a bounded remainder.
    pub fn adversarial(c6: f64) -> [Remainder; 4] {
        [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].map(|(s1, s2)| Remainder::Bounded { c6, s1, s2 })
    }

    pub fn c6(&self) -> f64 {
        match *self {
            Remainder::None => 0.0,
            Remainder::Bounded { c6, .. } => c6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedState {
    pub t: f64,
    pub eta: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedTrajectory {
    pub states: Vec<ReducedState>,
    /// Time at which `eta` reached `eta_max`, if it did before `T`.
    pub escape_time: Option<f64>,
    pub remainder: Remainder,
}

impl ReducedTrajectory {
    pub fn last(&self) -> ReducedState {
        *self.states.last().expect("trajectory has an initial state")
    }

    /// Largest drift of `zeta - Lambda(eta)` from its initial value.
    pub fn first_integral_drift(&self, table: &LambdaTable) -> f64 {
        let s0 = self.states[0];
        let i0 = s0.zeta - table.big_lambda_at(s0.eta);
        self.states.iter().map(|s| (s.zeta - table.big_lambda_at(s.eta) - i0).abs()).fold(0.0, f64::max)
    }

    /// Smallest margin of `zeta < 3 e^{2 C6 eta} Lambda(eta)` (positive when respected),
    /// relative to the barrier.
    pub fn barrier_margin(&self, table: &LambdaTable, c6: f64) -> f64 {
        self.states
            .iter()
            .map(|s| {
                let b = 3.0 * (2.0 * c6 * s.eta).exp() * table.big_lambda_at(s.eta);
                (b - s.zeta) / b.abs().max(f64::MIN_POSITIVE)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest margin of `zeta <= e^{2 C6 (eta - eta0)} (zeta0 + 2 Lambda(eta))`, relative.
    pub fn gronwall_margin(&self, table: &LambdaTable, c6: f64) -> f64 {
        let s0 = self.states[0];
        self.states
            .iter()
            .map(|s| {
                let b = (2.0 * c6 * (s.eta - s0.eta)).exp() * (s0.zeta + 2.0 * table.big_lambda_at(s.eta));
                (b - s.zeta) / b
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `d eta / dt` along the run, from consecutive states.
    pub fn min_eta_rate(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (w[1].eta - w[0].eta) / (w[1].t - w[0].t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Step-size rule for [`integrate_reduced`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedStep {
    /// Upper bound on the time step.
    pub dt_max: f64,
    /// Per-step bound on the change of `eta`, as a fraction of `eta_max`.
    pub eta_fraction: f64,
}

impl ReducedStep {
    /// `dt = 1e-3 / lambda(eta_max)` capped so `eta` moves at most `eta_max / 1000` per step.
    pub fn default_for(table: &LambdaTable) -> Self {
        let lam = table.lambda_at(table.eta_max).abs().max(f64::MIN_POSITIVE);
        ReducedStep { dt_max: 1e-3 / lam, eta_fraction: 1e-3 }
    }
}

fn rhs(table: &LambdaTable, rem: &Remainder, eta: f64, zeta: f64) -> (f64, f64) {
    let (r1, r2) = rem.eval(zeta);
    (zeta + r1, table.lambda_at(eta) * zeta + r2)
}

fn rk4(table: &LambdaTable, rem: &Remainder, s: ReducedState, dt: f64) -> ReducedState {
    let (a1, b1) = rhs(table, rem, s.eta, s.zeta);
    let (a2, b2) = rhs(table, rem, s.eta + 0.5 * dt * a1, s.zeta + 0.5 * dt * b1);
    let (a3, b3) = rhs(table, rem, s.eta + 0.5 * dt * a2, s.zeta + 0.5 * dt * b2);
    let (a4, b4) = rhs(table, rem, s.eta + dt * a3, s.zeta + dt * b3);
    ReducedState {
        t: s.t + dt,
        eta: s.eta + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        zeta: s.zeta + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    }
}

/// RK4 for `eta' = zeta + R1`, `zeta' = lambda(eta) zeta + R2` until `t = horizon`
/// or `eta = eta_max` (located by secant refinement of the last step).
pub fn integrate_reduced(
    table: &LambdaTable,
    eta0: f64,
    zeta0: f64,
    remainder: Remainder,
    horizon: f64,
    step: ReducedStep,
) -> Result<ReducedTrajectory> {
    if !(eta0 > 0.0 && eta0 < table.eta_max) || !(zeta0 > 0.0) {
        return Err(GkdvError::InvalidArgument(format!(
            "need 0 < eta0 < {} and zeta0 > 0 (got {eta0}, {zeta0})",
            table.eta_max
        )));
    }
    let mut s = ReducedState { t: 0.0, eta: eta0, zeta: zeta0 };
    let mut states = vec![s];
    let eta_bound = step.eta_fraction * table.eta_max;
    while s.t < horizon {
        let (rate, _) = rhs(table, &remainder, s.eta, s.zeta);
        let mut dt = step.dt_max.min(horizon - s.t);
        if rate.abs() > 0.0 {
            dt = dt.min(eta_bound / rate.abs());
        }
        if !(dt > 1e-14 * (1.0 + s.t)) {
            return Err(GkdvError::StepSizeUnderflow { t: s.t });
        }
        let next = rk4(table, &remainder, s, dt);
        if !next.eta.is_finite() || !next.zeta.is_finite() {
            return Err(GkdvError::StepSizeUnderflow { t: s.t });
        }
        if next.eta >= table.eta_max {
            let (mut lo, mut hi) = (0.0, dt);
            let (mut flo, mut fhi) = (s.eta - table.eta_max, next.eta - table.eta_max);
            let mut hit = next;
            for _ in 0..60 {
                let tau = if fhi != flo { lo - flo * (hi - lo) / (fhi - flo) } else { 0.5 * (lo + hi) };
                let tau = if tau > lo && tau < hi { tau } else { 0.5 * (lo + hi) };
                hit = rk4(table, &remainder, s, tau);
                let f = hit.eta - table.eta_max;
                if f.abs() <= 1e-14 * table.eta_max {
                    break;
                }
                if f < 0.0 {
                    lo = tau;
                    flo = f;
                } else {
                    hi = tau;
                    fhi = f;
                }
            }
            states.push(hit);
            return Ok(ReducedTrajectory { states, escape_time: Some(hit.t), remainder });
        }
        s = next;
        states.push(s);
    }
    Ok(ReducedTrajectory { states, escape_time: None, remainder })
}

/// `x' = lambda'/2 x^2 + E1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFormParams {
    pub lambda_prime: f64,
    pub e1: f64,
}

impl NormalFormParams {
    pub fn rate(&self, x: f64) -> f64 {
        0.5 * self.lambda_prime * x * x + self.e1
    }

    /// Closed-form solution; `None` past the blow-up time.
    pub fn exact(&self, x0: f64, t: f64) -> Option<f64> {
        let a = 0.5 * self.lambda_prime;
        let e = self.e1;
        if let Some(tb) = self.blowup_time(x0) {
            if t >= tb {
                return None;
            }
        }
        if a == 0.0 {
            return Some(x0 + e * t);
        }
        if e == 0.0 {
            return Some(x0 / (1.0 - a * x0 * t));
        }
        if a * e > 0.0 {
            let r = (e / a).sqrt();
            return Some(r * (a * r * t + (x0 / r).atan()).tan());
        }
        let r = (-e / a).sqrt();
        if x0 == -r {
            return Some(x0);
        }
        let k = (x0 - r) / (x0 + r);
        let g = k * (2.0 * a * r * t).exp();
        Some(r * (1.0 + g) / (1.0 - g))
    }

    /// Finite-time blow-up of the closed form, if any.
    pub fn blowup_time(&self, x0: f64) -> Option<f64> {
        let a = 0.5 * self.lambda_prime;
        let e = self.e1;
        if a == 0.0 {
            return None;
        }
        if e == 0.0 {
            return (a * x0 > 0.0).then(|| 1.0 / (a * x0));
        }
        if a * e > 0.0 {
            let r = (e / a).sqrt();
            let th = (x0 / r).atan();
            let target = if a > 0.0 { std::f64::consts::FRAC_PI_2 } else { -std::f64::consts::FRAC_PI_2 };
            return Some((target - th) / (a * r));
        }
        let r = (-e / a).sqrt();
        let k = (x0 - r) / (x0 + r);
        if k > 0.0 {
            let t = -k.ln() / (2.0 * a * r);
            return (t > 0.0).then_some(t);
        }
        None
    }

    /// Time for `|x|` to grow from `x0` to `bound` when `E1 = 0`: `2 (1/x0 - 1/bound) / lambda'`.
    pub fn escape_time_closed_form(&self, x0: f64, bound: f64) -> f64 {
        2.0 * (1.0 / x0 - 1.0 / bound) / self.lambda_prime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFormSample {
    pub t: f64,
    pub x: f64,
}

/// Fixed-step RK4 for the normal form on `[0, horizon]`.
///
/// Fails with `BlowupDetected` when the closed-form blow-up time lies inside the horizon.
pub fn normal_form_flow(params: NormalFormParams, x0: f64, horizon: f64, dt: f64) -> Result<Vec<NormalFormSample>> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(GkdvError::InvalidArgument("need dt > 0 and horizon >= 0".into()));
    }
    if let Some(tb) = params.blowup_time(x0) {
        if tb <= horizon {
            return Err(GkdvError::BlowupDetected { t_blowup: tb });
        }
    }
    let steps = (horizon / dt).ceil() as usize;
    let h = if steps > 0 { horizon / steps as f64 } else { 0.0 };
    let mut x = x0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(NormalFormSample { t: 0.0, x });
    for k in 1..=steps {
        let k1 = params.rate(x);
        let k2 = params.rate(x + 0.5 * h * k1);
        let k3 = params.rate(x + 0.5 * h * k2);
        let k4 = params.rate(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(NormalFormSample { t: k as f64 * h, x });
    }
    Ok(out)
}

/// Time for the normal-form solution from `x0` to leave `|x| <= bound`, integrated numerically
/// with secant refinement of the crossing.
pub fn normal_form_escape_time(params: NormalFormParams, x0: f64, bound: f64, dt: f64, horizon: f64) -> Option<f64> {
    let mut x = x0;
    let mut t = 0.0;
    let step = |x: f64, h: f64| {
        let k1 = params.rate(x);
        let k2 = params.rate(x + 0.5 * h * k1);
        let k3 = params.rate(x + 0.5 * h * k2);
        let k4 = params.rate(x + h * k3);
        x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    while t < horizon {
        let rate = params.rate(x).abs();
        let h = if rate > 0.0 { dt.min(1e-3 * bound / rate) } else { dt };
        let next = step(x, h);
        if next.abs() >= bound {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if step(x, mid).abs() >= bound {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(t + 0.5 * (lo + hi));
        }
        x = next;
        t += h;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    SemiStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub x: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub points: Vec<FixedPoint>,
}

/// Roots `x = +-sqrt(-2 E1 / lambda')`, stable where `lambda' x < 0`.
pub fn classify_fixed_points(params: NormalFormParams) -> Result<FixedPointReport> {
    let lp = params.lambda_prime;
    let e = params.e1;
    let none = || GkdvError::NoFixedPoints { lambda_prime: lp, e1: e };
    if lp == 0.0 {
        return Err(none());
    }
    if e == 0.0 {
        return Ok(FixedPointReport { points: vec![FixedPoint { x: 0.0, stability: Stability::SemiStable }] });
    }
    let r2 = -2.0 * e / lp;
    if r2 < 0.0 {
        return Err(none());
    }
    let r = r2.sqrt();
    let classify = |x: f64| if lp * x < 0.0 { Stability::Stable } else { Stability::Unstable };
    Ok(FixedPointReport {
        points: vec![FixedPoint { x: -r, stability: classify(-r) }, FixedPoint { x: r, stability: classify(r) }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_table() -> LambdaTable {
        let eta: Vec<f64> = (0..64).map(|j| 0.01 * j as f64 / 63.0).collect();
        let lam = eta.iter().map(|e| 0.5 * e).collect();
        LambdaTable::from_samples(0.1, -1.0, eta, lam).unwrap()
    }

    #[test]
    fn table_integral_is_exact_for_linear_lambda() {
        let t = linear_table();
        for x in [0.0, 0.0013, 0.005, 0.01] {
            assert!((t.big_lambda_at(x) - 0.25 * x * x).abs() < 1e-18);
        }
        assert!((t.slope_at_zero() - 0.5).abs() < 1e-12);
        assert!(t.integral_ratio() <= 4.0);
        assert_eq!(t.speed(0.01), 0.1 - 0.01);
    }

    #[test]
    fn truncated_flow_first_integral() {
        let t = linear_table();
        let traj = integrate_reduced(&t, 1e-3, 1e-7, Remainder::None, 1e6, ReducedStep::default_for(&t)).unwrap();
        assert!(traj.escape_time.is_some());
        assert!(traj.first_integral_drift(&t) < 1e-12);
        assert!((traj.last().eta - t.eta_max).abs() < 1e-14);
    }

    #[test]
    fn normal_form_closed_form_example() {
        let p = NormalFormParams { lambda_prime: 2.0, e1: 0.0 };
        let tr = normal_form_flow(p, 0.1, 5.0, 1e-3).unwrap();
        assert!((tr.last().unwrap().x - 0.2).abs() < 1e-10);
        assert!(matches!(normal_form_flow(p, 0.1, 20.0, 1e-3), Err(GkdvError::BlowupDetected { t_blowup }) if (t_blowup - 10.0).abs() < 1e-12));
    }

    #[test]
    fn normal_form_exact_matches_rk4() {
        for (lp, e) in [(2.0, -0.01), (2.0, 0.01), (-1.0, 0.02), (-1.0, -0.02)] {
            let p = NormalFormParams { lambda_prime: lp, e1: e };
            let tr = normal_form_flow(p, 0.05, 1.0, 1e-3).unwrap();
            let x = p.exact(0.05, 1.0).unwrap();
            assert!((tr.last().unwrap().x - x).abs() < 1e-10, "{lp} {e}");
        }
    }

    #[test]
    fn fixed_points() {
        let r = classify_fixed_points(NormalFormParams { lambda_prime: 2.0, e1: -0.01 }).unwrap();
        assert_eq!(r.points[0].stability, Stability::Stable);
        assert_eq!(r.points[1].stability, Stability::Unstable);
        assert!((r.points[1].x - 0.1).abs() < 1e-15);
        let m = classify_fixed_points(NormalFormParams { lambda_prime: -2.0, e1: 0.01 }).unwrap();
        assert_eq!(m.points[0].stability, Stability::Unstable);
        assert_eq!(m.points[1].stability, Stability::Stable);
        assert!(classify_fixed_points(NormalFormParams { lambda_prime: 2.0, e1: 0.01 }).is_err());
        let s = classify_fixed_points(NormalFormParams { lambda_prime: 2.0, e1: 0.0 }).unwrap();
        assert_eq!(s.points[0].stability, Stability::SemiStable);
    }
}
