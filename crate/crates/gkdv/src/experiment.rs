//! Direct numerical experiments: a perturbed critical soliton tracked through its
//! modulation coordinates, and the same protocol on a stable branch point.

use crate::error::{GkdvError, Result};
use crate::evolution::{EvolutionConfig, FieldState, PeriodicGrid, SpectralSolver, Sponge};
use crate::grid::{default_half_length, Grid};
use crate::linearization::{build_frame_with, ChainMode, FrameOptions};
use crate::modulation::{
    build_frame_table, orbital_distance_with, weighted_orbital_distance, ExtractOptions, FrameTable, TableOptions, Windows,
};
use crate::nonlinearity::Nonlinearity;
use crate::reduced::{integrate_reduced, LambdaTable, ReducedStep, Remainder};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Initial oriented offset from the critical speed.
    pub eta0: f64,
    /// Initial Jordan-mode amplitude.
    pub zeta0: f64,
    /// Tube radius in `eta`.
    pub eta1: f64,
    pub mu: f64,
    /// `L_dom / L_profile`.
    pub domain_factor: f64,
    pub n_dom: usize,
    pub dt: f64,
    pub horizon: f64,
    pub sample_dt: f64,
    /// Run continues after the escape until `eta` reaches this multiple of `eta1`.
    pub overshoot: f64,
    pub sponge: Option<Sponge>,
    pub extract: ExtractOptions,
    pub windows: Windows,
}

impl ExperimentConfig {
    /// `eta0 = 1e-3 c*`, `eta1 = 0.05 c*`, `mu = 0.3 sqrt(c*)`.
    pub fn for_critical(c_star: f64, zeta0: f64, horizon: f64) -> Self {
        ExperimentConfig {
            eta0: 1e-3 * c_star,
            zeta0,
            eta1: 0.05 * c_star,
            mu: 0.3 * c_star.sqrt(),
            domain_factor: 4.0,
            n_dom: 4096,
            dt: 0.1,
            horizon,
            sample_dt: 0.1,
            overshoot: 1.25,
            sponge: Some(Sponge { strength: 0.05, width: 0.1 }),
            extract: ExtractOptions::default(),
            windows: Windows::default(),
        }
    }

    pub fn grid(&self, c: f64) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.domain_factor * default_half_length(c), self.n_dom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSample {
    pub t: f64,
    /// Phase relative to `int_0^t c`.
    pub xi: f64,
    /// Soliton position in the lab frame.
    pub position: f64,
    pub eta: f64,
    pub zeta: f64,
    pub ups_l2mu: f64,
    pub ups_h1mu: f64,
    pub orbdist: f64,
    /// Orbital distance in `H^1(min(1, e^{mu x}) dx)`, re-centred on the soliton.
    pub orbdist_mu: f64,
    pub energy: f64,
    pub momentum: f64,
    pub mass: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EscapeKind {
    /// `eta` crossed `eta1`.
    Threshold,
    /// The modulation solve failed before the threshold.
    TubeExit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub monotone: bool,
    /// Largest decrease of `eta` between consecutive samples before the escape.
    pub max_eta_decrease: f64,
    pub t_escape: Option<f64>,
    pub escape_kind: Option<EscapeKind>,
    #[serde(rename = "E1_fit")]
    pub e1_fit: f64,
    pub lambda_prime_fit: f64,
    pub normal_form_rel_err: f64,
    pub kappa_fit: f64,
    /// Distances of the tabulated profiles to the critical one increase with `eta`.
    pub kappa_monotone: bool,
    pub epsilon: f64,
    pub initial_orbdist_mu: f64,
    pub max_orbdist_mu: f64,
    pub max_orbdist: f64,
    pub exceeds_epsilon: bool,
    pub zeta_monotone: bool,
    #[serde(rename = "C6_fit")]
    pub c6_fit: f64,
    /// `max ||upsilon||_{L2_mu} / zeta`.
    pub residual_ratio: f64,
    pub reduced_t_escape: Option<f64>,
    pub escape_time_rel_err: Option<f64>,
    pub tube_exit_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulationTrack {
    pub c_star: f64,
    pub orientation: f64,
    pub config: ExperimentConfig,
    pub samples: Vec<TrackSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstabilityReport {
    pub track: ModulationTrack,
    pub verdict: Verdict,
    #[serde(skip)]
    pub final_state: FieldState,
}

fn mono_tolerance(eta1: f64) -> f64 {
    1e-6 * eta1
}

/// Linear least squares `y = a + b x` returning `(a, b, ||residual|| / ||y||)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let (a, b) = if det.abs() > 0.0 { ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det) } else { (sy / n, 0.0) };
    let res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let norm: f64 = y.iter().map(|v| v * v).sum();
    (a, b, (res / norm.max(f64::MIN_POSITIVE)).sqrt())
}

/// Weighted orbital distances of the tabulated profiles to the critical one: `(eta, d)` for `0 < eta <= eta1`.
pub fn profile_distances(table: &FrameTable, eta1: f64) -> Vec<(f64, f64)> {
    let grid = *table.grid();
    let center = &table.nodes[table.center_node()].phi;
    let search = 0.25 / table.c_star.sqrt();
    table
        .nodes
        .iter()
        .filter(|n| n.eta > 0.0 && n.eta <= eta1 * (1.0 + 1e-12))
        .map(|n| {
            let d = weighted_orbital_distance(&grid, table.spectral(), table.wavenumbers(), &n.phi, center, table.mu, search);
            (n.eta, d.distance)
        })
        .collect()
}

/// Least-squares slope through the origin.
pub fn kappa_fit(points: &[(f64, f64)]) -> f64 {
    let num: f64 = points.iter().map(|(e, d)| e * d).sum();
    let den: f64 = points.iter().map(|(e, _)| e * e).sum();
    num / den
}

/// `lambda(eta)` on `[0, eta1]` from the table nodes.
pub fn lambda_table(table: &FrameTable, eta1: f64) -> Result<LambdaTable> {
    let sel: Vec<_> = table.nodes.iter().filter(|n| n.eta >= 0.0 && n.eta <= eta1 * (1.0 + 1e-12)).collect();
    let eta: Vec<f64> = sel.iter().map(|n| if n.eta.abs() < 1e-15 { 0.0 } else { n.eta }).collect();
    let mut lambda: Vec<f64> = sel.iter().map(|n| n.lambda).collect();
    lambda[0] = 0.0;
    LambdaTable::from_samples(table.c_star, table.orientation, eta, lambda)
}

/// Evolves `phi_{c(eta0)} + s zeta0 e3` in the frame moving at `c*` and tracks the modulation.
/// `s` is the table orientation; tracked `zeta` is reported oriented, so `eta' = zeta` at leading order.
pub fn instability_experiment(
    nl: &Nonlinearity,
    c_star: f64,
    orientation: f64,
    cfg: ExperimentConfig,
) -> Result<InstabilityReport> {
    if !(cfg.eta0 > 0.0 && cfg.zeta0 > 0.0 && cfg.eta0 < cfg.eta1) {
        return Err(GkdvError::InvalidArgument("need 0 < eta0 < eta1 and zeta0 > 0".into()));
    }
    let grid = cfg.grid(c_star)?;
    let mut topts = TableOptions::for_tube(cfg.eta1, cfg.mu);
    topts.windows = cfg.windows;
    let table = build_frame_table(nl, c_star, orientation, grid, topts)?;
    run_with_table(nl, &table, cfg)
}

pub fn run_with_table(nl: &Nonlinearity, table: &FrameTable, cfg: ExperimentConfig) -> Result<InstabilityReport> {
    let grid = *table.grid();
    let c_star = table.c_star;
    let sign = table.orientation;
    let u0 = table.ansatz(cfg.eta0, sign * cfg.zeta0)?;
    let reference = table.nodes[table.center_node()].phi.clone();
    let ecfg = EvolutionConfig { dt: cfg.dt, frame_speed: c_star, seam_floor: None, sponge: cfg.sponge };
    let mut solver = SpectralSolver::new(nl, grid, ecfg)?;
    let spec = solver.spectral().clone();
    let k = solver.wavenumbers().to_vec();
    let search = 0.25 / c_star.sqrt();
    let state0 = solver.state(u0, 0.0);

    let mut samples: Vec<TrackSample> = Vec::new();
    let mut guess = (0.0, cfg.eta0, sign * cfg.zeta0);
    let mut phase_integral = 0.0;
    let mut tube_exit: Option<(f64, String)> = None;
    let mut record = |st: &FieldState, samples: &mut Vec<TrackSample>| -> Result<bool> {
        let m = match table.extract(&st.values, guess, cfg.extract) {
            Ok(m) => m,
            Err(e @ (GkdvError::NewtonDiverged { .. } | GkdvError::NoConvergence { .. } | GkdvError::SingularT { .. })) => {
                let e = match e {
                    GkdvError::NewtonDiverged { residual, .. } => GkdvError::NewtonDiverged { t: st.t, residual },
                    other => other,
                };
                tube_exit = Some((st.t, e.to_string()));
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        guess = (m.xi, m.eta, m.zeta);
        let (l2, h1) = table.weighted_norms(&m.upsilon);
        let od = orbital_distance_with(&grid, &spec, &k, &st.values, &reference);
        let odm = weighted_orbital_distance(&grid, &spec, &k, &st.values, &reference, cfg.mu, search);
        let c = table.speed(m.eta);
        if let Some(prev) = samples.last() {
            let cp = table.speed(prev.eta);
            phase_integral += 0.5 * (st.t - prev.t) * (c + cp);
        }
        let position = st.offset + m.xi;
        samples.push(TrackSample {
            t: st.t,
            xi: position - phase_integral,
            position,
            eta: m.eta,
            zeta: sign * m.zeta,
            ups_l2mu: l2,
            ups_h1mu: h1,
            orbdist: od.distance,
            orbdist_mu: odm.distance,
            energy: st.ledger.energy,
            momentum: st.ledger.momentum,
            mass: st.ledger.mass,
            newton_iterations: m.iterations,
        });
        Ok(m.eta < cfg.overshoot * cfg.eta1)
    };
    if record(&state0, &mut samples)? {
        let final_state = solver.run(&state0, cfg.horizon, cfg.sample_dt, |st| record(st, &mut samples))?;
        let verdict = verdict(table, &cfg, &samples, tube_exit)?;
        let track = ModulationTrack { c_star, orientation: table.orientation, config: cfg, samples };
        return Ok(InstabilityReport { track, verdict, final_state });
    }
    Err(GkdvError::NewtonDiverged { t: 0.0, residual: f64::NAN })
}

fn verdict(table: &FrameTable, cfg: &ExperimentConfig, samples: &[TrackSample], tube_exit: Option<(f64, String)>) -> Result<Verdict> {
    let eta1 = cfg.eta1;
    let cross = samples.iter().position(|s| s.eta >= eta1);
    let (t_escape, kind, upto) = match cross {
        Some(0) => (Some(0.0), Some(EscapeKind::Threshold), 1),
        Some(i) => {
            let (a, b) = (&samples[i - 1], &samples[i]);
            let t = a.t + (eta1 - a.eta) / (b.eta - a.eta) * (b.t - a.t);
            (Some(t), Some(EscapeKind::Threshold), i + 1)
        }
        None => match &tube_exit {
            Some((t, _)) => (Some(*t), Some(EscapeKind::TubeExit), samples.len()),
            None => (None, None, samples.len()),
        },
    };
    let window = &samples[..upto];
    let max_dec = window.windows(2).map(|w| w[0].eta - w[1].eta).fold(0.0, f64::max);
    let monotone = max_dec <= mono_tolerance(eta1);
    let zeta_monotone = window.windows(2).all(|w| w[1].zeta >= w[0].zeta * (1.0 - 1e-9));

    let mut x2 = Vec::new();
    let mut cdot = Vec::new();
    let mut c6: f64 = 0.0;
    for i in 1..window.len().saturating_sub(1) {
        let (a, b) = (&window[i - 1], &window[i + 1]);
        let eta_dot = (b.eta - a.eta) / (b.t - a.t);
        let s = &window[i];
        x2.push(0.5 * s.eta * s.eta);
        cdot.push(table.orientation * eta_dot);
        if s.zeta > 0.0 {
            c6 = c6.max((eta_dot - s.zeta).abs() / (s.zeta * s.zeta));
        }
    }
    let (e1_fit, lambda_prime_fit, normal_form_rel_err) = if cdot.len() >= 3 { fit_line(&x2, &cdot) } else { (f64::NAN, f64::NAN, f64::NAN) };

    let dists = profile_distances(table, eta1);
    let kappa = kappa_fit(&dists);
    let kappa_monotone = dists.windows(2).all(|w| w[1].1 > w[0].1);
    let epsilon = eta1 * kappa / 2.0;
    let max_mu = samples.iter().map(|s| s.orbdist_mu).fold(0.0, f64::max);
    let max_h1 = samples.iter().map(|s| s.orbdist).fold(0.0, f64::max);
    let residual_ratio = window.iter().filter(|s| s.zeta > 0.0).map(|s| s.ups_l2mu / s.zeta).fold(0.0, f64::max);

    let first = samples[0];
    let (reduced_t, rel) = if first.eta > 0.0 && first.eta < eta1 && first.zeta > 0.0 {
        let lt = lambda_table(table, eta1)?;
        let horizon = 10.0 * t_escape.unwrap_or(cfg.horizon).max(cfg.horizon);
        let traj = integrate_reduced(&lt, first.eta, first.zeta, Remainder::None, horizon, ReducedStep::default_for(&lt))?;
        let rel = match (traj.escape_time, t_escape) {
            (Some(a), Some(b)) if b > 0.0 => Some((a - b).abs() / b),
            _ => None,
        };
        (traj.escape_time, rel)
    } else {
        (None, None)
    };

    Ok(Verdict {
        monotone,
        max_eta_decrease: max_dec,
        t_escape,
        escape_kind: kind,
        e1_fit,
        lambda_prime_fit,
        normal_form_rel_err,
        kappa_fit: kappa,
        kappa_monotone,
        epsilon,
        initial_orbdist_mu: first.orbdist_mu,
        max_orbdist_mu: max_mu,
        max_orbdist: max_h1,
        exceeds_epsilon: max_mu > epsilon,
        zeta_monotone,
        c6_fit: c6,
        residual_ratio,
        reduced_t_escape: reduced_t,
        escape_time_rel_err: rel,
        tube_exit_error: tube_exit.map(|(_, e)| e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableSample {
    pub t: f64,
    pub orbdist: f64,
    pub orbdist_mu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub c_ref: f64,
    pub samples: Vec<StableSample>,
    pub initial_orbdist: f64,
    pub max_orbdist: f64,
    pub initial_orbdist_mu: f64,
    pub max_orbdist_mu: f64,
    /// `max / initial` for the unweighted and weighted distances.
    pub growth: f64,
    pub growth_mu: f64,
}

/// Evolves `phi_{c+eta0} + zeta0 e3_{c+eta0}` on a stable branch and records the orbital
/// distance to `phi_c`. `e3` is the static chain vector (`H e3 = Theta`).
pub fn stability_experiment(nl: &Nonlinearity, c_ref: f64, cfg: ExperimentConfig) -> Result<StabilityReport> {
    let grid = cfg.grid(c_ref)?;
    let n = grid.len();
    let stride = (grid.spacing() / 0.06).ceil().max(1.0) as usize;
    let fine = Grid::new(grid.half_length(), stride * n + 1)?;
    let c = c_ref + cfg.eta0;
    let mu = cfg.mu.min(0.5 * c_ref.sqrt());
    let frame = build_frame_with(nl, c, &fine, mu, FrameOptions { chain: ChainMode::Static, lambda_guess: None })?;
    let reference_profile = crate::soliton::build_profile(nl, c_ref, &fine)?;
    let sample = |v: &[f64]| -> Vec<f64> { (0..n).map(|j| v[j * stride]).collect() };
    let l = grid.half_length();
    let e3: Vec<f64> = sample(&frame.e[2]).iter().enumerate().map(|(j, v)| v * cfg.windows.left_at(grid.x(j), l)).collect();
    let u0: Vec<f64> = sample(frame.profile.values()).iter().zip(&e3).map(|(p, e)| p + cfg.zeta0 * e).collect();
    let reference = sample(reference_profile.values());
    let ecfg = EvolutionConfig { dt: cfg.dt, frame_speed: c, seam_floor: None, sponge: cfg.sponge };
    let mut solver = SpectralSolver::new(nl, grid, ecfg)?;
    let spec = solver.spectral().clone();
    let k = solver.wavenumbers().to_vec();
    let search = 0.25 / c_ref.sqrt();
    let mut samples = Vec::new();
    let record = |st: &FieldState, samples: &mut Vec<StableSample>| {
        let od = orbital_distance_with(&grid, &spec, &k, &st.values, &reference);
        let odm = weighted_orbital_distance(&grid, &spec, &k, &st.values, &reference, mu, search);
        samples.push(StableSample { t: st.t, orbdist: od.distance, orbdist_mu: odm.distance });
    };
    let state0 = solver.state(u0, 0.0);
    record(&state0, &mut samples);
    solver.run(&state0, cfg.horizon, cfg.sample_dt.max(cfg.horizon / 2000.0), |st| {
        record(st, &mut samples);
        Ok(true)
    })?;
    let init = samples[0];
    let max_h1 = samples.iter().map(|s| s.orbdist).fold(0.0, f64::max);
    let max_mu = samples.iter().map(|s| s.orbdist_mu).fold(0.0, f64::max);
    Ok(StabilityReport {
        c_ref,
        initial_orbdist: init.orbdist,
        max_orbdist: max_h1,
        initial_orbdist_mu: init.orbdist_mu,
        max_orbdist_mu: max_mu,
        growth: max_h1 / init.orbdist,
        growth_mu: max_mu / init.orbdist_mu,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, r) = fit_line(&x, &y);
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn kappa_of_linear_points() {
        assert!((kappa_fit(&[(1.0, 3.0), (2.0, 6.0)]) - 3.0).abs() < 1e-15);
    }
}
