//! Subcommand implementations shared by the binary and the tests.

use crate::error::{GkdvError, Result};
use crate::evolution::{EvolutionConfig, PeriodicGrid, SpectralSolver};
use crate::experiment::{instability_experiment, stability_experiment, ExperimentConfig, InstabilityReport};
use crate::family::{critical_speed, default_bracket, functionals, momentum_curve, resolve_bracket, CriticalReport};
use crate::grid::{default_half_length, Grid};
use crate::io::{ArtifactSet, RunConfig, RunManifest};
use crate::linearization::{build_frame_with, default_mu, essential_spectrum_range, ChainMode, FrameOptions};
use crate::nonlinearity::Nonlinearity;
use crate::reduced::{
    build_lambda_table, classify_fixed_points, integrate_reduced, normal_form_flow, NormalFormParams, ReducedStep, Remainder,
};
use crate::soliton::build_profile;
use crate::verify::{run_suite, Suite};
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;

/// Outcome of a subcommand: the manifest and a summary printed to stdout.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub manifest: RunManifest,
    pub summary: serde_json::Value,
    /// `false` when a verification suite reported failing criteria.
    pub success: bool,
    /// Human-readable table printed instead of the summary.
    pub table: Option<String>,
}

fn speed_of(cfg: &RunConfig) -> Result<f64> {
    cfg.speed.ok_or_else(|| GkdvError::Config("a speed is required (--c or \"speed\")".into()))
}

fn grid_for(cfg: &RunConfig, c: f64) -> Result<Grid> {
    match cfg.grid {
        Some(g) => Grid::new(g.half_length, g.n),
        None => Ok(Grid::default_for_speed(c)),
    }
}

fn finish(set: ArtifactSet, cfg: &RunConfig, summary: serde_json::Value, success: bool) -> Result<CommandOutput> {
    let manifest = set.finish(cfg)?;
    Ok(CommandOutput { manifest, summary, success, table: None })
}

pub fn cmd_soliton(cfg: &RunConfig, out: PathBuf) -> Result<CommandOutput> {
    cfg.validate()?;
    let nl = cfg.parse_nonlinearity()?;
    let c = speed_of(cfg)?;
    let grid = grid_for(cfg, c)?;
    let mut set = ArtifactSet::new(out, "soliton")?;
    let profile = set.timed("profile", || build_profile(&nl, c, &grid))?;
    let rows: Vec<Vec<f64>> =
        (0..grid.len()).map(|i| vec![grid.x(i), profile.values()[i], profile.derivative()[i]]).collect();
    set.csv("profile.csv", &["x", "phi", "dphi"], &rows)?;
    let f = functionals(&profile, &nl);
    let (d1, d2) = profile.decay_constants();
    let summary = json!({
        "nonlinearity": nl.spec_string(),
        "c": c,
        "amplitude": profile.amplitude(),
        "half_length": grid.half_length(),
        "n": grid.len(),
        "stationary_residual": profile.stationary_residual(&nl),
        "first_integral_defect": profile.first_integral_defect(&nl),
        "decay_constants": [d1, d2],
        "energy": f.energy,
        "momentum": f.momentum,
        "mass": f.mass,
    });
    set.json("soliton.json", &summary)?;
    finish(set, cfg, summary, true)
}

pub fn cmd_curve(cfg: &RunConfig, out: PathBuf) -> Result<CommandOutput> {
    cfg.validate()?;
    let nl = cfg.parse_nonlinearity()?;
    let (lo, hi) = match cfg.branch {
        Some(r) => r,
        None => default_bracket(&nl).ok_or_else(|| GkdvError::Config("a branch range is required (--range)".into()))?,
    };
    let mut set = ArtifactSet::new(out, "curve")?;
    let curve = set.timed("curve", || momentum_curve(&nl, lo, hi, cfg.samples))?;
    let rows: Vec<Vec<f64>> = curve
        .points
        .iter()
        .map(|p| vec![p.c, p.energy, p.momentum, p.mass, p.dn_dc, p.di_dc, p.d2n_dc2])
        .collect();
    set.csv("curve.csv", &["c", "E", "N", "I", "dNdc", "dIdc", "d2Ndc2"], &rows)?;
    let stable: Vec<bool> = curve.points.iter().map(|p| p.dn_dc > 0.0).collect();
    let summary = json!({
        "nonlinearity": nl.spec_string(),
        "range": [lo, hi],
        "points": curve.points.len(),
        "admissible_range": curve.admissible_range(),
        "stable": stable,
        "skipped": curve.skipped,
    });
    set.json("curve.json", &summary)?;
    finish(set, cfg, summary, true)
}

/// Critical speed with the bracket clamped to the admissible speeds.
pub fn locate_critical(nl: &Nonlinearity, bracket: Option<(f64, f64)>) -> Result<(CriticalReport, serde_json::Value)> {
    let requested = match bracket {
        Some(b) => b,
        None => default_bracket(nl).ok_or(GkdvError::NoSignChange { lo: 0.0, hi: f64::INFINITY })?,
    };
    let res = resolve_bracket(nl, requested)?;
    let report = critical_speed(nl, res.used)?;
    Ok((report, serde_json::to_value(res).expect("bracket serializes")))
}

pub fn cmd_critical(cfg: &RunConfig, out: PathBuf) -> Result<CommandOutput> {
    cfg.validate()?;
    let nl = cfg.parse_nonlinearity()?;
    let mut set = ArtifactSet::new(out, "critical")?;
    let (report, bracket) = set.timed("critical", || locate_critical(&nl, cfg.branch))?;
    let summary = json!({
        "nonlinearity": nl.spec_string(),
        "c_star": report.c_star,
        "N": report.momentum,
        "I": report.mass,
        "dN_dc": report.dn_dc,
        "d2N_dc2": report.d2n_dc2,
        "dI_dc": report.di_dc,
        "lambda_prime": report.lambda_prime,
        "nondegenerate": report.nondegenerate,
        "iterations": report.iterations,
        "grid": {"half_length": report.grid.half_length(), "n": report.grid.len()},
        "bracket": bracket,
    });
    set.json("critical.json", &summary)?;
    finish(set, cfg, summary, true)
}

pub fn cmd_spectrum(cfg: &RunConfig, out: PathBuf, chain: ChainMode) -> Result<CommandOutput> {
    cfg.validate()?;
    let nl = cfg.parse_nonlinearity()?;
    let c = speed_of(cfg)?;
    let grid = grid_for(cfg, c)?;
    let mu = cfg.mu.unwrap_or_else(|| default_mu(c));
    let mut set = ArtifactSet::new(out, "spectrum")?;
    let frame = set.timed("frame", || build_frame_with(&nl, c, &grid, mu, FrameOptions { chain, lambda_guess: None }))?;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            vec![
                grid.x(i),
                frame.profile.values()[i],
                frame.e[0][i],
                frame.e[1][i],
                frame.e[2][i],
                frame.g[0][i],
                frame.g[1][i],
                frame.g[2][i],
            ]
        })
        .collect();
    set.csv("frame.csv", &["x", "phi", "e1", "e2", "e3", "g1", "g2", "g3"], &rows)?;
    let k_max = 4.0 * c.sqrt().max(1.0);
    let mut ess = Vec::new();
    for &(m, tag) in &[(mu, 1.0), (0.0, 0.0)] {
        for (k, z) in essential_spectrum_range(c, m, k_max, 1000) {
            ess.push(vec![tag, m, k, z.re, z.im]);
        }
    }
    set.csv("essential.csv", &["weighted", "mu", "k", "re", "im"], &ess)?;
    let summary = json!({
        "nonlinearity": nl.spec_string(),
        "c": frame.c,
        "mu": frame.mu,
        "lambda": frame.lambda,
        "lambda_bound": frame.lambda_bound,
        "t": frame.t,
        "alpha": frame.alpha,
        "beta": frame.beta,
        "gamma": frame.gamma,
        "dN_dc": frame.n_prime,
        "dI_dc": frame.i_prime,
        "chain": frame.chain,
        "chain_iterations": frame.chain_iterations,
        "residuals": frame.residuals,
        "t_asymmetry": frame.t_asymmetry(),
        "lambda_over_bound": frame.lambda / frame.lambda_bound,
    });
    set.json("frame.json", &summary)?;
    finish(set, cfg, summary, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedOptions {
    pub eta0: Option<f64>,
    pub zeta0: Option<f64>,
    pub horizon: Option<f64>,
    pub table_samples: usize,
}

pub fn cmd_reduced(cfg: &RunConfig, out: PathBuf, opts: ReducedOptions) -> Result<CommandOutput> {
    cfg.validate()?;
    let nl = cfg.parse_nonlinearity()?;
    let mut set = ArtifactSet::new(out, "reduced")?;
    let (report, _) = set.timed("critical", || locate_critical(&nl, cfg.branch))?;
    let c_star = report.c_star;
    let orientation = report.lambda_prime.signum();
    let eta1 = cfg.thresholds.eta1_fraction * c_star;
    let table = set.timed("lambda_table", || {
        build_lambda_table(&nl, c_star, orientation, eta1, opts.table_samples, &report.grid)
    })?;
    let eta0 = opts.eta0.unwrap_or(cfg.evolution.eta0_fraction * c_star);
    let zeta0 = opts.zeta0.unwrap_or(cfg.evolution.zeta0);
    let horizon = opts.horizon.unwrap_or(cfg.evolution.horizon);
    let c6 = cfg.thresholds.c6;
    let step = ReducedStep::default_for(&table);
    let mut runs = Vec::new();
    let variants: Vec<Remainder> =
        std::iter::once(Remainder::None).chain(if c6 > 0.0 { Remainder::adversarial(c6).to_vec() } else { vec![] }).collect();
    for (vi, rem) in variants.iter().enumerate() {
        let traj = set.timed(&format!("reduced_{vi}"), || integrate_reduced(&table, eta0, zeta0, *rem, horizon, step))?;
        let rows: Vec<Vec<f64>> = traj.states.iter().map(|s| vec![s.t, s.eta, s.zeta]).collect();
        let file = format!("reduced_{vi}.csv");
        set.csv(&file, &["t", "eta", "zeta"], &rows)?;
        runs.push(json!({
            "file": file,
            "remainder": rem,
            "escape_time": traj.escape_time,
            "first_integral_drift": traj.first_integral_drift(&table),
            "barrier_margin": traj.barrier_margin(&table, rem.c6()),
            "gronwall_margin": traj.gronwall_margin(&table, rem.c6()),
            "min_eta_rate": traj.min_eta_rate(),
        }));
    }
    let e1 = zeta0 - table.big_lambda_at(eta0);
    let params = NormalFormParams { lambda_prime: report.lambda_prime.abs(), e1 };
    let fixed = classify_fixed_points(params).ok();
    let flow_horizon = params.blowup_time(eta0).map_or(horizon, |t| (0.95 * t).min(horizon));
    let flow = normal_form_flow(params, eta0, flow_horizon, step.dt_max.min(flow_horizon / 1000.0))?;
    let rows: Vec<Vec<f64>> = flow.iter().map(|s| vec![s.t, s.x]).collect();
    set.csv("normal_form.csv", &["t", "x"], &rows)?;
    let summary = json!({
        "nonlinearity": nl.spec_string(),
        "c_star": c_star,
        "orientation": orientation,
        "eta1": eta1,
        "eta0": eta0,
        "zeta0": zeta0,
        "lambda_table": table,
        "normal_form": params,
        "fixed_points": fixed,
        "blowup_time": params.blowup_time(eta0),
        "runs": runs,
    });
    set.json("reduced.json", &summary)?;
    finish(set, cfg, summary, true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EvolveMode {
    /// Evolve the soliton at `speed` in the lab frame.
    Soliton { snapshots: Vec<f64> },
    /// Critical-soliton instability run, optionally followed by a stable reference run.
    Critical { stable_reference: Option<(String, f64)> },
}

fn track_rows(report: &InstabilityReport) -> Vec<Vec<f64>> {
    report
        .track
        .samples
        .iter()
        .map(|s| vec![s.t, s.xi, s.eta, s.zeta, s.ups_l2mu, s.ups_h1mu, s.orbdist, s.energy, s.momentum, s.mass, s.orbdist_mu])
        .collect()
}

pub const TRACK_HEADER: [&str; 11] = ["t", "xi", "eta", "zeta", "ups_L2mu", "ups_H1mu", "orbdist", "E", "N", "I", "orbdist_mu"];

pub fn experiment_config(cfg: &RunConfig, c_star: f64) -> ExperimentConfig {
    let e = &cfg.evolution;
    let mut x = ExperimentConfig::for_critical(c_star, e.zeta0, e.horizon);
    x.eta0 = e.eta0_fraction * c_star;
    x.eta1 = cfg.thresholds.eta1_fraction * c_star;
    x.mu = cfg.mu.unwrap_or(0.3 * c_star.sqrt());
    x.domain_factor = e.domain_factor;
    x.n_dom = e.n_dom;
    x.dt = e.dt;
    x.sample_dt = e.sample_dt.max(e.dt);
    if !e.sponge {
        x.sponge = None;
    }
    x
}

pub fn cmd_evolve(cfg: &RunConfig, out: PathBuf, mode: EvolveMode) -> Result<CommandOutput> {
    cfg.validate()?;
    let nl = cfg.parse_nonlinearity()?;
    let mut set = ArtifactSet::new(out, "evolve")?;
    match mode {
        EvolveMode::Soliton { snapshots } => {
            let c = speed_of(cfg)?;
            let e = &cfg.evolution;
            let grid = PeriodicGrid::new(e.domain_factor * default_half_length(c), e.n_dom)?;
            let fine = grid.closed();
            let profile = build_profile(&nl, c, &fine)?;
            let u0 = grid.restrict(profile.values());
            let ecfg = EvolutionConfig { dt: e.dt, frame_speed: 0.0, seam_floor: Some(1e-3 * profile.amplitude()), sponge: None };
            let mut solver = SpectralSolver::new(&nl, grid, ecfg)?;
            let state = solver.state(u0, 0.0);
            let mut times: Vec<f64> = snapshots.iter().copied().filter(|t| *t > 0.0 && *t < e.horizon).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            let mut ledger_rows = vec![vec![0.0, state.ledger.energy, state.ledger.momentum, state.ledger.mass]];
            let mut snaps = vec![(0.0, state.values.clone())];
            let sample = e.sample_dt.max(e.dt);
            let start = state.ledger;
            let mut current = state;
            for (j, &t_next) in times.iter().chain(std::iter::once(&e.horizon)).enumerate() {
                let span = t_next - current.t;
                current = set.timed(&format!("evolve_{j}"), || {
                    solver.run(&current, span, sample, |st| {
                        ledger_rows.push(vec![st.t, st.ledger.energy, st.ledger.momentum, st.ledger.mass]);
                        Ok(true)
                    })
                })?;
                if j < times.len() {
                    snaps.push((current.t, current.values.clone()));
                }
            }
            let fin = current;
            set.csv("ledger.csv", &["t", "E", "N", "I"], &ledger_rows)?;
            for (i, (_, v)) in snaps.iter().enumerate() {
                let rows: Vec<Vec<f64>> = v.iter().enumerate().map(|(j, u)| vec![grid.x(j), *u]).collect();
                set.csv(&format!("snapshot_{i:03}.csv"), &["x", "u"], &rows)?;
            }
            let drift = fin.ledger.max_relative_drift(&start);
            let summary = json!({
                "nonlinearity": nl.spec_string(),
                "c": c,
                "t_final": fin.t,
                "max_relative_drift": drift,
                "snapshot_times": snaps.iter().map(|s| s.0).collect::<Vec<_>>(),
            });
            set.json("evolve.json", &summary)?;
            finish(set, cfg, summary, true)
        }
        EvolveMode::Critical { stable_reference } => {
            let (report, _) = set.timed("critical", || locate_critical(&nl, cfg.branch))?;
            let orientation = report.lambda_prime.signum();
            let xcfg = experiment_config(cfg, report.c_star);
            let run = set.timed("instability", || instability_experiment(&nl, report.c_star, orientation, xcfg))?;
            set.csv("track.csv", &TRACK_HEADER, &track_rows(&run))?;
            set.json("verdict.json", &run.verdict)?;
            let grid = xcfg.grid(report.c_star)?;
            let snap: Vec<Vec<f64>> = run.final_state.values.iter().enumerate().map(|(j, u)| vec![grid.x(j) + run.final_state.offset, *u]).collect();
            set.csv("snapshot_final.csv", &["x", "u"], &snap)?;
            let mut summary = json!({
                "nonlinearity": nl.spec_string(),
                "c_star": report.c_star,
                "orientation": orientation,
                "config": xcfg,
                "verdict": run.verdict,
            });
            if let Some((spec, c_ref)) = stable_reference {
                let snl: Nonlinearity = spec.parse()?;
                let mut scfg = xcfg;
                scfg.eta0 = cfg.evolution.eta0_fraction * c_ref;
                scfg.mu = 0.3 * c_ref.sqrt();
                scfg.horizon = run.track.samples.last().map_or(xcfg.horizon, |s| s.t);
                let stable = set.timed("stable", || stability_experiment(&snl, c_ref, scfg))?;
                let rows: Vec<Vec<f64>> = stable.samples.iter().map(|s| vec![s.t, s.orbdist, s.orbdist_mu]).collect();
                set.csv("stable.csv", &["t", "orbdist", "orbdist_mu"], &rows)?;
                let sj = json!({
                    "nonlinearity": snl.spec_string(),
                    "c_ref": c_ref,
                    "horizon": scfg.horizon,
                    "initial_orbdist": stable.initial_orbdist,
                    "max_orbdist": stable.max_orbdist,
                    "growth": stable.growth,
                    "initial_orbdist_mu": stable.initial_orbdist_mu,
                    "max_orbdist_mu": stable.max_orbdist_mu,
                    "growth_mu": stable.growth_mu,
                });
                set.json("stable.json", &sj)?;
                summary["stable"] = sj;
            }
            finish(set, cfg, summary, true)
        }
    }
}

pub fn cmd_verify(cfg: &RunConfig, out: PathBuf, suite: Suite) -> Result<CommandOutput> {
    let mut set = ArtifactSet::new(out, "verify")?;
    let results = set.timed("suite", || Ok(run_suite(suite)))?;
    let all = results.iter().all(|r| r.pass);
    let summary = json!({ "suite": suite, "all_pass": all, "criteria": results });
    set.json("verify.json", &summary)?;
    let table: String = results.iter().map(|r| format!("{r}\n")).collect();
    let mut output = finish(set, cfg, summary, all)?;
    output.table = Some(table);
    Ok(output)
}
