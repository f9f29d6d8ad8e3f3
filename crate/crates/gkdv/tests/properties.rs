use gkdv::evolution::{shift_field, PeriodicGrid, Spectral};
use gkdv::io::{fmt_f64, RunConfig};
use gkdv::linearization::essential_spectrum;
use gkdv::reduced::{integrate_reduced, LambdaTable, NormalFormParams, ReducedStep, Remainder};
use gkdv::soliton::{amplitude, build_profile};
use gkdv::{Grid, Nonlinearity};
use proptest::prelude::*;

fn power_amplitude(p: f64, c: f64) -> f64 {
    ((p + 1.0) * c / 2.0).powf(1.0 / (p - 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spec_strings_round_trip(a in 0.1f64..5.0, p in 2.0f64..5.0, b in 0.1f64..5.0, dq in 0.5f64..4.0) {
        let nl = Nonlinearity::minus(a, p, b, p + dq).unwrap();
        let back: Nonlinearity = nl.spec_string().parse().unwrap();
        prop_assert_eq!(back, nl);
    }

    #[test]
    fn power_amplitude_closed_form(p in 2.0f64..7.0, c in 0.2f64..4.0) {
        let nl = Nonlinearity::power(p).unwrap();
        let a = amplitude(&nl, c).unwrap();
        prop_assert!((a - power_amplitude(p, c)).abs() < 1e-10 * a);
    }

    #[test]
    fn profiles_are_even_positive_and_decreasing(p in 2.0f64..6.0, c in 0.3f64..3.0) {
        let nl = Nonlinearity::power(p).unwrap();
        let grid = Grid::default_for_speed(c);
        let prof = build_profile(&nl, c, &grid).unwrap();
        let v = prof.values();
        let mid = grid.center();
        for j in 1..=mid {
            prop_assert_eq!(v[mid + j], v[mid - j]);
            prop_assert!(v[mid + j] > 0.0);
            prop_assert!(v[mid + j] <= v[mid + j - 1]);
        }
        prop_assert!(prof.first_integral_defect(&nl) < 1e-8 * c * prof.amplitude().powi(2));
    }

    #[test]
    fn csv_floats_round_trip(x in proptest::num::f64::NORMAL) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn config_json_round_trips(c in 0.01f64..10.0, zeta0 in 1e-9f64..1e-3, n in 16usize..8192) {
        let mut cfg = RunConfig { speed: Some(c), ..RunConfig::default() };
        cfg.evolution.zeta0 = zeta0;
        cfg.evolution.n_dom = 2 * (n / 2);
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn shifts_compose(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = PeriodicGrid::new(20.0, 256).unwrap();
        let spec = Spectral::new(grid.len());
        let k = grid.wavenumbers();
        let v: Vec<f64> = grid.nodes().iter().map(|x| (-x * x / 4.0).exp()).collect();
        let two = shift_field(&spec, &k, &shift_field(&spec, &k, &v, a), b);
        let one = shift_field(&spec, &k, &v, a + b);
        let err = two.iter().zip(&one).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn weighted_essential_spectrum_is_stable(c in 0.01f64..5.0, frac in 0.01f64..0.99) {
        let mu = frac * c.sqrt();
        for z in essential_spectrum(c, mu, 200) {
            prop_assert!(z.re < 0.0);
        }
    }

    #[test]
    fn truncated_flow_conserves_first_integral(eta0 in 1e-4f64..0.05, zeta0 in 1e-6f64..1e-3) {
        let eta: Vec<f64> = (0..=20).map(|j| 0.1 * j as f64 / 20.0).collect();
        let lambda: Vec<f64> = eta.iter().map(|x| 0.5 * x + x * x).collect();
        let table = LambdaTable::from_samples(1.0, 1.0, eta, lambda).unwrap();
        let traj = integrate_reduced(&table, eta0, zeta0, Remainder::None, 1e6, ReducedStep::default_for(&table)).unwrap();
        let scale = traj.states.iter().fold(0.0f64, |m, s| m.max(s.zeta));
        prop_assert!(traj.first_integral_drift(&table) < 1e-9 * scale);
        prop_assert!(traj.min_eta_rate() > 0.0);
    }

    #[test]
    fn normal_form_closed_form_solves_the_ode(lp in 0.1f64..2.0, e1 in -0.5f64..0.5, x0 in -1.0f64..1.0) {
        let p = NormalFormParams { lambda_prime: lp, e1 };
        let horizon = p.blowup_time(x0).map_or(2.0, |t| (0.5 * t).min(2.0));
        let h = 1e-5 * (1.0 + horizon);
        for j in 1..5 {
            let t = horizon * j as f64 / 5.0;
            if let (Some(a), Some(b)) = (p.exact(x0, t + h), p.exact(x0, t - h)) {
                let mid = p.exact(x0, t).unwrap();
                let deriv = (a - b) / (2.0 * h);
                prop_assert!((deriv - p.rate(mid)).abs() < 1e-5 * (1.0 + p.rate(mid).abs()));
            }
        }
    }
}
