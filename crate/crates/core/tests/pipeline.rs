use std::f64::consts::PI;

use nalgebra::DVector;

use microgrid_dse::decision::DecisionKind;
use microgrid_dse::estimator::{wls_solve, SolverOptions};
use microgrid_dse::hypothesis::Verdict;
use microgrid_dse::measurement::{build_measurement_model, ChannelDef, ChannelKind, Quantity};
use microgrid_dse::model::{NodePhase, PerUnitBases, Phase, ProtectionZone};
use microgrid_dse::scenario::{self, builtin, DeviceSpec, NetworkConfig, ScenarioConfig};
use microgrid_dse::sim::{simulate, EventSchedule, InitialCondition, SimOptions};

fn quiet(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.noise_sigma = 0.0;
    cfg
}

#[test]
fn noise_free_windows_fit_the_model_exactly() {
    let cfg = quiet(builtin::scenario("exact", "", vec![], 0.05));
    let (net, model, sim) = scenario::prepare(&cfg).unwrap();
    let m = model.m() as f64;
    let mut worst_virtual: f64 = 0.0;
    let mut x = DVector::zeros(model.window_state_count());
    for k in 1..sim.len() {
        let z = model.select(&scenario::window_measurements(&model, &net, &sim, k).unwrap());
        let truth = model.window_state(&sim.states[k - 1], &sim.states[k]);
        let r = model.eval_h(&truth).unwrap() - &z;
        for (i, row) in model.enabled_rows().iter().enumerate() {
            if model.row_channel(*row).kind.is_virtual() {
                worst_virtual = worst_virtual.max(r[i].abs());
            }
        }
        let est = wls_solve(&model, &z, &x, SolverOptions::default()).unwrap();
        assert!(est.zeta < 1e-6 * m, "window {k}: zeta {}", est.zeta);
        x = est.x;
    }
    assert!(worst_virtual < 1e-9, "{worst_virtual}");
}

#[test]
fn steady_state_start_is_periodic() {
    let cfg = quiet(builtin::scenario("periodic", "", vec![], 0.05));
    let (_, _, sim) = scenario::prepare(&cfg).unwrap();
    let cycle = 80;
    for k in 0..2 * cycle {
        let d = (&sim.states[k] - &sim.states[k + cycle]).amax();
        assert!(d < 1e-9, "sample {k}: {d}");
    }
}

#[test]
fn rl_energization_matches_closed_form() {
    // X = 1 pu keeps tau well above the sample period
    let w = 2.0 * PI * 60.0;
    let (r, l, phi) = (0.1, 1.0 / w, 0.3);
    let network = NetworkConfig {
        frequency_hz: 60.0,
        bases: PerUnitBases::default(),
        devices: vec![
            DeviceSpec::Source {
                name: "src".into(),
                node: NodePhase::new("a", Phase::A),
                amplitude: 1.0,
                phase_angle: phi,
            },
            DeviceSpec::Load {
                name: "rl".into(),
                node: NodePhase::new("a", Phase::A),
                r,
                l,
            },
        ],
        zones: vec![ProtectionZone::new(
            "z",
            vec!["src".into(), "rl".into()],
            vec!["mu".into()],
        )],
        breakers: vec![],
    }
    .build()
    .unwrap();
    let chans = vec![ChannelDef::new(
        "i",
        "mu",
        ChannelKind::ActualCurrent,
        Quantity::Current("rl".into()),
    )];
    let sim = simulate(
        &network,
        &chans,
        &EventSchedule::new(vec![]),
        SimOptions {
            duration: 0.05,
            noise_sigma: 0.0,
            seed: 1,
            initial: InitialCondition::DeEnergized,
        },
    )
    .unwrap();
    let z = (r * r + (w * l).powi(2)).sqrt();
    let th = (w * l / r).atan();
    let exact = |t: f64| (1.0 / z) * ((w * t + phi - th).cos() - (phi - th).cos() * (-r * t / l).exp());
    let mut worst: f64 = 0.0;
    for (k, t) in sim.times.iter().enumerate() {
        worst = worst.max((sim.clean[k][0] - exact(*t)).abs());
    }
    assert!(worst < 1e-3 / z, "max error {worst} vs peak {}", 1.0 / z);
}

#[test]
fn matched_noise_calibrates_chi_square() {
    let sigma = 0.002;
    let mut cfg = builtin::scenario("calib", "", vec![], 0.3);
    cfg.noise_sigma = sigma;
    for c in cfg.channels.iter_mut() {
        c.sigma = Some(sigma);
    }
    let (net, model, sim) = scenario::prepare(&cfg).unwrap();
    let mut sum = 0.0;
    let mut n = 0;
    let mut x = DVector::zeros(model.window_state_count());
    for k in 1..sim.len() {
        let z = model.select(&scenario::window_measurements(&model, &net, &sim, k).unwrap());
        let est = wls_solve(&model, &z, &x, SolverOptions::default()).unwrap();
        sum += est.zeta;
        n += 1;
        x = est.x;
    }
    assert!(n >= 1000);
    let mean = sum / n as f64;
    let nu = model.nu() as f64;
    assert!((mean - nu).abs() < 0.1 * nu, "mean zeta {mean}, nu {nu}");
}

#[test]
fn noise_has_the_configured_spread() {
    let mut cfg = builtin::scenario("noise", "", vec![], 0.2);
    cfg.noise_sigma = 0.003;
    let (_, _, sim) = scenario::prepare(&cfg).unwrap();
    let e: Vec<f64> = sim
        .measured
        .iter()
        .zip(&sim.clean)
        .flat_map(|(m, c)| m.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<_>>())
        .collect();
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let sd = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 4.0 * 0.003 / n.sqrt(), "mean {mean}");
    assert!((sd / 0.003 - 1.0).abs() < 0.02, "sd {sd}");
}

#[test]
fn ct_attack_scales_only_its_channel_and_interval() {
    let base = builtin::scenario("a", "", vec![], 0.1);
    let attacked = builtin::scenario("b", "", vec![builtin::attack("mu_load.ib", 3.0, 0.03, 0.06)], 0.1);
    let (_, _, s0) = scenario::prepare(&base).unwrap();
    let (_, _, s1) = scenario::prepare(&attacked).unwrap();
    let ch = s1.channel_index("mu_load.ib").unwrap();
    let ev = &attacked.events[0];
    for k in 0..s1.len() {
        for c in 0..s1.channels.len() {
            let want = if c == ch && ev.active_at(k, s1.step) {
                3.0 * s0.measured[k][c]
            } else {
                s0.measured[k][c]
            };
            assert_eq!(s1.measured[k][c], want, "sample {k} channel {c}");
            assert_eq!(s1.clean[k][c], s0.clean[k][c]);
        }
    }
}

#[test]
fn same_seed_same_streams_other_seed_differs() {
    let cfg = builtin::scenario("d", "", vec![builtin::fault(Phase::B, 0.02, 0.04)], 0.05);
    let (_, _, a) = scenario::prepare(&cfg).unwrap();
    let (_, _, b) = scenario::prepare(&cfg).unwrap();
    assert_eq!(a.measured, b.measured);
    let mut other = cfg.clone();
    other.seed += 1;
    let (_, _, c) = scenario::prepare(&other).unwrap();
    assert_ne!(a.measured, c.measured);
    assert_eq!(a.clean, c.clean);
}

#[test]
fn fault_draws_current_and_sags_the_faulted_phase() {
    let cfg = quiet(builtin::scenario(
        "f",
        "",
        vec![builtin::fault(Phase::A, 0.05, 0.1)],
        0.12,
    ));
    let (_, _, sim) = scenario::prepare(&cfg).unwrap();
    let peak = |ch: &str, from: f64, to: f64| {
        let c = sim.channel_index(ch).unwrap();
        sim.times
            .iter()
            .zip(&sim.clean)
            .filter(|(t, _)| **t > from && **t < to)
            .map(|(_, v)| v[c].abs())
            .fold(0.0, f64::max)
    };
    assert!(peak("mu_grid.ia", 0.07, 0.1) > 3.0 * peak("mu_grid.ia", 0.0, 0.05));
    assert!(peak("mu_cable.va", 0.07, 0.1) < 0.8 * peak("mu_cable.va", 0.0, 0.05));
    let healthy_b = peak("mu_grid.ib", 0.07, 0.1) / peak("mu_grid.ib", 0.0, 0.05);
    assert!((healthy_b - 1.0).abs() < 0.5, "{healthy_b}");
}

#[test]
fn healthy_run_is_all_normal() {
    let out = scenario::run(&builtin::scenario("healthy", "", vec![], 0.2)).unwrap();
    assert_eq!(out.trace.len(), out.sim.len() - 1);
    assert!(out
        .diagnoses
        .iter()
        .all(|d| d.verdict == Verdict::Normal && d.trail.is_empty()));
    assert!(out.report.mean_confidence >= 0.99);
    assert!(out.decisions.is_empty());
}

#[test]
fn decisions_reference_their_diagnoses() {
    let cfg = builtin::scenario(
        "r",
        "",
        vec![
            builtin::attack("mu_cable.ia", 3.0, 0.05, 0.15),
            builtin::fault(Phase::A, 0.25, 0.35),
        ],
        0.4,
    );
    let out = scenario::run(&cfg).unwrap();
    assert!(!out.decisions.is_empty());
    for d in &out.decisions {
        let diag = &out.diagnoses[d.cause_window];
        assert_eq!(diag.verdict, d.verdict);
        assert_eq!(diag.suspects, d.suspects);
        assert!(d.cause_window <= d.window);
    }
    let kinds: Vec<DecisionKind> = out.decisions.iter().map(|d| d.kind).collect();
    assert_eq!(kinds, vec![DecisionKind::Alert, DecisionKind::Trip]);
    for row in &out.report.latency {
        assert!(!row.missed, "{row:?}");
    }
}

#[test]
fn budget_of_passes_is_respected() {
    let cfg = builtin::scenario(
        "b",
        "",
        vec![
            builtin::attack("mu_grid.ia", 3.0, 0.02, 0.06),
            builtin::fault(Phase::C, 0.02, 0.06),
        ],
        0.07,
    );
    let out = scenario::run(&cfg).unwrap();
    let cap = 1 + cfg.thresholds.k_max + 2;
    assert!(out.diagnoses.iter().all(|d| d.passes() <= cap));
    assert!(out.diagnoses.iter().any(|d| d.verdict == Verdict::Unresolved));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let cfg = builtin::scenario("echo", "x", vec![builtin::attack("mu_pv.ic", 0.2, 0.02, 0.05)], 0.06);
    let again = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(again, cfg);
    let a = scenario::run(&cfg).unwrap();
    let b = scenario::run(&again).unwrap();
    assert_eq!(a.trace, b.trace);
}

#[test]
fn stride_decimates_windows() {
    let mut cfg = builtin::scenario("s", "", vec![], 0.05);
    cfg.stride = 4;
    let out = scenario::run(&cfg).unwrap();
    assert_eq!(out.trace.len(), (out.sim.len() - 1).div_ceil(4));
}

#[test]
fn builtin_cases_match_the_catalogue() {
    let cases = scenario::list_cases();
    assert_eq!(cases.len(), 4);
    assert!(cases[2].description.contains("simultaneous"));
    let c4 = scenario::case("case4").unwrap();
    let fault = c4.events.iter().find(|e| e.label() == "SLG_FAULT").unwrap();
    assert_eq!((fault.start(), fault.end()), (2.55, 2.8));
    for c in cases {
        let cfg = scenario::case(c.name).unwrap();
        assert_eq!(cfg.duration, 5.0);
        cfg.validate().unwrap();
    }
    assert!(scenario::case("case5").is_none());
    let model =
        build_measurement_model(&builtin::network().build().unwrap(), &builtin::channels(), 1.0 / 4800.0).unwrap();
    assert!(model.m() >= model.n());
}
