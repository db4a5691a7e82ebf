mod common;

use common::scalar_oracle;
use delay_attractor::harness::{gronwall_envelope, random_segment, stream_rng, RandomSegmentSpec};
use delay_attractor::integrator::NoProbe;
use delay_attractor::model::effective_bound_m;
use delay_attractor::spectral::{build_spectral_data, solve_char_root, CharEquation};
use delay_attractor::{Field, Grid, ModelParams, NonlinKind, NonlinSpec, Segment, Semiflow};

#[test]
fn constant_data_match_scalar_oracle() {
    let (mu, sigma, eps, g, tau, u0) = (1.0, 0.2, 1.0, 0.1, 1.0, 0.8);
    let grid = Grid::new(1, 4.0, 16).unwrap();
    let mut p = ModelParams::new(
        grid,
        mu,
        sigma,
        tau,
        NonlinSpec::new(NonlinKind::Ricker, eps),
    );
    p.forcing = Field::constant(grid, g);
    let n_tau = 1024;
    let flow = Semiflow::new(p, n_tau).unwrap();
    let phi = Segment::constant(Field::constant(grid, u0), n_tau, tau).unwrap();
    let oracle = scalar_oracle(mu, sigma, eps, g, tau, u0, 20.0, 4096);
    let mut traj = flow.start(phi).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &(t, u)) in oracle.iter().enumerate().step_by(4) {
        if k > 0 {
            flow.step(&mut traj).unwrap();
        }
        assert!((traj.time() - t).abs() < 1e-9);
        let state = traj.state().values();
        assert!(
            state.iter().all(|&v| (v - state[0]).abs() < 1e-13),
            "constants must stay constant"
        );
        worst = worst.max((state[0] - u).abs());
    }
    assert!((traj.time() - 20.0).abs() < 1e-9);
    assert!(worst <= 1e-6, "sup error {worst:e}");
}

#[test]
fn constant_forcing_reaches_equilibrium() {
    let grid = Grid::new(1, 4.0, 16).unwrap();
    let mut p = ModelParams::new(grid, 1.0, 0.0, 1.0, NonlinSpec::new(NonlinKind::Zero, 0.0));
    p.forcing = Field::constant(grid, 0.7);
    // the trapezoidal fixed point is g·(h/2)·coth(h/2) ≈ g(1 + h²/12)
    let n_tau = 512;
    let flow = Semiflow::new(p, n_tau).unwrap();
    let phi = Segment::constant(Field::zeros(grid), n_tau, 1.0).unwrap();
    let traj = flow.evolve(&phi, 20.0).unwrap();
    let exact = 0.7 * (1.0 - (-20.0f64).exp());
    for &v in traj.state().values() {
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        assert!((v - 0.7).abs() < 1e-6);
    }
}

fn smooth_run(n_tau: usize) -> Field {
    let grid = Grid::new(1, 8.0, 128).unwrap();
    let p = ModelParams::new(
        grid,
        1.0,
        0.2,
        1.0,
        NonlinSpec::new(NonlinKind::Ricker, 1.0),
    );
    let flow = Semiflow::new(p, n_tau).unwrap();
    let phi = random_segment(
        flow.engine(),
        n_tau,
        1.0,
        2.0,
        &RandomSegmentSpec::default(),
        &mut stream_rng(4, 0),
    )
    .unwrap();
    flow.evolve(&phi, 4.0).unwrap().state().clone()
}

#[test]
fn self_convergence_is_second_order() {
    let reference = smooth_run(512);
    let e: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| smooth_run(n).sub(&reference).unwrap().norm_l2())
        .collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}, errors {e:?}");
    }
}

#[test]
fn evolve_composes() {
    let grid = Grid::new(1, 8.0, 64).unwrap();
    let p = ModelParams::new(
        grid,
        1.0,
        0.2,
        1.0,
        NonlinSpec::new(NonlinKind::Saturating, 1.0),
    );
    let flow = Semiflow::new(p, 16).unwrap();
    let phi = random_segment(
        flow.engine(),
        16,
        1.0,
        3.0,
        &RandomSegmentSpec::default(),
        &mut stream_rng(1, 1),
    )
    .unwrap();
    let whole = flow.evolve(&phi, 5.0).unwrap();
    let half = flow.evolve(&phi, 2.0).unwrap();
    let rest = flow.evolve(&half.segment(), 3.0).unwrap();
    let diff = whole.state().sub(rest.state()).unwrap().norm_l2();
    assert!(diff <= 1e-10 * whole.state().norm_l2(), "{diff:e}");
}

#[test]
fn linear_difference_decays_at_mu() {
    let grid = Grid::new(1, 8.0, 64).unwrap();
    let mu = 1.5;
    let p = ModelParams::new(grid, mu, 0.0, 1.0, NonlinSpec::new(NonlinKind::Zero, 0.0));
    let flow = Semiflow::new(p, 32).unwrap();
    let phi = Segment::constant(Field::constant(grid, 1.0), 32, 1.0).unwrap();
    let psi = Segment::constant(Field::constant(grid, 0.5), 32, 1.0).unwrap();
    let log = flow
        .difference_trajectories(&phi, &psi, 4.0, &NoProbe)
        .unwrap();
    let r0 = log.records[0].r;
    for rec in &log.records {
        let expected = r0 * (-mu * (rec.t - 1.0).max(0.0)).exp();
        assert!(
            (rec.r - expected).abs() <= 1e-6 * r0,
            "t={} r={} expected {}",
            rec.t,
            rec.r,
            expected
        );
    }
    // per unit time after the first delay interval
    let at = |t: f64| {
        log.records
            .iter()
            .find(|r| (r.t - t).abs() < 1e-9)
            .unwrap()
            .r
    };
    for t in [1.0, 2.0, 3.0] {
        let rate = -(at(t + 1.0) / at(t)).ln();
        assert!((rate - mu).abs() <= 0.05 * mu, "rate {rate}");
    }
    // state difference is e^{-μt} from t = 0
    let a = flow.evolve(&phi, 0.5).unwrap();
    let b = flow.evolve(&psi, 0.5).unwrap();
    let d = a.state().sub(b.state()).unwrap().norm_l2();
    assert!((d / r0 - (-mu * 0.5f64).exp()).abs() < 1e-6);
}

#[test]
fn linear_decay_is_bracketed_by_characteristic_roots() {
    let grid = Grid::new(1, 2.0 * std::f64::consts::PI, 128).unwrap();
    let mut p = ModelParams::new(grid, 1.0, 0.5, 1.0, NonlinSpec::new(NonlinKind::Zero, 0.0));
    p.trunc_radius = std::f64::consts::FRAC_PI_2;
    let table = build_spectral_data(&p, 1, 4, CharEquation::Corrected).unwrap();
    let rho_1 = table.rho_1;
    let slowest = solve_char_root(p.mu, p.sigma, p.tau).unwrap();
    let flow = Semiflow::new(p.clone(), 32).unwrap();
    let k = p.trunc_radius;
    let bump = Field::from_fn(grid, |x| {
        if x[0].abs() < k {
            (std::f64::consts::PI * (x[0] + k) / (2.0 * k)).sin()
        } else {
            0.0
        }
    });
    let phi = Segment::constant(bump, 32, 1.0).unwrap();
    let traj = flow.evolve(&phi, 30.0).unwrap();
    let hist = traj.history();
    let at = |t: f64| {
        hist.iter()
            .find(|r| (r.t - t).abs() < 1e-9)
            .unwrap()
            .segment_norm
    };
    let fitted = (at(30.0) / at(20.0)).ln() / 10.0;
    let delta = 0.1;
    assert!(fitted >= rho_1 - delta, "fitted {fitted} rho_1 {rho_1}");
    assert!(
        fitted <= slowest + delta,
        "fitted {fitted} slowest {slowest}"
    );
}

#[test]
fn norms_stay_under_discrete_gronwall_envelope() {
    let grid = Grid::new(1, 2.0 * std::f64::consts::PI, 128).unwrap();
    let p = ModelParams::new(
        grid,
        1.0,
        0.2,
        1.0,
        NonlinSpec::new(NonlinKind::Ricker, 1.0),
    );
    assert!(p.absorbing_ok());
    let flow = Semiflow::new(p.clone(), 32).unwrap();
    let volume_sqrt = (2.0 * grid.half_length).sqrt();
    let m_box = p.nonlinearity.bound * volume_sqrt + p.forcing.norm_l2();
    assert!(m_box >= effective_bound_m(&p));
    for (i, norm) in [0.5, 5.0, 20.0].into_iter().enumerate() {
        let phi = random_segment(
            flow.engine(),
            32,
            1.0,
            norm,
            &RandomSegmentSpec::default(),
            &mut stream_rng(8, i as u64),
        )
        .unwrap();
        let traj = flow.evolve(&phi, 15.0).unwrap();
        let env = gronwall_envelope(traj.history(), p.mu, p.sigma, p.tau, m_box);
        for (rec, e) in traj.history().iter().zip(&env) {
            assert!(
                rec.segment_norm <= e * (1.0 + 1e-3),
                "t={} {} > {}",
                rec.t,
                rec.segment_norm,
                e
            );
        }
    }
}
