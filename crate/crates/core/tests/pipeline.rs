use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use degenctrl::biortho::{build_family, ExponentSet, Precision};
use degenctrl::cost_lab::{cost_at, default_grid, sandwich, sweep, SweepSettings};
use degenctrl::moment_control::{moment_residuals, synthesize, InitialDatum};
use degenctrl::simulator::simulate;
use degenctrl::spectrum::{eigen_system, ProblemParams, Side};

fn pipeline(
    alpha: f64,
    mu: f64,
    horizon: f64,
    side: Side,
    n: usize,
    m: usize,
) -> degenctrl::simulator::TrajectoryResult {
    let p = ProblemParams::new(alpha, mu, horizon).unwrap();
    let sys = eigen_system(&p, n).unwrap();
    let e = ExponentSet::from_spectrum(&sys.lambdas, horizon).unwrap();
    let family = build_family(&e, 1e-10, Precision::Base).unwrap();
    let u0 = InitialDatum::random_unit(n, &mut ChaCha8Rng::seed_from_u64(3));
    let signal = synthesize(&sys, side, &family, &u0, 256).unwrap();
    let res = moment_residuals(&sys, &signal, &u0).unwrap();
    assert!(res.max_scaled() <= 1e-8, "{res:?}");
    simulate(&sys, side, &signal, &u0, m).unwrap()
}

#[test]
fn both_ends_steer_controlled_modes() {
    for side in [Side::Right, Side::Left] {
        for (a, mu) in [(0.0, 0.0), (0.3, -1.0), (0.7, 0.01)] {
            let r = pipeline(a, mu, 1.0, side, 10, 20);
            assert!(r.controlled_max() <= 1e-8, "{side:?} {a} {mu}: {}", r.controlled_max());
            assert!(r.path_disagreement <= 1e-8);
        }
    }
}

#[test]
fn uncontrolled_tail_is_small_but_nonzero() {
    let r = pipeline(0.0, 0.0, 1.0, Side::Right, 8, 16);
    let tail = r.beta_t[8..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(tail > 0.0);
    assert!(tail < 1e-3, "{tail}");
    assert!(r.terminal_norm >= r.controlled_max());
}

#[test]
fn sweep_matches_pointwise_costs() {
    let settings = SweepSettings { side: Side::Right, modes: 8, precision: Precision::Base, tol: 1e-10, seed: 5 };
    let grid: Vec<_> = default_grid().into_iter().filter(|p| p.horizon == 1.0).collect();
    let outcomes = sweep(&grid, &settings);
    assert_eq!(outcomes.len(), grid.len());
    for (o, p) in outcomes.iter().zip(&grid) {
        assert_eq!(o.params(), p);
        let r = o.report().expect("right side never skips");
        assert_eq!(r.measured_cost, cost_at(p, &settings).unwrap().measured_cost);
    }
    let reports: Vec<_> = outcomes.iter().filter_map(|o| o.report()).collect();
    assert!(sandwich(&reports).is_finite());
}
