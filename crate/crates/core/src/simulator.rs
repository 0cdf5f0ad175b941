//! Spectral forward solver for the controlled problem.
//!
//! The state is written as `u = v + ℓ(x) H(t)`, with `ℓ` the stationary lift of
//! the controlled end. Modal coefficients of `v` solve decoupled linear ODEs whose
//! forcing is an exponential sum, so every time integral is closed-form.
//! Terminal coefficients are produced twice: once from the duality identity
//! (path A) and once from the lifted modal ODEs (path B).

use serde::{Deserialize, Serialize};

use crate::biortho::decay;
use crate::dd::{DoubleDouble, Scalar};
use crate::error::{Error, Result};
use crate::moment_control::{ControlSignal, InitialDatum};
use crate::spectrum::{eigen_system, eval_lift, EigenSystem, Side};

/// Number of spatial points in each snapshot.
pub const SNAPSHOT_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub side: Side,
    /// β_k(T) for k = 1..M from path A.
    pub beta_t: Vec<f64>,
    /// The same coefficients from path B.
    pub beta_t_lifted: Vec<f64>,
    pub terminal_norm: f64,
    pub path_disagreement: f64,
    /// max_k |β_k(T)| when path B uses the exact projection of the lift instead of
    /// the trace identity. Nonzero only for the left end with μ ≠ 0.
    pub lift_defect: f64,
    /// Number of controlled modes N.
    pub controlled: usize,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryResult {
    pub fn modes(&self) -> usize {
        self.beta_t.len()
    }

    /// max_{k ≤ N} |β_k(T)|.
    pub fn controlled_max(&self) -> f64 {
        self.beta_t[..self.controlled].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Points `((i+1)/n)²`, i = 0..n−1, clustered near x = 0.
pub fn snapshot_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i + 1) as f64 / n as f64).powi(2)).collect()
}

/// Projections `∫₀¹ ℓ Φ_k dx` of the lift: `−Φ'_k(1)/λ_k` (right), `r_k/λ_k` (left).
pub fn lift_projections(sys: &EigenSystem, side: Side) -> Result<Vec<f64>> {
    match side {
        Side::Right => Ok(sys.trace_right.iter().zip(&sys.lambdas).map(|(d, l)| -d / l).collect()),
        Side::Left => {
            let r = sys.trace_left.as_ref().ok_or(Error::CriticalPotential { mu_crit: sys.derived.mu_crit })?;
            Ok(r.iter().zip(&sys.lambdas).map(|(r, l)| r / l).collect())
        }
    }
}

/// Exact projections of the lift: `−Φ'_k(1)/λ_k` (right), `2√(μ(α)−μ) c_k/λ_k` (left),
/// where `c_k = lim x^{−(√μ(α)+√(μ(α)−μ))} Φ_k(x) = r_k/(√μ(α)+√(μ(α)−μ))`.
///
/// Green's formula on `x^γ(1−x^q)` leaves a boundary term `γ c_k` at x = 0, so on the
/// left this differs from `r_k/λ_k` unless γ = 0.
pub fn exact_lift_projections(sys: &EigenSystem, side: Side) -> Result<Vec<f64>> {
    let mut p = lift_projections(sys, side)?;
    if side == Side::Left {
        let d = &sys.derived;
        let f = 2.0 * d.root() / (d.mu_crit.sqrt() + d.root());
        p.iter_mut().for_each(|v| *v *= f);
    }
    Ok(p)
}

/// Quadrature values of `∫ℓΦ_k + Φ'_k(1)/λ_k` and `∫x^γ(p/p(0))Φ_k − r_k/λ_k`.
/// The second entry is NaN at the critical potential.
pub fn projection_identities_check(sys: &EigenSystem, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > sys.count() {
        return Err(Error::IndexOutOfRange { index: k, len: sys.count() });
    }
    let rule = sys.default_rule(k);
    let project = |side: Side| -> Result<f64> {
        let mut acc = 0.0;
        for ((&x, &y), &w) in rule.x.iter().zip(&rule.y).zip(&rule.w) {
            acc += w * eval_lift(&sys.params, side, x)? * sys.eigenfunction_in_y(k, y)?;
        }
        Ok(acc)
    };
    let lam = sys.lambdas[k - 1];
    let right = project(Side::Right)? + sys.trace_right[k - 1] / lam;
    let left = match &sys.trace_left {
        Some(r) => project(Side::Left)? - r[k - 1] / lam,
        None => f64::NAN,
    };
    Ok((right, left))
}

fn check_pairing(sys: &EigenSystem, side: Side, signal: &ControlSignal, u0: &InitialDatum, m: usize) -> Result<()> {
    let n = signal.modes();
    if signal.side != side {
        return Err(Error::Inconsistent(format!("signal acts on the {} end, not {side}", signal.side)));
    }
    if m < n {
        return Err(Error::Inconsistent(format!("M = {m} is below N = {n}")));
    }
    if n > sys.count() || signal.lambdas[1..] != sys.lambdas[..n] {
        return Err(Error::Inconsistent("signal exponents do not match the spectrum".into()));
    }
    if signal.horizon != sys.params.horizon {
        return Err(Error::Inconsistent("signal horizon differs from T".into()));
    }
    if u0.len() > m {
        return Err(Error::Inconsistent(format!("datum has {} modes but M = {m}", u0.len())));
    }
    Ok(())
}

/// Modal solver bound to one system, control and datum.
pub struct Trajectory<'a> {
    sys: std::borrow::Cow<'a, EigenSystem>,
    side: Side,
    signal: &'a ControlSignal,
    u0: &'a InitialDatum,
    proj: Vec<f64>,
    exact: Vec<f64>,
}

impl<'a> Trajectory<'a> {
    /// Extends the spectrum to M modes when needed.
    pub fn new(
        sys: &'a EigenSystem,
        side: Side,
        signal: &'a ControlSignal,
        u0: &'a InitialDatum,
        m: usize,
    ) -> Result<Self> {
        check_pairing(sys, side, signal, u0, m)?;
        let sys = if m > sys.count() {
            std::borrow::Cow::Owned(eigen_system(&sys.params, m)?)
        } else {
            std::borrow::Cow::Borrowed(sys)
        };
        let mut proj = lift_projections(&sys, side)?;
        proj.truncate(m);
        let mut exact = exact_lift_projections(&sys, side)?;
        exact.truncate(m);
        Ok(Trajectory { sys, side, signal, u0, proj, exact })
    }

    pub fn modes(&self) -> usize {
        self.proj.len()
    }

    /// Path A at t = T: `e^{−λT}ρ − τ ∫H e^{λ(t−T)}` with τ = Φ'_k(1) or −r_k.
    pub fn terminal_duality(&self) -> Vec<f64> {
        let t = self.signal.horizon;
        (0..self.modes())
            .map(|i| {
                let lam = self.sys.lambdas[i];
                // −λP_k is Φ'_k(1) on the right and −r_k on the left
                let tau = DoubleDouble::from(-self.proj[i] * lam);
                let free = decay::<DoubleDouble>(lam, t) * DoubleDouble::from(self.u0.get(i + 1));
                (free - tau * self.signal.h_moment(lam)).to_f64()
            })
            .collect()
    }

    /// Coefficients `v_k(t) + P_k H(t)` from the lifted modal ODEs (path B).
    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        self.lifted(t, &self.proj)
    }

    /// Path B with the exact lift projections.
    pub fn coefficients_exact_lift(&self, t: f64) -> Vec<f64> {
        self.lifted(t, &self.exact)
    }

    fn lifted(&self, t: f64, proj: &[f64]) -> Vec<f64> {
        let td = DoubleDouble::from(t);
        let h = if t == 0.0 { DoubleDouble::ZERO } else { self.signal.eval_h_dd(td) };
        (0..self.modes())
            .map(|i| {
                let lam = self.sys.lambdas[i];
                let p = DoubleDouble::from(proj[i]);
                let free = decay::<DoubleDouble>(lam, t) * DoubleDouble::from(self.u0.get(i + 1));
                let forced = if t == 0.0 { DoubleDouble::ZERO } else { self.signal.damped_integral_dd(lam, td) };
                (free - p * forced + p * h).to_f64()
            })
            .collect()
    }

    /// `u(x, t)` from the first M modes plus the lift term.
    pub fn snapshot(&self, t: f64, xs: &[f64]) -> Result<Snapshot> {
        let h = self.signal.eval_h(t);
        let beta = self.coefficients_at(t);
        // modal part is v, so remove the lift's own projection
        let v: Vec<f64> = beta.iter().zip(&self.proj).map(|(b, p)| b - p * h).collect();
        let mut u = Vec::with_capacity(xs.len());
        for &x in xs {
            let mut s = h * eval_lift(&self.sys.params, self.side, x)?;
            for (k, vk) in v.iter().enumerate() {
                s += vk * self.sys.eval_eigenfunction(k + 1, x)?;
            }
            u.push(s);
        }
        Ok(Snapshot { t, x: xs.to_vec(), u })
    }
}

/// Terminal state and diagnostics; snapshots are taken at `times`.
pub fn simulate_with_snapshots(
    sys: &EigenSystem,
    side: Side,
    signal: &ControlSignal,
    u0: &InitialDatum,
    m: usize,
    times: &[f64],
) -> Result<TrajectoryResult> {
    let traj = Trajectory::new(sys, side, signal, u0, m)?;
    let beta_t = traj.terminal_duality();
    let beta_t_lifted = traj.coefficients_at(signal.horizon);
    let path_disagreement = beta_t.iter().zip(&beta_t_lifted).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let terminal_norm = beta_t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lift_defect = traj
        .coefficients_exact_lift(signal.horizon)
        .iter()
        .zip(&beta_t_lifted)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let xs = snapshot_grid(SNAPSHOT_POINTS);
    let snapshots = times
        .iter()
        .map(|&t| {
            if !(0.0..=signal.horizon).contains(&t) {
                return Err(Error::Domain(format!("snapshot time {t} outside [0, T]")));
            }
            traj.snapshot(t, &xs)
        })
        .collect::<Result<_>>()?;
    Ok(TrajectoryResult {
        side,
        beta_t,
        beta_t_lifted,
        terminal_norm,
        path_disagreement,
        lift_defect,
        controlled: signal.modes(),
        snapshots,
    })
}

/// Terminal state without snapshots.
pub fn simulate(
    sys: &EigenSystem,
    side: Side,
    signal: &ControlSignal,
    u0: &InitialDatum,
    m: usize,
) -> Result<TrajectoryResult> {
    simulate_with_snapshots(sys, side, signal, u0, m, &[])
}

/// Reference solver for α = μ = 0 with a right control: sine modes `√2 sin(kπx)`,
/// lift `xH(t)`, and Crank–Nicolson time stepping of the modal ODEs with `steps`
/// uniform steps, Richardson-combined with a run at `steps/2`. Shares no spectral
/// data with the main path.
pub fn sine_series_reference(signal: &ControlSignal, u0: &InitialDatum, m: usize, steps: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    let horizon = signal.horizon;
    let run = |n: usize| -> Vec<f64> {
        let dt = horizon / n as f64;
        let ks: Vec<f64> = (0..=n).map(|i| signal.eval_k(dt * i as f64)).collect();
        (1..=m)
            .map(|k| {
                let lam = (k as f64 * pi).powi(2);
                let p = 2f64.sqrt() * if k % 2 == 1 { 1.0 } else { -1.0 } / (k as f64 * pi);
                let (a, b) = (1.0 - 0.5 * lam * dt, 1.0 + 0.5 * lam * dt);
                let mut v = u0.get(k);
                for i in 0..n {
                    v = (a * v - 0.5 * dt * p * (ks[i] + ks[i + 1])) / b;
                }
                v + p * signal.eval_h(horizon)
            })
            .collect()
    };
    let fine = run(steps);
    let coarse = run(steps / 2);
    fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biortho::{build_family, ExponentSet, Precision};
    use crate::moment_control::{synthesize, synthesize_right};
    use crate::spectrum::ProblemParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(a: f64, mu: f64, t: f64, n: usize) -> (EigenSystem, crate::biortho::BiorthogonalFamily) {
        let sys = eigen_system(&ProblemParams::new(a, mu, t).unwrap(), n).unwrap();
        let e = ExponentSet::from_spectrum(&sys.lambdas, t).unwrap();
        (sys.clone(), build_family(&e, 1e-10, Precision::Base).unwrap())
    }

    #[test]
    fn classical_projection() {
        let sys = eigen_system(&ProblemParams::new(0.0, 0.0, 1.0).unwrap(), 3).unwrap();
        let p = lift_projections(&sys, Side::Right).unwrap();
        assert!((p[0] - 2f64.sqrt() / std::f64::consts::PI).abs() < 1e-14);
        let (r, l) = projection_identities_check(&sys, 1).unwrap();
        assert!(r.abs() < 1e-12 && l.abs() < 1e-12, "{r} {l}");
    }

    fn quadrature_projection(sys: &EigenSystem, side: Side, k: usize) -> f64 {
        let rule = sys.default_rule(k);
        let mut acc = 0.0;
        for ((&x, &y), &w) in rule.x.iter().zip(&rule.y).zip(&rule.w) {
            acc += w * eval_lift(&sys.params, side, x).unwrap() * sys.eigenfunction_in_y(k, y).unwrap();
        }
        acc
    }

    #[test]
    fn exact_projections_match_quadrature() {
        for &a in &[0.0, 0.4, 0.8] {
            for &frac in &[-2.0, 0.0, 0.7] {
                let mu = frac * crate::spectrum::mu_critical(a);
                let sys = eigen_system(&ProblemParams::new(a, mu, 1.0).unwrap(), 20).unwrap();
                for side in [Side::Right, Side::Left] {
                    let p = exact_lift_projections(&sys, side).unwrap();
                    for k in [1, 2, 3, 4, 5, 10, 20] {
                        let q = quadrature_projection(&sys, side, k);
                        assert!((q - p[k - 1]).abs() <= 1e-9, "a={a} mu={mu} {side} k={k}: {q} {}", p[k - 1]);
                    }
                }
            }
        }
    }

    #[test]
    fn trace_identities_at_zero_potential() {
        for &a in &[0.0, 0.4, 0.8] {
            let sys = eigen_system(&ProblemParams::new(a, 0.0, 1.0).unwrap(), 20).unwrap();
            for k in [1, 2, 5, 20] {
                let (r, l) = projection_identities_check(&sys, k).unwrap();
                assert!(r.abs() <= 1e-9 && l.abs() <= 1e-9, "a={a} k={k}: {r:e} {l:e}");
            }
        }
    }

    #[test]
    fn left_trace_identity_misses_boundary_term() {
        // mpmath: ∫ x^γ(1−x^{2s}) Φ_1 = 0.78656394279136169, r_1/λ_1 = 0.62034342344840388
        let sys = eigen_system(&ProblemParams::new(0.0, -0.5, 1.0).unwrap(), 2).unwrap();
        let (r, l) = projection_identities_check(&sys, 1).unwrap();
        assert!(r.abs() < 1e-12);
        assert!((l - 0.16622051934295781).abs() < 1e-9, "{l}");
        let p = exact_lift_projections(&sys, Side::Left).unwrap();
        assert!((p[0] - 0.78656394279136169).abs() < 1e-12);
    }

    #[test]
    fn free_decay_is_exact() {
        let (sys, f) = setup(0.3, -0.4, 1.0, 6);
        let zero = synthesize_right(&sys, &f, &InitialDatum::zero(6)).unwrap();
        let u0 = InitialDatum::mode(2, 6).unwrap();
        let r = simulate(&sys, Side::Right, &zero, &u0, 6).unwrap();
        for (k, b) in r.beta_t.iter().enumerate() {
            let want = if k == 1 { (-sys.lambdas[1]).exp() } else { 0.0 };
            assert_eq!(*b, want);
        }
        assert_eq!(r.path_disagreement, 0.0);
    }

    #[test]
    fn free_decay_norm_is_nonincreasing() {
        let (sys, f) = setup(0.6, -2.0, 1.0, 8);
        let zero = synthesize_right(&sys, &f, &InitialDatum::zero(8)).unwrap();
        let u0 = InitialDatum::random_unit(8, &mut ChaCha8Rng::seed_from_u64(1));
        let traj = Trajectory::new(&sys, Side::Right, &zero, &u0, 8).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let t = i as f64 / 9.0;
            let b = traj.coefficients_at(t);
            for (k, bk) in b.iter().enumerate() {
                assert!((bk - u0.coeffs[k] * (-sys.lambdas[k] * t).exp()).abs() <= 1e-12);
            }
            let n = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn random_datum_is_steered_to_zero() {
        let (sys, f) = setup(0.0, 0.0, 1.0, 10);
        let u0 = InitialDatum::random_unit(10, &mut ChaCha8Rng::seed_from_u64(3));
        let c = synthesize_right(&sys, &f, &u0).unwrap();
        let r = simulate(&sys, Side::Right, &c, &u0, 20).unwrap();
        assert_eq!(r.modes(), 20);
        assert!(r.controlled_max() <= 1e-8, "{}", r.controlled_max());
        assert!(r.path_disagreement <= 1e-8, "{}", r.path_disagreement);
        assert!(r.lift_defect <= 1e-8);
    }

    #[test]
    fn matches_sine_series_reference() {
        let (sys, f) = setup(0.0, 0.0, 1.0, 10);
        let u0 = InitialDatum::random_unit(10, &mut ChaCha8Rng::seed_from_u64(5));
        let c = synthesize_right(&sys, &f, &u0).unwrap();
        let r = simulate(&sys, Side::Right, &c, &u0, 10).unwrap();
        let reference = sine_series_reference(&c, &u0, 10, 1 << 15);
        let d = r.beta_t.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d <= 1e-7, "{d:e}");
    }

    #[test]
    fn left_paths_agree() {
        let (sys, f) = setup(0.5, -1.0, 0.5, 8);
        let u0 = InitialDatum::random_unit(8, &mut ChaCha8Rng::seed_from_u64(11));
        let c = synthesize(&sys, Side::Left, &f, &u0, 16).unwrap();
        let r = simulate(&sys, Side::Left, &c, &u0, 16).unwrap();
        assert!(r.controlled_max() <= 1e-8, "{}", r.controlled_max());
        assert!(r.path_disagreement <= 1e-8);
        // the trace-identity lift is not the projection of the actual lift when μ ≠ 0
        assert!(r.lift_defect > 1e-4, "{}", r.lift_defect);
    }

    #[test]
    fn snapshots_match_boundary_data() {
        let (sys, f) = setup(0.0, 0.0, 1.0, 6);
        let u0 = InitialDatum::mode(1, 6).unwrap();
        let c = synthesize_right(&sys, &f, &u0).unwrap();
        let r = simulate_with_snapshots(&sys, Side::Right, &c, &u0, 12, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(r.snapshots.len(), 3);
        let s = &r.snapshots[1];
        assert_eq!(s.x.len(), SNAPSHOT_POINTS);
        assert_eq!(*s.x.last().unwrap(), 1.0);
        assert!((s.u.last().unwrap() - c.eval_h(0.5)).abs() < 1e-12);
        let s0 = &r.snapshots[0];
        let phi = |x: f64| 2f64.sqrt() * (std::f64::consts::PI * x).sin();
        for (x, u) in s0.x.iter().zip(&s0.u) {
            assert!((u - phi(*x)).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let (sys, f) = setup(0.0, 0.0, 1.0, 4);
        let u0 = InitialDatum::mode(1, 4).unwrap();
        let c = synthesize_right(&sys, &f, &u0).unwrap();
        assert!(simulate(&sys, Side::Left, &c, &u0, 4).is_err());
        assert!(simulate(&sys, Side::Right, &c, &u0, 3).is_err());
    }
}
