//! Spectral data of `A u = −(x^α u_x)_x − μ x^{α−2} u` on (0,1) with Dirichlet
//! conditions: eigenvalues, normalized eigenfunctions, boundary traces,
//! stationary profiles used to lift boundary data, and gap certificates.
//!
//! With `ν = (2/(2−α))·√(μ(α) − μ)` and `j_k = j_{ν,k}`:
//!
//! ```text
//! λ_k = ((2−α)/2)² j_k²,    Φ_k(x) = C_k x^{(1−α)/2} J_ν(j_k x^{(2−α)/2}),    C_k = √(2−α)/|J'_ν(j_k)|
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{panels_graded_left, GaussLegendre};
use crate::specfun::{bessel_j, bessel_j_prime, bessel_zeros, gamma_fn, ln_gamma, ZeroTable};

/// Boundary point where the control acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// x = 1
    Right,
    /// x = 0, through the weighted condition `(x^{−γ}u)(0,t) = H(t)`
    Left,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Right => "right",
            Side::Left => "left",
        })
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Side::Right),
            "left" => Ok(Side::Left),
            other => Err(Error::InvalidParams(format!("unknown side `{other}`"))),
        }
    }
}

/// Which side of `ν = 1/2` the order falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// ν ≤ 1/2
    #[serde(rename = "nu_le_half")]
    LowOrder,
    /// ν > 1/2
    #[serde(rename = "nu_gt_half")]
    HighOrder,
}

impl Regime {
    pub fn of(nu: f64) -> Self {
        if nu <= 0.5 {
            Regime::LowOrder
        } else {
            Regime::HighOrder
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::LowOrder => "nu_le_half",
            Regime::HighOrder => "nu_gt_half",
        })
    }
}

/// `μ(α) = (1−α)²/4`.
pub fn mu_critical(alpha: f64) -> f64 {
    0.25 * (1.0 - alpha) * (1.0 - alpha)
}

/// The potential at which `ν(α, μ) = 1/2`.
pub fn regime_boundary_mu(alpha: f64) -> f64 {
    alpha * (3.0 * alpha - 4.0) / 16.0
}

/// Diffusion exponent, potential and time horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub alpha: f64,
    pub mu: f64,
    pub horizon: f64,
}

impl ProblemParams {
    pub fn new(alpha: f64, mu: f64, horizon: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::InvalidParams(format!("alpha must lie in [0,1), got {alpha}")));
        }
        if !mu.is_finite() || mu > mu_critical(alpha) {
            return Err(Error::InvalidParams(format!("mu must be finite and <= {}, got {mu}", mu_critical(alpha))));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParams(format!("T must be positive, got {horizon}")));
        }
        Ok(ProblemParams { alpha, mu, horizon })
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        ProblemParams::new(self.alpha, self.mu, horizon)
    }

    pub fn is_critical(&self) -> bool {
        self.mu == mu_critical(self.alpha)
    }
}

/// Quantities derived from (α, μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub nu: f64,
    pub gamma: f64,
    pub mu_crit: f64,
    pub q_right: f64,
    pub q_left: f64,
}

impl DerivedParams {
    /// `√(μ(α) − μ)`.
    pub fn root(&self) -> f64 {
        self.q_left / 2.0
    }
}

pub fn derive_params(params: &ProblemParams) -> DerivedParams {
    let mc = mu_critical(params.alpha);
    let s = (mc - params.mu).max(0.0).sqrt();
    DerivedParams {
        nu: 2.0 / (2.0 - params.alpha) * s,
        gamma: mc.sqrt() - s,
        mu_crit: mc,
        q_right: (1.0 - params.alpha) / 2.0 + s,
        q_left: 2.0 * s,
    }
}

/// Like [`derive_params`], but rejects the critical potential for the left problem.
pub fn derive_params_for(params: &ProblemParams, side: Side) -> Result<DerivedParams> {
    let d = derive_params(params);
    if side == Side::Left && params.is_critical() {
        return Err(Error::CriticalPotential { mu_crit: d.mu_crit });
    }
    Ok(d)
}

/// Truncated spectral data for the first N modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub params: ProblemParams,
    pub derived: DerivedParams,
    pub zeros: ZeroTable,
    pub lambdas: Vec<f64>,
    pub norm_consts: Vec<f64>,
    /// Φ'_k(1), sign (−1)^k.
    pub trace_right: Vec<f64>,
    /// r_k = lim_{x→0⁺} x^{α+γ} Φ'_k(x); absent at the critical potential.
    pub trace_left: Option<Vec<f64>>,
    /// J'_ν(j_k).
    pub jprime_at_zeros: Vec<f64>,
}

pub fn eigen_system(params: &ProblemParams, n: usize) -> Result<EigenSystem> {
    if n == 0 {
        return Err(Error::InvalidParams("N must be at least 1".into()));
    }
    let derived = derive_params(params);
    let a = params.alpha;
    let nu = derived.nu;
    let zeros = bessel_zeros(nu, n)?;
    let half = (2.0 - a) / 2.0;
    let mut lambdas = Vec::with_capacity(n);
    let mut norm_consts = Vec::with_capacity(n);
    let mut trace_right = Vec::with_capacity(n);
    let mut jprime_at_zeros = Vec::with_capacity(n);
    for &j in &zeros.zeros {
        let jp = bessel_j_prime(nu, j)?;
        lambdas.push(half * half * j * j);
        norm_consts.push((2.0 - a).sqrt() / jp.abs());
        trace_right.push(jp.signum() * (2.0 - a).powf(1.5) / 2.0 * j);
        jprime_at_zeros.push(jp);
    }
    let trace_left = if params.is_critical() {
        None
    } else {
        let factor = derived.mu_crit.sqrt() + derived.root();
        let g = gamma_fn(1.0 + nu)?;
        let traces = zeros
            .zeros
            .iter()
            .zip(&norm_consts)
            .map(|(&j, &c)| {
                let p = (0.5 * j).powf(nu) / g;
                let p = if p.is_finite() && p > 0.0 {
                    p
                } else {
                    (nu * (0.5 * j).ln() - ln_gamma(1.0 + nu).unwrap_or(f64::INFINITY)).exp()
                };
                c * p * factor
            })
            .collect();
        Some(traces)
    };
    Ok(EigenSystem { params: *params, derived, zeros, lambdas, norm_consts, trace_right, trace_left, jprime_at_zeros })
}

/// Composite rule on (0,1) in the variable `y = x^{(2−α)/2}`, mapped back to x.
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl EigenSystem {
    pub fn count(&self) -> usize {
        self.lambdas.len()
    }

    fn index(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.count() {
            Err(Error::IndexOutOfRange { index: k, len: self.count() })
        } else {
            Ok(k - 1)
        }
    }

    fn check_x(x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x must lie in [0,1], got {x}")));
        }
        Ok(())
    }

    /// Φ_k(x), 1-based k.
    pub fn eval_eigenfunction(&self, k: usize, x: f64) -> Result<f64> {
        let i = self.index(k)?;
        Self::check_x(x)?;
        let a = self.params.alpha;
        if x == 0.0 {
            return Ok(0.0);
        }
        let y = x.powf((2.0 - a) / 2.0);
        Ok(self.norm_consts[i] * x.powf((1.0 - a) / 2.0) * bessel_j(self.derived.nu, self.zeros.zeros[i] * y)?)
    }

    /// Φ_k as a function of `y = x^{(2−α)/2}`.
    pub fn eigenfunction_in_y(&self, k: usize, y: f64) -> Result<f64> {
        let i = self.index(k)?;
        let a = self.params.alpha;
        Ok(self.norm_consts[i] * y.powf((1.0 - a) / (2.0 - a)) * bessel_j(self.derived.nu, self.zeros.zeros[i] * y)?)
    }

    /// Φ'_k(x) for 0 < x ≤ 1.
    pub fn eigenfunction_derivative(&self, k: usize, x: f64) -> Result<f64> {
        let i = self.index(k)?;
        Self::check_x(x)?;
        if x == 0.0 {
            return Err(Error::Domain("derivative is evaluated for x > 0 only".into()));
        }
        let a = self.params.alpha;
        let nu = self.derived.nu;
        let j = self.zeros.zeros[i];
        let z = j * x.powf((2.0 - a) / 2.0);
        let c = self.norm_consts[i];
        Ok(c * ((1.0 - a) / 2.0 * x.powf(-(1.0 + a) / 2.0) * bessel_j(nu, z)?
            + (2.0 - a) / 2.0 * j * x.powf((1.0 - 2.0 * a) / 2.0) * bessel_j_prime(nu, z)?))
    }

    /// Φ'_k(1).
    pub fn right_trace(&self, k: usize) -> Result<f64> {
        Ok(self.trace_right[self.index(k)?])
    }

    /// r_k from the small-argument expansion of J_ν.
    pub fn eval_left_trace(&self, k: usize) -> Result<f64> {
        let i = self.index(k)?;
        match &self.trace_left {
            Some(t) => Ok(t[i]),
            None => Err(Error::CriticalPotential { mu_crit: self.derived.mu_crit }),
        }
    }

    /// `x^{α+γ} Φ'_k(x)` at x = 1e−4, 1e−5, 1e−6, Richardson-extrapolated
    /// to x → 0 assuming a correction series in powers of `x^{2−α}`.
    pub fn left_trace_numeric_limit(&self, k: usize) -> Result<f64> {
        if self.params.is_critical() {
            return Err(Error::CriticalPotential { mu_crit: self.derived.mu_crit });
        }
        let a = self.params.alpha;
        let e = a + self.derived.gamma;
        let f = |x: f64| -> Result<f64> { Ok(x.powf(e) * self.eigenfunction_derivative(k, x)?) };
        let (f1, f2, f3) = (f(1e-4)?, f(1e-5)?, f(1e-6)?);
        let r1 = 10f64.powf(2.0 - a);
        let g12 = (r1 * f2 - f1) / (r1 - 1.0);
        let g23 = (r1 * f3 - f2) / (r1 - 1.0);
        let r2 = r1 * r1;
        Ok((r2 * g23 - g12) / (r2 - 1.0))
    }

    /// Ratio of r_k to the expression `C_k (√μ(α) + √(μ(α)−μ)) j_k / Γ(1+ν)`.
    pub fn left_trace_printed_ratio(&self, k: usize) -> Result<f64> {
        let i = self.index(k)?;
        let r = self.eval_left_trace(k)?;
        let d = &self.derived;
        let printed = self.norm_consts[i] * (d.mu_crit.sqrt() + d.root()) * self.zeros.zeros[i] / gamma_fn(1.0 + d.nu)?;
        Ok(r / printed)
    }

    /// Composite Gauss rule on (0,1) in `y`, with the Jacobian folded into the weights.
    pub fn unit_rule(&self, uniform: usize, levels: usize, order: usize) -> UnitRule {
        let a = self.params.alpha;
        let g = GaussLegendre::<f64>::new(order);
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        for (lo, hi) in panels_graded_left(uniform, levels) {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (t, wt) in g.nodes.iter().zip(&g.weights) {
                let yy = mid + half * t;
                y.push(yy);
                x.push(yy.powf(2.0 / (2.0 - a)));
                w.push(wt * half * 2.0 / (2.0 - a) * yy.powf(a / (2.0 - a)));
            }
        }
        UnitRule { x, y, w }
    }

    /// Rule fine enough to resolve the first `kmax` eigenfunctions.
    pub fn default_rule(&self, kmax: usize) -> UnitRule {
        let uniform = (2 * kmax + (self.derived.nu as usize)).max(16);
        self.unit_rule(uniform, 40, 20)
    }

    /// ∫₀¹ Φ_j Φ_k dx for j, k ≤ kmax.
    pub fn orthonormality_gram(&self, kmax: usize) -> Result<Vec<Vec<f64>>> {
        let kmax = kmax.min(self.count());
        let rule = self.default_rule(kmax);
        let vals: Vec<Vec<f64>> = (1..=kmax)
            .map(|k| rule.y.iter().map(|&y| self.eigenfunction_in_y(k, y)).collect())
            .collect::<Result<_>>()?;
        let mut g = vec![vec![0.0; kmax]; kmax];
        for i in 0..kmax {
            for j in 0..=i {
                let s: f64 = rule.w.iter().zip(&vals[i]).zip(&vals[j]).map(|((w, a), b)| w * a * b).sum();
                g[i][j] = s;
                g[j][i] = s;
            }
        }
        Ok(g)
    }
}

/// Gap diagnostics for `√λ_{k+1} − √λ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub nu: f64,
    pub regime: Regime,
    pub gaps: Vec<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// ⌊ν⌋ + 1: gaps beyond this index are at most `gamma_max_star`.
    pub n_star: usize,
    pub gamma_max_star: f64,
    pub bound_lower: f64,
    pub bound_upper: f64,
    pub certificate_pass: bool,
    pub tail_pass: bool,
    pub uniform_lower: f64,
    pub uniform_upper: Option<f64>,
    pub uniform_pass: bool,
}

/// Relative slack used when comparing gaps against their certificates.
pub const GAP_SLACK: f64 = 1e-10;

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo - GAP_SLACK * lo.abs().max(1.0) && v <= hi + GAP_SLACK * hi.abs().max(1.0)
}

pub fn gap_report(sys: &EigenSystem) -> Result<GapReport> {
    if sys.count() < 2 {
        return Err(Error::InvalidParams("gap report needs N >= 2".into()));
    }
    let a = sys.params.alpha;
    let nu = sys.derived.nu;
    let sq: Vec<f64> = sys.lambdas.iter().map(|l| l.sqrt()).collect();
    let gaps: Vec<f64> = sq.windows(2).map(|w| w[1] - w[0]).collect();
    let gamma_min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma_max = gaps.iter().copied().fold(0.0, f64::max);
    let half = (2.0 - a) / 2.0;
    let j = &sys.zeros.zeros;
    let low = (7.0 * PI * (2.0 - a) / 16.0, PI * half);
    let high = (PI * half, half * (j[1] - j[0]));
    let mut pass = true;
    if nu <= 0.5 {
        pass &= gaps.iter().all(|&g| within(g, low.0, low.1));
    }
    if nu >= 0.5 {
        pass &= gaps.iter().all(|&g| within(g, high.0, high.1));
    }
    let (bound_lower, bound_upper) = if nu <= 0.5 { low } else { high };
    let gamma_max_star = 2.0 * PI;
    let tail_pass = gaps
        .iter()
        .enumerate()
        .filter(|(i, _)| (i + 1) as f64 > nu)
        .all(|(_, &g)| g <= gamma_max_star * (1.0 + GAP_SLACK));
    let (uniform_lower, uniform_upper) = if nu <= 0.5 { (7.0 * PI / 16.0, Some(PI)) } else { (PI / 2.0, None) };
    let uniform_pass = gaps.iter().all(|&g| within(g, uniform_lower, uniform_upper.unwrap_or(f64::INFINITY)));
    Ok(GapReport {
        nu,
        regime: Regime::of(nu),
        gaps,
        gamma_min,
        gamma_max,
        n_star: nu.floor() as usize + 1,
        gamma_max_star,
        bound_lower,
        bound_upper,
        certificate_pass: pass,
        tail_pass,
        uniform_lower,
        uniform_upper,
        uniform_pass,
    })
}

/// Stationary profile used to lift the boundary datum.
///
/// Right: `p(x) = x^{q_r}` with `(x^α p')' + μ x^{α−2} p = 0`, `p(1) = 1`.
/// Left: `p(x) = 1 − x^{q_l}` with `[x^α (x^γ p)']' + μ x^{α+γ−2} p = 0`, `p(0) = 1`.
pub fn eval_profile(params: &ProblemParams, side: Side, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0,1], got {x}")));
    }
    let d = derive_params_for(params, side)?;
    Ok(match side {
        Side::Right => x.powf(d.q_right),
        Side::Left => 1.0 - x.powf(d.q_left),
    })
}

/// The lift `ℓ(x)` multiplying H(t): `p/p(1)` on the right, `x^γ p/p(0)` on the left.
pub fn eval_lift(params: &ProblemParams, side: Side, x: f64) -> Result<f64> {
    let p = eval_profile(params, side, x)?;
    Ok(match side {
        Side::Right => p,
        Side::Left => {
            let g = derive_params(params).gamma;
            if x == 0.0 {
                if g == 0.0 {
                    p
                } else if g > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                x.powf(g) * p
            }
        }
    })
}

/// Relative finite-difference residual of the profile ODE at x, using
/// fifth-order-accurate stencils with step h on `w = p` (right) or
/// `w = x^γ p` (left), both of which satisfy `(x^α w')' + μ x^{α−2} w = 0`.
pub fn profile_ode_residual(params: &ProblemParams, side: Side, x: f64, h: f64) -> Result<f64> {
    if !(x - 2.0 * h > 0.0 && x + 2.0 * h <= 1.0) {
        return Err(Error::Domain("stencil leaves (0,1]".into()));
    }
    let a = params.alpha;
    let w = |t: f64| eval_lift(params, side, t);
    let (m2, m1, z, p1, p2) = (w(x - 2.0 * h)?, w(x - h)?, w(x)?, w(x + h)?, w(x + 2.0 * h)?);
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
    let t1 = x.powf(a) * d2;
    let t2 = a * x.powf(a - 1.0) * d1;
    let t3 = params.mu * x.powf(a - 2.0) * z;
    // include the flux x^α w' / x so that vanishing terms do not blow the ratio up
    let scale = t1.abs() + t2.abs() + t3.abs() + (x.powf(a - 1.0) * d1).abs();
    let r = t1 + t2 + t3;
    Ok(if scale == 0.0 { r.abs() } else { r.abs() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classical(n: usize) -> EigenSystem {
        eigen_system(&ProblemParams::new(0.0, 0.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn derived_parameters() {
        let d = derive_params(&ProblemParams::new(0.0, 0.0, 1.0).unwrap());
        assert!((d.nu - 0.5).abs() < 1e-15);
        assert_eq!(d.gamma, 0.0);
        let d = derive_params(&ProblemParams::new(0.0, 0.25, 1.0).unwrap());
        assert_eq!(d.nu, 0.0);
        assert_eq!(d.gamma, 0.5);
        for &a in &[0.0, 0.2, 0.5, 0.9] {
            for &mu in &[-3.0, -0.5, 0.0, 0.5 * mu_critical(a)] {
                let d = derive_params(&ProblemParams::new(a, mu, 1.0).unwrap());
                assert!((d.nu * (2.0 - a) / 2.0 - (d.mu_crit - mu).sqrt()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(1.0, 0.0, 1.0).is_err());
        assert!(ProblemParams::new(-0.1, 0.0, 1.0).is_err());
        assert!(ProblemParams::new(0.0, 0.3, 1.0).is_err());
        assert!(ProblemParams::new(0.0, 0.0, 0.0).is_err());
        let crit = ProblemParams::new(0.4, mu_critical(0.4), 1.0).unwrap();
        assert!(derive_params_for(&crit, Side::Right).is_ok());
        assert!(matches!(derive_params_for(&crit, Side::Left), Err(Error::CriticalPotential { .. })));
    }

    #[test]
    fn nu_and_gamma_monotone_in_mu() {
        for &a in &[0.0, 0.3, 0.7] {
            let mus: Vec<f64> = (0..20).map(|i| mu_critical(a) - 0.5 * i as f64).collect();
            let ds: Vec<DerivedParams> =
                mus.iter().map(|&m| derive_params(&ProblemParams::new(a, m, 1.0).unwrap())).collect();
            for w in ds.windows(2) {
                // mus decrease along the list
                assert!(w[1].nu > w[0].nu);
                assert!(w[1].gamma < w[0].gamma);
            }
        }
    }

    #[test]
    fn regime_boundary_round_trip() {
        for &a in &[0.0, 0.1, 0.45, 0.8] {
            let mu = regime_boundary_mu(a);
            let d = derive_params(&ProblemParams::new(a, mu, 1.0).unwrap());
            assert!((d.nu - 0.5).abs() < 1e-14, "alpha={a}");
        }
    }

    #[test]
    fn classical_spectrum() {
        let s = classical(3);
        for k in 0..3 {
            let kf = (k + 1) as f64;
            assert!((s.lambdas[k] / (kf * kf * PI * PI) - 1.0).abs() < 1e-13);
            assert!((s.trace_right[k].abs() - 2f64.sqrt() * kf * PI).abs() < 1e-12);
            let r = s.eval_left_trace(k + 1).unwrap();
            assert!((r - 2f64.sqrt() * kf * PI).abs() < 1e-8);
        }
        for k in 1..=3 {
            for &x in &[0.25, 0.5, 0.75] {
                let want = 2f64.sqrt() * (k as f64 * PI * x).sin();
                assert!((s.eval_eigenfunction(k, x).unwrap() - want).abs() < 1e-10);
            }
            assert!(s.eval_eigenfunction(k, 1.0).unwrap().abs() < 1e-12);
        }
        assert!((s.eval_eigenfunction(2, 0.25).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(s.eval_eigenfunction(4, 0.5).is_err());
        assert!(s.eval_eigenfunction(0, 0.5).is_err());
    }

    #[test]
    fn right_trace_sign_alternates() {
        let s = eigen_system(&ProblemParams::new(0.4, -2.0, 1.0).unwrap(), 8).unwrap();
        for (k, t) in s.trace_right.iter().enumerate() {
            let expected = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(t.signum(), expected);
        }
    }

    #[test]
    fn right_trace_matches_finite_difference() {
        for &a in &[0.0, 0.35, 0.7] {
            for &mu in &[mu_critical(a), 0.0, -4.0] {
                let s = eigen_system(&ProblemParams::new(a, mu, 1.0).unwrap(), 6).unwrap();
                for k in 1..=6 {
                    let h = 0.01 / s.zeros.zeros[k - 1];
                    let f = |i: f64| s.eval_eigenfunction(k, 1.0 - i * h).unwrap();
                    let fd =
                        (25.0 * f(0.0) - 48.0 * f(1.0) + 36.0 * f(2.0) - 16.0 * f(3.0) + 3.0 * f(4.0)) / (12.0 * h);
                    let t = s.right_trace(k).unwrap();
                    assert!(((fd - t) / t).abs() < 1e-7, "a={a} mu={mu} k={k}");
                }
            }
        }
    }

    #[test]
    fn left_trace_matches_numeric_limit() {
        let s = eigen_system(&ProblemParams::new(0.5, -1.0, 1.0).unwrap(), 5).unwrap();
        for k in 1..=5 {
            let r = s.eval_left_trace(k).unwrap();
            let lim = s.left_trace_numeric_limit(k).unwrap();
            assert!(r > 0.0);
            assert!(((r - lim) / r).abs() < 1e-6, "k={k} r={r} lim={lim}");
        }
        let s = classical(4);
        let ratio = s.left_trace_printed_ratio(1).unwrap();
        // (j/2)^{1/2} / j with j = π
        assert!((ratio - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn critical_system_has_no_left_trace() {
        let s = eigen_system(&ProblemParams::new(0.2, mu_critical(0.2), 1.0).unwrap(), 3).unwrap();
        assert!(s.trace_left.is_none());
        assert!(s.eval_left_trace(1).is_err());
        assert!(s.left_trace_numeric_limit(1).is_err());
    }

    #[test]
    fn orthonormal_eigenfunctions() {
        for &(a, mu) in &[(0.0, 0.0), (0.5, 0.05), (0.3, -3.0)] {
            let s = eigen_system(&ProblemParams::new(a, mu, 1.0).unwrap(), 12).unwrap();
            let g = s.orthonormality_gram(12).unwrap();
            for i in 0..12 {
                for j in 0..12 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i][j] - want).abs() < 1e-8, "a={a} mu={mu} ({i},{j}) {}", g[i][j]);
                }
            }
        }
    }

    #[test]
    fn classical_gaps_are_pi() {
        let r = gap_report(&classical(30)).unwrap();
        assert!(r.gaps.iter().all(|g| (g - PI).abs() < 1e-12));
        assert!(r.certificate_pass && r.tail_pass && r.uniform_pass);
        assert_eq!(r.n_star, 1);
    }

    #[test]
    fn low_order_gap_certificate() {
        let s = eigen_system(&ProblemParams::new(0.5, 0.05, 1.0).unwrap(), 60).unwrap();
        assert!(s.derived.nu <= 0.5);
        let r = gap_report(&s).unwrap();
        assert_eq!(r.regime, Regime::LowOrder);
        assert!(r.certificate_pass);
        let lam1 = s.lambdas[0];
        assert!((9.0 * PI * PI / 64.0..=PI * PI).contains(&lam1));
    }

    #[test]
    fn strong_potential_tail_gaps() {
        let s = eigen_system(&ProblemParams::new(0.0, -100.0, 1.0).unwrap(), 60).unwrap();
        let r = gap_report(&s).unwrap();
        assert!(r.tail_pass && r.certificate_pass);
        assert!(r.n_star == s.derived.nu.floor() as usize + 1);
    }

    #[test]
    fn profiles() {
        for &(a, mu) in &[(0.0, 0.0), (0.3, -2.0), (0.6, 0.01), (0.0, -20.0)] {
            let p = ProblemParams::new(a, mu, 1.0).unwrap();
            assert_eq!(eval_profile(&p, Side::Right, 0.0).unwrap(), 0.0);
            assert_eq!(eval_profile(&p, Side::Right, 1.0).unwrap(), 1.0);
            assert_eq!(eval_profile(&p, Side::Left, 0.0).unwrap(), 1.0);
            assert_eq!(eval_profile(&p, Side::Left, 1.0).unwrap(), 0.0);
            for i in 1..=9 {
                let x = 0.1 * i as f64;
                for side in [Side::Right, Side::Left] {
                    let r = profile_ode_residual(&p, side, x, 1e-3).unwrap();
                    assert!(r < 1e-6, "a={a} mu={mu} x={x} {side} {r}");
                }
            }
        }
        let p = ProblemParams::new(0.0, 0.0, 1.0).unwrap();
        assert!((eval_profile(&p, Side::Right, 0.37).unwrap() - 0.37).abs() < 1e-15);
    }
}
