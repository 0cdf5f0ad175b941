//! Minimal-norm biorthogonal families to `{e^{λ_n t}}_{n=0..N}` on (0,T),
//! and the closed-form norm bounds used for shape comparisons.
//!
//! Elements are expanded in the shifted basis `e_n(t) = e^{λ_n (t−T)}`, whose
//! Gram matrix `G̃_{ij} = (1 − e^{−(λ_i+λ_j)T})/(λ_i+λ_j)` has entries in (0, T].
//! Row m of the coefficient matrix solves `G̃ c_m = e^{−λ_m T} e_m`, which is
//! `∫₀ᵀ σ_m e^{λ_n t} dt = δ_{mn}` multiplied through by `e^{−λ_n T}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dd::{DoubleDouble, Scalar};
use crate::error::{Error, Result};
use crate::linalg::{norm1, residual, PivotedCholesky};
use crate::quadrature::{panels_graded_right, GaussLegendre};
use crate::specfun::ln_gamma;

/// Arithmetic used for the Gram solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Base,
    Extended,
}

impl Precision {
    /// Default truncation for this backend.
    pub fn default_n(self) -> usize {
        match self {
            Precision::Base => 12,
            Precision::Extended => 24,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Base => "base",
            Precision::Extended => "extended",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Precision::Base),
            "extended" => Ok(Precision::Extended),
            other => Err(Error::InvalidParams(format!("unknown precision `{other}`"))),
        }
    }
}

/// `λ_0 = 0 < λ_1 < … < λ_N` together with the horizon T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    lambdas: Vec<f64>,
    horizon: f64,
}

impl ExponentSet {
    pub fn new(lambdas: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParams(format!("T must be positive, got {horizon}")));
        }
        if lambdas.first() != Some(&0.0) {
            return Err(Error::InvalidParams("the first exponent must be 0".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParams("exponents must be finite".into()));
        }
        let top = *lambdas.last().unwrap();
        let min_gap = 1e-8 * top;
        for (i, w) in lambdas.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidParams("exponents must be strictly increasing".into()));
            }
            if w[1] - w[0] < min_gap {
                return Err(Error::DuplicateExponent { index: i, next: i + 1, min_gap });
            }
        }
        Ok(ExponentSet { lambdas, horizon })
    }

    /// Prepends λ₀ = 0 to a list of positive eigenvalues.
    pub fn from_spectrum(positive: &[f64], horizon: f64) -> Result<Self> {
        let mut l = Vec::with_capacity(positive.len() + 1);
        l.push(0.0);
        l.extend_from_slice(positive);
        ExponentSet::new(l, horizon)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of exponentials, N + 1.
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `∫₀ᵀ e^{a(t−T)} e^{b(t−T)} dt = (1 − e^{−(a+b)T})/(a+b)`, equal to T when a+b = 0.
pub fn shifted_overlap<S: Scalar>(a: f64, b: f64, horizon: f64) -> S {
    let s = S::from_f64(a) + S::from_f64(b);
    if s.to_f64() == 0.0 {
        return S::from_f64(horizon);
    }
    let x = s * S::from_f64(horizon);
    -(-x).exp_m1() / s
}

/// `e^{−λT}` in the requested arithmetic.
pub fn decay<S: Scalar>(lambda: f64, horizon: f64) -> S {
    (-(S::from_f64(lambda) * S::from_f64(horizon))).exp()
}

pub fn gram_matrix<S: Scalar>(exponents: &ExponentSet) -> Vec<Vec<S>> {
    let l = exponents.lambdas();
    let t = exponents.horizon();
    l.iter().map(|&a| l.iter().map(|&b| shifted_overlap::<S>(a, b, t)).collect()).collect()
}

/// Family `σ_m(t) = Σ_n c_{m,n} e^{λ_n (t−T)}`, m = 0..N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalFamily {
    pub exponents: ExponentSet,
    pub precision: Precision,
    coeffs: Vec<Vec<DoubleDouble>>,
    pub gram: Vec<Vec<f64>>,
    /// max_{m,n} |∫σ_m e^{λ_n(t−T)} dt − δ_{mn} e^{−λ_m T}| by composite Gauss quadrature.
    pub residual: f64,
    /// max_{m,n} of the same quantity evaluated through the Gram matrix.
    pub algebraic_residual: f64,
    /// ‖G̃‖₁ ‖G̃⁻¹‖₁.
    pub condition_estimate: f64,
}

fn solve_family<S: Scalar>(exponents: &ExponentSet) -> Result<(Vec<Vec<DoubleDouble>>, f64)> {
    let g = gram_matrix::<S>(exponents);
    let n = g.len();
    let chol = PivotedCholesky::factor(&g)?;
    let mut coeffs = Vec::with_capacity(n);
    let mut inv_norm_cols = vec![0.0; n];
    for m in 0..n {
        let mut e = vec![S::zero(); n];
        e[m] = S::one();
        let tau = chol.solve_refined(&g, &e);
        for (col, v) in inv_norm_cols.iter_mut().zip(&tau) {
            *col += v.to_f64().abs();
        }
        let scale = decay::<S>(exponents.lambdas()[m], exponents.horizon());
        coeffs.push(tau.into_iter().map(|v| (v * scale).to_dd()).collect());
    }
    let inv_norm = inv_norm_cols.into_iter().fold(0.0, f64::max);
    Ok((coeffs, norm1(&g) * inv_norm))
}

/// Biorthogonality matrix `∫₀ᵀ σ_m e^{λ_n(t−T)} dt` by 64-point composite Gauss
/// quadrature in double-double arithmetic, on panels graded toward t = T.
pub fn quadrature_biorthogonality(exponents: &ExponentSet, coeffs: &[Vec<DoubleDouble>]) -> Vec<Vec<DoubleDouble>> {
    let l = exponents.lambdas();
    let t_end = exponents.horizon();
    let n = l.len();
    let rate = 2.0 * l[n - 1];
    let first = if rate > 0.0 { 16.0 / rate } else { t_end };
    let panels = panels_graded_right(t_end, first);
    let rule = GaussLegendre::<DoubleDouble>::new(64);
    let mut out = vec![vec![DoubleDouble::ZERO; n]; n];
    let tt = DoubleDouble::from(t_end);
    for &(a, b) in &panels {
        let half = (DoubleDouble::from(b) - DoubleDouble::from(a)) * DoubleDouble::from(0.5);
        let mid = (DoubleDouble::from(b) + DoubleDouble::from(a)) * DoubleDouble::from(0.5);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let s = mid + half * *x - tt;
            let basis: Vec<DoubleDouble> = l.iter().map(|&lam| (DoubleDouble::from(lam) * s).exp()).collect();
            let wt = *w * half;
            for (m, row) in coeffs.iter().enumerate() {
                let mut sigma = DoubleDouble::ZERO;
                for (c, e) in row.iter().zip(&basis) {
                    sigma += *c * *e;
                }
                let ws = wt * sigma;
                for (k, e) in basis.iter().enumerate() {
                    out[m][k] += ws * *e;
                }
            }
        }
    }
    out
}

/// Builds the minimal-norm family by a pivoted Cholesky solve of the shifted
/// Gram system (one refinement step), then re-checks biorthogonality by
/// quadrature. Fails with [`Error::IllConditioned`] when that residual exceeds `tol`.
pub fn build_family(exponents: &ExponentSet, tol: f64, precision: Precision) -> Result<BiorthogonalFamily> {
    let solved = match precision {
        Precision::Base => solve_family::<f64>(exponents),
        Precision::Extended => solve_family::<DoubleDouble>(exponents),
    };
    let (coeffs, condition_estimate) = solved.map_err(|e| match e {
        Error::IllConditioned { residual, .. } => Error::IllConditioned { residual, condition: f64::INFINITY },
        other => other,
    })?;
    let l = exponents.lambdas();
    let t = exponents.horizon();
    let n = l.len();
    let gram_dd = gram_matrix::<DoubleDouble>(exponents);
    let mut algebraic_residual = 0.0f64;
    for (m, row) in coeffs.iter().enumerate() {
        let mut rhs = vec![DoubleDouble::ZERO; n];
        rhs[m] = decay::<DoubleDouble>(l[m], t);
        for r in residual(&gram_dd, row, &rhs) {
            algebraic_residual = algebraic_residual.max(r.to_f64().abs());
        }
    }
    let q = quadrature_biorthogonality(exponents, &coeffs);
    let mut resid = 0.0f64;
    for (m, row) in q.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let target = if m == k { decay::<DoubleDouble>(l[m], t) } else { DoubleDouble::ZERO };
            resid = resid.max((*v - target).to_f64().abs());
        }
    }
    if !(resid <= tol) {
        return Err(Error::IllConditioned { residual: resid, condition: condition_estimate });
    }
    Ok(BiorthogonalFamily {
        exponents: exponents.clone(),
        precision,
        coeffs,
        gram: gram_dd.iter().map(|r| r.iter().map(|v| v.to_f64()).collect()).collect(),
        residual: resid,
        algebraic_residual,
        condition_estimate,
    })
}

impl BiorthogonalFamily {
    /// N + 1.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, m: usize, n: usize) -> f64 {
        self.coeffs[m][n].to_f64()
    }

    pub fn coeff_dd(&self, m: usize, n: usize) -> DoubleDouble {
        self.coeffs[m][n]
    }

    pub fn row_dd(&self, m: usize) -> &[DoubleDouble] {
        &self.coeffs[m]
    }

    /// σ_m(t), accumulated in double-double.
    pub fn eval_dd(&self, m: usize, t: DoubleDouble) -> DoubleDouble {
        let s = t - DoubleDouble::from(self.exponents.horizon());
        let mut acc = DoubleDouble::ZERO;
        for (c, &lam) in self.coeffs[m].iter().zip(self.exponents.lambdas()) {
            acc += *c * (DoubleDouble::from(lam) * s).exp();
        }
        acc
    }

    pub fn eval(&self, m: usize, t: f64) -> f64 {
        self.eval_dd(m, DoubleDouble::from(t)).to_f64()
    }
}

/// ‖σ_m‖_{L²(0,T)} from `Σ_{ij} c_{mi} c_{mj} G̃_{ij}`.
pub fn family_norms(family: &BiorthogonalFamily) -> Vec<f64> {
    let g = gram_matrix::<DoubleDouble>(&family.exponents);
    family
        .coeffs
        .iter()
        .map(|row| {
            let mut q = DoubleDouble::ZERO;
            for (gi, ci) in g.iter().zip(row) {
                let mut s = DoubleDouble::ZERO;
                for (gij, cj) in gi.iter().zip(row) {
                    s += *gij * *cj;
                }
                q += *ci * s;
            }
            q.to_f64().max(0.0).sqrt()
        })
        .collect()
}

// Integer part with a guard against representation error just below an integer.
fn int_part(x: f64) -> f64 {
    (x + 64.0 * f64::EPSILON * x.abs().max(1.0)).floor()
}

/// Upper norm-bound shape with all universal constants set to 1:
/// `e^{−2λ_m T} e^{√λ_m/γ} e^{1/(γ² T)} (1/T) max{Tγ², 1/(Tγ²)}`.
pub fn upper_bound_shape(exponents: &ExponentSet, gamma_min: f64, m: usize) -> Result<f64> {
    if !(gamma_min > 0.0) {
        return Err(Error::InvalidParams("gamma_min must be positive".into()));
    }
    let lam = *exponents.lambdas().get(m).ok_or(Error::IndexOutOfRange { index: m, len: exponents.len() - 1 })?;
    let t = exponents.horizon();
    let tg = t * gamma_min * gamma_min;
    let ln = -2.0 * lam * t + lam.sqrt() / gamma_min + 1.0 / tg - t.ln() + tg.max(1.0 / tg).ln();
    Ok(ln.exp())
}

/// `𝒞(m, γ, λ₁) = m! 2^{m+[2√λ₁/γ]+1} (m+[2√λ₁/γ]+1)`.
pub fn lower_bound_constant(gamma_max: f64, lambda1: f64, m: usize) -> f64 {
    let i = int_part(2.0 * lambda1.sqrt() / gamma_max);
    let mf = m as f64;
    (ln_gamma(mf + 1.0).unwrap() + (mf + i + 1.0) * std::f64::consts::LN_2).exp() * (mf + i + 1.0)
}

/// `b(T,γ,m) = 1/(𝒞² T) (1/(2γ²T))^{2m} 1/(4γ²T + 1)²`, with c_u = 1.
pub fn lower_bound_b(horizon: f64, gamma_max: f64, lambda1: f64, m: usize) -> Result<f64> {
    if !(gamma_max > 0.0 && lambda1 > 0.0 && m >= 1 && horizon > 0.0) {
        return Err(Error::InvalidParams("lower_bound_b needs T, gamma_max, lambda1 > 0 and m >= 1".into()));
    }
    let c = lower_bound_constant(gamma_max, lambda1, m);
    let g2t = gamma_max * gamma_max * horizon;
    let ln = -2.0 * c.ln() - horizon.ln() - 2.0 * m as f64 * (2.0 * g2t).ln() - 2.0 * (4.0 * g2t + 1.0).ln();
    Ok(ln.exp())
}

const MAX_FACTORIAL_ARG: f64 = 1e15;

fn ln_factorial(n: f64) -> Result<f64> {
    if !(n >= 0.0) || n > MAX_FACTORIAL_ARG {
        return Err(Error::Overflow(format!("factorial argument {n} out of range")));
    }
    ln_gamma(n + 1.0)
}

/// ln b* of the explicit large-order lower bound, with c_u = 1.
pub fn ln_lower_bound_bstar(
    horizon: f64,
    gamma_max: f64,
    gamma_star: f64,
    n_star: usize,
    lambda1: f64,
    m: usize,
) -> Result<f64> {
    if m == 0 || m > n_star {
        return Err(Error::InvalidParams(format!("need 1 <= m <= N_* (m={m}, N_*={n_star})")));
    }
    if !(gamma_star > 0.0 && gamma_star <= gamma_max) {
        return Err(Error::InvalidParams("need 0 < gamma_max* <= gamma_max".into()));
    }
    if !(horizon > 0.0 && lambda1 > 0.0) {
        return Err(Error::InvalidParams("need T > 0 and lambda1 > 0".into()));
    }
    let ns = n_star as f64;
    let mf = m as f64;
    let sl = 2.0 * lambda1.sqrt();
    let i = int_part(sl / gamma_max);
    let ratio = gamma_max / gamma_star;
    let k_arg = int_part((sl + (ns + mf) * gamma_max) / gamma_star);
    let k = k_arg - ns + 2.0;
    let kp_arg = int_part(ratio * (ns - mf));
    let kp = kp_arg - ns + 2.0;
    let ln_cplus = (ns - 1.0) * ratio.ln() + ln_factorial(ns + mf + i + 1.0)?
        - ln_factorial(mf + i + 1.0)?
        - ln_factorial(k_arg + 1.0)?
        - (2.0 * mf + i + 1.0).ln();
    let ln_cminus =
        (ns - 1.0) * ratio.ln() + ln_factorial(mf - 1.0)? + ln_factorial(ns - mf)? - ln_factorial(1.0 + kp_arg)?;
    let ln_c = -ln_factorial(ns + k + kp + 3.0)? + 2.0 * (ns - 1.0) * gamma_star.ln() - ln_cplus - ln_cminus;
    let tg = horizon * gamma_star * gamma_star;
    let v = ln_c + 0.5 * (1.0 + horizon * lambda1).ln() - 0.5 * horizon.ln() + (k + kp + 2.0) * tg.ln()
        - (ns + k + kp + 3.0) * (1.0 + tg).ln();
    if !v.is_finite() {
        return Err(Error::Overflow("b* is not representable".into()));
    }
    Ok(v)
}

/// b*, see [`ln_lower_bound_bstar`].
pub fn lower_bound_bstar(
    horizon: f64,
    gamma_max: f64,
    gamma_star: f64,
    n_star: usize,
    lambda1: f64,
    m: usize,
) -> Result<f64> {
    Ok(ln_lower_bound_bstar(horizon, gamma_max, gamma_star, n_star, lambda1, m)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn classical(n: usize, t: f64) -> ExponentSet {
        let l: Vec<f64> = (1..=n).map(|k| (k as f64 * PI).powi(2)).collect();
        ExponentSet::from_spectrum(&l, t).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(ExponentSet::new(vec![1.0, 2.0], 1.0).is_err());
        assert!(ExponentSet::new(vec![0.0, 2.0, 1.0], 1.0).is_err());
        assert!(ExponentSet::new(vec![0.0, 1.0], 0.0).is_err());
        assert!(matches!(
            ExponentSet::new(vec![0.0, 1.0, 1.0 + 1e-12], 1.0),
            Err(Error::DuplicateExponent { index: 1, next: 2, .. })
        ));
    }

    #[test]
    fn single_exponential_gives_constant() {
        for &t in &[0.3, 1.0, 7.0] {
            let e = ExponentSet::new(vec![0.0], t).unwrap();
            let f = build_family(&e, 1e-12, Precision::Base).unwrap();
            assert!((f.coeff(0, 0) - 1.0 / t).abs() < 1e-12 / t);
            assert!((family_norms(&f)[0] - 1.0 / t.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_against_hand_inverse() {
        let e = ExponentSet::new(vec![0.0, 1.0], 1.0).unwrap();
        let g00 = 1.0;
        let g01 = 1.0 - (-1f64).exp();
        let g11 = (1.0 - (-2f64).exp()) / 2.0;
        let det = g00 * g11 - g01 * g01;
        let d1 = (-1f64).exp();
        // rows of G⁻¹ scaled by e^{-λ_m T}
        let c0 = [g11 / det, -g01 / det];
        let c1 = [-g01 / det * d1, g00 / det * d1];
        for p in [Precision::Base, Precision::Extended] {
            let f = build_family(&e, 1e-12, p).unwrap();
            for n in 0..2 {
                assert!((f.coeff(0, n) - c0[n]).abs() < 1e-12);
                assert!((f.coeff(1, n) - c1[n]).abs() < 1e-12);
            }
            // ∫σ_m e^{λ_n t} dt = δ_mn from the closed-form primitives
            for m in 0..2 {
                let i0 = f.coeff(m, 0) * 1.0 + f.coeff(m, 1) * (1.0 - d1);
                let i1 = f.coeff(m, 0) * (1f64.exp() - 1.0) + f.coeff(m, 1) * (1f64.exp() - d1) / 2.0;
                assert!((i0 - if m == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
                assert!((i1 - if m == 1 { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classical_family_residual() {
        let f = build_family(&classical(10, 1.0), 1e-10, Precision::Base).unwrap();
        assert!(f.residual <= 1e-10);
        assert!(f.condition_estimate > 1.0);
        // zero-mean elements for m >= 1
        for m in 1..f.len() {
            let mean: f64 = (0..f.len()).map(|n| f.coeff(m, n) * f.gram[n][0]).sum();
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn extended_reaches_larger_truncation() {
        let f = build_family(&classical(20, 1.0), 1e-10, Precision::Extended).unwrap();
        assert!(f.residual <= 1e-10, "{}", f.residual);
    }

    #[test]
    fn tight_tolerance_fails_with_diagnostics() {
        match build_family(&classical(12, 0.25), 1e-40, Precision::Base) {
            Err(Error::IllConditioned { residual, condition }) => {
                assert!(residual > 0.0 && condition > 1e6);
            }
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }

    #[test]
    fn norms_shrink_with_horizon() {
        let base: Vec<f64> = (1..=5).map(|k| (k as f64 * PI).powi(2)).collect();
        let norms: Vec<Vec<f64>> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&t| {
                let e = ExponentSet::from_spectrum(&base, t).unwrap();
                family_norms(&build_family(&e, 1e-10, Precision::Extended).unwrap())
            })
            .collect();
        for m in 0..6 {
            assert!(norms[1][m] <= norms[0][m] && norms[2][m] <= norms[1][m], "m={m}");
        }
    }

    #[test]
    fn upper_shape_behaviour() {
        let e = classical(3, 1.0);
        let v = upper_bound_shape(&e, 3.0 * PI / 8.0, 1).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let big = classical(3, 5.0);
        let vals: Vec<f64> = (0..4).map(|m| upper_bound_shape(&big, PI, m).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        let at = |t: f64| upper_bound_shape(&ExponentSet::from_spectrum(&[PI * PI], t).unwrap(), PI, 1).unwrap();
        let ts = [0.1, 0.03, 0.01, 0.003];
        assert!(ts.windows(2).all(|w| at(w[1]) > at(w[0])));
        assert!(at(0.003).ln() > 0.9 / (PI * PI * 0.003));
    }

    #[test]
    fn b_constant_hand_value() {
        assert!((lower_bound_constant(PI, PI * PI, 1) - 64.0).abs() < 1e-12);
        let b = lower_bound_b(1.0, PI, PI * PI, 1).unwrap();
        let g2 = PI * PI;
        let want = 1.0 / (64.0f64.powi(2)) * (1.0 / (2.0 * g2)).powi(2) / (4.0 * g2 + 1.0).powi(2);
        assert!((b / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn b_decays() {
        let v: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&t| lower_bound_b(t, PI, PI * PI, 2).unwrap()).collect();
        assert!(v[1] < v[0] && v[2] < v[1]);
        for &t in &[0.1, 0.5, 1.0] {
            let v: Vec<f64> = (1..=5).map(|m| lower_bound_b(t, PI, PI * PI, m).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] < w[0]), "T={t}");
        }
    }

    #[test]
    fn bstar_at_boundary_order() {
        let v = lower_bound_bstar(1.0, 2.0 * PI, 2.0 * PI, 1, PI * PI, 1).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(lower_bound_bstar(1.0, PI, 2.0 * PI, 1, PI * PI, 1).is_err());
        assert!(lower_bound_bstar(1.0, 2.0 * PI, 2.0 * PI, 1, PI * PI, 2).is_err());
    }
}
