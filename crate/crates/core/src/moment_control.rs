//! Boundary controls from the biorthogonal family.
//!
//! Right end: `K = −Σ_k (λ_k/Φ'_k(1)) ρ_k σ_k`. Left end: `K = Σ_k (λ_k/r_k) ρ_k σ_k`.
//! In both cases `H(t) = ∫₀ᵗ K`, and K is kept as an exponential sum
//! `Σ_n κ_n e^{λ_n(t−T)}` so that every time integral has a closed form.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::biortho::{decay, shifted_overlap, BiorthogonalFamily};
use crate::dd::{DoubleDouble, Scalar};
use crate::error::{Error, Result};
use crate::quadrature::{panels_graded_right, GaussLegendre};
use crate::spectrum::{EigenSystem, Side};

/// Default number of uniform time samples stored with a control.
pub const DEFAULT_TIME_SAMPLES: usize = 2048;

/// Initial state as coefficients against Φ_1..Φ_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    pub coeffs: Vec<f64>,
    pub tag: Option<String>,
}

impl InitialDatum {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("initial datum has non-finite coefficients".into()));
        }
        Ok(InitialDatum { coeffs, tag: None })
    }

    pub fn zero(n: usize) -> Self {
        InitialDatum { coeffs: vec![0.0; n], tag: Some("zero".into()) }
    }

    /// Φ_m expressed in n modes.
    pub fn mode(m: usize, n: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::IndexOutOfRange { index: m, len: n });
        }
        let mut c = vec![0.0; n];
        c[m - 1] = 1.0;
        Ok(InitialDatum { coeffs: c, tag: Some(format!("phi_{m}")) })
    }

    /// Uniformly distributed direction on the unit sphere of R^n.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return InitialDatum { coeffs: c.iter().map(|v| v / norm).collect(), tag: Some("random".into()) };
            }
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.coeffs.get(k.wrapping_sub(1)).copied().unwrap_or(0.0)
    }
}

/// One row of the sampled control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub t: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlNorms {
    pub k_l2: f64,
    pub h_l2: f64,
    pub h_h1: f64,
}

/// `∫₀ᵗ e^{a(s−T)} e^{−b(t−s)} ds = e^{a(t−T)} (1 − e^{−(a+b)t})/(a+b)`.
fn partial_overlap(a: f64, b: f64, t: DoubleDouble, horizon: f64) -> DoubleDouble {
    let s = DoubleDouble::from(a) + DoubleDouble::from(b);
    let front = (DoubleDouble::from(a) * (t - DoubleDouble::from(horizon))).exp();
    if s.hi == 0.0 {
        return front * t;
    }
    front * (-(-(s * t)).exp_m1()) / s
}

/// `∫₀ᵀ t e^{λ(t−T)} dt`.
fn ramp_moment(lambda: f64, horizon: f64) -> DoubleDouble {
    let t = DoubleDouble::from(horizon);
    if lambda == 0.0 {
        return t * t * DoubleDouble::from(0.5);
    }
    let l = DoubleDouble::from(lambda);
    t / l - shifted_overlap::<DoubleDouble>(0.0, lambda, horizon) / l
}

/// Synthesized control `K = H'` with its exact exponential-sum form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub side: Side,
    pub horizon: f64,
    /// λ_0 = 0, λ_1, …, λ_N.
    pub lambdas: Vec<f64>,
    expsum: Vec<DoubleDouble>,
    pub grid: Vec<ControlSample>,
    pub norms: ControlNorms,
}

impl ControlSignal {
    /// Builds a signal directly from exponential-sum coefficients.
    pub fn from_expsum(
        side: Side,
        horizon: f64,
        lambdas: Vec<f64>,
        expsum: Vec<DoubleDouble>,
        samples: usize,
    ) -> Result<Self> {
        if lambdas.len() != expsum.len() || lambdas.first() != Some(&0.0) {
            return Err(Error::Inconsistent("expsum and exponent lists disagree".into()));
        }
        let mut s = ControlSignal {
            side,
            horizon,
            lambdas,
            expsum,
            grid: Vec::new(),
            norms: ControlNorms { k_l2: 0.0, h_l2: 0.0, h_h1: 0.0 },
        };
        s.norms = s.compute_norms();
        s.grid = s.sample(samples);
        Ok(s)
    }

    /// N, the number of controlled modes.
    pub fn modes(&self) -> usize {
        self.lambdas.len() - 1
    }

    pub fn expsum(&self) -> Vec<f64> {
        self.expsum.iter().map(|v| v.to_f64()).collect()
    }

    pub fn expsum_dd(&self) -> &[DoubleDouble] {
        &self.expsum
    }

    pub fn eval_k_dd(&self, t: DoubleDouble) -> DoubleDouble {
        let s = t - DoubleDouble::from(self.horizon);
        let mut acc = DoubleDouble::ZERO;
        for (c, &l) in self.expsum.iter().zip(&self.lambdas) {
            acc += *c * (DoubleDouble::from(l) * s).exp();
        }
        acc
    }

    pub fn eval_k(&self, t: f64) -> f64 {
        self.eval_k_dd(DoubleDouble::from(t)).to_f64()
    }

    /// `∫₀ᵗ K(s) e^{−b(t−s)} ds`; b = 0 gives H(t).
    pub fn damped_integral_dd(&self, b: f64, t: DoubleDouble) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for (c, &l) in self.expsum.iter().zip(&self.lambdas) {
            acc += *c * partial_overlap(l, b, t, self.horizon);
        }
        acc
    }

    pub fn eval_h_dd(&self, t: DoubleDouble) -> DoubleDouble {
        self.damped_integral_dd(0.0, t)
    }

    pub fn eval_h(&self, t: f64) -> f64 {
        self.eval_h_dd(DoubleDouble::from(t)).to_f64()
    }

    /// H(T).
    pub fn h_end(&self) -> f64 {
        self.eval_h(self.horizon)
    }

    /// `∫₀ᵀ K e^{λ(t−T)} dt`.
    pub fn k_moment(&self, lambda: f64) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for (c, &l) in self.expsum.iter().zip(&self.lambdas) {
            acc += *c * shifted_overlap::<DoubleDouble>(l, lambda, self.horizon);
        }
        acc
    }

    /// `∫₀ᵀ H e^{λ(t−T)} dt`, integrating each term of H directly.
    pub fn h_moment(&self, lambda: f64) -> DoubleDouble {
        let t = self.horizon;
        let g0 = shifted_overlap::<DoubleDouble>(0.0, lambda, t);
        let mut acc = DoubleDouble::ZERO;
        for (c, &l) in self.expsum.iter().zip(&self.lambdas) {
            let term = if l == 0.0 {
                ramp_moment(lambda, t)
            } else {
                (shifted_overlap::<DoubleDouble>(l, lambda, t) - decay::<DoubleDouble>(l, t) * g0)
                    / DoubleDouble::from(l)
            };
            acc += *c * term;
        }
        acc
    }

    fn compute_norms(&self) -> ControlNorms {
        let t = self.horizon;
        let n = self.lambdas.len();
        let g = |a: f64, b: f64| shifted_overlap::<DoubleDouble>(a, b, t);
        let mut k2 = DoubleDouble::ZERO;
        for i in 0..n {
            for j in 0..n {
                k2 += self.expsum[i] * self.expsum[j] * g(self.lambdas[i], self.lambdas[j]);
            }
        }
        // H = κ₀ t + A + Σ_{n≥1} h_n e^{λ_n(t−T)}, h_n = κ_n/λ_n, A = −Σ h_n e^{−λ_n T}
        let tt = DoubleDouble::from(t);
        let k0 = self.expsum[0];
        let h: Vec<DoubleDouble> = (1..n).map(|i| self.expsum[i] / DoubleDouble::from(self.lambdas[i])).collect();
        let mut a = DoubleDouble::ZERO;
        for (hi, &l) in h.iter().zip(&self.lambdas[1..]) {
            a -= *hi * decay::<DoubleDouble>(l, t);
        }
        let third = DoubleDouble::ONE / DoubleDouble::from(3.0);
        let two = DoubleDouble::from(2.0);
        let mut h2 = k0 * k0 * tt * tt * tt * third + a * a * tt + k0 * a * tt * tt;
        for (i, (hi, &li)) in h.iter().zip(&self.lambdas[1..]).enumerate() {
            h2 += two * k0 * *hi * ramp_moment(li, t);
            h2 += two * a * *hi * g(0.0, li);
            for (hj, &lj) in h.iter().zip(&self.lambdas[1..]).take(i) {
                h2 += two * *hi * *hj * g(li, lj);
            }
            h2 += *hi * *hi * g(li, li);
        }
        let k_l2 = k2.to_f64().max(0.0).sqrt();
        let h_l2 = h2.to_f64().max(0.0).sqrt();
        ControlNorms { k_l2, h_l2, h_h1: (k_l2 * k_l2 + h_l2 * h_l2).sqrt() }
    }

    fn sample(&self, samples: usize) -> Vec<ControlSample> {
        if samples == 0 {
            return Vec::new();
        }
        let last = (samples - 1).max(1) as f64;
        (0..samples)
            .map(|i| {
                let t = if i + 1 == samples && samples > 1 { self.horizon } else { self.horizon * i as f64 / last };
                let td = DoubleDouble::from(t);
                ControlSample {
                    t,
                    k: self.eval_k_dd(td).to_f64(),
                    h: if i == 0 { 0.0 } else { self.eval_h_dd(td).to_f64() },
                }
            })
            .collect()
    }
}

fn check_pairing(sys: &EigenSystem, family: &BiorthogonalFamily, u0: &InitialDatum) -> Result<usize> {
    let n = family.len() - 1;
    if n > sys.count() {
        return Err(Error::Inconsistent(format!("family has {n} modes but the system only {}", sys.count())));
    }
    let l = family.exponents.lambdas();
    if l[1..] != sys.lambdas[..n] {
        return Err(Error::Inconsistent("family exponents do not match the spectrum".into()));
    }
    if (family.exponents.horizon() - sys.params.horizon).abs() > 1e-15 * sys.params.horizon {
        return Err(Error::Inconsistent("family horizon differs from T".into()));
    }
    if u0.len() != n {
        return Err(Error::Inconsistent(format!("datum has {} modes, family {n}", u0.len())));
    }
    Ok(n)
}

/// Per-mode weights a_m with K = Σ a_m σ_m.
fn mode_weights(sys: &EigenSystem, side: Side, u0: &InitialDatum, n: usize) -> Result<Vec<f64>> {
    let traces: Vec<f64> = match side {
        Side::Right => sys.trace_right[..n].to_vec(),
        Side::Left => {
            sys.trace_left.as_ref().ok_or(Error::CriticalPotential { mu_crit: sys.derived.mu_crit })?[..n].to_vec()
        }
    };
    Ok((0..n)
        .map(|i| {
            let w = sys.lambdas[i] * u0.coeffs[i] / traces[i];
            match side {
                Side::Right => -w,
                Side::Left => w,
            }
        })
        .collect())
}

/// Control acting at either end, sampled on `samples` uniform points.
pub fn synthesize(
    sys: &EigenSystem,
    side: Side,
    family: &BiorthogonalFamily,
    u0: &InitialDatum,
    samples: usize,
) -> Result<ControlSignal> {
    let n = check_pairing(sys, family, u0)?;
    let weights = mode_weights(sys, side, u0, n)?;
    let mut expsum = vec![DoubleDouble::ZERO; n + 1];
    for (m, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let wd = DoubleDouble::from(w);
        for (e, c) in expsum.iter_mut().zip(family.row_dd(m + 1)) {
            *e += wd * *c;
        }
    }
    ControlSignal::from_expsum(side, sys.params.horizon, family.exponents.lambdas().to_vec(), expsum, samples)
}

/// Control at x = 1.
pub fn synthesize_right(sys: &EigenSystem, family: &BiorthogonalFamily, u0: &InitialDatum) -> Result<ControlSignal> {
    synthesize(sys, Side::Right, family, u0, DEFAULT_TIME_SAMPLES)
}

/// Control at x = 0; rejected at the critical potential.
pub fn synthesize_left(sys: &EigenSystem, family: &BiorthogonalFamily, u0: &InitialDatum) -> Result<ControlSignal> {
    synthesize(sys, Side::Left, family, u0, DEFAULT_TIME_SAMPLES)
}

/// Moment-problem diagnostics for a control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentResiduals {
    pub side: Side,
    /// `τ_k ∫H e^{λ_k(t−T)} dt − e^{−λ_k T} ρ_k`, τ_k = Φ'_k(1) or −r_k.
    pub scaled: Vec<f64>,
    /// `τ_k ∫H e^{λ_k t} dt − ρ_k`; overflows to ±inf once λ_k T exceeds ~709.
    pub literal: Vec<f64>,
    /// The scaled residuals with the integral taken by quadrature.
    pub quadrature_scaled: Vec<f64>,
    /// max_k |τ_k| |closed form − quadrature| relative to max(‖ρ‖, max_k |τ_k ∫H e^{λ_k(t−T)}|).
    pub disagreement: f64,
}

impl MomentResiduals {
    pub fn max_scaled(&self) -> f64 {
        self.scaled.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `∫₀ᵀ H e^{λ_k(t−T)} dt` for every λ_k of the signal, by 64-point composite Gauss in double-double.
pub fn h_moments_quadrature(signal: &ControlSignal, lambdas: &[f64]) -> Vec<DoubleDouble> {
    let t_end = signal.horizon;
    let top = signal.lambdas.iter().chain(lambdas).fold(0.0f64, |m, &v| m.max(v));
    let first = if top > 0.0 { 16.0 / (2.0 * top) } else { t_end };
    let rule = GaussLegendre::<DoubleDouble>::new(64);
    let mut out = vec![DoubleDouble::ZERO; lambdas.len()];
    let tt = DoubleDouble::from(t_end);
    for (a, b) in panels_graded_right(t_end, first) {
        let half = (DoubleDouble::from(b) - DoubleDouble::from(a)) * DoubleDouble::from(0.5);
        let mid = (DoubleDouble::from(b) + DoubleDouble::from(a)) * DoubleDouble::from(0.5);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let t = mid + half * *x;
            let wh = *w * half * signal.eval_h_dd(t);
            for (o, &l) in out.iter_mut().zip(lambdas) {
                *o += wh * (DoubleDouble::from(l) * (t - tt)).exp();
            }
        }
    }
    out
}

fn side_traces(sys: &EigenSystem, side: Side, n: usize) -> Result<Vec<f64>> {
    Ok(match side {
        Side::Right => sys.trace_right[..n].to_vec(),
        Side::Left => sys.trace_left.as_ref().ok_or(Error::CriticalPotential { mu_crit: sys.derived.mu_crit })?[..n]
            .iter()
            .map(|r| -r)
            .collect(),
    })
}

/// Residuals of `Φ'_k(1) ∫H e^{λ_k t} = ρ_k` (right) or `−r_k ∫H e^{λ_k t} = ρ_k` (left), k ≤ N.
pub fn moment_residuals(sys: &EigenSystem, signal: &ControlSignal, u0: &InitialDatum) -> Result<MomentResiduals> {
    let n = signal.modes();
    if n > sys.count() || u0.len() != n || signal.lambdas[1..] != sys.lambdas[..n] {
        return Err(Error::Inconsistent("signal, system and datum disagree".into()));
    }
    let tau = side_traces(sys, signal.side, n)?;
    let t = signal.horizon;
    let lam = &sys.lambdas[..n];
    let closed: Vec<DoubleDouble> = lam.iter().map(|&l| signal.h_moment(l)).collect();
    let quad = h_moments_quadrature(signal, lam);
    let mut scaled = Vec::with_capacity(n);
    let mut literal = Vec::with_capacity(n);
    let mut quadrature_scaled = Vec::with_capacity(n);
    let mut diff = 0.0f64;
    let mut scale = u0.norm();
    for k in 0..n {
        let tk = DoubleDouble::from(tau[k]);
        let rho = DoubleDouble::from(u0.coeffs[k]);
        let d = decay::<DoubleDouble>(lam[k], t);
        let moment = tk * closed[k];
        scaled.push((moment - d * rho).to_f64());
        quadrature_scaled.push((tk * quad[k] - d * rho).to_f64());
        literal.push(if closed[k].hi == 0.0 {
            -u0.coeffs[k]
        } else {
            (moment * (DoubleDouble::from(lam[k]) * DoubleDouble::from(t)).exp() - rho).to_f64()
        });
        diff = diff.max((tk * (closed[k] - quad[k])).to_f64().abs());
        scale = scale.max(moment.to_f64().abs());
    }
    let disagreement = if scale > 0.0 { diff / scale } else { diff };
    Ok(MomentResiduals { side: signal.side, scaled, literal, quadrature_scaled, disagreement })
}
