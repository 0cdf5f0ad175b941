//! Controllability cost of the series controls and the analytic bound shapes.
//!
//! Universal constants are set to 1 throughout, so shapes are only comparable up
//! to grid-wide factors. Everything is evaluated in log space first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biortho::{build_family, ln_lower_bound_bstar, lower_bound_b, BiorthogonalFamily, ExponentSet, Precision};
use crate::error::{Error, Result};
use crate::moment_control::{moment_residuals, synthesize, InitialDatum};
use crate::specfun::{bessel_zeros, ln_gamma};
use crate::spectrum::{derive_params, eigen_system, gap_report, mu_critical, EigenSystem, ProblemParams, Regime, Side};

/// Canonical modes included in the default batch.
pub const BATCH_MODES: usize = 5;
/// Random unit data in the default batch.
pub const BATCH_RANDOM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatumCost {
    pub tag: String,
    pub cost: f64,
    /// max_k of the scaled moment residual divided by ‖u0‖.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: ProblemParams,
    pub side: Side,
    pub nu: f64,
    pub regime: Regime,
    pub modes: usize,
    pub precision: Precision,
    /// ‖H‖_{H¹} for u0 = Φ₁.
    pub cost_phi1: f64,
    /// max over the batch of ‖H‖_{H¹}/‖u0‖.
    pub measured_cost: f64,
    pub per_datum: Vec<DatumCost>,
    pub upper_shape: f64,
    pub lower_shape: f64,
    /// b(T, γ_max, 1) with the spectral gap data of the system.
    pub bound_b: Option<f64>,
    /// ln b*(T, γ_max, 2π, N_*, λ₁, 1) in the large-order regime.
    pub ln_bound_bstar: Option<f64>,
    pub max_residual: f64,
    pub condition_estimate: f64,
}

/// Φ₁..Φ₅ (as far as N allows) followed by 8 seeded random unit vectors.
pub fn default_batch(n: usize, seed: u64) -> Vec<InitialDatum> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch: Vec<InitialDatum> = (1..=BATCH_MODES.min(n)).map(|m| InitialDatum::mode(m, n).unwrap()).collect();
    for i in 0..BATCH_RANDOM {
        let mut d = InitialDatum::random_unit(n, &mut rng);
        d.tag = Some(format!("random_{i}"));
        batch.push(d);
    }
    batch
}

fn ln_bracket(params: &ProblemParams) -> (f64, f64) {
    let s = derive_params(params).root();
    let t = params.horizon;
    (s, 1.0 / t + (1.0 + s).ln() - (1.0 + s).powi(2) * t)
}

/// `e^{1/T} [1+√(μ(α)−μ)] e^{−[1+√(μ(α)−μ)]² T}`.
pub fn upper_shape_thm1(params: &ProblemParams) -> f64 {
    ln_bracket(params).1.exp()
}

/// `Γ(1+ν)/(√μ(α)+√(μ(α)−μ))` times the right-end shape.
pub fn upper_shape_thm0(params: &ProblemParams) -> Result<f64> {
    if params.is_critical() {
        return Err(Error::CriticalPotential { mu_crit: mu_critical(params.alpha) });
    }
    let d = derive_params(params);
    let (_, ln) = ln_bracket(params);
    Ok((ln_gamma(1.0 + d.nu)? - (d.mu_crit.sqrt() + d.root()).ln() + ln).exp())
}

/// Upper shape for the given end.
pub fn upper_shape(params: &ProblemParams, side: Side) -> Result<f64> {
    match side {
        Side::Right => Ok(upper_shape_thm1(params)),
        Side::Left => upper_shape_thm0(params),
    }
}

/// Lower shape and the branch it was taken from.
///
/// Right, ν ≤ 1/2: `e^{1/T} e^{−(1+s)²T}`; left, ν ≤ 1/2: `T^{−4} e^{−(1−α)²T} e^{1/T}/(√μ(α)+s)`.
/// For ν > 1/2 both carry `e^{−s^{4/3}(ln s + ln(1/T))}`, with s = √(μ(α)−μ).
pub fn lower_shapes(params: &ProblemParams, side: Side) -> Result<(Regime, f64)> {
    let d = derive_params(params);
    let regime = Regime::of(d.nu);
    let s = d.root();
    let t = params.horizon;
    let base = 1.0 / t - (1.0 + s).powi(2) * t;
    let large = -s.powf(4.0 / 3.0) * (s.ln() - t.ln());
    let ln = match (side, regime) {
        (Side::Right, Regime::LowOrder) => base,
        (Side::Right, Regime::HighOrder) => base + large,
        (Side::Left, _) if params.is_critical() => {
            return Err(Error::CriticalPotential { mu_crit: d.mu_crit });
        }
        (Side::Left, Regime::LowOrder) => {
            -(d.mu_crit.sqrt() + s).ln() - 4.0 * t.ln() - (1.0 - params.alpha).powi(2) * t + 1.0 / t
        }
        (Side::Left, Regime::HighOrder) => -(d.mu_crit.sqrt() + s).ln() + base + large,
    };
    Ok((regime, ln.exp()))
}

/// b with m = 1 and γ taken as the largest of the first N gaps.
pub fn bound_b_for(sys: &EigenSystem) -> Result<f64> {
    let g = gap_report(sys)?;
    lower_bound_b(sys.params.horizon, g.gamma_max, sys.lambdas[0], 1)
}

/// ln b* with m = 1, γ* = 2π and γ_max raised to 2π when the observed gaps are smaller.
pub fn ln_bstar_for(sys: &EigenSystem) -> Result<f64> {
    let g = gap_report(sys)?;
    let gamma_max = g.gamma_max.max(g.gamma_max_star);
    ln_lower_bound_bstar(sys.params.horizon, gamma_max, g.gamma_max_star, g.n_star, sys.lambdas[0], 1)
}

/// Cost of each datum and the worst case over the batch.
pub fn measure_cost(
    sys: &EigenSystem,
    side: Side,
    family: &BiorthogonalFamily,
    batch: &[InitialDatum],
) -> Result<CostReport> {
    let n = family.len() - 1;
    let mut per_datum = Vec::with_capacity(batch.len());
    let mut cost_phi1 = f64::NAN;
    for (i, u0) in batch.iter().enumerate() {
        if u0.len() != n {
            return Err(Error::Inconsistent(format!("datum {i} has {} modes, family {n}", u0.len())));
        }
        let signal = synthesize(sys, side, family, u0, 0)?;
        let norm = u0.norm();
        let res = moment_residuals(sys, &signal, u0)?;
        let (cost, residual) =
            if norm > 0.0 { (signal.norms.h_h1 / norm, res.max_scaled() / norm) } else { (0.0, res.max_scaled()) };
        let tag = u0.tag.clone().unwrap_or_else(|| format!("datum_{i}"));
        if tag == "phi_1" {
            cost_phi1 = signal.norms.h_h1;
        }
        per_datum.push(DatumCost { tag, cost, residual });
    }
    let measured_cost = per_datum.iter().fold(0.0f64, |m, d| m.max(d.cost));
    let max_residual = per_datum.iter().fold(0.0f64, |m, d| m.max(d.residual));
    let params = sys.params;
    let d = &sys.derived;
    let (regime, lower_shape) = lower_shapes(&params, side)?;
    let bound_b = if sys.count() >= 2 { bound_b_for(sys).ok() } else { None };
    let ln_bound_bstar = match regime {
        Regime::HighOrder if sys.count() >= 2 => ln_bstar_for(sys).ok(),
        _ => None,
    };
    Ok(CostReport {
        params,
        side,
        nu: d.nu,
        regime,
        modes: n,
        precision: family.precision,
        cost_phi1,
        measured_cost,
        per_datum,
        upper_shape: upper_shape(&params, side)?,
        lower_shape,
        bound_b,
        ln_bound_bstar,
        max_residual,
        condition_estimate: family.condition_estimate,
    })
}

/// Settings shared by every sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub side: Side,
    pub modes: usize,
    pub precision: Precision,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SweepOutcome {
    Report(CostReport),
    Skipped { params: ProblemParams, reason: String },
    Failed { params: ProblemParams, error: String },
}

impl SweepOutcome {
    pub fn params(&self) -> &ProblemParams {
        match self {
            SweepOutcome::Report(r) => &r.params,
            SweepOutcome::Skipped { params, .. } | SweepOutcome::Failed { params, .. } => params,
        }
    }

    pub fn report(&self) -> Option<&CostReport> {
        match self {
            SweepOutcome::Report(r) => Some(r),
            _ => None,
        }
    }
}

/// Builds spectrum, family and default batch for one point.
pub fn cost_at(params: &ProblemParams, settings: &SweepSettings) -> Result<CostReport> {
    let sys = eigen_system(params, settings.modes)?;
    let e = ExponentSet::from_spectrum(&sys.lambdas, params.horizon)?;
    let family = build_family(&e, settings.tol, settings.precision)?;
    measure_cost(&sys, settings.side, &family, &default_batch(settings.modes, settings.seed))
}

/// One outcome per grid point, in grid order. Left-end points at the critical
/// potential are skipped.
pub fn sweep(grid: &[ProblemParams], settings: &SweepSettings) -> Vec<SweepOutcome> {
    grid.par_iter()
        .map(|p| {
            if settings.side == Side::Left && p.is_critical() {
                return SweepOutcome::Skipped {
                    params: *p,
                    reason: "left control excluded at the critical potential".into(),
                };
            }
            match cost_at(p, settings) {
                Ok(r) => SweepOutcome::Report(r),
                Err(e) => SweepOutcome::Failed { params: *p, error: e.to_string() },
            }
        })
        .collect()
}

/// α ∈ {0, 0.3, 0.6} × μ ∈ {μ(α), 0, −5} × T ∈ {0.25, 1, 4}.
pub fn default_grid() -> Vec<ProblemParams> {
    let mut grid = Vec::with_capacity(27);
    for &a in &[0.0, 0.3, 0.6] {
        for mu in [mu_critical(a), 0.0, -5.0] {
            for &t in &[0.25, 1.0, 4.0] {
                grid.push(ProblemParams::new(a, mu, t).expect("default grid is valid"));
            }
        }
    }
    grid
}

/// Extremal ratios between measured cost and the bound shapes over a set of reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    /// max lower_shape/measured_cost: the smallest s with lower ≤ s·cost.
    pub lower_factor: f64,
    /// max measured_cost/upper_shape: the smallest s′ with cost ≤ s′·upper.
    pub upper_factor: f64,
}

impl Sandwich {
    pub fn is_finite(&self) -> bool {
        self.lower_factor.is_finite()
            && self.upper_factor.is_finite()
            && self.lower_factor > 0.0
            && self.upper_factor > 0.0
    }
}

pub fn sandwich(reports: &[&CostReport]) -> Sandwich {
    let mut lower_factor = 0.0f64;
    let mut upper_factor = 0.0f64;
    for r in reports {
        lower_factor = lower_factor.max((r.lower_shape.ln() - r.measured_cost.ln()).exp());
        upper_factor = upper_factor.max((r.measured_cost.ln() - r.upper_shape.ln()).exp());
    }
    Sandwich { lower_factor, upper_factor }
}

/// Least-squares slope of y against x.
pub fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `Σ_k j²_{ν,k} e^{−j²_{ν,k} Y}`, summed until terms drop below 1e−300 and at
/// least `10⌈1/√Y⌉` terms are included.
pub fn series_tail_sum(nu: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidParams(format!("Y must be positive, got {y}")));
    }
    let min_terms = 10 * (1.0 / y.sqrt()).ceil() as usize;
    // j_k ≥ (k + ν/2 − 1/4)π, so this many zeros reach j² Y > 700
    let reach = ((700.0 / y).sqrt() / std::f64::consts::PI).ceil() as usize + 2;
    let count = min_terms.max(reach);
    let zeros = bessel_zeros(nu, count)?;
    let mut sum = 0.0;
    for (k, &j) in zeros.zeros.iter().enumerate() {
        let term = (2.0 * j.ln() - j * j * y).exp();
        sum += term;
        if k + 1 >= min_terms && term < 1e-300 {
            break;
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// (ν, Y, sum, ratio) per grid point.
    pub samples: Vec<(f64, f64, f64, f64)>,
    pub max_ratio: f64,
}

/// Sampled ratio of the tail sum to `((1+ν²)/Y^{3/2}) e^{−(1+ν²)Y}`.
pub fn series_tail_bound_check(nus: &[f64], ys: &[f64]) -> Result<TailCheck> {
    let mut samples = Vec::new();
    let mut max_ratio = 0.0f64;
    for &nu in nus {
        for &y in ys {
            let sum = series_tail_sum(nu, y)?;
            let shape = (1.0 + nu * nu) / y.powf(1.5) * (-(1.0 + nu * nu) * y).exp();
            let ratio = sum / shape;
            max_ratio = max_ratio.max(ratio);
            samples.push((nu, y, sum, ratio));
        }
    }
    Ok(TailCheck { samples, max_ratio })
}
