//! Property suite behind the `verify` command.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biortho::{build_family, ExponentSet, Precision};
use crate::error::Result;
use crate::moment_control::{moment_residuals, synthesize, InitialDatum};
use crate::simulator::{projection_identities_check, simulate};
use crate::spectrum::{eigen_system, gap_report, mu_critical, ProblemParams, Side};

pub const ORTHONORMALITY_TOL: f64 = 1e-8;
pub const PROJECTION_TOL: f64 = 1e-7;
pub const BIORTHOGONALITY_TOL: f64 = 1e-10;
pub const MOMENT_TOL: f64 = 1e-8;
pub const PATH_TOL: f64 = 1e-8;
pub const TRACE_TOL: f64 = 1e-6;
pub const END_VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub alpha: f64,
    pub mu: f64,
    pub horizon: f64,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub side: Side,
    pub modes: usize,
    pub precision: Precision,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Points that could not be evaluated, with the error message.
    pub errors: Vec<(ProblemParams, String)>,
    /// True when every error was a numerical failure.
    pub numerical_errors_only: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// α ∈ {0, 0.3, 0.6} × μ ∈ {μ(α)/2, 0, −5} at horizon T.
pub fn verification_grid(horizon: f64) -> Vec<ProblemParams> {
    let mut grid = Vec::with_capacity(9);
    for &a in &[0.0, 0.3, 0.6] {
        for mu in [0.5 * mu_critical(a), 0.0, -5.0] {
            grid.push(ProblemParams::new(a, mu, horizon).expect("verification grid is valid"));
        }
    }
    grid
}

/// Runs every check at one parameter point.
pub fn verify_point(params: &ProblemParams, settings: &VerifySettings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut push = |name: &str, value: f64, threshold: f64| {
        out.push(Check {
            name: name.to_string(),
            alpha: params.alpha,
            mu: params.mu,
            horizon: params.horizon,
            value,
            threshold,
            pass: value <= threshold,
        });
    };
    let n = settings.modes;
    let sys = eigen_system(params, n.max(2))?;

    let gaps = gap_report(&sys)?;
    push("gap_certificate", if gaps.certificate_pass && gaps.tail_pass { 0.0 } else { 1.0 }, 0.0);

    let kmax = n.min(20);
    let gram = sys.orthonormality_gram(kmax)?;
    let mut dev = 0.0f64;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            dev = dev.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    push("orthonormality", dev, ORTHONORMALITY_TOL);

    let mut proj = 0.0f64;
    for k in 1..=n.min(5) {
        let (r, l) = projection_identities_check(&sys, k)?;
        proj = proj.max(match settings.side {
            Side::Right => r.abs(),
            Side::Left => l.abs(),
        });
    }
    push("projection_identity", proj, PROJECTION_TOL);

    if settings.side == Side::Left && !params.is_critical() {
        let mut worst = 0.0f64;
        for k in 1..=n.min(5) {
            let exact = sys.eval_left_trace(k)?;
            let limit = sys.left_trace_numeric_limit(k)?;
            worst = worst.max(((limit - exact) / exact).abs());
        }
        push("left_trace_limit", worst, TRACE_TOL);
    }

    let e = ExponentSet::from_spectrum(&sys.lambdas[..n], params.horizon)?;
    let family = build_family(&e, settings.tol, settings.precision)?;
    push("biorthogonality", family.residual, BIORTHOGONALITY_TOL);

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let data = [InitialDatum::mode(1, n)?, InitialDatum::random_unit(n, &mut rng)];
    let sys_n = if sys.count() == n { sys.clone() } else { eigen_system(params, n)? };
    let (mut moment, mut path, mut end) = (0.0f64, 0.0f64, 0.0f64);
    for u0 in &data {
        let signal = synthesize(&sys_n, settings.side, &family, u0, 0)?;
        let res = moment_residuals(&sys_n, &signal, u0)?;
        moment = moment.max(res.max_scaled() / u0.norm());
        let traj = simulate(&sys_n, settings.side, &signal, u0, 2 * n)?;
        path = path.max(traj.path_disagreement / u0.norm().max(1.0));
        if signal.norms.h_h1 > 0.0 {
            end = end.max(signal.h_end().abs() / signal.norms.h_h1);
        }
    }
    push("moment_residual", moment, MOMENT_TOL);
    push("two_path_agreement", path, PATH_TOL);
    push("terminal_control_value", end, END_VALUE_TOL);
    Ok(out)
}

/// Runs [`verify_point`] over a grid, in parallel.
pub fn run_suite(grid: &[ProblemParams], settings: &VerifySettings) -> VerifyReport {
    let results: Vec<_> = grid.par_iter().map(|p| (*p, verify_point(p, settings))).collect();
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    let mut numerical_errors_only = true;
    for (p, r) in results {
        match r {
            Ok(c) => checks.extend(c),
            Err(e) => {
                numerical_errors_only &= e.is_numerical();
                errors.push((p, e.to_string()));
            }
        }
    }
    VerifyReport { checks, errors, numerical_errors_only }
}
