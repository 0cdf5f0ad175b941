use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use degenctrl::biortho::{build_family, family_norms, BiorthogonalFamily, ExponentSet};
use degenctrl::cost_lab::{default_grid, sweep, SweepOutcome, SweepSettings};
use degenctrl::moment_control::{moment_residuals, synthesize, InitialDatum, MomentResiduals, DEFAULT_TIME_SAMPLES};
use degenctrl::simulator::simulate_with_snapshots;
use degenctrl::spectrum::{eigen_system, gap_report, EigenSystem, Regime};
use degenctrl::verification::{run_suite, verification_grid, VerifySettings};

use crate::config::{Format, GridChoice, RunConfig, Subcommand};
use crate::output::{json_document, num, CsvTable};
use crate::CliError;

/// Rendered artifact plus a one-line summary for stdout.
pub struct Artifact {
    pub text: String,
    pub summary: String,
    /// Set when the artifact records a failed property check.
    pub failure: Option<CliError>,
}

impl Artifact {
    fn ok(text: String, summary: String) -> Self {
        Artifact { text, summary, failure: None }
    }
}

fn json<T: Serialize>(cfg: &RunConfig, body: T) -> Result<String, CliError> {
    json_document(cfg, body).map_err(|e| CliError::Io(e.to_string()))
}

pub fn execute(cfg: &RunConfig) -> Result<Artifact, CliError> {
    match cfg.subcommand {
        Subcommand::Spectrum => spectrum(cfg),
        Subcommand::Gaps => gaps(cfg),
        Subcommand::Biortho => biortho(cfg),
        Subcommand::Control => control(cfg),
        Subcommand::Simulate => simulate(cfg),
        Subcommand::CostSweep => cost_sweep(cfg),
        Subcommand::Verify => verify(cfg),
    }
}

fn system(cfg: &RunConfig, n: usize) -> Result<EigenSystem, CliError> {
    Ok(eigen_system(&cfg.params(), n)?)
}

fn family(cfg: &RunConfig, sys: &EigenSystem) -> Result<BiorthogonalFamily, CliError> {
    let e = ExponentSet::from_spectrum(&sys.lambdas[..cfg.modes], cfg.horizon)?;
    Ok(build_family(&e, cfg.tol, cfg.precision)?)
}

/// The datum used by `control` and `simulate`: a seeded random unit vector.
pub fn datum(cfg: &RunConfig) -> InitialDatum {
    InitialDatum::random_unit(cfg.modes, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

#[derive(Serialize)]
struct ModeRow {
    k: usize,
    zero: f64,
    lambda: f64,
    norm_const: f64,
    trace_right: f64,
    trace_left: Option<f64>,
}

fn spectrum(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let sys = system(cfg, cfg.modes)?;
    let rows: Vec<ModeRow> = (0..sys.count())
        .map(|i| ModeRow {
            k: i + 1,
            zero: sys.zeros.zeros[i],
            lambda: sys.lambdas[i],
            norm_const: sys.norm_consts[i],
            trace_right: sys.trace_right[i],
            trace_left: sys.trace_left.as_ref().map(|t| t[i]),
        })
        .collect();
    let d = sys.derived;
    let min_jprime = sys.jprime_at_zeros.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let text = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                derived: degenctrl::spectrum::DerivedParams,
                regime: Regime,
                min_abs_jprime: f64,
                modes: &'a [ModeRow],
            }
            json(cfg, Body { derived: d, regime: Regime::of(d.nu), min_abs_jprime: min_jprime, modes: &rows })?
        }
        Format::Csv => {
            let mut t = CsvTable::new(cfg, &["k", "j", "lambda", "norm_const", "trace_right", "trace_left"]);
            t.meta("nu", num(d.nu)).meta("gamma", num(d.gamma)).meta("mu_crit", num(d.mu_crit));
            t.meta("regime", Regime::of(d.nu)).meta("min_abs_jprime", num(min_jprime));
            for r in &rows {
                t.row(vec![
                    r.k.to_string(),
                    num(r.zero),
                    num(r.lambda),
                    num(r.norm_const),
                    num(r.trace_right),
                    num(r.trace_left.unwrap_or(f64::NAN)),
                ]);
            }
            t.render()
        }
    };
    Ok(Artifact::ok(text, format!("{} modes, nu = {}", rows.len(), d.nu)))
}

fn gaps(cfg: &RunConfig) -> Result<Artifact, CliError> {
    if cfg.modes < 2 {
        return Err(CliError::Config("gaps needs N >= 2".into()));
    }
    let sys = system(cfg, cfg.modes)?;
    let g = gap_report(&sys)?;
    let text = match cfg.format {
        Format::Json => json(cfg, &g)?,
        Format::Csv => {
            let mut t = CsvTable::new(cfg, &["k", "gap"]);
            t.meta("nu", num(g.nu)).meta("regime", g.regime);
            t.meta("bound_lower", num(g.bound_lower)).meta("bound_upper", num(g.bound_upper));
            t.meta("certificate_pass", g.certificate_pass).meta("tail_pass", g.tail_pass);
            t.meta("uniform_pass", g.uniform_pass);
            for (i, gap) in g.gaps.iter().enumerate() {
                t.row(vec![(i + 1).to_string(), num(*gap)]);
            }
            t.render()
        }
    };
    let summary = format!(
        "{} gaps in [{}, {}], certificate {}",
        g.gaps.len(),
        g.gamma_min,
        g.gamma_max,
        if g.certificate_pass && g.tail_pass { "holds" } else { "violated" }
    );
    Ok(Artifact::ok(text, summary))
}

fn biortho(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let sys = system(cfg, cfg.modes)?;
    let f = family(cfg, &sys)?;
    let norms = family_norms(&f);
    let n = f.len();
    let coeffs: Vec<Vec<f64>> = (0..n).map(|m| (0..n).map(|k| f.coeff(m, k)).collect()).collect();
    let lambdas = f.exponents.lambdas().to_vec();
    let text = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                lambdas: &'a [f64],
                coeffs: &'a [Vec<f64>],
                norms: &'a [f64],
                residual: f64,
                algebraic_residual: f64,
                condition_estimate: f64,
            }
            json(
                cfg,
                Body {
                    lambdas: &lambdas,
                    coeffs: &coeffs,
                    norms: &norms,
                    residual: f.residual,
                    algebraic_residual: f.algebraic_residual,
                    condition_estimate: f.condition_estimate,
                },
            )?
        }
        Format::Csv => {
            let mut t = CsvTable::new(cfg, &["m", "n", "lambda_n", "coeff", "norm_m"]);
            t.meta("residual", num(f.residual)).meta("algebraic_residual", num(f.algebraic_residual));
            t.meta("condition_estimate", num(f.condition_estimate));
            for m in 0..n {
                for k in 0..n {
                    t.row(vec![m.to_string(), k.to_string(), num(lambdas[k]), num(coeffs[m][k]), num(norms[m])]);
                }
            }
            t.render()
        }
    };
    Ok(Artifact::ok(text, format!("{} functions, residual {:e}, condition {:e}", n, f.residual, f.condition_estimate)))
}

fn control(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let sys = system(cfg, cfg.modes)?;
    let f = family(cfg, &sys)?;
    let u0 = datum(cfg);
    let signal = synthesize(&sys, cfg.side, &f, &u0, DEFAULT_TIME_SAMPLES)?;
    let res = moment_residuals(&sys, &signal, &u0)?;
    let text = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                datum: &'a [f64],
                lambdas: &'a [f64],
                expsum: Vec<f64>,
                norms: degenctrl::moment_control::ControlNorms,
                h_end: f64,
                residuals: &'a MomentResiduals,
            }
            json(
                cfg,
                Body {
                    datum: &u0.coeffs,
                    lambdas: &signal.lambdas,
                    expsum: signal.expsum(),
                    norms: signal.norms,
                    h_end: signal.h_end(),
                    residuals: &res,
                },
            )?
        }
        Format::Csv => {
            let mut t = CsvTable::new(cfg, &["t", "K", "H"]);
            t.meta("k_l2", num(signal.norms.k_l2)).meta("h_l2", num(signal.norms.h_l2));
            t.meta("h_h1", num(signal.norms.h_h1)).meta("h_end", num(signal.h_end()));
            t.meta("max_moment_residual", num(res.max_scaled()));
            t.meta("quadrature_disagreement", num(res.disagreement));
            for s in &signal.grid {
                t.row(vec![num(s.t), num(s.k), num(s.h)]);
            }
            t.render()
        }
    };
    Ok(Artifact::ok(text, format!("|H|_H1 = {:e}, max moment residual {:e}", signal.norms.h_h1, res.max_scaled())))
}

fn simulate(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let sys = system(cfg, cfg.modes)?;
    let f = family(cfg, &sys)?;
    let u0 = datum(cfg);
    let signal = synthesize(&sys, cfg.side, &f, &u0, 0)?;
    let times = [0.0, 0.5 * cfg.horizon, cfg.horizon];
    let r = simulate_with_snapshots(&sys, cfg.side, &signal, &u0, cfg.sim_modes, &times)?;
    let text = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                datum: &'a [f64],
                controlled_max: f64,
                #[serde(flatten)]
                result: &'a degenctrl::simulator::TrajectoryResult,
            }
            json(cfg, Body { datum: &u0.coeffs, controlled_max: r.controlled_max(), result: &r })?
        }
        Format::Csv => {
            let mut t = CsvTable::new(cfg, &["t", "x", "u"]);
            t.meta("terminal_norm", num(r.terminal_norm)).meta("controlled_max", num(r.controlled_max()));
            t.meta("path_disagreement", num(r.path_disagreement)).meta("lift_defect", num(r.lift_defect));
            for s in &r.snapshots {
                for (x, u) in s.x.iter().zip(&s.u) {
                    t.row(vec![num(s.t), num(*x), num(*u)]);
                }
            }
            t.render()
        }
    };
    Ok(Artifact::ok(
        text,
        format!("max |beta_k(T)|, k <= N: {:e}; path disagreement {:e}", r.controlled_max(), r.path_disagreement),
    ))
}

fn cost_sweep(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let grid = match cfg.grid {
        GridChoice::Single => vec![cfg.params()],
        GridChoice::Default => default_grid(),
    };
    let settings =
        SweepSettings { side: cfg.side, modes: cfg.modes, precision: cfg.precision, tol: cfg.tol, seed: cfg.seed };
    let outcomes = sweep(&grid, &settings);
    let reports = outcomes.iter().filter(|o| o.report().is_some()).count();
    let skipped = outcomes.iter().filter(|o| matches!(o, SweepOutcome::Skipped { .. })).count();
    let failed = outcomes.len() - reports - skipped;
    let text = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Provenance {
                modes: usize,
                precision: degenctrl::biortho::Precision,
                seed: u64,
                version: &'static str,
            }
            #[derive(Serialize)]
            struct Body<'a> {
                provenance: Provenance,
                outcomes: &'a [SweepOutcome],
            }
            let provenance = Provenance {
                modes: cfg.modes,
                precision: cfg.precision,
                seed: cfg.seed,
                version: env!("CARGO_PKG_VERSION"),
            };
            json(cfg, Body { provenance, outcomes: &outcomes })?
        }
        Format::Csv => {
            let mut t = CsvTable::new(
                cfg,
                &[
                    "alpha",
                    "mu",
                    "T",
                    "nu",
                    "regime",
                    "measured_cost",
                    "upper_shape",
                    "lower_shape",
                    "residuals",
                    "condition_estimate",
                    "status",
                ],
            );
            for o in &outcomes {
                match o {
                    SweepOutcome::Report(r) => t.row(vec![
                        num(r.params.alpha),
                        num(r.params.mu),
                        num(r.params.horizon),
                        num(r.nu),
                        r.regime.to_string(),
                        num(r.measured_cost),
                        num(r.upper_shape),
                        num(r.lower_shape),
                        num(r.max_residual),
                        num(r.condition_estimate),
                        "ok".into(),
                    ]),
                    SweepOutcome::Skipped { params, reason } => {
                        t.meta(
                            "skipped",
                            format!(
                                "alpha {} mu {} T {}: {reason}",
                                num(params.alpha),
                                num(params.mu),
                                num(params.horizon)
                            ),
                        );
                    }
                    SweepOutcome::Failed { params, error } => {
                        let nan = num(f64::NAN);
                        t.meta(
                            "failed",
                            format!(
                                "alpha {} mu {} T {}: {error}",
                                num(params.alpha),
                                num(params.mu),
                                num(params.horizon)
                            ),
                        );
                        let nu = degenctrl::spectrum::derive_params(params).nu;
                        t.row(vec![
                            num(params.alpha),
                            num(params.mu),
                            num(params.horizon),
                            num(nu),
                            Regime::of(nu).to_string(),
                            nan.clone(),
                            nan.clone(),
                            nan.clone(),
                            nan.clone(),
                            nan,
                            "failed".into(),
                        ]);
                    }
                }
            }
            t.render()
        }
    };
    Ok(Artifact::ok(text, format!("{reports} reports, {skipped} skipped, {failed} failed")))
}

fn verify(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let grid = match cfg.grid {
        GridChoice::Single => vec![cfg.params()],
        GridChoice::Default => verification_grid(cfg.horizon),
    };
    let settings =
        VerifySettings { side: cfg.side, modes: cfg.modes, precision: cfg.precision, tol: cfg.tol, seed: cfg.seed };
    let report = run_suite(&grid, &settings);
    let text = match cfg.format {
        Format::Json => json(cfg, &report)?,
        Format::Csv => {
            let mut t = CsvTable::new(cfg, &["check", "alpha", "mu", "T", "value", "threshold", "pass"]);
            for (p, e) in &report.errors {
                t.meta("error", format!("alpha {} mu {} T {}: {e}", num(p.alpha), num(p.mu), num(p.horizon)));
            }
            for c in &report.checks {
                t.row(vec![
                    c.name.clone(),
                    num(c.alpha),
                    num(c.mu),
                    num(c.horizon),
                    num(c.value),
                    num(c.threshold),
                    c.pass.to_string(),
                ]);
            }
            t.render()
        }
    };
    let failed: Vec<String> = report
        .failures()
        .map(|c| {
            format!("{} at alpha={} mu={} T={}: {:e} > {:e}", c.name, c.alpha, c.mu, c.horizon, c.value, c.threshold)
        })
        .chain(report.errors.iter().map(|(p, e)| format!("alpha={} mu={} T={}: {e}", p.alpha, p.mu, p.horizon)))
        .collect();
    let summary = format!("{} checks on {} points, {} failed", report.checks.len(), grid.len(), failed.len());
    let failure = if !report.errors.is_empty() && report.numerical_errors_only {
        Some(CliError::Numerical(failed.join("\n")))
    } else if !report.errors.is_empty() {
        Some(CliError::Config(failed.join("\n")))
    } else if !failed.is_empty() {
        Some(CliError::Failed(failed.join("\n")))
    } else {
        None
    };
    Ok(Artifact { text, summary, failure })
}
