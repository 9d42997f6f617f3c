//! Dispatches a validated configuration to the library and renders the
//! result as JSON or CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use pam_core::asymptotics::{
    finite_t_diagnostics, growth_index_report, growth_upper_table, ldev_numeric, ldev_rate, phase_predicate,
    FiniteTimeReport, GrowthIndexReport, PhaseReport,
};
use pam_core::chaos::{second_moment_chaos, ChaosMode, ChaosSeriesResult};
use pam_core::fk::{moment_fk_bm, moment_fk_bridge, McEstimate, McSettings};
use pam_core::spectral::QuadratureSpec;
use pam_core::variational::EnEstimate;
use pam_core::variational::{
    solve_eh, solve_en, GridSchedule, GridSpec, HartreeOptions, SolveOptions, VariationalProblem,
};
use pam_core::PamError;

use crate::config::{ChaosModeSpec, Format, MeasureSpec, Params, Representation, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhResult {
    pub eps: f64,
    pub lambda: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthResult {
    pub report: GrowthIndexReport,
    /// `(β, β/2 + E_n/(nβ))`.
    pub table: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    /// Shape parameter of the swept measure; absent for a single measure.
    pub parameter: Option<f64>,
    pub report: PhaseReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdevRow {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub t: f64,
    pub numeric: f64,
    pub rate: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsResult {
    pub estimates: Vec<McEstimate>,
    pub report: FiniteTimeReport,
}

/// The result document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "result", rename_all = "kebab-case")]
pub enum RunResult {
    SolveEn(EnEstimate),
    SolveEh(EhResult),
    McMoment(McEstimate),
    ChaosMoment(ChaosSeriesResult),
    GrowthIndex(GrowthResult),
    PhaseDiagram(Vec<PhaseRow>),
    LdevCheck(Vec<LdevRow>),
    Diagnostics(DiagnosticsResult),
}

fn measure(cfg: &RunConfig) -> Result<pam_core::spectral::SpectralMeasure, PamError> {
    cfg.measure.as_ref().ok_or_else(|| PamError::ParameterOutOfRange("measure required".into()))?.build()
}

/// Runs the configured computation.
pub fn run(cfg: &RunConfig) -> Result<RunResult, PamError> {
    let seed = cfg.seed.unwrap_or(0);
    Ok(match &cfg.params {
        Params::SolveEn(p) => {
            let problem = VariationalProblem::new(p.n, measure(cfg)?, p.lambda, p.eps[0])?;
            let grids = GridSchedule { half_widths: p.half_widths.clone(), points: p.points.clone() };
            let opts = SolveOptions {
                tol: p.tol,
                max_iter: p.max_iter,
                seed: cfg.seed.unwrap_or(SolveOptions::default().seed),
            };
            RunResult::SolveEn(solve_en(&problem, &grids, &p.eps, &opts)?)
        }
        Params::SolveEh(p) => {
            let grid = GridSpec::new(p.half_width, p.points)?;
            let opts = HartreeOptions { tol: p.tol, max_iter: p.max_iter, ..HartreeOptions::default() };
            let value = solve_eh(&measure(cfg)?, p.eps, p.lambda, &grid, &opts)?;
            RunResult::SolveEh(EhResult { eps: p.eps, lambda: p.lambda, value })
        }
        Params::McMoment(p) => {
            let m = measure(cfg)?;
            let pts = p.points.clone().unwrap_or_else(|| vec![vec![0.0; m.dim()]; p.n]);
            let s = McSettings { samples: p.samples, steps: p.steps, seed };
            RunResult::McMoment(match p.representation {
                Representation::Bridge => moment_fk_bridge(p.t, &pts, &p.initial.build(), &m, p.eps, p.lambda, &s)?,
                Representation::Motion => moment_fk_bm(p.t, &pts, &m, p.eps, p.lambda, &s)?,
            })
        }
        Params::ChaosMoment(p) => {
            let mode = match p.mode {
                ChaosModeSpec::Quadrature { nodes } => ChaosMode::Quadrature { nodes },
                ChaosModeSpec::MonteCarlo { samples } => ChaosMode::MonteCarlo { samples, seed },
            };
            RunResult::ChaosMoment(second_moment_chaos(p.t, &measure(cfg)?, p.eps, p.lambda, p.d_max, mode)?)
        }
        Params::GrowthIndex(p) => RunResult::GrowthIndex(GrowthResult {
            report: growth_index_report(p.n, p.en, p.en_err, p.regime)?,
            table: growth_upper_table(p.n, p.en, &p.betas)?,
        }),
        Params::PhaseDiagram(p) => {
            let spec = cfg.measure.as_ref().ok_or_else(|| PamError::ParameterOutOfRange("measure required".into()))?;
            let specs: Vec<(Option<f64>, MeasureSpec)> = match &p.values {
                None => vec![(None, spec.clone())],
                Some(vs) => vs
                    .iter()
                    .map(|v| {
                        spec.with_shape(*v)
                            .map(|s| (Some(*v), s))
                            .ok_or_else(|| PamError::ParameterOutOfRange("measure has no shape parameter".into()))
                    })
                    .collect::<Result<_, _>>()?,
            };
            let rows = specs
                .into_iter()
                .map(|(parameter, s)| Ok(PhaseRow { parameter, report: phase_predicate(&s.build()?)? }))
                .collect::<Result<_, PamError>>()?;
            RunResult::PhaseDiagram(rows)
        }
        Params::LdevCheck(p) => {
            let quad = QuadratureSpec::default();
            let mut rows = Vec::new();
            for c in &p.cases {
                let rate = ldev_rate(c.alpha, c.beta, p.n)?;
                for &t in &p.times {
                    let numeric = ldev_numeric(c.alpha, c.beta, p.n, p.strip, t, &quad)?;
                    rows.push(LdevRow {
                        alpha: c.alpha,
                        beta: c.beta,
                        n: p.n,
                        t,
                        numeric,
                        rate,
                        rel_err: (numeric - rate).abs() / rate.abs(),
                    });
                }
            }
            RunResult::LdevCheck(rows)
        }
        Params::Diagnostics(p) => {
            let m = measure(cfg)?;
            let origin = vec![vec![0.0; m.dim()]; p.n];
            let s = McSettings { samples: p.samples, steps: p.steps, seed };
            let estimates = p
                .times
                .iter()
                .map(|&t| moment_fk_bm(t, &origin, &m, p.eps, p.lambda, &s))
                .collect::<Result<Vec<_>, _>>()?;
            let report = finite_t_diagnostics(p.n, p.en, p.en_err, &estimates, p.strip.map(|w| (w, m.dim())))?;
            RunResult::Diagnostics(DiagnosticsResult { estimates, report })
        }
    })
}

/// One line: command, key value, error bar.
pub fn summary(r: &RunResult) -> String {
    match r {
        RunResult::SolveEn(e) => {
            format!("solve-en value={} error_bar={} verdict={:?}", e.value, e.error_bar, e.verdict)
        }
        RunResult::SolveEh(e) => format!("solve-eh value={} error_bar=0", e.value),
        RunResult::McMoment(e) => format!("mc-moment log_mean={} error_bar={}", e.log_mean, e.std_err),
        RunResult::ChaosMoment(c) => format!(
            "chaos-moment partial_sum={} error_bar={} converged={}",
            c.partial_sum,
            c.tail_bound + c.term_errors.iter().sum::<f64>(),
            c.converged
        ),
        RunResult::GrowthIndex(g) => format!(
            "growth-index lower_star={} upper_star={} error_bar={}",
            g.report.lower_star, g.report.upper_star, g.report.en_err
        ),
        RunResult::PhaseDiagram(rows) => {
            let verdicts: Vec<String> = rows.iter().map(|r| format!("{:?}", r.report.occurs).to_lowercase()).collect();
            format!("phase-diagram occurs={} error_bar=0", verdicts.join(","))
        }
        RunResult::LdevCheck(rows) => {
            let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
            format!("ldev-check max_rel_err={worst} error_bar=0")
        }
        RunResult::Diagnostics(d) => format!(
            "diagnostics slope={} error_bar={} violation={}",
            d.report.slope, d.report.slope_err, d.report.any_violation
        ),
    }
}

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// CSV rendering; the columns are listed in `docs/csv_schema.md`.
pub fn to_csv(r: &RunResult) -> String {
    let f = fmt_f64;
    match r {
        RunResult::SolveEn(e) => csv_table(
            &["half_width", "spacing", "eps", "energy"],
            e.raw_values.iter().map(|v| vec![f(v.half_width), f(v.spacing), f(v.eps), f(v.energy)]).collect(),
        ),
        RunResult::SolveEh(e) => csv_table(&["eps", "lambda", "value"], vec![vec![f(e.eps), f(e.lambda), f(e.value)]]),
        RunResult::McMoment(e) => csv_table(
            &["t", "n", "eps", "samples", "steps", "log_mean", "std_err"],
            vec![vec![
                f(e.t),
                e.n.to_string(),
                f(e.eps),
                e.samples.to_string(),
                e.steps.to_string(),
                f(e.log_mean),
                f(e.std_err),
            ]],
        ),
        RunResult::ChaosMoment(c) => csv_table(
            &["d", "term", "std_err"],
            c.terms
                .iter()
                .zip(&c.term_errors)
                .enumerate()
                .map(|(d, (t, s))| vec![d.to_string(), f(*t), f(*s)])
                .collect(),
        ),
        RunResult::GrowthIndex(g) => {
            csv_table(&["beta", "upper_bound"], g.table.iter().map(|(b, u)| vec![f(*b), f(*u)]).collect())
        }
        RunResult::PhaseDiagram(rows) => csv_table(
            &["parameter", "occurs", "criterion_value", "lambda2c_upper", "lambdanc_upper", "h1_criterion_value"],
            rows.iter()
                .map(|r| {
                    vec![
                        opt(r.parameter),
                        format!("{:?}", r.report.occurs).to_lowercase(),
                        f(r.report.criterion_value),
                        f(r.report.lambda2c_upper),
                        f(r.report.lambdanc_upper),
                        opt(r.report.h1_criterion_value),
                    ]
                })
                .collect(),
        ),
        RunResult::LdevCheck(rows) => csv_table(
            &["alpha", "beta", "n", "t", "numeric", "rate", "rel_err"],
            rows.iter()
                .map(|r| vec![f(r.alpha), f(r.beta), r.n.to_string(), f(r.t), f(r.numeric), f(r.rate), f(r.rel_err)])
                .collect(),
        ),
        RunResult::Diagnostics(d) => csv_table(
            &["t", "log_moment", "std_err", "normalized_rate", "upper_threshold", "upper_violation", "lower_rate"],
            d.estimates
                .iter()
                .zip(&d.report.checks)
                .map(|(e, c)| {
                    vec![
                        f(e.t),
                        f(e.log_mean),
                        f(e.std_err),
                        f(c.normalized_rate),
                        f(c.upper_threshold),
                        c.upper_violation.to_string(),
                        opt(c.lower_rate),
                    ]
                })
                .collect(),
        ),
    }
}

/// The result document in the requested format.
pub fn render(r: &RunResult, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("result records serialize");
            s.push('\n');
            s
        }
        Format::Csv => to_csv(r),
    }
}

/// Warnings carried by Monte Carlo results, one per line.
pub fn warnings(r: &RunResult) -> String {
    let mut out = String::new();
    let mut push = |e: &McEstimate| {
        for w in &e.warnings {
            let _ = writeln!(out, "warning (t = {}): {w}", e.t);
        }
    };
    match r {
        RunResult::McMoment(e) => push(e),
        RunResult::Diagnostics(d) => d.estimates.iter().for_each(push),
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn zero_noise_moment_is_one() {
        let cfg = parse_config(
            r#"{"command": "mc-moment", "measure": {"kind": "white_noise"}, "seed": 1,
                "params": {"t": 1, "eps": 0.1, "lambda": 0, "samples": 200, "steps": 16}}"#,
        )
        .unwrap();
        let RunResult::McMoment(e) = run(&cfg).unwrap() else { panic!() };
        assert_eq!(e.log_mean, 0.0);
    }

    #[test]
    fn growth_csv_and_round_trip() {
        let cfg = parse_config(
            r#"{"command": "growth-index",
                "params": {"n": 2, "en": 0.25, "regime": {"kind": "compact"}, "betas": [0.5, 1]}}"#,
        )
        .unwrap();
        let r = run(&cfg).unwrap();
        let csv = to_csv(&r);
        assert_eq!(csv.lines().next(), Some("beta,upper_bound"));
        assert_eq!(csv.lines().count(), 3);
        let json = render(&r, Format::Json);
        let back: RunResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
