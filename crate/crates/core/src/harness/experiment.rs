//! Runs one resolved experiment and renders its trace and report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::builtin::{self, NamedIntegrand};
use super::config::{ExperimentConfig, IntegrandConfig, RuleConfig, SchemeConfig, TransformConfig};
use crate::acquisition::{theoretical_clcu, AcquisitionSpec, AdaptiveTermRule, Clcu};
use crate::analysis::{self, GreedyCertificate, Prop1Report, RateFit, WeakAdaptivityReport};
use crate::domain::{Density, DensityKind, Domain, Integrand, MeanFunction, SyntheticIntegrand};
use crate::engine::{
    self, CandidateScheme, Prior, Problem, RunOptions, RunRecord, SelectorConfig, Termination,
};
use crate::error::{AbqError, Result};
use crate::kernels::{KernelSpec, RatePrediction};
use crate::quadrature::IntegralEstimate;
use crate::real::{Mp, Precision, Real};
use crate::transforms::TransformSpec;

pub const TRACE_VERSION: &str = "abq-lab trace v1";
pub const REPORT_SCHEMA: &str = "abq-lab/report/1";

/// Trace columns after the point coordinates.
pub const TRACE_COLUMNS: &[&str] = &[
    "sup_q_sqrt_k",
    "plugin_estimate",
    "expectation_estimate",
    "abs_error_plugin",
    "abs_error_expectation",
    "b_min",
    "b_max",
    "greedy_ratio",
    "fill_distance",
];

/// An experiment with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub name: String,
    pub config: ExperimentConfig,
    pub precision: Precision,
    pub domain: Domain,
    pub pi: Density,
    pub prior: Prior,
    pub spec: AcquisitionSpec,
    pub selector: SelectorConfig,
    pub opts: RunOptions,
    pub integrand: NamedIntegrand,
    pub pilot_evaluations: usize,
}

fn density(kind: Option<&DensityKind>, dom: &Domain, fallback: DensityKind) -> Result<Density> {
    Density::new(kind.cloned().unwrap_or(fallback), dom.clone())
}

pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved> {
    let precision = cfg.precision()?;
    let dom = cfg.domain.clone();
    let d = dom.dim();
    let integrand = match &cfg.integrand {
        IntegrandConfig::Builtin(name) => builtin::integrand(name, d)?,
        IntegrandConfig::Synthetic(s) => NamedIntegrand::Synthetic(s.clone()),
    };
    let synthetic = integrand.as_synthetic();
    let pi = density(cfg.pi.as_ref(), &dom, DensityKind::Uniform)?;
    let q = density(
        cfg.acquisition.q.as_ref(),
        &dom,
        DensityKind::Constant { value: 1.0 },
    )?;

    let certificate_count = cfg.grids.certificate.unwrap_or(2048 * d);
    let (scheme, default_count) = match cfg.selector.scheme {
        SchemeConfig::UniformGrid => (CandidateScheme::UniformGrid, certificate_count),
        SchemeConfig::LowDiscrepancy => (CandidateScheme::LowDiscrepancy, certificate_count),
        SchemeConfig::UniformRandom => (
            CandidateScheme::UniformRandom { seed: cfg.seed },
            certificate_count,
        ),
        SchemeConfig::CertificateGrid => (CandidateScheme::CertificateGrid, certificate_count),
    };
    let selector = SelectorConfig {
        candidate_count: cfg.selector.candidate_count.unwrap_or(default_count),
        candidate_scheme: scheme,
        local_refinement_steps: cfg.selector.local_refinement_steps,
        policy: cfg.selector.policy,
        certificate_count: Some(certificate_count),
    };

    let defaults = RunOptions::for_dim(d);
    let opts = RunOptions {
        oracle_resolution: cfg.grids.oracle.unwrap_or(defaults.oracle_resolution),
        reference_resolution: match cfg.grids.reference {
            Some(0) => None,
            Some(r) => Some(r),
            None => defaults.reference_resolution,
        },
        fill_resolution: cfg.grids.fill.unwrap_or(defaults.fill_resolution),
    };

    let mut pilot_evaluations = 0;
    let transform = match cfg.transform {
        None => synthetic
            .map(|s| s.transform)
            .unwrap_or(TransformSpec::Identity),
        Some(TransformConfig::Identity) => TransformSpec::Identity,
        Some(TransformConfig::Exponential) => TransformSpec::Exponential,
        Some(TransformConfig::Square {
            alpha: Some(alpha),
            branch,
        }) => TransformSpec::Square { alpha, branch },
        Some(TransformConfig::Square {
            alpha: None,
            branch,
        }) => {
            let grid = engine::certificate_grid(&dom, certificate_count);
            let mut min_f = f64::INFINITY;
            for x in &grid {
                min_f = min_f.min(integrand.eval(x)?);
            }
            pilot_evaluations = grid.len();
            TransformSpec::Square {
                alpha: TransformSpec::default_square_alpha(min_f)?,
                branch,
            }
        }
    };
    let mean = cfg
        .mean
        .clone()
        .or_else(|| synthetic.map(|s| s.mean.clone()))
        .unwrap_or_else(MeanFunction::zero);
    let prior = Prior {
        kernel: cfg.kernel.clone(),
        mean,
        transform,
    };

    let rule = match &cfg.acquisition.rule {
        RuleConfig::Constant { c } => AdaptiveTermRule::Constant { c: *c },
        RuleConfig::WsabiL => AdaptiveTermRule::WsabiL,
        RuleConfig::WsabiM => AdaptiveTermRule::WsabiM,
        RuleConfig::Mmlt => AdaptiveTermRule::Mmlt,
        RuleConfig::Vbmc {
            delta2,
            delta3,
            densities,
        } => AdaptiveTermRule::Vbmc {
            delta2: *delta2,
            delta3: *delta3,
            densities: densities
                .iter()
                .map(|k| Density::new(k.clone(), dom.clone()))
                .collect::<Result<_>>()?,
        },
    };
    let spec = AcquisitionSpec {
        outer: cfg.acquisition.outer,
        q,
        rule,
        gamma_tilde: cfg.acquisition.gamma_tilde,
    };
    spec.validate()?;
    selector.validate()?;
    Ok(Resolved {
        name: cfg.label(),
        config: cfg.clone(),
        precision,
        domain: dom,
        pi,
        prior,
        spec,
        selector,
        opts,
        integrand,
        pilot_evaluations,
    })
}

impl Resolved {
    /// The synthetic integrand when its kernel and mean match the prior, so
    /// that `‖g̃‖_{H_k}` is known.
    pub fn known_residual(&self) -> std::result::Result<&SyntheticIntegrand, String> {
        let s = self
            .integrand
            .as_synthetic()
            .ok_or_else(|| "integrand is not a finite kernel expansion; ‖g̃‖ unknown".to_string())?;
        if s.kernel != self.prior.kernel {
            return Err("integrand kernel differs from the prior kernel; ‖g̃‖ unknown".into());
        }
        if s.mean != self.prior.mean {
            return Err("prior mean differs from the integrand's mean; ‖g̃‖ unknown".into());
        }
        Ok(s)
    }

    pub fn clcu(&self) -> Clcu {
        let k_inf = self.prior.kernel.sup_diag();
        let (lo, hi) = (
            self.prior.mean.inf_abs(&self.domain),
            self.prior.mean.sup_abs(&self.domain),
        );
        match (&self.spec.rule, self.known_residual()) {
            (AdaptiveTermRule::Constant { .. }, _) => {
                theoretical_clcu(&self.spec.rule, lo, hi, 0.0, k_inf)
            }
            (rule, Ok(s)) => theoretical_clcu(rule, lo, hi, s.rkhs_norm(), k_inf),
            (_, Err(reason)) => Clcu::Absent { reason },
        }
    }

    pub fn certificate_grid(&self) -> Vec<crate::domain::Point> {
        engine::certificate_grid(
            &self.domain,
            self.selector.certificate_size(self.domain.dim()),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub tag: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub pilot_evaluations: usize,
    pub jitter: f64,
    pub jitter_doublings: u32,
    pub clamp_events: usize,
    pub certificate_grid_size: usize,
    pub reference: Option<IntegralEstimate>,
    pub final_plugin: f64,
    pub final_expectation: f64,
    pub final_abs_error_plugin: Option<f64>,
    pub final_abs_error_expectation: Option<f64>,
    pub e_first: f64,
    pub e_last: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Surrogates {
    /// Grid n-width upper bound for `n = 1..=budget` (computed in f64).
    pub nwidth: Vec<f64>,
    /// `(2n, √2 γ̂⁻¹ √d_n)` from the surrogate and the run's empirical γ̂.
    pub devore_generic: Vec<(usize, f64)>,
    /// Iterations where the surrogate exceeds the recorded `e_n` by more
    /// than 1e-9 (possible since both are grid quantities).
    pub nwidth_above_e: Vec<usize>,
    pub fill_distance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Section<T> {
    Done(T),
    Skipped { skipped: String },
}

impl<T> Section<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            Section::Done(t) => Some(t),
            Section::Skipped { .. } => None,
        }
    }
}

fn skipped<T>(why: impl Into<String>) -> Section<T> {
    Section::Skipped {
        skipped: why.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub name: String,
    pub seed: u64,
    pub precision: &'static str,
    pub dim: usize,
    pub kernel: KernelSpec,
    pub transform: TransformSpec,
    pub mean: MeanFunction,
    pub rule: &'static str,
    pub gamma_tilde: f64,
    pub budget: usize,
    pub run: RunSummary,
    pub predicted_rate: Section<RatePrediction>,
    pub rate_fit: Section<RateFit>,
    pub clcu: Clcu,
    pub weak_adaptivity: WeakAdaptivityReport,
    pub certificate: Section<GreedyCertificate>,
    pub bound_check: Section<Prop1Report>,
    pub surrogates: Section<Surrogates>,
    pub findings: Vec<Finding>,
}

pub struct ExperimentOutput {
    pub record: RunRecord,
    pub report: Report,
    pub trace_csv: String,
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn rate_token(r: &Section<RatePrediction>) -> String {
    match r {
        Section::Done(RatePrediction::Exponential { power }) => {
            format!("exponential:{}", fmt_num(*power))
        }
        Section::Done(RatePrediction::Polynomial { exponent }) => {
            format!("polynomial:{}", fmt_num(*exponent))
        }
        Section::Skipped { .. } => "none".into(),
    }
}

pub fn render_trace(
    record: &RunRecord,
    kernel: &KernelSpec,
    rate: &Section<RatePrediction>,
) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "# {TRACE_VERSION} precision={} dim={} kernel={} rate={}",
        record.precision,
        record.dim,
        kernel.name(),
        rate_token(rate)
    )
    .unwrap();
    let mut header = vec!["n".to_string()];
    header.extend((0..record.dim).map(|a| format!("x{a}")));
    header.extend(TRACE_COLUMNS.iter().map(|c| c.to_string()));
    writeln!(s, "{}", header.join(",")).unwrap();
    for it in &record.iterations {
        let mut row = vec![it.n.to_string()];
        row.extend(it.point.iter().map(|v| fmt_num(*v)));
        row.extend([
            fmt_num(it.sup_q_sqrt_k),
            fmt_num(it.estimates.plugin),
            fmt_num(it.estimates.expectation),
            fmt_opt(it.abs_error_plugin),
            fmt_opt(it.abs_error_expectation),
            fmt_num(it.b_min),
            fmt_num(it.b_max),
            fmt_num(it.greedy_ratio),
            fmt_num(it.fill_distance),
        ]);
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    s
}

pub fn execute(res: &Resolved) -> Result<ExperimentOutput> {
    match res.precision {
        Precision::F64 => execute_typed::<f64>(res),
        Precision::Mp256 => execute_typed::<Mp<256>>(res),
        Precision::Mp512 => execute_typed::<Mp<512>>(res),
    }
}

fn execute_typed<R: Real>(res: &Resolved) -> Result<ExperimentOutput> {
    let d = res.domain.dim();
    let n = res.config.budget;
    let problem = Problem {
        integrand: &res.integrand,
        pi: &res.pi,
        domain: &res.domain,
    };
    let (_, record) =
        engine::run_abq::<R>(problem, &res.prior, &res.spec, &res.selector, &res.opts, n)?;
    let ana = &res.config.analysis;
    let mut findings = Vec::new();

    let predicted_rate = match res.prior.kernel.predicted_rate(d) {
        Ok(r) => Section::Done(r),
        Err(e) => skipped(e.to_string()),
    };
    let e_series = record.e_series();
    let rate_fit = match &predicted_rate {
        Section::Done(model) => {
            match analysis::fit_rate(&e_series, *model, ana.rate_n_min, ana.rate_n_max) {
                Ok(f) => Section::Done(f),
                Err(e) => skipped(e.to_string()),
            }
        }
        Section::Skipped { skipped: why } => skipped(why.clone()),
    };

    let clcu = res.clcu();
    if let (AdaptiveTermRule::WsabiL, Clcu::Absent { reason }) = (&res.spec.rule, &clcu) {
        findings.push(Finding {
            tag: "wsabi-consistency",
            message: format!(
                "lower constant C_L absent ({reason}); the sufficient condition for consistency does not hold and the certificate uses the empirical b range"
            ),
        });
    }
    let weak = analysis::check_weak_adaptivity(&record, &clcu);
    for &i in &weak.violations {
        let it = &record.iterations[i];
        findings.push(Finding {
            tag: "weak-adaptivity",
            message: format!(
                "iteration {}: b range [{:e}, {:e}] leaves [C_L, C_U]",
                it.n, it.b_min, it.b_max
            ),
        });
    }

    let grid = res.certificate_grid();
    let certificate = if !ana.certificate {
        skipped("disabled in config")
    } else if record.iterations.len() < 2 {
        skipped("run has fewer than 2 points")
    } else {
        let c = analysis::greedy_certificate::<R>(
            &record,
            &res.prior.kernel,
            &res.spec.q,
            &grid,
            &res.spec.outer,
            res.spec.gamma_tilde,
            clcu.clone(),
        )?;
        for &l in &c.violations {
            let st = &c.steps[l];
            findings.push(Finding {
                tag: "Thm1",
                message: format!(
                    "iteration {}: ratio {:.12} below empirical gamma {:.12}",
                    l + 1,
                    st.rho,
                    st.gamma_hat
                ),
            });
        }
        Section::Done(c)
    };

    let bound_check = if !ana.bound_check {
        skipped("disabled in config")
    } else if record.reference.is_none() {
        skipped("no reference integral")
    } else {
        match res.known_residual() {
            Err(why) => skipped(why),
            Ok(s) if s.transform != res.prior.transform => {
                skipped("prior transform differs from the integrand's transform")
            }
            Ok(s) => {
                let r = analysis::prop1_bound_check(
                    &record,
                    s,
                    &res.pi,
                    &res.spec.q,
                    &res.domain,
                    res.opts.oracle_resolution,
                )?;
                for row in r.rows.iter().filter(|r| !r.pass) {
                    findings.push(Finding {
                        tag: "Prop1",
                        message: format!(
                            "n = {}: error {:e} exceeds bound {:e} + slack {:e}",
                            row.n, row.lhs, row.rhs, row.slack
                        ),
                    });
                }
                Section::Done(r)
            }
        }
    };

    let surrogates = if !ana.surrogates || n == 0 {
        skipped(if n == 0 {
            "empty budget"
        } else {
            "disabled in config"
        })
    } else {
        let nwidth =
            analysis::nwidth_curve::<f64>(&res.prior.kernel, &res.spec.q, &res.domain, n, &grid)?;
        let gamma = certificate.done().map(|c| c.gamma_hat_run).unwrap_or(1.0);
        let devore_generic = analysis::devore_generic(&nwidth, gamma);
        let nwidth_above_e = record
            .iterations
            .iter()
            .filter(|it| nwidth[it.n - 1] > it.sup_q_sqrt_k + 1e-9)
            .map(|it| it.n)
            .collect();
        Section::Done(Surrogates {
            nwidth,
            devore_generic,
            nwidth_above_e,
            fill_distance: record.iterations.iter().map(|i| i.fill_distance).collect(),
        })
    };

    if record.termination != Termination::Budget {
        findings.push(Finding {
            tag: "termination",
            message: format!(
                "run stopped after {} of {n} iterations ({:?})",
                record.iterations.len(),
                record.termination
            ),
        });
    }
    let m = record.iterations.len();
    if m >= 10 {
        let h = record.iterations[m / 2 - 1].sup_q_sqrt_k;
        let l = record.iterations[m - 1].sup_q_sqrt_k;
        if h > 0.0 && l / h > 0.5 {
            findings.push(Finding {
                tag: "stall",
                message: format!(
                    "e_n fell only from {h:e} (n = {}) to {l:e} (n = {m})",
                    m / 2
                ),
            });
        }
    }

    let last = record.iterations.last();
    let run = RunSummary {
        termination: record.termination,
        iterations: record.iterations.len(),
        evaluations: record.evaluations,
        pilot_evaluations: res.pilot_evaluations,
        jitter: record.jitter,
        jitter_doublings: record.jitter_doublings,
        clamp_events: record.clamp_events,
        certificate_grid_size: record.certificate_grid_size,
        reference: record.reference,
        final_plugin: last
            .map(|i| i.estimates.plugin)
            .unwrap_or(record.prior_estimates.plugin),
        final_expectation: last
            .map(|i| i.estimates.expectation)
            .unwrap_or(record.prior_estimates.expectation),
        final_abs_error_plugin: last.and_then(|i| i.abs_error_plugin),
        final_abs_error_expectation: last.and_then(|i| i.abs_error_expectation),
        e_first: record.prior_sup_q_sqrt_k,
        e_last: last
            .map(|i| i.sup_q_sqrt_k)
            .unwrap_or(record.prior_sup_q_sqrt_k),
    };
    let trace_csv = render_trace(&record, &res.prior.kernel, &predicted_rate);
    let report = Report {
        schema: REPORT_SCHEMA,
        name: res.name.clone(),
        seed: res.config.seed,
        precision: R::NAME,
        dim: d,
        kernel: res.prior.kernel.clone(),
        transform: res.prior.transform,
        mean: res.prior.mean.clone(),
        rule: res.spec.rule.name(),
        gamma_tilde: res.spec.gamma_tilde,
        budget: n,
        run,
        predicted_rate,
        rate_fit,
        clcu,
        weak_adaptivity: weak,
        certificate,
        bound_check,
        surrogates,
        findings,
    };
    Ok(ExperimentOutput {
        record,
        report,
        trace_csv,
    })
}

/// Directory for one experiment's artifacts.
pub fn artifact_dir(res: &Resolved, out_root: Option<&Path>) -> PathBuf {
    let root = out_root
        .map(Path::to_path_buf)
        .or_else(|| res.config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("abq-out"));
    root.join(&res.name)
}

pub fn write_artifacts(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trace.csv"), &out.trace_csv)?;
    let json =
        serde_json::to_string_pretty(&out.report).map_err(|e| AbqError::Io(e.to_string()))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}

/// Parsed trace: the comment-row metadata and the `(n, sup_q_sqrt_k)` series.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub dim: usize,
    pub rate: Option<RatePrediction>,
    pub e_series: Vec<(usize, f64)>,
}

pub fn parse_rate_token(tok: &str) -> Result<Option<RatePrediction>> {
    if tok == "none" {
        return Ok(None);
    }
    let (kind, val) = tok
        .split_once(':')
        .ok_or_else(|| AbqError::Config(format!("rate token {tok:?} is not kind:value")))?;
    let v: f64 = val
        .parse()
        .map_err(|_| AbqError::Config(format!("rate token {tok:?} has a bad number")))?;
    match kind {
        "exponential" => Ok(Some(RatePrediction::Exponential { power: v })),
        "polynomial" => Ok(Some(RatePrediction::Polynomial { exponent: v })),
        _ => Err(AbqError::Config(format!("unknown rate model {kind:?}"))),
    }
}

pub fn parse_trace(text: &str, origin: &str) -> Result<Trace> {
    let bad = |line: usize, m: &str| AbqError::Config(format!("{origin}:{line}: {m}"));
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| bad(1, "empty trace"))?;
    let meta = meta
        .strip_prefix("# ")
        .and_then(|m| m.strip_prefix(TRACE_VERSION))
        .ok_or_else(|| {
            bad(
                1,
                &format!("first row is not a `# {TRACE_VERSION}` comment"),
            )
        })?;
    let mut dim = None;
    let mut rate = None;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("dim", v)) => dim = v.parse().ok(),
            Some(("rate", v)) => rate = parse_rate_token(v).map_err(|e| bad(1, &e.to_string()))?,
            _ => {}
        }
    }
    let dim: usize = dim.ok_or_else(|| bad(1, "missing dim"))?;
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| bad(2, &e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (n_col, e_col) = match (col("n"), col("sup_q_sqrt_k")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(bad(2, "header lacks n or sup_q_sqrt_k")),
    };
    let mut e_series = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(i + 3, &e.to_string()))?;
        let n = row[n_col].parse().map_err(|_| bad(i + 3, "bad n"))?;
        let e = row[e_col]
            .parse()
            .map_err(|_| bad(i + 3, "bad sup_q_sqrt_k"))?;
        e_series.push((n, e));
    }
    Ok(Trace {
        dim,
        rate,
        e_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::builtin::preset;

    #[test]
    fn minimal_preset_gives_ten_monotone_rows() {
        let cfg = preset("minimal").unwrap().remove(0);
        let res = resolve(&cfg).unwrap();
        let out = execute(&res).unwrap();
        let rows: Vec<&str> = out.trace_csv.lines().collect();
        assert!(rows[0].starts_with("# abq-lab trace v1"));
        assert_eq!(rows.len(), 12);
        let t = parse_trace(&out.trace_csv, "t").unwrap();
        assert_eq!(t.e_series.len(), 10);
        assert!(t.e_series.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert_eq!(t.rate, Some(RatePrediction::Exponential { power: 1.0 }));
        let c = out.report.certificate.done().unwrap();
        assert!(c.passed);
    }

    #[test]
    fn square_alpha_defaults_from_pilot_scan() {
        let mut cfg = preset("minimal").unwrap().remove(0);
        cfg.integrand = IntegrandConfig::Builtin("shifted-bump-1d".into());
        cfg.transform = Some(TransformConfig::Square {
            alpha: None,
            branch: Default::default(),
        });
        cfg.grids.certificate = Some(64);
        let res = resolve(&cfg).unwrap();
        assert_eq!(res.pilot_evaluations, 64);
        let TransformSpec::Square { alpha, .. } = res.prior.transform else {
            panic!()
        };
        let min_f = res
            .certificate_grid()
            .iter()
            .map(|x| res.integrand.eval(x).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((alpha - 0.8 * min_f).abs() < 1e-15);
    }

    #[test]
    fn unknown_norm_is_reported_not_guessed() {
        let cfg = preset("minimal").unwrap().remove(0);
        let mut res = resolve(&cfg).unwrap();
        res.spec.rule = AdaptiveTermRule::WsabiL;
        match res.clcu() {
            Clcu::Absent { reason } => assert!(reason.contains("kernel")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_parser_rejects_foreign_files() {
        assert!(parse_trace("n,x0\n1,2\n", "t").is_err());
        assert!(parse_trace("", "t").is_err());
    }
}
