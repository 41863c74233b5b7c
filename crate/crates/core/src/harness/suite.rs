//! The property suite behind `verify`: one pass/fail line per theorem tag.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::builtin::{self, random_synthetic};
use super::config::{
    AcquisitionConfig, AnalysisConfig, ExperimentConfig, GridConfig, IntegrandConfig, RuleConfig,
    SelectorSection, SCHEMA_VERSION,
};
use super::experiment::{self, ExperimentOutput, Resolved};
use super::run_all;
use crate::acquisition::OuterFunction;
use crate::analysis::{projection_distance_sq_with, OracleMutation};
use crate::domain::{Density, DensityKind, Domain, MeanFunction, Point};
use crate::error::Result;
use crate::gp::GpState;
use crate::kernels::{KernelSpec, MaternOrder};
use crate::real::{Mp, Real};
use crate::transforms::TransformSpec;

#[derive(Clone, Debug, Serialize)]
pub struct TagResult {
    pub tag: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub experiments: usize,
    pub experiment_failures: Vec<String>,
    pub tags: Vec<TagResult>,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.tags.iter().all(|t| t.passed) && self.experiment_failures.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma1Outcome {
    pub configs: usize,
    pub max_rel_err: f64,
    pub failures: usize,
}

fn random_kernel(rng: &mut ChaCha8Rng) -> KernelSpec {
    match rng.random_range(0..3) {
        0 => KernelSpec::SquaredExponential {
            gamma: rng.random_range(0.3..1.0),
        },
        1 => KernelSpec::Matern {
            nu: [
                MaternOrder::Half,
                MaternOrder::ThreeHalves,
                MaternOrder::FiveHalves,
            ][rng.random_range(0..3)],
            ell: rng.random_range(0.2..0.8),
        },
        _ => KernelSpec::InverseMultiquadric {
            beta: rng.random_range(0.5..1.5),
            c: rng.random_range(0.3..1.0),
        },
    }
}

/// Compares `q²·posterior_var` with the projection oracle over random
/// configurations, in 256-bit arithmetic.
pub fn lemma1_check(
    configs: usize,
    seed: u64,
    mutation: OracleMutation,
    tol: f64,
) -> Result<Lemma1Outcome> {
    type M = Mp<256>;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..configs {
        let d = rng.random_range(1..=2);
        let dom = Domain::unit(d);
        let kernel = random_kernel(&mut rng);
        let center: Point = (0..d).map(|_| rng.random()).collect();
        let q = Density::new(
            DensityKind::Quadratic {
                c0: rng.random_range(0.2..1.5),
                curvature: rng.random_range(0.0..3.0),
                center,
            },
            dom,
        )?;
        let n = rng.random_range(0..=10);
        let xs: Vec<Point> = (0..n)
            .map(|_| (0..d).map(|_| rng.random()).collect())
            .collect();
        let x: Point = (0..d).map(|_| rng.random()).collect();
        let s: GpState<M> = GpState::from_data(
            kernel.clone(),
            MeanFunction::zero().into(),
            xs.clone(),
            vec![0.0; n],
        )?;
        let qx = M::from_f64(q.eval(&x));
        let lhs = qx.mul_ref(&qx) * s.posterior_var(&x)?;
        let rhs: M = projection_distance_sq_with(&kernel, &q, &xs, &x, mutation)?;
        let diff = (lhs - &rhs).abs();
        let rel = if rhs > M::zero() {
            (diff / &rhs).to_f64()
        } else {
            diff.to_f64()
        };
        max_rel = max_rel.max(rel);
        if !(rel <= tol) {
            failures += 1;
        }
    }
    Ok(Lemma1Outcome {
        configs,
        max_rel_err: max_rel,
        failures,
    })
}

/// Worst `ψ(c)·F⁻¹(z) − F⁻¹(c·z)` over random `(c, z)` for both outer
/// families (power with δ = 2 and expm1).
pub fn psi_check(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for outer in [OuterFunction::Power { delta: 2.0 }, OuterFunction::Expm1] {
        for _ in 0..samples {
            let c: f64 = rng.random_range(1e-6..=1.0);
            let z: f64 = 10f64.powf(rng.random_range(-8.0..2.0));
            let gap = outer.psi(c)? * outer.inverse(z) - outer.inverse(c * z);
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

fn resolve_all(cfgs: &[ExperimentConfig]) -> Result<Vec<Resolved>> {
    cfgs.iter().map(experiment::resolve).collect()
}

/// Runs a preset (after `tweak`) and returns its outputs in matrix order.
pub fn run_preset(
    name: &str,
    width: usize,
    tweak: impl Fn(&mut ExperimentConfig),
) -> Result<Vec<(Resolved, ExperimentOutput)>> {
    let mut cfgs = builtin::preset(name)?;
    cfgs.iter_mut().for_each(&tweak);
    let res = resolve_all(&cfgs)?;
    let outs = run_all(&res, width);
    res.into_iter()
        .zip(outs)
        .map(|(r, o)| o.map(|o| (r, o)))
        .collect()
}

/// Synthetic integrands with known norm, `per_transform` for each of the
/// identity, square and exponential transforms.
pub fn prop1_configs(per_transform: usize, seed: u64) -> Vec<ExperimentConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = Domain::unit(1);
    let mut out = Vec::new();
    for t in [
        TransformSpec::Identity,
        TransformSpec::square(0.2),
        TransformSpec::Exponential,
    ] {
        for i in 0..per_transform {
            let kernel = KernelSpec::SquaredExponential {
                gamma: rng.random_range(0.25..0.5),
            };
            let s = random_synthetic(&mut rng, &dom, kernel.clone(), t);
            let rule = match i % 3 {
                0 => RuleConfig::Constant { c: 1.0 },
                1 => RuleConfig::WsabiM,
                _ => RuleConfig::Mmlt,
            };
            out.push(ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                name: Some(format!("bound-{}-{i}", t.name())),
                seed: seed + i as u64,
                precision: "mp256".into(),
                domain: dom.clone(),
                kernel,
                transform: None,
                mean: None,
                acquisition: AcquisitionConfig {
                    outer: OuterFunction::identity(),
                    q: None,
                    rule,
                    gamma_tilde: 1.0,
                },
                selector: SelectorSection::default(),
                integrand: IntegrandConfig::Synthetic(s),
                pi: None,
                budget: 30,
                grids: GridConfig {
                    certificate: Some(1024),
                    oracle: Some(64),
                    reference: Some(128),
                    fill: Some(257),
                },
                analysis: AnalysisConfig {
                    certificate: false,
                    surrogates: false,
                    ..AnalysisConfig::default()
                },
                output: None,
                matrix: Vec::new(),
            });
        }
    }
    out
}

/// Options for [`verify`].
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub width: usize,
    pub grid: Option<usize>,
    pub mutation: OracleMutation,
    /// User experiments run alongside the builtin suite.
    pub experiments: Vec<ExperimentConfig>,
    pub out: Option<std::path::PathBuf>,
    /// Restrict the suite to these tags; all when empty.
    pub tags: Vec<String>,
}

/// Tags in suite order.
pub const TAGS: &[&str] = &[
    "Lemma1",
    "psi",
    "Thm1",
    "weak-adaptivity",
    "Prop1",
    "Thm2-form",
    "Thm3-form",
    "wsabi-caveat",
];

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 2024,
            width: 1,
            grid: None,
            mutation: OracleMutation::None,
            experiments: Vec::new(),
            out: None,
            tags: Vec::new(),
        }
    }
}

fn timed(tag: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> TagResult {
    let t0 = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("aborted: {e}")));
    TagResult {
        tag,
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn save(out: &Option<std::path::PathBuf>, runs: &[(Resolved, ExperimentOutput)]) -> Result<()> {
    if let Some(root) = out {
        for (r, o) in runs {
            experiment::write_artifacts(o, &experiment::artifact_dir(r, Some(root)))?;
        }
    }
    Ok(())
}

/// Runs the full property suite.
pub fn verify(opts: &VerifyOptions) -> SuiteSummary {
    let grid = opts.grid;
    let tweak = |c: &mut ExperimentConfig| {
        if grid.is_some() {
            c.grids.certificate = grid;
        }
    };
    let mut tags = Vec::new();
    let wanted = |t: &str| opts.tags.is_empty() || opts.tags.iter().any(|w| w == t);

    if wanted("Lemma1") {
        tags.push(timed("Lemma1", || {
            let o = lemma1_check(200, opts.seed, opts.mutation, 1e-8)?;
            Ok((
                o.failures == 0,
                format!(
                    "{} configs, max relative gap {:.2e}, {} above 1e-8",
                    o.configs, o.max_rel_err, o.failures
                ),
            ))
        }));
    }

    if wanted("psi") {
        tags.push(timed("psi", || {
            let w = psi_check(10_000, opts.seed)?;
            Ok((w <= 1e-12, format!("worst psi gap {w:.2e}")))
        }));
    }

    if wanted("Thm1") {
        tags.push(timed("Thm1", || {
            let runs = run_preset("certificate-matrix", opts.width, tweak)?;
            save(&opts.out, &runs)?;
            let mut bad = Vec::new();
            let mut min_margin = f64::INFINITY;
            for (r, o) in &runs {
                let Some(c) = o.report.certificate.done() else {
                    bad.push(format!("{}: no certificate", r.name));
                    continue;
                };
                for st in &c.steps {
                    min_margin = min_margin.min(st.rho - st.gamma_hat);
                }
                if !c.passed {
                    bad.push(format!("{}: {} violations", r.name, c.violations.len()));
                }
            }
            Ok((
                bad.is_empty(),
                format!(
                    "{} runs, min(rho - gamma_hat) = {min_margin:.3e}{}",
                    runs.len(),
                    list(&bad)
                ),
            ))
        }));
    }

    if wanted("weak-adaptivity") {
        tags.push(timed("weak-adaptivity", || {
            let runs = run_preset("weak-adaptivity", opts.width, tweak)?;
            save(&opts.out, &runs)?;
            let mut bad = Vec::new();
            for (r, o) in &runs {
                let w = &o.report.weak_adaptivity;
                if !w.checked || !w.violations.is_empty() {
                    bad.push(format!(
                        "{}: checked={} violations={}",
                        r.name,
                        w.checked,
                        w.violations.len()
                    ));
                }
            }
            Ok((bad.is_empty(), format!("{} runs{}", runs.len(), list(&bad))))
        }));
    }

    if wanted("Prop1") {
        tags.push(timed("Prop1", || {
            let cfgs = prop1_configs(5, opts.seed);
            let res = resolve_all(&cfgs)?;
            let outs = run_all(&res, opts.width);
            let mut bad = Vec::new();
            let mut checked = 0;
            let mut runs = Vec::new();
            for (r, o) in res.into_iter().zip(outs) {
                let o = o?;
                match o.report.bound_check.done() {
                    Some(b) => {
                        checked += b.rows.len();
                        if !b.passed {
                            bad.push(format!("{}: n = {:?}", r.name, b.violations));
                        }
                    }
                    None => bad.push(format!("{}: bound check skipped", r.name)),
                }
                runs.push((r, o));
            }
            save(&opts.out, &runs)?;
            Ok((
                bad.is_empty(),
                format!(
                    "{} runs, {checked} (run, n) pairs checked{}",
                    runs.len(),
                    list(&bad)
                ),
            ))
        }));
    }

    if wanted("Thm2-form") {
        tags.push(timed("Thm2-form", || {
            let mut lines = Vec::new();
            let mut ok = true;
            for (preset, min_r2) in [("rate-se-1d", 0.95), ("rate-se-2d", 0.90)] {
                let runs = run_preset(preset, opts.width, tweak)?;
                save(&opts.out, &runs)?;
                let (_, o) = &runs[0];
                match o.report.rate_fit.done() {
                    Some(f) => {
                        ok &= f.r_squared >= min_r2 && f.slope < 0.0;
                        lines.push(format!(
                            "{preset}: slope {:.4}, R² {:.4} (need ≥ {min_r2})",
                            f.slope, f.r_squared
                        ));
                    }
                    None => {
                        ok = false;
                        lines.push(format!("{preset}: no fit"));
                    }
                }
            }
            Ok((ok, lines.join("; ")))
        }));
    }

    if wanted("Thm3-form") {
        tags.push(timed("Thm3-form", || {
            let runs = run_preset("rate-matern-1d", opts.width, tweak)?;
            save(&opts.out, &runs)?;
            let (_, o) = &runs[0];
            Ok(match o.report.rate_fit.done() {
                Some(f) => (
                    f.slope <= -1.2,
                    format!(
                        "log-log slope {:.4} (need ≤ -1.2), R² {:.4}",
                        f.slope, f.r_squared
                    ),
                ),
                None => (false, "no fit".into()),
            })
        }));
    }

    if wanted("wsabi-caveat") {
        tags.push(timed("wsabi-caveat", || {
            let runs = run_preset("wsabi-caveat", opts.width, tweak)?;
            save(&opts.out, &runs)?;
            let (_, zero) = &runs[0];
            let (_, shifted) = &runs[1];
            let flagged = zero
                .report
                .findings
                .iter()
                .any(|f| f.tag == "wsabi-consistency");
            Ok((
                flagged,
                format!(
                    "zero mean: C_L {}, e_30 = {:.3e}; shifted mean: e_30 = {:.3e}",
                    if flagged {
                        "absent (flagged)"
                    } else {
                        "not flagged"
                    },
                    zero.report.run.e_last,
                    shifted.report.run.e_last
                ),
            ))
        }));
    }

    let mut experiment_failures = Vec::new();
    let experiments = opts.experiments.len();
    if experiments > 0 {
        match resolve_all(&opts.experiments) {
            Ok(res) => {
                for (r, o) in res.iter().zip(run_all(&res, opts.width)) {
                    match o {
                        Ok(o) => {
                            if let Some(root) = &opts.out {
                                if let Err(e) = experiment::write_artifacts(
                                    &o,
                                    &experiment::artifact_dir(r, Some(root)),
                                ) {
                                    experiment_failures.push(format!("{}: {e}", r.name));
                                }
                            }
                        }
                        Err(e) => experiment_failures.push(format!("{}: {e}", r.name)),
                    }
                }
            }
            Err(e) => experiment_failures.push(e.to_string()),
        }
    }
    SuiteSummary {
        experiments,
        experiment_failures,
        tags,
    }
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", items.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma1_check_passes_and_detects_mutation() {
        let ok = lemma1_check(30, 5, OracleMutation::None, 1e-8).unwrap();
        assert_eq!(ok.failures, 0, "{ok:?}");
        let bad = lemma1_check(30, 5, OracleMutation::DropNodeWeight, 1e-8).unwrap();
        assert!(bad.failures > 0);
    }

    #[test]
    fn psi_check_is_clean() {
        assert!(psi_check(2000, 1).unwrap() <= 1e-12);
    }

    #[test]
    fn prop1_configs_cover_three_transforms() {
        let c = prop1_configs(2, 3);
        assert_eq!(c.len(), 6);
        let r = experiment::resolve(&c[2]).unwrap();
        assert!(r.known_residual().is_ok());
        assert_eq!(r.prior.transform, TransformSpec::square(0.2));
    }
}
