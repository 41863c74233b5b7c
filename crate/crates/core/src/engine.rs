//! The sequential ABQ loop: weak point selection, integrand evaluation, GP
//! update, and the two quadrature estimators.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcqValue, AcquisitionSpec};
use crate::domain::{Density, Domain, Integrand, MeanFunction, Point};
use crate::error::{AbqError, Result};
use crate::exec;
use crate::gp::{GpState, PosteriorCache};
use crate::kernels::KernelSpec;
use crate::quadrature::{reference_integral, IntegralEstimate, TensorRule};
use crate::real::Real;
use crate::transforms::TransformSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateScheme {
    /// Tensor grid with endpoints, about `candidate_count` points.
    UniformGrid,
    /// Box corners followed by a Halton sequence.
    LowDiscrepancy,
    /// One pool of uniform draws per run.
    UniformRandom { seed: u64 },
    /// Reuse the certificate grid as the candidate pool.
    CertificateGrid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Largest acquisition value; lowest candidate index wins ties.
    #[default]
    Argmax,
    /// First candidate (in enumeration order) with `a ≥ γ̃·max a`.
    WeakFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    pub candidate_count: usize,
    pub candidate_scheme: CandidateScheme,
    #[serde(default)]
    pub local_refinement_steps: usize,
    #[serde(default)]
    pub policy: SelectionPolicy,
    /// Certificate grid size; `2048·d` when unset.
    #[serde(default)]
    pub certificate_count: Option<usize>,
}

impl SelectorConfig {
    pub fn shared_grid(certificate_count: usize) -> Self {
        SelectorConfig {
            candidate_count: certificate_count,
            candidate_scheme: CandidateScheme::CertificateGrid,
            local_refinement_steps: 0,
            policy: SelectionPolicy::Argmax,
            certificate_count: Some(certificate_count),
        }
    }

    pub fn certificate_size(&self, d: usize) -> usize {
        self.certificate_count.unwrap_or(2048 * d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidate_count < 2 {
            return Err(AbqError::InvalidArgument(
                "candidate_count must be at least 2".into(),
            ));
        }
        if self.certificate_count == Some(0) {
            return Err(AbqError::InvalidArgument(
                "certificate_count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The certificate grid used for every supremum over the domain.
pub fn certificate_grid(dom: &Domain, count: usize) -> Vec<Point> {
    dom.low_discrepancy(count)
}

pub fn candidate_pool(dom: &Domain, cfg: &SelectorConfig) -> Vec<Point> {
    let d = dom.dim();
    match cfg.candidate_scheme {
        CandidateScheme::UniformGrid => {
            let per_axis = (cfg.candidate_count as f64).powf(1.0 / d as f64).round() as usize;
            dom.uniform_grid(per_axis.max(2))
        }
        CandidateScheme::LowDiscrepancy => dom.low_discrepancy(cfg.candidate_count),
        CandidateScheme::UniformRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..cfg.candidate_count)
                .map(|_| {
                    (0..d)
                        .map(|a| rng.random_range(dom.lower()[a]..=dom.upper()[a]))
                        .collect()
                })
                .collect()
        }
        CandidateScheme::CertificateGrid => certificate_grid(dom, cfg.certificate_size(d)),
    }
}

/// Outcome of one selection.
#[derive(Clone, Debug)]
pub struct Selection {
    pub point: Point,
    pub candidate_index: usize,
    pub refined: bool,
    pub a_chosen: f64,
    /// `max a_ℓ` over the certificate grid.
    pub a_max_grid: f64,
    /// `a_chosen / a_max_grid`.
    pub ratio: f64,
    /// `q² k_ℓ` at the chosen point and its maximum over the grid.
    pub scaled_var_chosen: f64,
    pub scaled_var_max_grid: f64,
    /// `b_ℓ` range over the grid together with the chosen point.
    pub b_min: f64,
    pub b_max: f64,
    pub clamp_events: usize,
}

impl Selection {
    /// `sqrt(q²k_ℓ(x_{ℓ+1}) / max_grid q²k_ℓ)`; by the projection identity
    /// this is the greedy ratio of the selection.
    pub fn greedy_ratio(&self) -> f64 {
        (self.scaled_var_chosen / self.scaled_var_max_grid).sqrt()
    }
}

#[derive(Clone, Debug)]
pub enum SelectOutcome {
    Chosen(Selection),
    /// Every candidate has zero acquisition (or lies in the span of the design).
    Converged,
}

/// Candidate pool and certificate grid with cached posterior values.
pub struct Selector<R: Real> {
    spec: AcquisitionSpec,
    cfg: SelectorConfig,
    domain: Domain,
    grid: PosteriorCache<R>,
    candidates: Option<PosteriorCache<R>>,
    step0: Vec<f64>,
}

fn evaluate_all<R: Real>(
    spec: &AcquisitionSpec,
    cache: &PosteriorCache<R>,
    ell: usize,
) -> Result<Vec<AcqValue<R>>> {
    exec::map_indexed(cache.len(), |i| {
        spec.from_posterior(&cache.mean(i), &cache.var(i), &cache.points()[i], ell)
    })
    .into_iter()
    .collect()
}

impl<R: Real> Selector<R> {
    pub fn new(
        spec: AcquisitionSpec,
        cfg: SelectorConfig,
        domain: Domain,
        state: &GpState<R>,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = domain.dim();
        let grid = PosteriorCache::new(state, certificate_grid(&domain, cfg.certificate_size(d)))?;
        let candidates = match cfg.candidate_scheme {
            CandidateScheme::CertificateGrid => None,
            _ => Some(PosteriorCache::new(state, candidate_pool(&domain, &cfg))?),
        };
        let pool = candidates.as_ref().map_or(grid.len(), |c| c.len());
        let step0 = (0..d)
            .map(|a| 0.5 * domain.width(a) / (pool as f64).powf(1.0 / d as f64))
            .collect();
        Ok(Selector {
            spec,
            cfg,
            domain,
            grid,
            candidates,
            step0,
        })
    }

    pub fn grid(&self) -> &PosteriorCache<R> {
        &self.grid
    }

    pub fn spec(&self) -> &AcquisitionSpec {
        &self.spec
    }

    pub fn absorb(&mut self, state: &GpState<R>) -> Result<()> {
        self.grid.absorb(state)?;
        if let Some(c) = self.candidates.as_mut() {
            c.absorb(state)?;
        }
        Ok(())
    }

    /// `q(x)² k_ℓ(x,x)` on the certificate grid, as `f64`.
    pub fn grid_scaled_var(&self) -> Vec<f64> {
        let q = &self.spec.q;
        (0..self.grid.len())
            .map(|i| {
                let qx = q.eval(&self.grid.points()[i]);
                (R::from_f64(qx * qx) * self.grid.var(i)).to_f64()
            })
            .collect()
    }

    /// Picks `x_{ℓ+1}`. Points in `excluded` are never returned.
    pub fn select(
        &mut self,
        state: &GpState<R>,
        ell: usize,
        excluded: &[Point],
    ) -> Result<SelectOutcome> {
        self.absorb(state)?;
        let kxx: R = state.kernel().diag();
        let threshold = R::from_f64(state.dependence_threshold(kxx.to_f64()));
        let grid_vals = evaluate_all(&self.spec, &self.grid, ell)?;
        let cand_vals = match &self.candidates {
            Some(c) => Some(evaluate_all(&self.spec, c, ell)?),
            None => None,
        };
        let (pool, pool_vals) = match (&self.candidates, &cand_vals) {
            (Some(c), Some(v)) => (c, v),
            _ => (&self.grid, &grid_vals),
        };

        let usable = |i: usize| -> bool {
            pool.var(i) > threshold && !excluded.iter().any(|e| e == &pool.points()[i])
        };
        let mut max_a: Option<(usize, R)> = None;
        for (i, v) in pool_vals.iter().enumerate() {
            if !usable(i) {
                continue;
            }
            if max_a.as_ref().is_none_or(|(_, m)| v.a > *m) {
                max_a = Some((i, v.a.clone()));
            }
        }
        let (best, best_a) = match max_a {
            Some((i, a)) if a > R::zero() => (i, a),
            _ => return Ok(SelectOutcome::Converged),
        };
        let chosen = match self.cfg.policy {
            crate::engine::SelectionPolicy::Argmax => best,
            crate::engine::SelectionPolicy::WeakFirst => {
                let bar = R::from_f64(self.spec.gamma_tilde) * &best_a;
                (0..pool.len())
                    .find(|&i| usable(i) && pool_vals[i].a >= bar)
                    .unwrap_or(best)
            }
        };

        let mut point = pool.points()[chosen].clone();
        let mut value = pool_vals[chosen].clone();
        let mut refined = false;
        if self.cfg.local_refinement_steps > 0 {
            let (p, v, moved) = self.refine(
                state,
                ell,
                point.clone(),
                value.clone(),
                &threshold,
                excluded,
            )?;
            point = p;
            value = v;
            refined = moved;
        }

        let mut a_max_grid = R::zero();
        let mut sv_max_grid = R::zero();
        let mut b_min = value.b.clone();
        let mut b_max = value.b.clone();
        let mut clamp_events = value.b_clamped as usize;
        for v in &grid_vals {
            if v.a > a_max_grid {
                a_max_grid = v.a.clone();
            }
            if v.scaled_var > sv_max_grid {
                sv_max_grid = v.scaled_var.clone();
            }
            if v.b < b_min {
                b_min = v.b.clone();
            }
            if v.b > b_max {
                b_max = v.b.clone();
            }
            clamp_events += v.b_clamped as usize;
        }
        let ratio = if a_max_grid > R::zero() {
            (value.a.clone() / &a_max_grid).to_f64()
        } else {
            f64::INFINITY
        };
        Ok(SelectOutcome::Chosen(Selection {
            point,
            candidate_index: chosen,
            refined,
            a_chosen: value.a.to_f64(),
            a_max_grid: a_max_grid.to_f64(),
            ratio,
            scaled_var_chosen: value.scaled_var.to_f64(),
            scaled_var_max_grid: sv_max_grid.to_f64(),
            b_min: b_min.to_f64(),
            b_max: b_max.to_f64(),
            clamp_events,
        }))
    }

    /// Coordinate hill climbing with step halving, clamped to the domain.
    fn refine(
        &self,
        state: &GpState<R>,
        ell: usize,
        mut x: Point,
        mut best: AcqValue<R>,
        threshold: &R,
        excluded: &[Point],
    ) -> Result<(Point, AcqValue<R>, bool)> {
        let mut step = self.step0.clone();
        let mut moved = false;
        for _ in 0..self.cfg.local_refinement_steps {
            let mut improved = false;
            for axis in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[axis] += dir * step[axis];
                    self.domain.clamp(&mut y);
                    if y == x || excluded.contains(&y) {
                        continue;
                    }
                    let (m, v) = state.posterior(&y)?;
                    if !(v > *threshold) {
                        continue;
                    }
                    let val = self.spec.from_posterior(&m, &v, &y, ell)?;
                    if val.a > best.a {
                        x = y;
                        best = val;
                        improved = true;
                        moved = true;
                    }
                }
            }
            if !improved {
                for s in step.iter_mut() {
                    *s *= 0.5;
                }
            }
        }
        Ok((x, best, moved))
    }
}

/// One-shot selection without cached state.
pub fn select_next<R: Real>(
    spec: &AcquisitionSpec,
    cfg: &SelectorConfig,
    domain: &Domain,
    s: &GpState<R>,
    ell: usize,
) -> Result<SelectOutcome> {
    Selector::new(spec.clone(), cfg.clone(), domain.clone(), s)?.select(s, ell, &[])
}

/// Quadrature problem: integrand, density and domain.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub integrand: &'a dyn Integrand,
    pub pi: &'a Density,
    pub domain: &'a Domain,
}

/// GP prior and warping transform.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    pub kernel: KernelSpec,
    pub mean: MeanFunction,
    pub transform: TransformSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Nodes per axis of the estimator quadrature rule.
    pub oracle_resolution: usize,
    /// Nodes per axis of the ground-truth rule; `None` skips ground truth.
    pub reference_resolution: Option<usize>,
    /// Points per axis of the fill-distance grid.
    pub fill_resolution: usize,
}

impl RunOptions {
    pub fn for_dim(d: usize) -> Self {
        match d {
            1 => RunOptions {
                oracle_resolution: 256,
                reference_resolution: Some(512),
                fill_resolution: 1025,
            },
            2 => RunOptions {
                oracle_resolution: 64,
                reference_resolution: Some(128),
                fill_resolution: 129,
            },
            _ => RunOptions {
                oracle_resolution: 16,
                reference_resolution: Some(32),
                fill_resolution: 17,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Converged,
    /// Too many consecutive selections were linearly dependent.
    Dependent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimates {
    pub plugin: f64,
    pub expectation: f64,
    /// Resolution-halving self-estimates of the two rules.
    pub plugin_self_error: f64,
    pub expectation_self_error: f64,
}

/// Diagnostics after conditioning on `n` points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Iteration {
    pub n: usize,
    pub point: Point,
    pub observation: f64,
    pub latent: f64,
    pub refined: bool,
    pub a_chosen: f64,
    pub a_max_grid: f64,
    pub acquisition_ratio: f64,
    pub greedy_ratio: f64,
    pub b_min: f64,
    pub b_max: f64,
    /// `sup_grid q √k_{X_n}`.
    pub sup_q_sqrt_k: f64,
    /// Largest change of `q²k_{X_n}` between grid nearest neighbours.
    pub modulus_slack: f64,
    pub estimates: Estimates,
    pub abs_error_plugin: Option<f64>,
    pub abs_error_expectation: Option<f64>,
    pub fill_distance: f64,
    pub clamp_events: usize,
    pub dependent_skips: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub dim: usize,
    pub precision: &'static str,
    pub certificate_grid_size: usize,
    pub reference: Option<IntegralEstimate>,
    pub prior_estimates: Estimates,
    pub prior_sup_q_sqrt_k: f64,
    pub prior_modulus_slack: f64,
    pub iterations: Vec<Iteration>,
    pub termination: Termination,
    pub jitter: f64,
    pub jitter_doublings: u32,
    pub clamp_events: usize,
    pub evaluations: usize,
}

impl RunRecord {
    pub fn points(&self) -> Vec<Point> {
        self.iterations.iter().map(|it| it.point.clone()).collect()
    }

    /// `(n, e_n)` including `n = 0`.
    pub fn e_series(&self) -> Vec<(usize, f64)> {
        std::iter::once((0, self.prior_sup_q_sqrt_k))
            .chain(self.iterations.iter().map(|it| (it.n, it.sup_q_sqrt_k)))
            .collect()
    }
}

/// Posterior values on a quadrature rule and on its half-resolution twin.
struct EstimatorCache<R: Real> {
    fine: (TensorRule, PosteriorCache<R>, Vec<f64>),
    coarse: (TensorRule, PosteriorCache<R>, Vec<f64>),
}

impl<R: Real> EstimatorCache<R> {
    fn new(state: &GpState<R>, pi: &Density, dom: &Domain, resolution: usize) -> Result<Self> {
        let make = |res: usize| -> Result<(TensorRule, PosteriorCache<R>, Vec<f64>)> {
            let rule = TensorRule::new(dom, res)?;
            let cache = PosteriorCache::new(state, rule.nodes.clone())?;
            let pis = rule.nodes.iter().map(|x| pi.eval(x)).collect();
            Ok((rule, cache, pis))
        };
        Ok(EstimatorCache {
            fine: make(resolution.max(2))?,
            coarse: make((resolution / 2).max(1))?,
        })
    }

    fn absorb(&mut self, state: &GpState<R>) -> Result<()> {
        self.fine.1.absorb(state)?;
        self.coarse.1.absorb(state)
    }

    fn estimates(&self, t: &TransformSpec) -> Result<Estimates> {
        let one =
            |(rule, cache, pis): &(TensorRule, PosteriorCache<R>, Vec<f64>)| -> Result<(f64, f64)> {
                let vals: Vec<Result<(f64, f64)>> = exec::map_indexed(cache.len(), |i| {
                    let m = cache.mean(i).to_f64();
                    let v = cache.var(i).to_f64();
                    Ok((
                        t.forward(m)? * pis[i],
                        t.posterior_expectation(m, v)? * pis[i],
                    ))
                });
                let vals: Vec<(f64, f64)> = vals.into_iter().collect::<Result<_>>()?;
                let p: Vec<f64> = vals.iter().map(|v| v.0).collect();
                let e: Vec<f64> = vals.iter().map(|v| v.1).collect();
                Ok((rule.sum(&p), rule.sum(&e)))
            };
        let (pf, ef) = one(&self.fine)?;
        let (pc, ec) = one(&self.coarse)?;
        Ok(Estimates {
            plugin: pf,
            expectation: ef,
            plugin_self_error: (pf - pc).abs(),
            expectation_self_error: (ef - ec).abs(),
        })
    }
}

/// Index of the nearest other point, for every point.
pub fn nearest_neighbours(points: &[Point]) -> Vec<usize> {
    exec::map_indexed(points.len(), |i| {
        let mut best = (f64::INFINITY, i);
        for (j, p) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            let d: f64 = p
                .iter()
                .zip(&points[i])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    })
}

/// `max_i |v_i − v_{nn(i)}|`: a one-cell modulus-of-continuity estimate used
/// to widen grid suprema.
pub fn grid_modulus(values: &[f64], nn: &[usize]) -> f64 {
    values
        .iter()
        .zip(nn)
        .map(|(v, &j)| (v - values[j]).abs())
        .fold(0.0, f64::max)
}

/// Running `min_i ‖x − x_i‖` over a fixed evaluation grid.
struct FillTracker {
    grid: Vec<Point>,
    dist2: Vec<f64>,
}

impl FillTracker {
    fn new(dom: &Domain, per_axis: usize) -> Self {
        let grid = dom.uniform_grid(per_axis);
        let dist2 = vec![f64::INFINITY; grid.len()];
        FillTracker { grid, dist2 }
    }

    fn add(&mut self, x: &[f64]) -> f64 {
        let grid = &self.grid;
        exec::for_each_mut(&mut self.dist2, |i, d| {
            let v: f64 = grid[i].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if v < *d {
                *d = v;
            }
        });
        self.dist2.iter().cloned().fold(0.0, f64::max).sqrt()
    }
}

/// Consecutive linearly dependent selections tolerated before stopping.
const MAX_DEPENDENT_SKIPS: usize = 16;

/// Runs `n` iterations of ABQ and returns the final state with its record.
pub fn run_abq<R: Real>(
    problem: Problem<'_>,
    prior: &Prior,
    spec: &AcquisitionSpec,
    cfg: &SelectorConfig,
    opts: &RunOptions,
    n: usize,
) -> Result<(GpState<R>, RunRecord)> {
    let dom = problem.domain;
    let d = dom.dim();
    spec.validate()?;
    cfg.validate()?;
    prior.kernel.validate(d)?;
    prior.mean.validate(d)?;
    prior.transform.validate()?;

    let reference = match opts.reference_resolution {
        Some(res) => Some(reference_integral(problem.integrand, problem.pi, dom, res)?),
        None => None,
    };
    let mut state: GpState<R> = GpState::new(prior.kernel.clone(), Arc::new(prior.mean.clone()));
    let mut selector = Selector::new(spec.clone(), cfg.clone(), dom.clone(), &state)?;
    let mut estimator = EstimatorCache::new(&state, problem.pi, dom, opts.oracle_resolution)?;
    let mut fill = FillTracker::new(dom, opts.fill_resolution);
    let nn = nearest_neighbours(selector.grid().points());

    let sup_e = |sel: &Selector<R>| -> (f64, f64) {
        let sv = sel.grid_scaled_var();
        let e = sv.iter().cloned().fold(0.0, f64::max).sqrt();
        (e, grid_modulus(&sv, &nn))
    };
    let prior_estimates = estimator.estimates(&prior.transform)?;
    let (prior_e, prior_slack) = sup_e(&selector);

    let mut iterations = Vec::with_capacity(n);
    let mut termination = Termination::Budget;
    let mut evaluations = 0;
    let mut clamp_total = 0;
    let mut ell = 0;
    'outer: while ell < n {
        let mut excluded: Vec<Point> = Vec::new();
        let (sel, f_val, z, next) = loop {
            let sel = match selector.select(&state, ell, &excluded)? {
                SelectOutcome::Chosen(s) => s,
                SelectOutcome::Converged => {
                    termination = Termination::Converged;
                    break 'outer;
                }
            };
            let f_val = problem.integrand.eval(&sel.point)?;
            evaluations += 1;
            let z = prior.transform.inverse(f_val).map_err(|e| match e {
                AbqError::TransformDomain {
                    transform, value, ..
                } => AbqError::TransformDomain {
                    transform,
                    value,
                    detail: "integrand value at a selected point is outside the transform's range",
                },
                other => other,
            })?;
            match state.extend(&sel.point, z) {
                Ok(next) => break (sel, f_val, z, next),
                Err(AbqError::LinearDependence { .. }) => {
                    excluded.push(sel.point.clone());
                    if excluded.len() >= MAX_DEPENDENT_SKIPS {
                        termination = Termination::Dependent;
                        break 'outer;
                    }
                }
                Err(e) => return Err(e),
            }
        };
        state = next;
        ell += 1;
        selector.absorb(&state)?;
        estimator.absorb(&state)?;
        let (e, slack) = sup_e(&selector);
        let est = estimator.estimates(&prior.transform)?;
        clamp_total += sel.clamp_events;
        iterations.push(Iteration {
            n: ell,
            point: sel.point.clone(),
            observation: f_val,
            latent: z,
            refined: sel.refined,
            a_chosen: sel.a_chosen,
            a_max_grid: sel.a_max_grid,
            acquisition_ratio: sel.ratio,
            greedy_ratio: sel.greedy_ratio(),
            b_min: sel.b_min,
            b_max: sel.b_max,
            sup_q_sqrt_k: e,
            modulus_slack: slack,
            abs_error_plugin: reference.map(|r| (r.value - est.plugin).abs()),
            abs_error_expectation: reference.map(|r| (r.value - est.expectation).abs()),
            estimates: est,
            fill_distance: fill.add(&sel.point),
            clamp_events: sel.clamp_events,
            dependent_skips: excluded.len(),
        });
    }

    let record = RunRecord {
        dim: d,
        precision: R::NAME,
        certificate_grid_size: selector.grid().len(),
        reference,
        prior_estimates,
        prior_sup_q_sqrt_k: prior_e,
        prior_modulus_slack: prior_slack,
        iterations,
        termination,
        jitter: state.jitter(),
        jitter_doublings: state.jitter_doublings(),
        clamp_events: clamp_total,
        evaluations,
    };
    Ok((state, record))
}

/// `∫ T(m_{g,X_n}) π dμ` with a tensor rule of `resolution` nodes per axis.
pub fn estimate_plugin<R: Real>(
    s: &GpState<R>,
    t: &TransformSpec,
    pi: &Density,
    dom: &Domain,
    resolution: usize,
) -> Result<IntegralEstimate> {
    let f = |x: &[f64]| t.forward(s.posterior_mean(x).to_f64());
    reference_integral(&ResultFn(f), pi, dom, resolution)
}

/// `∫ E[T(ǵ(x))] π dμ` under the GP posterior.
pub fn estimate_expectation<R: Real>(
    s: &GpState<R>,
    t: &TransformSpec,
    pi: &Density,
    dom: &Domain,
    resolution: usize,
) -> Result<IntegralEstimate> {
    let f = |x: &[f64]| {
        let v = s.posterior_var(x)?;
        t.posterior_expectation(s.posterior_mean(x).to_f64(), v.to_f64())
    };
    reference_integral(&ResultFn(f), pi, dom, resolution)
}

struct ResultFn<F>(F);

impl<F: Fn(&[f64]) -> Result<f64> + Sync> Integrand for ResultFn<F> {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}
