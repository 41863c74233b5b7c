//! Verification layer: the projection oracle, weak-greedy certificates, the
//! quadrature error bound, fill distance, n-width surrogates and rate fits.

use serde::Serialize;

use crate::acquisition::{Clcu, OuterFunction};
use crate::domain::{Density, Domain, Point, SyntheticIntegrand};
use crate::engine::RunRecord;
use crate::error::{AbqError, Result};
use crate::exec;
use crate::gp::{GpState, PosteriorCache, MAX_JITTER_DOUBLINGS};
use crate::kernels::{KernelSpec, RatePrediction};
use crate::quadrature::reference_integral;
use crate::real::Real;

/// Deliberate defects for checking that the oracle comparison can fail.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMutation {
    None,
    /// Leaves out the `q(xᵢ)` factors of the cross vector.
    DropNodeWeight,
}

/// `dist²(h_x, S_n)` with `h_x = q(x) k(·, x)` and `S_n = span{h_{xᵢ}}`:
/// `q(x)² k(x,x) − vᵀ G⁻¹ v`, `Gᵢⱼ = q(xᵢ) q(xⱼ) k(xᵢ,xⱼ)`,
/// `vᵢ = q(x) q(xᵢ) k(x,xᵢ)`. Solved by Gaussian elimination with partial
/// pivoting; no code is shared with the GP posterior.
pub fn projection_distance_sq<R: Real>(
    kernel: &KernelSpec,
    q: &Density,
    xs: &[Point],
    x: &[f64],
) -> Result<R> {
    projection_distance_sq_with(kernel, q, xs, x, OracleMutation::None)
}

#[doc(hidden)]
pub fn projection_distance_sq_with<R: Real>(
    kernel: &KernelSpec,
    q: &Density,
    xs: &[Point],
    x: &[f64],
    mutation: OracleMutation,
) -> Result<R> {
    let n = xs.len();
    let qx = R::from_f64(q.eval(x));
    let qi: Vec<R> = xs.iter().map(|p| R::from_f64(q.eval(p))).collect();
    let norm_sq = qx.mul_ref(&qx) * kernel.eval::<R>(x, x);
    if n == 0 {
        return Ok(norm_sq);
    }
    let mut g: Vec<Vec<R>> = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            g[i].push(qi[i].mul_ref(&qi[j]) * kernel.eval::<R>(&xs[i], &xs[j]));
        }
    }
    let v: Vec<R> = (0..n)
        .map(|i| {
            let k: R = kernel.eval(x, &xs[i]);
            match mutation {
                OracleMutation::None => qx.mul_ref(&qi[i]) * k,
                OracleMutation::DropNodeWeight => qx.mul_ref(&k),
            }
        })
        .collect();
    let max_diag = (0..n).map(|i| g[i][i].to_f64().abs()).fold(0.0, f64::max);
    let mut jitter = 0.0;
    for attempt in 0..=MAX_JITTER_DOUBLINGS + 1 {
        let mut a = g.clone();
        if jitter > 0.0 {
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += R::from_f64(jitter);
            }
        }
        if let Some(y) = gauss_solve(a, v.clone()) {
            let mut proj = R::zero();
            for (vi, yi) in v.iter().zip(&y) {
                proj += vi.mul_ref(yi);
            }
            let d2 = norm_sq.clone() - proj;
            return Ok(d2.max_of(R::zero()));
        }
        jitter = if attempt == 0 {
            R::jitter_scale() * max_diag
        } else {
            jitter * 2.0
        };
    }
    Err(AbqError::SingularGram {
        attempts: MAX_JITTER_DOUBLINGS,
        jitter,
    })
}

/// Solves `A y = b`; `None` for a numerically singular `A`.
fn gauss_solve<R: Real>(mut a: Vec<Vec<R>>, mut b: Vec<R>) -> Option<Vec<R>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v.to_f64().abs())
        .fold(0.0, f64::max);
    let tiny = R::from_f64(scale * R::epsilon() * n as f64);
    for c in 0..n {
        let mut p = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[p][c].abs() {
                p = r;
            }
        }
        if !(a[p][c].abs() > tiny) {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c].clone() / &a[c][c];
            for k in c..n {
                let t = f.mul_ref(&a[c][k]);
                a[r][k] -= t;
            }
            let t = f.mul_ref(&b[c]);
            b[r] -= t;
        }
    }
    let mut y = vec![R::zero(); n];
    for c in (0..n).rev() {
        let mut acc = b[c].clone();
        for k in c + 1..n {
            acc -= a[c][k].mul_ref(&y[k]);
        }
        y[c] = acc / &a[c][c];
    }
    Some(y)
}

/// Incremental Gram–Schmidt of `h_{x₁}, h_{x₂}, …` with distances of every
/// grid element kept up to date.
pub struct ProjectionOracle<R: Real> {
    kernel: KernelSpec,
    q: Density,
    grid: Vec<Point>,
    grid_q: Vec<f64>,
    grid_u: Vec<Vec<R>>,
    grid_d2: Vec<R>,
    basis: Vec<(Point, f64, Vec<R>, R)>,
}

impl<R: Real> ProjectionOracle<R> {
    pub fn new(kernel: KernelSpec, q: Density, grid: Vec<Point>) -> Self {
        let grid_q: Vec<f64> = grid.iter().map(|x| q.eval(x)).collect();
        let kxx: R = kernel.diag();
        let grid_d2 = grid_q
            .iter()
            .map(|qx| {
                let r = R::from_f64(*qx);
                r.mul_ref(&r) * &kxx
            })
            .collect();
        let grid_u = vec![Vec::new(); grid.len()];
        ProjectionOracle {
            kernel,
            q,
            grid,
            grid_q,
            grid_u,
            grid_d2,
            basis: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Coordinates of `h_x` in the orthonormal basis, and `dist²(h_x, S)`.
    fn coords(&self, x: &[f64], qx: f64) -> (Vec<R>, R) {
        let mut u: Vec<R> = Vec::with_capacity(self.basis.len());
        let rq = R::from_f64(qx);
        let mut d2 = rq.mul_ref(&rq) * self.kernel.diag::<R>();
        for (p, qp, up, norm) in &self.basis {
            let mut acc = R::from_f64(qx) * R::from_f64(*qp) * self.kernel.eval::<R>(x, p);
            for (a, b) in u.iter().zip(up) {
                acc -= a.mul_ref(b);
            }
            let c = acc / norm;
            d2 -= c.mul_ref(&c);
            u.push(c);
        }
        (u, d2)
    }

    pub fn distance_sq(&self, x: &[f64]) -> R {
        self.coords(x, self.q.eval(x)).1.max_of(R::zero())
    }

    pub fn grid_distance_sq(&self) -> Vec<R> {
        self.grid_d2
            .iter()
            .map(|v| v.clone().max_of(R::zero()))
            .collect()
    }

    /// `max_grid dist²`.
    pub fn max_distance_sq(&self) -> R {
        let mut m = R::zero();
        for v in &self.grid_d2 {
            if *v > m {
                m = v.clone();
            }
        }
        m
    }

    pub fn add(&mut self, p: &[f64]) -> Result<()> {
        let qp = self.q.eval(p);
        let (up, d2) = self.coords(p, qp);
        if !(d2 > R::zero()) {
            return Err(AbqError::SingularGram {
                attempts: 0,
                jitter: 0.0,
            });
        }
        let norm = d2.sqrt();
        let kernel = &self.kernel;
        let grid = &self.grid;
        let grid_q = &self.grid_q;
        let mut pairs: Vec<(Vec<R>, R)> =
            self.grid_u.drain(..).zip(self.grid_d2.drain(..)).collect();
        exec::for_each_mut(&mut pairs, |i, (u, d2)| {
            let mut acc = R::from_f64(grid_q[i]) * R::from_f64(qp) * kernel.eval::<R>(&grid[i], p);
            for (a, b) in u.iter().zip(&up) {
                acc -= a.mul_ref(b);
            }
            let c = acc / &norm;
            *d2 -= c.mul_ref(&c);
            u.push(c);
        });
        for (u, d2) in pairs {
            self.grid_u.push(u);
            self.grid_d2.push(d2);
        }
        self.basis.push((p.to_vec(), qp, up, norm));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateStep {
    pub ell: usize,
    /// `dist(h_{x_{ℓ+1}}, S_ℓ) / max_grid dist(h_x, S_ℓ)`.
    pub rho: f64,
    /// `sqrt(ψ(γ̃ · b_min / b_max))` from the b range monitored at step ℓ.
    pub gamma_hat: f64,
    pub pass: bool,
    /// Relative gap between the run's recorded `sup_grid q√k_{X_{ℓ+1}}` and
    /// the oracle's `sqrt(max_grid dist²)`.
    pub e_identity_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyCertificate {
    pub steps: Vec<CertificateStep>,
    /// Empirical γ from the b range over the whole run.
    pub gamma_hat_run: f64,
    /// `sqrt(ψ(γ̃ C_L / C_U))` when the theoretical constants exist.
    pub gamma_theory: Option<f64>,
    pub clcu: Clcu,
    /// Iterations whose ratio fell below `γ̂ − 1e-9`.
    pub violations: Vec<usize>,
    pub max_e_identity_gap: f64,
    pub passed: bool,
}

pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Replays the run through the projection oracle on `grid` and checks every
/// ratio against the empirical weak-greedy constant.
pub fn greedy_certificate<R: Real>(
    record: &RunRecord,
    kernel: &KernelSpec,
    q: &Density,
    grid: &[Point],
    outer: &OuterFunction,
    gamma_tilde: f64,
    clcu: Clcu,
) -> Result<GreedyCertificate> {
    let mut oracle: ProjectionOracle<R> =
        ProjectionOracle::new(kernel.clone(), q.clone(), grid.to_vec());
    let mut steps = Vec::with_capacity(record.iterations.len());
    let mut violations = Vec::new();
    let mut max_gap: f64 = 0.0;
    let (mut b_lo, mut b_hi) = (f64::INFINITY, 0.0f64);
    for (ell, it) in record.iterations.iter().enumerate() {
        let max_d2 = oracle.max_distance_sq();
        let chosen = oracle.distance_sq(&it.point);
        let rho = (chosen / max_d2).sqrt().to_f64();
        b_lo = b_lo.min(it.b_min);
        b_hi = b_hi.max(it.b_max);
        let gamma_hat = outer.psi(gamma_tilde * it.b_min / it.b_max)?.sqrt();
        oracle.add(&it.point)?;
        let e_oracle = oracle.max_distance_sq().sqrt().to_f64();
        let gap = (e_oracle - it.sup_q_sqrt_k).abs() / e_oracle.max(f64::MIN_POSITIVE);
        max_gap = max_gap.max(gap);
        let pass = rho >= gamma_hat - CERTIFICATE_TOL;
        if !pass {
            violations.push(ell);
        }
        steps.push(CertificateStep {
            ell,
            rho,
            gamma_hat,
            pass,
            e_identity_gap: gap,
        });
    }
    let gamma_hat_run = if steps.is_empty() {
        1.0
    } else {
        outer.psi(gamma_tilde * b_lo / b_hi)?.sqrt()
    };
    let gamma_theory = match clcu.bounds() {
        Some((l, u)) => Some(outer.psi(gamma_tilde * l / u)?.sqrt()),
        None => None,
    };
    Ok(GreedyCertificate {
        passed: violations.is_empty(),
        steps,
        gamma_hat_run,
        gamma_theory,
        clcu,
        violations,
        max_e_identity_gap: max_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakAdaptivityReport {
    pub clcu: Clcu,
    /// Iterations whose monitored b range left `[C_L, C_U]`.
    pub violations: Vec<usize>,
    pub observed_min: f64,
    pub observed_max: f64,
    pub checked: bool,
}

/// Checks the monitored `b_ℓ` ranges against the theoretical constants.
pub fn check_weak_adaptivity(record: &RunRecord, clcu: &Clcu) -> WeakAdaptivityReport {
    let observed_min = record
        .iterations
        .iter()
        .map(|i| i.b_min)
        .fold(f64::INFINITY, f64::min);
    let observed_max = record
        .iterations
        .iter()
        .map(|i| i.b_max)
        .fold(0.0, f64::max);
    let violations = match clcu.bounds() {
        Some((l, u)) => record
            .iterations
            .iter()
            .enumerate()
            .filter(|(_, it)| it.b_min < l * (1.0 - 1e-12) || it.b_max > u * (1.0 + 1e-12))
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    };
    WeakAdaptivityReport {
        clcu: clcu.clone(),
        violations,
        observed_min,
        observed_max,
        checked: clcu.bounds().is_some(),
    }
}

/// `max_grid min_i ‖x − xᵢ‖` on a tensor grid with `grid_resolution` points
/// per axis.
pub fn fill_distance(xs: &[Point], dom: &Domain, grid_resolution: usize) -> Result<f64> {
    if xs.is_empty() {
        return Err(AbqError::InvalidArgument(
            "fill distance needs at least one point".into(),
        ));
    }
    let grid = dom.uniform_grid(grid_resolution);
    let mins = exec::map_slice(&grid, |g| {
        xs.iter()
            .map(|x| x.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    });
    Ok(mins.into_iter().fold(0.0, f64::max).sqrt())
}

/// `sup_grid q√k_{X_m}` for equally spaced `X_m` (cell centres of a tensor
/// grid with `⌊m^{1/d}⌋` points per axis), as a running minimum over
/// `m = 1..=n_max`. Each entry upper-bounds the Kolmogorov n-width.
pub fn nwidth_curve<R: Real>(
    kernel: &KernelSpec,
    q: &Density,
    dom: &Domain,
    n_max: usize,
    grid: &[Point],
) -> Result<Vec<f64>> {
    let d = dom.dim();
    let mut out = Vec::with_capacity(n_max);
    let mut best = f64::INFINITY;
    let mut last_axis = 0;
    let qg: Vec<f64> = grid.iter().map(|x| q.eval(x)).collect();
    for m in 1..=n_max {
        let per_axis = ((m as f64).powf(1.0 / d as f64) + 1e-9).floor() as usize;
        if per_axis != last_axis {
            last_axis = per_axis;
            let xs = dom.cell_centres(per_axis);
            let z = vec![0.0; xs.len()];
            let mean = std::sync::Arc::new(crate::domain::MeanFunction::zero());
            let s: GpState<R> = GpState::from_data(kernel.clone(), mean, xs, z)?;
            let cache = PosteriorCache::new(&s, grid.to_vec())?;
            let sup = (0..grid.len())
                .map(|i| (R::from_f64(qg[i] * qg[i]) * cache.var(i)).sqrt().to_f64())
                .fold(0.0, f64::max);
            best = best.min(sup);
        }
        out.push(best);
    }
    Ok(out)
}

pub fn nwidth_surrogate<R: Real>(
    kernel: &KernelSpec,
    q: &Density,
    dom: &Domain,
    n: usize,
    grid: &[Point],
) -> Result<f64> {
    if n == 0 {
        return Err(AbqError::InvalidArgument(
            "n-width surrogate needs n >= 1".into(),
        ));
    }
    Ok(*nwidth_curve::<R>(kernel, q, dom, n, grid)?
        .last()
        .expect("n >= 1"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RatePrediction,
    /// Least-squares slope of `log e_n` against `n^{1/d}` or `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_first: usize,
    pub n_last: usize,
    pub points_used: usize,
    /// First `n` with a nonpositive value, if the series was cut there.
    pub truncated_at: Option<usize>,
}

pub const DEFAULT_N_MIN: usize = 5;
const MIN_FIT_POINTS: usize = 8;

/// Fits the predicted decay form to `(n, e_n)` pairs with `n_min ≤ n ≤ n_max`.
pub fn fit_rate(
    e_values: &[(usize, f64)],
    model: RatePrediction,
    n_min: usize,
    n_max: Option<usize>,
) -> Result<RateFit> {
    let mut pts = Vec::new();
    let mut truncated_at = None;
    for &(n, e) in e_values {
        if n < n_min.max(1) || n_max.is_some_and(|m| n > m) {
            continue;
        }
        if !(e > 0.0 && e.is_finite()) {
            truncated_at = Some(n);
            break;
        }
        let x = match model {
            RatePrediction::Exponential { power } => (n as f64).powf(power),
            RatePrediction::Polynomial { .. } => (n as f64).ln(),
        };
        pts.push((n, x, e.ln()));
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(AbqError::InvalidArgument(format!(
            "rate fit needs at least {MIN_FIT_POINTS} usable values, got {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.2 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.2 - intercept - slope * p.1).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        model,
        slope,
        intercept,
        r_squared,
        n_first: pts[0].0,
        n_last: pts[pts.len() - 1].0,
        points_used: pts.len(),
        truncated_at,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop1Row {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `sup_grid q√k` widened by the grid modulus.
    pub e_upper: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop1Report {
    /// `C_{g̃,m,k,T}`
    pub lipschitz: f64,
    /// `∫ π/q dμ`
    pub c_pi_q: f64,
    pub gnorm: f64,
    pub rows: Vec<Prop1Row>,
    pub violations: Vec<usize>,
    pub passed: bool,
}

/// `|∫fπ − ∫T(m_{g,X_n})π| ≤ C_T · C_{π/q} · ‖g̃‖ · sup q√k_{X_n}` at every
/// recorded `n`, with oracle and grid slack.
pub fn prop1_bound_check(
    record: &RunRecord,
    integrand: &SyntheticIntegrand,
    pi: &Density,
    q: &Density,
    dom: &Domain,
    resolution: usize,
) -> Result<Prop1Report> {
    let reference = record.reference.ok_or_else(|| {
        AbqError::InvalidArgument("bound check needs a run with a reference integral".into())
    })?;
    let gnorm = integrand.rkhs_norm();
    let lipschitz = integrand.transform.lipschitz_constant(
        integrand.mean.sup_abs(dom),
        gnorm,
        integrand.kernel.sup_diag(),
    );
    let inv_q = |x: &[f64]| 1.0 / q.eval(x);
    let cpq = reference_integral(&inv_q, pi, dom, resolution)?;
    let c_pi_q = cpq.value + cpq.error_estimate;
    let factor = lipschitz * c_pi_q * gnorm;
    let row = |n: usize, plugin: f64, plugin_err: f64, e: f64, modulus: f64| {
        let lhs = (reference.value - plugin).abs();
        let e_upper = (e * e + modulus).sqrt();
        let rhs = factor * e_upper;
        let slack = reference.error_estimate + plugin_err + 1e-12 * (1.0 + reference.value.abs());
        Prop1Row {
            n,
            lhs,
            rhs,
            slack,
            e_upper,
            pass: lhs <= rhs + slack,
        }
    };
    let mut rows = vec![row(
        0,
        record.prior_estimates.plugin,
        record.prior_estimates.plugin_self_error,
        record.prior_sup_q_sqrt_k,
        record.prior_modulus_slack,
    )];
    for it in &record.iterations {
        rows.push(row(
            it.n,
            it.estimates.plugin,
            it.estimates.plugin_self_error,
            it.sup_q_sqrt_k,
            it.modulus_slack,
        ));
    }
    let violations: Vec<usize> = rows.iter().filter(|r| !r.pass).map(|r| r.n).collect();
    Ok(Prop1Report {
        lipschitz,
        c_pi_q,
        gnorm,
        passed: violations.is_empty(),
        rows,
        violations,
    })
}

/// Reference envelope `e_n ≤ C₁ exp(−D₁ n^α)` implied by
/// `d_n ≤ C₀ exp(−D₀ n^α)` for a γ-weak greedy algorithm.
pub fn devore_exponential(c0: f64, d0: f64, alpha: f64, gamma: f64) -> (f64, f64) {
    let c1 = (2.0 * c0).sqrt() / gamma;
    let d1 = 2f64.powf(-1.0 - 2.0 * alpha) * d0;
    (c1, d1)
}

/// `C₁` of the envelope `e_n ≤ C₁ n^{−α}` implied by `d_n ≤ C₀ n^{−α}`.
pub fn devore_polynomial(c0: f64, alpha: f64, gamma: f64) -> f64 {
    2f64.powf(5.0 * alpha + 1.0) * c0 / (gamma * gamma)
}

/// `e_{2n} ≤ √2 γ⁻¹ √d_n` evaluated on a surrogate `d_n` curve
/// (`d[i]` belongs to `n = i + 1`); returns `(2n, bound)` pairs.
pub fn devore_generic(d: &[f64], gamma: f64) -> Vec<(usize, f64)> {
    d.iter()
        .enumerate()
        .map(|(i, dn)| (2 * (i + 1), 2f64.sqrt() / gamma * dn.sqrt()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DensityKind, MeanFunction};
    use crate::gp::GpState;
    use crate::real::Mp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn se(gamma: f64) -> KernelSpec {
        KernelSpec::SquaredExponential { gamma }
    }

    fn quadratic_q(dom: &Domain, rng: &mut ChaCha8Rng) -> Density {
        let center = (0..dom.dim()).map(|_| rng.random()).collect();
        Density::new(
            DensityKind::Quadratic {
                c0: rng.random_range(0.2..1.5),
                curvature: rng.random_range(0.0..2.0),
                center,
            },
            dom.clone(),
        )
        .unwrap()
    }

    #[test]
    fn projection_trivial_cases() {
        let dom = Domain::unit(1);
        let q = Density::new(
            DensityKind::Quadratic {
                c0: 0.5,
                curvature: 1.0,
                center: vec![0.2],
            },
            dom.clone(),
        )
        .unwrap();
        let x = [0.7];
        let empty: f64 = projection_distance_sq(&se(0.4), &q, &[], &x).unwrap();
        assert!((empty - q.eval(&x).powi(2)).abs() < 1e-15);
        let xs = vec![vec![0.1], vec![0.7], vec![0.9]];
        let on: f64 = projection_distance_sq(&se(0.4), &q, &xs, &x).unwrap();
        assert!(on.abs() < 1e-10);
    }

    #[test]
    fn projection_matches_posterior_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..50 {
            let d = 1 + trial % 2;
            let dom = Domain::unit(d);
            let q = quadratic_q(&dom, &mut rng);
            let n = rng.random_range(0..=8);
            let xs: Vec<Point> = (0..n)
                .map(|_| (0..d).map(|_| rng.random()).collect())
                .collect();
            let k = se(rng.random_range(0.3..1.0));
            let s: GpState<Mp<256>> = GpState::from_data(
                k.clone(),
                Arc::new(MeanFunction::zero()),
                xs.clone(),
                vec![0.0; n],
            )
            .unwrap();
            let x: Point = (0..d).map(|_| rng.random()).collect();
            let qx = q.eval(&x);
            let lhs = Mp::<256>::from_f64(qx * qx) * s.posterior_var(&x).unwrap();
            let rhs: Mp<256> = projection_distance_sq(&k, &q, &xs, &x).unwrap();
            let rel =
                ((lhs.clone() - &rhs).abs() / rhs.clone().max_of(Mp::from_f64(1e-300))).to_f64();
            assert!(rel < 1e-8, "trial {trial}: {lhs:?} vs {rhs:?}");
        }
    }

    #[test]
    fn dropped_node_weight_is_detected() {
        let dom = Domain::unit(1);
        let q = Density::new(
            DensityKind::Quadratic {
                c0: 0.3,
                curvature: 2.0,
                center: vec![0.0],
            },
            dom,
        )
        .unwrap();
        let xs = vec![vec![0.2], vec![0.8]];
        let good: f64 = projection_distance_sq(&se(0.5), &q, &xs, &[0.5]).unwrap();
        let bad: f64 =
            projection_distance_sq_with(&se(0.5), &q, &xs, &[0.5], OracleMutation::DropNodeWeight)
                .unwrap();
        assert!((good - bad).abs() > 1e-3 * good);
    }

    #[test]
    fn incremental_oracle_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dom = Domain::unit(2);
        let q = quadratic_q(&dom, &mut rng);
        let grid = dom.low_discrepancy(64);
        let k = KernelSpec::Matern {
            nu: crate::kernels::MaternOrder::ThreeHalves,
            ell: 0.4,
        };
        let mut oracle: ProjectionOracle<Mp<256>> =
            ProjectionOracle::new(k.clone(), q.clone(), grid.clone());
        let mut xs: Vec<Point> = Vec::new();
        for _ in 0..6 {
            let p: Point = vec![rng.random(), rng.random()];
            oracle.add(&p).unwrap();
            xs.push(p);
        }
        let d2 = oracle.grid_distance_sq();
        for (i, g) in grid.iter().enumerate().step_by(7) {
            let dense: Mp<256> = projection_distance_sq(&k, &q, &xs, g).unwrap();
            let diff = (dense - d2[i].clone()).abs().to_f64();
            assert!(diff < 1e-60, "{diff:e}");
        }
    }

    #[test]
    fn fill_distance_examples() {
        let d1 = Domain::unit(1);
        let h = fill_distance(&[vec![0.0], vec![1.0]], &d1, 101).unwrap();
        assert!((h - 0.5).abs() <= 0.01);
        let d2 = Domain::unit(2);
        let h = fill_distance(&[vec![0.5, 0.5]], &d2, 51).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() <= 0.02);
        for n in [4, 8, 16, 32] {
            let xs: Vec<Point> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
            let h = fill_distance(&xs, &d1, 2001).unwrap();
            assert!(h <= 0.51 / n as f64, "n={n} h={h}");
        }
        assert!(fill_distance(&[], &d1, 10).is_err());
    }

    #[test]
    fn nwidth_examples() {
        let dom = Domain::unit(1);
        let q = Density::constant(&dom, 1.0);
        let grid = dom.uniform_grid(201);
        let one = nwidth_surrogate::<f64>(&se(1.0), &q, &dom, 1, &grid).unwrap();
        let direct = (1.0 - (-0.5f64).exp()).sqrt();
        assert!((one - direct).abs() < 1e-6, "{one} vs {direct}");
        let curve = nwidth_curve::<f64>(&se(0.5), &q, &dom, 12, &grid).unwrap();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        assert!(curve.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn rate_fit_on_model_data() {
        let exp: Vec<(usize, f64)> = (1..=30)
            .map(|n| (n, 3.0 * (-0.7 * n as f64).exp()))
            .collect();
        let f = fit_rate(
            &exp,
            RatePrediction::Exponential { power: 1.0 },
            DEFAULT_N_MIN,
            None,
        )
        .unwrap();
        assert!((f.slope + 0.7).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.n_first, 5);
        let poly: Vec<(usize, f64)> = (1..=40).map(|n| (n, 5.0 * (n as f64).powf(-1.5))).collect();
        let f = fit_rate(
            &poly,
            RatePrediction::Polynomial { exponent: -1.5 },
            DEFAULT_N_MIN,
            None,
        )
        .unwrap();
        assert!((f.slope + 1.5).abs() < 1e-9);
    }

    #[test]
    fn rate_fit_truncates_at_nonpositive_values() {
        let mut e: Vec<(usize, f64)> = (1..=20).map(|n| (n, (-(n as f64)).exp())).collect();
        e[15].1 = 0.0;
        let f = fit_rate(&e, RatePrediction::Exponential { power: 1.0 }, 5, None).unwrap();
        assert_eq!(f.truncated_at, Some(16));
        assert_eq!(f.n_last, 15);
        e[9].1 = -1.0;
        assert!(fit_rate(&e, RatePrediction::Exponential { power: 1.0 }, 5, None).is_err());
    }

    #[test]
    fn devore_constants() {
        let (c1, d1) = devore_exponential(2.0, 1.0, 0.5, 0.5);
        assert!((c1 - 4.0).abs() < 1e-15);
        assert!((d1 - 0.25).abs() < 1e-15);
        assert!((devore_polynomial(1.0, 1.0, 1.0) - 64.0).abs() < 1e-12);
        let g = devore_generic(&[0.25], 1.0);
        assert_eq!(g[0].0, 2);
        assert!((g[0].1 - 2f64.sqrt() * 0.5).abs() < 1e-15);
    }

    fn bump() -> SyntheticIntegrand {
        SyntheticIntegrand {
            centers: vec![vec![0.2], vec![0.45], vec![0.8]],
            weights: vec![0.6, -0.4, 0.9],
            mean: MeanFunction::zero(),
            kernel: se(0.3),
            transform: crate::transforms::TransformSpec::Identity,
        }
    }

    fn run_bump(
        spec: &crate::acquisition::AcquisitionSpec,
        f: &SyntheticIntegrand,
        n: usize,
    ) -> (RunRecord, Vec<Point>) {
        use crate::engine::{run_abq, Prior, Problem, RunOptions, SelectorConfig};
        let dom = Domain::unit(1);
        let pi = Density::uniform(&dom);
        let prior = Prior {
            kernel: f.kernel.clone(),
            mean: f.mean.clone(),
            transform: f.transform,
        };
        let cfg = SelectorConfig::shared_grid(512);
        let problem = Problem {
            integrand: f,
            pi: &pi,
            domain: &dom,
        };
        let (_, rec) =
            run_abq::<Mp<256>>(problem, &prior, spec, &cfg, &RunOptions::for_dim(1), n).unwrap();
        let grid = crate::engine::certificate_grid(&dom, 512);
        (rec, grid)
    }

    #[test]
    fn p_greedy_certificate_has_unit_ratio() {
        let dom = Domain::unit(1);
        let spec = crate::acquisition::AcquisitionSpec::p_greedy(Density::constant(&dom, 1.0));
        let f = bump();
        let (rec, grid) = run_bump(&spec, &f, 10);
        let c = greedy_certificate::<Mp<256>>(
            &rec,
            &f.kernel,
            &spec.q,
            &grid,
            &spec.outer,
            1.0,
            Clcu::Present { c_l: 1.0, c_u: 1.0 },
        )
        .unwrap();
        assert!(c.passed);
        assert_eq!(c.gamma_hat_run, 1.0);
        for st in &c.steps {
            assert!((st.rho - 1.0).abs() < 1e-12, "{st:?}");
        }
        assert!(c.max_e_identity_gap < 1e-10, "{}", c.max_e_identity_gap);
    }

    #[test]
    fn weak_constant_rule_certificate() {
        use crate::acquisition::{AcquisitionSpec, AdaptiveTermRule};
        let dom = Domain::unit(1);
        let spec = AcquisitionSpec {
            outer: OuterFunction::Power { delta: 1.0 },
            q: Density::constant(&dom, 1.0),
            rule: AdaptiveTermRule::Constant { c: 2.0 },
            gamma_tilde: 0.5,
        };
        let f = bump();
        let (rec, grid) = run_bump(&spec, &f, 8);
        let c = greedy_certificate::<Mp<256>>(
            &rec,
            &f.kernel,
            &spec.q,
            &grid,
            &spec.outer,
            0.5,
            Clcu::Present { c_l: 2.0, c_u: 2.0 },
        )
        .unwrap();
        assert!((c.gamma_hat_run - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((c.gamma_theory.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(c.passed);
    }

    #[test]
    fn mmlt_weak_adaptivity_and_certificate() {
        use crate::acquisition::{theoretical_clcu, AcquisitionSpec, AdaptiveTermRule};
        let dom = Domain::unit(1);
        let spec = AcquisitionSpec {
            outer: OuterFunction::Expm1,
            q: Density::constant(&dom, 1.0),
            rule: AdaptiveTermRule::Mmlt,
            gamma_tilde: 1.0,
        };
        let f = bump();
        let (rec, grid) = run_bump(&spec, &f, 10);
        let clcu = theoretical_clcu(&spec.rule, 0.0, 0.0, f.rkhs_norm(), 1.0);
        let w = check_weak_adaptivity(&rec, &clcu);
        assert!(w.checked && w.violations.is_empty(), "{w:?}");
        let c =
            greedy_certificate::<Mp<256>>(&rec, &f.kernel, &spec.q, &grid, &spec.outer, 1.0, clcu)
                .unwrap();
        assert!(c.passed);
        assert!(c.gamma_hat_run >= c.gamma_theory.unwrap());
    }

    #[test]
    fn weak_adaptivity_flags_out_of_range_b() {
        let dom = Domain::unit(1);
        let spec = crate::acquisition::AcquisitionSpec::p_greedy(Density::constant(&dom, 1.0));
        let (rec, _) = run_bump(&spec, &bump(), 3);
        let w = check_weak_adaptivity(&rec, &Clcu::Present { c_l: 2.0, c_u: 3.0 });
        assert_eq!(w.violations, vec![0, 1, 2]);
        let w = check_weak_adaptivity(&rec, &Clcu::Absent { reason: "x".into() });
        assert!(!w.checked);
    }

    #[test]
    fn quadrature_bound_holds() {
        let dom = Domain::unit(1);
        let pi = Density::uniform(&dom);
        let spec = crate::acquisition::AcquisitionSpec::p_greedy(Density::constant(&dom, 1.0));
        let f = bump();
        let (rec, _) = run_bump(&spec, &f, 12);
        let r = prop1_bound_check(&rec, &f, &pi, &spec.q, &dom, 64).unwrap();
        assert!(r.passed, "{:?}", r.violations);
        assert!((r.c_pi_q - 1.0).abs() < 1e-12);
        assert_eq!(r.rows.len(), 13);
    }

    #[test]
    fn quadrature_bound_with_zero_residual() {
        let dom = Domain::unit(1);
        let pi = Density::uniform(&dom);
        let spec = crate::acquisition::AcquisitionSpec::p_greedy(Density::constant(&dom, 1.0));
        let f = SyntheticIntegrand {
            centers: vec![vec![0.5]],
            weights: vec![0.0],
            mean: MeanFunction::constant(0.7),
            kernel: se(0.3),
            transform: crate::transforms::TransformSpec::Identity,
        };
        let (rec, _) = run_bump(&spec, &f, 4);
        let r = prop1_bound_check(&rec, &f, &pi, &spec.q, &dom, 64).unwrap();
        assert_eq!(r.gnorm, 0.0);
        assert!(r.passed);
        for row in &r.rows {
            assert!(row.lhs <= row.slack);
        }
    }
}
