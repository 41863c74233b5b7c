//! Noiseless GP conditioning with an incrementally extended Cholesky factor.
//!
//! With `L Lᵀ = K_n + jitter·I`, `w(x) = L⁻¹ k_n(x)` and `β = L⁻¹ (z − m_n)`,
//! the posterior is `mean = m(x) + wᵀβ`, `var = k(x,x) − ‖w‖²`. Adding a
//! design point appends one entry to every `w`, which is what
//! [`PosteriorCache`] exploits for fixed point sets.

use std::sync::Arc;

use crate::domain::{MeanFunction, Point};
use crate::error::{AbqError, Result};
use crate::exec;
use crate::kernels::KernelSpec;
use crate::linalg::{dot, Cholesky};
use crate::real::Real;

/// Doublings allowed when a batch factorisation fails.
pub const MAX_JITTER_DOUBLINGS: u32 = 10;

/// Tolerance below which a negative posterior variance is an error rather
/// than round-off.
pub const NEGATIVE_VAR_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GpState<R: Real> {
    kernel: KernelSpec,
    mean: Arc<MeanFunction>,
    points: Vec<Point>,
    latent: Vec<f64>,
    chol: Cholesky<R>,
    beta: Vec<R>,
    alpha: Vec<R>,
    jitter: f64,
    jitter_doublings: u32,
}

impl<R: Real> GpState<R> {
    pub fn new(kernel: KernelSpec, mean: Arc<MeanFunction>) -> Self {
        let jitter = R::jitter_scale() * kernel.sup_diag();
        GpState {
            kernel,
            mean,
            points: Vec::new(),
            latent: Vec::new(),
            chol: Cholesky::empty(),
            beta: Vec::new(),
            alpha: Vec::new(),
            jitter,
            jitter_doublings: 0,
        }
    }

    /// Batch construction; jitter starts at the scalar's relative scale times
    /// the largest diagonal entry and doubles until the factorisation succeeds.
    pub fn from_data(
        kernel: KernelSpec,
        mean: Arc<MeanFunction>,
        points: Vec<Point>,
        latent: Vec<f64>,
    ) -> Result<Self> {
        if points.len() != latent.len() {
            return Err(AbqError::InvalidArgument(format!(
                "{} points but {} observations",
                points.len(),
                latent.len()
            )));
        }
        let gram: Vec<Vec<R>> = kernel.gram(&points);
        let max_diag = gram
            .iter()
            .enumerate()
            .map(|(i, r)| r[i].to_f64().abs())
            .fold(kernel.sup_diag(), f64::max);
        let mut jitter = R::jitter_scale() * max_diag;
        let mut doublings = 0;
        let chol = loop {
            let mut a = gram.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += R::from_f64(jitter);
            }
            if let Some(c) = Cholesky::factor(&a) {
                break c;
            }
            if doublings == MAX_JITTER_DOUBLINGS {
                return Err(AbqError::SingularGram {
                    attempts: doublings,
                    jitter,
                });
            }
            doublings += 1;
            jitter *= 2.0;
        };
        let resid: Vec<R> = points
            .iter()
            .zip(&latent)
            .map(|(x, z)| R::from_f64(*z) - R::from_f64(mean.eval(x)))
            .collect();
        let beta = chol.solve_lower(&resid);
        let alpha = chol.solve_upper(&beta);
        Ok(GpState {
            kernel,
            mean,
            points,
            latent,
            chol,
            beta,
            alpha,
            jitter,
            jitter_doublings: doublings,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn mean_function(&self) -> &Arc<MeanFunction> {
        &self.mean
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn chol(&self) -> &Cholesky<R> {
        &self.chol
    }

    pub fn beta(&self) -> &[R] {
        &self.beta
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn jitter_doublings(&self) -> u32 {
        self.jitter_doublings
    }

    fn cross(&self, x: &[f64]) -> Vec<R> {
        self.points.iter().map(|p| self.kernel.eval(x, p)).collect()
    }

    /// Posterior variance at or below this value means `x` is numerically in
    /// the span of the design.
    pub fn dependence_threshold(&self, prior_var: f64) -> f64 {
        (100.0 * self.jitter).max(R::jitter_scale() * prior_var.abs())
    }

    pub fn posterior_mean(&self, x: &[f64]) -> R {
        let k = self.cross(x);
        R::from_f64(self.mean.eval(x)) + dot(&k, &self.alpha)
    }

    /// Clamped at zero; a value below `-NEGATIVE_VAR_TOL` is reported as
    /// numerical degradation.
    pub fn posterior_var(&self, x: &[f64]) -> Result<R> {
        let w = self.chol.solve_lower(&self.cross(x));
        self.check_var(self.kernel.diag::<R>() - dot(&w, &w))
    }

    /// `(mean, var)` sharing one triangular solve.
    pub fn posterior(&self, x: &[f64]) -> Result<(R, R)> {
        let w = self.chol.solve_lower(&self.cross(x));
        let mean = R::from_f64(self.mean.eval(x)) + dot(&w, &self.beta);
        let var = self.check_var(self.kernel.diag::<R>() - dot(&w, &w))?;
        Ok((mean, var))
    }

    fn check_var(&self, v: R) -> Result<R> {
        if v < R::from_f64(-NEGATIVE_VAR_TOL) || !v.is_finite() {
            return Err(AbqError::NumericalDegradation {
                value: v.to_f64(),
                jitter: self.jitter,
            });
        }
        Ok(v.max_of(R::zero()))
    }

    /// New state conditioned additionally on `g(x) = z`; `self` is untouched.
    pub fn extend(&self, x: &[f64], z: f64) -> Result<Self> {
        let k = self.cross(x);
        let w = self.chol.solve_lower(&k);
        let kxx: R = self.kernel.diag();
        let ww = dot(&w, &w);
        let var = kxx.clone() - &ww;
        let threshold = self.dependence_threshold(kxx.to_f64());
        if !(var > R::from_f64(threshold)) {
            return Err(AbqError::LinearDependence {
                variance: var.to_f64(),
                threshold,
            });
        }
        let d = (kxx + R::from_f64(self.jitter) - ww).sqrt();
        let resid = R::from_f64(z) - R::from_f64(self.mean.eval(x)) - dot(&w, &self.beta);
        let mut next = self.clone();
        next.points.push(x.to_vec());
        next.latent.push(z);
        next.chol.push_row(w, d.clone());
        next.beta.push(resid / d);
        next.alpha = next.chol.solve_upper(&next.beta);
        Ok(next)
    }
}

#[derive(Clone, Debug)]
struct Entry<R> {
    w: Vec<R>,
    var: R,
    shift: R,
}

/// Posterior mean and variance on a fixed point set, updated in `O(n)` per
/// point when the state grows by one design point.
#[derive(Clone, Debug)]
pub struct PosteriorCache<R: Real> {
    points: Vec<Point>,
    prior_mean: Vec<f64>,
    entries: Vec<Entry<R>>,
    design: Vec<Point>,
    kernel: KernelSpec,
}

impl<R: Real> PosteriorCache<R> {
    pub fn new(state: &GpState<R>, points: Vec<Point>) -> Result<Self> {
        let kxx: R = state.kernel.diag();
        let prior_mean = points.iter().map(|p| state.mean.eval(p)).collect();
        let entries = (0..points.len())
            .map(|_| Entry {
                w: Vec::new(),
                var: kxx.clone(),
                shift: R::zero(),
            })
            .collect();
        let mut c = PosteriorCache {
            points,
            prior_mean,
            entries,
            design: Vec::new(),
            kernel: state.kernel.clone(),
        };
        c.absorb(state)?;
        Ok(c)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Brings the cache up to date with `state`, which must extend the state
    /// last absorbed (otherwise the cache is rebuilt).
    pub fn absorb(&mut self, state: &GpState<R>) -> Result<()> {
        let consistent = self.kernel == state.kernel
            && self.design.len() <= state.len()
            && self.design.iter().zip(state.points()).all(|(a, b)| a == b);
        if !consistent {
            let fresh = PosteriorCache::new(
                &GpState::new(state.kernel.clone(), state.mean.clone()),
                self.points.clone(),
            )?;
            *self = fresh;
        }
        for j in self.design.len()..state.len() {
            let xj = &state.points()[j];
            let lrow = state.chol().row(j);
            let (l, d) = lrow.split_at(j);
            let d = &d[0];
            let bj = &state.beta()[j];
            let kernel = &self.kernel;
            let points = &self.points;
            exec::for_each_mut(&mut self.entries, |i, e| {
                let kij: R = kernel.eval(&points[i], xj);
                let wj = (kij - dot(&e.w, l)) / d;
                e.var -= wj.mul_ref(&wj);
                e.shift += wj.mul_ref(bj);
                e.w.push(wj);
            });
            self.design.push(xj.clone());
        }
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| e.var < R::from_f64(-NEGATIVE_VAR_TOL) || !e.var.is_finite())
        {
            return Err(AbqError::NumericalDegradation {
                value: e.var.to_f64(),
                jitter: state.jitter(),
            });
        }
        Ok(())
    }

    pub fn mean(&self, i: usize) -> R {
        R::from_f64(self.prior_mean[i]) + &self.entries[i].shift
    }

    /// Clamped at zero.
    pub fn var(&self, i: usize) -> R {
        self.entries[i].var.clone().max_of(R::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SyntheticIntegrand;
    use crate::real::Mp;
    use crate::transforms::TransformSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(gamma: f64) -> KernelSpec {
        KernelSpec::SquaredExponential { gamma }
    }

    fn zero_mean() -> Arc<MeanFunction> {
        Arc::new(MeanFunction::zero())
    }

    /// Gauss–Jordan inverse with partial pivoting; deliberately unrelated to
    /// the Cholesky code under test.
    fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
                .unwrap();
            m.swap(c, p);
            let piv = m[c][c];
            for v in m[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let src = m[c].clone();
                    for (v, s) in m[r].iter_mut().zip(src) {
                        *v -= f * s;
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn prior_state() {
        let s: GpState<f64> = GpState::new(se(1.0), zero_mean());
        assert_eq!(s.posterior_mean(&[0.3]), 0.0);
        assert_eq!(s.posterior_var(&[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn one_point_interpolates() {
        let s: GpState<f64> = GpState::new(se(1.0), zero_mean())
            .extend(&[0.0], 2.0)
            .unwrap();
        assert!((s.posterior_mean(&[0.0]) - 2.0).abs() < 1e-10);
        let l00 = s.chol().get(0, 0);
        assert_eq!(l00, (1.0 + s.jitter()).sqrt());
        assert!(s.posterior_var(&[0.0]).unwrap() <= 10.0 * s.jitter());
    }

    #[test]
    fn two_point_mean_matches_direct_solve() {
        let s: GpState<f64> = GpState::from_data(
            se(1.0),
            zero_mean(),
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 0.0],
        )
        .unwrap();
        // K = [[1, e⁻¹], [e⁻¹, 1]], k(0.5) = [e^-0.25, e^-0.25]; Cramer's rule
        let e1 = (-1.0f64).exp();
        let kq = (-0.25f64).exp();
        let det = 1.0 - e1 * e1;
        let a0 = 1.0 / det;
        let a1 = -e1 / det;
        let want = kq * a0 + kq * a1;
        assert!((s.posterior_mean(&[0.5]) - want).abs() < 1e-10);
    }

    #[test]
    fn variance_matches_dense_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = KernelSpec::Matern {
            nu: crate::kernels::MaternOrder::FiveHalves,
            ell: 0.5,
        };
        for _ in 0..20 {
            let pts: Vec<Point> = (0..5).map(|_| vec![rng.random(), rng.random()]).collect();
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: GpState<f64> =
                GpState::from_data(k.clone(), zero_mean(), pts.clone(), z).unwrap();
            let mut g: Vec<Vec<f64>> = k.gram(&pts);
            for (i, r) in g.iter_mut().enumerate() {
                r[i] += s.jitter();
            }
            let inv = dense_inverse(&g);
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let kx: Vec<f64> = pts.iter().map(|p| k.eval_f64(&x, p)).collect();
            let mut quad = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    quad += kx[i] * inv[i][j] * kx[j];
                }
            }
            let want = 1.0 - quad;
            let got = s.posterior_var(&x).unwrap();
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1e-300),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn sequential_extension_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mean = Arc::new(MeanFunction::Affine {
            offset: 0.3,
            slope: vec![0.5],
        });
        let pts: Vec<Point> = (0..6).map(|_| vec![rng.random()]).collect();
        let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut seq: GpState<f64> = GpState::new(se(0.4), mean.clone());
        for (p, v) in pts.iter().zip(&z) {
            let before = seq.clone();
            seq = seq.extend(p, *v).unwrap();
            assert_eq!(before.len() + 1, seq.len());
        }
        let batch: GpState<f64> = GpState::from_data(se(0.4), mean, pts, z).unwrap();
        for _ in 0..100 {
            let x = [rng.random::<f64>()];
            let (ms, vs) = seq.posterior(&x).unwrap();
            let (mb, vb) = batch.posterior(&x).unwrap();
            assert!((ms - mb).abs() < 1e-8);
            assert!((vs - vb).abs() < 1e-8);
            assert!((seq.posterior_mean(&x) - ms).abs() < 1e-8);
        }
    }

    #[test]
    fn cholesky_reproduces_jittered_gram() {
        let pts: Vec<Point> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let s: GpState<f64> =
            GpState::from_data(se(0.5), zero_mean(), pts.clone(), vec![0.0; 8]).unwrap();
        let back = s.chol().reconstruct();
        let g: Vec<Vec<f64>> = se(0.5).gram(&pts);
        for i in 0..8 {
            for j in 0..8 {
                let want = g[i][j] + if i == j { s.jitter() } else { 0.0 };
                assert!((back[i][j] - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
            assert!(s.posterior_var(&pts[i]).unwrap() <= 10.0 * s.jitter());
        }
    }

    #[test]
    fn duplicate_point_is_linearly_dependent() {
        let s: GpState<f64> = GpState::new(se(1.0), zero_mean())
            .extend(&[0.5], 1.0)
            .unwrap();
        match s.extend(&[0.5], 1.0) {
            Err(AbqError::LinearDependence { .. }) => {}
            other => panic!("expected linear dependence, got {other:?}"),
        }
    }

    #[test]
    fn variance_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s: GpState<f64> = GpState::new(se(0.3), zero_mean());
        let probes: Vec<Point> = (0..50).map(|_| vec![rng.random()]).collect();
        for _ in 0..8 {
            let x = vec![rng.random::<f64>()];
            if s.points().iter().any(|p| (p[0] - x[0]).abs() < 0.05) {
                continue;
            }
            let next = match s.extend(&x, rng.random_range(-1.0..1.0)) {
                Ok(n) => n,
                Err(_) => continue,
            };
            for p in &probes {
                assert!(next.posterior_var(p).unwrap() <= s.posterior_var(p).unwrap() + 1e-10);
                assert!(next.posterior_var(p).unwrap() <= 1.0);
            }
            s = next;
        }
    }

    #[test]
    fn extension_keeps_old_interpolation_values() {
        let pts: Vec<Point> = vec![vec![0.1], vec![0.5], vec![0.9]];
        let s: GpState<f64> =
            GpState::from_data(se(0.3), zero_mean(), pts.clone(), vec![1.0, -0.5, 0.25]).unwrap();
        let next = s.extend(&[0.7], 2.0).unwrap();
        for p in &pts {
            assert!((next.posterior_mean(p) - s.posterior_mean(p)).abs() < 1e-9);
        }
        assert!((s.posterior_mean(&[0.7]) - next.posterior_mean(&[0.7])).abs() > 0.1);
    }

    #[test]
    fn finite_expansions_are_reproduced_and_error_is_bounded() {
        let f = SyntheticIntegrand {
            centers: vec![vec![0.2], vec![0.55], vec![0.9]],
            weights: vec![1.0, -0.7, 0.4],
            mean: MeanFunction::constant(0.5),
            kernel: se(0.3),
            transform: TransformSpec::Identity,
        };
        let norm = f.rkhs_norm();
        let mean = Arc::new(f.mean.clone());
        let mut s: GpState<f64> = GpState::new(f.kernel.clone(), mean.clone());
        for x in [[0.0], [0.5], [1.0]] {
            s = s.extend(&x, f.latent(&x)).unwrap();
            for i in 0..=40 {
                let p = [i as f64 / 40.0];
                let (m, v) = s.posterior(&p).unwrap();
                assert!((f.latent(&p) - m).abs() <= norm * v.sqrt() + 1e-8);
            }
        }
        let pts = vec![vec![0.2], vec![0.55], vec![0.9], vec![0.05]];
        let z = pts.iter().map(|p| f.latent(p)).collect();
        let s: GpState<f64> = GpState::from_data(f.kernel.clone(), mean, pts, z).unwrap();
        for i in 0..=40 {
            let p = [i as f64 / 40.0];
            assert!((s.posterior_mean(&p) - f.latent(&p)).abs() < 1e-8);
        }
    }

    #[test]
    fn cache_tracks_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let grid: Vec<Point> = (0..64).map(|i| vec![i as f64 / 63.0]).collect();
        let mean = Arc::new(MeanFunction::constant(0.2));
        let mut s: GpState<Mp<256>> = GpState::new(se(0.5), mean);
        let mut cache = PosteriorCache::new(&s, grid.clone()).unwrap();
        for _ in 0..12 {
            s = s
                .extend(&[rng.random::<f64>()], rng.random_range(-1.0..1.0))
                .unwrap();
            cache.absorb(&s).unwrap();
        }
        for (i, p) in grid.iter().enumerate() {
            let (m, v) = s.posterior(p).unwrap();
            let dm = (m - cache.mean(i)).abs().to_f64();
            let dv = (v.clone() - cache.var(i)).abs().to_f64();
            assert!(dm < 1e-50, "{dm:e}");
            assert!(dv < 1e-50, "{dv:e}");
        }
        // an unrelated state forces a rebuild
        let other: GpState<Mp<256>> = GpState::new(se(0.5), Arc::new(MeanFunction::zero()))
            .extend(&[0.25], 1.0)
            .unwrap();
        cache.absorb(&other).unwrap();
        let (m, _) = other.posterior(&grid[10]).unwrap();
        assert!((m - cache.mean(10)).abs().to_f64() < 1e-50);
    }
}
