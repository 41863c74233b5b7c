//! Integration domain, densities, prior means and synthetic integrands.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{AbqError, Result};
use crate::kernels::KernelSpec;
use crate::transforms::TransformSpec;

pub type Point = Vec<f64>;

/// Axis-aligned box with Lebesgue reference measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(AbqError::InvalidDomain(format!(
                "bounds must be nonempty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(AbqError::InvalidDomain(format!(
                    "axis {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        let d = Domain { lower, upper };
        let v = d.volume();
        if !(v.is_finite() && v > 0.0) {
            return Err(AbqError::InvalidDomain(format!(
                "volume {v} is not finite and positive"
            )));
        }
        Ok(d)
    }

    pub fn unit(d: usize) -> Self {
        Domain::new(vec![0.0; d], vec![1.0; d]).expect("unit cube")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.width(i).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Maps a point of `[0,1]^d` into the box.
    pub fn from_unit(&self, u: &[f64]) -> Point {
        u.iter()
            .enumerate()
            .map(|(i, t)| self.lower[i] + t * self.width(i))
            .collect()
    }

    /// The `2^d` vertices, in binary order.
    pub fn corners(&self) -> Vec<Point> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_axis` equally spaced nodes per axis, endpoints
    /// included; the last axis varies fastest.
    pub fn uniform_grid(&self, per_axis: usize) -> Vec<Point> {
        let per_axis = per_axis.max(2);
        let t: Vec<f64> = (0..per_axis)
            .map(|i| i as f64 / (per_axis - 1) as f64)
            .collect();
        tensor(&vec![t; self.dim()])
            .into_iter()
            .map(|u| self.from_unit(&u))
            .collect()
    }

    /// Tensor grid of `per_axis^d` cell centres.
    pub fn cell_centres(&self, per_axis: usize) -> Vec<Point> {
        let t: Vec<f64> = (0..per_axis)
            .map(|i| (i as f64 + 0.5) / per_axis as f64)
            .collect();
        tensor(&vec![t; self.dim()])
            .into_iter()
            .map(|u| self.from_unit(&u))
            .collect()
    }

    /// The box corners followed by Halton points, `count` points in total.
    pub fn low_discrepancy(&self, count: usize) -> Vec<Point> {
        let mut pts = self.corners();
        pts.truncate(count);
        let rest = count - pts.len();
        pts.extend(
            halton(self.dim(), rest)
                .into_iter()
                .map(|u| self.from_unit(&u)),
        );
        pts
    }
}

fn tensor(axes: &[Vec<f64>]) -> Vec<Point> {
    let mut out: Vec<Point> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &t in axis {
                let mut q = p.clone();
                q.push(t);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// First `count` Halton points in `[0,1]^d`, starting from index 1.
pub fn halton(d: usize, count: usize) -> Vec<Point> {
    assert!(
        d <= PRIMES.len(),
        "halton sequence supports d <= {}",
        PRIMES.len()
    );
    (1..=count as u64)
        .map(|i| (0..d).map(|a| radical_inverse(i, PRIMES[a])).collect())
        .collect()
}

/// Values on a regular grid over a domain, read by multilinear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTable {
    /// Nodes per axis (each ≥ 2), endpoints included.
    pub shape: Vec<usize>,
    /// Row-major values, last axis fastest.
    pub values: Vec<f64>,
}

impl GridTable {
    pub fn validate(&self, dom: &Domain) -> Result<()> {
        if self.shape.len() != dom.dim() || self.shape.iter().any(|&s| s < 2) {
            return Err(AbqError::InvalidArgument(format!(
                "table shape {:?} must have {} axes of at least 2 nodes",
                self.shape,
                dom.dim()
            )));
        }
        let n: usize = self.shape.iter().product();
        if n != self.values.len() {
            return Err(AbqError::InvalidArgument(format!(
                "table shape {:?} needs {n} values, got {}",
                self.shape,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(AbqError::InvalidArgument(
                "table values must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn interp(&self, dom: &Domain, x: &[f64]) -> f64 {
        let d = self.shape.len();
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for a in 0..d {
            let cells = (self.shape[a] - 1) as f64;
            let t = ((x[a] - dom.lower()[a]) / dom.width(a) * cells).clamp(0.0, cells);
            let i = (t.floor() as usize).min(self.shape[a] - 2);
            base.push(i);
            frac.push(t - i as f64);
        }
        let mut acc = 0.0;
        for mask in 0..1usize << d {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..d {
                let hi = mask >> a & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                idx = idx * self.shape[a] + base[a] + hi as usize;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityKind {
    /// `1 / volume`.
    Uniform,
    /// Product of per-axis normals truncated to the box and renormalised.
    TruncatedGaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Multilinear interpolation of tabulated values; values below 1e-300
    /// are read as zero.
    Tabulated(GridTable),
    /// `c` everywhere; not normalised.
    Constant { value: f64 },
    /// `c0 + curvature·‖x − center‖²`; not normalised.
    Quadratic {
        c0: f64,
        curvature: f64,
        center: Vec<f64>,
    },
}

/// A nonnegative continuous function on the domain; serves as the
/// integration density `π`, as the weight `q`, and as VBMC's `π_ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    kind: DensityKind,
    domain: Domain,
    norm: f64,
}

const TABLE_FLOOR: f64 = 1e-300;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl Density {
    pub fn new(kind: DensityKind, domain: Domain) -> Result<Self> {
        let d = domain.dim();
        let bad = |m: String| Err(AbqError::InvalidArgument(m));
        let mut norm = 1.0;
        match &kind {
            DensityKind::Uniform => norm = 1.0 / domain.volume(),
            DensityKind::TruncatedGaussian { mean, std } => {
                if mean.len() != d || std.len() != d {
                    return bad(format!(
                        "truncated gaussian needs {d}-dimensional mean and std"
                    ));
                }
                if std.iter().any(|s| !(*s > 0.0)) {
                    return bad("truncated gaussian std must be positive".into());
                }
                for a in 0..d {
                    let z = |x: f64| (x - mean[a]) / std[a];
                    let mass =
                        std_normal_cdf(z(domain.upper()[a])) - std_normal_cdf(z(domain.lower()[a]));
                    if !(mass > 0.0) {
                        return bad(format!("truncated gaussian has no mass on axis {a}"));
                    }
                    norm /= std[a] * (2.0 * std::f64::consts::PI).sqrt() * mass;
                }
            }
            DensityKind::Tabulated(t) => {
                t.validate(&domain)?;
                if t.min() < 0.0 {
                    return bad("tabulated density values must be nonnegative".into());
                }
            }
            DensityKind::Constant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return bad(format!(
                        "constant density must be finite and nonnegative, got {value}"
                    ));
                }
            }
            DensityKind::Quadratic {
                c0,
                curvature,
                center,
            } => {
                if center.len() != d || !(*c0 >= 0.0) || !(*curvature >= 0.0) {
                    return bad("quadratic density needs c0 >= 0, curvature >= 0 and a d-dimensional center".into());
                }
            }
        }
        Ok(Density { kind, domain, norm })
    }

    pub fn uniform(domain: &Domain) -> Self {
        Density::new(DensityKind::Uniform, domain.clone()).expect("uniform density")
    }

    pub fn constant(domain: &Domain, value: f64) -> Self {
        Density::new(DensityKind::Constant { value }, domain.clone()).expect("constant density")
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Uniform => self.norm,
            DensityKind::TruncatedGaussian { mean, std } => {
                let q: f64 = (0..mean.len())
                    .map(|a| ((x[a] - mean[a]) / std[a]).powi(2))
                    .sum();
                self.norm * (-0.5 * q).exp()
            }
            DensityKind::Tabulated(t) => {
                let v = t.interp(&self.domain, x);
                if v < TABLE_FLOOR {
                    0.0
                } else {
                    v
                }
            }
            DensityKind::Constant { value } => *value,
            DensityKind::Quadratic {
                c0,
                curvature,
                center,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                c0 + curvature * r2
            }
        }
    }

    /// Exact `(inf, sup)` over the domain.
    pub fn bounds(&self) -> (f64, f64) {
        let dom = &self.domain;
        match &self.kind {
            DensityKind::Uniform => (self.norm, self.norm),
            DensityKind::TruncatedGaussian { mean, std } => {
                let (mut near, mut far) = (0.0, 0.0);
                for a in 0..mean.len() {
                    let lo = dom.lower()[a];
                    let hi = dom.upper()[a];
                    let n = (mean[a].clamp(lo, hi) - mean[a]) / std[a];
                    let f = (mean[a] - lo).abs().max((hi - mean[a]).abs()) / std[a];
                    near += n * n;
                    far += f * f;
                }
                (
                    self.norm * (-0.5 * far).exp(),
                    self.norm * (-0.5 * near).exp(),
                )
            }
            DensityKind::Tabulated(t) => {
                let lo = t.min();
                (if lo < TABLE_FLOOR { 0.0 } else { lo }, t.max())
            }
            DensityKind::Constant { value } => (*value, *value),
            DensityKind::Quadratic {
                c0,
                curvature,
                center,
            } => {
                let (mut near, mut far) = (0.0, 0.0);
                for (a, c) in center.iter().enumerate() {
                    let lo = dom.lower()[a];
                    let hi = dom.upper()[a];
                    near += (c.clamp(lo, hi) - c).powi(2);
                    far += (c - lo).abs().max((hi - c).abs()).powi(2);
                }
                (c0 + curvature * near, c0 + curvature * far)
            }
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.bounds().0 > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanFunction {
    Constant {
        value: f64,
    },
    /// `offset + slope·x`
    Affine {
        offset: f64,
        slope: Vec<f64>,
    },
    Tabulated {
        domain: Domain,
        table: GridTable,
    },
}

impl MeanFunction {
    pub fn zero() -> Self {
        MeanFunction::Constant { value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        MeanFunction::Constant { value }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            MeanFunction::Constant { value } if !value.is_finite() => Err(
                AbqError::InvalidArgument("mean value must be finite".into()),
            ),
            MeanFunction::Affine { offset, slope } => {
                if slope.len() != d || !offset.is_finite() || slope.iter().any(|s| !s.is_finite()) {
                    Err(AbqError::InvalidArgument(format!(
                        "affine mean needs a finite offset and {d} finite slopes"
                    )))
                } else {
                    Ok(())
                }
            }
            MeanFunction::Tabulated { domain, table } => table.validate(domain),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFunction::Constant { value } => *value,
            MeanFunction::Affine { offset, slope } => {
                offset + slope.iter().zip(x).map(|(s, v)| s * v).sum::<f64>()
            }
            MeanFunction::Tabulated { domain, table } => table.interp(domain, x),
        }
    }

    /// Exact `(min, max)` over `dom`.
    pub fn range(&self, dom: &Domain) -> (f64, f64) {
        match self {
            MeanFunction::Constant { value } => (*value, *value),
            MeanFunction::Affine { offset, slope } => {
                let (mut lo, mut hi) = (*offset, *offset);
                for (a, s) in slope.iter().enumerate() {
                    let p = s * dom.lower()[a];
                    let q = s * dom.upper()[a];
                    lo += p.min(q);
                    hi += p.max(q);
                }
                (lo, hi)
            }
            MeanFunction::Tabulated { table, .. } => (table.min(), table.max()),
        }
    }

    /// `‖m‖_{L∞(Ω)}`
    pub fn sup_abs(&self, dom: &Domain) -> f64 {
        let (lo, hi) = self.range(dom);
        lo.abs().max(hi.abs())
    }

    /// `inf_Ω |m|`
    pub fn inf_abs(&self, dom: &Domain) -> f64 {
        let (lo, hi) = self.range(dom);
        if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        }
    }
}

/// Anything that can be evaluated pointwise on the domain.
pub trait Integrand: Sync {
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Integrand for F {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// `f = T(m + Σ αᵢ k(·, yᵢ))` with `‖g̃‖_{H_k}` known in closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticIntegrand {
    pub centers: Vec<Point>,
    pub weights: Vec<f64>,
    pub mean: MeanFunction,
    pub kernel: KernelSpec,
    pub transform: TransformSpec,
}

impl SyntheticIntegrand {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.centers.len() != self.weights.len() {
            return Err(AbqError::InvalidArgument(format!(
                "{} centers but {} weights",
                self.centers.len(),
                self.weights.len()
            )));
        }
        if self.centers.iter().any(|c| c.len() != d) {
            return Err(AbqError::InvalidArgument(format!(
                "centers must be {d}-dimensional"
            )));
        }
        self.kernel.validate(d)?;
        self.mean.validate(d)?;
        self.transform.validate()
    }

    /// `g̃(x) = Σ αᵢ k(x, yᵢ)`
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(y, a)| a * self.kernel.eval_f64(x, y))
            .sum()
    }

    /// `g(x) = m(x) + g̃(x)`
    pub fn latent(&self, x: &[f64]) -> f64 {
        self.mean.eval(x) + self.residual(x)
    }

    /// `sqrt(αᵀ K_Y α)`.
    pub fn rkhs_norm(&self) -> f64 {
        let g: Vec<Vec<f64>> = self.kernel.gram(&self.centers);
        let a = &self.weights;
        let mut q = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                q += a[i] * g[i][j] * a[j];
            }
        }
        if q < -1e-10 {
            log::warn!("rkhs norm square {q:e} is negative beyond round-off; clamped to 0");
        }
        q.max(0.0).sqrt()
    }
}

impl Integrand for SyntheticIntegrand {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.transform.forward(self.latent(x))
    }
}
