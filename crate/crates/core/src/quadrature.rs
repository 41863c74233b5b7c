//! Composite tensor Gauss–Legendre rules and the reference integral oracle.

use serde::Serialize;

use crate::domain::{Density, Domain, Integrand, Point};
use crate::error::{AbqError, Result};
use crate::exec;

/// Upper bound on the number of tensor nodes of a single rule.
pub const MAX_NODES: u128 = 10_000_000;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm1) = if order == 1 { (z, 1.0) } else { (p1, p0) };
            dp = n * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if order == 1 {
            z = 0.0;
            dp = 1.0;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[order - 1 - i] = z;
        w[i] = wi;
        w[order - 1 - i] = wi;
    }
    (x, w)
}

/// Panel order used for a given per-axis resolution.
pub fn panel_order(resolution: usize) -> usize {
    resolution.clamp(1, 8)
}

/// Tensor product of composite Gauss–Legendre rules: `resolution / p`
/// equal panels of order `p = min(8, resolution)` per axis.
#[derive(Clone, Debug)]
pub struct TensorRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(dom: &Domain, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(AbqError::InvalidArgument(
                "quadrature resolution must be positive".into(),
            ));
        }
        let d = dom.dim();
        let p = panel_order(resolution);
        let panels = resolution / p;
        let per_axis = panels * p;
        let total = (per_axis as u128)
            .checked_pow(d as u32)
            .unwrap_or(u128::MAX);
        if total > MAX_NODES {
            return Err(AbqError::BudgetExceeded {
                evaluations: total,
                limit: MAX_NODES,
            });
        }
        let (gx, gw) = gauss_legendre(p);
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
            .map(|a| {
                let h = dom.width(a) / panels as f64;
                let mut xs = Vec::with_capacity(per_axis);
                let mut ws = Vec::with_capacity(per_axis);
                for k in 0..panels {
                    let left = dom.lower()[a] + k as f64 * h;
                    for (t, w) in gx.iter().zip(&gw) {
                        xs.push(left + 0.5 * h * (t + 1.0));
                        ws.push(0.5 * h * w);
                    }
                }
                (xs, ws)
            })
            .collect();
        let total = total as usize;
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            nodes.push((0..d).map(|a| axes[a].0[idx[a]]).collect());
            weights.push((0..d).map(|a| axes[a].1[idx[a]]).product());
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(TensorRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ vᵢ` in node order.
    pub fn sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync + Send,
    {
        let vals = exec::map_slice(&self.nodes, |x| f(x));
        let vals: Result<Vec<f64>> = vals.into_iter().collect();
        Ok(self.sum(&vals?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegralEstimate {
    pub value: f64,
    /// `|I(resolution) − I(resolution/2)|`.
    pub error_estimate: f64,
}

/// `∫ f π dμ` on `dom` with a tensor Gauss–Legendre rule of `resolution`
/// nodes per axis; the self-estimate compares against half the resolution.
pub fn reference_integral(
    f: &dyn Integrand,
    pi: &Density,
    dom: &Domain,
    resolution: usize,
) -> Result<IntegralEstimate> {
    if resolution < 2 {
        return Err(AbqError::InvalidArgument(
            "reference resolution must be at least 2".into(),
        ));
    }
    let fine = TensorRule::new(dom, resolution)?;
    let coarse = TensorRule::new(dom, resolution / 2)?;
    let g = |x: &[f64]| -> Result<f64> { Ok(f.eval(x)? * pi.eval(x)) };
    let value = fine.integrate(g)?;
    let half = coarse.integrate(g)?;
    Ok(IntegralEstimate {
        value,
        error_estimate: (value - half).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for order in 1..=8 {
            let (x, w) = gauss_legendre(order);
            for deg in 0..2 * order {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-14, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn reference_integral_examples() {
        let dom = Domain::unit(1);
        let pi = Density::uniform(&dom);
        let one = reference_integral(&|_: &[f64]| 1.0, &pi, &dom, 16).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
        let lin = reference_integral(&|x: &[f64]| x[0], &pi, &dom, 16).unwrap();
        assert!((lin.value - 0.5).abs() < 1e-12);
        let ex = reference_integral(&|x: &[f64]| x[0].exp(), &pi, &dom, 32).unwrap();
        assert!((ex.value - (E - 1.0)).abs() < 1e-13);
        assert!(ex.error_estimate < 1e-12);
    }

    #[test]
    fn self_estimate_bounds_refinement_change() {
        let dom = Domain::unit(2);
        let pi = Density::uniform(&dom);
        let f = |x: &[f64]| (3.0 * x[0]).sin() * (1.0 + x[1] * x[1]).sqrt() / (0.2 + x[0]);
        let a = reference_integral(&f, &pi, &dom, 8).unwrap();
        let b = reference_integral(&f, &pi, &dom, 16).unwrap();
        assert!((a.value - b.value).abs() < a.error_estimate);
    }

    #[test]
    fn budget_guard_names_limit() {
        let dom = Domain::unit(3);
        let pi = Density::uniform(&dom);
        let err = reference_integral(&|_: &[f64]| 1.0, &pi, &dom, 256).unwrap_err();
        assert!(err.to_string().contains("10000000"), "{err}");
    }

    #[test]
    fn linear_and_monotone_in_f() {
        let dom = Domain::unit(1);
        let pi = Density::uniform(&dom);
        let f = |x: &[f64]| x[0].cos();
        let g = |x: &[f64]| x[0] * x[0];
        let h = |x: &[f64]| 2.0 * x[0].cos() - 3.0 * x[0] * x[0];
        let i = |f: &dyn Integrand| reference_integral(f, &pi, &dom, 16).unwrap().value;
        assert!((i(&h) - (2.0 * i(&f) - 3.0 * i(&g))).abs() < 1e-14);
        assert!(i(&f) >= i(&g));
    }
}
