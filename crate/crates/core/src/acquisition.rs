//! Acquisition functions of the form `a_ℓ(x) = F(q(x)² k_{X_ℓ}(x,x)) · b_ℓ(x)`.

use serde::{Deserialize, Serialize};

use crate::domain::Density;
use crate::error::{AbqError, Result};
use crate::gp::GpState;
use crate::real::Real;

/// Lower clamp applied to every `b_ℓ` value.
pub const B_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterFunction {
    /// `F(y) = y^δ`
    Power { delta: f64 },
    /// `F(y) = exp(y) − 1`
    Expm1,
}

impl OuterFunction {
    pub fn identity() -> Self {
        OuterFunction::Power { delta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OuterFunction::Power { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(AbqError::InvalidArgument(format!(
                    "power outer function needs delta > 0, got {delta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn apply<R: Real>(&self, y: &R) -> R {
        match *self {
            OuterFunction::Power { delta: 1.0 } => y.clone(),
            OuterFunction::Power { delta } => {
                if *y <= R::zero() {
                    R::zero()
                } else {
                    y.powf(&R::from_f64(delta))
                }
            }
            OuterFunction::Expm1 => y.exp_m1(),
        }
    }

    pub fn inverse(&self, z: f64) -> f64 {
        match *self {
            OuterFunction::Power { delta } => z.powf(1.0 / delta),
            OuterFunction::Expm1 => z.ln_1p(),
        }
    }

    /// Largest `ψ(c)` with `F⁻¹(c·z) ≥ ψ(c)·F⁻¹(z)` for all `z ≥ 0`.
    pub fn psi(&self, c: f64) -> Result<f64> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(AbqError::InvalidArgument(format!(
                "psi needs c in (0, 1], got {c}"
            )));
        }
        Ok(match *self {
            OuterFunction::Power { delta } => c.powf(1.0 / delta),
            OuterFunction::Expm1 => c,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AdaptiveTermRule {
    Constant {
        c: f64,
    },
    /// `m_ℓ(x)²`
    WsabiL,
    /// `½ k_ℓ(x,x) + m_ℓ(x)²`
    WsabiM,
    /// `exp(k_ℓ(x,x) + 2 m_ℓ(x))`
    Mmlt,
    /// `π_ℓ(x)^δ₂ exp(δ₃ m_ℓ(x))`; iterations past the end of the sequence
    /// reuse its last density.
    Vbmc {
        delta2: f64,
        delta3: f64,
        densities: Vec<Density>,
    },
}

impl AdaptiveTermRule {
    pub fn name(&self) -> &'static str {
        match self {
            AdaptiveTermRule::Constant { .. } => "constant",
            AdaptiveTermRule::WsabiL => "wsabi_l",
            AdaptiveTermRule::WsabiM => "wsabi_m",
            AdaptiveTermRule::Mmlt => "mmlt",
            AdaptiveTermRule::Vbmc { .. } => "vbmc",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AbqError::InvalidArgument(m));
        match self {
            AdaptiveTermRule::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                bad(format!("constant rule needs c > 0, got {c}"))
            }
            AdaptiveTermRule::Vbmc {
                delta2,
                delta3,
                densities,
            } => {
                if !(*delta2 >= 0.0 && *delta3 >= 0.0) {
                    return bad("vbmc needs delta2 >= 0 and delta3 >= 0".into());
                }
                if densities.is_empty() {
                    return bad("vbmc needs at least one density".into());
                }
                if let Some(i) = densities.iter().position(|d| !d.is_strictly_positive()) {
                    return Err(AbqError::WeakAdaptivityViolation(format!(
                        "vbmc density {i} is not strictly positive on the domain"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `b_ℓ(x)` from the latent posterior mean and variance at `x`, before
    /// clamping.
    pub fn eval_raw<R: Real>(&self, mean: &R, var: &R, x: &[f64], ell: usize) -> Result<R> {
        Ok(match self {
            AdaptiveTermRule::Constant { c } => R::from_f64(*c),
            AdaptiveTermRule::WsabiL => mean.mul_ref(mean),
            AdaptiveTermRule::WsabiM => var.clone() / R::from_f64(2.0) + mean.mul_ref(mean),
            AdaptiveTermRule::Mmlt => (var.clone() + mean.clone() + mean).exp(),
            AdaptiveTermRule::Vbmc {
                delta2,
                delta3,
                densities,
            } => {
                let pi = densities[ell.min(densities.len() - 1)].eval(x);
                if !(pi > 0.0) {
                    return Err(AbqError::WeakAdaptivityViolation(format!(
                        "vbmc density {} is {pi} at {x:?}",
                        ell.min(densities.len() - 1)
                    )));
                }
                let p = if *delta2 == 0.0 {
                    R::one()
                } else {
                    R::from_f64(pi).powf(&R::from_f64(*delta2))
                };
                p * (R::from_f64(*delta3) * mean).exp()
            }
        })
    }

    /// Clamped `b_ℓ(x)` and whether the clamp fired.
    pub fn eval<R: Real>(&self, mean: &R, var: &R, x: &[f64], ell: usize) -> Result<(R, bool)> {
        let raw = self.eval_raw(mean, var, x, ell)?;
        let floor = R::from_f64(B_FLOOR);
        if raw < floor {
            Ok((floor, true))
        } else {
            Ok((raw, false))
        }
    }
}

/// Theoretical weak-adaptivity constants, or the reason they do not exist.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Clcu {
    Present { c_l: f64, c_u: f64 },
    Absent { reason: String },
}

impl Clcu {
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Clcu::Present { c_l, c_u } => Some((c_l, c_u)),
            Clcu::Absent { .. } => None,
        }
    }
}

/// `(C_L, C_U)` from `inf|m|`, `‖m‖_∞`, `‖g̃‖_{H_k}` and `sup k(x,x)`.
pub fn theoretical_clcu(
    rule: &AdaptiveTermRule,
    m_inf_low: f64,
    m_inf_high: f64,
    gnorm: f64,
    k_inf: f64,
) -> Clcu {
    let s = 2.0 * gnorm * k_inf.sqrt();
    let env = m_inf_high + s;
    let wsabi_low = || {
        if m_inf_low > s {
            Ok((m_inf_low - s).powi(2))
        } else {
            Err(Clcu::Absent {
                reason: "hypothesis inf|m| > 2‖g̃‖√‖k‖ fails".into(),
            })
        }
    };
    match rule {
        AdaptiveTermRule::Constant { c } => Clcu::Present { c_l: *c, c_u: *c },
        AdaptiveTermRule::WsabiL => match wsabi_low() {
            Ok(c_l) => Clcu::Present {
                c_l,
                c_u: env * env,
            },
            Err(a) => a,
        },
        AdaptiveTermRule::WsabiM => match wsabi_low() {
            Ok(c_l) => Clcu::Present {
                c_l,
                c_u: 0.5 * k_inf + env * env,
            },
            Err(a) => a,
        },
        AdaptiveTermRule::Mmlt => Clcu::Present {
            c_l: (-2.0 * env).exp(),
            c_u: (k_inf + 2.0 * env).exp(),
        },
        AdaptiveTermRule::Vbmc {
            delta2,
            delta3,
            densities,
        } => {
            let d_l = densities
                .iter()
                .map(|d| d.bounds().0)
                .fold(f64::INFINITY, f64::min);
            let d_u = densities.iter().map(|d| d.bounds().1).fold(0.0, f64::max);
            if !(d_l > 0.0) {
                return Clcu::Absent {
                    reason: "density sequence is not bounded away from zero".into(),
                };
            }
            Clcu::Present {
                c_l: d_l.powf(*delta2) * (-delta3 * env).exp(),
                c_u: d_u.powf(*delta2) * (delta3 * env).exp(),
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AcquisitionSpec {
    pub outer: OuterFunction,
    /// Strictly positive weight `q`.
    pub q: Density,
    pub rule: AdaptiveTermRule,
    /// Weakness parameter in `(0, 1]`.
    pub gamma_tilde: f64,
}

/// One acquisition evaluation with its parts.
#[derive(Clone, Debug)]
pub struct AcqValue<R> {
    pub a: R,
    pub b: R,
    pub b_clamped: bool,
    /// `q(x)² k_ℓ(x,x)`
    pub scaled_var: R,
}

impl AcquisitionSpec {
    /// P-greedy: `F(y) = y`, constant `b`.
    pub fn p_greedy(q: Density) -> Self {
        AcquisitionSpec {
            outer: OuterFunction::identity(),
            q,
            rule: AdaptiveTermRule::Constant { c: 1.0 },
            gamma_tilde: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.outer.validate()?;
        self.rule.validate()?;
        if !self.q.is_strictly_positive() {
            return Err(AbqError::InvalidArgument(
                "q must be strictly positive on the domain".into(),
            ));
        }
        if !(self.gamma_tilde > 0.0 && self.gamma_tilde <= 1.0) {
            return Err(AbqError::InvalidArgument(format!(
                "gamma_tilde must lie in (0, 1], got {}",
                self.gamma_tilde
            )));
        }
        Ok(())
    }

    pub fn psi(&self, c: f64) -> Result<f64> {
        self.outer.psi(c)
    }

    /// Acquisition from precomputed posterior values at `x`.
    pub fn from_posterior<R: Real>(
        &self,
        mean: &R,
        var: &R,
        x: &[f64],
        ell: usize,
    ) -> Result<AcqValue<R>> {
        let qx = self.q.eval(x);
        let scaled_var = R::from_f64(qx * qx) * var;
        let (b, b_clamped) = self.rule.eval(mean, var, x, ell)?;
        let a = self.outer.apply(&scaled_var) * &b;
        Ok(AcqValue {
            a,
            b,
            b_clamped,
            scaled_var,
        })
    }
}

/// `b_ℓ(x)` for a GP state.
pub fn eval_b<R: Real>(
    rule: &AdaptiveTermRule,
    s: &GpState<R>,
    x: &[f64],
    ell: usize,
) -> Result<R> {
    let (m, v) = s.posterior(x)?;
    Ok(rule.eval(&m, &v, x, ell)?.0)
}

/// `a_ℓ(x)` for a GP state.
pub fn eval_acquisition<R: Real>(
    spec: &AcquisitionSpec,
    s: &GpState<R>,
    x: &[f64],
    ell: usize,
) -> Result<R> {
    let (m, v) = s.posterior(x)?;
    Ok(spec.from_posterior(&m, &v, x, ell)?.a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DensityKind, Domain, MeanFunction};
    use crate::kernels::KernelSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;
    use std::sync::Arc;

    fn prior(mean: f64) -> GpState<f64> {
        GpState::new(
            KernelSpec::SquaredExponential { gamma: 1.0 },
            Arc::new(MeanFunction::constant(mean)),
        )
    }

    fn unit_q() -> Density {
        Density::constant(&Domain::unit(1), 1.0)
    }

    #[test]
    fn b_examples() {
        let x = [0.4];
        assert_eq!(
            eval_b(&AdaptiveTermRule::Constant { c: 1.0 }, &prior(0.0), &x, 0).unwrap(),
            1.0
        );
        assert!((eval_b(&AdaptiveTermRule::Mmlt, &prior(0.0), &x, 0).unwrap() - E).abs() < 1e-15);
        assert_eq!(
            eval_b(&AdaptiveTermRule::WsabiL, &prior(2.0), &x, 0).unwrap(),
            4.0
        );
        assert_eq!(
            eval_b(&AdaptiveTermRule::WsabiM, &prior(2.0), &x, 0).unwrap(),
            4.5
        );
    }

    #[test]
    fn b_is_clamped() {
        let (b, clamped) = AdaptiveTermRule::WsabiL
            .eval(&0.0f64, &1.0, &[0.0], 0)
            .unwrap();
        assert!(clamped);
        assert_eq!(b, B_FLOOR);
    }

    #[test]
    fn vbmc_rule() {
        let dom = Domain::unit(1);
        let tg = Density::new(
            DensityKind::TruncatedGaussian {
                mean: vec![0.5],
                std: vec![0.3],
            },
            dom.clone(),
        )
        .unwrap();
        let rule = AdaptiveTermRule::Vbmc {
            delta2: 1.0,
            delta3: 1.0,
            densities: vec![Density::uniform(&dom), tg.clone()],
        };
        rule.validate().unwrap();
        let b0 = eval_b(&rule, &prior(0.0), &[0.2], 0).unwrap();
        assert!((b0 - 1.0).abs() < 1e-15);
        let b5 = eval_b(&rule, &prior(0.0), &[0.2], 5).unwrap();
        assert!((b5 - tg.eval(&[0.2])).abs() < 1e-15);

        let table = crate::domain::GridTable {
            shape: vec![2],
            values: vec![0.0, 1.0],
        };
        let vanishing = Density::new(DensityKind::Tabulated(table), dom).unwrap();
        let bad = AdaptiveTermRule::Vbmc {
            delta2: 1.0,
            delta3: 0.0,
            densities: vec![vanishing],
        };
        assert!(matches!(
            bad.validate(),
            Err(AbqError::WeakAdaptivityViolation(_))
        ));
        assert!(matches!(
            bad.eval_raw(&0.0f64, &1.0, &[0.0], 0),
            Err(AbqError::WeakAdaptivityViolation(_))
        ));
    }

    #[test]
    fn acquisition_examples() {
        let s = prior(0.0);
        let pg = AcquisitionSpec::p_greedy(unit_q());
        assert_eq!(eval_acquisition(&pg, &s, &[0.3], 0).unwrap(), 1.0);
        let ex = AcquisitionSpec {
            outer: OuterFunction::Expm1,
            ..pg.clone()
        };
        assert!((eval_acquisition(&ex, &s, &[0.3], 0).unwrap() - (E - 1.0)).abs() < 1e-15);
        let s1 = s.extend(&[0.3], 1.0).unwrap();
        for spec in [pg, ex] {
            let a = eval_acquisition(&spec, &s1, &[0.3], 1).unwrap();
            assert!(a.abs() <= 10.0 * s1.jitter());
        }
    }

    #[test]
    fn psi_examples() {
        assert_eq!(OuterFunction::Power { delta: 2.0 }.psi(0.25).unwrap(), 0.5);
        assert_eq!(OuterFunction::Expm1.psi(0.3).unwrap(), 0.3);
        assert_eq!(OuterFunction::Power { delta: 3.0 }.psi(1.0).unwrap(), 1.0);
        assert_eq!(OuterFunction::Expm1.psi(1.0).unwrap(), 1.0);
        assert!(OuterFunction::Expm1.psi(0.0).is_err());
        assert!(OuterFunction::Expm1.psi(1.5).is_err());
    }

    #[test]
    fn psi_inequality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for f in [
            OuterFunction::Power { delta: 0.5 },
            OuterFunction::Power { delta: 1.0 },
            OuterFunction::Power { delta: 2.0 },
            OuterFunction::Expm1,
        ] {
            for _ in 0..2000 {
                let c = 1.0 - rng.random::<f64>();
                let z = f.apply(&rng.random_range(0.0..50.0f64));
                let lhs = f.inverse(c * z);
                let rhs = f.psi(c).unwrap() * f.inverse(z);
                assert!(lhs >= rhs - 1e-12 * rhs.max(1.0), "{f:?} c={c} z={z}");
            }
        }
    }

    #[test]
    fn acquisition_is_monotone_in_variance_for_constant_b() {
        let spec = AcquisitionSpec {
            outer: OuterFunction::Power { delta: 1.7 },
            q: unit_q(),
            rule: AdaptiveTermRule::Constant { c: 2.0 },
            gamma_tilde: 1.0,
        };
        let mut prev = -1.0;
        for i in 0..100 {
            let v = i as f64 / 50.0;
            let a = spec.from_posterior(&0.3f64, &v, &[0.5], 0).unwrap().a;
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn clcu_examples() {
        assert_eq!(
            theoretical_clcu(&AdaptiveTermRule::Mmlt, 0.0, 0.0, 0.0, 1.0),
            Clcu::Present { c_l: 1.0, c_u: E }
        );
        assert_eq!(
            theoretical_clcu(&AdaptiveTermRule::WsabiL, 5.0, 5.0, 1.0, 1.0),
            Clcu::Present {
                c_l: 9.0,
                c_u: 49.0
            }
        );
        match theoretical_clcu(&AdaptiveTermRule::WsabiL, 0.0, 0.0, 1.0, 1.0) {
            Clcu::Absent { reason } => assert_eq!(reason, "hypothesis inf|m| > 2‖g̃‖√‖k‖ fails"),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            theoretical_clcu(&AdaptiveTermRule::WsabiM, 5.0, 5.0, 1.0, 1.0),
            Clcu::Present {
                c_l: 9.0,
                c_u: 49.5
            }
        );
        assert_eq!(
            theoretical_clcu(&AdaptiveTermRule::Constant { c: 3.0 }, 0.0, 0.0, 7.0, 1.0),
            Clcu::Present { c_l: 3.0, c_u: 3.0 }
        );
    }
}
