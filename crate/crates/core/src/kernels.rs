//! Stationary covariance kernels and their smoothness metadata.
//!
//! Values are produced in any [`Real`] scalar so multiprecision runs see
//! kernel entries at full precision. All families are functions of the
//! Euclidean distance only; `r²` is formed from `f64` coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{AbqError, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternOrder {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[serde(rename = "5/2")]
    FiveHalves,
    #[serde(rename = "7/2")]
    SevenHalves,
}

impl MaternOrder {
    pub fn nu(self) -> f64 {
        match self {
            MaternOrder::Half => 0.5,
            MaternOrder::ThreeHalves => 1.5,
            MaternOrder::FiveHalves => 2.5,
            MaternOrder::SevenHalves => 3.5,
        }
    }

    pub fn from_nu(nu: f64) -> Option<Self> {
        [
            MaternOrder::Half,
            MaternOrder::ThreeHalves,
            MaternOrder::FiveHalves,
            MaternOrder::SevenHalves,
        ]
        .into_iter()
        .find(|o| o.nu() == nu)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(-r²/γ²)`
    SquaredExponential { gamma: f64 },
    /// Half-integer Matérn with length scale `ell`.
    Matern { nu: MaternOrder, ell: f64 },
    /// `(-1)^⌈β⌉ (c² + r²)^β`, β not an integer. Only conditionally
    /// positive definite.
    Multiquadric { beta: f64, c: f64 },
    /// `(c² + r²)^(-β)`
    InverseMultiquadric { beta: f64, c: f64 },
    /// Compactly supported Wendland function `φ_{3,k}(r / radius)`, positive
    /// definite for dimensions up to `dim` (at most 3).
    Wendland { dim: usize, k: u32, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Smoothness {
    Infinite,
    Finite { r: f64 },
}

/// Predicted decay form of `sup q √k_{X_n}` used as the regression model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RatePrediction {
    /// `log e_n` linear in `n^power`, `power = 1/d`.
    Exponential { power: f64 },
    /// `log e_n` linear in `log n` with slope `exponent`.
    Polynomial { exponent: f64 },
}

/// `‖x − y‖²` in the working precision, so that Gram matrices stay
/// positive definite below f64 resolution.
fn sq_dist<R: Real>(x: &[f64], y: &[f64]) -> R {
    let mut acc = R::zero();
    for (a, b) in x.iter().zip(y) {
        let t = R::from_f64(*a) - R::from_f64(*b);
        acc += t.mul_ref(&t);
    }
    acc
}

impl KernelSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(AbqError::InvalidArgument(m));
        match *self {
            KernelSpec::SquaredExponential { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                bad(format!("squared exponential needs gamma > 0, got {gamma}"))
            }
            KernelSpec::Matern { ell, .. } if !(ell > 0.0 && ell.is_finite()) => {
                bad(format!("matern needs ell > 0, got {ell}"))
            }
            KernelSpec::Multiquadric { beta, c }
                if !(beta > 0.0 && beta.fract() != 0.0 && c > 0.0) =>
            {
                bad(format!(
                    "multiquadric needs non-integer beta > 0 and c > 0, got beta={beta}, c={c}"
                ))
            }
            KernelSpec::InverseMultiquadric { beta, c } if !(beta > 0.0 && c > 0.0) => bad(
                format!("inverse multiquadric needs beta > 0 and c > 0, got beta={beta}, c={c}"),
            ),
            KernelSpec::Wendland { dim, k, radius } => {
                if !(1..=3).contains(&dim) || d > dim {
                    bad(format!("wendland kernel built for dim={dim} cannot be used in d={d} (dim must be 1..=3)"))
                } else if k > 3 {
                    bad(format!("wendland smoothness index must be 0..=3, got {k}"))
                } else if !(radius > 0.0) {
                    bad(format!("wendland radius must be positive, got {radius}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::SquaredExponential { .. } => "squared_exponential",
            KernelSpec::Matern { .. } => "matern",
            KernelSpec::Multiquadric { .. } => "multiquadric",
            KernelSpec::InverseMultiquadric { .. } => "inverse_multiquadric",
            KernelSpec::Wendland { .. } => "wendland",
        }
    }

    /// True for the families whose Gram matrices on distinct points are
    /// positive definite.
    pub fn is_positive_definite(&self) -> bool {
        !matches!(self, KernelSpec::Multiquadric { .. })
    }

    /// Kernel as a function of the squared distance.
    pub fn eval_sq<R: Real>(&self, r2: R) -> R {
        match *self {
            KernelSpec::SquaredExponential { gamma } => (-(r2 / R::from_f64(gamma * gamma))).exp(),
            KernelSpec::Matern { nu, ell } => {
                let r = r2.sqrt();
                let s = match nu {
                    MaternOrder::Half => r / R::from_f64(ell),
                    other => R::from_f64(2.0 * other.nu()).sqrt() * r / R::from_f64(ell),
                };
                let e = (-s.clone()).exp();
                let poly = match nu {
                    MaternOrder::Half => R::one(),
                    MaternOrder::ThreeHalves => R::one() + &s,
                    MaternOrder::FiveHalves => {
                        let s2 = s.mul_ref(&s);
                        R::one() + &s + s2 / R::from_f64(3.0)
                    }
                    MaternOrder::SevenHalves => {
                        let s2 = s.mul_ref(&s);
                        let s3 = s2.mul_ref(&s);
                        R::one()
                            + &s
                            + s2 * R::from_f64(2.0) / R::from_f64(5.0)
                            + s3 / R::from_f64(15.0)
                    }
                };
                poly * e
            }
            KernelSpec::Multiquadric { beta, c } => {
                let base = R::from_f64(c * c) + r2;
                let v = base.powf(&R::from_f64(beta));
                if (beta.ceil() as i64) % 2 == 0 {
                    v
                } else {
                    -v
                }
            }
            KernelSpec::InverseMultiquadric { beta, c } => {
                let base = R::from_f64(c * c) + r2;
                base.powf(&R::from_f64(-beta))
            }
            KernelSpec::Wendland { k, radius, .. } => {
                let r = r2.sqrt() / R::from_f64(radius);
                if r >= R::one() {
                    return R::zero();
                }
                let t = R::one() - &r;
                let c = |v: f64| R::from_f64(v);
                match k {
                    0 => t.powi(2),
                    1 => t.powi(4) * (c(4.0) * &r + c(1.0)),
                    2 => {
                        let r2 = r.mul_ref(&r);
                        t.powi(6) * (c(35.0) * r2 + c(18.0) * &r + c(3.0)) / c(3.0)
                    }
                    _ => {
                        let r2 = r.mul_ref(&r);
                        let r3 = r2.mul_ref(&r);
                        t.powi(8) * (c(32.0) * r3 + c(25.0) * r2 + c(8.0) * &r + c(1.0))
                    }
                }
            }
        }
    }

    pub fn eval<R: Real>(&self, x: &[f64], y: &[f64]) -> R {
        self.eval_sq(sq_dist::<R>(x, y))
    }

    pub fn eval_f64(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval::<f64>(x, y)
    }

    /// `k(x, x)`; the same for every `x` since all families are stationary.
    pub fn diag<R: Real>(&self) -> R {
        self.eval_sq(R::zero())
    }

    /// `‖k‖_{L∞(Ω)} = sup_x |k(x, x)|`.
    pub fn sup_diag(&self) -> f64 {
        self.diag::<f64>().abs()
    }

    /// Symmetric Gram matrix, row-major. The upper triangle is evaluated and
    /// mirrored, so the result is bitwise symmetric.
    pub fn gram<R: Real>(&self, points: &[Vec<f64>]) -> Vec<Vec<R>> {
        let n = points.len();
        let mut g: Vec<Vec<R>> = (0..n).map(|_| vec![R::zero(); n]).collect();
        for i in 0..n {
            for j in i..n {
                let v: R = self.eval(&points[i], &points[j]);
                if i != j {
                    g[j][i] = v.clone();
                }
                g[i][j] = v;
            }
        }
        g
    }

    pub fn smoothness(&self, d: usize) -> Smoothness {
        let half_d = d as f64 / 2.0;
        match *self {
            KernelSpec::SquaredExponential { .. }
            | KernelSpec::Multiquadric { .. }
            | KernelSpec::InverseMultiquadric { .. } => Smoothness::Infinite,
            KernelSpec::Matern { nu, .. } => Smoothness::Finite {
                r: nu.nu() + half_d,
            },
            KernelSpec::Wendland { k, .. } => Smoothness::Finite {
                r: half_d + k as f64 + 0.5,
            },
        }
    }

    pub fn predicted_rate(&self, d: usize) -> Result<RatePrediction> {
        if d == 0 {
            return Err(AbqError::InvalidArgument(
                "dimension must be positive".into(),
            ));
        }
        let df = d as f64;
        match self.smoothness(d) {
            Smoothness::Infinite => Ok(RatePrediction::Exponential { power: 1.0 / df }),
            Smoothness::Finite { r } => {
                if r <= df / 2.0 {
                    Err(AbqError::VacuousRate {
                        r,
                        half_d: df / 2.0,
                    })
                } else {
                    Ok(RatePrediction::Polynomial {
                        exponent: -(r / df - 0.5),
                    })
                }
            }
        }
    }
}
