//! Warping transforms `f = T(g)` between the latent GP and the integrand.

use serde::{Deserialize, Serialize};

use crate::error::{AbqError, Result};

/// Largest argument accepted by the exponential before reporting saturation.
pub const EXP_SATURATION: f64 = 700.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    Nonnegative,
    Nonpositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Identity,
    /// `α + y²/2`
    Square {
        alpha: f64,
        #[serde(default)]
        branch: Branch,
    },
    Exponential,
}

impl TransformSpec {
    pub fn square(alpha: f64) -> Self {
        TransformSpec::Square {
            alpha,
            branch: Branch::Nonnegative,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Identity => "identity",
            TransformSpec::Square { .. } => "square",
            TransformSpec::Exponential => "exponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TransformSpec::Square { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                AbqError::InvalidArgument(format!("square transform needs alpha > 0, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn forward(&self, y: f64) -> Result<f64> {
        match *self {
            TransformSpec::Identity => Ok(y),
            TransformSpec::Square { alpha, .. } => Ok(alpha + 0.5 * y * y),
            TransformSpec::Exponential => {
                if y > EXP_SATURATION {
                    Err(AbqError::Saturation(y))
                } else {
                    Ok(y.exp())
                }
            }
        }
    }

    pub fn inverse(&self, f: f64) -> Result<f64> {
        match *self {
            TransformSpec::Identity => Ok(f),
            TransformSpec::Square { alpha, branch } => {
                if !(f >= alpha) {
                    return Err(AbqError::TransformDomain {
                        transform: "square",
                        value: f,
                        detail: "value must be at least alpha",
                    });
                }
                let root = (2.0 * (f - alpha)).sqrt();
                Ok(match branch {
                    Branch::Nonnegative => root,
                    Branch::Nonpositive => -root,
                })
            }
            TransformSpec::Exponential => {
                if !(f > 0.0) {
                    return Err(AbqError::TransformDomain {
                        transform: "exponential",
                        value: f,
                        detail: "value must be positive",
                    });
                }
                Ok(f.ln())
            }
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match *self {
            TransformSpec::Identity => 1.0,
            TransformSpec::Square { .. } => y,
            TransformSpec::Exponential => y.exp(),
        }
    }

    /// `E[T(Y)]` for `Y ~ N(mean, var)`.
    pub fn posterior_expectation(&self, mean: f64, var: f64) -> Result<f64> {
        if !(var >= 0.0) {
            return Err(AbqError::InvalidArgument(format!(
                "posterior variance must be nonnegative, got {var}"
            )));
        }
        match *self {
            TransformSpec::Identity => Ok(mean),
            TransformSpec::Square { alpha, .. } => Ok(alpha + 0.5 * (mean * mean + var)),
            TransformSpec::Exponential => {
                let arg = mean + 0.5 * var;
                if arg > EXP_SATURATION {
                    Err(AbqError::Saturation(arg))
                } else {
                    Ok(arg.exp())
                }
            }
        }
    }

    /// `sup |T'(y)|` over `|y| ≤ m_inf + 2·gnorm·√k_inf`.
    pub fn lipschitz_constant(&self, m_inf: f64, gnorm: f64, k_inf: f64) -> f64 {
        let r = m_inf + 2.0 * gnorm * k_inf.sqrt();
        match self {
            TransformSpec::Identity => 1.0,
            TransformSpec::Square { .. } => r,
            TransformSpec::Exponential => r.exp(),
        }
    }

    /// Default `α` for the square transform given the smallest observed
    /// integrand value: `0.8·min f`, kept strictly inside `(0, min f)`.
    pub fn default_square_alpha(min_f: f64) -> Result<f64> {
        if !(min_f > 0.0) {
            return Err(AbqError::TransformDomain {
                transform: "square",
                value: min_f,
                detail: "default alpha needs a strictly positive integrand",
            });
        }
        Ok(0.8 * min_f)
    }
}
