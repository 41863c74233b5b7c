//! Named integrands and preset experiment configs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Domain, Integrand, MeanFunction, Point, SyntheticIntegrand};
use crate::error::{AbqError, Result};
use crate::kernels::KernelSpec;
use crate::transforms::TransformSpec;

#[derive(Clone, Debug)]
pub enum NamedIntegrand {
    Synthetic(SyntheticIntegrand),
    Function {
        name: &'static str,
        f: fn(&[f64]) -> f64,
    },
}

impl NamedIntegrand {
    pub fn as_synthetic(&self) -> Option<&SyntheticIntegrand> {
        match self {
            NamedIntegrand::Synthetic(s) => Some(s),
            NamedIntegrand::Function { .. } => None,
        }
    }
}

impl Integrand for NamedIntegrand {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            NamedIntegrand::Synthetic(s) => s.eval(x),
            NamedIntegrand::Function { f, .. } => Ok(f(x)),
        }
    }
}

pub const INTEGRANDS: &[&str] = &[
    "bump-1d",
    "bump-2d",
    "shifted-bump-1d",
    "shifted-bump-1d-exp",
    "wsabi-caveat-1d",
    "gaussian-peak",
    "oscillatory",
];

fn se(gamma: f64) -> KernelSpec {
    KernelSpec::SquaredExponential { gamma }
}

fn shifted_bump(transform: TransformSpec) -> SyntheticIntegrand {
    SyntheticIntegrand {
        centers: vec![vec![0.2], vec![0.45], vec![0.8]],
        weights: vec![0.18, -0.12, 0.27],
        mean: MeanFunction::constant(2.0),
        kernel: se(0.3),
        transform,
    }
}

/// Looks up a builtin integrand; `d` is the domain dimension.
pub fn integrand(name: &str, d: usize) -> Result<NamedIntegrand> {
    let need = |want: usize| {
        if d == want {
            Ok(())
        } else {
            Err(AbqError::Config(format!(
                "builtin integrand {name:?} is {want}-dimensional, domain has d = {d}"
            )))
        }
    };
    let s = match name {
        "bump-1d" => {
            need(1)?;
            SyntheticIntegrand {
                centers: vec![vec![0.2], vec![0.45], vec![0.8]],
                weights: vec![0.6, -0.4, 0.9],
                mean: MeanFunction::zero(),
                kernel: se(0.3),
                transform: TransformSpec::Identity,
            }
        }
        "bump-2d" => {
            need(2)?;
            SyntheticIntegrand {
                centers: vec![vec![0.3, 0.3], vec![0.7, 0.6], vec![0.5, 0.9]],
                weights: vec![0.8, -0.5, 0.6],
                mean: MeanFunction::zero(),
                kernel: se(0.3),
                transform: TransformSpec::Identity,
            }
        }
        "shifted-bump-1d" => {
            need(1)?;
            shifted_bump(TransformSpec::square(0.1))
        }
        "shifted-bump-1d-exp" => {
            need(1)?;
            shifted_bump(TransformSpec::Exponential)
        }
        // g vanishes identically on [0.5, 1]
        "wsabi-caveat-1d" => {
            need(1)?;
            SyntheticIntegrand {
                centers: vec![vec![0.1], vec![0.25]],
                weights: vec![1.0, 0.8],
                mean: MeanFunction::zero(),
                kernel: KernelSpec::Wendland {
                    dim: 1,
                    k: 1,
                    radius: 0.25,
                },
                transform: TransformSpec::square(0.1),
            }
        }
        "gaussian-peak" => {
            return Ok(NamedIntegrand::Function {
                name: "gaussian-peak",
                f: |x| (-x.iter().map(|v| (v - 0.4) * (v - 0.4)).sum::<f64>() / 0.02).exp(),
            })
        }
        "oscillatory" => {
            return Ok(NamedIntegrand::Function {
                name: "oscillatory",
                f: |x| (0.6 * std::f64::consts::PI + 3.0 * x.iter().sum::<f64>()).cos(),
            })
        }
        other => {
            return Err(AbqError::Config(format!(
                "unknown builtin integrand {other:?}; known: {}",
                INTEGRANDS.join(", ")
            )))
        }
    };
    Ok(NamedIntegrand::Synthetic(s))
}

/// A random finite kernel expansion on `dom` whose latent function stays in
/// the range of `transform` (positive for the square transform).
pub fn random_synthetic(
    rng: &mut ChaCha8Rng,
    dom: &Domain,
    kernel: KernelSpec,
    transform: TransformSpec,
) -> SyntheticIntegrand {
    let count = rng.random_range(3..=6);
    let centers: Vec<Point> = (0..count)
        .map(|_| {
            (0..dom.dim())
                .map(|a| rng.random_range(dom.lower()[a]..dom.upper()[a]))
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (0..count).map(|_| rng.random_range(-0.8..0.8)).collect();
    let mut s = SyntheticIntegrand {
        centers,
        weights,
        mean: MeanFunction::zero(),
        kernel,
        transform,
    };
    let level = match transform {
        TransformSpec::Square { .. } => {
            2.0 * s.rkhs_norm() * s.kernel.sup_diag().sqrt() + rng.random_range(0.2..1.0)
        }
        _ => rng.random_range(-1.0..1.0),
    };
    s.mean = MeanFunction::constant(level);
    s
}

/// Preset experiment configs, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("minimal", include_str!("../../presets/minimal.json")),
    (
        "certificate-matrix",
        include_str!("../../presets/certificate-matrix.json"),
    ),
    (
        "weak-adaptivity",
        include_str!("../../presets/weak-adaptivity.json"),
    ),
    ("rate-se-1d", include_str!("../../presets/rate-se-1d.json")),
    ("rate-se-2d", include_str!("../../presets/rate-se-2d.json")),
    (
        "rate-matern-1d",
        include_str!("../../presets/rate-matern-1d.json"),
    ),
    (
        "wsabi-caveat",
        include_str!("../../presets/wsabi-caveat.json"),
    ),
];

pub fn preset(name: &str) -> Result<Vec<super::config::ExperimentConfig>> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| AbqError::Config(format!("unknown preset {name:?}")))?;
    super::config::parse_str(text, &format!("preset:{name}"))
}
