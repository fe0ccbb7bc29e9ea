//! Central finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::neural::params::ModelParameters;
use crate::neural::tape::ShapeError;
use crate::tensor::Scalar;

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("non-finite loss during gradient check: {context}")]
    NonFiniteLoss { context: String },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Pass iff the max relative error stays below this.
    pub tolerance: f64,
    /// Upper bound on the number of coordinates to probe; the rest are
    /// skipped by seeded sampling when the model has more.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoordCheck {
    pub name: String,
    pub flat_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checks: Vec<CoordCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    /// The coordinate with the worst agreement.
    pub fn worst(&self) -> Option<&CoordCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Compares analytic gradients against central finite differences on a set
/// of sampled parameter coordinates.
///
/// `loss_fn(params, compute_grad)` must evaluate the loss deterministically;
/// when `compute_grad` is true it must also accumulate gradients (the
/// checker zeroes them beforehand).
pub fn gradient_check<F, E>(
    mut loss_fn: impl FnMut(&mut ModelParameters<F>, bool) -> Result<F, E>,
    params: &mut ModelParameters<F>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Scalar,
    E: Into<GradCheckError>,
{
    params.zero_grads();
    let base = loss_fn(params, true).map_err(Into::into)?;
    if !base.to_f64().is_finite() {
        return Err(GradCheckError::NonFiniteLoss {
            context: "base evaluation".into(),
        });
    }

    let total = params.flat_len();
    let coords: Vec<usize> = if total <= cfg.max_coords {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut picked = rand::seq::index::sample(&mut rng, total, cfg.max_coords).into_vec();
        picked.sort_unstable();
        picked
    };

    let step = cfg.step;
    let mut checks = Vec::with_capacity(coords.len());
    let mut max_rel_error = 0.0f64;
    for flat in coords {
        let original = params.get_flat(flat);
        params.set_flat(flat, F::from_f64(original.to_f64() + step));
        let plus = loss_fn(params, false).map_err(Into::into)?.to_f64();
        params.set_flat(flat, F::from_f64(original.to_f64() - step));
        let minus = loss_fn(params, false).map_err(Into::into)?.to_f64();
        params.set_flat(flat, original);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(GradCheckError::NonFiniteLoss {
                context: format!("perturbation of {}", params.flat_name(flat)),
            });
        }
        let numeric = (plus - minus) / (2.0 * step);
        let analytic = params.grad_flat(flat).to_f64();
        let rel_error =
            (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel_error = max_rel_error.max(rel_error);
        checks.push(CoordCheck {
            name: params.flat_name(flat).to_string(),
            flat_index: flat,
            analytic,
            numeric,
            rel_error,
        });
    }

    Ok(GradCheckReport {
        checks,
        max_rel_error,
        tolerance: cfg.tolerance,
        passed: max_rel_error < cfg.tolerance,
    })
}
