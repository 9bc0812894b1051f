use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnyModel;
use crate::autodiff::{gradcheck_coords, FdScheme, GradcheckReport, Tape};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::objective::LossConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelCheck {
    /// Parameter coordinates compared (all of them if the model is smaller).
    pub coords: usize,
    pub h: f64,
    pub tol: f64,
    pub scheme: FdScheme,
    /// Seeds the choice of coordinates.
    pub seed: u64,
}

/// `count` distinct flat coordinates: a uniformly random block, then a
/// uniformly random entry of it, so small blocks are not drowned out by
/// large ones.
pub fn sample_coords(block_sizes: &[usize], count: usize, seed: u64) -> Vec<usize> {
    let total: usize = block_sizes.iter().sum();
    let count = count.min(total);
    let offsets: Vec<usize> = block_sizes
        .iter()
        .scan(0, |acc, &n| {
            let start = *acc;
            *acc += n;
            Some(start)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    while picked.len() < count {
        let b = rng.gen_range(0..block_sizes.len());
        if block_sizes[b] > 0 {
            picked.insert(offsets[b] + rng.gen_range(0..block_sizes[b]));
        }
    }
    picked.into_iter().collect()
}

impl ModelCheck {
    pub fn new(coords: usize, h: f64, tol: f64) -> Self {
        Self {
            coords,
            h,
            tol,
            scheme: FdScheme::Central,
            seed: 0,
        }
    }
}

fn total_loss(model: &AnyModel<f64>, batch: &Batch<f64>, cfg: &LossConfig) -> Result<f64, ModelError> {
    let mut t = Tape::new();
    let leaves = model.params().record_constant(&mut t);
    let l = model.loss(&mut t, &leaves, batch, cfg)?;
    Ok(t.scalar_value(l.total))
}

/// Reverse-mode gradient of the total training loss against finite
/// differences over randomly chosen parameter coordinates.
///
/// Differences at or below the stencil's rounding floor
/// `ε·|loss| / smallest_step` are accepted; the report counts how many
/// coordinates were large enough for the relative test to be decisive.
pub fn gradcheck_model(
    model: &AnyModel<f64>,
    batch: &Batch<f64>,
    cfg: &LossConfig,
    check: &ModelCheck,
) -> Result<GradcheckReport, ModelError> {
    let mut t = Tape::new();
    let leaves = model.params().record(&mut t);
    let l = model.loss(&mut t, &leaves, batch, cfg)?;
    let grads = t.backward(l.total);
    let analytic: Vec<f64> = model.params().collect_grads(&grads, &leaves).concat();
    let point: Vec<f64> = model.params().blocks().iter().flat_map(|b| b.data.iter().copied()).collect();
    let sizes: Vec<usize> = model.params().blocks().iter().map(|b| b.data.len()).collect();
    let coords = sample_coords(&sizes, check.coords, check.seed);
    let loss0 = t.scalar_value(l.total);
    let atol = f64::EPSILON * loss0.abs() / check.scheme.smallest_step(check.h);

    let mut probe = model.clone();
    let mut failed: Option<ModelError> = None;
    let report = gradcheck_coords(
        |p| {
            let i = p
                .iter()
                .zip(&point)
                .position(|(a, b)| a != b)
                .unwrap_or(0);
            probe.params_mut().set_flat(i, p[i]);
            let v = match total_loss(&probe, batch, cfg) {
                Ok(v) => v,
                Err(e) => {
                    failed.get_or_insert(e);
                    f64::NAN
                }
            };
            probe.params_mut().set_flat(i, point[i]);
            v
        },
        &analytic,
        &point,
        &coords,
        check.h,
        check.tol,
        atol,
        check.scheme,
    );
    match failed {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
