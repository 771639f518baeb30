//! Batch experiments: enhancement of synthetic phantoms scored by ROC/AUC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{auc_summary_of, mean_roc, roc, AucSummary, RocResult, DEFAULT_THRESHOLDS};
use crate::image::Shape;
use crate::measures::{enhance_measures, MeasureKind, MeasureParams};
use crate::synth::{generate, Phantom, PhantomSpec};

/// ROC results of one measure over a batch of phantoms.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureReport {
    pub measure: MeasureKind,
    pub per_image: Vec<RocResult>,
    pub mean_curve: RocResult,
    pub summary: AucSummary,
}

/// Enhances every phantom once per scale and scores each requested measure.
pub fn evaluate_phantoms(
    specs: &[PhantomSpec],
    params: &MeasureParams,
    kinds: &[MeasureKind],
    n_thresholds: usize,
) -> Result<Vec<MeasureReport>> {
    if specs.is_empty() {
        return Err(Error::Empty("phantom list"));
    }
    let per_phantom: Vec<Vec<RocResult>> = specs
        .par_iter()
        .map(|spec| {
            let Phantom { image, truth } = generate(spec)?;
            enhance_measures(&image, params, kinds, false)?
                .iter()
                .map(|r| roc(&r.response, &truth, None, n_thresholds))
                .collect()
        })
        .collect::<Result<_>>()?;
    kinds
        .iter()
        .enumerate()
        .map(|(k, &measure)| {
            let per_image: Vec<RocResult> = per_phantom.iter().map(|r| r[k].clone()).collect();
            Ok(MeasureReport {
                measure,
                mean_curve: mean_roc(&per_image)?,
                summary: auc_summary_of(&per_image)?,
                per_image,
            })
        })
        .collect()
}

/// Settings of the nine-volume tube-tree experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproduce3dConfig {
    /// Edge length of each cubic volume.
    pub size: usize,
    /// Number of volumes; volume `k` (1-based) has `k` leaves.
    pub n_images: usize,
    pub seed: u64,
    pub radius_range: [f64; 2],
    pub intensity: f64,
    pub noise_variance: f64,
    pub smooth_std: f64,
    pub params: MeasureParams,
    pub n_thresholds: usize,
}

impl Default for Reproduce3dConfig {
    fn default() -> Self {
        let template = PhantomSpec::default_3d(1, 0);
        Reproduce3dConfig {
            size: 100,
            n_images: 9,
            seed: 1,
            radius_range: template.radius_range,
            intensity: template.intensity,
            noise_variance: 10.0,
            smooth_std: 1.0,
            params: MeasureParams::default_3d(MeasureKind::Vesselness),
            n_thresholds: DEFAULT_THRESHOLDS,
        }
    }
}

impl Reproduce3dConfig {
    /// Phantom specs of increasing complexity; all share one geometry seed,
    /// so each tree extends the previous one.
    pub fn phantom_specs(&self) -> Result<Vec<PhantomSpec>> {
        let dims = Shape::new_3d(self.size, self.size, self.size)?;
        Ok((1..=self.n_images)
            .map(|n_branches| PhantomSpec {
                dims,
                n_branches,
                radius_range: self.radius_range,
                intensity: self.intensity,
                noise_variance: self.noise_variance,
                smooth_std: self.smooth_std,
                seed: self.seed,
            })
            .collect())
    }
}

pub const BOTH_MEASURES: [MeasureKind; 2] = [MeasureKind::Vesselness, MeasureKind::Neuriteness];

/// Runs the nine-volume experiment for vesselness and neuriteness.
pub fn reproduce_3d(config: &Reproduce3dConfig) -> Result<Vec<MeasureReport>> {
    evaluate_phantoms(
        &config.phantom_specs()?,
        &config.params,
        &BOTH_MEASURES,
        config.n_thresholds,
    )
}
