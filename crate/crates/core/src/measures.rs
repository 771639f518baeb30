//! Vesselness and neuriteness computed from top-hat tensor eigenvalues, and
//! the multiscale enhancement pipeline built on them.
//!
//! The tensors are positive semidefinite, so the measures work with
//! magnitude-sorted eigenvalues and carry no sign gate: bright-structure
//! selectivity already comes from the white top-hat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{normalize, Image};
use crate::morphology::{
    make_line_se, make_orientations_2d, make_orientations_3d, top_hat, OrientationSet, ScaleSet,
};
use crate::tensor::{eigenvalues, EigenvalueField, TensorField};

/// Absolute tolerance for treating an eigenvalue as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Vesselness,
    Neuriteness,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Vesselness => "vesselness",
            MeasureKind::Neuriteness => "neuriteness",
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vesselness" => Ok(MeasureKind::Vesselness),
            "neuriteness" => Ok(MeasureKind::Neuriteness),
            other => Err(Error::param(
                "measure",
                format!("expected vesselness or neuriteness, got `{other}`"),
            )),
        }
    }
}

/// User parameters of the enhancement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub measure: MeasureKind,
    /// Blob-versus-line weight.
    pub beta: f64,
    /// Structureness weight; `None` picks half the largest eigenvalue norm per scale.
    pub c: Option<f64>,
    /// Plate-versus-line weight (3D vesselness).
    pub alpha: f64,
    pub scales: ScaleSet,
    pub n_orientations: usize,
}

impl MeasureParams {
    pub const DEFAULT_BETA: f64 = 0.5;
    pub const DEFAULT_ALPHA: f64 = 0.5;

    pub fn default_2d(measure: MeasureKind) -> Self {
        MeasureParams {
            measure,
            beta: Self::DEFAULT_BETA,
            c: None,
            alpha: Self::DEFAULT_ALPHA,
            scales: ScaleSet::new(vec![3.0, 5.0, 7.0, 9.0]).expect("valid default scales"),
            n_orientations: 12,
        }
    }

    pub fn default_3d(measure: MeasureKind) -> Self {
        MeasureParams {
            scales: ScaleSet::new(vec![3.0, 5.0, 7.0]).expect("valid default scales"),
            n_orientations: 40,
            ..Self::default_2d(measure)
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("alpha", self.alpha)?;
        if let Some(c) = self.c {
            positive("c", c)?;
        }
        if self.n_orientations < 1 {
            return Err(Error::param("n_orientations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn orientations(&self, ndim: usize) -> Result<OrientationSet> {
        match ndim {
            2 => make_orientations_2d(self.n_orientations),
            3 => make_orientations_3d(self.n_orientations),
            d => Err(Error::InvalidShape(vec![0; d])),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

fn require_ndim(eig: &EigenvalueField, ndim: usize) -> Result<()> {
    if eig.ndim() != ndim {
        return Err(Error::DimensionMismatch {
            expected: ndim,
            actual: eig.ndim(),
        });
    }
    Ok(())
}

fn by_magnitude<const N: usize>(values: &[f64]) -> [f64; N] {
    let mut sorted: [f64; N] = values.try_into().expect("eigenvalue count");
    sorted.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    sorted
}

fn per_pixel(eig: &EigenvalueField, f: impl Fn(&[f64]) -> f64) -> Image {
    Image::from_raw(eig.shape(), eig.iter().map(f).collect())
}

/// Half the largest `sqrt(sum lambda^2)` over the field; 0 for a blank field.
pub fn adaptive_c(eig: &EigenvalueField) -> f64 {
    0.5 * eig
        .iter()
        .map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Planar vesselness from magnitude-sorted eigenvalues `|ls| <= |ll|`.
pub fn vesselness_2d(eig: &EigenvalueField, beta: f64, c: f64) -> Result<Image> {
    require_ndim(eig, 2)?;
    positive("beta", beta)?;
    positive("c", c)?;
    let (two_beta2, two_c2) = (2.0 * beta * beta, 2.0 * c * c);
    Ok(per_pixel(eig, |l| {
        let [small, large] = by_magnitude::<2>(l);
        if large.abs() <= ZERO_TOLERANCE {
            return 0.0;
        }
        let rb = small / large;
        let s2 = small * small + large * large;
        (-rb * rb / two_beta2).exp() * (1.0 - (-s2 / two_c2).exp())
    }))
}

/// Volumetric vesselness from magnitude-sorted eigenvalues `|l1| <= |l2| <= |l3|`.
pub fn vesselness_3d(eig: &EigenvalueField, alpha: f64, beta: f64, c: f64) -> Result<Image> {
    require_ndim(eig, 3)?;
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    positive("c", c)?;
    let (two_a2, two_b2, two_c2) = (2.0 * alpha * alpha, 2.0 * beta * beta, 2.0 * c * c);
    Ok(per_pixel(eig, |l| {
        let [l1, l2, l3] = by_magnitude::<3>(l);
        if l3.abs() <= ZERO_TOLERANCE || l2.abs() <= ZERO_TOLERANCE {
            return 0.0;
        }
        let rb = l1 / (l2 * l3).abs().sqrt();
        let ra = l2 / l3;
        let s2 = l1 * l1 + l2 * l2 + l3 * l3;
        (-rb * rb / two_b2).exp() * (1.0 - (-ra * ra / two_a2).exp()) * (1.0 - (-s2 / two_c2).exp())
    }))
}

/// Largest-magnitude eigenvalue divided by its maximum over the whole field.
pub fn neuriteness(eig: &EigenvalueField) -> Image {
    let dominant: Vec<f64> = eig
        .iter()
        .map(|l| {
            l.iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0)
        })
        .collect();
    let peak = dominant.iter().copied().fold(0.0, f64::max);
    let data = if peak <= ZERO_TOLERANCE {
        vec![0.0; dominant.len()]
    } else {
        dominant
            .into_iter()
            .map(|l| if l > ZERO_TOLERANCE { l / peak } else { 0.0 })
            .collect()
    };
    Image::from_raw(eig.shape(), data)
}

/// Pointwise maximum over per-scale responses.
pub fn combine_multiscale(per_scale: &[Image]) -> Result<Image> {
    let (first, rest) = per_scale
        .split_first()
        .ok_or(Error::Empty("per-scale responses"))?;
    let mut data = first.data().to_vec();
    for img in rest {
        first.ensure_same_shape(img.shape())?;
        for (acc, &v) in data.iter_mut().zip(img.data()) {
            *acc = acc.max(v);
        }
    }
    Ok(Image::from_raw(first.shape(), data))
}

/// Top-hat tensor at one scale: `sum_j TH_j(p) u_j u_j^T`, without keeping the bank.
pub fn scale_tensor(img: &Image, scale: f64, orientations: &OrientationSet) -> Result<TensorField> {
    let mut field = TensorField::zeros(img.shape());
    for o in orientations {
        let th = top_hat(img, &make_line_se(scale, o)?)?;
        field.add_rank_one(&th, o)?;
    }
    Ok(field)
}

/// Output of [`enhance`].
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancementResult {
    /// Combined response, min-max normalized to `[0, 1]`.
    pub response: Image,
    pub params: MeasureParams,
    /// `c` actually used at each scale (vesselness only).
    pub effective_c: Vec<f64>,
    pub per_scale: Option<Vec<Image>>,
}

fn measure_at_scale(
    eig: &EigenvalueField,
    kind: MeasureKind,
    params: &MeasureParams,
) -> Result<(Image, Option<f64>)> {
    match kind {
        MeasureKind::Neuriteness => Ok((neuriteness(eig), None)),
        MeasureKind::Vesselness => {
            let c = params.c.unwrap_or_else(|| adaptive_c(eig));
            if c <= 0.0 {
                // Blank field: no structure at this scale.
                return Ok((Image::zeros(eig.shape()), Some(0.0)));
            }
            let img = match eig.ndim() {
                2 => vesselness_2d(eig, params.beta, c)?,
                _ => vesselness_3d(eig, params.alpha, params.beta, c)?,
            };
            Ok((img, Some(c)))
        }
    }
}

/// Runs the full pipeline for `params.measure`.
pub fn enhance(img: &Image, params: &MeasureParams) -> Result<EnhancementResult> {
    let mut results = enhance_measures(img, params, &[params.measure], false)?;
    Ok(results.remove(0))
}

/// Runs the pipeline once per scale and derives every requested measure from
/// the same eigenvalues. Results follow the order of `kinds`.
pub fn enhance_measures(
    img: &Image,
    params: &MeasureParams,
    kinds: &[MeasureKind],
    keep_per_scale: bool,
) -> Result<Vec<EnhancementResult>> {
    params.validate()?;
    if kinds.is_empty() {
        return Err(Error::Empty("measure list"));
    }
    let orientations = params.orientations(img.ndim())?;
    let mut per_scale: Vec<Vec<Image>> = vec![Vec::new(); kinds.len()];
    let mut effective_c: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    for &scale in params.scales.as_slice() {
        let eig = eigenvalues(&scale_tensor(img, scale, &orientations)?)?;
        for (k, &kind) in kinds.iter().enumerate() {
            let (response, c) = measure_at_scale(&eig, kind, params)?;
            per_scale[k].push(response);
            effective_c[k].extend(c);
        }
    }
    kinds
        .iter()
        .zip(per_scale)
        .zip(effective_c)
        .map(|((&kind, images), c)| {
            let response = normalize(&combine_multiscale(&images)?);
            Ok(EnhancementResult {
                response,
                params: MeasureParams {
                    measure: kind,
                    ..params.clone()
                },
                effective_c: c,
                per_scale: keep_per_scale.then_some(images),
            })
        })
        .collect()
}
