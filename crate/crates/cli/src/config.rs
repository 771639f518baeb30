//! `--json-config` files: a flat object whose keys take precedence over flags.
//!
//! Keys a command does not use are ignored. A parameter echo written by a
//! previous run is accepted as well; its `config` member is used.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mtht::error::Error;
use mtht::measures::{MeasureKind, MeasureParams};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Absent means adaptive; the echo writes `null` explicitly.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invert: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smooth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<usize>,
}

impl Overrides {
    /// Empty overrides when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Overrides::default());
        };
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json_err = |source| Error::Json {
            path: path.to_path_buf(),
            source,
        };
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(json_err)
    }

    /// Every enhancement parameter, for the parameter echo.
    pub fn from_params(params: &MeasureParams, invert: bool) -> Self {
        Overrides {
            measure: Some(params.measure),
            scales: Some(params.scales.as_slice().to_vec()),
            orientations: Some(params.n_orientations),
            beta: Some(params.beta),
            c: params.c,
            alpha: Some(params.alpha),
            invert: Some(invert),
            ..Overrides::default()
        }
    }
}
