//! Threshold-sweep ROC curves and AUC against binary ground truth.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image};

pub const DEFAULT_THRESHOLDS: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// ROC curve ordered by decreasing threshold, plus its trapezoidal area.
///
/// The first point is a sentinel at threshold `+inf` with `(fpr, tpr) = (0, 0)`,
/// so every curve on the same grid has the same thresholds. The last grid
/// threshold is 0, which classifies everything positive and yields `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Trapezoidal area under `(fpr, tpr)` in list order.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[1].tpr + w[0].tpr))
        .sum()
}

/// Thresholds `1, 1 - 1/(n-1), ..., 0`.
pub fn threshold_grid(n_thresholds: usize) -> Result<Vec<f64>> {
    if n_thresholds < 2 {
        return Err(Error::param("n_thresholds", "at least 2 thresholds required"));
    }
    let last = (n_thresholds - 1) as f64;
    Ok((0..n_thresholds)
        .map(|k| (last - k as f64) / last)
        .collect())
}

/// ROC of `response` (values in `[0, 1]`) against `truth`, restricted to
/// `mask` when given. A pixel is predicted positive iff `response >= t`.
pub fn roc(
    response: &Image,
    truth: &BinaryMask,
    mask: Option<&BinaryMask>,
    n_thresholds: usize,
) -> Result<RocResult> {
    response.ensure_same_shape(truth.shape())?;
    if let Some(m) = mask {
        response.ensure_same_shape(m.shape())?;
    }
    if response.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::param("response", "values must lie in [0, 1]"));
    }
    let grid = threshold_grid(n_thresholds)?;
    let last = (n_thresholds - 1) as f64;

    // Histogram each pixel into the largest grid threshold it reaches, then
    // sweep thresholds from high to low with running counts.
    let mut pos_hist = vec![0u64; n_thresholds];
    let mut neg_hist = vec![0u64; n_thresholds];
    for (i, (&v, &t)) in response.data().iter().zip(truth.data()).enumerate() {
        if mask.is_some_and(|m| !m.data()[i]) {
            continue;
        }
        let mut k = (v * last).floor() as usize;
        // Guard the floor against rounding: bin k must satisfy v >= k / last.
        while k > 0 && v < k as f64 / last {
            k -= 1;
        }
        while k + 1 < n_thresholds && v >= (k + 1) as f64 / last {
            k += 1;
        }
        if t {
            pos_hist[k] += 1;
        } else {
            neg_hist[k] += 1;
        }
    }
    let positives: u64 = pos_hist.iter().sum();
    let negatives: u64 = neg_hist.iter().sum();
    if positives == 0 {
        return Err(Error::DegenerateTruth("no positive pixels inside the mask"));
    }
    if negatives == 0 {
        return Err(Error::DegenerateTruth("no negative pixels inside the mask"));
    }

    let mut points = Vec::with_capacity(n_thresholds + 1);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    });
    let (mut tp, mut fp) = (0u64, 0u64);
    for (k, &threshold) in grid.iter().enumerate() {
        let bin = n_thresholds - 1 - k;
        tp += pos_hist[bin];
        fp += neg_hist[bin];
        points.push(RocPoint {
            threshold,
            tpr: tp as f64 / positives as f64,
            fpr: fp as f64 / negatives as f64,
        });
    }
    let auc = trapezoid_auc(&points);
    Ok(RocResult { points, auc })
}

/// Pointwise mean of several curves on a shared threshold grid.
pub fn mean_roc(results: &[RocResult]) -> Result<RocResult> {
    let (first, rest) = results.split_first().ok_or(Error::Empty("ROC results"))?;
    for r in rest {
        let same_grid = r.points.len() == first.points.len()
            && r
                .points
                .iter()
                .zip(&first.points)
                .all(|(a, b)| a.threshold == b.threshold);
        if !same_grid {
            return Err(Error::GridMismatch);
        }
    }
    let n = results.len() as f64;
    let points: Vec<RocPoint> = (0..first.points.len())
        .map(|i| RocPoint {
            threshold: first.points[i].threshold,
            tpr: results.iter().map(|r| r.points[i].tpr).sum::<f64>() / n,
            fpr: results.iter().map(|r| r.points[i].fpr).sum::<f64>() / n,
        })
        .collect();
    let auc = trapezoid_auc(&points);
    Ok(RocResult { points, auc })
}

/// Mean and population standard deviation of per-image AUCs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub auc_mean: f64,
    pub auc_std: f64,
    pub per_image: Vec<f64>,
}

pub fn auc_summary(aucs: &[f64]) -> Result<AucSummary> {
    if aucs.is_empty() {
        return Err(Error::Empty("AUC list"));
    }
    let n = aucs.len() as f64;
    // Offsets from the first value keep equal inputs exact.
    let origin = aucs[0];
    let mean = origin + aucs.iter().map(|a| a - origin).sum::<f64>() / n;
    let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok(AucSummary {
        auc_mean: mean,
        auc_std: var.sqrt(),
        per_image: aucs.to_vec(),
    })
}

pub fn auc_summary_of(results: &[RocResult]) -> Result<AucSummary> {
    auc_summary(&results.iter().map(|r| r.auc).collect::<Vec<_>>())
}

/// `threshold,fpr,tpr` rows, one per point (the sentinel prints as `inf`).
pub fn roc_to_csv(result: &RocResult) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &result.points {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr).expect("writing to a String");
    }
    out
}

/// Minimal standalone SVG line plot of one or more labelled ROC curves.
pub fn roc_to_svg(curves: &[(&str, &RocResult)]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let full = SIZE + 2.0 * PAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(svg, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r##"<line x1="{PAD}" y1="{}" x2="{}" y2="{PAD}" stroke="#aaa" stroke-dasharray="4"/>"##,
        PAD + SIZE,
        PAD + SIZE
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">false positive rate</text>"#,
        PAD + SIZE / 2.0,
        full - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 14 {})">true positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", PAD + p.fpr * SIZE, PAD + (1.0 - p.tpr) * SIZE))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="13" fill="{color}">{label} (AUC {:.4})</text>"#,
            PAD + SIZE * 0.45,
            PAD + SIZE * 0.75 + 18.0 * i as f64,
            curve.auc
        );
    }
    svg.push_str("</svg>\n");
    svg
}
