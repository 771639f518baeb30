//! Brute-force reference implementations shared by the integration and
//! acceptance tests. None of them call into the library's numerics.

#![allow(dead_code)]

use mtht::image::{BinaryMask, Image};
use mtht::morphology::LineSe;

/// `min_{b in B} f(x + b)` over in-bounds points, straight from the definition.
pub fn erode(img: &Image, se: &LineSe) -> Vec<f64> {
    rank(img, se, 1, f64::INFINITY, f64::min)
}

/// `max_{b in B} f(x - b)`: the reflected form, so agreement with the
/// library also requires a point-symmetric element.
pub fn dilate(img: &Image, se: &LineSe) -> Vec<f64> {
    rank(img, se, -1, f64::NEG_INFINITY, f64::max)
}

pub fn open(img: &Image, se: &LineSe) -> Vec<f64> {
    let eroded = Image::new(img.shape(), erode(img, se)).expect("finite");
    dilate(&eroded, se)
}

pub fn top_hat(img: &Image, se: &LineSe) -> Vec<f64> {
    img.data().iter().zip(open(img, se)).map(|(f, o)| f - o).collect()
}

fn rank(img: &Image, se: &LineSe, sign: isize, init: f64, op: fn(f64, f64) -> f64) -> Vec<f64> {
    let shape = img.shape();
    let ext = shape.extents().map(|e| e as isize);
    let mut out = Vec::with_capacity(shape.len());
    for z in 0..ext[2] {
        for y in 0..ext[1] {
            for x in 0..ext[0] {
                let mut acc = init;
                for o in se.offsets() {
                    let p = [x + sign * o[0], y + sign * o[1], z + sign * o[2]];
                    if (0..3).all(|k| (0..ext[k]).contains(&p[k])) {
                        acc = op(acc, img.get(p[0] as usize, p[1] as usize, p[2] as usize));
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Cyclic Jacobi rotations on a dense symmetric matrix; ascending eigenvalues.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues<const N: usize>(mut a: [[f64; N]; N]) -> [f64; N] {
    let norm: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-300 || off <= 1e-17 * norm {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: [f64; N] = std::array::from_fn(|i| a[i][i]);
    values.sort_by(f64::total_cmp);
    values
}

/// Exact rank AUC: the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn mann_whitney_auc(response: &Image, truth: &BinaryMask) -> f64 {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&v, &t) in response.data().iter().zip(truth.data()) {
        if t {
            pos.push(v);
        } else {
            neg.push(v);
        }
    }
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for p in &pos {
        let below = neg.partition_point(|n| n < p);
        let not_above = neg.partition_point(|n| n <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    wins / (pos.len() as f64 * neg.len() as f64)
}

pub fn sym2_dense(m: [f64; 3]) -> [[f64; 2]; 2] {
    [[m[0], m[1]], [m[1], m[2]]]
}

pub fn sym3_dense(m: [f64; 6]) -> [[f64; 3]; 3] {
    [[m[0], m[1], m[2]], [m[1], m[3], m[4]], [m[2], m[4], m[5]]]
}
