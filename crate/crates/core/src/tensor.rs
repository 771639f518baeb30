//! Top-hat tensor accumulation and per-pixel eigen-analysis.

use rayon::prelude::*;

use crate::eigen::{sym2_eigen, sym2_eigenvalues, sym3_eigen, sym3_eigenvalues};
use crate::error::{Error, Result};
use crate::image::{Image, Shape};
use crate::morphology::{Orientation, OrientationSet};

/// Relative tolerance under which slightly negative eigenvalues are clamped to 0.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Number of unique entries of a symmetric `ndim x ndim` matrix.
pub fn component_count(ndim: usize) -> usize {
    ndim * (ndim + 1) / 2
}

/// Per-pixel symmetric tensors stored as their upper triangles
/// (`xx, xy, yy` in 2D; `xx, xy, xz, yy, yz, zz` in 3D), pixel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    shape: Shape,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(shape: Shape) -> Self {
        TensorField {
            shape,
            data: vec![0.0; shape.len() * component_count(shape.ndim())],
        }
    }

    pub fn from_components(shape: Shape, data: Vec<f64>) -> Result<Self> {
        let expected = shape.len() * component_count(shape.ndim());
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(TensorField { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    pub fn components(&self) -> usize {
        component_count(self.ndim())
    }

    pub fn tensor(&self, index: usize) -> &[f64] {
        let k = self.components();
        &self.data[index * k..(index + 1) * k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Adds `weight(p) * u u^T` at every pixel.
    pub fn add_rank_one(&mut self, weights: &Image, orientation: &Orientation) -> Result<()> {
        if weights.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: weights.shape(),
            });
        }
        if orientation.ndim() != self.ndim() {
            return Err(Error::DimensionMismatch {
                expected: self.ndim(),
                actual: orientation.ndim(),
            });
        }
        let u = orientation.components();
        let outer: Vec<f64> = (0..u.len())
            .flat_map(|i| (i..u.len()).map(move |j| u[i] * u[j]))
            .collect();
        let k = outer.len();
        self.data
            .par_chunks_mut(k * 4096)
            .zip(weights.data().par_chunks(4096))
            .for_each(|(tensors, w)| {
                for (t, &w) in tensors.chunks_exact_mut(k).zip(w) {
                    for (entry, o) in t.iter_mut().zip(&outer) {
                        *entry += w.abs() * o;
                    }
                }
            });
        Ok(())
    }
}

/// Sums `|TH_j(p)| u_j u_j^T` over a bank of top-hat images.
pub fn accumulate_tensor(bank: &[Image], orientations: &OrientationSet) -> Result<TensorField> {
    if bank.len() != orientations.len() {
        return Err(Error::param(
            "bank",
            format!(
                "{} images for {} orientations",
                bank.len(),
                orientations.len()
            ),
        ));
    }
    let first = bank.first().ok_or(Error::Empty("top-hat bank"))?;
    let mut field = TensorField::zeros(first.shape());
    for (img, o) in bank.iter().zip(orientations) {
        field.add_rank_one(img, o)?;
    }
    Ok(field)
}

/// Ascending eigenvalues for every pixel of a tensor field.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenvalueField {
    shape: Shape,
    values: Vec<f64>,
}

impl EigenvalueField {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        let expected = shape.len() * shape.ndim();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(EigenvalueField { shape, values })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    /// Eigenvalues of one pixel, ascending.
    pub fn at(&self, index: usize) -> &[f64] {
        let d = self.ndim();
        &self.values[index * d..(index + 1) * d]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.ndim())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Eigenvalues plus the matching orthonormal eigenvector frames.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    values: EigenvalueField,
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn values(&self) -> &EigenvalueField {
        &self.values
    }

    pub fn into_values(self) -> EigenvalueField {
        self.values
    }

    /// Eigenvector `k` of pixel `index`, paired with `values().at(index)[k]`.
    pub fn vector(&self, index: usize, k: usize) -> &[f64] {
        let d = self.values.ndim();
        let start = (index * d + k) * d;
        &self.vectors[start..start + d]
    }
}

fn clamp_near_zero(values: &mut [f64]) {
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -CLAMP_TOLERANCE * scale {
            *v = 0.0;
        }
    }
}

fn check_finite(field: &TensorField) -> Result<()> {
    match field.data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i / field.components())),
        None => Ok(()),
    }
}

/// Eigenvalues only; what the measures need.
pub fn eigenvalues(field: &TensorField) -> Result<EigenvalueField> {
    check_finite(field)?;
    let d = field.ndim();
    let k = field.components();
    let mut values = vec![0.0; field.shape.len() * d];
    values
        .par_chunks_mut(d)
        .zip(field.data.par_chunks(k))
        .for_each(|(out, t)| {
            if d == 2 {
                out.copy_from_slice(&sym2_eigenvalues([t[0], t[1], t[2]]));
            } else {
                out.copy_from_slice(&sym3_eigenvalues([t[0], t[1], t[2], t[3], t[4], t[5]]));
            }
            clamp_near_zero(out);
        });
    Ok(EigenvalueField {
        shape: field.shape,
        values,
    })
}

/// Full decomposition: ascending eigenvalues and orthonormal eigenvectors.
pub fn eigen_decompose(field: &TensorField) -> Result<EigenDecomposition> {
    check_finite(field)?;
    let d = field.ndim();
    let k = field.components();
    let n = field.shape.len();
    let mut values = vec![0.0; n * d];
    let mut vectors = vec![0.0; n * d * d];
    values
        .par_chunks_mut(d)
        .zip(vectors.par_chunks_mut(d * d))
        .zip(field.data.par_chunks(k))
        .for_each(|((vals, vecs), t)| {
            if d == 2 {
                let (v, e) = sym2_eigen([t[0], t[1], t[2]]);
                vals.copy_from_slice(&v);
                vecs.copy_from_slice(e.as_flattened());
            } else {
                let (v, e) = sym3_eigen([t[0], t[1], t[2], t[3], t[4], t[5]]);
                vals.copy_from_slice(&v);
                vecs.copy_from_slice(e.as_flattened());
            }
            clamp_near_zero(vals);
        });
    Ok(EigenDecomposition {
        values: EigenvalueField {
            shape: field.shape,
            values,
        },
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::make_orientations_2d;

    fn shape2(nx: usize, ny: usize) -> Shape {
        Shape::new_2d(nx, ny).unwrap()
    }

    #[test]
    fn zero_bank_gives_zero_tensor() {
        let orientations = make_orientations_2d(6).unwrap();
        let bank = vec![Image::zeros(shape2(5, 5)); 6];
        let field = accumulate_tensor(&bank, &orientations).unwrap();
        assert!(field.as_slice().iter().all(|&v| v == 0.0));
        assert!(eigenvalues(&field).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_orientation_is_rank_one() {
        let orientations = make_orientations_2d(1).unwrap();
        let shape = shape2(3, 3);
        let mut data = vec![0.0; 9];
        data[4] = 2.5;
        let field = accumulate_tensor(&[Image::new(shape, data).unwrap()], &orientations).unwrap();
        assert_eq!(field.tensor(4), &[2.5, 0.0, 0.0]);
        assert_eq!(eigenvalues(&field).unwrap().at(4), &[0.0, 2.5]);
    }

    #[test]
    fn two_axis_orientations_give_diagonal() {
        let orientations = make_orientations_2d(2).unwrap();
        let shape = shape2(1, 1);
        for (a, b) in [(3.0, 1.0), (1.0, 3.0), (2.0, 2.0)] {
            let bank = [
                Image::new(shape, vec![a]).unwrap(),
                Image::new(shape, vec![b]).unwrap(),
            ];
            let field = accumulate_tensor(&bank, &orientations).unwrap();
            let t = field.tensor(0);
            assert_eq!((t[0], t[2]), (a, b));
            assert!(t[1].abs() < 1e-15);
            let values = eigenvalues(&field).unwrap();
            assert!((values.at(0)[0] - a.min(b)).abs() < 1e-12);
            assert!((values.at(0)[1] - a.max(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let orientations = make_orientations_2d(3).unwrap();
        let bank = vec![Image::zeros(shape2(4, 4)); 2];
        assert!(accumulate_tensor(&bank, &orientations).is_err());
        let bank = vec![
            Image::zeros(shape2(4, 4)),
            Image::zeros(shape2(4, 4)),
            Image::zeros(shape2(4, 5)),
        ];
        assert!(accumulate_tensor(&bank, &orientations).is_err());
    }

    #[test]
    fn non_finite_tensor_is_rejected() {
        let field = TensorField::from_components(shape2(1, 1), vec![1.0, f64::NAN, 1.0]).unwrap();
        assert!(matches!(eigenvalues(&field), Err(Error::NonFinite(0))));
        assert!(eigen_decompose(&field).is_err());
    }

    #[test]
    fn decomposition_reconstructs_three_by_three() {
        let shape = Shape::new_3d(1, 1, 1).unwrap();
        let m = [4.0, 1.0, -0.5, 3.0, 0.25, 2.0];
        let field = TensorField::from_components(shape, m.to_vec()).unwrap();
        let dec = eigen_decompose(&field).unwrap();
        let lambda = dec.values().at(0);
        let mut rebuilt = [0.0; 6];
        let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for k in 0..3 {
            let v = dec.vector(0, k);
            for (slot, (i, j)) in rebuilt.iter_mut().zip(idx) {
                *slot += lambda[k] * v[i] * v[j];
            }
        }
        for (a, b) in rebuilt.iter().zip(m) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(lambda[0] <= lambda[1] && lambda[1] <= lambda[2]);
    }
}
