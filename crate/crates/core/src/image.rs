//! Dense 2D/3D scalar grids and the point operations shared by the pipeline.
//!
//! Voxels are stored x-fastest: `index = x + nx * (y + ny * z)`. A 2D image is
//! stored with a unit z extent so that 2D and 3D code share one indexing scheme.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extent of a 2D or 3D image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    extents: [usize; 3],
    ndim: usize,
}

impl Shape {
    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        Self::from_dims(&[nx, ny])
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        Self::from_dims(&[nx, ny, nz])
    }

    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if !(dims.len() == 2 || dims.len() == 3) || dims.contains(&0) {
            return Err(Error::InvalidShape(dims.to_vec()));
        }
        let mut extents = [1; 3];
        extents[..dims.len()].copy_from_slice(dims);
        Ok(Shape {
            extents,
            ndim: dims.len(),
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Extents of the meaningful axes only.
    pub fn dims(&self) -> &[usize] {
        &self.extents[..self.ndim]
    }

    /// Extents padded to three axes (z = 1 for 2D).
    pub fn extents(&self) -> [usize; 3] {
        self.extents
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.extents[0] * (y + self.extents[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.extents;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Distance in the flat buffer between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.extents[..axis].iter().product()
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::from_dims(&dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.dims().to_vec()
    }
}

/// Grayscale image or volume with real-valued, finite intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    shape: Shape,
    data: Vec<f64>,
}

impl Image {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Image { shape, data })
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        Image {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    /// Builds an image from data the caller guarantees to be finite.
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Image { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.shape.index(x, y, z)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Applies `f` to every value; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Image> {
        Image::new(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn ensure_same_shape(&self, other: Shape) -> Result<()> {
        if self.shape != other {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: other,
            });
        }
        Ok(())
    }
}

/// Boolean mask over an image grid (ground truth or field of view).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    shape: Shape,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(shape: Shape, data: Vec<bool>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        Ok(BinaryMask { shape, data })
    }

    pub fn empty(shape: Shape) -> Self {
        BinaryMask {
            shape,
            data: vec![false; shape.len()],
        }
    }

    /// Marks every strictly positive pixel of `img`.
    pub fn from_positive(img: &Image) -> Self {
        BinaryMask {
            shape: img.shape(),
            data: img.data().iter().map(|&v| v > 0.0).collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn to_image(&self, on: f64) -> Image {
        Image::from_raw(
            self.shape,
            self.data.iter().map(|&b| if b { on } else { 0.0 }).collect(),
        )
    }
}

/// Affine rescale to `[0, 1]`; a constant image maps to zeros.
pub fn normalize(img: &Image) -> Image {
    let (lo, hi) = img.min_max();
    let range = hi - lo;
    let data = if range > 0.0 {
        img.data.iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.0; img.data.len()]
    };
    Image::from_raw(img.shape, data)
}

/// Normalized 1D Gaussian kernel truncated at `ceil(3 * std)`.
pub fn gaussian_kernel(std: f64) -> Vec<f64> {
    let radius = (3.0 * std).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * std * std)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= sum);
    kernel
}

/// Separable Gaussian smoothing with edge replication at the borders.
pub fn gaussian_smooth(img: &Image, std: f64) -> Result<Image> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::param("std", format!("must be positive, got {std}")));
    }
    let kernel = gaussian_kernel(std);
    let radius = (kernel.len() / 2) as isize;
    let shape = img.shape;
    let mut current = img.data.clone();
    let mut line = Vec::new();
    for axis in 0..shape.ndim() {
        let n = shape.extents()[axis];
        if n == 1 {
            continue;
        }
        let stride = shape.stride(axis);
        let mut next = vec![0.0; current.len()];
        for start in line_starts(shape, axis) {
            line.clear();
            line.extend((0..n).map(|i| current[start + i * stride]));
            for i in 0..n {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let j = (i as isize + k as isize - radius).clamp(0, n as isize - 1);
                    acc += w * line[j as usize];
                }
                next[start + i * stride] = acc;
            }
        }
        current = next;
    }
    Ok(Image::from_raw(shape, current))
}

/// Flat indices of the first element of every line running along `axis`.
fn line_starts(shape: Shape, axis: usize) -> impl Iterator<Item = usize> {
    let [nx, ny, nz] = shape.extents();
    let ranges = match axis {
        0 => [1, ny, nz],
        1 => [nx, 1, nz],
        _ => [nx, ny, 1],
    };
    (0..ranges[2]).flat_map(move |z| {
        (0..ranges[1]).flat_map(move |y| (0..ranges[0]).map(move |x| shape.index(x, y, z)))
    })
}

/// Intensity convention the noise variance is expressed against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityRange {
    /// Values on the 8-bit `[0, 255]` scale.
    #[default]
    Byte,
    /// Values on the unit `[0, 1]` scale; noise std is divided by 255.
    Unit,
}

/// Adds i.i.d. zero-mean Gaussian noise with `variance` on the `[0, 255]` scale.
pub fn add_gaussian_noise(img: &Image, variance: f64, seed: u64) -> Result<Image> {
    add_gaussian_noise_in(img, variance, seed, IntensityRange::Byte)
}

/// Like [`add_gaussian_noise`], rescaling the deviation for unit-range images.
///
/// Samples come from a ChaCha8 stream seeded with `seed` and are drawn in
/// storage order, so output is reproducible bit-for-bit.
pub fn add_gaussian_noise_in(
    img: &Image,
    variance: f64,
    seed: u64,
    range: IntensityRange,
) -> Result<Image> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::param(
            "variance",
            format!("must be non-negative, got {variance}"),
        ));
    }
    if variance == 0.0 {
        return Ok(img.clone());
    }
    let std = match range {
        IntensityRange::Byte => variance.sqrt(),
        IntensityRange::Unit => variance.sqrt() / 255.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + std * z
        })
        .collect();
    Ok(Image::from_raw(img.shape, data))
}
