//! Flat grayscale morphology with rasterized line structuring elements.
//!
//! Border policy: structuring-element offsets that leave the image are skipped,
//! which is the same as padding with `+inf` for erosion and `-inf` for dilation.
//! Erosion/dilation then form an adjunction, so openings are anti-extensive and
//! idempotent right up to the border.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Unit direction of a line structuring element.
///
/// A line is unchanged by `u -> -u`, so orientations are stored in a canonical
/// half-space: the last nonzero component is non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    u: [f64; 3],
    ndim: usize,
}

impl Orientation {
    /// Components with magnitude below this are snapped to zero.
    const SNAP: f64 = 1e-15;

    pub fn new(components: &[f64]) -> Result<Self> {
        let ndim = components.len();
        if !(ndim == 2 || ndim == 3) {
            return Err(Error::param(
                "orientation",
                format!("expected 2 or 3 components, got {ndim}"),
            ));
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::param("orientation", "must be a finite nonzero vector"));
        }
        let mut u = [0.0; 3];
        for (dst, &c) in u.iter_mut().zip(components) {
            let v = c / norm;
            *dst = if v.abs() < Self::SNAP { 0.0 } else { v };
        }
        let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        u.iter_mut().for_each(|c| *c /= norm);
        if let Some(&last) = u[..ndim].iter().rev().find(|c| **c != 0.0) {
            if last < 0.0 {
                u.iter_mut().for_each(|c| *c = -*c);
            }
        }
        Ok(Orientation { u, ndim })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Components of the meaningful axes.
    pub fn components(&self) -> &[f64] {
        &self.u[..self.ndim]
    }

    /// Components padded to three axes.
    pub fn as_array(&self) -> [f64; 3] {
        self.u
    }

    /// Angle between the two lines, in radians, within `[0, pi/2]`.
    pub fn line_angle(&self, other: &Orientation) -> f64 {
        let dot: f64 = self.u.iter().zip(&other.u).map(|(a, b)| a * b).sum();
        dot.abs().min(1.0).acos()
    }
}

/// Ordered list of distinct orientations sharing one dimensionality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationSet {
    orientations: Vec<Orientation>,
}

impl OrientationSet {
    pub fn new(orientations: Vec<Orientation>) -> Result<Self> {
        let Some(first) = orientations.first() else {
            return Err(Error::Empty("orientation set"));
        };
        let ndim = first.ndim();
        if orientations.iter().any(|o| o.ndim() != ndim) {
            return Err(Error::param("orientations", "mixed dimensionality"));
        }
        for (i, a) in orientations.iter().enumerate() {
            if orientations[..i].iter().any(|b| b == a) {
                return Err(Error::param("orientations", "duplicate orientation"));
            }
        }
        Ok(OrientationSet { orientations })
    }

    pub fn len(&self) -> usize {
        self.orientations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientations.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.orientations[0].ndim()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Orientation> {
        self.orientations.iter()
    }

    pub fn as_slice(&self) -> &[Orientation] {
        &self.orientations
    }
}

impl<'a> IntoIterator for &'a OrientationSet {
    type Item = &'a Orientation;
    type IntoIter = std::slice::Iter<'a, Orientation>;

    fn into_iter(self) -> Self::IntoIter {
        self.orientations.iter()
    }
}

/// `n` planar orientations at angles `j * 180 / n` degrees.
pub fn make_orientations_2d(n: usize) -> Result<OrientationSet> {
    if n < 1 {
        return Err(Error::param("n", "at least one orientation required"));
    }
    let orientations = (0..n)
        .map(|j| {
            let theta = (j as f64 * 180.0 / n as f64).to_radians();
            Orientation::new(&[theta.cos(), theta.sin()])
        })
        .collect::<Result<Vec<_>>>()?;
    OrientationSet::new(orientations)
}

/// `n` orientations on the upper hemisphere from a golden-angle (spherical
/// Fibonacci) lattice: heights `z_i = 1 - (i + 1/2) / n`, azimuths `i * golden angle`.
pub fn make_orientations_3d(n: usize) -> Result<OrientationSet> {
    if n < 1 {
        return Err(Error::param("n", "at least one orientation required"));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let orientations = (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = i as f64 * golden_angle;
            Orientation::new(&[r * phi.cos(), r * phi.sin(), z])
        })
        .collect::<Result<Vec<_>>>()?;
    OrientationSet::new(orientations)
}

/// Strictly increasing list of structuring-element lengths, each at least 1 pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScaleSet {
    scales: Vec<f64>,
}

impl ScaleSet {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Empty("scale set"));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s >= 1.0)) {
            return Err(Error::param("scales", "every scale must be finite and >= 1"));
        }
        if scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("scales", "must be strictly increasing"));
        }
        Ok(ScaleSet { scales })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ScaleSet {
    type Error = Error;

    fn try_from(scales: Vec<f64>) -> Result<Self> {
        ScaleSet::new(scales)
    }
}

impl From<ScaleSet> for Vec<f64> {
    fn from(set: ScaleSet) -> Self {
        set.scales
    }
}

/// Centered, point-symmetric digital line segment.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSe {
    offsets: Vec<[isize; 3]>,
    scale: f64,
    orientation: Orientation,
}

impl LineSe {
    /// Offsets relative to the center, ordered along the line; z is 0 in 2D.
    pub fn offsets(&self) -> &[[isize; 3]] {
        &self.offsets
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn orientation(&self) -> &Orientation {
        &self.orientation
    }

    pub fn ndim(&self) -> usize {
        self.orientation.ndim()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Rasterizes a line of `round(scale)` pixels (bumped to the next odd count)
/// through the origin.
///
/// One pixel is placed per step along the dominant axis; the other coordinates
/// are rounded half away from zero, which is what makes the set point-symmetric.
pub fn make_line_se(scale: f64, orientation: &Orientation) -> Result<LineSe> {
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(Error::param("scale", format!("must be >= 1, got {scale}")));
    }
    let mut length = scale.round() as isize;
    if length % 2 == 0 {
        length += 1;
    }
    let half = (length - 1) / 2;
    let u = orientation.as_array();
    let major = (0..orientation.ndim())
        .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(b.cmp(&a)))
        .expect("orientation has at least two axes");
    let step = u.map(|c| c / u[major].abs());
    let offsets = (-half..=half)
        .map(|t| step.map(|s| (t as f64 * s).round() as isize))
        .collect();
    Ok(LineSe {
        offsets,
        scale,
        orientation: *orientation,
    })
}

fn check_dims(img: &Image, se: &LineSe) -> Result<()> {
    if img.ndim() != se.ndim() {
        return Err(Error::DimensionMismatch {
            expected: img.ndim(),
            actual: se.ndim(),
        });
    }
    Ok(())
}

/// Flat rank filter: folds `op` over every in-bounds translated offset.
///
/// Rows along x are processed independently (in parallel); each row applies
/// the offsets as whole shifted-slice passes so the inner loop vectorizes.
fn rank_filter(img: &Image, se: &LineSe, op: fn(f64, f64) -> f64) -> Image {
    let shape = img.shape();
    let [nx, ny, nz] = shape.extents().map(|e| e as isize);
    let src = img.data();
    let mut out = src.to_vec();
    out.par_chunks_mut(nx as usize)
        .enumerate()
        .for_each(|(row, dst)| {
            let y = row as isize % ny;
            let z = row as isize / ny;
            for &[ox, oy, oz] in se.offsets() {
                let (sy, sz) = (y + oy, z + oz);
                if sy < 0 || sy >= ny || sz < 0 || sz >= nz {
                    continue;
                }
                let x0 = (-ox).max(0);
                let x1 = (nx - ox).min(nx);
                if x0 >= x1 {
                    continue;
                }
                let base = shape.index(0, sy as usize, sz as usize) as isize + ox;
                let from = &src[(base + x0) as usize..(base + x1) as usize];
                for (d, &s) in dst[x0 as usize..x1 as usize].iter_mut().zip(from) {
                    *d = op(*d, s);
                }
            }
        });
    Image::from_raw(shape, out)
}

/// Pointwise minimum over the structuring element.
pub fn erode(img: &Image, se: &LineSe) -> Result<Image> {
    check_dims(img, se)?;
    Ok(rank_filter(img, se, f64::min))
}

/// Pointwise maximum over the structuring element.
pub fn dilate(img: &Image, se: &LineSe) -> Result<Image> {
    check_dims(img, se)?;
    Ok(rank_filter(img, se, f64::max))
}

pub fn open(img: &Image, se: &LineSe) -> Result<Image> {
    dilate(&erode(img, se)?, se)
}

pub fn close(img: &Image, se: &LineSe) -> Result<Image> {
    erode(&dilate(img, se)?, se)
}

fn difference(a: &Image, b: &Image) -> Image {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    Image::from_raw(a.shape(), data)
}

/// White top-hat `img - open(img)`; non-negative everywhere.
pub fn top_hat(img: &Image, se: &LineSe) -> Result<Image> {
    Ok(difference(img, &open(img, se)?))
}

/// Black top-hat `close(img) - img`; non-negative everywhere.
pub fn bottom_hat(img: &Image, se: &LineSe) -> Result<Image> {
    Ok(difference(&close(img, se)?, img))
}

/// One top-hat image per orientation at a single scale, in orientation order.
pub fn top_hat_bank(img: &Image, scale: f64, orientations: &OrientationSet) -> Result<Vec<Image>> {
    orientations
        .iter()
        .map(|o| top_hat(img, &make_line_se(scale, o)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use proptest::prelude::*;

    fn row(values: &[f64]) -> Image {
        Image::new(Shape::new_2d(values.len(), 1).unwrap(), values.to_vec()).unwrap()
    }

    fn horizontal(scale: f64) -> LineSe {
        make_line_se(scale, &Orientation::new(&[1.0, 0.0]).unwrap()).unwrap()
    }

    /// Independent reference: explicit bounds check per pixel and offset.
    fn naive(img: &Image, se: &LineSe, take_min: bool) -> Vec<f64> {
        let shape = img.shape();
        let ext = shape.extents().map(|e| e as isize);
        (0..shape.len())
            .map(|i| {
                let c = shape.coords(i).map(|v| v as isize);
                let mut acc = if take_min { f64::INFINITY } else { f64::NEG_INFINITY };
                for o in se.offsets() {
                    let p = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                    if (0..3).all(|k| p[k] >= 0 && p[k] < ext[k]) {
                        let v = img.get(p[0] as usize, p[1] as usize, p[2] as usize);
                        acc = if take_min { acc.min(v) } else { acc.max(v) };
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn orientations_2d_examples() {
        let two = make_orientations_2d(2).unwrap();
        assert_eq!(two.as_slice()[0].components(), &[1.0, 0.0]);
        assert_eq!(two.as_slice()[1].components(), &[0.0, 1.0]);
        let one = make_orientations_2d(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.as_slice()[0].components(), &[1.0, 0.0]);
        let four = make_orientations_2d(4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[1.0, 0.0], [s, s], [0.0, 1.0], [-s, s]];
        for (o, e) in four.iter().zip(expected) {
            assert!((o.components()[0] - e[0]).abs() < 1e-12);
            assert!((o.components()[1] - e[1]).abs() < 1e-12);
        }
        assert!(make_orientations_2d(0).is_err());
    }

    #[test]
    fn orientations_3d_are_unit_and_distinct() {
        assert!(make_orientations_3d(0).is_err());
        for n in [1, 2, 7, 40, 100] {
            let set = make_orientations_3d(n).unwrap();
            assert_eq!(set.len(), n);
            for (i, a) in set.iter().enumerate() {
                let norm: f64 = a.components().iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
                assert!(a.components()[2] >= 0.0);
                for b in &set.as_slice()[..i] {
                    assert!(a.line_angle(b) > 0.0);
                }
            }
        }
    }

    #[test]
    fn canonical_orientation_flips_sign() {
        let o = Orientation::new(&[1.0, -1.0]).unwrap();
        assert!(o.components()[1] > 0.0);
        let o = Orientation::new(&[-2.0, 0.0, 0.0]).unwrap();
        assert_eq!(o.components(), &[1.0, 0.0, 0.0]);
        assert!(Orientation::new(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn line_se_examples() {
        for o in make_orientations_2d(8).unwrap().iter() {
            assert_eq!(make_line_se(1.0, o).unwrap().offsets(), &[[0, 0, 0]]);
        }
        assert_eq!(
            horizontal(3.0).offsets(),
            &[[-1, 0, 0], [0, 0, 0], [1, 0, 0]]
        );
        let diag = make_orientations_2d(4).unwrap().as_slice()[1];
        assert_eq!(
            make_line_se(3.0, &diag).unwrap().offsets(),
            &[[-1, -1, 0], [0, 0, 0], [1, 1, 0]]
        );
        // Even lengths are extended to stay symmetric.
        assert_eq!(horizontal(4.0).len(), 5);
        assert!(make_line_se(0.5, &diag).is_err());
    }

    #[test]
    fn line_se_is_centered_and_symmetric() {
        for scale in [1.0, 2.0, 3.0, 4.4, 7.0, 9.0, 15.0] {
            for o in make_orientations_3d(40)
                .unwrap()
                .iter()
                .chain(make_orientations_2d(12).unwrap().iter())
            {
                let se = make_line_se(scale, o).unwrap();
                let offsets = se.offsets();
                assert!(offsets.contains(&[0, 0, 0]));
                for p in offsets {
                    assert!(offsets.contains(&[-p[0], -p[1], -p[2]]));
                }
                let mut length = scale.round() as usize;
                if length % 2 == 0 {
                    length += 1;
                }
                assert_eq!(se.len(), length);
            }
        }
    }

    #[test]
    fn row_examples() {
        let img = row(&[0.0, 0.0, 5.0, 0.0, 0.0]);
        let se = horizontal(3.0);
        assert_eq!(erode(&img, &se).unwrap().data(), &[0.0; 5]);
        assert_eq!(dilate(&img, &se).unwrap().data(), &[0.0, 5.0, 5.0, 5.0, 0.0]);
        assert_eq!(open(&img, &se).unwrap().data(), &[0.0; 5]);
    }

    #[test]
    fn constant_image_is_fixed() {
        let img = Image::filled(Shape::new_3d(5, 6, 7).unwrap(), 3.25);
        for o in make_orientations_3d(5).unwrap().iter() {
            let se = make_line_se(5.0, o).unwrap();
            assert_eq!(erode(&img, &se).unwrap(), img);
            assert_eq!(dilate(&img, &se).unwrap(), img);
            assert!(top_hat(&img, &se).unwrap().data().iter().all(|&v| v == 0.0));
            assert!(bottom_hat(&img, &se).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn isolated_peak_is_extracted() {
        let shape = Shape::new_2d(7, 7).unwrap();
        let mut data = vec![0.0; 49];
        data[shape.index(3, 3, 0)] = 9.0;
        let img = Image::new(shape, data).unwrap();
        for o in make_orientations_2d(4).unwrap().iter() {
            let se = make_line_se(3.0, o).unwrap();
            assert_eq!(top_hat(&img, &se).unwrap(), img);
        }
    }

    #[test]
    fn line_containing_se_survives_opening() {
        let shape = Shape::new_2d(40, 9).unwrap();
        let mut data = vec![0.0; shape.len()];
        for x in 10..30 {
            data[shape.index(x, 4, 0)] = 1.0;
        }
        let img = Image::new(shape, data).unwrap();
        let th = top_hat(&img, &horizontal(7.0)).unwrap();
        for x in 10..30 {
            assert_eq!(th.get(x, 4, 0), 0.0);
        }
    }

    #[test]
    fn bank_prefers_orientation_across_the_line() {
        let shape = Shape::new_2d(40, 40).unwrap();
        let mut data = vec![0.0; shape.len()];
        for x in 5..35 {
            data[shape.index(x, 20, 0)] = 10.0;
        }
        let img = Image::new(shape, data).unwrap();
        let orientations = make_orientations_2d(4).unwrap();
        let bank = top_hat_bank(&img, 9.0, &orientations).unwrap();
        assert_eq!(bank.len(), 4);
        let sum_on_line = |th: &Image| (5..35).map(|x| th.get(x, 20, 0)).sum::<f64>();
        assert!(sum_on_line(&bank[2]) > sum_on_line(&bank[0]));
        for (member, o) in bank.iter().zip(orientations.iter()) {
            assert_eq!(member, &top_hat(&img, &make_line_se(9.0, o).unwrap()).unwrap());
        }
    }

    #[test]
    fn dimensionality_mismatch_is_rejected() {
        let img = Image::zeros(Shape::new_3d(4, 4, 4).unwrap());
        assert!(matches!(
            erode(&img, &horizontal(3.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scale_set_validation() {
        assert!(ScaleSet::new(vec![3.0, 5.0, 7.0]).is_ok());
        assert!(ScaleSet::new(vec![]).is_err());
        assert!(ScaleSet::new(vec![0.5, 3.0]).is_err());
        assert!(ScaleSet::new(vec![5.0, 3.0]).is_err());
        assert!(ScaleSet::new(vec![3.0, 3.0]).is_err());
    }

    fn image_strategy() -> impl Strategy<Value = Image> {
        prop_oneof![
            (1usize..=24, 1usize..=24).prop_map(|(x, y)| Shape::new_2d(x, y).unwrap()),
            (1usize..=8, 1usize..=8, 1usize..=8).prop_map(|(x, y, z)| Shape::new_3d(x, y, z).unwrap()),
        ]
        .prop_flat_map(|shape| {
            proptest::collection::vec(-50i32..50, shape.len()).prop_map(move |v| {
                Image::new(shape, v.into_iter().map(|x| x as f64 * 0.5).collect()).unwrap()
            })
        })
    }

    fn se_strategy(ndim: usize) -> impl Strategy<Value = LineSe> {
        (
            1.0f64..9.0,
            proptest::collection::vec(-1.0f64..1.0, ndim),
        )
            .prop_filter_map("degenerate direction", |(scale, dir)| {
                let o = Orientation::new(&dir).ok()?;
                make_line_se(scale, &o).ok()
            })
    }

    fn case() -> impl Strategy<Value = (Image, LineSe)> {
        image_strategy().prop_flat_map(|img| {
            let ndim = img.ndim();
            (Just(img), se_strategy(ndim))
        })
    }

    proptest! {
        #[test]
        fn matches_naive_oracle((img, se) in case()) {
            prop_assert_eq!(erode(&img, &se).unwrap().into_data(), naive(&img, &se, true));
            prop_assert_eq!(dilate(&img, &se).unwrap().into_data(), naive(&img, &se, false));
        }

        #[test]
        fn opening_and_closing_laws((img, se) in case()) {
            let opened = open(&img, &se).unwrap();
            let closed = close(&img, &se).unwrap();
            for ((o, v), c) in opened.data().iter().zip(img.data()).zip(closed.data()) {
                prop_assert!(o <= v && v <= c);
            }
            prop_assert_eq!(&open(&opened, &se).unwrap(), &opened);
            prop_assert_eq!(&close(&closed, &se).unwrap(), &closed);
            prop_assert!(top_hat(&img, &se).unwrap().data().iter().all(|&v| v >= 0.0));
            prop_assert!(bottom_hat(&img, &se).unwrap().data().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn dilation_is_dual_to_erosion((img, se) in case()) {
            let negated = img.map(|v| -v).unwrap();
            let dual = erode(&negated, &se).unwrap().map(|v| -v).unwrap();
            prop_assert_eq!(dilate(&img, &se).unwrap(), dual);
        }
    }

    #[test]
    fn translation_equivariance_on_interior() {
        let shape = Shape::new_2d(30, 30).unwrap();
        let data: Vec<f64> = (0..shape.len()).map(|i| ((i * 7919) % 31) as f64).collect();
        let img = Image::new(shape, data).unwrap();
        let (dx, dy) = (3usize, 2usize);
        let shifted = Image::new(
            shape,
            (0..shape.len())
                .map(|i| {
                    let [x, y, _] = shape.coords(i);
                    if x >= dx && y >= dy {
                        img.get(x - dx, y - dy, 0)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let o = make_orientations_2d(12).unwrap().as_slice()[5];
        let se = make_line_se(7.0, &o).unwrap();
        let a = top_hat(&img, &se).unwrap();
        let b = top_hat(&shifted, &se).unwrap();
        // Opening reaches two SE half-lengths from a pixel.
        let margin = 6;
        for y in margin..30 - margin - dy {
            for x in margin..30 - margin - dx {
                assert_eq!(a.get(x, y, 0), b.get(x + dx, y + dy, 0));
            }
        }
    }
}
