//! Synthetic curvilinear phantoms with exact ground truth.
//!
//! 2D phantoms are random cubic Bezier strokes; 3D phantoms are branching tube
//! trees. Geometry is drawn from ChaCha8 streams keyed by `(seed, branch index)`,
//! so adding branches never moves the existing ones and the truth mask does not
//! depend on the noise or smoothing settings. Degradation order is noise, then
//! smoothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{add_gaussian_noise, gaussian_smooth, BinaryMask, Image, Shape};

/// Smallest extent allowed along any phantom axis.
pub const MIN_EXTENT: usize = 16;

/// Noise streams count down from here, far away from the per-branch streams.
const NOISE_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Shape,
    /// Number of strokes (2D) or tree leaves (3D).
    pub n_branches: usize,
    /// Tube radius bounds in pixels, `[min, max]`.
    pub radius_range: [f64; 2],
    /// Foreground value on the `[0, 255]` scale.
    pub intensity: f64,
    pub noise_variance: f64,
    /// Gaussian smoothing std; 0 disables smoothing.
    pub smooth_std: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn default_2d(seed: u64) -> Self {
        PhantomSpec {
            dims: Shape::new_2d(256, 256).expect("valid shape"),
            n_branches: 8,
            radius_range: [1.0, 2.0],
            intensity: 100.0,
            noise_variance: 10.0,
            smooth_std: 1.0,
            seed,
        }
    }

    pub fn default_3d(n_branches: usize, seed: u64) -> Self {
        PhantomSpec {
            dims: Shape::new_3d(100, 100, 100).expect("valid shape"),
            n_branches,
            radius_range: [1.0, 2.5],
            intensity: 100.0,
            noise_variance: 10.0,
            smooth_std: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.dims().iter().any(|&d| d < MIN_EXTENT) {
            return Err(Error::param(
                "dims",
                format!("every extent must be at least {MIN_EXTENT}"),
            ));
        }
        if self.n_branches < 1 {
            return Err(Error::param("n_branches", "must be at least 1"));
        }
        let [lo, hi] = self.radius_range;
        if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::param("radius_range", "need 1 <= min <= max"));
        }
        let min_extent = *self.dims.dims().iter().min().expect("non-empty dims") as f64;
        if 2.0 * hi + 4.0 > min_extent {
            return Err(Error::param("radius_range", "tubes do not fit inside the grid"));
        }
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(Error::param("intensity", "must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::param("noise_variance", "must be non-negative"));
        }
        if !(self.smooth_std >= 0.0 && self.smooth_std.is_finite()) {
            return Err(Error::param("smooth_std", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub image: Image,
    pub truth: BinaryMask,
}

fn branch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn degrade(truth: &BinaryMask, spec: &PhantomSpec) -> Result<Image> {
    let mut image = truth.to_image(spec.intensity);
    if spec.noise_variance > 0.0 {
        // Distinct noise per complexity level, same geometry.
        let mut rng = branch_rng(spec.seed, NOISE_STREAM - spec.n_branches as u64);
        let noise_seed = rng.random();
        image = add_gaussian_noise(&image, spec.noise_variance, noise_seed)?;
    }
    if spec.smooth_std > 0.0 {
        image = gaussian_smooth(&image, spec.smooth_std)?;
    }
    Ok(image)
}

type Point = [f64; 3];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: Point) -> Point {
    let n = norm(a);
    a.map(|v| v / n)
}

/// Marks every voxel whose center lies within the interpolated radius of the
/// segment `a -> b` (radii `ra -> rb`).
fn stamp_segment(mask: &mut BinaryMask, a: Point, b: Point, ra: f64, rb: f64) {
    let shape = mask.shape();
    let ext = shape.extents();
    let ndim = shape.ndim();
    let r = ra.max(rb);
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        if k >= ndim {
            continue;
        }
        let min = a[k].min(b[k]) - r;
        let max = a[k].max(b[k]) + r;
        lo[k] = min.floor().max(0.0) as usize;
        hi[k] = (max.ceil().max(0.0) as usize).min(ext[k] - 1);
    }
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let data = mask.data_mut();
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let p = [x as f64, y as f64, z as f64];
                let t = if len2 > 0.0 {
                    (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let closest = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
                let radius = ra + t * (rb - ra);
                if norm(sub(p, closest)) <= radius {
                    data[shape.index(x, y, z)] = true;
                }
            }
        }
    }
}

fn bezier(p: &[Point; 4], t: f64) -> Point {
    let s = 1.0 - t;
    let w = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
    let mut out = [0.0; 3];
    for (pt, wi) in p.iter().zip(w) {
        for k in 0..3 {
            out[k] += wi * pt[k];
        }
    }
    out
}

/// Random smooth strokes on a zero background.
pub fn generate_2d(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    if spec.dims.ndim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: spec.dims.ndim(),
        });
    }
    let [nx, ny, _] = spec.dims.extents().map(|e| e as f64);
    let [r_min, r_max] = spec.radius_range;
    let margin = r_max + 2.0;
    let mut truth = BinaryMask::empty(spec.dims);
    for k in 0..spec.n_branches {
        let mut rng = branch_rng(spec.seed, k as u64);
        let random_point = |rng: &mut ChaCha8Rng| {
            [
                rng.random_range(margin..nx - 1.0 - margin),
                rng.random_range(margin..ny - 1.0 - margin),
                0.0,
            ]
        };
        let start = random_point(&mut rng);
        let mut end = random_point(&mut rng);
        // Prefer long strokes: take the farthest of a few candidate endpoints.
        for _ in 0..3 {
            let candidate = random_point(&mut rng);
            if norm(sub(candidate, start)) > norm(sub(end, start)) {
                end = candidate;
            }
        }
        let chord = sub(end, start);
        let normal = unit([-chord[1], chord[0], 0.0]);
        let length = norm(chord);
        let control = |frac: f64, rng: &mut ChaCha8Rng| {
            let bend = rng.random_range(-0.35..0.35) * length;
            [
                (start[0] + frac * chord[0] + bend * normal[0]).clamp(margin, nx - 1.0 - margin),
                (start[1] + frac * chord[1] + bend * normal[1]).clamp(margin, ny - 1.0 - margin),
                0.0,
            ]
        };
        let c1 = control(1.0 / 3.0, &mut rng);
        let c2 = control(2.0 / 3.0, &mut rng);
        let radius = rng.random_range(r_min..=r_max);
        let curve = [start, c1, c2, end];
        let polygon = norm(sub(c1, start)) + norm(sub(c2, c1)) + norm(sub(end, c2));
        let steps = (polygon / 0.5).ceil().max(1.0) as usize;
        let mut prev = bezier(&curve, 0.0);
        for i in 1..=steps {
            let next = bezier(&curve, i as f64 / steps as f64);
            stamp_segment(&mut truth, prev, next, radius, radius);
            prev = next;
        }
    }
    let image = degrade(&truth, spec)?;
    Ok(Phantom { image, truth })
}

#[derive(Clone, Debug)]
struct Branch {
    points: Vec<Point>,
    radii: Vec<f64>,
}

const STEP: f64 = 1.5;
const WIGGLE: f64 = 0.08;
const MIN_STEPS: usize = 6;

fn inside(p: Point, r: f64, ext: [usize; 3]) -> bool {
    (0..3).all(|k| p[k] - r >= 1.0 && p[k] + r <= ext[k] as f64 - 2.0)
}

fn perturb(dir: Point, rng: &mut ChaCha8Rng) -> Point {
    let mut d = dir;
    for c in d.iter_mut() {
        let n: f64 = StandardNormal.sample(rng);
        *c += WIGGLE * n;
    }
    unit(d)
}

/// Grows a tapered path from `start` until it reaches `max_len` or the margin.
fn grow(
    start: Point,
    dir: Point,
    r_start: f64,
    r_end: f64,
    max_len: f64,
    ext: [usize; 3],
    rng: &mut ChaCha8Rng,
) -> Branch {
    let max_steps = (max_len / STEP).ceil() as usize;
    let mut points = vec![start];
    let mut dir = dir;
    for _ in 0..max_steps {
        dir = perturb(dir, rng);
        let last = *points.last().expect("non-empty");
        let next = [
            last[0] + STEP * dir[0],
            last[1] + STEP * dir[1],
            last[2] + STEP * dir[2],
        ];
        if !inside(next, r_start, ext) {
            break;
        }
        points.push(next);
    }
    let n = points.len().max(2) as f64 - 1.0;
    let radii = (0..points.len())
        .map(|i| r_start + (r_end - r_start) * i as f64 / n)
        .collect();
    Branch { points, radii }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v: Point = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        if norm(v) > 1e-6 {
            return unit(v);
        }
    }
}

/// Rotates `dir` by `angle` towards a random direction perpendicular to it.
fn deflect(dir: Point, angle: f64, rng: &mut ChaCha8Rng) -> Point {
    let r = random_unit(rng);
    let along = dot(r, dir);
    let perp = unit([
        r[0] - along * dir[0],
        r[1] - along * dir[1],
        r[2] - along * dir[2],
    ]);
    let (s, c) = angle.sin_cos();
    unit([
        c * dir[0] + s * perp[0],
        c * dir[1] + s * perp[1],
        c * dir[2] + s * perp[2],
    ])
}

fn trunk(spec: &PhantomSpec, ext: [usize; 3]) -> Branch {
    let mut rng = branch_rng(spec.seed, 0);
    let r_max = spec.radius_range[1];
    let r_end = (0.75 * r_max).max(spec.radius_range[0]);
    let axis = rng.random_range(0..3);
    let positive_side = rng.random_bool(0.5);
    let mut start = [0.0; 3];
    let mut dir = [0.0; 3];
    for k in 0..3 {
        let e = ext[k] as f64;
        start[k] = rng.random_range(0.35 * e..0.65 * e);
    }
    let e = ext[axis] as f64;
    let offset = r_max + 2.0;
    start[axis] = if positive_side { offset } else { e - 1.0 - offset };
    dir[axis] = if positive_side { 1.0 } else { -1.0 };
    let max_len = 1.5 * *ext.iter().max().expect("three axes") as f64;
    grow(start, dir, r_max, r_end, max_len, ext, &mut rng)
}

fn side_branch(k: usize, tree: &[Branch], spec: &PhantomSpec, ext: [usize; 3]) -> Branch {
    let mut rng = branch_rng(spec.seed, k as u64);
    let r_min = spec.radius_range[0];
    let candidates: Vec<&Branch> = tree.iter().filter(|b| b.points.len() >= MIN_STEPS).collect();
    let mut best = Branch {
        points: Vec::new(),
        radii: Vec::new(),
    };
    if candidates.is_empty() {
        return best;
    }
    let max_dim = *ext.iter().max().expect("three axes") as f64;
    // Retry attachments that run into the margin immediately.
    for _ in 0..16 {
        let parent = candidates[rng.random_range(0..candidates.len())];
        let n = parent.points.len();
        let at = rng.random_range(n / 5..n - 1);
        let local = unit(sub(parent.points[at + 1], parent.points[at]));
        let angle = rng.random_range(35f64..75.0).to_radians();
        let dir = deflect(local, angle, &mut rng);
        let r_start = (parent.radii[at] * rng.random_range(0.7..0.95)).max(r_min);
        let r_end = (0.7 * r_start).max(r_min);
        let max_len = rng.random_range(0.3..0.6) * max_dim;
        let branch = grow(parent.points[at], dir, r_start, r_end, max_len, ext, &mut rng);
        if branch.points.len() > best.points.len() {
            best = branch;
        }
        if best.points.len() >= MIN_STEPS {
            break;
        }
    }
    best
}

/// Branching tube tree with `n_branches` leaves.
pub fn generate_3d_tree(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    if spec.dims.ndim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: spec.dims.ndim(),
        });
    }
    let ext = spec.dims.extents();
    let mut tree = vec![trunk(spec, ext)];
    for k in 1..spec.n_branches {
        let branch = side_branch(k, &tree, spec, ext);
        tree.push(branch);
    }
    let mut truth = BinaryMask::empty(spec.dims);
    for branch in &tree {
        for i in 1..branch.points.len() {
            stamp_segment(
                &mut truth,
                branch.points[i - 1],
                branch.points[i],
                branch.radii[i - 1],
                branch.radii[i],
            );
        }
    }
    let image = degrade(&truth, spec)?;
    Ok(Phantom { image, truth })
}

/// Dispatches on the dimensionality of `spec.dims`.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    match spec.dims.ndim() {
        2 => generate_2d(spec),
        _ => generate_3d_tree(spec),
    }
}
