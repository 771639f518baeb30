//! Closed-form eigensolvers for small symmetric matrices.
//!
//! Matrices are passed as their upper triangle, row-major:
//! `[xx, xy, yy]` in 2D and `[xx, xy, xz, yy, yz, zz]` in 3D.
//! Eigenvalues come back in ascending order with matching unit eigenvectors.

use std::f64::consts::PI;

/// Eigenvalues and eigenvectors of a symmetric 2x2 matrix.
pub fn sym2_eigen(m: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
    let [a, b, c] = m;
    let mean = 0.5 * (a + c);
    let diff = 0.5 * (a - c);
    let radius = diff.hypot(b);
    let angle = 0.5 * b.atan2(diff);
    let (sin, cos) = angle.sin_cos();
    ([mean - radius, mean + radius], [[-sin, cos], [cos, sin]])
}

pub fn sym2_eigenvalues(m: [f64; 3]) -> [f64; 2] {
    let [a, b, c] = m;
    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    [mean - radius, mean + radius]
}

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scaled(a: Vec3, s: f64) -> Vec3 {
    a.map(|v| v * s)
}

fn mat_vec(m: &[f64; 6], v: Vec3) -> Vec3 {
    let [a00, a01, a02, a11, a12, a22] = *m;
    [
        a00 * v[0] + a01 * v[1] + a02 * v[2],
        a01 * v[0] + a11 * v[1] + a12 * v[2],
        a02 * v[0] + a12 * v[1] + a22 * v[2],
    ]
}

/// Scales the matrix into `[-1, 1]`; returns the factor removed, zero for the zero matrix.
fn prescale(m: [f64; 6]) -> ([f64; 6], f64) {
    let max_abs = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs == 0.0 {
        return (m, 0.0);
    }
    (m.map(|v| v / max_abs), max_abs)
}

/// Trigonometric eigenvalues of a prescaled matrix with a nonzero off-diagonal.
/// Also returns `det(B) / 2` of the shifted, normalized matrix, whose sign tells
/// which end of the spectrum is best separated.
fn trig_eigenvalues(m: &[f64; 6]) -> ([f64; 3], f64) {
    let [a00, a01, a02, a11, a12, a22] = *m;
    let off = a01 * a01 + a02 * a02 + a12 * a12;
    let q = (a00 + a11 + a22) / 3.0;
    let (b00, b11, b22) = (a00 - q, a11 - q, a22 - q);
    let p = ((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off) / 6.0).sqrt();
    let c00 = b11 * b22 - a12 * a12;
    let c01 = a01 * b22 - a12 * a02;
    let c02 = a01 * a12 - b11 * a02;
    let det = (b00 * c00 - a01 * c01 + a02 * c02) / (p * p * p);
    let half_det = (0.5 * det).clamp(-1.0, 1.0);
    let angle = half_det.acos() / 3.0;
    let beta2 = 2.0 * angle.cos();
    let beta0 = 2.0 * (angle + 2.0 * PI / 3.0).cos();
    let beta1 = -(beta0 + beta2);
    ([q + p * beta0, q + p * beta1, q + p * beta2], half_det)
}

fn sort_diagonal(m: &[f64; 6]) -> ([f64; 3], [Vec3; 3]) {
    let mut pairs = [
        (m[0], [1.0, 0.0, 0.0]),
        (m[3], [0.0, 1.0, 0.0]),
        (m[5], [0.0, 0.0, 1.0]),
    ];
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    (pairs.map(|p| p.0), pairs.map(|p| p.1))
}

/// Eigenvector of an eigenvalue of multiplicity one: the largest cross product
/// of two rows of `A - lambda I`.
fn isolated_eigenvector(m: &[f64; 6], lambda: f64) -> Vec3 {
    let [a00, a01, a02, a11, a12, a22] = *m;
    let r0 = [a00 - lambda, a01, a02];
    let r1 = [a01, a11 - lambda, a12];
    let r2 = [a02, a12, a22 - lambda];
    let candidates = [cross(r0, r1), cross(r0, r2), cross(r1, r2)];
    let (best, d) = candidates
        .iter()
        .map(|c| (*c, dot(*c, *c)))
        .fold(([1.0, 0.0, 0.0], 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if d > 0.0 {
        scaled(best, 1.0 / d.sqrt())
    } else {
        [1.0, 0.0, 0.0]
    }
}

fn orthogonal_complement(w: Vec3) -> (Vec3, Vec3) {
    let u = if w[0].abs() > w[1].abs() {
        let inv = 1.0 / (w[0] * w[0] + w[2] * w[2]).sqrt();
        [-w[2] * inv, 0.0, w[0] * inv]
    } else {
        let inv = 1.0 / (w[1] * w[1] + w[2] * w[2]).sqrt();
        [0.0, w[2] * inv, -w[1] * inv]
    };
    (u, cross(w, u))
}

/// Restriction of the matrix to the plane orthogonal to `axis`, solved in
/// closed form and lifted back to 3D.
fn complement_eigen(m: &[f64; 6], axis: Vec3) -> ([f64; 2], [Vec3; 2]) {
    let (u, v) = orthogonal_complement(axis);
    let (au, av) = (mat_vec(m, u), mat_vec(m, v));
    let (values, coords) = sym2_eigen([dot(u, au), dot(u, av), dot(v, av)]);
    let lift = |c: [f64; 2]| [0, 1, 2].map(|i| c[0] * u[i] + c[1] * v[i]);
    (values, coords.map(lift))
}

/// Eigenvalues and eigenvectors of a symmetric 3x3 matrix (trigonometric form).
pub fn sym3_eigen(m: [f64; 6]) -> ([f64; 3], [Vec3; 3]) {
    let (a, factor) = prescale(m);
    if factor == 0.0 {
        return ([0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }
    let off = a[1] * a[1] + a[2] * a[2] + a[4] * a[4];
    let (values, vectors) = if off > 0.0 {
        // Only the eigenvalue at the well-separated end is taken from the
        // trigonometric form; the close pair comes from the 2x2 complement.
        let (trig, half_det) = trig_eigenvalues(&a);
        let isolated = if half_det >= 0.0 { trig[2] } else { trig[0] };
        let w = isolated_eigenvector(&a, isolated);
        let (pair, pair_vectors) = complement_eigen(&a, w);
        let mut triples = [
            (dot(w, mat_vec(&a, w)), w),
            (pair[0], pair_vectors[0]),
            (pair[1], pair_vectors[1]),
        ];
        triples.sort_by(|x, y| x.0.total_cmp(&y.0));
        (triples.map(|t| t.0), triples.map(|t| t.1))
    } else {
        sort_diagonal(&a)
    };
    (values.map(|v| v * factor), vectors)
}

pub fn sym3_eigenvalues(m: [f64; 6]) -> [f64; 3] {
    sym3_eigen(m).0
}
