//! Direct least-squares ellipse fitting of points in the complex plane.
//!
//! The algebraic fit follows Halíř and Flusser's numerically stable variant
//! of Fitzgibbon's constrained least squares. Data are centred and scaled
//! before fitting; nearly collinear data are rejected beforehand by a
//! principal-component check and reported as a segment.

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Ratio of principal standard deviations below which data count as a
/// segment.
pub const SEGMENT_RATIO: f64 = 1e-3;

const MIN_SAMPLES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipseFit {
    pub center: Complex64,
    /// `(major, minor)` semi-axis lengths.
    pub semi_axes: (f64, f64),
    /// Angle of the major axis with the real axis, in `(-π/2, π/2]`.
    pub rotation: f64,
    pub foci: [Complex64; 2],
    /// Root-mean-square first-order geometric (Sampson) distance of the
    /// samples to the conic, divided by the major semi-axis.
    pub rms_residual: f64,
}

impl EllipseFit {
    pub fn focal_distance(&self) -> f64 {
        let (a, b) = self.semi_axes;
        (a * a - b * b).max(0.0).sqrt()
    }

    pub fn point_at(&self, t: f64) -> Complex64 {
        let u = Complex64::from_polar(1.0, self.rotation);
        let (a, b) = self.semi_axes;
        self.center + u * Complex64::new(a * t.cos(), b * t.sin())
    }
}

/// Principal axis data: mean, unit direction of largest spread and the
/// ratio of minor to major standard deviation.
fn principal_components(points: &[Complex64]) -> (Complex64, Complex64, f64) {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Complex64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - mean;
        sxx += d.re * d.re;
        sxy += d.re * d.im;
        syy += d.im * d.im;
    }
    let eig = SymmetricEigen::new(Matrix2::new(sxx / n, sxy / n, sxy / n, syy / n));
    let (major, minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let v = eig.eigenvectors.column(major);
    let big = eig.eigenvalues[major].max(0.0);
    let small = eig.eigenvalues[minor].max(0.0);
    let ratio = if big == 0.0 { 0.0 } else { (small / big).sqrt() };
    (mean, Complex64::new(v[0], v[1]), ratio)
}

/// Fits an ellipse to `points`.
///
/// Data whose principal-component ratio is below [`SEGMENT_RATIO`] yield
/// [`Error::DegenerateFit`] carrying the extreme points of the segment.
pub fn fit_ellipse_points(points: &[Complex64]) -> Result<EllipseFit> {
    if points.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: points.len(),
        });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::FitFailure("non-finite sample".into()));
    }
    let (mean, axis, ratio) = principal_components(points);
    if ratio < SEGMENT_RATIO {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let t = ((p - mean) * axis.conj()).re;
            (lo.min(t), hi.max(t))
        });
        let mut endpoints = [mean + axis * lo, mean + axis * hi];
        endpoints.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        return Err(Error::DegenerateFit { endpoints });
    }

    let scale = (points.iter().map(|p| (p - mean).norm_sqr()).sum::<f64>() / points.len() as f64).sqrt();
    let local: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let d = (p - mean) / scale;
            (d.re, d.im)
        })
        .collect();
    let conic = halir_flusser(&local)?;
    let geometry = Geometry::from_conic(&conic)?;

    let rms = (local
        .iter()
        .map(|&(x, y)| sampson_distance(&conic, x, y).powi(2))
        .sum::<f64>()
        / local.len() as f64)
        .sqrt()
        / geometry.major;

    let to_global = |z: Complex64| mean + z * scale;
    let u = Complex64::from_polar(1.0, geometry.rotation);
    let c = (geometry.major.powi(2) - geometry.minor.powi(2)).max(0.0).sqrt();
    let center = to_global(geometry.center);
    let mut foci = [to_global(geometry.center + u * c), to_global(geometry.center - u * c)];
    foci.sort_by(|a, b| b.im.total_cmp(&a.im).then(b.re.total_cmp(&a.re)));
    Ok(EllipseFit {
        center,
        semi_axes: (geometry.major * scale, geometry.minor * scale),
        rotation: geometry.rotation,
        foci,
        rms_residual: rms,
    })
}

/// Conic coefficients `[A, B, C, D, E, F]` of
/// `A x² + B xy + C y² + D x + E y + F = 0`.
type Conic = [f64; 6];

fn halir_flusser(points: &[(f64, f64)]) -> Result<Conic> {
    let n = points.len();
    let d1 = DMatrix::from_fn(n, 3, |i, j| {
        let (x, y) = points[i];
        [x * x, x * y, y * y][j]
    });
    let d2 = DMatrix::from_fn(n, 3, |i, j| {
        let (x, y) = points[i];
        [x, y, 1.0][j]
    });
    let s1: Matrix3<f64> = (d1.transpose() * &d1).fixed_view::<3, 3>(0, 0).into_owned();
    let s2: Matrix3<f64> = (d1.transpose() * &d2).fixed_view::<3, 3>(0, 0).into_owned();
    let s3: Matrix3<f64> = (d2.transpose() * &d2).fixed_view::<3, 3>(0, 0).into_owned();
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::FitFailure("linear scatter matrix is singular".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]]
    let reduced = Matrix3::from_rows(&[m.row(2) / 2.0, -m.row(1), m.row(0) / 2.0]);

    let as_complex = DMatrix::from_fn(3, 3, |i, j| Complex64::from(reduced[(i, j)]));
    let values = linalg::eigenvalues(&as_complex)?;
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for value in values {
        if value.im.abs() > 1e-9 * (1.0 + value.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * value.re)) else {
            continue;
        };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint > 0.0 {
            // among admissible vectors keep the smallest algebraic residual
            let cost = (v.transpose() * m * v)[(0, 0)].abs() / constraint;
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, v));
            }
        }
    }
    let (_, a1) = best.ok_or_else(|| Error::FitFailure("no elliptic solution".into()))?;
    let a2 = t * a1;
    Ok([a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]])
}

/// Unit vector spanning the kernel of a rank-two 3×3 matrix.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates.iter().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let norm = best.norm();
    (norm > 0.0 && norm.is_finite()).then(|| best / norm)
}

fn sampson_distance(c: &Conic, x: f64, y: f64) -> f64 {
    let [a, b, cc, d, e, f] = *c;
    let value = a * x * x + b * x * y + cc * y * y + d * x + e * y + f;
    let gx = 2.0 * a * x + b * y + d;
    let gy = b * x + 2.0 * cc * y + e;
    let g = gx.hypot(gy);
    if g == 0.0 {
        value.abs()
    } else {
        value.abs() / g
    }
}

struct Geometry {
    center: Complex64,
    major: f64,
    minor: f64,
    rotation: f64,
}

impl Geometry {
    fn from_conic(c: &Conic) -> Result<Self> {
        let [a, b, cc, d, e, f] = *c;
        let det = 4.0 * a * cc - b * b;
        if det <= 0.0 {
            return Err(Error::FitFailure("conic is not an ellipse".into()));
        }
        let x0 = (b * e - 2.0 * cc * d) / det;
        let y0 = (b * d - 2.0 * a * e) / det;
        let f0 = a * x0 * x0 + b * x0 * y0 + cc * y0 * y0 + d * x0 + e * y0 + f;
        let eig = SymmetricEigen::new(Matrix2::new(a, b / 2.0, b / 2.0, cc));
        let (mu0, mu1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        let s0 = -f0 / mu0;
        let s1 = -f0 / mu1;
        if s0 <= 0.0 || s1 <= 0.0 {
            return Err(Error::FitFailure("imaginary ellipse".into()));
        }
        let (major_idx, major, minor) = if s0 >= s1 {
            (0, s0.sqrt(), s1.sqrt())
        } else {
            (1, s1.sqrt(), s0.sqrt())
        };
        let v = eig.eigenvectors.column(major_idx);
        let mut rotation = v[1].atan2(v[0]);
        if rotation <= -std::f64::consts::FRAC_PI_2 {
            rotation += std::f64::consts::PI;
        } else if rotation > std::f64::consts::FRAC_PI_2 {
            rotation -= std::f64::consts::PI;
        }
        Ok(Self {
            center: Complex64::new(x0, y0),
            major,
            minor,
            rotation,
        })
    }
}
