//! Eigenvalues of dense complex non-Hermitian matrices.
//!
//! Householder reduction to upper Hessenberg form followed by single-shift
//! QR sweeps (Wilkinson shift, Givens rotations) with deflation on small
//! subdiagonal entries. Only eigenvalues are accumulated, so each sweep
//! touches the active diagonal block alone.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Sweeps allowed per eigenvalue before giving up.
const SWEEPS_PER_EIGENVALUE: usize = 30;

/// All eigenvalues of the square matrix `a`, in the order they deflate.
pub fn eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut h = a.clone();
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(&mut h)?;
    Ok((0..n).map(|i| h[(i, i)]).collect())
}

fn reduce_to_hessenberg(h: &mut DMatrix<Complex64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![Complex64::default(); n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        for i in k + 1..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v.iter_mut().take(n).skip(k + 1) {
            *vi /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in k..n {
            let dot: Complex64 = (k + 1..n).map(|i| v[i].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] -= v[i] * dot * 2.0;
            }
        }
        // H <- H (I - 2 v v^H)
        for i in 0..n {
            let dot: Complex64 = (k + 1..n).map(|j| h[(i, j)] * v[j]).sum();
            for j in k + 1..n {
                h[(i, j)] -= dot * v[j].conj() * 2.0;
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = Complex64::default();
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` zeroing the second entry of `(a, b)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let r = a.norm().hypot(b.norm());
    if r == 0.0 {
        return (1.0, Complex64::default());
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let root = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let (mu1, mu2) = (mean + root, mean - root);
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

fn hessenberg_qr(h: &mut DMatrix<Complex64>) -> Result<()> {
    let n = h.nrows();
    let budget = SWEEPS_PER_EIGENVALUE * n.max(1);
    let mut total = 0usize;
    let mut iter_since_deflation = 0usize;
    let mut rotations: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    let mut hi = n - 1;
    while hi > 0 {
        let block_norm = {
            let mut s = 0.0f64;
            for i in 0..=hi {
                for j in i.saturating_sub(1)..=hi {
                    s += h[(i, j)].norm_sqr();
                }
            }
            s.sqrt()
        };
        let mut lo = hi;
        while lo > 0 {
            let mut scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if scale == 0.0 {
                scale = block_norm;
            }
            if h[(lo, lo - 1)].norm() <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = Complex64::default();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        total += 1;
        iter_since_deflation += 1;
        if total > budget {
            return Err(Error::QrNoConvergence { iterations: total });
        }

        let mu = if iter_since_deflation.is_multiple_of(10) {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].re.abs(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        rotations.clear();
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let (x, y) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + offset;
            for i in lo..=(k + 1).min(hi) {
                let (x, y) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}
