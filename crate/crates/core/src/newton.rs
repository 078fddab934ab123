//! Complex Newton iteration for analytic functions whose derivative is only
//! available through finite differences, and the rectangular search window
//! that bounds it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[re_min, re_max] × [im_min, im_max]` in ℂ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let w = Self {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        w.validate()?;
        Ok(w)
    }

    /// Square of half-width `radius` around `center`.
    pub fn around(center: Complex64, radius: f64) -> Self {
        Self {
            re_min: center.re - radius,
            re_max: center.re + radius,
            im_min: center.im - radius,
            im_max: center.im + radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min > self.im_max {
            return Err(Error::InvalidArgument(format!("empty or invalid window {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn diameter(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop as soon as `|f| <= residual_tol`.
    pub residual_tol: f64,
    /// Stop when the relative Newton step drops below this.
    pub step_tol: f64,
    /// Largest residual still reported as converged when stopping on the
    /// step criterion.
    pub accept_tol: f64,
    pub max_iter: usize,
    /// Finite-difference step relative to `1 + |z|`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-11,
            step_tol: 1e-13,
            accept_tol: 1e-9,
            max_iter: 60,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonRoot {
    pub root: Complex64,
    pub residual: f64,
    pub derivative: Complex64,
    pub iterations: usize,
}

/// Centered difference along the real axis; for an analytic `f` this is the
/// complex derivative.
pub fn centered_derivative<F>(f: &F, z: Complex64, step: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let h = Complex64::new(step, 0.0);
    Ok((f(z + h)? - f(z - h)?) / (2.0 * step))
}

/// Newton iteration for `f(z) = 0` from `seed`.
///
/// The iterate must stay inside `window` when one is given.
pub fn newton<F>(f: F, seed: Complex64, window: Option<&Window>, opts: &NewtonOptions) -> Result<NewtonRoot>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut z = seed;
    let mut value = f(z)?;
    for iter in 0..=opts.max_iter {
        let h = opts.fd_step * (1.0 + z.norm());
        let derivative = centered_derivative(&f, z, h)?;
        let converged = |residual: f64| NewtonRoot {
            root: z,
            residual,
            derivative,
            iterations: iter,
        };
        if value.norm() <= opts.residual_tol {
            return Ok(converged(value.norm()));
        }
        if iter == opts.max_iter || derivative.norm() == 0.0 || !derivative.is_finite() {
            break;
        }
        let step = value / derivative;
        let next = z - step;
        if let Some(w) = window {
            if !w.contains(next) {
                return Err(Error::OutOfWindow { iterate: next });
            }
        }
        let next_value = f(next)?;
        let small_step = step.norm() <= opts.step_tol * (1.0 + z.norm());
        // near multiple roots the residual floor is reached before the step
        // criterion; keep the better of the two iterates
        if small_step || (next_value.norm() >= value.norm() && value.norm() <= opts.accept_tol) {
            if next_value.norm() < value.norm() {
                z = next;
                value = next_value;
            }
            if value.norm() <= opts.accept_tol {
                let h = opts.fd_step * (1.0 + z.norm());
                return Ok(NewtonRoot {
                    root: z,
                    residual: value.norm(),
                    derivative: centered_derivative(&f, z, h)?,
                    iterations: iter + 1,
                });
            }
            break;
        }
        z = next;
        value = next_value;
    }
    Err(Error::NoConvergence {
        seed,
        last: z,
        residual: value.norm(),
    })
}
