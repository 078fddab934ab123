//! Monodromy matrix, Hill discriminant and Bloch multipliers.
//!
//! For `-ψ'' + u(x)ψ = Eψ` the first-order system `(ψ, ψ')' = (ψ', (u - E)ψ)`
//! is integrated over one period for the two Cauchy data `(1, 0)` and
//! `(0, 1)`. The resulting matrix maps Cauchy data at `x0` to Cauchy data at
//! `x0 + T`; its trace `Δ(E)` is an entire function of `E`, and the Bloch
//! multipliers are the roots of `λ² - Δλ + 1 = 0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::ode::{integrate, OdeOptions};
use crate::potential::Potential;

/// Integrator tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Accepted plus rejected steps allowed per period.
pub const STEP_BUDGET: usize = 1_000_000;

/// Ratio between the per-step tolerance handed to the integrator and the
/// requested accuracy of the transported solution. Global error of the
/// propagated solution is of the order of the per-step tolerance times the
/// growth of the solution over the period.
const LOCAL_TOL_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonodromyResult {
    /// `matrix[row][col]`; column 0 starts from `(1, 0)`, column 1 from
    /// `(0, 1)`; row 0 is the value, row 1 the derivative.
    pub matrix: [[Complex64; 2]; 2],
    pub energy: Complex64,
    pub base_point: f64,
    pub discriminant: Complex64,
    pub multipliers: (Complex64, Complex64),
}

impl MonodromyResult {
    pub fn determinant(&self) -> Complex64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

fn shooting_options(tol: f64) -> OdeOptions {
    let local = if tol > 0.0 {
        (tol * LOCAL_TOL_RATIO).max(1e-15)
    } else {
        tol
    };
    OdeOptions {
        max_steps: STEP_BUDGET,
        ..OdeOptions::with_tol(local)
    }
}

/// Monodromy over one period starting at `x0`.
pub fn monodromy<P: Potential + ?Sized>(
    potential: &P,
    energy: Complex64,
    x0: f64,
    tol: f64,
) -> Result<MonodromyResult> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let mut y = [one, zero, zero, one];
    integrate(
        |x, y, dy| {
            let q = potential.value(x) - energy;
            dy[0] = y[1];
            dy[1] = q * y[0];
            dy[2] = y[3];
            dy[3] = q * y[2];
            Ok(())
        },
        x0,
        x0 + potential.period(),
        &mut y,
        &shooting_options(tol),
    )?;
    let matrix = [[y[0], y[2]], [y[1], y[3]]];
    let discriminant = matrix[0][0] + matrix[1][1];
    Ok(MonodromyResult {
        matrix,
        energy,
        base_point: x0,
        discriminant,
        multipliers: bloch_multipliers(discriminant),
    })
}

/// Transports Cauchy data `(ψ, ψ')` from `x0` to `x1`.
pub fn transport<P: Potential + ?Sized>(
    potential: &P,
    energy: Complex64,
    x0: f64,
    x1: f64,
    initial: [Complex64; 2],
    tol: f64,
) -> Result<[Complex64; 2]> {
    let mut y = initial;
    integrate(
        |x, y, dy| {
            dy[0] = y[1];
            dy[1] = (potential.value(x) - energy) * y[0];
            Ok(())
        },
        x0,
        x1,
        &mut y,
        &shooting_options(tol),
    )?;
    Ok(y)
}

/// `Δ(E)`, the monodromy trace at base point 0, with the default tolerance.
pub fn discriminant<P: Potential + ?Sized>(potential: &P, energy: Complex64) -> Result<Complex64> {
    discriminant_with_tol(potential, energy, DEFAULT_TOL)
}

pub fn discriminant_with_tol<P: Potential + ?Sized>(potential: &P, energy: Complex64, tol: f64) -> Result<Complex64> {
    monodromy(potential, energy, 0.0, tol).map(|m| m.discriminant)
}

/// Roots of `λ² - Δλ + 1 = 0`, larger modulus first.
///
/// The larger root takes the sign of the square root that avoids
/// cancellation; the smaller one is its reciprocal.
pub fn bloch_multipliers(discriminant: Complex64) -> (Complex64, Complex64) {
    let root = (discriminant * discriminant - 4.0).sqrt();
    let sum = if (discriminant.conj() * root).re >= 0.0 {
        discriminant + root
    } else {
        discriminant - root
    };
    let big = sum / 2.0;
    if big == Complex64::default() {
        // only reachable for non-finite input
        return (big, big);
    }
    (big, big.inv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use std::f64::consts::TAU;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn free_quarter_is_minus_identity() {
        let m = monodromy(&PotentialSpec::zero(), re(0.25), 0.0, DEFAULT_TOL).unwrap();
        assert!((m.discriminant + 2.0).norm() < 1e-10);
        assert!((m.matrix[0][0] + 1.0).norm() < 1e-10);
        assert!((m.matrix[1][1] + 1.0).norm() < 1e-10);
        assert!(m.matrix[0][1].norm() < 1e-10);
        assert!(m.matrix[1][0].norm() < 1e-10);
    }

    #[test]
    fn free_unit_energy_is_identity() {
        let m = monodromy(&PotentialSpec::zero(), re(1.0), 0.0, DEFAULT_TOL).unwrap();
        assert!((m.discriminant - 2.0).norm() < 1e-10);
        assert!((m.matrix[0][0] - 1.0).norm() < 1e-10);
        assert!(m.matrix[0][1].norm() < 1e-10);
    }

    #[test]
    fn free_negative_energy_matches_cosh() {
        let d = discriminant(&PotentialSpec::zero(), re(-1.0)).unwrap();
        let expected = 2.0 * TAU.cosh();
        assert!((d.re - expected).abs() < 1e-9, "{d} vs {expected}");
        assert!((expected - 535.493_522_967_496_4).abs() < 1e-9);
    }

    #[test]
    fn free_zero_energy() {
        // constant and linear solutions: M = [[1, 2π], [0, 1]]
        let m = monodromy(&PotentialSpec::zero(), re(0.0), 0.0, DEFAULT_TOL).unwrap();
        assert!((m.discriminant - 2.0).norm() < 1e-12);
        assert!((m.matrix[0][1] - TAU).norm() < 1e-10);
    }

    #[test]
    fn multipliers_examples() {
        let (a, b) = bloch_multipliers(re(2.0));
        assert!((a - 1.0).norm() < 1e-15 && (b - 1.0).norm() < 1e-15);
        let (a, b) = bloch_multipliers(re(0.0));
        assert!((a - Complex64::i()).norm() < 1e-15);
        assert!((b + Complex64::i()).norm() < 1e-15);
        let (a, b) = bloch_multipliers(re(2.5));
        assert!((a - 2.0).norm() < 1e-15 && (b - 0.5).norm() < 1e-15);
    }

    #[test]
    fn multipliers_stable_for_large_trace() {
        let d = Complex64::new(-3.0e8, 1.0e7);
        let (a, b) = bloch_multipliers(d);
        assert!((a * b - 1.0).norm() < 1e-12);
        assert!(((a + b) - d).norm() / d.norm() < 1e-12);
    }

    #[test]
    fn cosine_potential_near_first_resonance() {
        let u = PotentialSpec::new([(1, 0.05), (-1, 0.05)]).unwrap();
        let d = discriminant(&u, re(0.25)).unwrap();
        // gap opens: Δ(1/4) is pushed below -2 by O(ε²)
        assert!(d.im.abs() < 1e-12);
        assert!(d.re < -2.0 && (d.re + 2.0).abs() < 0.2, "{d}");
    }
}
