//! Adaptive Dormand–Prince 8(5,3) integrator for complex first-order systems.
//!
//! Step-size control follows Hairer, Nørsett & Wanner (DOP853): the local
//! error is estimated by combining the embedded fifth- and third-order
//! formulas, and the eighth-order solution is propagated.

// Tableau coefficients are kept exactly as published.
#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances and budgets for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Accepted plus rejected steps allowed before `StepFailure`.
    pub max_steps: usize,
    /// Upper bound on |h|; `None` means the whole span.
    pub max_step: Option<f64>,
}

impl OdeOptions {
    /// Equal relative and absolute tolerance with the default step budget.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 1_000_000,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const STAGES: usize = 12;

const C: [f64; STAGES] = [
    0.0,
    0.526_001_519_587_677_318_785_587_544_488e-1,
    0.789_002_279_381_515_978_178_381_316_732e-1,
    0.118_350_341_907_227_396_726_757_197_510,
    0.281_649_658_092_772_603_273_242_802_490,
    0.333_333_333_333_333_333_333_333_333_333,
    0.25,
    0.307_692_307_692_307_692_307_692_307_692,
    0.651_282_051_282_051_282_051_282_051_282,
    0.6,
    0.857_142_857_142_857_142_857_142_857_142,
    1.0,
];

const A: [[f64; STAGES]; STAGES] = {
    let mut a = [[0.0; STAGES]; STAGES];
    a[1][0] = 5.260_015_195_876_773e-2;

    a[2][0] = 1.972_505_698_453_79e-2;
    a[2][1] = 5.917_517_095_361_37e-2;

    a[3][0] = 2.958_758_547_680_685e-2;
    a[3][2] = 8.876_275_643_042_054e-2;

    a[4][0] = 2.413_651_341_592_667e-1;
    a[4][2] = -8.845_494_793_282_861e-1;
    a[4][3] = 9.248_340_032_617_92e-1;

    a[5][0] = 3.703_703_703_703_703_5e-2;
    a[5][3] = 1.708_286_087_294_738_6e-1;
    a[5][4] = 1.254_676_875_668_224_2e-1;

    a[6][0] = 3.710_937_5e-2;
    a[6][3] = 1.702_522_110_195_440_5e-1;
    a[6][4] = 6.021_653_898_045_596e-2;
    a[6][5] = -1.757_812_5e-2;

    a[7][0] = 3.709_200_011_850_479e-2;
    a[7][3] = 1.703_839_257_122_399_8e-1;
    a[7][4] = 1.072_620_304_463_732_8e-1;
    a[7][5] = -1.531_943_774_862_440_2e-2;
    a[7][6] = 8.273_789_163_814_023e-3;

    a[8][0] = 6.241_109_587_160_757e-1;
    a[8][3] = -3.360_892_629_446_941_4;
    a[8][4] = -8.682_193_468_417_26e-1;
    a[8][5] = 2.759_209_969_944_671e1;
    a[8][6] = 2.015_406_755_047_789_4e1;
    a[8][7] = -4.348_988_418_106_996e1;

    a[9][0] = 4.776_625_364_382_643_4e-1;
    a[9][3] = -2.488_114_619_971_667_7;
    a[9][4] = -5.902_908_268_368_43e-1;
    a[9][5] = 2.123_005_144_818_119_3e1;
    a[9][6] = 1.527_923_363_288_242_3e1;
    a[9][7] = -3.328_821_096_898_486e1;
    a[9][8] = -2.033_120_170_850_862_7e-2;

    a[10][0] = -9.371_424_300_859_873e-1;
    a[10][3] = 5.186_372_428_844_064;
    a[10][4] = 1.091_437_348_996_729_5;
    a[10][5] = -8.149_787_010_746_927;
    a[10][6] = -1.852_006_565_999_696e1;
    a[10][7] = 2.273_948_709_935_050_5e1;
    a[10][8] = 2.493_605_552_679_652_3;
    a[10][9] = -3.046_764_471_898_219_6;

    a[11][0] = 2.273_310_147_516_538;
    a[11][3] = -1.053_449_546_673_725e1;
    a[11][4] = -2.000_872_058_224_862_5;
    a[11][5] = -1.795_893_186_311_88e1;
    a[11][6] = 2.794_888_452_941_996e1;
    a[11][7] = -2.858_998_277_135_023_5;
    a[11][8] = -8.872_856_933_530_63;
    a[11][9] = 1.236_056_717_579_430_3e1;
    a[11][10] = 6.433_927_460_157_636e-1;
    a
};

const B: [f64; STAGES] = [
    5.429_373_411_656_876_5e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199e-1,
    -1.521_609_496_625_161e-1,
    2.013_654_008_040_303_4e-1,
    4.471_061_572_777_259e-2,
];

/// Coefficients of the fifth-order error estimator.
const ER: [f64; STAGES] = [
    0.131_200_449_941_948_8e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.122_515_644_637_620_4e1,
    -0.495_758_949_657_250_2,
    0.166_437_718_245_498_6e1,
    -0.350_328_848_749_973_7,
    0.334_179_118_713_017_5,
    0.819_232_064_851_157_1e-1,
    -0.223_553_078_638_862_9e-1,
];

/// Third-order estimator weights on stages 1, 9 and 12.
const BHH: [f64; 3] = [
    0.244_094_488_188_976_377,
    0.733_846_688_281_611_857,
    0.220_588_235_294_117_647e-1,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 1.0 / 3.0;
const FAC_MAX: f64 = 6.0;

/// Integrates `y' = f(x, y)` from `x0` to `x1` in place.
///
/// `rhs` may fail (for instance on a divisor collision); its error aborts the
/// integration unchanged. `x1 < x0` integrates backwards.
pub fn integrate<F>(mut rhs: F, x0: f64, x1: f64, y: &mut [Complex64], opts: &OdeOptions) -> Result<OdeStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    let mut stats = OdeStats::default();
    if !(x0.is_finite() && x1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "integration endpoints must be finite ({x0}, {x1})"
        )));
    }
    if x1 == x0 || y.is_empty() {
        return Ok(stats);
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerances must be positive (rtol {}, atol {})",
            opts.rtol, opts.atol
        )));
    }
    let dim = y.len();
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    let max_step = opts.max_step.unwrap_or(span).min(span);

    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); dim]; STAGES];
    let mut stage = vec![Complex64::default(); dim];
    let mut y_new = vec![Complex64::default(); dim];
    let mut f_new = vec![Complex64::default(); dim];

    let mut x = x0;
    rhs(x, y, &mut k[0])?;
    stats.evaluations += 1;

    let mut h = initial_step(&mut rhs, x, y, &k[0], dir, max_step, opts, &mut stats)?;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepFailure {
                x,
                reason: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        let remaining = (x1 - x).abs();
        let last = h * (1.0 + 1e-9) >= remaining;
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * x.abs().max(1.0) {
            return Err(Error::StepFailure {
                x,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let hs = dir * h;

        for s in 1..STAGES {
            for i in 0..dim {
                let mut acc = Complex64::default();
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[i] * a;
                    }
                }
                stage[i] = y[i] + acc * hs;
            }
            rhs(x + C[s] * hs, &stage, &mut k[s])?;
        }
        stats.evaluations += STAGES - 1;

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for i in 0..dim {
            let mut incr = Complex64::default();
            let mut e5 = Complex64::default();
            for s in 0..STAGES {
                if B[s] != 0.0 {
                    incr += k[s][i] * B[s];
                }
                if ER[s] != 0.0 {
                    e5 += k[s][i] * ER[s];
                }
            }
            y_new[i] = y[i] + incr * hs;
            let e3 = incr - k[0][i] * BHH[0] - k[8][i] * BHH[1] - k[11][i] * BHH[2];
            let sk = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err5 += (e5.norm() / sk).powi(2);
            err3 += (e3.norm() / sk).powi(2);
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h * err5 * (1.0 / (dim as f64 * deno)).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac = (err.powf(1.0 / 8.0) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        if err <= 1.0 {
            stats.accepted += 1;
            x = if last { x1 } else { x + hs };
            rhs(x, &y_new, &mut f_new)?;
            stats.evaluations += 1;
            y.copy_from_slice(&y_new);
            k[0].copy_from_slice(&f_new);
            if last {
                return Ok(stats);
            }
            let mut h_new = (h / fac).min(max_step);
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (err.powf(1.0 / 8.0) / SAFETY).min(1.0 / FAC_MIN);
        }
    }
}

/// Starting step from the Hairer–Wanner heuristic.
#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    rhs: &mut F,
    x: f64,
    y: &[Complex64],
    f0: &[Complex64],
    dir: f64,
    max_step: f64,
    opts: &OdeOptions,
    stats: &mut OdeStats,
) -> Result<f64>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    let dim = y.len() as f64;
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|t| t * t).sum::<f64>() / dim).sqrt();
    let d0 = rms(&mut y.iter().zip(&scale).map(|(v, s)| v.norm() / s));
    let d1 = rms(&mut f0.iter().zip(&scale).map(|(v, s)| v.norm() / s));
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(max_step);
    let probe: Vec<Complex64> = y.iter().zip(f0).map(|(v, f)| v + f * (dir * h0)).collect();
    let mut f1 = vec![Complex64::default(); y.len()];
    rhs(x + dir * h0, &probe, &mut f1)?;
    stats.evaluations += 1;
    let d2 = rms(&mut f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (a - b).norm() / s)) / h0;
    let d = d1.max(d2);
    let h1 = if d <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d).powf(1.0 / 8.0)
    };
    Ok((100.0 * h0).min(h1).min(max_step))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn tableau_row_sums_match_nodes() {
        for s in 0..STAGES {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-14, "stage {s}: {row} vs {}", C[s]);
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(ER.iter().sum::<f64>().abs() < 1e-14);
        assert!((BHH.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_growth_complex_rate() {
        let lambda = Complex64::new(-0.3, 2.0);
        let mut y = [c(1.0)];
        integrate(
            |_, y, dy| {
                dy[0] = lambda * y[0];
                Ok(())
            },
            0.0,
            5.0,
            &mut y,
            &OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((y[0] - (lambda * 5.0).exp()).norm() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_backwards_and_forwards() {
        let rhs = |_: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let mut y = [c(1.0), c(0.0)];
        let opts = OdeOptions::with_tol(1e-12);
        integrate(rhs, 0.0, 10.0, &mut y, &opts).unwrap();
        assert!((y[0].re - 10f64.cos()).abs() < 1e-10);
        assert!((y[1].re + 10f64.sin()).abs() < 1e-10);
        integrate(rhs, 10.0, 0.0, &mut y, &opts).unwrap();
        assert!((y[0] - c(1.0)).norm() < 1e-10);
        assert!(y[1].norm() < 1e-10);
    }

    #[test]
    fn zero_span_is_identity() {
        let mut y = [c(3.0)];
        let stats = integrate(
            |_, _, _| panic!("rhs must not be called"),
            1.0,
            1.0,
            &mut y,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(stats, OdeStats::default());
        assert_eq!(y[0], c(3.0));
    }

    #[test]
    fn budget_exhaustion_is_step_failure() {
        let mut y = [c(1.0), c(0.0)];
        let opts = OdeOptions {
            max_steps: 3,
            ..OdeOptions::with_tol(1e-12)
        };
        let err = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0] * 400.0;
                Ok(())
            },
            0.0,
            50.0,
            &mut y,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }

    #[test]
    fn rhs_error_propagates() {
        let mut y = [c(1.0)];
        let err = integrate(
            |x, _, dy| {
                if x > 0.5 {
                    return Err(Error::DivisorCollision { j: 0, k: 1, x });
                }
                dy[0] = c(1.0);
                Ok(())
            },
            0.0,
            1.0,
            &mut y,
            &OdeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DivisorCollision { .. }));
    }

    #[test]
    fn eighth_order_convergence_with_fixed_budget() {
        // y' = y cos x, y = exp(sin x); tighten tolerance and check the error
        // drops by at least the expected factor.
        let run = |tol: f64| {
            let mut y = [c(1.0)];
            let stats = integrate(
                |x, y, dy| {
                    dy[0] = y[0] * x.cos();
                    Ok(())
                },
                0.0,
                6.0,
                &mut y,
                &OdeOptions::with_tol(tol),
            )
            .unwrap();
            ((y[0].re - 6f64.sin().exp()).abs(), stats.accepted)
        };
        let (e1, n1) = run(1e-7);
        let (e2, n2) = run(1e-13);
        assert!(e2 < 1e-11, "error {e2}");
        assert!(e1 > e2);
        assert!(n2 > n1);
    }
}
