//! Divisor trajectories as Dirichlet eigenvalues.
//!
//! The projection `γ(x)` of the divisor point near a resonance is an
//! eigenvalue of `L` on `[x, x + T]` with Dirichlet conditions, i.e. a root
//! of `E ↦ φ_E(x + T)` where `φ_E(x) = 0`, `φ_E'(x) = 1`. It is followed in
//! `x` by continuation and compared with the first-order ellipse.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::conic::{fit_ellipse_points, EllipseFit};
use crate::error::{Error, Result};
use crate::monodromy::{self, transport};
use crate::newton::{newton, NewtonOptions, Window};
use crate::perturbation::{ellipse_prediction, resonant_energy, EllipsePrediction};
use crate::potential::{Potential, PotentialSpec};
use crate::spectrum::{find_branch_points, resonance_window, seeds_for_resonance, SpectralOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct DivisorOptions {
    pub integrator_tol: f64,
    pub newton: NewtonOptions,
    /// Grid steps over `[0, 2π]`.
    pub steps: usize,
    /// How many times a failed continuation step may be halved.
    pub max_bisections: u32,
    /// Coefficient scalings for the second-order check.
    pub scales: Vec<f64>,
}

impl Default for DivisorOptions {
    fn default() -> Self {
        Self {
            integrator_tol: monodromy::DEFAULT_TOL,
            newton: NewtonOptions::default(),
            steps: 512,
            max_bisections: 6,
            scales: vec![1.0, 0.5, 0.25],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirichletRoot {
    pub energy: Complex64,
    /// `|φ_E(x + T)|` at the root.
    pub residual: f64,
    pub iterations: usize,
}

/// Dirichlet eigenvalue on `[x, x + T]` by Newton from `seed`.
///
/// Leaving `window` is reported as [`Error::OutOfWindow`], which usually
/// means the iteration is heading for another eigenvalue.
pub fn dirichlet_eigenvalue<P: Potential + ?Sized>(
    potential: &P,
    x: f64,
    seed: Complex64,
    window: &Window,
    integrator_tol: f64,
    opts: &NewtonOptions,
) -> Result<DirichletRoot> {
    window.validate()?;
    if !window.contains(seed) {
        return Err(Error::OutOfWindow { iterate: seed });
    }
    let period = potential.period();
    let one = Complex64::new(1.0, 0.0);
    let g = |e: Complex64| -> Result<Complex64> {
        Ok(transport(potential, e, x, x + period, [Complex64::default(), one], integrator_tol)?[0])
    };
    let root = newton(g, seed, Some(window), opts)?;
    Ok(DirichletRoot {
        energy: root.root,
        residual: root.residual,
        iterations: root.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivisorSample {
    pub x: f64,
    pub gamma: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisorTrajectory {
    pub n: u32,
    pub samples: Vec<DivisorSample>,
}

impl DivisorTrajectory {
    pub fn points(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.gamma).collect()
    }

    /// CSV with columns `x,re_gamma,im_gamma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,re_gamma,im_gamma\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.15e},{:.15e},{:.15e}", s.x, s.gamma.re, s.gamma.im);
        }
        out
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.samples.iter().map(|s| s.gamma.im.abs()).fold(0.0, f64::max)
    }

    /// Linear interpolation of `γ` at `x` inside the sampled range.
    pub fn gamma_at(&self, x: f64) -> Option<Complex64> {
        let i = self.samples.partition_point(|s| s.x < x);
        if i < self.samples.len() && self.samples[i].x == x {
            return Some(self.samples[i].gamma);
        }
        if i == 0 || i >= self.samples.len() {
            return None;
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let t = (x - a.x) / (b.x - a.x);
        Some(a.gamma + (b.gamma - a.gamma) * t)
    }
}

/// `steps + 1` equispaced points covering `[0, 2π]`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| TAU * k as f64 / steps as f64).collect()
}

/// Follows the Dirichlet eigenvalue near `n²/4` along `x_grid`.
///
/// The first sample is seeded by the first-order ellipse (or by `n²/4` for
/// an unperturbed resonance), later ones by their predecessor.
pub fn trace_divisor(spec: &PotentialSpec, n: u32, x_grid: &[f64], opts: &DivisorOptions) -> Result<DivisorTrajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument("resonance index must be at least 1".into()));
    }
    if x_grid.is_empty() {
        return Err(Error::InvalidArgument("empty x grid".into()));
    }
    if x_grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidArgument("x grid must be strictly increasing".into()));
    }
    let window = resonance_window(n);
    let seed = match ellipse_prediction(spec, n) {
        Ok(p) => p.gamma(x_grid[0]),
        Err(Error::DegenerateDivisor { .. }) => Complex64::from(resonant_energy(n)),
        Err(e) => return Err(e),
    };
    let solve =
        |x: f64, seed: Complex64| dirichlet_eigenvalue(spec, x, seed, &window, opts.integrator_tol, &opts.newton);
    let first = solve(x_grid[0], seed).map_err(|e| Error::ContinuationBreak {
        last_good_x: None,
        reason: e.to_string(),
    })?;
    let mut samples = vec![DivisorSample {
        x: x_grid[0],
        gamma: first.energy,
        residual: first.residual,
        iterations: first.iterations,
    }];
    for &x in &x_grid[1..] {
        let prev = *samples.last().expect("non-empty");
        let root =
            advance(&solve, prev.x, prev.gamma, x, opts.max_bisections).map_err(|e| Error::ContinuationBreak {
                last_good_x: Some(prev.x),
                reason: e.to_string(),
            })?;
        samples.push(DivisorSample {
            x,
            gamma: root.energy,
            residual: root.residual,
            iterations: root.iterations,
        });
    }
    Ok(DivisorTrajectory { n, samples })
}

/// One continuation step, halving it on failure.
fn advance<F>(solve: &F, x0: f64, gamma0: Complex64, x1: f64, depth: u32) -> Result<DirichletRoot>
where
    F: Fn(f64, Complex64) -> Result<DirichletRoot>,
{
    match solve(x1, gamma0) {
        Ok(root) => Ok(root),
        Err(e) if depth == 0 => Err(e),
        Err(_) => {
            let mid = 0.5 * (x0 + x1);
            let half = advance(solve, x0, gamma0, mid, depth - 1)?;
            advance(solve, mid, half.energy, x1, depth - 1)
        }
    }
}

/// Shape of the traced divisor.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivisorShape {
    Ellipse(EllipseFit),
    Segment { endpoints: [Complex64; 2] },
    Constant { value: Complex64 },
}

/// Ellipse fit of a traced divisor; segment-like data are reported through
/// [`Error::DegenerateFit`].
pub fn fit_ellipse(traj: &DivisorTrajectory) -> Result<EllipseFit> {
    let points = distinct_points(traj);
    fit_ellipse_points(&points)
}

/// Samples of one period without the repeated closing point.
fn distinct_points(traj: &DivisorTrajectory) -> Vec<Complex64> {
    let mut points = traj.points();
    if points.len() > 1 {
        let (first, last) = (points[0], points[points.len() - 1]);
        if (first - last).norm() <= 1e-9 * (1.0 + first.norm()) {
            points.pop();
        }
    }
    points
}

fn classify_shape(traj: &DivisorTrajectory) -> Result<DivisorShape> {
    let points = traj.points();
    let center = points.iter().sum::<Complex64>() / points.len() as f64;
    let spread = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    if spread <= 1e-9 * (1.0 + center.norm()) {
        return Ok(DivisorShape::Constant { value: center });
    }
    match fit_ellipse(traj) {
        Ok(fit) => Ok(DivisorShape::Ellipse(fit)),
        Err(Error::DegenerateFit { endpoints }) => Ok(DivisorShape::Segment { endpoints }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub scale: f64,
    /// `max_x |γ(x) - γ_pred(x)|` for the scaled potential.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipseReport {
    pub n: u32,
    /// No coefficients at `±n`: nothing to compare with.
    pub unperturbed: bool,
    pub prediction: Option<EllipsePrediction>,
    pub shape: DivisorShape,
    pub numeric_branch_points: Option<[Complex64; 2]>,
    /// Largest distance from a fitted focus (or segment end) to the nearest
    /// numeric branch point.
    pub focal_mismatch: Option<f64>,
    pub gamma0_imag: f64,
    pub max_prediction_deviation: Option<f64>,
    /// `|γ(0) - γ(2π/n)|`.
    pub closure_defect: f64,
    pub scaling: Vec<ScalingRow>,
    /// Least-squares slope of `log max_deviation` against `log scale`.
    pub scaling_slope: Option<f64>,
    #[serde(skip)]
    pub trajectory: DivisorTrajectory,
}

fn max_deviation(traj: &DivisorTrajectory, prediction: &EllipsePrediction) -> f64 {
    traj.samples
        .iter()
        .map(|s| (s.gamma - prediction.gamma(s.x)).norm())
        .fold(0.0, f64::max)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Traces the divisor, fits it, and compares the foci with the numeric
/// branch points; repeats the trace for every scaling in `opts.scales`.
pub fn verify_divisor_ellipse(spec: &PotentialSpec, n: u32, opts: &DivisorOptions) -> Result<EllipseReport> {
    let grid = uniform_grid(opts.steps);
    let trajectory = trace_divisor(spec, n, &grid, opts)?;
    let gamma0_imag = trajectory.samples[0].gamma.im.abs();
    let period = TAU / f64::from(n);
    let closure_defect = trajectory
        .gamma_at(period)
        .map(|g| (g - trajectory.samples[0].gamma).norm())
        .unwrap_or(f64::NAN);

    let prediction = match ellipse_prediction(spec, n) {
        Ok(p) => Some(p),
        Err(Error::DegenerateDivisor { .. }) => None,
        Err(e) => return Err(e),
    };
    let shape = classify_shape(&trajectory)?;
    let Some(prediction) = prediction else {
        return Ok(EllipseReport {
            n,
            unperturbed: true,
            prediction: None,
            shape,
            numeric_branch_points: None,
            focal_mismatch: None,
            gamma0_imag,
            max_prediction_deviation: None,
            closure_defect,
            scaling: Vec::new(),
            scaling_slope: None,
            trajectory,
        });
    };

    let spectral = SpectralOptions {
        integrator_tol: opts.integrator_tol,
        ..SpectralOptions::default()
    };
    let window = resonance_window(n);
    let seeds: Vec<Complex64> = seeds_for_resonance(spec, n)
        .into_iter()
        .filter(|s| window.contains(*s))
        .collect();
    let set = find_branch_points(spec, &window, &seeds, &spectral)?;
    let numeric = set.nearest_pair(prediction.center);
    let marks = match &shape {
        DivisorShape::Ellipse(fit) => Some(fit.foci),
        DivisorShape::Segment { endpoints } => Some(*endpoints),
        DivisorShape::Constant { .. } => None,
    };
    let focal_mismatch = match (marks, numeric) {
        (Some(marks), Some(pair)) => Some(
            marks
                .iter()
                .map(|m| pair.iter().map(|b| (m - b).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max),
        ),
        _ => None,
    };

    let mut scaling = Vec::with_capacity(opts.scales.len());
    for &scale in &opts.scales {
        let deviation = if scale == 1.0 {
            max_deviation(&trajectory, &prediction)
        } else {
            let scaled = spec.scaled(scale);
            let traj = trace_divisor(&scaled, n, &grid, opts)?;
            max_deviation(&traj, &ellipse_prediction(&scaled, n)?)
        };
        scaling.push(ScalingRow {
            scale,
            max_deviation: deviation,
        });
    }
    let scaling_slope = log_log_slope(&scaling.iter().map(|r| (r.scale, r.max_deviation)).collect::<Vec<_>>());

    Ok(EllipseReport {
        n,
        unperturbed: false,
        max_prediction_deviation: Some(max_deviation(&trajectory, &prediction)),
        prediction: Some(prediction),
        shape,
        numeric_branch_points: numeric,
        focal_mismatch,
        gamma0_imag,
        closure_defect,
        scaling,
        scaling_slope,
        trajectory,
    })
}
