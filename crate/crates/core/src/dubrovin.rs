//! Dubrovin flow on a hyperelliptic curve `w² = R(E) = Π (E - E_j)`.
//!
//! Each divisor point carries its sheet through the value `w_k` with
//! `w_k² = R(γ_k)`. The flow is integrated in the variables `(γ_k, w_k)`:
//!
//! ```text
//! γ_k' = -2i w_k / Π_{j≠k} (γ_k - γ_j)
//! w_k' = -i R'(γ_k) / Π_{j≠k} (γ_k - γ_j)
//! ```
//!
//! The second equation is `w_k' = R'(γ_k) γ_k' / (2 w_k)` with the factor
//! `w_k` cancelled, so a divisor point passes through a branch point
//! (`w_k = 0`) without any change of chart, and the sheet is carried along by
//! continuity. `w_k² - R(γ_k)` is a first integral of the system and serves
//! as a sheet-consistency check.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::divisor::dirichlet_eigenvalue;
use crate::error::{Error, Result};
use crate::newton::{NewtonOptions, Window};
use crate::ode::{integrate, OdeOptions};
use crate::potential::SampledPotential;

/// Points closer than this count as a collision.
pub const COLLISION_TOL: f64 = 1e-9;

/// Default neighbourhood size used to tag samples near a branch point.
pub const DEFAULT_BRANCH_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct HyperellipticData {
    branch_points: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for HyperellipticData {
    type Error = Error;

    fn try_from(points: Vec<Complex64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<HyperellipticData> for Vec<Complex64> {
    fn from(data: HyperellipticData) -> Self {
        data.branch_points
    }
}

impl HyperellipticData {
    /// `2g + 1` pairwise distinct branch points, `g ≥ 1`.
    pub fn new(branch_points: Vec<Complex64>) -> Result<Self> {
        let m = branch_points.len();
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "need 2g + 1 >= 3 branch points, got {m}"
            )));
        }
        if branch_points.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidArgument("non-finite branch point".into()));
        }
        for i in 0..m {
            for j in i + 1..m {
                if (branch_points[i] - branch_points[j]).norm() <= 1e-10 {
                    return Err(Error::InvalidArgument(format!("branch points {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { branch_points })
    }

    pub fn genus(&self) -> usize {
        (self.branch_points.len() - 1) / 2
    }

    pub fn branch_points(&self) -> &[Complex64] {
        &self.branch_points
    }

    pub fn r(&self, e: Complex64) -> Complex64 {
        self.branch_points.iter().map(|b| e - b).product()
    }

    pub fn r_prime(&self, e: Complex64) -> Complex64 {
        (0..self.branch_points.len())
            .map(|skip| {
                self.branch_points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, b)| e - b)
                    .product::<Complex64>()
            })
            .sum()
    }

    pub fn branch_point_sum(&self) -> Complex64 {
        self.branch_points.iter().sum()
    }
}

/// Sign in front of the principal square root of `R(γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivisorPoint {
    pub gamma: Complex64,
    pub w: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisorState {
    pub points: Vec<DivisorPoint>,
}

impl DivisorState {
    /// Checks `w² = R(γ)` to `1e-10·(1 + |R|)` and pairwise distinctness.
    pub fn new(data: &HyperellipticData, points: Vec<DivisorPoint>) -> Result<Self> {
        let state = Self { points };
        state.validate(data, 1e-10)?;
        Ok(state)
    }

    /// Places each `γ_k` on the requested sheet.
    pub fn on_sheets(data: &HyperellipticData, points: &[(Complex64, Sheet)]) -> Result<Self> {
        let points = points
            .iter()
            .map(|&(gamma, sheet)| {
                let root = data.r(gamma).sqrt();
                DivisorPoint {
                    gamma,
                    w: match sheet {
                        Sheet::Plus => root,
                        Sheet::Minus => -root,
                    },
                }
            })
            .collect();
        Self::new(data, points)
    }

    pub fn validate(&self, data: &HyperellipticData, tol: f64) -> Result<()> {
        if self.points.len() != data.genus() {
            return Err(Error::InvalidArgument(format!(
                "genus {} curve needs {} divisor points, got {}",
                data.genus(),
                data.genus(),
                self.points.len()
            )));
        }
        let defect = self.sheet_defect(data);
        if defect.is_nan() || defect >= tol {
            return Err(Error::InvalidArgument(format!(
                "divisor is off the curve: relative |w² - R(γ)| = {defect:e}"
            )));
        }
        collision_check(&self.gammas(), f64::NAN)
    }

    pub fn gammas(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    /// `max_k |w_k² - R(γ_k)| / (1 + |R(γ_k)|)`.
    pub fn sheet_defect(&self, data: &HyperellipticData) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let r = data.r(p.gamma);
                (p.w * p.w - r).norm() / (1.0 + r.norm())
            })
            .fold(0.0, f64::max)
    }

    fn to_vector(&self) -> Vec<Complex64> {
        let g = self.points.len();
        let mut y = vec![Complex64::default(); 2 * g];
        for (k, p) in self.points.iter().enumerate() {
            y[k] = p.gamma;
            y[g + k] = p.w;
        }
        y
    }

    fn from_vector(y: &[Complex64]) -> Self {
        let g = y.len() / 2;
        Self {
            points: (0..g)
                .map(|k| DivisorPoint {
                    gamma: y[k],
                    w: y[g + k],
                })
                .collect(),
        }
    }
}

fn collision_check(gammas: &[Complex64], x: f64) -> Result<()> {
    for j in 0..gammas.len() {
        for k in j + 1..gammas.len() {
            if (gammas[j] - gammas[k]).norm() < COLLISION_TOL {
                return Err(Error::DivisorCollision { j, k, x });
            }
        }
    }
    Ok(())
}

fn flow_rhs(data: &HyperellipticData, x: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
    let g = y.len() / 2;
    collision_check(&y[..g], x)?;
    let i = Complex64::i();
    for k in 0..g {
        let gk = y[k];
        let denom: Complex64 = (0..g).filter(|&j| j != k).map(|j| gk - y[j]).product();
        dy[k] = -2.0 * i * y[g + k] / denom;
        dy[g + k] = -i * data.r_prime(gk) / denom;
    }
    Ok(())
}

/// Velocities `γ_k'` of the divisor points.
pub fn dubrovin_rhs(data: &HyperellipticData, state: &DivisorState) -> Result<Vec<Complex64>> {
    let y = state.to_vector();
    let mut dy = vec![Complex64::default(); y.len()];
    flow_rhs(data, f64::NAN, &y, &mut dy)?;
    dy.truncate(state.points.len());
    Ok(dy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub tol: f64,
    /// A sample is tagged as near a branch point when
    /// `|w_k|² < branch_tol · |R'(γ_k)|`.
    pub branch_tol: f64,
    /// Number of output intervals over the span.
    pub samples: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            branch_tol: DEFAULT_BRANCH_TOL,
            samples: 400,
        }
    }
}

impl FlowOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions::with_tol(self.tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSample {
    pub x: f64,
    pub state: DivisorState,
    pub near_branch_point: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowPath {
    pub samples: Vec<FlowSample>,
}

impl FlowPath {
    /// CSV with columns `x` and `re_gamma_k,im_gamma_k,re_w_k,im_w_k` for
    /// every point `k = 1..g`.
    pub fn to_csv(&self) -> String {
        let g = self.samples.first().map_or(0, |s| s.state.points.len());
        let mut out = String::from("x");
        for k in 1..=g {
            let _ = write!(out, ",re_gamma_{k},im_gamma_{k},re_w_{k},im_w_{k}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{:.15e}", s.x);
            for p in &s.state.points {
                let _ = write!(
                    out,
                    ",{:.15e},{:.15e},{:.15e},{:.15e}",
                    p.gamma.re, p.gamma.im, p.w.re, p.w.im
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> &DivisorState {
        &self.samples.last().expect("a flow path has at least one sample").state
    }

    pub fn max_sheet_defect(&self, data: &HyperellipticData) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.sheet_defect(data))
            .fold(0.0, f64::max)
    }
}

fn tag(data: &HyperellipticData, x: f64, state: DivisorState, branch_tol: f64) -> FlowSample {
    let near_branch_point = state
        .points
        .iter()
        .map(|p| p.w.norm_sqr() < branch_tol * data.r_prime(p.gamma).norm())
        .collect();
    FlowSample {
        x,
        state,
        near_branch_point,
    }
}

fn advance(data: &HyperellipticData, y: &mut [Complex64], x0: f64, x1: f64, ode: &OdeOptions) -> Result<()> {
    integrate(|x, y, dy| flow_rhs(data, x, y, dy), x0, x1, y, ode)?;
    Ok(())
}

/// Integrates the flow over `span`, sampling `opts.samples + 1` equispaced
/// points. A span of zero length returns the initial state only.
pub fn integrate_flow(
    data: &HyperellipticData,
    state0: &DivisorState,
    span: (f64, f64),
    opts: &FlowOptions,
) -> Result<FlowPath> {
    state0.validate(data, 1e-10)?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} must be positive",
            opts.tol
        )));
    }
    let (x0, x1) = span;
    let mut samples = vec![tag(data, x0, state0.clone(), opts.branch_tol)];
    if x0 == x1 {
        return Ok(FlowPath { samples });
    }
    let count = opts.samples.max(1);
    let ode = opts.ode();
    let mut y = state0.to_vector();
    let mut x = x0;
    for k in 1..=count {
        let next = if k == count {
            x1
        } else {
            x0 + (x1 - x0) * k as f64 / count as f64
        };
        advance(data, &mut y, x, next, &ode)?;
        x = next;
        samples.push(tag(data, x, DivisorState::from_vector(&y), opts.branch_tol));
    }
    Ok(FlowPath { samples })
}

/// `u(x) = -2 Σ γ_k(x) + Σ E_j` at each sample of `path`.
pub fn trace_formula_potential(data: &HyperellipticData, path: &FlowPath) -> Vec<(f64, Complex64)> {
    let shift = data.branch_point_sum();
    path.samples
        .iter()
        .map(|s| (s.x, shift - 2.0 * s.state.gammas().iter().sum::<Complex64>()))
        .collect()
}

/// First `x > 0` at which the flow returns to `state0`, located as the
/// next crossing of the hyperplane through the initial state orthogonal to
/// the initial velocity. Searches up to `max_x`.
pub fn detect_period(data: &HyperellipticData, state0: &DivisorState, max_x: f64, opts: &FlowOptions) -> Result<f64> {
    state0.validate(data, 1e-10)?;
    let y0 = state0.to_vector();
    let mut v0 = vec![Complex64::default(); y0.len()];
    flow_rhs(data, 0.0, &y0, &mut v0)?;
    let phase = |y: &[Complex64]| -> f64 {
        y.iter()
            .zip(&y0)
            .zip(&v0)
            .map(|((a, b), v)| ((a - b) * v.conj()).re)
            .sum()
    };
    let ode = opts.ode();
    let steps = opts.samples.max(16);
    let h = max_x / steps as f64;
    let mut y = y0.clone();
    let mut x = 0.0;
    let mut prev = 0.0;
    let mut left = false;
    for _ in 0..steps {
        let mut next_y = y.clone();
        advance(data, &mut next_y, x, x + h, &ode)?;
        let value = phase(&next_y);
        if value < 0.0 {
            left = true;
        }
        if left && prev < 0.0 && value >= 0.0 {
            // Illinois refinement inside [x, x + h]
            let (mut a, mut fa) = (0.0, prev);
            let (mut b, mut fb) = (h, value);
            let mut side = 0i8;
            for _ in 0..100 {
                let t = (a * fb - b * fa) / (fb - fa);
                let mut yt = y.clone();
                advance(data, &mut yt, x, x + t, &ode)?;
                let ft = phase(&yt);
                if ft == 0.0 || b - a < 1e-13 {
                    return Ok(x + t);
                }
                if ft < 0.0 {
                    (a, fa) = (t, ft);
                    if side == -1 {
                        fb /= 2.0;
                    }
                    side = -1;
                } else {
                    (b, fb) = (t, ft);
                    if side == 1 {
                        fa /= 2.0;
                    }
                    side = 1;
                }
            }
            return Ok(x + (a + b) / 2.0);
        }
        prev = value;
        y = next_y;
        x += h;
    }
    Err(Error::InvalidArgument(format!(
        "no return to the initial state within x <= {max_x}"
    )))
}

/// Periodic potential reconstructed from the flow over one period by the
/// trace formula, with `u' = -2 Σ γ_k'`.
pub fn reconstructed_potential(
    data: &HyperellipticData,
    state0: &DivisorState,
    period: f64,
    samples: usize,
    opts: &FlowOptions,
) -> Result<SampledPotential> {
    let m = samples.max(2);
    let path = integrate_flow(data, state0, (0.0, period), &FlowOptions { samples: m, ..*opts })?;
    let shift = data.branch_point_sum();
    let mut values = Vec::with_capacity(m);
    let mut slopes = Vec::with_capacity(m);
    for s in &path.samples[..m] {
        let velocity = dubrovin_rhs(data, &s.state)?;
        values.push(shift - 2.0 * s.state.gammas().iter().sum::<Complex64>());
        slopes.push(-2.0 * velocity.iter().sum::<Complex64>());
    }
    SampledPotential::new(0.0, period, values, slopes)
}

/// Dirichlet eigenvalue of the reconstructed potential near each `γ_1(x)`
/// on a genus-one path; returns `(x, γ_1(x), Dirichlet eigenvalue)`.
pub fn loop_closure(
    potential: &SampledPotential,
    path: &FlowPath,
    points: &[usize],
    integrator_tol: f64,
) -> Result<Vec<(f64, Complex64, Complex64)>> {
    points
        .iter()
        .map(|&i| {
            let sample = path
                .samples
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("no sample {i}")))?;
            let gamma = sample.state.points[0].gamma;
            let root = dirichlet_eigenvalue(
                potential,
                sample.x,
                gamma,
                &Window::around(gamma, 0.25),
                integrator_tol,
                &NewtonOptions::default(),
            )?;
            Ok((sample.x, gamma, root.energy))
        })
        .collect()
}
