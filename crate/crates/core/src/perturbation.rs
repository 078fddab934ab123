//! First-order perturbation theory around the free operator `-d²/dx²`.
//!
//! In the Fourier basis `e^{i(m+α)x}` the operator is the Hill matrix
//! `δ_{mn}(m+α)² + c_{m-n}`. Near a resonant point `E0 = n²/4` the waves
//! `e^{i(±n/2+δ)x}` are almost degenerate and the spectrum is governed by
//! the 2×2 block
//!
//! ```text
//! P_n = [[E0 + δ² + nδ, c_n], [c_{-n}, E0 + δ² - nδ]]
//! ```
//!
//! with eigenvalues `E0 + δ² ± √(n²δ² + c_n c_{-n})`. The zeros of the
//! corresponding Bloch eigenvector trace the ellipse
//! `γ(x) = E0 - (c_n e^{inx} + c_{-n} e^{-inx})/2`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::newton::Window;
use crate::potential::PotentialSpec;

/// Default half size `N` of the truncated Hill matrix (dimension `2N + 1`).
pub const DEFAULT_HALF_SIZE: usize = 24;

/// Default number of parametrization samples per `x`-period `2π/n`.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 256;

/// Resonant energy `n²/4`.
pub fn resonant_energy(n: u32) -> f64 {
    let n = f64::from(n);
    n * n / 4.0
}

/// Truncated Hill matrix on the indices `-N..=N`.
pub fn hill_matrix(spec: &PotentialSpec, alpha: f64, half_size: usize) -> Result<DMatrix<Complex64>> {
    if half_size < 1 {
        return Err(Error::InvalidArgument(
            "Hill matrix half size must be at least 1".into(),
        ));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("quasimomentum shift {alpha}")));
    }
    let n = half_size as i64;
    let dim = 2 * half_size + 1;
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        let (m, k) = (i as i64 - n, j as i64 - n);
        let mut entry = spec.coefficient((m - k) as i32);
        if m == k {
            let w = m as f64 + alpha;
            entry += w * w;
        }
        entry
    }))
}

/// All eigenvalues, sorted by real part and then by imaginary part.
pub fn hill_eigenvalues(matrix: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let mut values = linalg::eigenvalues(matrix)?;
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(values)
}

/// Hill eigenvalues inside a window together with a truncation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HillSpectrum {
    pub alpha: f64,
    pub half_size: usize,
    pub values: Vec<Complex64>,
    /// Largest distance between a value and its nearest counterpart at
    /// half size `2N`. Infinite when the counts in the window differ.
    pub doubling_shift: f64,
}

pub fn hill_spectrum_in_window(
    spec: &PotentialSpec,
    alpha: f64,
    half_size: usize,
    window: &Window,
) -> Result<HillSpectrum> {
    window.validate()?;
    let pick = |n: usize| -> Result<Vec<Complex64>> {
        Ok(hill_eigenvalues(&hill_matrix(spec, alpha, n)?)?
            .into_iter()
            .filter(|z| window.contains(*z))
            .collect())
    };
    let values = pick(half_size)?;
    let doubled = pick(2 * half_size)?;
    let doubling_shift = if values.len() != doubled.len() {
        f64::INFINITY
    } else {
        values
            .iter()
            .map(|z| doubled.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(HillSpectrum {
        alpha,
        half_size,
        values,
        doubling_shift,
    })
}

/// The resonant block `P_n` acting on `(e^{i(n/2+δ)x}, e^{i(-n/2+δ)x})`.
pub fn resonant_block(spec: &PotentialSpec, n: u32, delta: f64) -> [[Complex64; 2]; 2] {
    let e0 = resonant_energy(n);
    let nd = f64::from(n) * delta;
    let base = e0 + delta * delta;
    let n = n as i32;
    [
        [Complex64::from(base + nd), spec.coefficient(n)],
        [spec.coefficient(-n), Complex64::from(base - nd)],
    ]
}

/// `√x` for real `x`, on the imaginary axis when `x < 0`.
fn real_sqrt(x: f64) -> Complex64 {
    if x >= 0.0 {
        Complex64::new(x.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-x).sqrt())
    }
}

/// `λ̃ = ±√(n²δ² + c_n c_{-n})`, the `+` root being the principal one.
pub fn lambda_tilde(n: u32, delta: f64, c_n: f64, c_minus_n: f64, branch: Branch) -> Complex64 {
    let nd = f64::from(n) * delta;
    let root = real_sqrt(nd * nd + c_n * c_minus_n);
    match branch {
        Branch::Plus => root,
        Branch::Minus => -root,
    }
}

/// Eigenvalues `(λ₊, λ₋)` of the resonant block in closed form.
pub fn block_eigenvalues(n: u32, delta: f64, c_n: f64, c_minus_n: f64) -> (Complex64, Complex64) {
    let base = resonant_energy(n) + delta * delta;
    let root = lambda_tilde(n, delta, c_n, c_minus_n, Branch::Plus);
    (base + root, base - root)
}

/// First-order branch points near `n²/4`: `E0 ± √(c_n c_{-n})`.
pub fn first_order_branch_points(n: u32, c_n: f64, c_minus_n: f64) -> [Complex64; 2] {
    let e0 = resonant_energy(n);
    let root = real_sqrt(c_n * c_minus_n);
    [e0 + root, e0 - root]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

/// Leading-order Bloch eigenfunction `a e^{i(n/2+δ)x} + b e^{i(-n/2+δ)x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochVector {
    pub n: u32,
    pub delta: Complex64,
    pub lambda_tilde: Complex64,
    /// Amplitude of `e^{i(n/2+δ)x}`.
    pub plus: Complex64,
    /// Amplitude of `e^{i(-n/2+δ)x}`.
    pub minus: Complex64,
}

impl BlochVector {
    /// Picks whichever of the two equivalent eigenvector forms has the
    /// larger coefficient vector.
    pub fn new(n: u32, delta: f64, c_n: f64, c_minus_n: f64, branch: Branch) -> Result<Self> {
        let lt = lambda_tilde(n, delta, c_n, c_minus_n, branch);
        Self::from_parts(n, Complex64::from(delta), lt, c_n, c_minus_n)
    }

    /// Same as [`BlochVector::new`] for a complex shift `δ` and a given root
    /// `λ̃` of `λ̃² = n²δ² + c_n c_{-n}`.
    pub fn from_parts(n: u32, delta: Complex64, lambda_tilde: Complex64, c_n: f64, c_minus_n: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("resonance index must be at least 1".into()));
        }
        let nd = f64::from(n) * delta;
        let defect = lambda_tilde * lambda_tilde - nd * nd - c_n * c_minus_n;
        let scale = lambda_tilde.norm_sqr() + nd.norm_sqr() + (c_n * c_minus_n).abs();
        if defect.norm() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "λ̃ = {lambda_tilde} is not a root for δ = {delta}"
            )));
        }
        let first = (Complex64::from(-c_n), nd - lambda_tilde);
        let second = (-nd - lambda_tilde, Complex64::from(-c_minus_n));
        let size = |(a, b): (Complex64, Complex64)| a.norm_sqr() + b.norm_sqr();
        let (plus, minus) = if size(first) >= size(second) { first } else { second };
        if size((plus, minus)) == 0.0 {
            return Err(Error::DegenerateVector);
        }
        Ok(Self {
            n,
            delta,
            lambda_tilde,
            plus,
            minus,
        })
    }

    pub fn eigenvalue(&self) -> Complex64 {
        resonant_energy(self.n) + self.delta * self.delta + self.lambda_tilde
    }

    /// `(amplitude, wavenumber)` of both Fourier modes.
    pub fn modes(&self) -> [(Complex64, Complex64); 2] {
        let k = f64::from(self.n) / 2.0;
        [(self.plus, k + self.delta), (self.minus, -k + self.delta)]
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let i = Complex64::i();
        self.modes().iter().map(|&(a, k)| a * (i * k * x).exp()).sum()
    }

    pub fn second_derivative(&self, x: f64) -> Complex64 {
        let i = Complex64::i();
        self.modes().iter().map(|&(a, k)| -a * k * k * (i * k * x).exp()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Gap,
    /// Only decided at first order; higher orders may still split the point.
    DoublePointAtFirstOrder,
    TransversalBand,
}

impl Verdict {
    pub fn from_product(product: f64) -> Self {
        if product > 0.0 {
            Verdict::Gap
        } else if product < 0.0 {
            Verdict::TransversalBand
        } else {
            Verdict::DoublePointAtFirstOrder
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceReport {
    pub n: u32,
    pub e0: f64,
    pub c_n: f64,
    pub c_minus_n: f64,
    pub product: f64,
    pub first_order_branch_points: [Complex64; 2],
    pub numeric_branch_points: Option<[Complex64; 2]>,
    pub verdict: Verdict,
    /// Set when the first-order verdict cannot decide the splitting.
    pub inconclusive: bool,
    /// Verdict read off the numeric branch points.
    pub numeric_verdict: Option<Verdict>,
    /// Largest distance between numeric and first-order branch points.
    pub mismatch: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParametrizationSample {
    pub x: f64,
    pub gamma: Complex64,
    pub lambda_tilde: Complex64,
    /// The quasimomentum shift `δ(x)`.
    pub delta: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictedShape {
    Ellipse,
    Segment { endpoints: [Complex64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipsePrediction {
    pub n: u32,
    pub c_n: f64,
    pub c_minus_n: f64,
    pub center: Complex64,
    pub semi_axis_real: f64,
    pub semi_axis_imag: f64,
    pub foci: [Complex64; 2],
    pub shape: PredictedShape,
    pub samples: Vec<ParametrizationSample>,
}

impl EllipsePrediction {
    /// `x`-period `2π/n` of the parametrization.
    pub fn period(&self) -> f64 {
        TAU / f64::from(self.n)
    }

    pub fn at(&self, x: f64) -> ParametrizationSample {
        let n = f64::from(self.n);
        let up = self.c_n * Complex64::from_polar(1.0, n * x);
        let down = self.c_minus_n * Complex64::from_polar(1.0, -n * x);
        let lambda_tilde = -(up + down) / 2.0;
        ParametrizationSample {
            x,
            gamma: self.center + lambda_tilde,
            lambda_tilde,
            delta: (up - down) / (2.0 * n),
        }
    }

    pub fn gamma(&self, x: f64) -> Complex64 {
        self.at(x).gamma
    }

    /// Replaces the stored samples by `count` equispaced points over one
    /// period, end point excluded.
    pub fn with_samples(mut self, count: usize) -> Self {
        let h = self.period() / count.max(1) as f64;
        self.samples = (0..count).map(|k| self.at(k as f64 * h)).collect();
        self
    }

    pub fn semi_major(&self) -> f64 {
        self.semi_axis_real.max(self.semi_axis_imag)
    }

    pub fn semi_minor(&self) -> f64 {
        self.semi_axis_real.min(self.semi_axis_imag)
    }
}

pub fn ellipse_prediction(spec: &PotentialSpec, n: u32) -> Result<EllipsePrediction> {
    if n == 0 {
        return Err(Error::InvalidArgument("resonance index must be at least 1".into()));
    }
    let (c_n, c_minus_n) = spec.resonance_pair(n)?;
    if c_n == 0.0 && c_minus_n == 0.0 {
        return Err(Error::DegenerateDivisor { n });
    }
    let center = Complex64::from(resonant_energy(n));
    let semi_axis_real = (c_n + c_minus_n).abs() / 2.0;
    let semi_axis_imag = (c_n - c_minus_n).abs() / 2.0;
    let foci = first_order_branch_points(n, c_n, c_minus_n);
    let shape = if semi_axis_imag == 0.0 {
        PredictedShape::Segment {
            endpoints: [center - semi_axis_real, center + semi_axis_real],
        }
    } else if semi_axis_real == 0.0 {
        let i = Complex64::i();
        PredictedShape::Segment {
            endpoints: [center - i * semi_axis_imag, center + i * semi_axis_imag],
        }
    } else {
        PredictedShape::Ellipse
    };
    Ok(EllipsePrediction {
        n,
        c_n,
        c_minus_n,
        center,
        semi_axis_real,
        semi_axis_imag,
        foci,
        shape,
        samples: Vec::new(),
    }
    .with_samples(DEFAULT_SAMPLES_PER_PERIOD))
}
