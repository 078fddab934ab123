//! Periodic potentials for the Schrödinger operator `L = -d²/dx² + u(x)`.
//!
//! The main type is [`PotentialSpec`], a finite Fourier series
//! `u(x) = Σ c_l e^{ilx}` of period 2π. With real coefficients the potential
//! satisfies `u(x) = conj(u(-x))`, which is the PT-symmetry condition in
//! Fourier form. Index 0 is never stored: a constant shift would only move
//! the whole spectrum.
//!
//! The shooting code is written against the [`Potential`] trait so that
//! other periodic potentials (for instance the ones reconstructed from a
//! Dubrovin flow) can reuse the same monodromy and Dirichlet machinery.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// A complex periodic potential.
pub trait Potential: Sync {
    fn value(&self, x: f64) -> Complex64;

    fn period(&self) -> f64;
}

impl<P: Potential + ?Sized> Potential for &P {
    fn value(&self, x: f64) -> Complex64 {
        (**self).value(x)
    }

    fn period(&self) -> f64 {
        (**self).period()
    }
}

/// A pair of harmonics `c_l e^{ilx} + c_{-l} e^{-ilx}` stored as
/// `(c_l + c_{-l}) cos(lx) + i (c_l - c_{-l}) sin(lx)`.
///
/// The cos/sin form makes `u(-x) = conj(u(x))` hold bit-for-bit when both
/// coefficients are real.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Harmonic {
    order: u32,
    even: Complex64,
    odd: Complex64,
}

/// Finite Fourier-series potential of period 2π with the zero mode removed.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "PotentialJson")]
pub struct PotentialSpec {
    coefficients: BTreeMap<i32, Complex64>,
    harmonics: Vec<Harmonic>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialJson {
    coefficients: BTreeMap<i32, f64>,
}

impl TryFrom<PotentialJson> for PotentialSpec {
    type Error = Error;

    fn try_from(raw: PotentialJson) -> Result<Self> {
        PotentialSpec::new(raw.coefficients)
    }
}

impl Serialize for PotentialSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Real {
            coefficients: BTreeMap<i32, f64>,
        }
        #[derive(Serialize)]
        struct Raw<'a> {
            coefficients: &'a BTreeMap<i32, Complex64>,
        }
        if self.coefficients.values().all(|c| c.im == 0.0) {
            Real {
                coefficients: self.coefficients.iter().map(|(&l, c)| (l, c.re)).collect(),
            }
            .serialize(serializer)
        } else {
            Raw {
                coefficients: &self.coefficients,
            }
            .serialize(serializer)
        }
    }
}

impl PotentialSpec {
    /// Builds a PT-symmetric potential from real Fourier coefficients.
    ///
    /// Zero entries are dropped. A nonzero `c_0` or a non-finite value is
    /// rejected.
    pub fn new<I>(coefficients: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, f64)>,
    {
        let mut map = BTreeMap::new();
        for (l, c) in coefficients {
            if !c.is_finite() {
                return Err(Error::InvalidPotential(format!(
                    "coefficient c_{l} = {c} is not finite"
                )));
            }
            if c == 0.0 {
                continue;
            }
            if l == 0 {
                return Err(Error::InvalidPotential(format!("c_0 must vanish, got {c}")));
            }
            map.insert(l, Complex64::new(c, 0.0));
        }
        Ok(Self::from_map(map))
    }

    /// The zero potential.
    pub fn zero() -> Self {
        Self::from_map(BTreeMap::new())
    }

    /// Builds a potential from arbitrary complex coefficients without any
    /// validation. Such potentials need not be PT-symmetric; see
    /// [`PotentialSpec::pt_check`].
    pub fn from_raw_unchecked(coefficients: BTreeMap<i32, Complex64>) -> Self {
        Self::from_map(coefficients)
    }

    /// Parses the JSON form `{"coefficients": {"1": 0.2, "-1": -0.05}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidPotential(e.to_string()))
    }

    fn from_map(coefficients: BTreeMap<i32, Complex64>) -> Self {
        let mut orders: Vec<u32> = coefficients.keys().map(|l| l.unsigned_abs()).collect();
        orders.sort_unstable();
        orders.dedup();
        let get = |l: i64| {
            i32::try_from(l)
                .ok()
                .and_then(|l| coefficients.get(&l).copied())
                .unwrap_or_default()
        };
        let harmonics = orders
            .into_iter()
            .map(|order| {
                let plus = get(i64::from(order));
                let minus = if order == 0 {
                    Complex64::default()
                } else {
                    get(-i64::from(order))
                };
                Harmonic {
                    order,
                    even: plus + minus,
                    odd: plus - minus,
                }
            })
            .collect();
        Self {
            coefficients,
            harmonics,
        }
    }

    /// Coefficient `c_l`, zero when absent.
    pub fn coefficient(&self, l: i32) -> Complex64 {
        self.coefficients.get(&l).copied().unwrap_or_default()
    }

    /// The real pair `(c_n, c_{-n})` of a PT-symmetric potential.
    pub fn resonance_pair(&self, n: u32) -> Result<(f64, f64)> {
        let n = i32::try_from(n).map_err(|_| Error::InvalidArgument(format!("resonance index {n} too large")))?;
        let (plus, minus) = (self.coefficient(n), self.coefficient(-n));
        if plus.im != 0.0 || minus.im != 0.0 {
            return Err(Error::NotPtSymmetric(format!(
                "c_{n} = {plus}, c_-{n} = {minus} are not real"
            )));
        }
        Ok((plus.re, minus.re))
    }

    pub fn coefficients(&self) -> &BTreeMap<i32, Complex64> {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `Σ |c_l|`, a bound for `sup |u|`.
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.values().map(|c| c.norm()).sum()
    }

    /// Returns the potential with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_map(
            self.coefficients
                .iter()
                .filter(|_| factor != 0.0)
                .map(|(&l, &c)| (l, c * factor))
                .collect(),
        )
    }

    /// `u(x) = Σ c_l e^{ilx}`.
    pub fn evaluate(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::default();
        for h in &self.harmonics {
            let (s, c) = (f64::from(h.order) * x).sin_cos();
            acc += h.even * c + Complex64::i() * h.odd * s;
        }
        acc
    }

    /// PT check: real coefficients, no zero mode, and `u(x) = conj(u(-x))`
    /// on a sample grid.
    pub fn pt_check(&self) -> bool {
        if self.coefficients.contains_key(&0) {
            return false;
        }
        if self.coefficients.values().any(|c| c.im != 0.0) {
            return false;
        }
        let tol = 1e-14 * (1.0 + self.l1_norm());
        (0..64).all(|k| {
            let x = TAU * f64::from(k) / 64.0 + 0.1;
            (self.evaluate(x) - self.evaluate(-x).conj()).norm() <= tol
        })
    }
}

impl Potential for PotentialSpec {
    fn value(&self, x: f64) -> Complex64 {
        self.evaluate(x)
    }

    fn period(&self) -> f64 {
        TAU
    }
}

/// Periodic potential given by uniformly spaced samples of `u` and `u'`,
/// evaluated by piecewise cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct SampledPotential {
    origin: f64,
    step: f64,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

impl SampledPotential {
    /// `values[k]` and `slopes[k]` are `u` and `u'` at `origin + k * period / m`,
    /// `k = 0..m`; the sample at `origin + period` is implied by periodicity.
    pub fn new(origin: f64, period: f64, values: Vec<Complex64>, slopes: Vec<Complex64>) -> Result<Self> {
        if values.len() < 2 || values.len() != slopes.len() {
            return Err(Error::InvalidPotential(
                "sampled potential needs at least two (value, slope) pairs".into(),
            ));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidPotential(format!("bad period {period}")));
        }
        Ok(Self {
            origin,
            step: period / values.len() as f64,
            values,
            slopes,
        })
    }
}

impl Potential for SampledPotential {
    fn value(&self, x: f64) -> Complex64 {
        let m = self.values.len();
        let t = (x - self.origin).rem_euclid(self.period()) / self.step;
        let k = (t.floor() as usize).min(m - 1);
        let s = t - k as f64;
        let next = (k + 1) % m;
        let (p0, p1) = (self.values[k], self.values[next]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[next] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (s3 - 2.0 * s2 + s) + p1 * (-2.0 * s3 + 3.0 * s2) + m1 * (s3 - s2)
    }

    fn period(&self) -> f64 {
        self.step * self.values.len() as f64
    }
}
