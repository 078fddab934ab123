//! Branch points, spectral locus and resonance classification.
//!
//! Branch points are the roots of `Δ(E)² - 4`. The spectrum is the set where
//! `Δ(E)` is real and lies in `[-2, 2]`; in the complex `E` plane it is a
//! union of analytic arcs that end at simple branch points.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monodromy::{self, discriminant_with_tol};
use crate::newton::{centered_derivative, newton, NewtonOptions, Window};
use crate::perturbation::{first_order_branch_points, resonant_energy, ResonanceReport, Verdict};
use crate::potential::{Potential, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Accuracy target for each discriminant evaluation.
    pub integrator_tol: f64,
    pub newton: NewtonOptions,
    /// Roots closer than this are the same root.
    pub dedup_tol: f64,
    /// Distinct roots closer than this are merged into a double point.
    pub double_tol: f64,
    /// Roots with `|Δ'|` below this are tagged double.
    pub derivative_cutoff: f64,
    /// Numeric and first-order branch points further apart than this raise
    /// a warning in the resonance report.
    pub mismatch_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            integrator_tol: monodromy::DEFAULT_TOL,
            newton: NewtonOptions::default(),
            dedup_tol: 1e-7,
            double_tol: 1e-6,
            derivative_cutoff: 1e-4,
            mismatch_tol: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    Simple,
    DoubleWithinTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub energy: Complex64,
    pub multiplicity: Multiplicity,
    /// `|Δ(E)² - 4|` at the reported point.
    pub residual: f64,
    /// `Δ'(E)` at the reported point.
    pub slope: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedFailure {
    pub seed: Complex64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPointSet {
    pub points: Vec<BranchPoint>,
    pub resonance_index: Option<u32>,
    pub failures: Vec<SeedFailure>,
}

impl BranchPointSet {
    pub fn energies(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.energy).collect()
    }

    /// Distance from `z` to the nearest listed point.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        self.points
            .iter()
            .map(|p| (p.energy - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// The two points nearest to `center`, a double point counting twice.
    pub fn nearest_pair(&self, center: Complex64) -> Option<[Complex64; 2]> {
        let mut ranked: Vec<&BranchPoint> = self.points.iter().collect();
        ranked.sort_by(|a, b| (a.energy - center).norm().total_cmp(&(b.energy - center).norm()));
        let first = ranked.first()?;
        if first.multiplicity == Multiplicity::DoubleWithinTolerance {
            return Some([first.energy, first.energy]);
        }
        ranked.get(1).map(|second| [first.energy, second.energy])
    }
}

/// Default scan window for resonances `1..=n_max`.
pub fn default_window(n_max: u32) -> Window {
    Window {
        re_min: -1.0,
        re_max: resonant_energy(n_max) + 1.0,
        im_min: -1.0,
        im_max: 1.0,
    }
}

/// Search window around the resonance `n`.
pub fn resonance_window(n: u32) -> Window {
    let half = ((2.0 * f64::from(n) - 1.0) / 8.0).max(0.2);
    Window::around(Complex64::from(resonant_energy(n)), half)
}

/// Seeds near `n²/4`: the first-order branch points and a small stencil
/// around the resonant point.
pub fn seeds_for_resonance(spec: &PotentialSpec, n: u32) -> Vec<Complex64> {
    let e0 = Complex64::from(resonant_energy(n));
    let (c_n, c_minus_n) = resonance_pair_lossy(spec, n);
    let first = first_order_branch_points(n, c_n, c_minus_n);
    let spread = (c_n * c_minus_n).abs().sqrt().max(1e-2);
    let mut seeds = vec![e0, first[0], first[1]];
    for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
        seeds.push(e0 + dir * 0.5 * spread);
        seeds.push(e0 - dir * 0.5 * spread);
    }
    seeds
}

/// Seeds for all resonances `1..=n_max`.
pub fn default_seeds(spec: &PotentialSpec, n_max: u32) -> Vec<Complex64> {
    (1..=n_max).flat_map(|n| seeds_for_resonance(spec, n)).collect()
}

fn resonance_pair_lossy(spec: &PotentialSpec, n: u32) -> (f64, f64) {
    let n = n as i32;
    (spec.coefficient(n).re, spec.coefficient(-n).re)
}

fn delta_slope<P: Potential + ?Sized>(potential: &P, energy: Complex64, opts: &SpectralOptions) -> Result<Complex64> {
    let step = opts.newton.fd_step * (1.0 + energy.norm());
    centered_derivative(
        &|e| discriminant_with_tol(potential, e, opts.integrator_tol),
        energy,
        step,
    )
}

/// Newton on `Δ² - 4` from every seed, then deduplication and double-point
/// merging. Seeds that fail are recorded in `failures`.
pub fn find_branch_points<P: Potential + ?Sized>(
    potential: &P,
    window: &Window,
    seeds: &[Complex64],
    opts: &SpectralOptions,
) -> Result<BranchPointSet> {
    window.validate()?;
    if let Some(seed) = seeds.iter().find(|s| !window.contains(**s)) {
        return Err(Error::InvalidArgument(format!("seed {seed} outside the search window")));
    }
    let f = |e: Complex64| -> Result<Complex64> {
        let d = discriminant_with_tol(potential, e, opts.integrator_tol)?;
        Ok(d * d - 4.0)
    };
    let outcomes: Vec<(Complex64, Result<Complex64>)> = seeds
        .par_iter()
        .map(|&seed| (seed, newton(f, seed, Some(window), &opts.newton).map(|r| r.root)))
        .collect();

    let mut roots: Vec<Complex64> = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(root) => {
                if roots.iter().all(|r| (r - root).norm() > opts.dedup_tol) {
                    roots.push(root);
                }
            }
            Err(e) => failures.push(SeedFailure {
                seed,
                reason: e.to_string(),
            }),
        }
    }

    // single-linkage clusters at the double-point tolerance
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for root in roots {
        let hits: Vec<usize> = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|z| (z - root).norm() < opts.double_tol))
            .map(|(i, _)| i)
            .collect();
        let mut merged = vec![root];
        for &i in hits.iter().rev() {
            merged.extend(clusters.swap_remove(i));
        }
        clusters.push(merged);
    }

    let mut points = clusters
        .into_par_iter()
        .map(|cluster| {
            let energy = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
            let d = discriminant_with_tol(potential, energy, opts.integrator_tol)?;
            let slope = delta_slope(potential, energy, opts)?;
            let multiplicity = if cluster.len() > 1 || slope.norm() < opts.derivative_cutoff {
                Multiplicity::DoubleWithinTolerance
            } else {
                Multiplicity::Simple
            };
            Ok(BranchPoint {
                energy,
                multiplicity,
                residual: (d * d - 4.0).norm(),
                slope,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.energy
            .re
            .total_cmp(&b.energy.re)
            .then(a.energy.im.total_cmp(&b.energy.im))
    });
    Ok(BranchPointSet {
        points,
        resonance_index: None,
        failures,
    })
}

/// Numeric branch points near `n²/4` compared with the first-order theory.
pub fn classify_resonance(spec: &PotentialSpec, n: u32, opts: &SpectralOptions) -> Result<ResonanceReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("resonance index must be at least 1".into()));
    }
    let (c_n, c_minus_n) = spec.resonance_pair(n)?;
    let product = c_n * c_minus_n;
    let e0 = resonant_energy(n);
    let first = first_order_branch_points(n, c_n, c_minus_n);
    let verdict = Verdict::from_product(product);

    let window = resonance_window(n);
    let seeds: Vec<Complex64> = seeds_for_resonance(spec, n)
        .into_iter()
        .filter(|s| window.contains(*s))
        .collect();
    let mut set = find_branch_points(spec, &window, &seeds, opts)?;
    set.resonance_index = Some(n);

    let mut warnings: Vec<String> = set
        .failures
        .iter()
        .map(|f| format!("seed {} failed: {}", f.seed, f.reason))
        .collect();
    let numeric = set.nearest_pair(Complex64::from(e0)).map(|pair| {
        // match the ordering of the first-order pair
        let direct = (pair[0] - first[0]).norm().max((pair[1] - first[1]).norm());
        let swapped = (pair[1] - first[0]).norm().max((pair[0] - first[1]).norm());
        if swapped < direct {
            [pair[1], pair[0]]
        } else {
            pair
        }
    });
    if numeric.is_none() {
        if let Some(err) = set.failures.first() {
            return Err(Error::NoConvergence {
                seed: err.seed,
                last: err.seed,
                residual: f64::NAN,
            });
        }
        warnings.push("fewer than two branch points found near the resonance".into());
    }
    let mismatch = numeric.map(|p| (p[0] - first[0]).norm().max((p[1] - first[1]).norm()));
    let numeric_verdict = numeric.map(|p| numeric_verdict(&set, p, opts));
    if let Some(m) = mismatch {
        if m > opts.mismatch_tol {
            warnings.push(format!(
                "numeric branch points differ from first order by {m:.3e} (tolerance {:.1e})",
                opts.mismatch_tol
            ));
        }
    }
    if let Some(v) = numeric_verdict {
        if v != verdict && verdict != Verdict::DoublePointAtFirstOrder {
            warnings.push(format!("numeric verdict {v:?} disagrees with first order {verdict:?}"));
        }
    }
    Ok(ResonanceReport {
        n,
        e0,
        c_n,
        c_minus_n,
        product,
        first_order_branch_points: first,
        numeric_branch_points: numeric,
        verdict,
        inconclusive: verdict == Verdict::DoublePointAtFirstOrder,
        numeric_verdict,
        mismatch,
        warnings,
    })
}

fn numeric_verdict(set: &BranchPointSet, pair: [Complex64; 2], opts: &SpectralOptions) -> Verdict {
    let reality = 1e-8;
    let double = set
        .points
        .iter()
        .any(|p| p.energy == pair[0] && p.multiplicity == Multiplicity::DoubleWithinTolerance);
    if double || (pair[0] - pair[1]).norm() < opts.double_tol {
        Verdict::DoublePointAtFirstOrder
    } else if pair[0].im.abs() < reality && pair[1].im.abs() < reality {
        Verdict::Gap
    } else {
        Verdict::TransversalBand
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusOptions {
    pub integrator_tol: f64,
    /// Bound on `|Im Δ|` at every accepted sample.
    pub trace_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_samples: usize,
    pub corrector_iterations: usize,
    /// Consecutive corrector failures at the minimal step before giving up.
    pub stall_limit: usize,
}

impl Default for LocusOptions {
    fn default() -> Self {
        Self {
            integrator_tol: monodromy::DEFAULT_TOL,
            trace_tol: 1e-9,
            initial_step: 1e-3,
            min_step: 1e-7,
            max_step: 2e-2,
            max_samples: 20_000,
            corrector_iterations: 8,
            stall_limit: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocusSample {
    pub energy: Complex64,
    pub discriminant: Complex64,
    /// `θ ∈ [0, π]` with `Re Δ = 2 cos θ`.
    pub theta: f64,
}

impl LocusSample {
    fn new(energy: Complex64, discriminant: Complex64) -> Self {
        Self {
            energy,
            discriminant,
            theta: (discriminant.re / 2.0).clamp(-1.0, 1.0).acos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArcEnd {
    BranchPoint { energy: Complex64 },
    WindowBoundary,
    Closed,
    SampleBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusArc {
    pub samples: Vec<LocusSample>,
    pub start: ArcEnd,
    pub end: ArcEnd,
}

impl LocusArc {
    /// Real parts where the arc crosses the real axis, by linear
    /// interpolation between consecutive samples.
    pub fn real_axis_crossings(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.samples.windows(2) {
            let (a, b) = (w[0].energy, w[1].energy);
            if a.im == 0.0 {
                out.push(a.re);
            } else if a.im * b.im < 0.0 {
                let t = a.im / (a.im - b.im);
                out.push(a.re + t * (b.re - a.re));
            }
        }
        if let Some(last) = self.samples.last() {
            if last.energy.im == 0.0 && self.samples.len() > 1 {
                out.push(last.energy.re);
            }
        }
        out
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.samples.iter().map(|s| s.energy.im.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralLocus {
    pub arcs: Vec<LocusArc>,
}

impl SpectralLocus {
    /// CSV with columns `re_e,im_e,re_delta,theta`; arcs are separated by a
    /// blank line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_e,im_e,re_delta,theta\n");
        for (k, arc) in self.arcs.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            for s in &arc.samples {
                let _ = writeln!(
                    out,
                    "{:.15e},{:.15e},{:.15e},{:.15e}",
                    s.energy.re, s.energy.im, s.discriminant.re, s.theta
                );
            }
        }
        out
    }
}

struct Tracer<'a, P: ?Sized> {
    potential: &'a P,
    window: Window,
    opts: LocusOptions,
}

impl<P: Potential + ?Sized> Tracer<'_, P> {
    fn delta(&self, e: Complex64) -> Result<Complex64> {
        discriminant_with_tol(self.potential, e, self.opts.integrator_tol)
    }

    fn slope(&self, e: Complex64) -> Result<Complex64> {
        centered_derivative(&|z| self.delta(z), e, 1e-6 * (1.0 + e.norm()))
    }

    /// Solves `Im Δ(pred + s·normal) = 0` for real `s` with `|s| <= limit`.
    fn correct(&self, pred: Complex64, normal: Complex64, limit: f64) -> Result<Option<LocusSample>> {
        let mut s = 0.0;
        for _ in 0..self.opts.corrector_iterations {
            let e = pred + normal * s;
            let d = self.delta(e)?;
            if d.im.abs() < self.opts.trace_tol {
                return Ok(Some(LocusSample::new(e, d)));
            }
            let g = (self.slope(e)? * normal).im;
            if g == 0.0 || !g.is_finite() {
                return Ok(None);
            }
            s -= d.im / g;
            if s.abs() > limit {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// Newton onto `Δ = ±2` between the last sample and an overshoot.
    fn polish(&self, inside: &LocusSample, outside: &LocusSample) -> Result<Option<LocusSample>> {
        let target = 2.0 * outside.discriminant.re.signum();
        let (a, b) = (inside.discriminant.re, outside.discriminant.re);
        let t = ((target - a) / (b - a)).clamp(0.0, 1.0);
        let seed = inside.energy + (outside.energy - inside.energy) * t;
        let radius = 2.0 * (outside.energy - inside.energy).norm();
        let window = Window::around(inside.energy, radius);
        let opts = NewtonOptions {
            residual_tol: self.opts.trace_tol * 1e-2,
            ..NewtonOptions::default()
        };
        match newton(|e| Ok(self.delta(e)? - target), seed, Some(&window), &opts) {
            Ok(root) => {
                let d = self.delta(root.root)?;
                if d.im.abs() < self.opts.trace_tol && d.re.abs() <= 2.0 + self.opts.trace_tol {
                    Ok(Some(LocusSample::new(root.root, d)))
                } else {
                    Ok(None)
                }
            }
            Err(Error::NoConvergence { .. } | Error::OutOfWindow { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn march(&self, origin: &LocusSample, tangent: Complex64) -> Result<(Vec<LocusSample>, ArcEnd)> {
        let opts = &self.opts;
        let mut samples: Vec<LocusSample> = Vec::new();
        let mut prev = *origin;
        let mut tangent = tangent;
        let mut h = opts.initial_step.clamp(opts.min_step, opts.max_step);
        let mut stalls = 0usize;
        let mut travelled = 0.0;
        loop {
            if samples.len() >= opts.max_samples {
                return Ok((samples, ArcEnd::SampleBudget));
            }
            let pred = prev.energy + tangent * h;
            if !self.window.contains(pred) {
                return Ok((samples, ArcEnd::WindowBoundary));
            }
            let normal = Complex64::i() * tangent;
            let accepted = match self.correct(pred, normal, h)? {
                Some(next) => {
                    let chord = next.energy - prev.energy;
                    let length = chord.norm();
                    let aligned = length > 0.0 && (chord / length * tangent.conj()).re > 0.8;
                    if !aligned {
                        None
                    } else if !self.window.contains(next.energy) {
                        return Ok((samples, ArcEnd::WindowBoundary));
                    } else if next.discriminant.re.abs() > 2.0 + opts.trace_tol {
                        match self.polish(&prev, &next)? {
                            Some(end) => {
                                samples.push(end);
                                return Ok((samples, ArcEnd::BranchPoint { energy: end.energy }));
                            }
                            None => None,
                        }
                    } else {
                        Some((next, chord / length, length))
                    }
                }
                None => None,
            };
            match accepted {
                Some((next, direction, length)) => {
                    samples.push(next);
                    travelled += length;
                    prev = next;
                    tangent = direction;
                    stalls = 0;
                    if travelled > 4.0 * h && (next.energy - origin.energy).norm() < 0.5 * h {
                        return Ok((samples, ArcEnd::Closed));
                    }
                    h = (h * 1.5).min(opts.max_step);
                }
                None => {
                    if h <= opts.min_step {
                        stalls += 1;
                        if stalls >= opts.stall_limit {
                            return Err(Error::Stall { at: prev.energy });
                        }
                    }
                    h = (h / 2.0).max(opts.min_step);
                }
            }
        }
    }
}

/// Traces the arc of `{E : Δ(E) ∈ [-2, 2]}` through `start` in both
/// directions.
///
/// A start slightly off the curve is first moved onto `Im Δ = 0` along the
/// normal direction.
pub fn trace_locus<P: Potential + ?Sized>(
    potential: &P,
    start: Complex64,
    window: &Window,
    opts: &LocusOptions,
) -> Result<SpectralLocus> {
    window.validate()?;
    if !window.contains(start) {
        return Err(Error::InvalidArgument(format!("start {start} outside the window")));
    }
    let tracer = Tracer {
        potential,
        window: *window,
        opts: *opts,
    };
    let slope = tracer.slope(start)?;
    if slope.norm() == 0.0 || !slope.is_finite() {
        return Err(Error::InvalidArgument(format!("Δ' vanishes at the start {start}")));
    }
    let d0 = tracer.delta(start)?;
    let origin = if d0.im.abs() < opts.trace_tol {
        LocusSample::new(start, d0)
    } else {
        let normal = Complex64::i() * slope.conj() / slope.norm();
        tracer
            .correct(start, normal, 0.25 * window.diameter())?
            .ok_or_else(|| Error::InvalidArgument(format!("no point of Im Δ = 0 found near {start}")))?
    };
    if !window.contains(origin.energy) || origin.discriminant.re.abs() > 2.0 + opts.trace_tol {
        return Err(Error::InvalidArgument(format!(
            "start {start} is not near the spectrum (Δ = {})",
            origin.discriminant
        )));
    }
    let slope = tracer.slope(origin.energy)?;
    if slope.norm() == 0.0 {
        return Err(Error::InvalidArgument(format!("Δ' vanishes at {}", origin.energy)));
    }
    // along conj(Δ') the discriminant changes by a real amount
    let tangent = slope.conj() / slope.norm();
    let (forward, end) = tracer.march(&origin, tangent)?;
    let (mut samples, start_end) = if end == ArcEnd::Closed {
        (Vec::new(), ArcEnd::Closed)
    } else {
        tracer.march(&origin, -tangent)?
    };
    samples.reverse();
    samples.push(origin);
    samples.extend(forward);
    Ok(SpectralLocus {
        arcs: vec![LocusArc {
            samples,
            start: start_end,
            end,
        }],
    })
}

/// `θ` in `[0, π]` for every real `Δ` in `[-2, 2]`, in units of `π`.
pub fn quasimomentum_fraction(discriminant: Complex64) -> f64 {
    (discriminant.re / 2.0).clamp(-1.0, 1.0).acos() / PI
}
