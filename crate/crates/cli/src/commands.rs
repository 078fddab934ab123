use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use ptbloch::divisor::{verify_divisor_ellipse, DivisorOptions, DivisorShape, EllipseReport};
use ptbloch::dubrovin::{
    integrate_flow, trace_formula_potential, DivisorState, FlowOptions, FlowPath, HyperellipticData,
};
use ptbloch::monodromy::discriminant_with_tol;
use ptbloch::newton::Window;
use ptbloch::perturbation::ResonanceReport;
use ptbloch::spectrum::{
    classify_resonance, resonance_window, trace_locus, ArcEnd, LocusArc, LocusOptions, SpectralLocus, SpectralOptions,
};
use ptbloch::Error;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::svg::{Figure, Marker, PALETTE};

/// Files written by a command and whether part of the work failed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub partial_failure: bool,
    pub warnings: Vec<String>,
}

pub struct Run {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    command: &'a str,
    config: &'a ExperimentConfig,
    results: T,
}

impl Run {
    fn write(&self, outcome: &mut Outcome, name: &str, contents: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        outcome.written.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&self, outcome: &mut Outcome, command: &str, results: T) -> Result<(), CliError> {
        let envelope = Envelope {
            command,
            config: &self.config,
            results,
        };
        let mut text = serde_json::to_string_pretty(&envelope).expect("results serialize to JSON");
        text.push('\n');
        self.write(outcome, &format!("{command}.json"), &text)
    }

    fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            integrator_tol: self.config.tolerances.integrator,
            newton: self.config.newton(),
            ..SpectralOptions::default()
        }
    }

    fn locus_options(&self) -> LocusOptions {
        LocusOptions {
            integrator_tol: self.config.tolerances.integrator,
            trace_tol: self.config.tolerances.trace,
            ..LocusOptions::default()
        }
    }
}

fn axis(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    (0..count)
        .map(|k| min + (max - min) * k as f64 / (count - 1) as f64)
        .collect()
}

pub fn discriminant(run: &Run) -> Result<Outcome, CliError> {
    let window = run.config.scan_window();
    let grid = &run.config.grid;
    let energies: Vec<Complex64> = axis(window.im_min, window.im_max, grid.im_points)
        .into_iter()
        .flat_map(|im| {
            axis(window.re_min, window.re_max, grid.re_points)
                .into_iter()
                .map(move |re| Complex64::new(re, im))
        })
        .collect();
    let tol = run.config.tolerances.integrator;
    let values = energies
        .par_iter()
        .map(|&e| discriminant_with_tol(&run.config.potential, e, tol))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("re_e,im_e,re_delta,im_delta\n");
    for (e, d) in energies.iter().zip(&values) {
        csv.push_str(&format!("{:.15e},{:.15e},{:.15e},{:.15e}\n", e.re, e.im, d.re, d.im));
    }
    let mut outcome = Outcome::default();
    run.write(&mut outcome, "discriminant.csv", &csv)?;
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct ArcSummary {
    start: ArcEnd,
    end: ArcEnd,
    samples: usize,
    real_axis_crossings: Vec<f64>,
    max_abs_imag: f64,
}

impl From<&LocusArc> for ArcSummary {
    fn from(arc: &LocusArc) -> Self {
        Self {
            start: arc.start,
            end: arc.end,
            samples: arc.samples.len(),
            real_axis_crossings: arc.real_axis_crossings(),
            max_abs_imag: arc.max_abs_imag(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ResonanceEntry {
    n: u32,
    report: Option<ResonanceReport>,
    arcs: Vec<ArcSummary>,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip)]
    locus: SpectralLocus,
}

/// Numerical trouble that is reported but does not fail the command.
fn is_soft(e: &Error) -> bool {
    matches!(
        e,
        Error::NoConvergence { .. } | Error::OutOfWindow { .. } | Error::Stall { .. }
    )
}

/// Start points for the locus tracer: inside the complex arc for a
/// transversal band, in the bands on both sides of a real gap, and just
/// below `E_n` otherwise.
fn locus_starts(report: &ResonanceReport) -> Vec<Complex64> {
    match report.numeric_branch_points {
        Some([a, b]) if a.im.abs() > 1e-9 || b.im.abs() > 1e-9 => {
            let mid = (a + b) / 2.0;
            vec![Complex64::new(mid.re, 0.5 * a.im.abs().max(b.im.abs()))]
        }
        Some([a, b]) if (a - b).norm() > 1e-6 => {
            let (lo, hi) = (a.re.min(b.re), a.re.max(b.re));
            let step = (0.25 * (hi - lo)).max(1e-3);
            vec![Complex64::new(lo - step, 0.0), Complex64::new(hi + step, 0.0)]
        }
        _ => vec![Complex64::new(report.e0 - 0.05 * report.e0.max(0.25), 0.0)],
    }
}

fn resonance_entry(run: &Run, n: u32) -> ResonanceEntry {
    let mut entry = ResonanceEntry {
        n,
        report: None,
        arcs: Vec::new(),
        warnings: Vec::new(),
        error: None,
        locus: SpectralLocus { arcs: Vec::new() },
    };
    let report = match classify_resonance(&run.config.potential, n, &run.spectral_options()) {
        Ok(r) => r,
        Err(e) if is_soft(&e) => {
            entry.warnings.push(format!("classification: {e}"));
            return entry;
        }
        Err(e) => {
            entry.error = Some(e.to_string());
            return entry;
        }
    };
    let window = run.config.window.unwrap_or_else(|| resonance_window(n));
    for start in locus_starts(&report) {
        match trace_locus(&run.config.potential, start, &window, &run.locus_options()) {
            Ok(locus) => entry.locus.arcs.extend(locus.arcs),
            Err(e) => entry.warnings.push(format!("locus from {start}: {e}")),
        }
    }
    entry.arcs = entry.locus.arcs.iter().map(ArcSummary::from).collect();
    entry.report = Some(report);
    entry
}

fn resonance_figure(entry: &ResonanceEntry) -> Figure {
    let verdict = entry
        .report
        .as_ref()
        .map(|r| format!("{:?}", r.verdict))
        .unwrap_or_else(|| "unclassified".into());
    let mut fig = Figure::new(format!("resonance n = {}: {verdict}", entry.n));
    for arc in &entry.locus.arcs {
        fig.line(arc.samples.iter().map(|s| s.energy).collect(), PALETTE[0], false);
    }
    if let Some(report) = &entry.report {
        for p in report.first_order_branch_points {
            fig.marker(p, Marker::Cross, PALETTE[1]);
        }
        for p in report.numeric_branch_points.into_iter().flatten() {
            fig.marker(p, Marker::Circle, PALETTE[2]);
        }
    }
    fig.legend("spectrum", PALETTE[0])
        .legend("first order", PALETTE[1])
        .legend("numeric", PALETTE[2]);
    fig
}

pub fn resonance(run: &Run) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    if run.config.resonances.is_empty() {
        return Ok(outcome);
    }
    let entries: Vec<ResonanceEntry> = run
        .config
        .resonances
        .par_iter()
        .map(|&n| resonance_entry(run, n))
        .collect();
    for entry in &entries {
        run.write(
            &mut outcome,
            &format!("resonance_n{}.svg", entry.n),
            &resonance_figure(entry).render(),
        )?;
        run.write(&mut outcome, &format!("locus_n{}.csv", entry.n), &entry.locus.to_csv())?;
        outcome
            .warnings
            .extend(entry.warnings.iter().map(|w| format!("n = {}: {w}", entry.n)));
        if let Some(report) = &entry.report {
            outcome
                .warnings
                .extend(report.warnings.iter().map(|w| format!("n = {}: {w}", entry.n)));
        }
        if let Some(e) = &entry.error {
            outcome.partial_failure = true;
            outcome.warnings.push(format!("n = {}: {e}", entry.n));
        }
    }
    run.write_json(&mut outcome, "resonance", &entries)?;
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct DivisorEntry {
    n: u32,
    report: Option<EllipseReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn divisor_figure(n: u32, report: &EllipseReport) -> Figure {
    let mut fig = Figure::new(format!("divisor trajectory, n = {n}"));
    fig.line(report.trajectory.points(), PALETTE[0], false);
    match &report.shape {
        DivisorShape::Ellipse(fit) => {
            fig.line(
                (0..=200).map(|k| fit.point_at(TAU * k as f64 / 200.0)).collect(),
                PALETTE[2],
                true,
            );
            for f in fit.foci {
                fig.marker(f, Marker::Cross, PALETTE[1]);
            }
        }
        DivisorShape::Segment { endpoints } => {
            fig.line(endpoints.to_vec(), PALETTE[2], true);
            for f in endpoints {
                fig.marker(*f, Marker::Cross, PALETTE[1]);
            }
        }
        DivisorShape::Constant { value } => {
            fig.marker(*value, Marker::Cross, PALETTE[1]);
        }
    }
    if let Some(prediction) = &report.prediction {
        let period = prediction.period();
        fig.line(
            (0..=200).map(|k| prediction.gamma(period * k as f64 / 200.0)).collect(),
            PALETTE[3],
            true,
        );
    }
    for p in report.numeric_branch_points.into_iter().flatten() {
        fig.marker(p, Marker::Circle, PALETTE[2]);
    }
    fig.legend("traced divisor", PALETTE[0])
        .legend("fit / numeric edges", PALETTE[2])
        .legend("foci", PALETTE[1])
        .legend("first order", PALETTE[3]);
    fig
}

pub fn divisor(run: &Run) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    if run.config.resonances.is_empty() {
        return Ok(outcome);
    }
    let opts = DivisorOptions {
        integrator_tol: run.config.tolerances.integrator,
        newton: run.config.newton(),
        steps: run.config.divisor_steps,
        scales: run.config.scales.clone(),
        ..DivisorOptions::default()
    };
    let entries: Vec<DivisorEntry> = run
        .config
        .resonances
        .par_iter()
        .map(|&n| match verify_divisor_ellipse(&run.config.potential, n, &opts) {
            Ok(report) => DivisorEntry {
                n,
                report: Some(report),
                error: None,
            },
            Err(e) => DivisorEntry {
                n,
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    for entry in &entries {
        match (&entry.report, &entry.error) {
            (Some(report), _) => {
                run.write(
                    &mut outcome,
                    &format!("divisor_n{}.csv", entry.n),
                    &report.trajectory.to_csv(),
                )?;
                run.write(
                    &mut outcome,
                    &format!("divisor_n{}.svg", entry.n),
                    &divisor_figure(entry.n, report).render(),
                )?;
            }
            (None, Some(e)) => {
                outcome.partial_failure = true;
                outcome.warnings.push(format!("n = {}: {e}", entry.n));
            }
            (None, None) => unreachable!("an entry has either a report or an error"),
        }
    }
    run.write_json(&mut outcome, "divisor", &entries)?;
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct DubrovinSummary {
    genus: usize,
    span: [f64; 2],
    samples: usize,
    initial: DivisorState,
    last: DivisorState,
    max_sheet_defect: f64,
    /// Samples tagged as near a branch point, per divisor point.
    near_branch_samples: Vec<usize>,
    /// `[min, max]` of the real part of the trace-formula potential.
    potential_re_range: [f64; 2],
}

fn dubrovin_figure(data: &HyperellipticData, path: &FlowPath) -> Figure {
    let mut fig = Figure::new(format!("Dubrovin flow, genus {}", data.genus()));
    let g = data.genus();
    for k in 0..g {
        fig.line(
            path.samples.iter().map(|s| s.state.points[k].gamma).collect(),
            PALETTE[k % 2 * 3],
            false,
        );
    }
    for b in data.branch_points() {
        fig.marker(*b, Marker::Cross, PALETTE[1]);
    }
    for p in &path.samples[0].state.points {
        fig.marker(p.gamma, Marker::Circle, PALETTE[2]);
    }
    fig.legend("divisor", PALETTE[0])
        .legend("branch points", PALETTE[1])
        .legend("initial divisor", PALETTE[2]);
    fig
}

pub fn dubrovin(run: &Run) -> Result<Outcome, CliError> {
    let cfg = run
        .config
        .dubrovin
        .as_ref()
        .ok_or_else(|| CliError::Config("the dubrovin command needs a `dubrovin` section".into()))?;
    let data = HyperellipticData::new(cfg.branch_points.iter().map(|b| b.value()).collect())
        .map_err(|e| CliError::Config(format!("`dubrovin.branch_points`: {e}")))?;
    let seeds: Vec<_> = cfg.divisor.iter().map(|s| (s.gamma.value(), s.sheet)).collect();
    let state = DivisorState::on_sheets(&data, &seeds).map_err(|e| match e {
        Error::InvalidArgument(msg) => CliError::Config(format!("`dubrovin.divisor`: {msg}")),
        other => CliError::Numerical(other),
    })?;
    let opts = FlowOptions {
        tol: run.config.tolerances.integrator,
        branch_tol: cfg.branch_tol,
        samples: cfg.samples,
    };
    let path = integrate_flow(&data, &state, (cfg.span[0], cfg.span[1]), &opts)?;
    let potential = trace_formula_potential(&data, &path);
    let summary = DubrovinSummary {
        genus: data.genus(),
        span: cfg.span,
        samples: path.samples.len(),
        initial: state,
        last: path.last().clone(),
        max_sheet_defect: path.max_sheet_defect(&data),
        near_branch_samples: (0..data.genus())
            .map(|k| path.samples.iter().filter(|s| s.near_branch_point[k]).count())
            .collect(),
        potential_re_range: potential
            .iter()
            .fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], (_, u)| {
                [lo.min(u.re), hi.max(u.re)]
            }),
    };
    let mut outcome = Outcome::default();
    run.write(&mut outcome, "dubrovin.csv", &path.to_csv())?;
    run.write(&mut outcome, "dubrovin.svg", &dubrovin_figure(&data, &path).render())?;
    run.write_json(&mut outcome, "dubrovin", &summary)?;
    Ok(outcome)
}

pub fn locus(run: &Run) -> Result<Outcome, CliError> {
    let start = run
        .config
        .locus
        .as_ref()
        .ok_or_else(|| CliError::Config("the locus command needs `locus.start`".into()))?
        .start
        .value();
    let window: Window = run.config.scan_window();
    let locus = trace_locus(&run.config.potential, start, &window, &run.locus_options())?;
    let mut fig = Figure::new(format!("spectral locus through {start}"));
    for arc in &locus.arcs {
        fig.line(arc.samples.iter().map(|s| s.energy).collect(), PALETTE[0], false);
        for end in [arc.start, arc.end] {
            if let ArcEnd::BranchPoint { energy } = end {
                fig.marker(energy, Marker::Circle, PALETTE[2]);
            }
        }
    }
    fig.marker(start, Marker::Cross, PALETTE[1]);
    let mut outcome = Outcome::default();
    run.write(&mut outcome, "locus.csv", &locus.to_csv())?;
    run.write(&mut outcome, "locus.svg", &fig.render())?;
    let arcs: Vec<ArcSummary> = locus.arcs.iter().map(ArcSummary::from).collect();
    run.write_json(&mut outcome, "locus", &arcs)?;
    Ok(outcome)
}

/// Output directory: command line first, then the config, then `.`.
pub fn output_dir(cli: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}
