//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit status
//! when any criterion fails.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptbloch::divisor::{trace_divisor, uniform_grid, verify_divisor_ellipse, DivisorOptions, DivisorShape};
use ptbloch::dubrovin::{
    detect_period, integrate_flow, loop_closure, reconstructed_potential, DivisorState, FlowOptions, HyperellipticData,
    Sheet,
};
use ptbloch::monodromy::{discriminant, monodromy, DEFAULT_TOL};
use ptbloch::newton::Window;
use ptbloch::perturbation::{block_eigenvalues, hill_spectrum_in_window, resonant_block};
use ptbloch::spectrum::{
    classify_resonance, find_branch_points, resonance_window, seeds_for_resonance, trace_locus, ArcEnd, LocusOptions,
    SpectralOptions,
};
use ptbloch::{divisor::log_log_slope, PotentialSpec, Result};

const FREE_TOL: f64 = 1e-9;
const FREE_BUDGET: Duration = Duration::from_secs(5);
const WRONSKIAN_TOL: f64 = 1e-9;
const GAP_SLOPE: (f64, f64) = (1.7, 2.3);
const GAP_ABS_TOL: f64 = 1e-3;
const REAL_TOL: f64 = 1e-10;
const CONJUGATE_TOL: f64 = 1e-8;
const FIRST_ORDER_TOL: f64 = 5e-3;
const CROSSING_TOL: f64 = 2e-2;
const FOCI_TOL: f64 = 5e-3;
const RMS_TOL: f64 = 1e-3;
const GAMMA0_IMAG_TOL: f64 = 1e-6;
const ELLIPSE_SLOPE: (f64, f64) = (1.7, 2.3);
const ELLIPSE_BUDGET: Duration = Duration::from_secs(60);
const LACUNA_IMAG_TOL: f64 = 1e-8;
const DUBROVIN_TOL: f64 = 1e-7;
const LOOP_TOL: f64 = 1e-5;
const HILL_TOL: f64 = 1e-6;
const HILL_DOUBLING_TOL: f64 = 1e-8;
const BLOCK_TOL: f64 = 1e-13;
const BLOCK_DRAWS: usize = 1000;
const BLOCK_SEED: u64 = 0x5eed_0009;

type Check = fn() -> Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
}

/// 20 × 10 points of `[-1, 10] + i[-0.5, 0.5]` with `|E| ≥ 1e-3`.
fn energy_grid() -> Vec<Complex64> {
    linspace(-1.0, 10.0, 20)
        .flat_map(|re| linspace(-0.5, 0.5, 10).map(move |im| c(re, im)))
        .filter(|e| e.norm() >= 1e-3)
        .collect()
}

fn cos01() -> PotentialSpec {
    PotentialSpec::new([(1, 0.05), (-1, 0.05)]).unwrap()
}

fn pt() -> PotentialSpec {
    PotentialSpec::new([(1, 0.2), (-1, -0.05)]).unwrap()
}

fn sorted_by_re(mut pair: [Complex64; 2]) -> [Complex64; 2] {
    pair.sort_by(|a, b| a.re.total_cmp(&b.re));
    pair
}

fn free_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let grid = energy_grid();
    let mut worst = 0.0f64;
    for &e in &grid {
        let exact = 2.0 * (TAU * e.sqrt()).cos();
        worst = worst.max((discriminant(&PotentialSpec::zero(), e)? - exact).norm());
    }
    let elapsed = start.elapsed();
    Ok(Outcome {
        pass: grid.len() == 200 && worst < FREE_TOL && elapsed < FREE_BUDGET,
        detail: format!("{} points, max error {worst:.2e}, {elapsed:.2?}", grid.len()),
    })
}

fn wronskian() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for spec in [cos01(), pt()] {
        for &e in &energy_grid() {
            worst = worst.max((monodromy(&spec, e, 0.0, DEFAULT_TOL)?.determinant() - 1.0).norm());
        }
    }
    Ok(Outcome {
        pass: worst < WRONSKIAN_TOL,
        detail: format!("max |det M - 1| = {worst:.2e}"),
    })
}

fn gap_case() -> Result<Outcome> {
    let opts = SpectralOptions::default();
    let mut rows = Vec::new();
    let mut max_imag = 0.0f64;
    for eps in [0.05, 0.025, 0.0125] {
        let spec = PotentialSpec::new([(1, eps), (-1, eps)])?;
        let report = classify_resonance(&spec, 1, &opts)?;
        let Some(pair) = report.numeric_branch_points else {
            return Ok(Outcome {
                pass: false,
                detail: format!("no branch pair at eps = {eps}"),
            });
        };
        let [lo, hi] = sorted_by_re(pair);
        max_imag = max_imag.max(lo.im.abs()).max(hi.im.abs());
        let error = (lo.re - (0.25 - eps)).abs().max((hi.re - (0.25 + eps)).abs());
        rows.push((eps, error));
    }
    let slope = log_log_slope(&rows).unwrap_or(f64::NAN);
    let finest = rows.last().map_or(f64::NAN, |r| r.1);
    Ok(Outcome {
        pass: max_imag < REAL_TOL && (GAP_SLOPE.0..=GAP_SLOPE.1).contains(&slope) && finest < GAP_ABS_TOL,
        detail: format!("slope {slope:.3}, error at 0.0125 {finest:.2e}, max |Im| {max_imag:.1e}"),
    })
}

fn transversal_band() -> Result<Outcome> {
    let spec = pt();
    let report = classify_resonance(&spec, 1, &SpectralOptions::default())?;
    let Some(pair) = report.numeric_branch_points else {
        return Ok(Outcome {
            pass: false,
            detail: "no branch pair".into(),
        });
    };
    let conjugacy = (pair[0] - pair[1].conj()).norm();
    let mismatch = report.mismatch.unwrap_or(f64::INFINITY);

    let window = Window::new(0.0, 0.5, -0.3, 0.3)?;
    let locus = trace_locus(&spec, c(0.25, 0.05), &window, &LocusOptions::default())?;
    let arc = &locus.arcs[0];
    let bounded = matches!(arc.start, ArcEnd::BranchPoint { .. }) && matches!(arc.end, ArcEnd::BranchPoint { .. });
    let crossing = arc
        .real_axis_crossings()
        .into_iter()
        .map(|x| (x - 0.26).abs())
        .fold(f64::INFINITY, f64::min);

    Ok(Outcome {
        pass: conjugacy < CONJUGATE_TOL && mismatch < FIRST_ORDER_TOL && bounded && crossing < CROSSING_TOL,
        detail: format!(
            "conjugacy {conjugacy:.1e}, first-order mismatch {mismatch:.4e}, crossing offset {crossing:.2e}"
        ),
    })
}

fn ellipse() -> Result<Outcome> {
    let start = Instant::now();
    let report = verify_divisor_ellipse(&pt(), 1, &DivisorOptions::default())?;
    let elapsed = start.elapsed();
    let rms = match &report.shape {
        DivisorShape::Ellipse(fit) => fit.rms_residual,
        _ => f64::INFINITY,
    };
    let foci = report.focal_mismatch.unwrap_or(f64::INFINITY);
    let slope = report.scaling_slope.unwrap_or(f64::NAN);
    Ok(Outcome {
        pass: foci < FOCI_TOL
            && rms < RMS_TOL
            && report.gamma0_imag < GAMMA0_IMAG_TOL
            && (ELLIPSE_SLOPE.0..=ELLIPSE_SLOPE.1).contains(&slope)
            && elapsed < ELLIPSE_BUDGET,
        detail: format!(
            "focal mismatch {foci:.3e}, rms/semi-major {rms:.3e}, |Im γ(0)| {:.1e}, slope {slope:.3}, {elapsed:.2?}",
            report.gamma0_imag
        ),
    })
}

fn real_lacuna() -> Result<Outcome> {
    let spec = cos01();
    let opts = DivisorOptions::default();
    let traj = trace_divisor(&spec, 1, &uniform_grid(opts.steps), &opts)?;
    let edges = find_branch_points(
        &spec,
        &resonance_window(1),
        &seeds_for_resonance(&spec, 1),
        &SpectralOptions::default(),
    )?
    .energies();
    let (lo, hi) = match edges.as_slice() {
        [a, b] => (a.re.min(b.re), a.re.max(b.re)),
        other => {
            return Ok(Outcome {
                pass: false,
                detail: format!("expected two gap edges, found {}", other.len()),
            })
        }
    };
    let imag = traj.max_abs_imag();
    let outside = traj
        .points()
        .iter()
        .map(|g| (lo - g.re).max(g.re - hi).max(0.0))
        .fold(0.0, f64::max);
    Ok(Outcome {
        pass: imag < LACUNA_IMAG_TOL && outside < LACUNA_IMAG_TOL,
        detail: format!("max |Im γ| {imag:.1e}, gap [{lo:.6}, {hi:.6}], excursion {outside:.1e}"),
    })
}

fn dubrovin_suite() -> Result<Outcome> {
    let data = HyperellipticData::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)])?;
    let state = DivisorState::on_sheets(&data, &[(c(1.5, 0.0), Sheet::Plus)])?;
    let opts = FlowOptions::default();

    let forward = integrate_flow(&data, &state, (0.0, 20.0), &opts)?;
    let excursion = forward
        .samples
        .iter()
        .map(|s| {
            let g = s.state.points[0].gamma;
            (1.0 - g.re).max(g.re - 2.0).max(0.0).max(g.im.abs())
        })
        .fold(0.0, f64::max);
    let back = integrate_flow(&data, forward.last(), (20.0, 0.0), &opts)?;
    let (p0, p1) = (state.points[0], back.last().points[0]);
    let reversal = (p0.gamma - p1.gamma).norm().max((p0.w - p1.w).norm());

    let period = detect_period(&data, &state, 4.0, &opts)?;
    let m = 512;
    let potential = reconstructed_potential(&data, &state, period, m, &opts)?;
    let path = integrate_flow(&data, &state, (0.0, period), &FlowOptions { samples: m, ..opts })?;
    let picks: Vec<usize> = (0..5).map(|k| k * m / 5 + 13).collect();
    let closure = loop_closure(&potential, &path, &picks, DEFAULT_TOL)?
        .iter()
        .map(|(_, gamma, dirichlet)| (gamma - dirichlet).norm())
        .fold(0.0, f64::max);

    Ok(Outcome {
        pass: excursion < DUBROVIN_TOL && reversal < DUBROVIN_TOL && closure < LOOP_TOL,
        detail: format!(
            "excursion {excursion:.1e}, reversal {reversal:.1e}, period {period:.10}, loop closure {closure:.1e}"
        ),
    })
}

fn hill_consistency() -> Result<Outcome> {
    let spec = cos01();
    let window = resonance_window(1);
    let hill = hill_spectrum_in_window(&spec, 0.5, 24, &window)?;
    let set = find_branch_points(
        &spec,
        &window,
        &seeds_for_resonance(&spec, 1),
        &SpectralOptions::default(),
    )?;
    let agreement = hill.values.iter().map(|z| set.distance_to(*z)).fold(0.0, f64::max);
    Ok(Outcome {
        pass: hill.values.len() == 2 && agreement < HILL_TOL && hill.doubling_shift < HILL_DOUBLING_TOL,
        detail: format!(
            "{} eigenvalues, max distance {agreement:.1e}, doubling shift {:.1e}",
            hill.values.len(),
            hill.doubling_shift
        ),
    })
}

fn block_algebra() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(BLOCK_SEED);
    let mut worst = 0.0f64;
    for _ in 0..BLOCK_DRAWS {
        let n: u32 = rng.random_range(1..=6);
        let delta: f64 = rng.random_range(-0.5..0.5);
        let c_n: f64 = rng.random_range(-0.5..0.5);
        let c_m: f64 = rng.random_range(-0.5..0.5);
        let spec = PotentialSpec::new([(n as i32, c_n), (-(n as i32), c_m)])?;
        let block = resonant_block(&spec, n, delta);
        let matrix = DMatrix::from_fn(2, 2, |i, j| block[i][j]);
        let Some(oracle) = matrix.eigenvalues() else {
            return Ok(Outcome {
                pass: false,
                detail: "reference Schur decomposition failed".into(),
            });
        };
        let (a, b) = block_eigenvalues(n, delta, c_n, c_m);
        let direct = (a - oracle[0]).norm().max((b - oracle[1]).norm());
        let swapped = (a - oracle[1]).norm().max((b - oracle[0]).norm());
        worst = worst.max(direct.min(swapped));
    }
    Ok(Outcome {
        pass: worst < BLOCK_TOL,
        detail: format!("{BLOCK_DRAWS} draws, max error {worst:.2e}"),
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("free-operator discriminant", free_oracle),
        ("wronskian conservation", wronskian),
        ("gap case scaling", gap_case),
        ("transversal band", transversal_band),
        ("divisor ellipse", ellipse),
        ("real lacuna", real_lacuna),
        ("genus-one Dubrovin flow", dubrovin_suite),
        ("Hill matrix vs monodromy", hill_consistency),
        ("resonant block eigenvalues", block_algebra),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !outcome.pass {
            failures += 1;
        }
        println!(
            "{} {}. {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
