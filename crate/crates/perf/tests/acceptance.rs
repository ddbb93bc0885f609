//! Acceptance suite: one check per headline requirement, each printing a
//! single `[PASS]` or `[FAIL]` line. Checks run one at a time so that the
//! timed ones do not share the CPU.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use atfcm_cli::commands::bench::{bench_pbin, crossover, loglog_slope, write_rows, BenchRow};
use atfcm_cli::commands::optimize::{optimize, run_dir, stabilization_generation, OptimizeOptions, OptimizeOutcome};
use atfcm_cli::commands::validate::run_validation;
use atfcm_core::occupancy::{congestion_pmf_direct, congestion_pmf_enumerated, congestion_pmf_fft};
use atfcm_core::prob::DiscretePdf;
use atfcm_core::{dominates, Evaluator, McConfig, OccupancyField, PmfMethod};
use atfcm_perf::{grid_evaluator, x_evaluator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PMF_VECTORS: usize = 1000;
const PMF_MAX_N: usize = 20;
const ENUMERATION_MAX_N: usize = 12;
const FFT_TOLERANCE: f64 = 1e-9;
const ENUMERATION_TOLERANCE: f64 = 1e-12;
const PMF_BUDGET: Duration = Duration::from_secs(10);

const SPOT_TOLERANCE: f64 = 1e-12;

const MC_SAMPLES: usize = 100_000;
const MC_SEED: u64 = 0;
const MC_BUDGET: Duration = Duration::from_secs(120);

const PARTITION_TOLERANCE: f64 = 1e-6;
const PARTITION_RANDOM_PLANS: usize = 20;

const NOMINAL_CROSSING_MIN: f64 = 30.0;
const SHAPE_TOLERANCE: f64 = 1e-12;
const CENTRAL_SECTOR: &str = "C";

const OPTIMIZE_SEED: u64 = 0;
const STABLE_FRACTION: f64 = 0.99;
const STABLE_BY_GENERATION: usize = 300;
const STABLE_RUNS_REQUIRED: usize = 9;
const OPTIMIZE_BUDGET: Duration = Duration::from_secs(30 * 60);

const BENCH_N_MAX: usize = 512;
const BENCH_BATCH: Duration = Duration::from_millis(20);
const SLOPE_FROM_N: usize = 32;
const QUADRATIC_SLOPE: (f64, f64) = (1.8, 2.2);
const SPEEDUP_AT_N: usize = 300;
const REQUIRED_SPEEDUP: f64 = 10.0;

const GRID_INVARIANT_TOLERANCE: f64 = 1e-9;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line outside the test harness capture, then fails
/// the test if the check did not pass.
fn verdict(name: &str, pass: bool, detail: String) {
    let line = format!("[{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn artifacts(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn pmf_fft_matches_direct() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut fft_err, mut enum_err, mut enumerated) = (0.0f64, 0.0f64, 0);
    for _ in 0..PMF_VECTORS {
        let n = rng.random_range(1..=PMF_MAX_N);
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let direct = congestion_pmf_direct(&p, usize::MAX).unwrap().pmf;
        fft_err = fft_err.max(max_abs_diff(&congestion_pmf_fft(&p).unwrap().pmf, &direct));
        if n <= ENUMERATION_MAX_N {
            enum_err = enum_err.max(max_abs_diff(&congestion_pmf_enumerated(&p).unwrap().pmf, &direct));
            enumerated += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = fft_err < FFT_TOLERANCE && enum_err <= ENUMERATION_TOLERANCE && elapsed < PMF_BUDGET;
    verdict(
        "PMF equivalence",
        pass,
        format!(
            "{PMF_VECTORS} vectors N<=20, max|fft-direct|={fft_err:.2e} (<{FFT_TOLERANCE:e}), \
             max|enum-direct|={enum_err:.2e} over {enumerated} vectors N<=12 (<={ENUMERATION_TOLERANCE:e}), \
             {:.2}s (<{}s)",
            elapsed.as_secs_f64(),
            PMF_BUDGET.as_secs()
        ),
    );
}

#[test]
fn pmf_spot_value_three_fair_flights() {
    let _guard = serial();
    let p = [0.5; 3];
    // Brute force over the 8 in/out outcomes.
    let brute: f64 = (0u32..8)
        .filter(|mask| mask.count_ones() == 1)
        .map(|mask| (0..3).map(|i| if mask >> i & 1 == 1 { p[i] } else { 1.0 - p[i] }).product::<f64>())
        .sum();
    let direct = congestion_pmf_direct(&p, usize::MAX).unwrap().pmf[1];
    let fft = congestion_pmf_fft(&p).unwrap().pmf[1];
    let pass = [brute, direct, fft].iter().all(|v| (v - 0.375).abs() <= SPOT_TOLERANCE);
    verdict(
        "PMF spot value",
        pass,
        format!("Pr(K=1) brute={brute} direct={direct} fft={fft} (0.375 +- {SPOT_TOLERANCE:e})"),
    );
}

#[test]
fn monte_carlo_agrees_with_closed_form() {
    let _guard = serial();
    let ev = x_evaluator(PmfMethod::Auto);
    let start = Instant::now();
    let (rows, summary) =
        run_validation(&ev, &ev.nominal_intents(), &McConfig { samples: MC_SAMPLES, seed: MC_SEED }).unwrap();
    let elapsed = start.elapsed();
    let per_quantity: Vec<String> = summary
        .quantities
        .iter()
        .map(|q| format!("{:?} {}/{} max dev {:.4}", q.quantity, q.rows - q.failures, q.rows, q.max_deviation))
        .collect();
    let pass = summary.failures == 0 && !rows.is_empty() && elapsed < MC_BUDGET;
    verdict(
        "Monte-Carlo validation",
        pass,
        format!(
            "X-instance, {MC_SAMPLES} samples seed {MC_SEED}: {} rows, {} outside 4-sigma+edge \
             ({} outside 4-sigma alone), max deviation/bound {:.3}; {}; {:.1}s (<{}s)",
            summary.rows,
            summary.failures,
            summary.strict_failures,
            summary.max_bound_ratio,
            per_quantity.join(", "),
            elapsed.as_secs_f64(),
            MC_BUDGET.as_secs()
        ),
    );
}

/// Largest deviation from 1 of the summed presence over airborne-certain
/// bins, and the largest total anywhere.
fn partition_error(ev: &Evaluator, marginals: &[Vec<DiscretePdf>], field: &OccupancyField) -> (f64, f64, usize) {
    let (mut dev, mut top, mut bins) = (0.0f64, 0.0f64, 0);
    for (f, m) in ev.scenario().flights.iter().zip(marginals) {
        let cs = f.sector_crossings().unwrap();
        let certain = m[cs[0].entry].support_hi() + 1..m[cs.last().unwrap().exit].support_lo();
        for bin in 0..ev.grid().horizon {
            let total: f64 = field
                .sectors
                .iter()
                .flat_map(|s| s.presence.iter().filter(|c| c.flight == f.id))
                .map(|c| c.at(bin))
                .sum();
            top = top.max(total);
            if certain.contains(&bin) {
                dev = dev.max((total - 1.0).abs());
                bins += 1;
            }
        }
    }
    (dev, top, bins)
}

#[test]
fn presence_partitions_across_sectors() {
    let _guard = serial();
    let ev = x_evaluator(PmfMethod::Auto);
    let mut plans = vec![ev.nominal_intents()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..PARTITION_RANDOM_PLANS {
        let g: Vec<f64> = (0..ev.dimension()).map(|_| rng.random::<f64>()).collect();
        plans.push(ev.decode(&g).unwrap());
    }
    let (mut dev, mut top, mut bins) = (0.0f64, 0.0f64, 0);
    for plan in &plans {
        let m = ev.marginals(plan).unwrap();
        let (d, t, b) = partition_error(&ev, &m, &ev.field(&m).unwrap());
        dev = dev.max(d);
        top = top.max(t);
        bins += b;
    }
    let pass = bins > 0 && dev <= PARTITION_TOLERANCE && top <= 1.0 + PARTITION_TOLERANCE;
    verdict(
        "Sector partition",
        pass,
        format!(
            "X-instance nominal + {PARTITION_RANDOM_PLANS} random plans: {bins} airborne-certain flight-bins, \
             max|sum-1|={dev:.2e} (<={PARTITION_TOLERANCE:e}), max sum anywhere {top:.9}"
        ),
    );
}

/// Local maxima of `values` (first bin of each plateau), with values.
fn local_peaks(values: &[f64]) -> Vec<(usize, f64)> {
    let mut peaks = Vec::new();
    let mut b = 0;
    while b < values.len() {
        let mut e = b;
        while e + 1 < values.len() && values[e + 1] == values[b] {
            e += 1;
        }
        let left = b == 0 || values[b - 1] < values[b];
        let right = e + 1 == values.len() || values[e + 1] < values[b];
        if left && right && values[b] > 0.0 {
            peaks.push((b, values[b]));
        }
        b = e + 1;
    }
    peaks
}

#[test]
fn marginal_and_congestion_shapes() {
    let _guard = serial();
    let ev = x_evaluator(PmfMethod::Auto);
    let m = ev.marginals(&ev.nominal_intents()).unwrap();
    let field = ev.field(&m).unwrap();

    let mut widths_ok = true;
    let mut spacings = Vec::new();
    for (f, fm) in ev.scenario().flights.iter().zip(&m) {
        widths_ok &= fm.windows(2).all(|w| w[1].support_width() >= w[0].support_width());
        for c in f.sector_crossings().unwrap() {
            let steps = (fm[c.exit].mode_bin() as f64 - fm[c.entry].mode_bin() as f64) * ev.grid().step_f64();
            spacings.push(steps);
        }
    }
    let mean_spacing = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let min_spacing = spacings.iter().copied().fold(f64::INFINITY, f64::min);
    let max_spacing = spacings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spacing_ok = mean_spacing > NOMINAL_CROSSING_MIN && min_spacing >= NOMINAL_CROSSING_MIN;

    let central = field.sector(CENTRAL_SECTOR).expect("X-instance has a central sector").congestion_probability();
    let peaks = local_peaks(&central);
    let (global_bin, _) = central
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (b, &v)| if v > acc.1 { (b, v) } else { acc });
    let peaks_ok = !peaks.is_empty() && peaks.windows(2).all(|w| w[1].1 <= w[0].1 + SHAPE_TOLERANCE);
    let tail_ok = central[global_bin..].windows(2).all(|w| w[1] <= w[0] + SHAPE_TOLERANCE);

    let widths: Vec<usize> = m[0].iter().map(|p| p.support_width()).collect();
    let peak_list: Vec<String> = peaks.iter().map(|(b, v)| format!("{v:.3}@{b}")).collect();
    let pass = widths_ok && spacing_ok && peaks_ok && tail_ok;
    verdict(
        "Marginal and congestion shape",
        pass,
        format!(
            "support widths non-decreasing on every flight: {widths_ok} (first flight {widths:?}); \
             mode spacing across {} sector crossings min {min_spacing} mean {mean_spacing:.2} max {max_spacing} \
             (mean >{NOMINAL_CROSSING_MIN}, each >={NOMINAL_CROSSING_MIN}); central congestion peaks [{}] \
             non-increasing: {peaks_ok}, non-increasing after global peak at bin {global_bin}: {tail_ok}",
            spacings.len(),
            peak_list.join(", ")
        ),
    );
}

struct DefaultRuns {
    dir: PathBuf,
    outcome: OptimizeOutcome,
    elapsed: Duration,
}

/// The eleven default runs, shared by the optimizer and determinism checks.
fn default_runs() -> &'static DefaultRuns {
    static RUNS: OnceLock<DefaultRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let ev = x_evaluator(PmfMethod::Auto);
        let dir = artifacts("optimize-a");
        let start = Instant::now();
        let outcome = optimize(&ev, &OptimizeOptions::new(OPTIMIZE_SEED), &dir).unwrap();
        DefaultRuns { dir, outcome, elapsed: start.elapsed() }
    })
}

#[test]
fn optimizer_converges_to_a_trade_off_front() {
    let _guard = serial();
    let runs = default_runs();
    let results = &runs.outcome.results;
    let config = results[0].config;
    let mut monotone = 0;
    let mut stable = 0;
    let mut non_dominated = 0;
    let mut negative = 0;
    let mut details = Vec::new();
    for r in results {
        let hv_up = r.trace.windows(2).all(|w| w[1].hypervolume >= w[0].hypervolume);
        let g99 = stabilization_generation(&r.trace, STABLE_FRACTION);
        let pts = r.archive.points();
        let nd = pts.iter().all(|a| pts.iter().all(|b| !dominates(a, b)));
        let rho = r.archive.correlation();
        monotone += hv_up as usize;
        stable += g99.is_some_and(|g| g <= STABLE_BY_GENERATION) as usize;
        non_dominated += nd as usize;
        negative += rho.is_some_and(|c| c < 0.0) as usize;
        details.push(format!(
            "seed {} g99={} |A|={} r={}",
            r.config.seed,
            g99.map_or("-".into(), |g| g.to_string()),
            pts.len(),
            rho.map_or("-".into(), |c| format!("{c:.3}"))
        ));
    }
    let n = results.len();
    let pass = n == 11
        && monotone == n
        && stable >= STABLE_RUNS_REQUIRED
        && non_dominated == n
        && negative == n
        && runs.elapsed <= OPTIMIZE_BUDGET;
    verdict(
        "Optimizer behaviour",
        pass,
        format!(
            "{n} runs pop {} gen {} SBX eta {} p {} mutation eta {} p {}: hypervolume non-decreasing {monotone}/{n}, \
             >={}% of final by gen {STABLE_BY_GENERATION} {stable}/{n} (need {STABLE_RUNS_REQUIRED}), \
             archives non-dominated {non_dominated}/{n}, Pearson<0 {negative}/{n}; {:.0}s (<={}s); [{}]",
            config.population,
            config.generations,
            config.sbx_eta,
            config.crossover_prob,
            config.mutation_eta,
            config.mutation_prob,
            STABLE_FRACTION * 100.0,
            runs.elapsed.as_secs_f64(),
            OPTIMIZE_BUDGET.as_secs(),
            details.join("; ")
        ),
    );
}

fn row_at(rows: &[BenchRow], n: usize) -> Option<&BenchRow> {
    rows.iter().find(|r| r.n == n)
}

#[test]
fn fft_outpaces_direct_method() {
    let _guard = serial();
    let rows = bench_pbin(BENCH_N_MAX, BENCH_BATCH).unwrap();
    let dir = artifacts("bench");
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("pbin.csv");
    write_rows(&csv, &rows).unwrap();
    let slope = loglog_slope(&rows, SLOPE_FROM_N, |r| r.direct_ns);
    let fft_slope = loglog_slope(&rows, SLOPE_FROM_N, |r| r.fft_ns);
    let cross = crossover(&rows);
    let at = row_at(&rows, SPEEDUP_AT_N).copied();
    let quadratic = slope.is_some_and(|s| (QUADRATIC_SLOPE.0..=QUADRATIC_SLOPE.1).contains(&s));
    let speedup = at.map_or(0.0, |r| r.speedup());
    let pass = quadratic && cross.is_some() && speedup >= REQUIRED_SPEEDUP;
    verdict(
        "FFT performance ordering",
        pass,
        format!(
            "direct log-log slope N>={SLOPE_FROM_N} {} (in [{}, {}]), fft slope {}; crossover {}; \
             at N={SPEEDUP_AT_N} direct {:.1}us fft {:.1}us speedup {speedup:.2}x (>={REQUIRED_SPEEDUP}x); csv {}",
            slope.map_or("-".into(), |s| format!("{s:.2}")),
            QUADRATIC_SLOPE.0,
            QUADRATIC_SLOPE.1,
            fft_slope.map_or("-".into(), |s| format!("{s:.2}")),
            cross.map_or("none (direct faster at the largest N)".into(), |n| format!("N={n}")),
            at.map_or(f64::NAN, |r| r.direct_ns / 1e3),
            at.map_or(f64::NAN, |r| r.fft_ns / 1e3),
            csv.display()
        ),
    );
}

#[test]
fn grid_instance_evaluates_consistently() {
    let _guard = serial();
    let ev = grid_evaluator(PmfMethod::Fft);
    let start = Instant::now();
    let intents = ev.nominal_intents();
    let m = ev.marginals(&intents).unwrap();
    let field = ev.field(&m).unwrap();
    let c1 = ev.c1(&m);
    let c2 = ev.c2_from_field(&field);
    let elapsed = start.elapsed();

    let tol = GRID_INVARIANT_TOLERANCE;
    let mass_err = m.iter().flatten().map(|p| (p.masses().iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let (partition_dev, partition_top, certain_bins) = partition_error(&ev, &m, &field);
    let presence_in_range = field
        .sectors
        .iter()
        .flat_map(|s| &s.presence)
        .flat_map(|c| &c.values)
        .all(|&p| (0.0..=1.0).contains(&p));
    let (mut pmf_mass, mut mean_err, mut max_n) = (0.0f64, 0.0f64, 0);
    for s in &field.sectors {
        for (pmf, &e) in s.pmfs.iter().zip(&s.expected) {
            pmf_mass = pmf_mass.max((pmf.pmf.iter().sum::<f64>() - 1.0).abs());
            mean_err = mean_err.max((pmf.mean() - e).abs());
            max_n = max_n.max(pmf.n_max());
        }
    }
    let direct = grid_evaluator(PmfMethod::Direct);
    let direct_field = direct.field(&m).unwrap();
    let fft_vs_direct = field
        .sectors
        .iter()
        .zip(&direct_field.sectors)
        .flat_map(|(a, b)| a.pmfs.iter().zip(&b.pmfs))
        .map(|(a, b)| max_abs_diff(&a.pmf, &b.pmf))
        .fold(0.0, f64::max);
    let c2_direct = ev.c2(&m).unwrap();

    let pass = ev.scenario().flights.len() == 300
        && field.sectors.len() == 16
        && mass_err <= tol
        && certain_bins > 0
        && partition_dev <= PARTITION_TOLERANCE
        && partition_top <= 1.0 + PARTITION_TOLERANCE
        && presence_in_range
        && pmf_mass <= tol
        && mean_err <= tol
        && fft_vs_direct <= tol
        && c2.to_bits() == c2_direct.to_bits()
        && c1.is_finite()
        && c2.is_finite();
    verdict(
        "Grid-instance evaluation",
        pass,
        format!(
            "{} flights {} sectors FFT path, largest N {max_n}: C1={c1:.3} C2={c2:.3}; marginal mass err {mass_err:.1e}, \
             partition err {partition_dev:.1e} over {certain_bins} flight-bins, presences in [0,1] {presence_in_range}, \
             PMF mass err {pmf_mass:.1e}, mean err {mean_err:.1e}, |fft-direct| {fft_vs_direct:.1e} (all <={tol:e}), \
             field C2 equals direct C2 bit-for-bit {}; wall {:.1} ms",
            ev.scenario().flights.len(),
            field.sectors.len(),
            c2.to_bits() == c2_direct.to_bits(),
            elapsed.as_secs_f64() * 1e3
        ),
    );
}

const ARCHIVE_ARTIFACTS: [&str; 4] = ["archive.json", "archive.csv", "trace.csv", "knee_intents.json"];

#[test]
fn optimize_is_deterministic_per_seed() {
    let _guard = serial();
    let first = default_runs();
    let ev = x_evaluator(PmfMethod::Auto);
    let dir = artifacts("optimize-b");
    optimize(&ev, &OptimizeOptions::new(OPTIMIZE_SEED), &dir).unwrap();
    let mut compared = 0;
    let mut differing = Vec::new();
    for r in 0..first.outcome.results.len() {
        for name in ARCHIVE_ARTIFACTS {
            let a = std::fs::read(run_dir(&first.dir, r).join(name)).unwrap();
            let b = std::fs::read(run_dir(&dir, r).join(name)).unwrap();
            compared += 1;
            if a != b {
                differing.push(format!("run-{r:02}/{name}"));
            }
        }
    }
    let pass = compared > 0 && differing.is_empty();
    verdict(
        "Determinism",
        pass,
        format!(
            "optimize --seed {OPTIMIZE_SEED} twice: {compared} archive artifacts compared, {} differ{}",
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) }
        ),
    );
}
