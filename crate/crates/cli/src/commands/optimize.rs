use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use atfcm_core::moea::{run, GenerationStats, RNG_ALGORITHM};
use atfcm_core::{Evaluator, IntentFile, MoeaConfig, Result, RunResult};
use serde::{Deserialize, Serialize};

use crate::output::{create_dir, num, write_json, Table};

pub const DEFAULT_RUNS: usize = 11;

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Run `r` uses seed `seed + r`.
    pub seed: u64,
    pub runs: usize,
    /// Its `seed` field is ignored.
    pub config: MoeaConfig,
    pub workers: usize,
}

impl OptimizeOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, runs: DEFAULT_RUNS, config: MoeaConfig::default(), workers: default_workers() }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRecord {
    pub index: usize,
    pub c1: f64,
    pub c2: f64,
    pub genome: Vec<f64>,
}

/// `archive.json`: the final archive of one run. Contains no timings, so
/// equal seeds give byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveFile {
    pub scenario: String,
    pub version_hash: String,
    pub seed: u64,
    pub rng: String,
    pub config: MoeaConfig,
    pub reference_point: [f64; 2],
    pub entries: Vec<ArchiveRecord>,
}

impl ArchiveFile {
    pub fn new(evaluator: &Evaluator, result: &RunResult) -> Self {
        Self {
            scenario: evaluator.scenario().name.clone(),
            version_hash: crate::version_hash(evaluator.scenario()),
            seed: result.config.seed,
            rng: RNG_ALGORITHM.into(),
            config: result.config,
            reference_point: result.reference_point,
            entries: result
                .archive
                .entries
                .iter()
                .enumerate()
                .map(|(index, e)| ArchiveRecord {
                    index,
                    c1: e.objectives.c1,
                    c2: e.objectives.c2,
                    genome: e.genome.clone(),
                })
                .collect(),
        }
    }
}

/// First generation whose archive hypervolume reaches `fraction` of the
/// final value.
pub fn stabilization_generation(trace: &[GenerationStats], fraction: f64) -> Option<usize> {
    let last = trace.last()?.hypervolume;
    trace.iter().find(|s| s.hypervolume >= fraction * last).map(|s| s.generation)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run: usize,
    pub seed: u64,
    pub rng: String,
    pub scenario: String,
    pub version_hash: String,
    pub config: MoeaConfig,
    pub reference_point: [f64; 2],
    pub hypervolume: Vec<f64>,
    pub front_hypervolume: Vec<f64>,
    pub wall_ms_per_generation: Vec<f64>,
    pub wall_ms: f64,
    pub archive_size: usize,
    pub correlation: Option<f64>,
    pub generation_99: Option<usize>,
    /// Heuristic suggestion: archive member closest to the ideal point.
    pub knee_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub dir: String,
    pub final_hypervolume: f64,
    pub generation_99: Option<usize>,
    pub archive_size: usize,
    pub correlation: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeManifest {
    pub scenario: String,
    pub version_hash: String,
    pub seed: u64,
    pub rng: String,
    pub config: MoeaConfig,
    pub workers: usize,
    pub runs: Vec<RunSummary>,
    pub wall_ms: f64,
}

pub struct OptimizeOutcome {
    pub manifest: OptimizeManifest,
    pub results: Vec<RunResult>,
}

pub fn run_dir(out: &Path, run: usize) -> PathBuf {
    out.join(format!("run-{run:02}"))
}

fn write_run(evaluator: &Evaluator, result: &RunResult, run: usize, dir: &Path) -> Result<RunSummary> {
    create_dir(dir)?;
    let archive = ArchiveFile::new(evaluator, result);
    write_json(&dir.join("archive.json"), &archive)?;
    let mut t = Table::create(&dir.join("archive.csv"), &["index", "c1", "c2"])?;
    for e in &archive.entries {
        t.row([e.index.to_string(), num(e.c1), num(e.c2)])?;
    }
    t.finish()?;
    let mut t = Table::create(
        &dir.join("trace.csv"),
        &["generation", "hypervolume", "front_hypervolume", "archive_size", "evaluations"],
    )?;
    for s in &result.trace {
        t.row([
            s.generation.to_string(),
            num(s.hypervolume),
            num(s.front_hypervolume),
            s.archive_size.to_string(),
            s.evaluations.to_string(),
        ])?;
    }
    t.finish()?;
    let knee = result.archive.knee();
    if let Some(k) = knee {
        let intents = evaluator.decode(&result.archive.entries[k].genome)?;
        IntentFile::from_vector(evaluator.scenario(), &intents).save(dir.join("knee_intents.json"))?;
    }
    let wall_ms: f64 = result.wall_ms.iter().sum();
    let manifest = RunManifest {
        run,
        seed: result.config.seed,
        rng: RNG_ALGORITHM.into(),
        scenario: archive.scenario.clone(),
        version_hash: archive.version_hash.clone(),
        config: result.config,
        reference_point: result.reference_point,
        hypervolume: result.trace.iter().map(|s| s.hypervolume).collect(),
        front_hypervolume: result.trace.iter().map(|s| s.front_hypervolume).collect(),
        wall_ms_per_generation: result.wall_ms.clone(),
        wall_ms,
        archive_size: result.archive.len(),
        correlation: result.archive.correlation(),
        generation_99: stabilization_generation(&result.trace, 0.99),
        knee_index: knee,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunSummary {
        run,
        seed: manifest.seed,
        dir: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        final_hypervolume: result.trace.last().map_or(0.0, |s| s.hypervolume),
        generation_99: manifest.generation_99,
        archive_size: manifest.archive_size,
        correlation: manifest.correlation,
        wall_ms,
    })
}

/// Runs `options.runs` seeded optimizations, spread over worker threads,
/// and writes one `run-NN` directory per run plus `manifest.json`.
pub fn optimize(evaluator: &Evaluator, options: &OptimizeOptions, out: &Path) -> Result<OptimizeOutcome> {
    options.config.validate()?;
    create_dir(out)?;
    let start = Instant::now();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunResult>>>> = Mutex::new((0..options.runs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..options.workers.clamp(1, options.runs.max(1)) {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::Relaxed);
                if r >= options.runs {
                    break;
                }
                let config = MoeaConfig { seed: options.seed + r as u64, ..options.config };
                let result = run(evaluator, &config);
                slots.lock().expect("no poisoned workers")[r] = Some(result);
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every run executed"))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(results.len());
    for (r, result) in results.iter().enumerate() {
        runs.push(write_run(evaluator, result, r, &run_dir(out, r))?);
    }
    let manifest = OptimizeManifest {
        scenario: evaluator.scenario().name.clone(),
        version_hash: crate::version_hash(evaluator.scenario()),
        seed: options.seed,
        rng: RNG_ALGORITHM.into(),
        config: MoeaConfig { seed: options.seed, ..options.config },
        workers: options.workers,
        runs,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(OptimizeOutcome { manifest, results })
}
