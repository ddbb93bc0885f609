//! NSGA-II over genomes in `[0, 1]^n` with an elitist archive and a
//! per-generation hypervolume trace.

mod hypervolume;
mod operators;
mod sorting;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hypervolume::{hypervolume, reference_point};
pub use operators::{polynomial_mutation, sbx_crossover};
pub use sorting::{crowding_distance, fast_nondominated_sort};

use crate::error::{Error, Result};
use crate::objectives::{dominates, Evaluator, ObjectivePoint};

/// Generator behind every seeded run, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoeaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub sbx_eta: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    pub mutation_eta: f64,
    pub seed: u64,
    pub archive_size: usize,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 400,
            crossover_prob: 0.8,
            sbx_eta: 20.0,
            mutation_prob: 0.2,
            mutation_eta: 20.0,
            seed: 0,
            archive_size: 100,
        }
    }
}

impl MoeaConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.population < 2 || self.generations == 0 || self.archive_size == 0 {
            return Err(Error::Config("population ≥ 2, generations and archive_size must be positive".into()));
        }
        if !prob(self.crossover_prob) || !prob(self.mutation_prob) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if !(self.sbx_eta >= 0.0 && self.mutation_eta >= 0.0) {
            return Err(Error::Config("distribution indices must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub genome: Vec<f64>,
    pub objectives: ObjectivePoint,
}

/// Mutually non-dominated solutions sorted by increasing `c1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> Vec<ObjectivePoint> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    /// Adds `entry` unless a member dominates or equals it; drops members it
    /// dominates. Returns whether it was added.
    pub fn insert(&mut self, entry: ArchiveEntry) -> bool {
        let p = entry.objectives;
        if self.entries.iter().any(|e| dominates(&e.objectives, &p) || e.objectives == p) {
            return false;
        }
        self.entries.retain(|e| !dominates(&p, &e.objectives));
        let at = self.entries.partition_point(|e| e.objectives.c1 < p.c1);
        self.entries.insert(at, entry);
        true
    }

    /// Drops the most crowded member until at most `size` remain. Extremes
    /// are never dropped.
    pub fn truncate(&mut self, size: usize) {
        while self.entries.len() > size.max(2) {
            let n = self.entries.len();
            let p = |i: usize| self.entries[i].objectives;
            let r1 = (p(n - 1).c1 - p(0).c1).max(f64::MIN_POSITIVE);
            let r2 = (p(0).c2 - p(n - 1).c2).max(f64::MIN_POSITIVE);
            let crowd = |i: usize| (p(i + 1).c1 - p(i - 1).c1) / r1 + (p(i - 1).c2 - p(i + 1).c2) / r2;
            let worst = (1..n - 1)
                .min_by(|&a, &b| crowd(a).total_cmp(&crowd(b)).then(a.cmp(&b)))
                .expect("interior point exists");
            self.entries.remove(worst);
        }
        self.entries.truncate(size);
    }

    /// Pearson correlation between `c1` and `c2` over the archive; `None`
    /// when either objective is constant.
    pub fn correlation(&self) -> Option<f64> {
        let n = self.entries.len() as f64;
        let pts = self.points();
        let m1 = pts.iter().map(|p| p.c1).sum::<f64>() / n;
        let m2 = pts.iter().map(|p| p.c2).sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for p in &pts {
            let (dx, dy) = (p.c1 - m1, p.c2 - m2);
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
    }

    /// Member closest to the ideal point after scaling both objectives to
    /// `[0, 1]` over the archive. A heuristic suggestion only.
    pub fn knee(&self) -> Option<usize> {
        let pts = self.points();
        let (lo1, hi1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.c1), h.max(p.c1)));
        let (lo2, hi2) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.c2), h.max(p.c2)));
        let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        (0..pts.len()).min_by(|&a, &b| {
            let d = |i: usize| scale(pts[i].c1, lo1, hi1).hypot(scale(pts[i].c2, lo2, hi2));
            d(a).total_cmp(&d(b)).then(a.cmp(&b))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Hypervolume of every non-dominated solution found so far.
    pub hypervolume: f64,
    /// Hypervolume of the current population's first front.
    pub front_hypervolume: f64,
    pub archive_size: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: MoeaConfig,
    pub archive: ParetoArchive,
    /// Generation 0 is the initial population.
    pub trace: Vec<GenerationStats>,
    pub reference_point: [f64; 2],
    /// Wall-clock time of each generation, milliseconds.
    pub wall_ms: Vec<f64>,
}

struct Individual {
    genome: Vec<f64>,
    point: ObjectivePoint,
    rank: usize,
    crowding: f64,
}

/// Elitist archive member with its lifetime in generations.
struct Elite {
    genome: Vec<f64>,
    point: ObjectivePoint,
    born: usize,
    died: Option<usize>,
}

#[derive(Default)]
struct History {
    elites: Vec<Elite>,
    live: Vec<usize>,
}

impl History {
    fn offer(&mut self, genome: &[f64], point: ObjectivePoint, generation: usize) {
        let elites = &self.elites;
        if self.live.iter().any(|&i| dominates(&elites[i].point, &point) || elites[i].point == point) {
            return;
        }
        let elites = &mut self.elites;
        self.live.retain(|&i| {
            if dominates(&point, &elites[i].point) {
                elites[i].died = Some(generation);
                false
            } else {
                true
            }
        });
        self.live.push(self.elites.len());
        self.elites.push(Elite { genome: genome.to_vec(), point, born: generation, died: None });
    }

    fn alive_at(&self, generation: usize) -> Vec<ObjectivePoint> {
        self.elites
            .iter()
            .filter(|e| e.born <= generation && e.died.is_none_or(|d| d > generation))
            .map(|e| e.point)
            .collect()
    }
}

fn evaluate_all<F>(genomes: Vec<Vec<f64>>, evaluate: &mut F, generation: usize) -> Result<Vec<Individual>>
where
    F: FnMut(&[f64]) -> Result<ObjectivePoint>,
{
    genomes
        .into_iter()
        .map(|genome| {
            let point = evaluate(&genome).map_err(|e| Error::Evaluation { generation, source: Box::new(e) })?;
            if !(point.c1.is_finite() && point.c2.is_finite()) {
                return Err(Error::Evaluation {
                    generation,
                    source: Box::new(Error::ModelInconsistency(format!("non-finite objectives {point:?}"))),
                });
            }
            Ok(Individual { genome, point, rank: 0, crowding: 0.0 })
        })
        .collect()
}

/// Assigns rank and crowding; returns the fronts.
fn rank(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let points: Vec<_> = pop.iter().map(|i| i.point).collect();
    let fronts = fast_nondominated_sort(&points);
    for (r, front) in fronts.iter().enumerate() {
        let fp: Vec<_> = front.iter().map(|&i| points[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&fp)) {
            pop[i].rank = r;
            pop[i].crowding = d;
        }
    }
    fronts
}

fn tournament<'a, R: Rng>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if a.rank != b.rank {
        return if a.rank < b.rank { a } else { b };
    }
    if b.crowding > a.crowding {
        b
    } else {
        a
    }
}

/// NSGA-II main loop. `evaluate` must be deterministic; `on_generation` is
/// called with each completed generation number.
pub fn optimize<F, O>(dimension: usize, config: &MoeaConfig, mut evaluate: F, mut on_generation: O) -> Result<RunResult>
where
    F: FnMut(&[f64]) -> Result<ObjectivePoint>,
    O: FnMut(usize),
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = History::default();
    let mut fronts0: Vec<Vec<ObjectivePoint>> = Vec::with_capacity(config.generations + 1);
    let mut wall_ms = Vec::with_capacity(config.generations + 1);
    let mut evaluations = vec![];

    let started = Instant::now();
    let init: Vec<Vec<f64>> =
        (0..config.population).map(|_| (0..dimension).map(|_| rng.random::<f64>()).collect()).collect();
    let mut pop = evaluate_all(init, &mut evaluate, 0)?;
    let fronts = rank(&mut pop);
    for ind in &pop {
        history.offer(&ind.genome, ind.point, 0);
    }
    fronts0.push(fronts[0].iter().map(|&i| pop[i].point).collect());
    evaluations.push(pop.len());
    wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
    on_generation(0);

    for generation in 1..=config.generations {
        let started = Instant::now();
        let mut children = Vec::with_capacity(config.population + 1);
        while children.len() < config.population {
            let a = tournament(&pop, &mut rng);
            let b = tournament(&pop, &mut rng);
            let (mut x, mut y) = sbx_crossover(&a.genome, &b.genome, config.sbx_eta, config.crossover_prob, &mut rng);
            polynomial_mutation(&mut x, config.mutation_eta, config.mutation_prob, &mut rng);
            polynomial_mutation(&mut y, config.mutation_eta, config.mutation_prob, &mut rng);
            children.push(x);
            children.push(y);
        }
        children.truncate(config.population);
        let offspring = evaluate_all(children, &mut evaluate, generation)?;
        for ind in &offspring {
            history.offer(&ind.genome, ind.point, generation);
        }
        pop.extend(offspring);
        let fronts = rank(&mut pop);
        let mut keep = Vec::with_capacity(config.population);
        for front in &fronts {
            if keep.len() + front.len() <= config.population {
                keep.extend_from_slice(front);
            } else {
                let mut rest = front.clone();
                rest.sort_by(|&a, &b| pop[b].crowding.total_cmp(&pop[a].crowding).then(a.cmp(&b)));
                keep.extend_from_slice(&rest[..config.population - keep.len()]);
            }
            if keep.len() == config.population {
                break;
            }
        }
        keep.sort_unstable();
        let mut slots: Vec<Option<Individual>> = pop.into_iter().map(Some).collect();
        pop = keep.iter().map(|&i| slots[i].take().expect("kept once")).collect();
        fronts0.push(pop.iter().filter(|i| i.rank == 0).map(|i| i.point).collect());
        evaluations.push(evaluations.last().copied().unwrap_or(0) + config.population);
        wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
        on_generation(generation);
    }

    let reference = reference_point(history.elites.iter().map(|e| &e.point).chain(fronts0.iter().flatten()));
    let trace = (0..=config.generations)
        .map(|g| {
            let alive = history.alive_at(g);
            GenerationStats {
                generation: g,
                hypervolume: hypervolume(&alive, reference),
                front_hypervolume: hypervolume(&fronts0[g], reference),
                archive_size: alive.len(),
                evaluations: evaluations[g],
            }
        })
        .collect();

    let mut archive = ParetoArchive::default();
    for &i in &history.live {
        let e = &history.elites[i];
        archive.insert(ArchiveEntry { genome: e.genome.clone(), objectives: e.point });
    }
    archive.truncate(config.archive_size);
    Ok(RunResult { config: *config, archive, trace, reference_point: reference, wall_ms })
}

/// Runs NSGA-II on a scenario through its evaluator.
pub fn run(evaluator: &Evaluator, config: &MoeaConfig) -> Result<RunResult> {
    optimize(evaluator.dimension(), config, |g| evaluator.evaluate(g), |_| {})
}
