use std::collections::HashMap;
use std::sync::Arc;

use atfcm_core::moea::optimize;
use atfcm_core::occupancy::Alarm;
use atfcm_core::{apply_disruption, Error, IntentFile, MoeaConfig, ObjectivePoint, Scenario};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ApiError, AppState, CommitSource, RunRecord, RunStatus, Session, OPENAPI};
use crate::commands::evaluate::{sector_summaries, SectorSummary};
use crate::commands::optimize::ArchiveRecord;

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "schema", e.to_string()))
}

fn check_version(session: &Session, given: Option<&str>) -> Result<(), ApiError> {
    match given {
        Some(h) if h != session.version_hash => Err(ApiError::conflict(format!(
            "stale scenario version {h}; current is {}",
            session.version_hash
        ))),
        _ => Ok(()),
    }
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Serialize)]
pub struct CommittedView {
    pub source: CommitSource,
    pub c1: f64,
    pub c2: f64,
    pub intents: IntentFile,
}

#[derive(Serialize)]
pub struct ScenarioView {
    pub version_hash: String,
    pub scenario: Scenario,
    pub committed: CommittedView,
    pub alarms: Vec<Alarm>,
    pub sectors: Vec<SectorSummary>,
}

fn committed_view(s: &Session) -> CommittedView {
    CommittedView {
        source: s.source.clone(),
        c1: s.plan.objectives.c1,
        c2: s.plan.objectives.c2,
        intents: IntentFile::from_vector(&s.scenario, &s.committed),
    }
}

fn scenario_view(s: &Session) -> ScenarioView {
    ScenarioView {
        version_hash: s.version_hash.clone(),
        scenario: s.scenario.clone(),
        committed: committed_view(s),
        alarms: s.plan.alarms.clone(),
        sectors: sector_summaries(&s.plan.field),
    }
}

pub async fn get_scenario(State(state): State<Arc<AppState>>) -> Json<ScenarioView> {
    Json(scenario_view(&state.snapshot()))
}

/// Replaces the scenario; the committed plan resets to nominal targets.
pub async fn post_scenario(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<ScenarioView> {
    let text = String::from_utf8(body.to_vec()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let _writer = state.writer.lock().await;
    let session = blocking(move || Session::new(Scenario::from_json(&text)?, None)).await?;
    Ok(Json(scenario_view(&state.publish(session))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisruptionRequest {
    pub sector: String,
    pub from_min: i64,
    pub to_min: i64,
    pub capacity: u32,
    #[serde(default)]
    pub version_hash: Option<String>,
}

#[derive(Serialize)]
pub struct DisruptionView {
    pub version_hash: String,
    pub c1: f64,
    pub c2: f64,
    pub alarms: Vec<Alarm>,
    pub sectors: Vec<SectorSummary>,
}

/// Lowers a sector's capacity; the committed plan is kept and re-evaluated.
pub async fn post_disruption(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<DisruptionView> {
    let req: DisruptionRequest = parse(&body)?;
    let _writer = state.writer.lock().await;
    let current = state.snapshot();
    check_version(&current, req.version_hash.as_deref())?;
    let session = blocking(move || {
        let scenario = apply_disruption(&current.scenario, &req.sector, req.from_min, req.to_min, req.capacity)?;
        Session::new(scenario, Some((current.committed.clone(), current.source.clone())))
    })
    .await?;
    let s = state.publish(session);
    Ok(Json(DisruptionView {
        version_hash: s.version_hash.clone(),
        c1: s.plan.objectives.c1,
        c2: s.plan.objectives.c2,
        alarms: s.plan.alarms.clone(),
        sectors: sector_summaries(&s.plan.field),
    }))
}

#[derive(Serialize)]
pub struct PresenceSeries {
    pub flight: String,
    pub values: Vec<f64>,
}

#[derive(Serialize)]
pub struct SectorSeries {
    pub sector: String,
    pub time_min: Vec<i64>,
    pub capacity: Vec<u32>,
    pub expected: Vec<f64>,
    pub congestion: Vec<f64>,
    pub presence: Vec<PresenceSeries>,
}

#[derive(Serialize)]
pub struct OccupancyView {
    pub version_hash: String,
    pub c1: f64,
    pub c2: f64,
    pub from_min: i64,
    pub to_min: i64,
    pub sectors: Vec<SectorSeries>,
}

fn minute_param(q: &HashMap<String, String>, key: &str) -> Result<Option<i64>, ApiError> {
    q.get(key)
        .map(|v| v.parse::<i64>().map_err(|_| ApiError::bad_request(format!("{key}: '{v}' is not an integer minute"))))
        .transpose()
}

/// Per-bin curves of the committed plan over `[from, to)` minutes.
pub async fn get_occupancy(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<OccupancyView> {
    let s = state.snapshot();
    let grid = &s.plan.field.grid;
    let from = minute_param(&q, "from")?.unwrap_or(grid.start() as i64);
    let to = minute_param(&q, "to")?.unwrap_or(grid.end() as i64);
    if !(grid.is_aligned(from) && grid.is_aligned(to)) || from >= to || (from as f64) < grid.start() || (to as f64) > grid.end() {
        return Err(ApiError::bad_request(format!(
            "window [{from}, {to}) must be non-empty, aligned and inside [{}, {})",
            grid.start(),
            grid.end()
        )));
    }
    let lo = ((from as f64 - grid.start()) / grid.step_f64()) as usize;
    let hi = ((to as f64 - grid.start()) / grid.step_f64()) as usize;
    let selected: Vec<_> = match q.get("sector") {
        Some(id) => vec![s.plan.field.sector(id).ok_or_else(|| ApiError::not_found("sector", id))?],
        None => s.plan.field.sectors.iter().collect(),
    };
    let sectors = selected
        .into_iter()
        .map(|f| {
            let congestion = f.congestion_probability();
            SectorSeries {
                sector: f.sector.clone(),
                time_min: (lo..hi).map(|b| grid.bin_start(b) as i64).collect(),
                capacity: f.capacity[lo..hi].to_vec(),
                expected: f.expected[lo..hi].to_vec(),
                congestion: congestion[lo..hi].to_vec(),
                presence: f
                    .presence
                    .iter()
                    .map(|c| PresenceSeries { flight: c.flight.clone(), values: (lo..hi).map(|b| c.at(b)).collect() })
                    .collect(),
            }
        })
        .collect();
    Ok(Json(OccupancyView {
        version_hash: s.version_hash.clone(),
        c1: s.plan.objectives.c1,
        c2: s.plan.objectives.c2,
        from_min: from,
        to_min: to,
        sectors,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    #[serde(default)]
    pub seed: u64,
    /// Overrides on top of the defaults; `seed` here is ignored.
    #[serde(default)]
    pub config: Option<MoeaConfig>,
    #[serde(default)]
    pub version_hash: Option<String>,
}

#[derive(Serialize)]
pub struct RunCreated {
    pub run_id: u64,
    pub status: RunStatus,
    pub version_hash: String,
}

/// Starts an asynchronous run on the current scenario.
pub async fn post_optimize(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<RunCreated>), ApiError> {
    let req: OptimizeRequest = if body.is_empty() { parse(&Bytes::from_static(b"{}"))? } else { parse(&body)? };
    let s = state.snapshot();
    check_version(&s, req.version_hash.as_deref())?;
    let config = MoeaConfig { seed: req.seed, ..req.config.unwrap_or_default() };
    config.validate()?;
    let run_id = {
        let mut runs = state.runs.lock().expect("run registry");
        let id = runs.keys().next_back().map_or(1, |k| k + 1);
        runs.insert(
            id,
            RunRecord {
                status: RunStatus::Queued,
                version_hash: s.version_hash.clone(),
                config,
                generation: 0,
                hypervolume: Vec::new(),
                reference_point: None,
                archive: None,
                knee: None,
                error: None,
                evaluator: s.evaluator.clone(),
            },
        );
        id
    };
    let worker = state.clone();
    let evaluator = s.evaluator.clone();
    tokio::task::spawn_blocking(move || {
        let update = |f: &mut dyn FnMut(&mut RunRecord)| {
            if let Some(r) = worker.runs.lock().expect("run registry").get_mut(&run_id) {
                f(r);
            }
        };
        update(&mut |r| r.status = RunStatus::Running);
        let result = optimize(evaluator.dimension(), &config, |g| evaluator.evaluate(g), |g| {
            update(&mut |r| r.generation = g)
        });
        update(&mut |r| match &result {
            Ok(res) => {
                r.hypervolume = res.trace.iter().map(|t| t.hypervolume).collect();
                r.reference_point = Some(res.reference_point);
                r.knee = res.archive.knee();
                r.archive = Some(
                    res.archive
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
                );
                r.generation = config.generations;
                r.status = RunStatus::Done;
            }
            Err(e) => {
                r.error = Some(e.to_string());
                r.status = RunStatus::Failed;
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(RunCreated { run_id, status: RunStatus::Queued, version_hash: s.version_hash.clone() })))
}

#[derive(Serialize)]
pub struct ArchivePoint {
    pub index: usize,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Serialize)]
pub struct RunView {
    pub run_id: u64,
    pub status: RunStatus,
    /// Scenario version the run optimizes.
    pub version_hash: String,
    pub seed: u64,
    pub config: MoeaConfig,
    pub generation: usize,
    pub generations: usize,
    pub hypervolume: Vec<f64>,
    pub reference_point: Option<[f64; 2]>,
    pub archive: Option<Vec<ArchivePoint>>,
    pub error: Option<String>,
}

fn run_view(id: u64, r: &RunRecord) -> RunView {
    RunView {
        run_id: id,
        status: r.status,
        version_hash: r.version_hash.clone(),
        seed: r.config.seed,
        config: r.config,
        generation: r.generation,
        generations: r.config.generations,
        hypervolume: r.hypervolume.clone(),
        reference_point: r.reference_point,
        archive: r
            .archive
            .as_ref()
            .map(|a| a.iter().map(|e| ArchivePoint { index: e.index, c1: e.c1, c2: e.c2 }).collect()),
        error: r.error.clone(),
    }
}

fn run_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found("run", raw))
}

#[derive(Serialize)]
pub struct RunList {
    pub version_hash: String,
    pub runs: Vec<RunView>,
}

pub async fn list_runs(State(state): State<Arc<AppState>>) -> Json<RunList> {
    let version_hash = state.snapshot().version_hash.clone();
    let runs = state.runs.lock().expect("run registry");
    Json(RunList {
        version_hash,
        runs: runs
            .iter()
            .map(|(&id, r)| RunView { archive: None, hypervolume: Vec::new(), ..run_view(id, r) })
            .collect(),
    })
}

pub async fn get_run(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<RunView> {
    let id = run_id(&id)?;
    let runs = state.runs.lock().expect("run registry");
    let r = runs.get(&id).ok_or_else(|| ApiError::not_found("run", id))?;
    Ok(Json(run_view(id, r)))
}

#[derive(Serialize)]
pub struct KneeView {
    pub version_hash: String,
    pub run_id: u64,
    pub index: usize,
    pub c1: f64,
    pub c2: f64,
    /// Always true: the suggestion is a heuristic.
    pub heuristic: bool,
    pub rule: &'static str,
}

/// Heuristic suggestion: the archive member closest to the ideal point
/// after scaling both objectives to [0, 1].
pub async fn get_knee(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<KneeView> {
    let id = run_id(&id)?;
    let runs = state.runs.lock().expect("run registry");
    let r = runs.get(&id).ok_or_else(|| ApiError::not_found("run", id))?;
    let (Some(archive), Some(k)) = (&r.archive, r.knee) else {
        return Err(ApiError::conflict(format!("run {id} has no archive yet")));
    };
    Ok(Json(KneeView {
        version_hash: r.version_hash.clone(),
        run_id: id,
        index: k,
        c1: archive[k].c1,
        c2: archive[k].c2,
        heuristic: true,
        rule: "closest to the ideal point after scaling each objective to [0, 1]",
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitRequest {
    pub run_id: u64,
    pub index: usize,
    pub version_hash: String,
}

#[derive(Serialize)]
pub struct CommitView {
    pub version_hash: String,
    pub committed: CommittedView,
    /// Objectives stored in the archive for the chosen solution.
    pub archived: ObjectivePoint,
    pub alarms: Vec<Alarm>,
    pub sectors: Vec<SectorSummary>,
}

/// Makes an archive solution the committed plan. Dominated solutions are
/// accepted.
pub async fn post_commit(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<CommitView> {
    let req: CommitRequest = parse(&body)?;
    let _writer = state.writer.lock().await;
    let current = state.snapshot();
    check_version(&current, Some(&req.version_hash))?;
    let (genome, archived) = {
        let runs = state.runs.lock().expect("run registry");
        let r = runs.get(&req.run_id).ok_or_else(|| ApiError::not_found("run", req.run_id))?;
        if r.version_hash != current.version_hash {
            return Err(ApiError::conflict(format!(
                "run {} optimized scenario version {}; current is {}",
                req.run_id, r.version_hash, current.version_hash
            )));
        }
        let archive = r
            .archive
            .as_ref()
            .ok_or_else(|| ApiError::conflict(format!("run {} is {:?}", req.run_id, r.status)))?;
        let e = archive.get(req.index).ok_or_else(|| ApiError::not_found("solution", req.index))?;
        (e.genome.clone(), ObjectivePoint::new(e.c1, e.c2))
    };
    let source = CommitSource::Archive { run_id: req.run_id, index: req.index };
    let session = blocking(move || {
        let intents = current.evaluator.decode(&genome)?;
        Session::new(current.scenario.clone(), Some((intents, source)))
    })
    .await?;
    let s = state.publish(session);
    Ok(Json(CommitView {
        version_hash: s.version_hash.clone(),
        committed: committed_view(&s),
        archived,
        alarms: s.plan.alarms.clone(),
        sectors: sector_summaries(&s.plan.field),
    }))
}

#[derive(Serialize)]
pub struct WaypointMarginal {
    pub index: usize,
    pub waypoint: String,
    pub target_min: f64,
    pub first_bin: usize,
    pub first_min: i64,
    pub probabilities: Vec<f64>,
}

#[derive(Serialize)]
pub struct MarginalsView {
    pub version_hash: String,
    pub flight: String,
    pub scheduled_arrival_min: f64,
    pub waypoints: Vec<WaypointMarginal>,
}

/// Overfly-time marginals of one flight under the committed plan.
pub async fn get_marginals(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<MarginalsView> {
    let s = state.snapshot();
    let f = s.scenario.flight_index(&id)?;
    let plan = &s.scenario.flights[f];
    let grid = s.evaluator.grid();
    let waypoints = s.plan.flights[f]
        .marginals
        .iter()
        .zip(&plan.waypoints)
        .zip(&s.committed.flights[f])
        .enumerate()
        .map(|(index, ((pdf, wp), &target))| WaypointMarginal {
            index,
            waypoint: wp.id.clone(),
            target_min: target,
            first_bin: pdf.support_lo(),
            first_min: grid.bin_start(pdf.support_lo()) as i64,
            probabilities: pdf.masses().to_vec(),
        })
        .collect();
    Ok(Json(MarginalsView {
        version_hash: s.version_hash.clone(),
        flight: id,
        scheduled_arrival_min: plan.scheduled_arrival_min,
        waypoints,
    }))
}

pub async fn get_openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}
