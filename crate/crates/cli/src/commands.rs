//! The five subcommands. Each writes its outputs under the run's `--out`
//! directory along with `run_config.json`, and returns its headline result
//! so tests can drive the pipeline without touching the filesystem twice.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{Datelike, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use tripforge_core::analysis::{self, CycleScope};
use tripforge_core::dataset::{self, SplitSpec};
use tripforge_core::domain::{Gender, StationRegistry, TripRecord, UserCategory};
use tripforge_core::features::{self, FeatureMask};
use tripforge_core::gbdt::{self, GbdtModel};
use tripforge_core::ingest::{self, ColumnMap, IngestReport, TripLoader};
use tripforge_core::lasso::{self, LassoModel};
use tripforge_core::metrics::{self, ClassificationReport, RegressionReport};
use tripforge_core::synth;

use crate::config::{RunConfig, Task};
use crate::output::{self, InputDigest};
use crate::usage_error;

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Writes a synthetic corpus (stations.csv, trips.csv) in the default
/// column layout.
pub fn run_synth(seed: u64, n_trips: usize, n_stations: usize, out: &Path) -> Result<()> {
    let (registry, trips) = synth::synth_corpus(seed, n_trips, n_stations)?;
    fs::create_dir_all(out)
        .map_err(|e| usage_error(format!("cannot create {}: {e}", out.display())))?;
    let map = ColumnMap::default();
    let stations_path = out.join("stations.csv");
    let trips_path = out.join("trips.csv");
    ingest::write_stations(
        File::create(&stations_path)
            .map_err(|e| usage_error(format!("cannot write {}: {e}", stations_path.display())))?,
        &map,
        &registry,
    )?;
    ingest::write_trips(
        File::create(&trips_path)
            .map_err(|e| usage_error(format!("cannot write {}: {e}", trips_path.display())))?,
        &map,
        &registry,
        &trips,
    )?;
    let config = RunConfig {
        trips: vec![trips_path],
        stations: Some(stations_path),
        seed,
        out: out.to_path_buf(),
        ..RunConfig::default()
    };
    output::write_json(&out.join("run_config.json"), &config)?;
    println!("wrote {} stations and {} trips to {}", registry.len(), trips.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// corpus loading
// ---------------------------------------------------------------------------

pub struct LoadedCorpus {
    pub registry: StationRegistry,
    pub trips: Vec<TripRecord>,
    pub station_report: IngestReport,
    pub trip_report: IngestReport,
}

/// Loads the station file and all trip files of a run. Rejected trip rows
/// go to `rejects.log` under the output directory. With the `auto` preset
/// each trip file's layout is inferred individually, so corpora spanning
/// release years with different formats load in one pass.
pub fn load_corpus(config: &RunConfig) -> Result<LoadedCorpus> {
    config.check_inputs()?;
    let fixed_map = if config.preset == "auto" { None } else { Some(config.column_map()?) };
    fs::create_dir_all(&config.out)
        .map_err(|e| usage_error(format!("cannot create {}: {e}", config.out.display())))?;

    let stations_path = config.stations.as_ref().expect("checked by check_inputs");
    let station_map = fixed_map.clone().unwrap_or_default();
    let (registry, station_report) = ingest::load_stations(stations_path, &station_map)
        .with_context(|| format!("loading stations from {}", stations_path.display()))?;

    let mut sidecar = BufWriter::new(File::create(config.out.join("rejects.log"))?);
    let mut loader = TripLoader::new(&registry);
    let mut trips = Vec::new();
    let mut trip_report = IngestReport::default();
    for path in &config.trips {
        let map = match &fixed_map {
            Some(map) => map.clone(),
            None => ingest::detect_column_map(path)
                .with_context(|| format!("detecting layout of {}", path.display()))?,
        };
        let (mut batch, report) = loader
            .load_with_sidecar(path, &map, Some(&mut sidecar))
            .with_context(|| format!("loading trips from {}", path.display()))?;
        trips.append(&mut batch);
        trip_report.merge(&report);
    }
    sidecar.flush()?;
    Ok(LoadedCorpus { registry, trips, station_report, trip_report })
}

#[derive(Debug, Serialize)]
struct IngestSummary<'a> {
    stations: &'a IngestReport,
    trips: &'a IngestReport,
}

fn write_ingest_report(
    config: &RunConfig,
    inputs: &[InputDigest],
    corpus: &LoadedCorpus,
) -> Result<()> {
    output::write_document(
        &config.out,
        "ingest.json",
        config,
        inputs,
        IngestSummary { stations: &corpus.station_report, trips: &corpus.trip_report },
    )
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

/// Year with the most trips, ties toward the earlier year.
fn busiest_year(trips: &[TripRecord]) -> Option<i32> {
    let mut counts: std::collections::BTreeMap<i32, u64> = Default::default();
    for trip in trips {
        *counts.entry(trip.start_time.year()).or_insert(0) += 1;
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(year, _)| year)
}

/// Writes the five analysis reports as JSON documents with CSV twins.
pub fn run_analyze(config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let inputs = output::digest_inputs(config)?;
    write_ingest_report(config, &inputs, &corpus)?;

    let year = config.year.or_else(|| busiest_year(&corpus.trips)).unwrap_or(2014);
    let out = &config.out;

    let composition = analysis::composition(&corpus.trips);
    output::write_document(out, "composition.json", config, &inputs, &composition)?;
    composition.write_csv(File::create(out.join("composition.csv"))?)?;

    let temporal = analysis::temporal(&corpus.trips, year, CycleScope::AllYears);
    output::write_document(out, "temporal.json", config, &inputs, &temporal)?;
    temporal.write_csv(File::create(out.join("temporal.csv"))?)?;

    let durations = analysis::durations(&corpus.trips);
    output::write_document(out, "durations.json", config, &inputs, &durations)?;
    durations.write_csv(File::create(out.join("durations.csv"))?)?;

    let spatial = analysis::spatial(&corpus.trips, &corpus.registry, config.k)?;
    output::write_document(out, "spatial.json", config, &inputs, &spatial)?;
    spatial.write_csv(File::create(out.join("spatial.csv"))?)?;

    let balance = analysis::usage_balance(&corpus.trips, &corpus.registry);
    output::write_document(out, "balance.json", config, &inputs, &balance)?;
    balance.write_csv(File::create(out.join("balance.csv"))?)?;

    output::write_json(&out.join("run_config.json"), config)?;
    println!(
        "analyzed {} trips over {} stations; reports in {}",
        corpus.trips.len(),
        corpus.registry.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Headline numbers of one training run; also the body of `metrics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub task: Task,
    pub mask: FeatureMask,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    /// MAE in minutes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ModelBody<M: Serialize> {
    task: Task,
    mask: FeatureMask,
    model: M,
}

fn time_range(trips: &[TripRecord]) -> Result<(NaiveDateTime, NaiveDateTime)> {
    let min = trips.iter().map(|t| t.start_time).min();
    let max = trips.iter().map(|t| t.start_time).max();
    match (min, max) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(usage_error("corpus has no trips")),
    }
}

pub fn run_train(config: &RunConfig, task: Task) -> Result<TrainOutcome> {
    let corpus = load_corpus(config)?;
    let inputs = output::digest_inputs(config)?;
    write_ingest_report(config, &inputs, &corpus)?;
    let outcome = train_on_corpus(config, task, &corpus, &inputs, &config.out)?;
    output::write_json(&config.out.join("run_config.json"), config)?;
    print_outcome(&outcome);
    Ok(outcome)
}

fn print_outcome(outcome: &TrainOutcome) {
    match (&outcome.classification, &outcome.regression) {
        (Some(c), _) => println!(
            "{} / mask {}: accuracy {:.4}  precision {}  recall {}  f1 {}",
            outcome.task,
            outcome.mask,
            c.accuracy,
            fmt_opt(c.precision),
            fmt_opt(c.recall),
            fmt_opt(c.f1),
        ),
        (_, Some(r)) => println!(
            "{} / mask {}: mae {:.3} min  r2 {}",
            outcome.task,
            outcome.mask,
            r.mae,
            fmt_opt(r.r2)
        ),
        _ => {}
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "null".into())
}

/// Builds the task's dataset from an already-loaded corpus, fits, evaluates
/// on the held-out time fold, and writes `model.json` + `metrics.json` into
/// `dir`.
fn train_on_corpus(
    config: &RunConfig,
    task: Task,
    corpus: &LoadedCorpus,
    inputs: &[InputDigest],
    dir: &Path,
) -> Result<TrainOutcome> {
    fs::create_dir_all(dir)?;
    let mask = config.mask;
    let positives = dataset::positives(&corpus.trips, &corpus.registry, mask)?;
    let outcome = match task {
        Task::Destination => {
            let range = time_range(&corpus.trips)?;
            let negatives = dataset::negatives(
                positives.len(),
                &corpus.registry,
                range,
                config.seed,
                mask,
            )?;
            let mut pool = positives;
            pool.extend(negatives);
            let (train, test) = dataset::split(pool, &SplitSpec::default());
            let (train_x, dim) = dataset::to_matrix(&train);
            let train_y = dataset::labels(&train);
            let (test_x, _) = dataset::to_matrix(&test);
            let test_y = dataset::labels(&test);

            let model = gbdt::fit(&train_x, dim, &train_y, &config.gbdt)?;
            let predicted = model.classify_batch(&test_x, config.threshold)?;
            let report = metrics::classification_metrics(&predicted, &test_y)?;

            output::write_document(
                dir,
                "model.json",
                config,
                inputs,
                ModelBody { task, mask, model: &model },
            )?;
            TrainOutcome {
                task,
                mask,
                n_train: train.len(),
                n_test: test.len(),
                classification: Some(report),
                regression: None,
                alpha: None,
                alpha_max: None,
            }
        }
        Task::Duration => {
            let (train, test) = dataset::split(positives, &SplitSpec::default());
            let (train_x, dim) = dataset::to_matrix(&train);
            let train_y = dataset::duration_targets(&train)?;
            let (test_x, _) = dataset::to_matrix(&test);
            let test_y = dataset::duration_targets(&test)?;

            let alpha_max = lasso::alpha_max(&train_x, dim, &train_y)?;
            let alpha = config.alpha.unwrap_or(0.01 * alpha_max);
            let lasso_config = lasso::LassoConfig { alpha, ..config.lasso.clone() };
            let model = lasso::fit(&train_x, dim, &train_y, &lasso_config)?;
            let predicted_minutes: Vec<f64> =
                model.predict_batch(&test_x)?.into_iter().map(|s| s / 60.0).collect();
            let truth_minutes: Vec<f64> = test_y.iter().map(|s| s / 60.0).collect();
            let report = metrics::regression_metrics(&predicted_minutes, &truth_minutes)?;

            output::write_document(
                dir,
                "model.json",
                config,
                inputs,
                ModelBody { task, mask, model: &model },
            )?;
            TrainOutcome {
                task,
                mask,
                n_train: train.len(),
                n_test: test.len(),
                classification: None,
                regression: Some(report),
                alpha: Some(alpha),
                alpha_max: Some(alpha_max),
            }
        }
    };
    output::write_document(dir, "metrics.json", config, inputs, &outcome)?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

/// Trains both tasks under every feature mask and writes one comparison
/// table (JSON and CSV), plus the per-cell model and metrics files under
/// `ablate/<task>_<mask>/`.
pub fn run_ablate(config: &RunConfig) -> Result<Vec<TrainOutcome>> {
    let corpus = load_corpus(config)?;
    let inputs = output::digest_inputs(config)?;
    write_ingest_report(config, &inputs, &corpus)?;

    let mut outcomes = Vec::new();
    for task in [Task::Destination, Task::Duration] {
        for mask in FeatureMask::ALL_MASKS {
            let cell_config = RunConfig { mask, ..config.clone() };
            let dir = config.out.join("ablate").join(format!("{task}_{mask}"));
            let outcome = train_on_corpus(&cell_config, task, &corpus, &inputs, &dir)?;
            print_outcome(&outcome);
            outcomes.push(outcome);
        }
    }

    output::write_document(&config.out, "ablation.json", config, &inputs, &outcomes)?;
    let mut csv = String::from(
        "task,mask,n_train,n_test,accuracy,precision,recall,f1,mae_minutes,r2,alpha\n",
    );
    for o in &outcomes {
        let c = o.classification.as_ref();
        let r = o.regression.as_ref();
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            o.task,
            o.mask,
            o.n_train,
            o.n_test,
            cell(c.map(|c| c.accuracy)),
            cell(c.and_then(|c| c.precision)),
            cell(c.and_then(|c| c.recall)),
            cell(c.and_then(|c| c.f1)),
            cell(r.map(|r| r.mae)),
            cell(r.and_then(|r| r.r2)),
            cell(o.alpha),
        ));
    }
    fs::write(config.out.join("ablation.csv"), csv)?;
    output::write_json(&config.out.join("run_config.json"), config)?;
    Ok(outcomes)
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PredictRequest {
    pub model: PathBuf,
    pub duration_model: PathBuf,
    pub stations: PathBuf,
    pub preset: String,
    pub origin: u32,
    pub start: String,
    pub subscriber: bool,
    pub gender: Gender,
    pub birth_year: Option<u16>,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub station_id: u32,
    pub name: String,
    pub probability: f64,
    pub duration_minutes: f64,
    pub arrival: NaiveDateTime,
}

#[derive(Deserialize)]
struct StoredModel {
    body: StoredModelBody,
}

#[derive(Deserialize)]
struct StoredModelBody {
    task: Task,
    mask: FeatureMask,
    model: serde_json::Value,
}

fn load_model_file(path: &Path, expected: Task) -> Result<(FeatureMask, serde_json::Value)> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage_error(format!("cannot read model {}: {e}", path.display())))?;
    let stored: StoredModel = serde_json::from_str(&text)
        .map_err(|e| usage_error(format!("bad model file {}: {e}", path.display())))?;
    if stored.body.task != expected {
        return Err(usage_error(format!(
            "{} holds a {} model, expected {expected}",
            path.display(),
            stored.body.task
        )));
    }
    Ok((stored.body.mask, stored.body.model))
}

/// Ranks the k most likely destinations for one hypothetical departure and
/// attaches a duration and arrival-time estimate to each.
pub fn run_predict(request: &PredictRequest) -> Result<Vec<PredictionRow>> {
    let map = ColumnMap::preset(&request.preset)
        .ok_or_else(|| usage_error(format!("unknown preset `{}`", request.preset)))?;
    if !request.stations.is_file() {
        return Err(usage_error(format!("input not found: {}", request.stations.display())));
    }
    let (registry, _) = ingest::load_stations(&request.stations, &map)?;

    let (dest_mask, dest_value) = load_model_file(&request.model, Task::Destination)?;
    let destination_model: GbdtModel = serde_json::from_value(dest_value)
        .map_err(|e| usage_error(format!("bad destination model: {e}")))?;
    let (dur_mask, dur_value) = load_model_file(&request.duration_model, Task::Duration)?;
    let duration_model: LassoModel = serde_json::from_value(dur_value)
        .map_err(|e| usage_error(format!("bad duration model: {e}")))?;

    let start = NaiveDateTime::parse_from_str(&request.start, &map.timestamp_format)
        .map_err(|e| usage_error(format!("bad start time `{}`: {e}", request.start)))?;
    let user = if request.subscriber {
        UserCategory::subscriber(request.gender, request.birth_year)
    } else {
        UserCategory::customer()
    };
    registry
        .resolve(request.origin)
        .map_err(|_| usage_error(format!("unknown origin station id {}", request.origin)))?;

    let ranked =
        gbdt::rank_destinations(&destination_model, &user, start, request.origin, &registry, dest_mask)?;
    let mut rows = Vec::new();
    for (station_id, probability) in ranked.into_iter().take(request.k) {
        let vector = features::extract(
            &user,
            start,
            tripforge_core::domain::StationPair::new(request.origin, station_id),
            &registry,
            dur_mask,
        )?;
        let duration_seconds = duration_model.predict(vector.values())?;
        rows.push(PredictionRow {
            station_id,
            name: registry.get(station_id).map(|s| s.name.clone()).unwrap_or_default(),
            probability,
            duration_minutes: duration_seconds / 60.0,
            arrival: start + Duration::seconds(duration_seconds.round() as i64),
        });
    }
    Ok(rows)
}

pub fn print_predictions(rows: &[PredictionRow]) {
    println!("station_id,name,probability,duration_minutes,arrival");
    for row in rows {
        println!(
            "{},{},{:.6},{:.2},{}",
            row.station_id,
            row.name,
            row.probability,
            row.duration_minutes,
            row.arrival.format("%Y-%m-%d %H:%M:%S"),
        );
    }
}
