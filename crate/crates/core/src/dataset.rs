//! Labeled example assembly for the two prediction tasks.
//!
//! The historical trips become the positive set. For destination
//! classification an equal-sized negative set is drawn at random: rider kind
//! by fair coin, subscriber gender by fair coin, subscriber age uniform on
//! 1..=100 (materialized as a birth year relative to the sampled start
//! time), origin and destination uniform and independent over the station
//! set, and start time uniform over a given range. Train/test separation is
//! a 4:1 split in start-time order.

use chrono::{DateTime, Datelike, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Gender, StationPair, StationRegistry, TripRecord, UserCategory};
use crate::features::{self, FeatureMask, FeatureVector};
use crate::{Error, Result};

/// One training/test row. A duration is present exactly on positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: u8,
    pub duration_seconds: Option<u32>,
    pub start_time: NaiveDateTime,
}

/// Time-ordered split parameters. Training examples never start later than
/// test examples; ties keep their input order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8 }
    }
}

/// One label-1 example per historical trip, with its duration attached.
pub fn positives(
    trips: &[TripRecord],
    registry: &StationRegistry,
    mask: FeatureMask,
) -> Result<Vec<LabeledExample>> {
    let vectors = features::extract_batch(trips, registry, mask)?;
    Ok(trips
        .iter()
        .zip(vectors)
        .map(|(trip, features)| LabeledExample {
            features,
            label: 1,
            duration_seconds: Some(trip.duration_seconds),
            start_time: trip.start_time,
        })
        .collect())
}

/// `n` random label-0 examples. Deterministic for a fixed seed.
pub fn negatives(
    n: usize,
    registry: &StationRegistry,
    time_range: (NaiveDateTime, NaiveDateTime),
    seed: u64,
    mask: FeatureMask,
) -> Result<Vec<LabeledExample>> {
    if registry.is_empty() {
        return Err(Error::invalid("station registry is empty"));
    }
    let (t0, t1) = time_range;
    if t1 < t0 {
        return Err(Error::invalid("time range end before start"));
    }
    let ids = registry.ids();
    let epoch0 = t0.and_utc().timestamp();
    let epoch1 = t1.and_utc().timestamp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let start_time = DateTime::from_timestamp(rng.gen_range(epoch0..=epoch1), 0)
            .expect("in-range epoch")
            .naive_utc();
        let user = if rng.gen::<bool>() {
            let gender = if rng.gen::<bool>() { Gender::Male } else { Gender::Female };
            let age: i32 = rng.gen_range(1..=100);
            let birth_year = (start_time.year() - age).max(1) as u16;
            UserCategory::subscriber(gender, Some(birth_year))
        } else {
            UserCategory::customer()
        };
        let pair = StationPair::new(
            ids[rng.gen_range(0..ids.len())],
            ids[rng.gen_range(0..ids.len())],
        );
        out.push(LabeledExample {
            features: features::extract(&user, start_time, pair, registry, mask)?,
            label: 0,
            duration_seconds: None,
            start_time,
        });
    }
    Ok(out)
}

/// Splits examples into (train, test) in start-time order. The sort is
/// stable, so equal timestamps resolve by input position.
pub fn split(mut examples: Vec<LabeledExample>, spec: &SplitSpec) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let n = examples.len();
    if n < 5 {
        log::warn!("splitting only {n} examples; the split is degenerate");
    }
    examples.sort_by_key(|e| e.start_time);
    let train_n = ((spec.train_fraction * n as f64).round() as usize).min(n);
    let test = examples.split_off(train_n);
    (examples, test)
}

/// Flattens examples into a row-major matrix for the model fitters. Returns
/// the values and the number of columns.
pub fn to_matrix(examples: &[LabeledExample]) -> (Vec<f64>, usize) {
    let dim = examples.first().map_or(0, |e| e.features.len());
    let mut values = Vec::with_capacity(examples.len() * dim);
    for e in examples {
        values.extend_from_slice(e.features.values());
    }
    (values, dim)
}

pub fn labels(examples: &[LabeledExample]) -> Vec<u8> {
    examples.iter().map(|e| e.label).collect()
}

/// Durations in seconds as training targets; errors if any example lacks one.
pub fn duration_targets(examples: &[LabeledExample]) -> Result<Vec<f64>> {
    examples
        .iter()
        .map(|e| {
            e.duration_seconds
                .map(|d| d as f64)
                .ok_or_else(|| Error::invalid("example without duration in duration task"))
        })
        .collect()
}

/// Writes examples in the feature-matrix CSV layout.
pub fn write_examples_csv<W: std::io::Write>(
    out: W,
    mask: FeatureMask,
    examples: &[LabeledExample],
) -> Result<()> {
    features::write_matrix_csv(
        out,
        mask,
        examples.iter().map(|e| (&e.features, e.label, e.duration_seconds)),
    )
}
