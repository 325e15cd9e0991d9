//! Seeded synthetic corpus generation.
//!
//! Desk-scale stand-in for the multi-gigabyte public releases: stations on a
//! grid over the service area, trips drawn from configurable multinomials
//! whose defaults echo the real usage shapes (about two thirds subscriber
//! trips, weekday rush-hour peaks for subscribers, daytime weekend mass for
//! customers, roughly 90% of trips under 30 minutes). Destinations lean
//! toward a fixed per-origin partner station so that station features carry
//! real signal for the prediction models.
//!
//! Generation is a pure function of (seed, sizes, config).

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::manhattan_km;
use crate::domain::{Gender, Station, StationRegistry, TripRecord, UserCategory};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Probability that a trip is taken by a subscriber.
    pub subscriber_fraction: f64,
    /// Gender mix among subscriber trips; the remainder has no recorded
    /// gender.
    pub male_share_of_subscribers: f64,
    pub female_share_of_subscribers: f64,
    /// Probability that a subscriber row lacks a birth year.
    pub missing_birth_year_rate: f64,
    pub birth_year_range: (u16, u16),
    pub start_date: NaiveDate,
    /// Inclusive.
    pub end_date: NaiveDate,
    /// Relative weekday weights, Sunday first.
    pub subscriber_weekday_weights: [f64; 7],
    pub customer_weekday_weights: [f64; 7],
    /// Relative start-hour weights, midnight first.
    pub subscriber_hour_weights: [f64; 24],
    pub customer_hour_weights: [f64; 24],
    /// Probabilities of the six duration bands (under 30m up to over 10h),
    /// per rider kind; customers carry most of the over-time tail.
    pub subscriber_duration_band_probs: [f64; 6],
    pub customer_duration_band_probs: [f64; 6],
    /// Probability that the destination is the origin's preferred partner
    /// station rather than a uniform draw.
    pub preferred_destination_rate: f64,
    /// How strongly a trip's duration (within its band) tracks the pair
    /// distance, from 0 (pure noise) to 1 (distance only).
    pub duration_distance_weight: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subscriber_fraction: 0.66,
            male_share_of_subscribers: 0.74,
            female_share_of_subscribers: 0.24,
            missing_birth_year_rate: 0.03,
            birth_year_range: (1950, 1995),
            start_date: NaiveDate::from_ymd_opt(2013, 7, 1).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2015, 6, 30).unwrap(),
            // subscribers drop off on weekends, customers surge
            subscriber_weekday_weights: [0.55, 1.0, 1.0, 1.0, 1.0, 1.0, 0.55],
            customer_weekday_weights: [2.4, 1.0, 1.0, 1.0, 1.0, 1.0, 2.4],
            subscriber_hour_weights: [
                1.0, 0.5, 0.3, 0.2, 0.4, 2.0, 8.0, 18.0, 22.0, 10.0, 5.0, 6.0, //
                7.0, 6.5, 6.0, 9.0, 16.0, 22.0, 15.0, 9.0, 6.0, 4.0, 3.0, 2.0,
            ],
            customer_hour_weights: [
                1.0, 0.6, 0.4, 0.2, 0.2, 0.5, 1.0, 2.0, 4.0, 7.0, 10.0, 13.0, //
                15.0, 16.0, 16.0, 15.0, 13.0, 11.0, 8.0, 6.0, 4.0, 3.0, 2.0, 1.5,
            ],
            // 0.66 * 0.952 + 0.34 * 0.80 keeps about 90% of all trips short
            subscriber_duration_band_probs: [0.952, 0.038, 0.007, 0.002, 0.0008, 0.0002],
            customer_duration_band_probs: [0.80, 0.13, 0.05, 0.013, 0.005, 0.002],
            preferred_destination_rate: 0.8,
            duration_distance_weight: 0.55,
        }
    }
}

/// Cumulative-weight sampler over a fixed small support.
struct Multinomial {
    cumulative: Vec<f64>,
}

impl Multinomial {
    fn new(weights: &[f64]) -> Self {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w.max(0.0);
            cumulative.push(acc);
        }
        Multinomial { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty weights");
        let u = rng.gen_range(0.0..total);
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1)
    }
}

/// Duration band boundaries in seconds, matching the report bins. The first
/// band starts at two minutes so that minute-truncated end times still land
/// after the start time.
const DURATION_BANDS: [(u32, u32); 6] = [
    (120, 1800),
    (1800, 3600),
    (3600, 7200),
    (7200, 18_000),
    (18_000, 36_000),
    (36_000, 50_000),
];

pub fn synth_stations(n_stations: usize) -> Result<StationRegistry> {
    if n_stations < 2 {
        return Err(Error::invalid("need at least 2 stations"));
    }
    let cols = (n_stations as f64).sqrt().ceil() as usize;
    let mut registry = StationRegistry::new();
    for i in 0..n_stations {
        let id = (i + 1) as u32;
        let row = i / cols;
        let col = i % cols;
        let station = Station::new(
            id,
            format!("Synth Station {id}"),
            41.78 + 0.008 * row as f64,
            -87.70 + 0.010 * col as f64,
            11 + (id * 7 % 25),
        )?;
        registry.insert(station)?;
    }
    Ok(registry)
}

/// Preferred partner of a station: a fixed one-third rotation of the id
/// space, so pair signal survives any subset of the corpus.
fn partner(origin: u32, n_stations: usize) -> u32 {
    let n = n_stations as u32;
    (origin - 1 + n / 3 + 1) % n + 1
}

pub fn synth_corpus(
    seed: u64,
    n_trips: usize,
    n_stations: usize,
) -> Result<(StationRegistry, Vec<TripRecord>)> {
    synth_corpus_with(seed, n_trips, n_stations, &SynthConfig::default())
}

pub fn synth_corpus_with(
    seed: u64,
    n_trips: usize,
    n_stations: usize,
    config: &SynthConfig,
) -> Result<(StationRegistry, Vec<TripRecord>)> {
    if config.end_date < config.start_date {
        return Err(Error::invalid("end_date before start_date"));
    }
    let registry = synth_stations(n_stations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // dates of the range, grouped by weekday (Sunday first)
    let mut dates_by_weekday: [Vec<NaiveDate>; 7] = Default::default();
    let mut day = config.start_date;
    while day <= config.end_date {
        dates_by_weekday[day.weekday().num_days_from_sunday() as usize].push(day);
        day += Duration::days(1);
    }
    if dates_by_weekday.iter().any(|v| v.is_empty()) {
        return Err(Error::invalid("date range must cover at least one full week"));
    }

    let subscriber_weekdays = Multinomial::new(&config.subscriber_weekday_weights);
    let customer_weekdays = Multinomial::new(&config.customer_weekday_weights);
    let subscriber_hours = Multinomial::new(&config.subscriber_hour_weights);
    let customer_hours = Multinomial::new(&config.customer_hour_weights);
    let subscriber_bands = Multinomial::new(&config.subscriber_duration_band_probs);
    let customer_bands = Multinomial::new(&config.customer_duration_band_probs);
    // mild popularity skew across stations
    let origin_weights: Vec<f64> = (0..n_stations).map(|i| 1.0 + (i % 5) as f64 * 0.5).collect();
    let origins = Multinomial::new(&origin_weights);
    // widest pair distance, for scaling the duration-distance coupling
    let max_km = {
        let lat_lo = registry.iter().map(|s| s.latitude).fold(f64::INFINITY, f64::min);
        let lat_hi = registry.iter().map(|s| s.latitude).fold(f64::NEG_INFINITY, f64::max);
        let lon_lo = registry.iter().map(|s| s.longitude).fold(f64::INFINITY, f64::min);
        let lon_hi = registry.iter().map(|s| s.longitude).fold(f64::NEG_INFINITY, f64::max);
        let a = Station::new(1, "", lat_lo, lon_lo, 0)?;
        let b = Station::new(2, "", lat_hi, lon_hi, 0)?;
        manhattan_km(&a, &b).max(1e-9)
    };

    let mut trips = Vec::with_capacity(n_trips);
    for i in 0..n_trips {
        let is_subscriber = rng.gen::<f64>() < config.subscriber_fraction;
        let user = if is_subscriber {
            let g = rng.gen::<f64>();
            let gender = if g < config.male_share_of_subscribers {
                Gender::Male
            } else if g < config.male_share_of_subscribers + config.female_share_of_subscribers {
                Gender::Female
            } else {
                Gender::Unknown
            };
            let birth_year = if rng.gen::<f64>() < config.missing_birth_year_rate {
                None
            } else {
                Some(rng.gen_range(config.birth_year_range.0..=config.birth_year_range.1))
            };
            UserCategory::subscriber(gender, birth_year)
        } else {
            UserCategory::customer()
        };

        let (weekdays, hours) = if is_subscriber {
            (&subscriber_weekdays, &subscriber_hours)
        } else {
            (&customer_weekdays, &customer_hours)
        };
        let weekday_dates = &dates_by_weekday[weekdays.sample(&mut rng)];
        let date = weekday_dates[rng.gen_range(0..weekday_dates.len())];
        let hour = hours.sample(&mut rng) as u32;
        let minute = rng.gen_range(0..60u32);
        let start_time = date.and_hms_opt(hour, minute, 0).unwrap();

        let origin = origins.sample(&mut rng) as u32 + 1;
        let destination = if rng.gen::<f64>() < config.preferred_destination_rate {
            partner(origin, n_stations)
        } else {
            rng.gen_range(0..n_stations) as u32 + 1
        };

        // duration sits in its band at a position blending noise with the
        // pair distance, so distance-aware features predict it
        let bands = if is_subscriber { &subscriber_bands } else { &customer_bands };
        let (lo, hi) = DURATION_BANDS[bands.sample(&mut rng)];
        let km = manhattan_km(
            registry.get(origin).expect("generated id"),
            registry.get(destination).expect("generated id"),
        );
        let w = config.duration_distance_weight.clamp(0.0, 1.0);
        let position = (1.0 - w) * rng.gen::<f64>() + w * (km / max_km);
        let duration_seconds = lo + (position.min(0.999_999) * (hi - lo) as f64) as u32;
        // written files carry minute precision, so truncate the end time now
        // and the corpus round-trips losslessly
        let end_exact = start_time + Duration::seconds(duration_seconds as i64);
        let end_time = end_exact.with_second(0).unwrap();

        trips.push(TripRecord {
            trip_id: (i + 1) as u64,
            start_time,
            end_time,
            duration_seconds,
            origin_station_id: origin,
            destination_station_id: destination,
            user,
        });
    }
    Ok((registry, trips))
}
