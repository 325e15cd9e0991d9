//! Feature extraction for station-pair prediction.
//!
//! A full vector has 13 slots in a frozen order: three user slots (type
//! flag, gender flag, age), three start-time slots (month, weekday, hour),
//! and seven station slots (the two raw station ids, the four coordinates,
//! and the geographic distance between the pair). Ablation masks select one
//! group; masked-out slots are dropped from the vector entirely, never
//! zero-filled, because zero is a meaningful value for the gender and age
//! slots.

use std::fmt;
use std::io;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::analysis::manhattan_km;
use crate::domain::{Gender, StationPair, StationRegistry, TripRecord, UserCategory};
use crate::parallel;
use crate::{Error, Result};

pub const FULL_DIMENSION: usize = 13;

/// Which feature group(s) a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMask {
    #[serde(rename = "all")]
    All,
    #[serde(rename = "user")]
    UserOnly,
    #[serde(rename = "station")]
    StationOnly,
    #[serde(rename = "time")]
    TimeOnly,
}

impl FeatureMask {
    pub const ALL_MASKS: [FeatureMask; 4] =
        [FeatureMask::All, FeatureMask::UserOnly, FeatureMask::StationOnly, FeatureMask::TimeOnly];

    pub fn dimension(&self) -> usize {
        match self {
            FeatureMask::All => FULL_DIMENSION,
            FeatureMask::UserOnly => 3,
            FeatureMask::StationOnly => 7,
            FeatureMask::TimeOnly => 3,
        }
    }

    pub fn column_names(&self) -> Vec<&'static str> {
        let user = ["user_type", "gender", "age"];
        let time = ["month", "weekday", "hour"];
        let station = [
            "origin_id",
            "destination_id",
            "origin_lat",
            "origin_lon",
            "dest_lat",
            "dest_lon",
            "distance_km",
        ];
        match self {
            FeatureMask::All => user.iter().chain(&time).chain(&station).copied().collect(),
            FeatureMask::UserOnly => user.to_vec(),
            FeatureMask::TimeOnly => time.to_vec(),
            FeatureMask::StationOnly => station.to_vec(),
        }
    }

    pub fn parse(s: &str) -> Option<FeatureMask> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Some(FeatureMask::All),
            "user" => Some(FeatureMask::UserOnly),
            "station" => Some(FeatureMask::StationOnly),
            "time" => Some(FeatureMask::TimeOnly),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureMask::All => "all",
            FeatureMask::UserOnly => "user",
            FeatureMask::StationOnly => "station",
            FeatureMask::TimeOnly => "time",
        };
        f.write_str(s)
    }
}

/// An extracted feature vector together with the mask it was built under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    mask: FeatureMask,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// User slots: subscriber flag (+1 subscriber, -1 customer), gender flag
/// (+1 male subscriber, -1 female subscriber, 0 otherwise), and age in
/// years at `trip_year` (0 when the birth year is unknown).
pub fn user_features(user: &UserCategory, trip_year: i32) -> [f64; 3] {
    let type_flag = if user.is_subscriber() { 1.0 } else { -1.0 };
    let gender_flag = if user.is_subscriber() {
        match user.gender() {
            Gender::Male => 1.0,
            Gender::Female => -1.0,
            Gender::Unknown => 0.0,
        }
    } else {
        0.0
    };
    let age = match (user.is_subscriber(), user.birth_year()) {
        (true, Some(birth)) => (trip_year - birth as i32).max(0) as f64,
        _ => 0.0,
    };
    [type_flag, gender_flag, age]
}

/// Time slots: month (1..=12), weekday (Sunday = 0), and hour of day
/// (midnight hour = 0).
pub fn time_features(start: NaiveDateTime) -> [f64; 3] {
    [
        start.month() as f64,
        start.weekday().num_days_from_sunday() as f64,
        start.hour() as f64,
    ]
}

/// Station slots: the raw numeric id pair, the two coordinate pairs, and the
/// geographic distance between the stations.
pub fn station_features(pair: StationPair, registry: &StationRegistry) -> Result<[f64; 7]> {
    let origin = registry.resolve(pair.origin)?;
    let dest = registry.resolve(pair.destination)?;
    Ok([
        pair.origin as f64,
        pair.destination as f64,
        origin.latitude,
        origin.longitude,
        dest.latitude,
        dest.longitude,
        manhattan_km(origin, dest),
    ])
}

/// Concatenates the selected groups in the frozen user, time, station order.
pub fn extract(
    user: &UserCategory,
    start: NaiveDateTime,
    pair: StationPair,
    registry: &StationRegistry,
    mask: FeatureMask,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(mask.dimension());
    if matches!(mask, FeatureMask::All | FeatureMask::UserOnly) {
        values.extend(user_features(user, start.year()));
    }
    if matches!(mask, FeatureMask::All | FeatureMask::TimeOnly) {
        values.extend(time_features(start));
    }
    if matches!(mask, FeatureMask::All | FeatureMask::StationOnly) {
        values.extend(station_features(pair, registry)?);
    }
    debug_assert_eq!(values.len(), mask.dimension());
    Ok(FeatureVector { mask, values })
}

pub fn extract_for_trip(
    trip: &TripRecord,
    registry: &StationRegistry,
    mask: FeatureMask,
) -> Result<FeatureVector> {
    extract(&trip.user, trip.start_time, trip.pair(), registry, mask)
}

/// Extracts one vector per trip, preserving order.
pub fn extract_batch(
    trips: &[TripRecord],
    registry: &StationRegistry,
    mask: FeatureMask,
) -> Result<Vec<FeatureVector>> {
    parallel::map_collect(trips, |trip| extract_for_trip(trip, registry, mask))
        .into_iter()
        .collect()
}

/// Writes feature rows as headered CSV: the mask's columns, then the label,
/// then the duration (blank when absent).
pub fn write_matrix_csv<'a, W, I>(out: W, mask: FeatureMask, rows: I) -> Result<()>
where
    W: io::Write,
    I: IntoIterator<Item = (&'a FeatureVector, u8, Option<u32>)>,
{
    let mut w = csv::Writer::from_writer(out);
    let mut header = mask.column_names();
    header.push("label");
    header.push("duration_seconds");
    w.write_record(&header)?;
    for (features, label, duration) in rows {
        if features.mask() != mask {
            return Err(Error::invalid("feature row mask differs from matrix mask"));
        }
        let mut record: Vec<String> = features.values().iter().map(|v| v.to_string()).collect();
        record.push(label.to_string());
        record.push(duration.map(|d| d.to_string()).unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Station;
    use chrono::NaiveDate;

    fn registry() -> StationRegistry {
        [
            Station::new(1, "a", 41.88, -87.62, 10).unwrap(),
            Station::new(2, "b", 41.90, -87.64, 10).unwrap(),
        ]
        .into_iter()
        .collect()
    }

    fn dt(y: i32, m: u32, d: u32, h: u32, min: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, min, 0).unwrap()
    }

    #[test]
    fn user_features_cases() {
        let male = UserCategory::subscriber(Gender::Male, Some(1985));
        assert_eq!(user_features(&male, 2014), [1.0, 1.0, 29.0]);
        assert_eq!(user_features(&UserCategory::customer(), 2014), [-1.0, 0.0, 0.0]);
        let gap = UserCategory::subscriber(Gender::Unknown, None);
        assert_eq!(user_features(&gap, 2014), [1.0, 0.0, 0.0]);
        let female = UserCategory::subscriber(Gender::Female, Some(1990));
        assert_eq!(user_features(&female, 2014), [1.0, -1.0, 24.0]);
    }

    #[test]
    fn time_features_cases() {
        // 2014-07-20 was a Sunday
        assert_eq!(time_features(dt(2014, 7, 20, 13, 45)), [7.0, 0.0, 13.0]);
        let jan1 = time_features(dt(2014, 1, 1, 0, 0));
        assert_eq!(jan1[0], 1.0);
        assert_eq!(jan1[2], 0.0);
        // 2014-01-01 was a Wednesday
        assert_eq!(jan1[1], 3.0);
        assert_eq!(time_features(dt(2014, 1, 1, 23, 59))[2], 23.0);
    }

    #[test]
    fn station_features_cases() {
        let reg = registry();
        let aa = station_features(StationPair::new(1, 1), &reg).unwrap();
        assert_eq!(aa[6], 0.0);
        let ab = station_features(StationPair::new(1, 2), &reg).unwrap();
        let ba = station_features(StationPair::new(2, 1), &reg).unwrap();
        assert_eq!(ab[6], ba[6]);
        assert_eq!(ab[0], ba[1]);
        assert_eq!((ab[2], ab[3]), (ba[4], ba[5]));
        // 0.02 degrees on both axes, same oracle as the distance test
        assert!((ab[6] - 3.879).abs() < 0.01);
        assert!(station_features(StationPair::new(1, 99), &reg).is_err());
    }

    #[test]
    fn extract_lengths_per_mask() {
        let reg = registry();
        let user = UserCategory::subscriber(Gender::Male, Some(1985));
        let start = dt(2014, 7, 20, 13, 45);
        let pair = StationPair::new(1, 2);
        assert_eq!(extract(&user, start, pair, &reg, FeatureMask::All).unwrap().len(), 13);
        assert_eq!(extract(&user, start, pair, &reg, FeatureMask::UserOnly).unwrap().len(), 3);
        assert_eq!(extract(&user, start, pair, &reg, FeatureMask::StationOnly).unwrap().len(), 7);
        assert_eq!(extract(&user, start, pair, &reg, FeatureMask::TimeOnly).unwrap().len(), 3);
    }

    #[test]
    fn extract_is_compositional() {
        let reg = registry();
        let user = UserCategory::subscriber(Gender::Female, Some(1990));
        let start = dt(2014, 7, 22, 8, 15);
        let pair = StationPair::new(2, 1);
        let full = extract(&user, start, pair, &reg, FeatureMask::All).unwrap();
        assert_eq!(full.values()[0..3], user_features(&user, 2014));
        assert_eq!(full.values()[3..6], time_features(start));
        assert_eq!(full.values()[6..13], station_features(pair, &reg).unwrap());
    }

    #[test]
    fn golden_full_vector_guards_slot_order() {
        let reg = registry();
        let user = UserCategory::subscriber(Gender::Male, Some(1985));
        // 2014-07-22 is a Tuesday
        let full = extract(&user, dt(2014, 7, 22, 8, 15), StationPair::new(1, 2), &reg, FeatureMask::All)
            .unwrap();
        let expected_distance = manhattan_km(reg.get(1).unwrap(), reg.get(2).unwrap());
        let expected = [
            1.0,
            1.0,
            29.0,
            7.0,
            2.0,
            8.0,
            1.0,
            2.0,
            41.88,
            -87.62,
            41.90,
            -87.64,
            expected_distance,
        ];
        assert_eq!(full.values(), expected);
    }

    #[test]
    fn batch_matches_single() {
        let reg = registry();
        let trips: Vec<TripRecord> = (0..20)
            .map(|i| TripRecord {
                trip_id: i + 1,
                start_time: dt(2014, 7, (i % 28 + 1) as u32, (i % 24) as u32, 0),
                end_time: dt(2014, 7, (i % 28 + 1) as u32, (i % 24) as u32, 9),
                duration_seconds: 540,
                origin_station_id: 1 + (i % 2) as u32,
                destination_station_id: 2 - (i % 2) as u32,
                user: if i % 2 == 0 {
                    UserCategory::customer()
                } else {
                    UserCategory::subscriber(Gender::Male, Some(1980))
                },
            })
            .collect();
        let batch = extract_batch(&trips, &reg, FeatureMask::All).unwrap();
        for (trip, vector) in trips.iter().zip(&batch) {
            assert_eq!(vector, &extract_for_trip(trip, &reg, FeatureMask::All).unwrap());
        }
    }

    #[test]
    fn matrix_csv_has_header_and_rows() {
        let reg = registry();
        let user = UserCategory::customer();
        let v = extract(&user, dt(2014, 7, 20, 13, 45), StationPair::new(1, 2), &reg, FeatureMask::UserOnly)
            .unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, FeatureMask::UserOnly, [(&v, 1u8, Some(540u32)), (&v, 0u8, None)])
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "user_type,gender,age,label,duration_seconds");
        assert_eq!(lines.next().unwrap(), "-1,0,0,1,540");
        assert_eq!(lines.next().unwrap(), "-1,0,0,0,");
    }

    #[test]
    fn matrix_csv_rejects_mixed_masks() {
        let reg = registry();
        let user = UserCategory::customer();
        let v = extract(&user, dt(2014, 7, 20, 13, 45), StationPair::new(1, 2), &reg, FeatureMask::All)
            .unwrap();
        let mut buf = Vec::new();
        let err = write_matrix_csv(&mut buf, FeatureMask::UserOnly, [(&v, 1u8, None)]);
        assert!(err.is_err());
    }
}
