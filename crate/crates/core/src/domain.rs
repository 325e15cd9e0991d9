//! Immutable domain types shared by every other module: stations, riders,
//! and historical trip records.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A dock station: identity, position, and dock count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: u32,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Number of docks.
    pub capacity: u32,
}

impl Station {
    pub fn new(id: u32, name: impl Into<String>, latitude: f64, longitude: f64, capacity: u32) -> Result<Self> {
        if id == 0 {
            return Err(Error::invalid("station id must be positive"));
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::invalid(format!("latitude {latitude} out of [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::invalid(format!("longitude {longitude} out of [-180, 180]")));
        }
        Ok(Station { id, name: name.into(), latitude, longitude, capacity })
    }
}

/// All stations of a system, keyed by id. Iteration order is ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationRegistry {
    stations: BTreeMap<u32, Station>,
}

impl StationRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a station; a second station with the same id is refused.
    pub fn insert(&mut self, station: Station) -> Result<()> {
        if self.stations.contains_key(&station.id) {
            return Err(Error::invalid(format!("duplicate station id {}", station.id)));
        }
        self.stations.insert(station.id, station);
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&Station> {
        self.stations.get(&id)
    }

    pub fn resolve(&self, id: u32) -> Result<&Station> {
        self.get(id).ok_or(Error::UnknownStation(id))
    }

    pub fn contains(&self, id: u32) -> bool {
        self.stations.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Station> {
        self.stations.values()
    }

    /// Station ids in ascending order.
    pub fn ids(&self) -> Vec<u32> {
        self.stations.keys().copied().collect()
    }
}

impl FromIterator<Station> for StationRegistry {
    /// Collects stations, keeping the first occurrence of each id.
    fn from_iter<T: IntoIterator<Item = Station>>(iter: T) -> Self {
        let mut reg = StationRegistry::new();
        for s in iter {
            let _ = reg.insert(s);
        }
        reg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserKind {
    Customer,
    Subscriber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

/// Rider attributes attached to a trip.
///
/// Customers (one-day pass holders) are anonymous: their gender is always
/// `Unknown` and their birth year absent. Subscribers may still have gaps;
/// real files contain subscriber rows with blank gender or birth year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserCategory {
    kind: UserKind,
    gender: Gender,
    birth_year: Option<u16>,
}

impl UserCategory {
    pub fn customer() -> Self {
        UserCategory { kind: UserKind::Customer, gender: Gender::Unknown, birth_year: None }
    }

    pub fn subscriber(gender: Gender, birth_year: Option<u16>) -> Self {
        UserCategory { kind: UserKind::Subscriber, gender, birth_year }
    }

    pub fn kind(&self) -> UserKind {
        self.kind
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn birth_year(&self) -> Option<u16> {
        self.birth_year
    }

    pub fn is_subscriber(&self) -> bool {
        self.kind == UserKind::Subscriber
    }
}

/// One historical trip. `duration_seconds` comes from the source file's
/// duration column and is authoritative even where it disagrees with the
/// timestamps (end times are minute-truncated in the published data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub trip_id: u64,
    pub start_time: NaiveDateTime,
    pub end_time: NaiveDateTime,
    pub duration_seconds: u32,
    pub origin_station_id: u32,
    pub destination_station_id: u32,
    pub user: UserCategory,
}

impl TripRecord {
    pub fn pair(&self) -> StationPair {
        StationPair { origin: self.origin_station_id, destination: self.destination_station_id }
    }

    pub fn duration_minutes(&self) -> f64 {
        self.duration_seconds as f64 / 60.0
    }
}

/// Ordered (origin, destination) station pair. Origin may equal destination:
/// riders do return bikes to the station they started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StationPair {
    pub origin: u32,
    pub destination: u32,
}

impl StationPair {
    pub fn new(origin: u32, destination: u32) -> Self {
        StationPair { origin, destination }
    }

    pub fn swapped(&self) -> Self {
        StationPair { origin: self.destination, destination: self.origin }
    }
}

/// Rider age bands: young < 30, mid-aged 30..=49, senior >= 50.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    Young,
    MidAged,
    Senior,
    Unknown,
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AgeGroup::Young => "young",
            AgeGroup::MidAged => "mid_aged",
            AgeGroup::Senior => "senior",
            AgeGroup::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Age band of a rider as of `reference_year`.
pub fn age_group(user: &UserCategory, reference_year: i32) -> AgeGroup {
    debug_assert!(reference_year > 1800);
    match user.birth_year() {
        None => AgeGroup::Unknown,
        Some(birth) => {
            let age = reference_year - birth as i32;
            if age < 30 {
                AgeGroup::Young
            } else if age < 50 {
                AgeGroup::MidAged
            } else {
                AgeGroup::Senior
            }
        }
    }
}

/// The four rider categories every report is broken down by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryLabel {
    Customer,
    MaleSubscriber,
    FemaleSubscriber,
    /// Subscriber whose gender is not recorded.
    OtherSubscriber,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 4] = [
        CategoryLabel::Customer,
        CategoryLabel::MaleSubscriber,
        CategoryLabel::FemaleSubscriber,
        CategoryLabel::OtherSubscriber,
    ];

    pub fn is_subscriber(&self) -> bool {
        !matches!(self, CategoryLabel::Customer)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CategoryLabel::Customer => "customer",
            CategoryLabel::MaleSubscriber => "male_subscriber",
            CategoryLabel::FemaleSubscriber => "female_subscriber",
            CategoryLabel::OtherSubscriber => "other_subscriber",
        }
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn category_label(user: &UserCategory) -> CategoryLabel {
    match (user.kind(), user.gender()) {
        (UserKind::Customer, _) => CategoryLabel::Customer,
        (UserKind::Subscriber, Gender::Male) => CategoryLabel::MaleSubscriber,
        (UserKind::Subscriber, Gender::Female) => CategoryLabel::FemaleSubscriber,
        (UserKind::Subscriber, Gender::Unknown) => CategoryLabel::OtherSubscriber,
    }
}

/// Year of the trip's start time, the reference year for rider ages.
pub fn trip_year(trip: &TripRecord) -> i32 {
    trip.start_time.year()
}
