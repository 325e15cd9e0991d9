//! Descriptive statistics over a trip corpus: rider composition, temporal
//! cycles, trip durations, spatial patterns, and per-station usage balance.
//!
//! Reports are plain data, serialized as JSON and as flat CSV (one row per
//! bin or station) for external plotting. All counting is exact; fractions
//! over an empty corpus are reported as null rather than zero.

use std::collections::HashMap;
use std::io;

use chrono::{Datelike, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::{
    age_group, category_label, AgeGroup, CategoryLabel, Gender, Station, StationRegistry,
    TripRecord,
};
use crate::parallel;
use crate::Result;

/// Kilometers per degree of latitude (and of longitude at the equator).
pub const KM_PER_DEGREE: f64 = 111.195;

/// Axis-aligned geographic distance in kilometers: the north-south and
/// east-west displacements are converted separately and summed, with the
/// east-west degree length scaled by the cosine of the mean latitude.
pub fn manhattan_km(a: &Station, b: &Station) -> f64 {
    let mean_lat_rad = (0.5 * (a.latitude + b.latitude)).to_radians();
    let dlat = (a.latitude - b.latitude).abs();
    let dlon = (a.longitude - b.longitude).abs();
    dlat * KM_PER_DEGREE + dlon * KM_PER_DEGREE * mean_lat_rad.cos()
}

/// Trip counts broken down by the four rider categories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub customer: u64,
    pub male_subscriber: u64,
    pub female_subscriber: u64,
    pub other_subscriber: u64,
}

impl CategoryCounts {
    pub fn bump(&mut self, label: CategoryLabel) {
        match label {
            CategoryLabel::Customer => self.customer += 1,
            CategoryLabel::MaleSubscriber => self.male_subscriber += 1,
            CategoryLabel::FemaleSubscriber => self.female_subscriber += 1,
            CategoryLabel::OtherSubscriber => self.other_subscriber += 1,
        }
    }

    pub fn get(&self, label: CategoryLabel) -> u64 {
        match label {
            CategoryLabel::Customer => self.customer,
            CategoryLabel::MaleSubscriber => self.male_subscriber,
            CategoryLabel::FemaleSubscriber => self.female_subscriber,
            CategoryLabel::OtherSubscriber => self.other_subscriber,
        }
    }

    pub fn total(&self) -> u64 {
        self.customer + self.male_subscriber + self.female_subscriber + self.other_subscriber
    }

    pub fn subscriber_total(&self) -> u64 {
        self.male_subscriber + self.female_subscriber + self.other_subscriber
    }

    pub fn merge(&mut self, other: &CategoryCounts) {
        self.customer += other.customer;
        self.male_subscriber += other.male_subscriber;
        self.female_subscriber += other.female_subscriber;
        self.other_subscriber += other.other_subscriber;
    }
}

fn fraction(count: u64, total: u64) -> Option<f64> {
    if total == 0 {
        None
    } else {
        Some(count as f64 / total as f64)
    }
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category: CategoryLabel,
    pub count: u64,
    pub fraction: Option<f64>,
}

/// One (gender, age band) cell of the subscriber breakdown. Fractions are
/// relative to the whole corpus, matching how the category shares are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriberCell {
    pub gender: Gender,
    pub age_group: AgeGroup,
    pub count: u64,
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub total: u64,
    pub categories: Vec<CategoryShare>,
    pub subscriber_cells: Vec<SubscriberCell>,
}

/// Trip counts and shares by rider category, with the subscriber share
/// further split by gender and age band. Ages are taken as of each trip's
/// start year.
pub fn composition(trips: &[TripRecord]) -> CompositionReport {
    let mut counts = CategoryCounts::default();
    let mut cells: HashMap<(Gender, AgeGroup), u64> = HashMap::new();
    for trip in trips {
        let label = category_label(&trip.user);
        counts.bump(label);
        if label.is_subscriber() {
            let band = age_group(&trip.user, trip.start_time.year());
            *cells.entry((trip.user.gender(), band)).or_insert(0) += 1;
        }
    }
    let total = counts.total();
    let categories = CategoryLabel::ALL
        .iter()
        .map(|&category| CategoryShare {
            category,
            count: counts.get(category),
            fraction: fraction(counts.get(category), total),
        })
        .collect();
    let mut subscriber_cells = Vec::new();
    for gender in [Gender::Male, Gender::Female, Gender::Unknown] {
        for band in [AgeGroup::Young, AgeGroup::MidAged, AgeGroup::Senior, AgeGroup::Unknown] {
            let count = cells.get(&(gender, band)).copied().unwrap_or(0);
            subscriber_cells.push(SubscriberCell {
                gender,
                age_group: band,
                count,
                fraction: fraction(count, total),
            });
        }
    }
    CompositionReport { total, categories, subscriber_cells }
}

impl CompositionReport {
    pub fn category_count(&self, label: CategoryLabel) -> u64 {
        self.categories.iter().find(|c| c.category == label).map_or(0, |c| c.count)
    }

    pub fn subscriber_count(&self) -> u64 {
        self.categories.iter().filter(|c| c.category.is_subscriber()).map(|c| c.count).sum()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["segment", "count", "fraction"])?;
        for c in &self.categories {
            w.write_record([
                c.category.to_string(),
                c.count.to_string(),
                fraction_str(c.fraction),
            ])?;
        }
        for cell in &self.subscriber_cells {
            w.write_record([
                format!("subscriber/{:?}/{}", cell.gender, cell.age_group).to_lowercase(),
                cell.count.to_string(),
                fraction_str(cell.fraction),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fraction_str(f: Option<f64>) -> String {
    f.map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Temporal
// ---------------------------------------------------------------------------

/// Scope of the weekday and hour breakdowns. The per-day and per-month views
/// always cover the report's single year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleScope {
    /// Weekday/hour bins count every trip in the corpus.
    AllYears,
    /// Weekday/hour bins count only trips of the report year.
    YearOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCount {
    pub date: NaiveDate,
    pub counts: CategoryCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub year: i32,
    pub cycle_scope: CycleScope,
    /// One entry per calendar day of `year`.
    pub per_day: Vec<DayCount>,
    /// January first.
    pub per_month: Vec<CategoryCounts>,
    /// Sunday first.
    pub per_weekday: Vec<CategoryCounts>,
    /// Hour of day, midnight first.
    pub per_hour: Vec<CategoryCounts>,
}

/// Counts trips per day and per month of `year`, and per weekday and hour of
/// day over the scope selected by `scope`.
pub fn temporal(trips: &[TripRecord], year: i32, scope: CycleScope) -> TemporalReport {
    let mut per_day: Vec<DayCount> = year_days(year)
        .map(|date| DayCount { date, counts: CategoryCounts::default() })
        .collect();
    let mut per_month = vec![CategoryCounts::default(); 12];
    let mut per_weekday = vec![CategoryCounts::default(); 7];
    let mut per_hour = vec![CategoryCounts::default(); 24];

    for trip in trips {
        let label = category_label(&trip.user);
        let start = trip.start_time;
        if start.year() == year {
            per_day[start.ordinal0() as usize].counts.bump(label);
            per_month[start.month0() as usize].bump(label);
        }
        if scope == CycleScope::AllYears || start.year() == year {
            per_weekday[start.weekday().num_days_from_sunday() as usize].bump(label);
            per_hour[start.hour() as usize].bump(label);
        }
    }
    TemporalReport { year, cycle_scope: scope, per_day, per_month, per_weekday, per_hour }
}

fn year_days(year: i32) -> impl Iterator<Item = NaiveDate> {
    let first = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
    first.iter_days().take_while(move |d| d.year() == year)
}

impl TemporalReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "view",
            "bin",
            "customer",
            "male_subscriber",
            "female_subscriber",
            "other_subscriber",
            "total",
        ])?;
        let mut row = |view: &str, bin: String, c: &CategoryCounts| {
            w.write_record([
                view.to_string(),
                bin,
                c.customer.to_string(),
                c.male_subscriber.to_string(),
                c.female_subscriber.to_string(),
                c.other_subscriber.to_string(),
                c.total().to_string(),
            ])
        };
        for day in &self.per_day {
            row("day", day.date.to_string(), &day.counts)?;
        }
        for (i, c) in self.per_month.iter().enumerate() {
            row("month", (i + 1).to_string(), c)?;
        }
        for (i, c) in self.per_weekday.iter().enumerate() {
            row("weekday", i.to_string(), c)?;
        }
        for (i, c) in self.per_hour.iter().enumerate() {
            row("hour", i.to_string(), c)?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Durations
// ---------------------------------------------------------------------------

pub const DURATION_BIN_LABELS: [&str; 6] =
    ["lt_30m", "30m_to_1h", "1h_to_2h", "2h_to_5h", "5h_to_10h", "gt_10h"];

/// Lower-inclusive duration bin boundaries, in seconds.
const DURATION_BIN_EDGES: [u32; 5] = [1800, 3600, 7200, 18_000, 36_000];

/// Bin index for a trip duration; bins are lower-inclusive, so a trip of
/// exactly 30 minutes lands in the second bin.
pub fn duration_bin(seconds: u32) -> usize {
    DURATION_BIN_EDGES.iter().position(|&edge| seconds < edge).unwrap_or(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationReport {
    pub trips: u64,
    pub mean_minutes: Option<f64>,
    /// Indexed like [`DURATION_BIN_LABELS`].
    pub bins: Vec<CategoryCounts>,
}

pub fn durations(trips: &[TripRecord]) -> DurationReport {
    let mut bins = vec![CategoryCounts::default(); 6];
    let mut total_seconds = 0.0;
    for trip in trips {
        bins[duration_bin(trip.duration_seconds)].bump(category_label(&trip.user));
        total_seconds += trip.duration_seconds as f64;
    }
    let n = trips.len() as u64;
    DurationReport {
        trips: n,
        mean_minutes: if n == 0 { None } else { Some(total_seconds / 60.0 / n as f64) },
        bins,
    }
}

impl DurationReport {
    /// Trips of 30 minutes or more, per category.
    pub fn over_time_counts(&self) -> CategoryCounts {
        let mut out = CategoryCounts::default();
        for bin in &self.bins[1..] {
            out.merge(bin);
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "bin",
            "customer",
            "male_subscriber",
            "female_subscriber",
            "other_subscriber",
            "total",
        ])?;
        for (label, c) in DURATION_BIN_LABELS.iter().zip(&self.bins) {
            w.write_record([
                label.to_string(),
                c.customer.to_string(),
                c.male_subscriber.to_string(),
                c.female_subscriber.to_string(),
                c.other_subscriber.to_string(),
                c.total().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Spatial
// ---------------------------------------------------------------------------

pub const DEFAULT_DISTANCE_BIN_KM: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationCount {
    pub station_id: u32,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    pub origin_id: u32,
    pub origin_name: String,
    pub destination_id: u32,
    pub destination_name: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialCategory {
    pub category: CategoryLabel,
    pub trips: u64,
    pub mean_distance_km: Option<f64>,
    /// Counts per distance bin of width `bin_width_km`, from zero.
    pub distance_histogram: Vec<u64>,
    pub top_origins: Vec<StationCount>,
    pub top_destinations: Vec<StationCount>,
    pub top_pairs: Vec<PairCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialReport {
    pub bin_width_km: f64,
    pub k: usize,
    /// Mean over all customer trips.
    pub customer_mean_km: Option<f64>,
    /// Mean over all subscriber trips regardless of gender.
    pub subscriber_mean_km: Option<f64>,
    pub categories: Vec<SpatialCategory>,
}

pub fn spatial(trips: &[TripRecord], registry: &StationRegistry, k: usize) -> Result<SpatialReport> {
    spatial_with_bin_width(trips, registry, k, DEFAULT_DISTANCE_BIN_KM)
}

/// Distance distribution and top-k origin/destination/pair rankings per
/// rider category. Ties in the rankings break toward the smaller station id
/// (pairs: lexicographically on origin then destination id) so output is
/// stable for golden-file comparison.
pub fn spatial_with_bin_width(
    trips: &[TripRecord],
    registry: &StationRegistry,
    k: usize,
    bin_width_km: f64,
) -> Result<SpatialReport> {
    // distance per trip is the hot loop; counting afterwards is cheap
    let distances = parallel::map_collect(trips, |trip| {
        let origin = registry.resolve(trip.origin_station_id)?;
        let dest = registry.resolve(trip.destination_station_id)?;
        Ok::<f64, crate::Error>(manhattan_km(origin, dest))
    });

    struct Accum {
        trips: u64,
        sum_km: f64,
        histogram: Vec<u64>,
        origins: HashMap<u32, u64>,
        destinations: HashMap<u32, u64>,
        pairs: HashMap<(u32, u32), u64>,
    }
    impl Default for Accum {
        fn default() -> Self {
            Accum {
                trips: 0,
                sum_km: 0.0,
                histogram: Vec::new(),
                origins: HashMap::new(),
                destinations: HashMap::new(),
                pairs: HashMap::new(),
            }
        }
    }

    let mut accums: [Accum; 4] = Default::default();
    for (trip, distance) in trips.iter().zip(distances) {
        let distance = distance?;
        let slot = match category_label(&trip.user) {
            CategoryLabel::Customer => 0,
            CategoryLabel::MaleSubscriber => 1,
            CategoryLabel::FemaleSubscriber => 2,
            CategoryLabel::OtherSubscriber => 3,
        };
        let acc = &mut accums[slot];
        acc.trips += 1;
        acc.sum_km += distance;
        let bin = (distance / bin_width_km).floor() as usize;
        if acc.histogram.len() <= bin {
            acc.histogram.resize(bin + 1, 0);
        }
        acc.histogram[bin] += 1;
        *acc.origins.entry(trip.origin_station_id).or_insert(0) += 1;
        *acc.destinations.entry(trip.destination_station_id).or_insert(0) += 1;
        *acc.pairs.entry((trip.origin_station_id, trip.destination_station_id)).or_insert(0) += 1;
    }

    let station_row = |id: u32, count: u64| {
        let station = registry.get(id);
        StationCount {
            station_id: id,
            name: station.map(|s| s.name.clone()).unwrap_or_default(),
            latitude: station.map_or(f64::NAN, |s| s.latitude),
            longitude: station.map_or(f64::NAN, |s| s.longitude),
            count,
        }
    };
    let top_stations = |counts: &HashMap<u32, u64>| -> Vec<StationCount> {
        let mut rows: Vec<(u32, u64)> = counts.iter().map(|(&id, &n)| (id, n)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.truncate(k);
        rows.into_iter().map(|(id, n)| station_row(id, n)).collect()
    };
    let top_pairs = |counts: &HashMap<(u32, u32), u64>| -> Vec<PairCount> {
        let mut rows: Vec<((u32, u32), u64)> = counts.iter().map(|(&p, &n)| (p, n)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.truncate(k);
        rows.into_iter()
            .map(|((o, d), n)| PairCount {
                origin_id: o,
                origin_name: registry.get(o).map(|s| s.name.clone()).unwrap_or_default(),
                destination_id: d,
                destination_name: registry.get(d).map(|s| s.name.clone()).unwrap_or_default(),
                count: n,
            })
            .collect()
    };

    let categories: Vec<SpatialCategory> = CategoryLabel::ALL
        .iter()
        .zip(&accums)
        .map(|(&category, acc)| SpatialCategory {
            category,
            trips: acc.trips,
            mean_distance_km: if acc.trips == 0 { None } else { Some(acc.sum_km / acc.trips as f64) },
            distance_histogram: acc.histogram.clone(),
            top_origins: top_stations(&acc.origins),
            top_destinations: top_stations(&acc.destinations),
            top_pairs: top_pairs(&acc.pairs),
        })
        .collect();

    let customer_mean_km = categories[0].mean_distance_km;
    let sub_trips: u64 = accums[1..].iter().map(|a| a.trips).sum();
    let sub_sum: f64 = accums[1..].iter().map(|a| a.sum_km).sum();
    Ok(SpatialReport {
        bin_width_km,
        k,
        customer_mean_km,
        subscriber_mean_km: if sub_trips == 0 { None } else { Some(sub_sum / sub_trips as f64) },
        categories,
    })
}

impl SpatialReport {
    pub fn category(&self, label: CategoryLabel) -> &SpatialCategory {
        self.categories.iter().find(|c| c.category == label).expect("all categories present")
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "category",
            "section",
            "index",
            "origin_id",
            "origin_name",
            "origin_lat",
            "origin_lon",
            "dest_id",
            "dest_name",
            "count",
        ])?;
        for cat in &self.categories {
            let name = cat.category.to_string();
            for (bin, count) in cat.distance_histogram.iter().enumerate() {
                w.write_record([
                    name.clone(),
                    "histogram".into(),
                    bin.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    count.to_string(),
                ])?;
            }
            for (section, rows) in
                [("top_origin", &cat.top_origins), ("top_destination", &cat.top_destinations)]
            {
                for (rank, s) in rows.iter().enumerate() {
                    w.write_record([
                        name.clone(),
                        section.into(),
                        (rank + 1).to_string(),
                        s.station_id.to_string(),
                        s.name.clone(),
                        s.latitude.to_string(),
                        s.longitude.to_string(),
                        String::new(),
                        String::new(),
                        s.count.to_string(),
                    ])?;
                }
            }
            for (rank, p) in cat.top_pairs.iter().enumerate() {
                w.write_record([
                    name.clone(),
                    "top_pair".into(),
                    (rank + 1).to_string(),
                    p.origin_id.to_string(),
                    p.origin_name.clone(),
                    String::new(),
                    String::new(),
                    p.destination_id.to_string(),
                    p.destination_name.clone(),
                    p.count.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Usage balance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationUsage {
    pub station_id: u32,
    pub name: String,
    pub checked_out: u64,
    pub returned: u64,
    /// False for stations with no recorded trips in either direction.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageBalanceReport {
    pub stations: Vec<StationUsage>,
    /// Active stations with more departures than arrivals.
    pub more_checked_out: u64,
    /// Active stations with more arrivals than departures.
    pub more_returned: u64,
    /// Active stations with exactly equal departures and arrivals.
    pub balanced_active: u64,
    pub inactive: u64,
}

/// Per-station counts of trips departing and arriving. A self-loop counts
/// once on each side.
pub fn usage_balance(trips: &[TripRecord], registry: &StationRegistry) -> UsageBalanceReport {
    let mut out_counts: HashMap<u32, u64> = HashMap::new();
    let mut in_counts: HashMap<u32, u64> = HashMap::new();
    for trip in trips {
        *out_counts.entry(trip.origin_station_id).or_insert(0) += 1;
        *in_counts.entry(trip.destination_station_id).or_insert(0) += 1;
    }

    // registry stations in id order, then any ids seen only in trips
    let mut ids = registry.ids();
    let mut extra: Vec<u32> = out_counts
        .keys()
        .chain(in_counts.keys())
        .copied()
        .filter(|id| !registry.contains(*id))
        .collect();
    extra.sort_unstable();
    extra.dedup();
    ids.extend(extra);

    let mut stations = Vec::with_capacity(ids.len());
    let (mut more_out, mut more_in, mut balanced, mut inactive) = (0, 0, 0, 0);
    for id in ids {
        let checked_out = out_counts.get(&id).copied().unwrap_or(0);
        let returned = in_counts.get(&id).copied().unwrap_or(0);
        let active = checked_out + returned > 0;
        match () {
            _ if !active => inactive += 1,
            _ if checked_out > returned => more_out += 1,
            _ if checked_out < returned => more_in += 1,
            _ => balanced += 1,
        }
        stations.push(StationUsage {
            station_id: id,
            name: registry.get(id).map(|s| s.name.clone()).unwrap_or_default(),
            checked_out,
            returned,
            active,
        });
    }
    UsageBalanceReport {
        stations,
        more_checked_out: more_out,
        more_returned: more_in,
        balanced_active: balanced,
        inactive,
    }
}

impl UsageBalanceReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["station_id", "name", "checked_out", "returned", "active"])?;
        for s in &self.stations {
            w.write_record([
                s.station_id.to_string(),
                s.name.clone(),
                s.checked_out.to_string(),
                s.returned.to_string(),
                s.active.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
