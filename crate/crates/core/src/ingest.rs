//! Streaming CSV ingestion of trip and station files.
//!
//! Quarterly data releases rename columns and change timestamp formats; a
//! [`ColumnMap`] preset per release year absorbs the drift so the parser
//! itself stays format-agnostic. Malformed rows are never fatal: they are
//! counted per reason in an [`IngestReport`] and optionally logged with line
//! numbers to a sidecar sink.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::format::{parse as chrono_parse, Item, Parsed, StrftimeItems};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::domain::{Gender, Station, StationRegistry, TripRecord, UserCategory, UserKind};
use crate::{Error, Result};

/// Source column names and timestamp format for one file layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub trip_id: String,
    pub start_time: String,
    pub end_time: String,
    pub bike_id: String,
    pub duration_seconds: String,
    pub origin_station_id: String,
    pub origin_station_name: String,
    pub destination_station_id: String,
    pub destination_station_name: String,
    pub user_type: String,
    pub gender: String,
    pub birth_year: String,
    pub station_id: String,
    pub station_name: String,
    pub station_latitude: String,
    pub station_longitude: String,
    pub station_capacity: String,
    /// strftime format used for both parsing and writing timestamps.
    pub timestamp_format: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            trip_id: "trip_id".into(),
            start_time: "starttime".into(),
            end_time: "stoptime".into(),
            bike_id: "bikeid".into(),
            duration_seconds: "tripduration".into(),
            origin_station_id: "from_station_id".into(),
            origin_station_name: "from_station_name".into(),
            destination_station_id: "to_station_id".into(),
            destination_station_name: "to_station_name".into(),
            user_type: "usertype".into(),
            gender: "gender".into(),
            birth_year: "birthyear".into(),
            station_id: "id".into(),
            station_name: "name".into(),
            station_latitude: "latitude".into(),
            station_longitude: "longitude".into(),
            station_capacity: "dpcapacity".into(),
            timestamp_format: "%-m/%-d/%Y %-H:%M".into(),
        }
    }
}

impl ColumnMap {
    /// Named presets shipped per release year.
    ///
    /// `default`, `divvy2014`, and `divvy2015` share the M/D/YYYY layout;
    /// `divvy2013` uses ISO-style timestamps and a `birthday` column.
    pub fn preset(name: &str) -> Option<ColumnMap> {
        match name {
            "default" | "divvy2014" | "divvy2015" => Some(ColumnMap::default()),
            "divvy2013" => Some(ColumnMap {
                birth_year: "birthday".into(),
                timestamp_format: "%Y-%m-%d %H:%M".into(),
                ..ColumnMap::default()
            }),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["default", "divvy2013", "divvy2014", "divvy2015"]
    }
}

/// Timestamp formats seen across release years, most common first.
const KNOWN_TIMESTAMP_FORMATS: [&str; 4] = [
    "%-m/%-d/%Y %-H:%M",
    "%-m/%-d/%Y %-H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
];

/// Infers a trip file's column layout and timestamp format by resolving the
/// header against the known column variants and parsing the first data
/// row's timestamps against the known formats.
pub fn detect_column_map(path: impl AsRef<Path>) -> Result<ColumnMap> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = reader.headers()?.clone();

    let candidates = [
        ColumnMap::default(),
        ColumnMap::preset("divvy2013").expect("known preset"),
    ];
    for candidate in candidates {
        if TripColumns::resolve(&headers, &candidate, path).is_err() {
            continue;
        }
        let cols = TripColumns::resolve(&headers, &candidate, path).expect("just resolved");
        let mut record = csv::StringRecord::new();
        if !reader.read_record(&mut record).unwrap_or(false) {
            // header-only file: any format loads it
            return Ok(candidate);
        }
        let start = field(&record, cols.start_time).unwrap_or_default().to_string();
        let end = field(&record, cols.end_time).unwrap_or_default().to_string();
        for fmt in KNOWN_TIMESTAMP_FORMATS {
            let compiled = TimestampFormat::compile(fmt)?;
            if compiled.parse(&start).is_some() && compiled.parse(&end).is_some() {
                return Ok(ColumnMap { timestamp_format: fmt.to_string(), ..candidate });
            }
        }
        return Err(Error::invalid(format!(
            "{}: unrecognized timestamp format (first row: `{start}`)",
            path.display()
        )));
    }
    Err(Error::invalid(format!("{}: unrecognized trip column layout", path.display())))
}

/// Why a row was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MissingField,
    BadTripId,
    DuplicateTripId,
    BadTimestamp,
    EndBeforeStart,
    BadDuration,
    BadStationId,
    StationUnknown,
    BadCoordinate,
    BadCapacity,
    DuplicateStationId,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::MissingField => "missing_field",
            RejectReason::BadTripId => "bad_trip_id",
            RejectReason::DuplicateTripId => "duplicate_trip_id",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::EndBeforeStart => "end_before_start",
            RejectReason::BadDuration => "bad_duration",
            RejectReason::BadStationId => "bad_station_id",
            RejectReason::StationUnknown => "station_unknown",
            RejectReason::BadCoordinate => "bad_coordinate",
            RejectReason::BadCapacity => "bad_capacity",
            RejectReason::DuplicateStationId => "duplicate_station_id",
        };
        f.write_str(s)
    }
}

/// Row accounting for one load: `rows_read = rows_accepted + rows_rejected`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
    pub rejection_reasons: BTreeMap<RejectReason, u64>,
}

impl IngestReport {
    fn accept(&mut self) {
        self.rows_read += 1;
        self.rows_accepted += 1;
    }

    fn reject(&mut self, reason: RejectReason) {
        self.rows_read += 1;
        self.rows_rejected += 1;
        *self.rejection_reasons.entry(reason).or_insert(0) += 1;
    }

    /// Folds another report into this one (multi-file loads).
    pub fn merge(&mut self, other: &IngestReport) {
        self.rows_read += other.rows_read;
        self.rows_accepted += other.rows_accepted;
        self.rows_rejected += other.rows_rejected;
        for (reason, n) in &other.rejection_reasons {
            *self.rejection_reasons.entry(*reason).or_insert(0) += n;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pre-tokenized timestamp format. Tokenizing once per file instead of once
/// per field matters at millions of rows.
struct TimestampFormat<'a> {
    items: Vec<Item<'a>>,
}

impl<'a> TimestampFormat<'a> {
    fn compile(fmt: &'a str) -> Result<Self> {
        let items: Vec<Item<'a>> = StrftimeItems::new(fmt).collect();
        if items.iter().any(|i| matches!(i, Item::Error)) {
            return Err(Error::invalid(format!("bad timestamp format `{fmt}`")));
        }
        Ok(TimestampFormat { items })
    }

    fn parse(&self, s: &str) -> Option<NaiveDateTime> {
        let mut parsed = Parsed::new();
        chrono_parse(&mut parsed, s.trim(), self.items.iter()).ok()?;
        parsed.to_naive_datetime_with_offset(0).ok()
    }
}

fn header_index(headers: &csv::StringRecord, column: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::MissingColumn {
            column: column.to_string(),
            path: path.display().to_string(),
        })
}

fn field(record: &csv::StringRecord, idx: usize) -> Option<&str> {
    record.get(idx).map(str::trim)
}

/// Duration columns are integers in most releases and float-formatted in
/// some; accept both.
fn parse_count(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let f = s.parse::<f64>().ok()?;
    if f.is_finite() && f >= 0.0 && f.fract() == 0.0 {
        Some(f as u64)
    } else {
        None
    }
}

fn parse_user(user_type: &str, gender: &str, birth_year: &str) -> UserCategory {
    let kind = match user_type.to_ascii_lowercase().as_str() {
        "subscriber" | "registered" => UserKind::Subscriber,
        // one-day and other pass holders ("Customer", "Casual", "Dependent")
        // carry no personal data; treat them all as customers
        _ => UserKind::Customer,
    };
    if kind == UserKind::Customer {
        return UserCategory::customer();
    }
    let gender = match gender.to_ascii_lowercase().as_str() {
        "male" => Gender::Male,
        "female" => Gender::Female,
        _ => Gender::Unknown,
    };
    let birth = parse_count(birth_year)
        .filter(|&y| (1..=9999).contains(&y))
        .map(|y| y as u16);
    UserCategory::subscriber(gender, birth)
}

struct TripColumns {
    trip_id: usize,
    start_time: usize,
    end_time: usize,
    duration: usize,
    origin_id: usize,
    destination_id: usize,
    user_type: usize,
    gender: usize,
    birth_year: usize,
}

impl TripColumns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap, path: &Path) -> Result<Self> {
        Ok(TripColumns {
            trip_id: header_index(headers, &map.trip_id, path)?,
            start_time: header_index(headers, &map.start_time, path)?,
            end_time: header_index(headers, &map.end_time, path)?,
            duration: header_index(headers, &map.duration_seconds, path)?,
            origin_id: header_index(headers, &map.origin_station_id, path)?,
            destination_id: header_index(headers, &map.destination_station_id, path)?,
            user_type: header_index(headers, &map.user_type, path)?,
            gender: header_index(headers, &map.gender, path)?,
            birth_year: header_index(headers, &map.birth_year, path)?,
        })
    }
}

/// Loads trip files one at a time while rejecting trip ids already seen in
/// any earlier file of the same load. The column map is per file, since one
/// corpus may span releases with different layouts.
pub struct TripLoader<'a> {
    registry: &'a StationRegistry,
    seen_ids: HashSet<u64>,
}

impl<'a> TripLoader<'a> {
    pub fn new(registry: &'a StationRegistry) -> Self {
        TripLoader { registry, seen_ids: HashSet::new() }
    }

    pub fn load(
        &mut self,
        path: impl AsRef<Path>,
        map: &ColumnMap,
    ) -> Result<(Vec<TripRecord>, IngestReport)> {
        self.load_with_sidecar(path, map, None)
    }

    /// Single-pass, order-preserving parse. Rejected rows go to `sidecar`
    /// (one line each, with the source line number) when a sink is given.
    pub fn load_with_sidecar(
        &mut self,
        path: impl AsRef<Path>,
        map: &ColumnMap,
        mut sidecar: Option<&mut dyn Write>,
    ) -> Result<(Vec<TripRecord>, IngestReport)> {
        let path = path.as_ref();
        let fmt = TimestampFormat::compile(&map.timestamp_format)?;
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(BufReader::new(File::open(path)?));
        let columns = TripColumns::resolve(reader.headers()?, map, path)?;

        let mut trips = Vec::new();
        let mut report = IngestReport::default();
        let mut record = csv::StringRecord::new();
        loop {
            match reader.read_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) if e.is_io_error() => return Err(e.into()),
                // non-I/O record error (e.g. unbalanced quotes): count and move on
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    Self::log_reject(&mut sidecar, path, line, RejectReason::MissingField, "unreadable row");
                    report.reject(RejectReason::MissingField);
                    continue;
                }
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            match self.parse_row(&record, &columns, &fmt) {
                Ok(trip) => {
                    self.seen_ids.insert(trip.trip_id);
                    trips.push(trip);
                    report.accept();
                }
                Err((reason, detail)) => {
                    Self::log_reject(&mut sidecar, path, line, reason, &detail);
                    report.reject(reason);
                }
            }
        }
        Ok((trips, report))
    }

    fn log_reject(
        sidecar: &mut Option<&mut dyn Write>,
        path: &Path,
        line: u64,
        reason: RejectReason,
        detail: &str,
    ) {
        if let Some(w) = sidecar {
            // sidecar write failures must not abort the load
            let _ = writeln!(w, "{}:{}: {} ({})", path.display(), line, reason, detail);
        }
    }

    fn parse_row(
        &self,
        record: &csv::StringRecord,
        cols: &TripColumns,
        fmt: &TimestampFormat,
    ) -> std::result::Result<TripRecord, (RejectReason, String)> {
        let get = |idx: usize| field(record, idx).ok_or((RejectReason::MissingField, format!("column {idx} absent")));

        let trip_id_raw = get(cols.trip_id)?;
        let trip_id = parse_count(trip_id_raw)
            .filter(|&id| id > 0)
            .ok_or((RejectReason::BadTripId, format!("`{trip_id_raw}`")))?;
        if self.seen_ids.contains(&trip_id) {
            return Err((RejectReason::DuplicateTripId, format!("{trip_id}")));
        }

        let start_raw = get(cols.start_time)?;
        let start_time = fmt
            .parse(start_raw)
            .ok_or((RejectReason::BadTimestamp, format!("`{start_raw}`")))?;
        let end_raw = get(cols.end_time)?;
        let end_time = fmt
            .parse(end_raw)
            .ok_or((RejectReason::BadTimestamp, format!("`{end_raw}`")))?;
        if end_time < start_time {
            return Err((RejectReason::EndBeforeStart, format!("{start_raw} .. {end_raw}")));
        }

        let dur_raw = get(cols.duration)?;
        let duration_seconds = parse_count(dur_raw)
            .and_then(|d| u32::try_from(d).ok())
            .ok_or((RejectReason::BadDuration, format!("`{dur_raw}`")))?;

        let origin_raw = get(cols.origin_id)?;
        let origin_station_id = parse_count(origin_raw)
            .and_then(|id| u32::try_from(id).ok())
            .ok_or((RejectReason::BadStationId, format!("`{origin_raw}`")))?;
        let dest_raw = get(cols.destination_id)?;
        let destination_station_id = parse_count(dest_raw)
            .and_then(|id| u32::try_from(id).ok())
            .ok_or((RejectReason::BadStationId, format!("`{dest_raw}`")))?;
        if !self.registry.contains(origin_station_id) {
            return Err((RejectReason::StationUnknown, format!("origin {origin_station_id}")));
        }
        if !self.registry.contains(destination_station_id) {
            return Err((RejectReason::StationUnknown, format!("destination {destination_station_id}")));
        }

        let user = parse_user(get(cols.user_type)?, get(cols.gender)?, get(cols.birth_year)?);

        Ok(TripRecord {
            trip_id,
            start_time,
            end_time,
            duration_seconds,
            origin_station_id,
            destination_station_id,
            user,
        })
    }
}

/// One-shot trip load with a fresh duplicate-id scope.
pub fn load_trips(
    path: impl AsRef<Path>,
    map: &ColumnMap,
    registry: &StationRegistry,
) -> Result<(Vec<TripRecord>, IngestReport)> {
    TripLoader::new(registry).load(path, map)
}

/// Loads a station file. Duplicate ids keep the first row and reject the
/// later ones.
pub fn load_stations(
    path: impl AsRef<Path>,
    map: &ColumnMap,
) -> Result<(StationRegistry, IngestReport)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = reader.headers()?;
    let id_col = header_index(headers, &map.station_id, path)?;
    let name_col = header_index(headers, &map.station_name, path)?;
    let lat_col = header_index(headers, &map.station_latitude, path)?;
    let lon_col = header_index(headers, &map.station_longitude, path)?;
    let cap_col = header_index(headers, &map.station_capacity, path)?;

    let mut registry = StationRegistry::new();
    let mut report = IngestReport::default();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                report.reject(RejectReason::MissingField);
                continue;
            }
        }
        let parsed = (|| {
            let id_raw = field(&record, id_col).ok_or(RejectReason::MissingField)?;
            let id = parse_count(id_raw)
                .and_then(|id| u32::try_from(id).ok())
                .filter(|&id| id > 0)
                .ok_or(RejectReason::BadStationId)?;
            let name = field(&record, name_col).ok_or(RejectReason::MissingField)?.to_string();
            let lat = field(&record, lat_col)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or(RejectReason::BadCoordinate)?;
            let lon = field(&record, lon_col)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or(RejectReason::BadCoordinate)?;
            let capacity = field(&record, cap_col)
                .and_then(parse_count)
                .and_then(|c| u32::try_from(c).ok())
                .ok_or(RejectReason::BadCapacity)?;
            Station::new(id, name, lat, lon, capacity).map_err(|_| RejectReason::BadCoordinate)
        })();
        match parsed {
            Ok(station) => {
                if registry.insert(station).is_ok() {
                    report.accept();
                } else {
                    report.reject(RejectReason::DuplicateStationId);
                }
            }
            Err(reason) => report.reject(reason),
        }
    }
    Ok((registry, report))
}

/// Writes stations in the layout described by `map`.
pub fn write_stations<W: io::Write>(
    out: W,
    map: &ColumnMap,
    stations: &StationRegistry,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(out));
    w.write_record([
        map.station_id.as_str(),
        map.station_name.as_str(),
        map.station_latitude.as_str(),
        map.station_longitude.as_str(),
        map.station_capacity.as_str(),
    ])?;
    for s in stations.iter() {
        w.write_record([
            s.id.to_string(),
            s.name.clone(),
            s.latitude.to_string(),
            s.longitude.to_string(),
            s.capacity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes trips in the layout described by `map`. Station name columns are
/// filled from `registry`; the bike id column (absent from [`TripRecord`])
/// gets a synthetic value derived from the trip id.
pub fn write_trips<W: io::Write>(
    out: W,
    map: &ColumnMap,
    registry: &StationRegistry,
    trips: &[TripRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(out));
    w.write_record([
        map.trip_id.as_str(),
        map.start_time.as_str(),
        map.end_time.as_str(),
        map.bike_id.as_str(),
        map.duration_seconds.as_str(),
        map.origin_station_id.as_str(),
        map.origin_station_name.as_str(),
        map.destination_station_id.as_str(),
        map.destination_station_name.as_str(),
        map.user_type.as_str(),
        map.gender.as_str(),
        map.birth_year.as_str(),
    ])?;
    let fmt = map.timestamp_format.as_str();
    let station_name = |id: u32| registry.get(id).map(|s| s.name.clone()).unwrap_or_default();
    for t in trips {
        let (user_type, gender, birth) = match t.user.kind() {
            UserKind::Customer => ("Customer", "", String::new()),
            UserKind::Subscriber => (
                "Subscriber",
                match t.user.gender() {
                    Gender::Male => "Male",
                    Gender::Female => "Female",
                    Gender::Unknown => "",
                },
                t.user.birth_year().map(|y| y.to_string()).unwrap_or_default(),
            ),
        };
        w.write_record([
            t.trip_id.to_string(),
            t.start_time.format(fmt).to_string(),
            t.end_time.format(fmt).to_string(),
            (t.trip_id % 997 + 1).to_string(),
            t.duration_seconds.to_string(),
            t.origin_station_id.to_string(),
            station_name(t.origin_station_id),
            t.destination_station_id.to_string(),
            station_name(t.destination_station_id),
            user_type.to_string(),
            gender.to_string(),
            birth,
        ])?;
    }
    w.flush()?;
    Ok(())
}
