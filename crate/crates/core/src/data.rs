//! Station climate data store.
//!
//! Ingests the station CSV (one row per station, day and attribute) into an
//! immutable [`ClimateStore`] and answers [`DataQuery`]s against it. Missing
//! days are simply absent; nothing is imputed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical CSV header, in column order.
pub const CSV_HEADER: [&str; 8] = [
    "station_id",
    "station_name",
    "island",
    "latitude",
    "longitude",
    "date",
    "attribute",
    "value",
];

const LAT_RANGE: (f64, f64) = (18.5, 22.5);
const LON_RANGE: (f64, f64) = (-161.0, -154.0);

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: unknown attribute `{name}`")]
    UnknownAttribute { line: u64, name: String },
    #[error("line {line}: duplicate record for station {station_id} on {date} ({attribute})")]
    Duplicate {
        line: u64,
        station_id: String,
        date: NaiveDate,
        attribute: Attribute,
    },
    #[error("unknown station id `{0}`")]
    UnknownStation(String),
    #[error("unknown island `{name}`; valid names: Kauai, Oahu, Molokai, Maui, Hawaii (alias: Big Island)")]
    UnknownIsland { name: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

/// The five measured quantities, with fixed canonical units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Rainfall,
    Temperature,
    SoilMoisture,
    Solar,
    WindSpeed,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Rainfall,
        Attribute::Temperature,
        Attribute::SoilMoisture,
        Attribute::Solar,
        Attribute::WindSpeed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Rainfall => "rainfall",
            Attribute::Temperature => "temperature",
            Attribute::SoilMoisture => "soil_moisture",
            Attribute::Solar => "solar",
            Attribute::WindSpeed => "wind_speed",
        }
    }

    /// Human-readable name used in titles, summaries and refined queries.
    pub fn display_name(self) -> &'static str {
        match self {
            Attribute::Rainfall => "rainfall",
            Attribute::Temperature => "temperature",
            Attribute::SoilMoisture => "soil moisture",
            Attribute::Solar => "solar energy",
            Attribute::WindSpeed => "wind speed",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            Attribute::Rainfall => "mm",
            Attribute::Temperature => "°C",
            Attribute::SoilMoisture => "fraction",
            Attribute::Solar => "W/m²",
            Attribute::WindSpeed => "m/s",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Island {
    Kauai,
    Oahu,
    Molokai,
    Maui,
    Hawaii,
}

impl Island {
    pub const ALL: [Island; 5] = [
        Island::Kauai,
        Island::Oahu,
        Island::Molokai,
        Island::Maui,
        Island::Hawaii,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Island::Kauai => "Kauai",
            Island::Oahu => "Oahu",
            Island::Molokai => "Molokai",
            Island::Maui => "Maui",
            Island::Hawaii => "Hawaii",
        }
    }

    /// Case-insensitive island lookup. "Big Island" is the only alias.
    pub fn parse(name: &str) -> Option<Island> {
        let key = name.trim().to_lowercase();
        if key == "big island" {
            return Some(Island::Hawaii);
        }
        Island::ALL
            .into_iter()
            .find(|i| i.as_str().to_lowercase() == key)
    }
}

impl fmt::Display for Island {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub name: String,
    pub island: Island,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateRecord {
    pub station_id: String,
    pub date: NaiveDate,
    pub attribute: Attribute,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    None,
    Mean,
    Min,
    Max,
    Sum,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::None => "none",
            Aggregation::Mean => "mean",
            Aggregation::Min => "min",
            Aggregation::Max => "max",
            Aggregation::Sum => "sum",
        }
    }

    fn fold(self, values: &[f64]) -> f64 {
        match self {
            Aggregation::None => unreachable!("fold called without aggregation"),
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Sum => values.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Station,
    Island,
    Month,
}

impl GroupBy {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Station => "station",
            GroupBy::Island => "island",
            GroupBy::Month => "month",
        }
    }
}

/// Inclusive calendar-day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateRange { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn intersect(&self, other: &DateRange) -> Option<DateRange> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(DateRange { start, end })
    }

    /// January 1 to June 30, 2024.
    pub fn default_window() -> Self {
        DateRange {
            start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2024, 6, 30).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataQuery {
    pub attributes: BTreeSet<Attribute>,
    pub stations: BTreeSet<String>,
    pub date_range: DateRange,
    pub aggregation: Aggregation,
    pub group_by: Option<GroupBy>,
}

impl DataQuery {
    pub fn raw(
        attributes: impl IntoIterator<Item = Attribute>,
        stations: impl IntoIterator<Item = String>,
        date_range: DateRange,
    ) -> Self {
        DataQuery {
            attributes: attributes.into_iter().collect(),
            stations: stations.into_iter().collect(),
            date_range,
            aggregation: Aggregation::None,
            group_by: None,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.attributes.is_empty() {
            return Err(DataError::InvalidQuery("no attributes requested".into()));
        }
        if self.stations.is_empty() {
            return Err(DataError::InvalidQuery("no stations requested".into()));
        }
        if self.date_range.start > self.date_range.end {
            return Err(DataError::InvalidQuery(format!(
                "date range start {} is after end {}",
                self.date_range.start, self.date_range.end
            )));
        }
        if self.aggregation == Aggregation::None && self.group_by.is_some() {
            return Err(DataError::InvalidQuery(
                "group_by requires an aggregation".into(),
            ));
        }
        Ok(())
    }
}

/// Key of a fetched row: a calendar day for raw rows, a group label otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKey {
    Date(NaiveDate),
    Group(String),
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKey::Date(d) => write!(f, "{d}"),
            RowKey::Group(g) => f.write_str(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Set for raw rows and station-grouped rows.
    pub station_id: Option<String>,
    pub key: RowKey,
    pub attribute: Attribute,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    pub rows: Vec<TableRow>,
}

impl TimeSeriesTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    station_id: String,
    station_name: String,
    island: String,
    latitude: f64,
    longitude: f64,
    date: String,
    attribute: String,
    value: f64,
}

/// Immutable station/record store. Share it behind an `Arc`.
#[derive(Debug, Clone)]
pub struct ClimateStore {
    window: DateRange,
    stations: BTreeMap<String, Station>,
    // station id -> (date, attribute) -> value
    records: BTreeMap<String, BTreeMap<(NaiveDate, Attribute), f64>>,
    record_count: usize,
}

impl ClimateStore {
    pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::ingest_csv_with_window(path, DateRange::default_window())
    }

    pub fn ingest_csv_with_window(
        path: impl AsRef<Path>,
        window: DateRange,
    ) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::ingest_reader(file, window)
    }

    pub fn ingest_reader(reader: impl std::io::Read, window: DateRange) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| DataError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        let found: Vec<&str> = header.iter().collect();
        if found != CSV_HEADER {
            return Err(DataError::Header {
                expected: CSV_HEADER.join(","),
                found: found.join(","),
            });
        }

        let mut store = ClimateStore {
            window,
            stations: BTreeMap::new(),
            records: BTreeMap::new(),
            record_count: 0,
        };
        for result in rdr.records() {
            let record = result.map_err(|e| DataError::Malformed {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let row: CsvRow = record.deserialize(None).map_err(|e| DataError::Malformed {
                line,
                message: e.to_string(),
            })?;
            store.insert_row(row, line)?;
        }
        Ok(store)
    }

    fn insert_row(&mut self, row: CsvRow, line: u64) -> Result<(), DataError> {
        let malformed = |message: String| DataError::Malformed { line, message };
        let island = Island::ALL
            .into_iter()
            .find(|i| i.as_str() == row.island)
            .ok_or_else(|| malformed(format!("unknown island `{}`", row.island)))?;
        if !(LAT_RANGE.0..=LAT_RANGE.1).contains(&row.latitude)
            || !(LON_RANGE.0..=LON_RANGE.1).contains(&row.longitude)
        {
            return Err(malformed(format!(
                "coordinates ({}, {}) outside the Hawaii bounding box",
                row.latitude, row.longitude
            )));
        }
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad date `{}`: {e}", row.date)))?;
        if !self.window.contains(date) {
            return Err(malformed(format!(
                "date {date} outside dataset window {}..={}",
                self.window.start, self.window.end
            )));
        }
        let attribute: Attribute = row.attribute.parse().map_err(|_| {
            DataError::UnknownAttribute {
                line,
                name: row.attribute.clone(),
            }
        })?;
        if !row.value.is_finite() {
            return Err(malformed(format!("non-finite value {}", row.value)));
        }
        if row.station_id.trim().is_empty() {
            return Err(malformed("empty station id".into()));
        }

        let station = Station {
            id: row.station_id.clone(),
            name: row.station_name,
            island,
            latitude: row.latitude,
            longitude: row.longitude,
        };
        match self.stations.get(&station.id) {
            Some(existing) if *existing != station => {
                return Err(malformed(format!(
                    "station {} redefined with different metadata",
                    station.id
                )));
            }
            Some(_) => {}
            None => {
                self.stations.insert(station.id.clone(), station);
            }
        }

        let series = self.records.entry(row.station_id.clone()).or_default();
        if series.insert((date, attribute), row.value).is_some() {
            return Err(DataError::Duplicate {
                line,
                station_id: row.station_id,
                date,
                attribute,
            });
        }
        self.record_count += 1;
        Ok(())
    }

    pub fn window(&self) -> DateRange {
        self.window
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn record_count(&self) -> usize {
        self.record_count
    }

    pub fn station(&self, id: &str) -> Option<&Station> {
        self.stations.get(id)
    }

    pub fn stations(&self) -> impl Iterator<Item = &Station> {
        self.stations.values()
    }

    pub fn station_ids(&self) -> BTreeSet<String> {
        self.stations.keys().cloned().collect()
    }

    pub fn island_counts(&self) -> BTreeMap<Island, usize> {
        let mut counts: BTreeMap<Island, usize> = Island::ALL.iter().map(|&i| (i, 0)).collect();
        for station in self.stations.values() {
            *counts.entry(station.island).or_default() += 1;
        }
        counts
    }

    pub fn stations_on(&self, island: Island) -> BTreeSet<String> {
        self.stations
            .values()
            .filter(|s| s.island == island)
            .map(|s| s.id.clone())
            .collect()
    }

    /// Station ids for an island name (case-insensitive, "Big Island" alias).
    pub fn resolve_island(&self, name: &str) -> Result<BTreeSet<String>, DataError> {
        Island::parse(name)
            .map(|island| self.stations_on(island))
            .ok_or_else(|| DataError::UnknownIsland {
                name: name.to_string(),
            })
    }

    pub fn fetch(&self, query: &DataQuery) -> Result<TimeSeriesTable, DataError> {
        query.validate()?;
        for id in &query.stations {
            if !self.stations.contains_key(id) {
                return Err(DataError::UnknownStation(id.clone()));
            }
        }
        let Some(range) = query.date_range.intersect(&self.window) else {
            return Ok(TimeSeriesTable::default());
        };

        let raw = query.stations.iter().flat_map(|id| {
            let series = &self.records[id];
            series
                .range((range.start, Attribute::Rainfall)..=(range.end, Attribute::WindSpeed))
                .filter(|((_, attr), _)| query.attributes.contains(attr))
                .map(move |(&(date, attribute), &value)| (id.as_str(), date, attribute, value))
        });

        if query.aggregation == Aggregation::None {
            let rows = raw
                .map(|(id, date, attribute, value)| TableRow {
                    station_id: Some(id.to_string()),
                    key: RowKey::Date(date),
                    attribute,
                    value,
                })
                .collect();
            return Ok(TimeSeriesTable { rows });
        }

        // (station id for station grouping, group label, attribute) -> values
        let mut groups: BTreeMap<(Option<String>, String, Attribute), Vec<f64>> = BTreeMap::new();
        for (id, date, attribute, value) in raw {
            let (station, label) = match query.group_by {
                Some(GroupBy::Station) => (Some(id.to_string()), id.to_string()),
                Some(GroupBy::Island) => (None, self.stations[id].island.to_string()),
                Some(GroupBy::Month) => (None, format!("{:04}-{:02}", date.year(), date.month())),
                None => (None, "all".to_string()),
            };
            groups.entry((station, label, attribute)).or_default().push(value);
        }
        let rows = groups
            .into_iter()
            .map(|((station_id, label, attribute), values)| TableRow {
                station_id,
                key: RowKey::Group(label),
                attribute,
                value: query.aggregation.fold(&values),
            })
            .collect();
        Ok(TimeSeriesTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "station_id,station_name,island,latitude,longitude,date,attribute,value\n";

    fn store_from(body: &str) -> Result<ClimateStore, DataError> {
        let text = format!("{HEADER}{body}");
        ClimateStore::ingest_reader(text.as_bytes(), DateRange::default_window())
    }

    fn day(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, m, d).unwrap()
    }

    #[test]
    fn header_only_is_empty_store() {
        let store = store_from("").unwrap();
        assert_eq!(store.station_count(), 0);
        assert_eq!(store.record_count(), 0);
    }

    #[test]
    fn singleton_store() {
        let store = store_from("1,A,Maui,20.9,-156.4,2024-01-01,rainfall,1.5\n").unwrap();
        assert_eq!(store.station_count(), 1);
        assert_eq!(store.record_count(), 1);
        assert_eq!(store.island_counts()[&Island::Maui], 1);
    }

    #[test]
    fn duplicate_record_rejected() {
        let err = store_from(
            "1,A,Maui,20.9,-156.4,2024-01-01,rainfall,1.5\n1,A,Maui,20.9,-156.4,2024-01-01,rainfall,2.0\n",
        )
        .unwrap_err();
        assert!(matches!(err, DataError::Duplicate { line: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_attribute_names_line() {
        let err = store_from(
            "1,A,Maui,20.9,-156.4,2024-01-01,rainfall,1.5\n1,A,Maui,20.9,-156.4,2024-01-02,humidity,2.0\n",
        )
        .unwrap_err();
        match err {
            DataError::UnknownAttribute { line, name } => {
                assert_eq!(line, 3);
                assert_eq!(name, "humidity");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let err = store_from("1,A,Maui,20.9,-156.4,2024-01-01,rainfall,abc\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        let err = store_from("1,A,Maui,20.9,-156.4,2024-13-01,rainfall,1\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        let err = store_from("1,A,Maui,20.9,-156.4\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn out_of_window_and_out_of_box_rejected() {
        assert!(store_from("1,A,Maui,20.9,-156.4,2024-07-01,rainfall,1\n").is_err());
        assert!(store_from("1,A,Maui,40.0,-156.4,2024-01-01,rainfall,1\n").is_err());
        assert!(store_from("1,A,Lanai,20.9,-156.4,2024-01-01,rainfall,1\n").is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        let err = ClimateStore::ingest_reader(
            "station,date,value\n".as_bytes(),
            DateRange::default_window(),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::Header { .. }));
    }

    #[test]
    fn island_lookup() {
        assert_eq!(Island::parse("Big Island"), Some(Island::Hawaii));
        assert_eq!(Island::parse("molokai"), Some(Island::Molokai));
        assert_eq!(Island::parse("Lanai"), None);
        let store = store_from("1,A,Maui,20.9,-156.4,2024-01-01,rainfall,1.5\n").unwrap();
        let err = store.resolve_island("Lanai").unwrap_err();
        assert!(err.to_string().contains("Kauai, Oahu, Molokai, Maui, Hawaii"));
    }

    #[test]
    fn fetch_orders_and_aggregates() {
        let store = store_from(
            "2,B,Oahu,21.3,-157.8,2024-01-02,rainfall,4\n\
             2,B,Oahu,21.3,-157.8,2024-01-01,rainfall,1\n\
             1,A,Oahu,21.3,-157.8,2024-01-01,temperature,20\n\
             1,A,Oahu,21.3,-157.8,2024-01-01,rainfall,3\n\
             1,A,Oahu,21.3,-157.8,2024-02-01,rainfall,5\n",
        )
        .unwrap();
        let q = DataQuery::raw(
            [Attribute::Rainfall, Attribute::Temperature],
            ["1".to_string(), "2".to_string()],
            DateRange::default_window(),
        );
        let t = store.fetch(&q).unwrap();
        let keys: Vec<_> = t
            .rows
            .iter()
            .map(|r| (r.station_id.clone().unwrap(), r.key.to_string(), r.attribute))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("1".into(), "2024-01-01".into(), Attribute::Rainfall),
                ("1".into(), "2024-01-01".into(), Attribute::Temperature),
                ("1".into(), "2024-02-01".into(), Attribute::Rainfall),
                ("2".into(), "2024-01-01".into(), Attribute::Rainfall),
                ("2".into(), "2024-01-02".into(), Attribute::Rainfall),
            ]
        );

        let mut q = DataQuery::raw([Attribute::Rainfall], ["1".into(), "2".into()], DateRange::default_window());
        q.aggregation = Aggregation::Sum;
        q.group_by = Some(GroupBy::Month);
        let t = store.fetch(&q).unwrap();
        let got: Vec<_> = t.rows.iter().map(|r| (r.key.to_string(), r.value)).collect();
        assert_eq!(got, vec![("2024-01".into(), 8.0), ("2024-02".into(), 5.0)]);

        q.group_by = None;
        q.aggregation = Aggregation::Mean;
        let t = store.fetch(&q).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].value, 13.0 / 4.0);
    }

    #[test]
    fn fetch_errors_and_empty_intersection() {
        let store = store_from("1,A,Maui,20.9,-156.4,2024-01-01,rainfall,1.5\n").unwrap();
        let q = DataQuery::raw([Attribute::Rainfall], ["9".to_string()], DateRange::default_window());
        assert!(matches!(store.fetch(&q), Err(DataError::UnknownStation(id)) if id == "9"));

        let outside = DateRange::new(
            NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2023, 12, 31).unwrap(),
        );
        let q = DataQuery::raw([Attribute::Rainfall], ["1".to_string()], outside);
        assert!(store.fetch(&q).unwrap().is_empty());

        let mut q = DataQuery::raw([Attribute::Rainfall], ["1".to_string()], DateRange::new(day(1, 1), day(1, 1)));
        q.group_by = Some(GroupBy::Station);
        assert!(matches!(store.fetch(&q), Err(DataError::InvalidQuery(_))));
    }
}
