//! Raw ridership CSV parsing, cleaning and calendar featurization.
//!
//! The raw export carries one row per station and day with entry and exit
//! totals. Cleaning keeps the entries of one station, collapses duplicate days
//! and attaches weekend/holiday flags. Featurization expands each date into the
//! eight numeric inputs the learners see.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

pub const RAW_HEADER: [&str; 4] = ["station", "date", "entries", "exits"];
pub const CLEAN_HEADER: [&str; 5] = ["station", "date", "ridership", "is_weekend", "is_holiday"];

/// Names of the model inputs, in column order.
pub const FEATURE_NAMES: [&str; 8] = [
    "t_index",
    "year",
    "month",
    "day_of_month",
    "day_of_week",
    "day_of_year",
    "is_weekend",
    "is_holiday",
];

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing or unexpected header, expected `{expected}`")]
    MissingHeader { expected: String },
    #[error("row {row}: invalid date `{value}`")]
    BadDate { row: usize, value: String },
    #[error("row {row}: negative count `{value}`")]
    NegativeCount { row: usize, value: String },
    #[error("row {row}: invalid count `{value}`")]
    BadCount { row: usize, value: String },
    #[error("row {row}: flag must be 0 or 1, got `{value}`")]
    BadFlag { row: usize, value: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    WrongColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: empty station name")]
    EmptyStation { row: usize },
    #[error("row {row}: dates for station `{station}` are not strictly increasing")]
    UnorderedDates { row: usize, station: String },
    #[error("no observations for station `{0}`")]
    EmptySeries(String),
    #[error("date {date} precedes series epoch {epoch}")]
    DateBeforeEpoch { date: NaiveDate, epoch: NaiveDate },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// 1-based source row (the header is row 1) when the error is row-specific.
    pub fn row(&self) -> Option<usize> {
        match self {
            Self::BadDate { row, .. }
            | Self::NegativeCount { row, .. }
            | Self::BadCount { row, .. }
            | Self::BadFlag { row, .. }
            | Self::WrongColumnCount { row, .. }
            | Self::EmptyStation { row }
            | Self::UnorderedDates { row, .. } => Some(*row),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRidershipRecord {
    pub station: String,
    pub date: NaiveDate,
    pub entries: u64,
    pub exits: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn insert(&mut self, date: NaiveDate) -> bool {
        self.dates.insert(date)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.dates.iter().copied()
    }

    /// Holiday set implied by the `is_holiday` flags of cleaned series.
    pub fn from_series<'a>(series: impl IntoIterator<Item = &'a StationSeries>) -> Self {
        series
            .into_iter()
            .flat_map(|s| s.observations.iter())
            .filter(|o| o.is_holiday)
            .map(|o| o.date)
            .collect()
    }

    pub fn write<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        for d in &self.dates {
            writeln!(sink, "{}", d.format(DATE_FORMAT))?;
        }
        Ok(())
    }
}

impl FromIterator<NaiveDate> for HolidayCalendar {
    fn from_iter<I: IntoIterator<Item = NaiveDate>>(iter: I) -> Self {
        Self {
            dates: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleanObservation {
    pub date: NaiveDate,
    pub ridership: u64,
    pub is_weekend: bool,
    pub is_holiday: bool,
}

impl CleanObservation {
    pub fn new(date: NaiveDate, ridership: u64, holidays: &HolidayCalendar) -> Self {
        Self {
            date,
            ridership,
            is_weekend: is_weekend(date),
            is_holiday: holidays.contains(date),
        }
    }
}

/// Date-ordered daily observations for one station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationSeries {
    pub station: String,
    observations: Vec<CleanObservation>,
}

impl StationSeries {
    /// Fails with `EmptySeries` on no observations and `UnorderedDates` when
    /// dates are not strictly increasing (the row is the 0-based offending index).
    pub fn new(station: impl Into<String>, observations: Vec<CleanObservation>) -> Result<Self, IngestError> {
        let station = station.into();
        if observations.is_empty() {
            return Err(IngestError::EmptySeries(station));
        }
        if let Some(i) = observations.windows(2).position(|w| w[0].date >= w[1].date) {
            return Err(IngestError::UnorderedDates { row: i + 1, station });
        }
        Ok(Self { station, observations })
    }

    pub fn observations(&self) -> &[CleanObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn epoch(&self) -> NaiveDate {
        self.observations[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.observations[self.observations.len() - 1].date
    }

    /// First `n` observations; `None` when `n` is zero or exceeds the length.
    pub fn head(&self, n: usize) -> Option<Self> {
        (n > 0 && n <= self.len()).then(|| Self {
            station: self.station.clone(),
            observations: self.observations[..n].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub t_index: i64,
    pub year: i32,
    pub month: u32,
    pub day_of_month: u32,
    /// Monday = 0 … Sunday = 6.
    pub day_of_week: u32,
    pub day_of_year: u32,
    pub is_weekend: bool,
    pub is_holiday: bool,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn values<T: Scalar>(&self) -> [T; 8] {
        let f = |v: i64| T::from_i64(v).expect("feature value representable");
        [
            f(self.t_index),
            f(i64::from(self.year)),
            f(i64::from(self.month)),
            f(i64::from(self.day_of_month)),
            f(i64::from(self.day_of_week)),
            f(i64::from(self.day_of_year)),
            f(i64::from(self.is_weekend)),
            f(i64::from(self.is_holiday)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureVector>,
    pub targets: Vec<f64>,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features<T: Scalar>(&self) -> FeatureMatrix<T> {
        let rows: Vec<[T; 8]> = self.rows.iter().map(FeatureVector::values).collect();
        FeatureMatrix::from_rows(&rows)
            .expect("fixed-width rows")
            .with_names(self.feature_names.clone())
    }
}

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

fn parse_date(value: &str, row: usize) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(value, DATE_FORMAT).map_err(|_| IngestError::BadDate {
        row,
        value: value.to_string(),
    })
}

fn parse_count(value: &str, row: usize) -> Result<u64, IngestError> {
    match value.parse::<i128>() {
        Ok(v) if v < 0 => Err(IngestError::NegativeCount {
            row,
            value: value.to_string(),
        }),
        Ok(v) => u64::try_from(v).map_err(|_| IngestError::BadCount {
            row,
            value: value.to_string(),
        }),
        Err(_) => Err(IngestError::BadCount {
            row,
            value: value.to_string(),
        }),
    }
}

fn parse_flag(value: &str, row: usize) -> Result<bool, IngestError> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(IngestError::BadFlag {
            row,
            value: value.to_string(),
        }),
    }
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Reads records after checking the header, yielding `(row_number, record)`.
fn read_rows<R: Read>(
    source: R,
    header: &[&str],
) -> Result<Vec<(usize, csv::StringRecord)>, IngestError> {
    let mut reader = csv_reader(source);
    let mut records = reader.records();
    let missing = || IngestError::MissingHeader {
        expected: header.join(","),
    };
    let first = records.next().ok_or_else(missing)??;
    if first.len() != header.len() || first.iter().zip(header).any(|(a, b)| a != *b) {
        return Err(missing());
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(IngestError::WrongColumnCount {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        out.push((row, rec));
    }
    Ok(out)
}

/// Parses `station,date,entries,exits` rows in file order.
pub fn parse_ridership_csv<R: Read>(source: R) -> Result<Vec<RawRidershipRecord>, IngestError> {
    read_rows(source, &RAW_HEADER)?
        .into_iter()
        .map(|(row, rec)| {
            if rec[0].is_empty() {
                return Err(IngestError::EmptyStation { row });
            }
            Ok(RawRidershipRecord {
                station: rec[0].to_string(),
                date: parse_date(&rec[1], row)?,
                entries: parse_count(&rec[2], row)?,
                exits: parse_count(&rec[3], row)?,
            })
        })
        .collect()
}

pub fn write_ridership_csv<W: Write>(sink: W, records: &[RawRidershipRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RAW_HEADER)?;
    for r in records {
        w.write_record([
            r.station.as_str(),
            &r.date.format(DATE_FORMAT).to_string(),
            &r.entries.to_string(),
            &r.exits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One ISO date per line; blank lines and `#` comments are skipped. The error
/// row is the 1-based line number.
pub fn load_holidays<R: Read>(source: R) -> Result<HolidayCalendar, IngestError> {
    let mut calendar = HolidayCalendar::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        calendar.insert(parse_date(line, i + 1)?);
    }
    Ok(calendar)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanWarning {
    ConflictingDuplicate(NaiveDate),
}

impl std::fmt::Display for CleanWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ConflictingDuplicate(d) => {
                write!(f, "conflicting duplicate rows for {d}; kept the last occurrence")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanOutcome {
    pub series: StationSeries,
    pub warnings: Vec<CleanWarning>,
}

/// Filters `records` to one station, sorts by date and resolves duplicate days.
///
/// Identical duplicates collapse silently. Conflicting duplicates keep the last
/// occurrence in input order and record one warning per affected date.
pub fn clean(
    records: &[RawRidershipRecord],
    station: &str,
    holidays: &HolidayCalendar,
) -> Result<CleanOutcome, IngestError> {
    let mut by_date: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    let mut conflicts: BTreeSet<NaiveDate> = BTreeSet::new();
    for r in records.iter().filter(|r| r.station == station) {
        if let Some(prev) = by_date.insert(r.date, r.entries) {
            if prev != r.entries {
                conflicts.insert(r.date);
            }
        }
    }
    let observations: Vec<_> = by_date
        .into_iter()
        .map(|(date, ridership)| CleanObservation::new(date, ridership, holidays))
        .collect();
    Ok(CleanOutcome {
        series: StationSeries::new(station, observations)?,
        warnings: conflicts.into_iter().map(CleanWarning::ConflictingDuplicate).collect(),
    })
}

/// Station names in order of first appearance.
pub fn station_names(records: &[RawRidershipRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.station.as_str()))
        .map(|r| r.station.clone())
        .collect()
}

pub fn featurize(
    date: NaiveDate,
    epoch: NaiveDate,
    holidays: &HolidayCalendar,
) -> Result<FeatureVector, IngestError> {
    let t_index = (date - epoch).num_days();
    if t_index < 0 {
        return Err(IngestError::DateBeforeEpoch { date, epoch });
    }
    let weekend = is_weekend(date);
    Ok(FeatureVector {
        t_index,
        year: date.year(),
        month: date.month(),
        day_of_month: date.day(),
        day_of_week: date.weekday().num_days_from_monday(),
        day_of_year: date.ordinal(),
        is_weekend: weekend,
        is_holiday: holidays.contains(date),
    })
}

/// One row per observation; absent calendar days stay absent.
pub fn build_design_matrix(
    series: &StationSeries,
    holidays: &HolidayCalendar,
) -> Result<DesignMatrix, IngestError> {
    let epoch = series.epoch();
    let rows = series
        .observations()
        .iter()
        .map(|o| featurize(o.date, epoch, holidays))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DesignMatrix {
        feature_names: feature_names(),
        rows,
        targets: series.observations().iter().map(|o| o.ridership as f64).collect(),
    })
}

pub fn write_clean_csv<'a, W: Write>(
    sink: W,
    series: impl IntoIterator<Item = &'a StationSeries>,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CLEAN_HEADER)?;
    for s in series {
        for o in s.observations() {
            w.write_record([
                s.station.as_str(),
                &o.date.format(DATE_FORMAT).to_string(),
                &o.ridership.to_string(),
                if o.is_weekend { "1" } else { "0" },
                if o.is_holiday { "1" } else { "0" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a cleaned CSV back into per-station series, stations in order of
/// first appearance.
pub fn read_clean_csv<R: Read>(source: R) -> Result<Vec<StationSeries>, IngestError> {
    let mut grouped: Vec<(String, Vec<CleanObservation>, usize)> = Vec::new();
    for (row, rec) in read_rows(source, &CLEAN_HEADER)? {
        if rec[0].is_empty() {
            return Err(IngestError::EmptyStation { row });
        }
        let obs = CleanObservation {
            date: parse_date(&rec[1], row)?,
            ridership: parse_count(&rec[2], row)?,
            is_weekend: parse_flag(&rec[3], row)?,
            is_holiday: parse_flag(&rec[4], row)?,
        };
        let station = &rec[0];
        let idx = match grouped.iter().position(|(s, _, _)| s == station) {
            Some(i) => i,
            None => {
                grouped.push((station.to_string(), Vec::new(), row));
                grouped.len() - 1
            }
        };
        let (name, list, _) = &mut grouped[idx];
        if list.last().is_some_and(|p| p.date >= obs.date) {
            return Err(IngestError::UnorderedDates {
                row,
                station: name.clone(),
            });
        }
        list.push(obs);
    }
    grouped
        .into_iter()
        .map(|(station, obs, _)| StationSeries::new(station, obs))
        .collect()
}
