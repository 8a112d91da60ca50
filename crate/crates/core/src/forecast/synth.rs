use std::io::Write;

use chrono::{Datelike, Days, NaiveDate};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::ingest::{is_weekend, write_ridership_csv, CleanObservation, HolidayCalendar, IngestError, RawRidershipRecord, StationSeries};

/// Northbound-to-southbound station order of the line being imitated.
pub const MRT3_STATIONS: [&str; 13] = [
    "North Avenue",
    "Quezon Avenue",
    "GMA Kamuning",
    "Cubao",
    "Santolan",
    "Ortigas",
    "Shaw Boulevard",
    "Boni",
    "Guadalupe",
    "Buendia",
    "Ayala",
    "Magallanes",
    "Taft Avenue",
];

// (base_level, weekend_factor, holiday_factor) per default station.
const PROFILES: [(f64, f64, f64); 13] = [
    (48_000.0, 0.62, 0.45),
    (31_000.0, 0.55, 0.40),
    (27_500.0, 0.50, 0.38),
    (52_000.0, 0.74, 0.60),
    (14_500.0, 0.68, 0.52),
    (37_000.0, 0.48, 0.35),
    (43_000.0, 0.71, 0.55),
    (21_000.0, 0.58, 0.42),
    (33_500.0, 0.65, 0.50),
    (19_000.0, 0.46, 0.33),
    (41_000.0, 0.52, 0.37),
    (25_500.0, 0.60, 0.47),
    (56_000.0, 0.78, 0.64),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationProfile {
    pub name: String,
    pub base_level: f64,
    pub weekend_factor: f64,
    pub holiday_factor: f64,
}

impl StationProfile {
    /// Profile `i` of the default roster; past the thirteenth station the
    /// parameters are cycled and scaled and the name is `Station {i+1}`.
    pub fn default_for(i: usize) -> Self {
        let (base, weekend, holiday) = PROFILES[i % PROFILES.len()];
        let round = (i / PROFILES.len()) as f64;
        Self {
            name: MRT3_STATIONS
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("Station {}", i + 1)),
            base_level: base * (1.0 + 0.1 * round),
            weekend_factor: weekend,
            holiday_factor: holiday,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub start: NaiveDate,
    pub days: usize,
    pub stations: Vec<StationProfile>,
    /// Relative noise; `ε ~ U(−σ√3, σ√3)` has standard deviation σ.
    pub noise_sigma: f64,
    /// Inclusive date ranges forced to zero ridership.
    pub lockdown_windows: Vec<(NaiveDate, NaiveDate)>,
    pub holidays: HolidayCalendar,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Default stations and fixed-date holidays over `days` days starting
    /// 2019-09-09, so that 730 days end on 2021-09-07.
    pub fn new(n_stations: usize, days: usize, noise_sigma: f64, seed: u64) -> Self {
        let start = NaiveDate::from_ymd_opt(2019, 9, 9).expect("valid date");
        Self::starting(start, n_stations, days, noise_sigma, seed)
    }

    pub fn starting(start: NaiveDate, n_stations: usize, days: usize, noise_sigma: f64, seed: u64) -> Self {
        let end = start
            .checked_add_days(Days::new(days.saturating_sub(1) as u64))
            .unwrap_or(NaiveDate::MAX);
        Self {
            start,
            days,
            stations: (0..n_stations).map(StationProfile::default_for).collect(),
            noise_sigma,
            lockdown_windows: Vec::new(),
            holidays: philippine_holidays(start, end),
            seed,
        }
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: String| Err(ForecastError::InvalidSpec(m));
        if self.days < 60 {
            return bad(format!("days must be >= 60, got {}", self.days));
        }
        if self.stations.is_empty() {
            return bad("at least one station is required".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise must be a finite value >= 0, got {}", self.noise_sigma));
        }
        for s in &self.stations {
            if s.name.is_empty() {
                return bad("station names must be non-empty".into());
            }
            if !(s.base_level > 0.0 && s.base_level.is_finite()) {
                return bad(format!("{}: base level must be positive", s.name));
            }
            if !(s.weekend_factor > 0.0 && s.weekend_factor <= 1.0) {
                return bad(format!("{}: weekend factor must be in (0, 1]", s.name));
            }
            if !(s.holiday_factor > 0.0 && s.holiday_factor.is_finite()) {
                return bad(format!("{}: holiday factor must be positive", s.name));
            }
        }
        if let Some((a, b)) = self.lockdown_windows.iter().find(|(a, b)| a > b) {
            return bad(format!("lockdown window {a}..{b} ends before it starts"));
        }
        if self.start.checked_add_days(Days::new(self.days as u64)).is_none() {
            return Err(ForecastError::DateOverflow(self.start));
        }
        Ok(())
    }
}

/// Fixed-date national holidays and special days for every year touched by
/// `[start, end]`. Movable feasts are left out.
pub fn philippine_holidays(start: NaiveDate, end: NaiveDate) -> HolidayCalendar {
    const FIXED: [(u32, u32); 14] = [
        (1, 1),
        (2, 25),
        (4, 9),
        (5, 1),
        (6, 12),
        (8, 21),
        (11, 1),
        (11, 2),
        (11, 30),
        (12, 8),
        (12, 24),
        (12, 25),
        (12, 30),
        (12, 31),
    ];
    (start.year()..=end.year())
        .flat_map(|y| FIXED.iter().filter_map(move |&(m, d)| NaiveDate::from_ymd_opt(y, m, d)))
        .filter(|d| (start..=end).contains(d))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Station-major, date-ascending; `exits` mirrors `entries`.
    pub records: Vec<RawRidershipRecord>,
    pub series: Vec<StationSeries>,
    pub holidays: HolidayCalendar,
}

impl SyntheticDataset {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), IngestError> {
        write_ridership_csv(sink, &self.records)
    }

    pub fn write_holidays<W: Write>(&self, sink: W) -> std::io::Result<()> {
        self.holidays.write(sink)
    }
}

/// `round(max(0, base·w(d)·h(d)·(1 + ε_d)))`, then lockdown days set to zero.
/// Noise is drawn station by station, day by day, from one seeded stream and
/// not at all when `noise_sigma` is zero.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset, ForecastError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half_width = spec.noise_sigma * 3f64.sqrt();
    let noise = (half_width > 0.0).then(|| Uniform::new_inclusive(-half_width, half_width));
    let dates: Vec<NaiveDate> = (0..spec.days as u64).map(|k| spec.start + Days::new(k)).collect();

    let mut records = Vec::with_capacity(spec.days * spec.n_stations());
    let mut series = Vec::with_capacity(spec.n_stations());
    for profile in &spec.stations {
        let mut observations = Vec::with_capacity(spec.days);
        for &date in &dates {
            let w = if is_weekend(date) { profile.weekend_factor } else { 1.0 };
            let h = if spec.holidays.contains(date) { profile.holiday_factor } else { 1.0 };
            let eps = noise.as_ref().map_or(0.0, |u| u.sample(&mut rng));
            let mut value = (profile.base_level * w * h * (1.0 + eps)).max(0.0).round() as u64;
            if spec.lockdown_windows.iter().any(|(a, b)| (*a..=*b).contains(&date)) {
                value = 0;
            }
            records.push(RawRidershipRecord {
                station: profile.name.clone(),
                date,
                entries: value,
                exits: value,
            });
            observations.push(CleanObservation::new(date, value, &spec.holidays));
        }
        series.push(StationSeries::new(profile.name.clone(), observations)?);
    }
    Ok(SyntheticDataset {
        records,
        series,
        holidays: spec.holidays.clone(),
    })
}
