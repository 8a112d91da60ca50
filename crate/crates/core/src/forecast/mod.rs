//! Forecasts, holdout evaluation and importance reports for trained models,
//! plus the synthetic ridership generator.

mod synth;

use std::io::Write;

use chrono::{Days, NaiveDate};
use serde::Serialize;

pub use synth::{generate_synthetic, philippine_holidays, StationProfile, SyntheticDataset, SyntheticSpec, MRT3_STATIONS};

use crate::ensemble::{feature_importance, Algorithm, PredictError, TrainedModel};
use crate::ingest::{featurize, HolidayCalendar, IngestError, StationSeries, DATE_FORMAT};
use crate::scalar::Scalar;
use crate::select::{accuracy, mape, SelectError};
use crate::trees::TreeError;

/// Fewest head rows [`evaluate_holdout`] will train on.
pub const MIN_HOLDOUT_TRAIN_ROWS: usize = 14;

#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error("{0} must be >= 1")]
    ZeroLength(&'static str),
    #[error("station `{station}` has {n} rows, at least {required} are needed")]
    SeriesTooShort { station: String, n: usize, required: usize },
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fit(#[from] TreeError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("date overflow after {0}")]
    DateOverflow(NaiveDate),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastRow {
    pub date: NaiveDate,
    pub predicted_ridership: f64,
    /// The raw prediction was negative and has been replaced by zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub station: String,
    pub model_algorithm: Algorithm,
    pub horizon: usize,
    pub rows: Vec<ForecastRow>,
}

fn clamped_prediction<T: Scalar>(
    model: &TrainedModel<T>,
    date: NaiveDate,
    epoch: NaiveDate,
    holidays: &HolidayCalendar,
) -> Result<ForecastRow, ForecastError> {
    let raw = model
        .predict(&featurize(date, epoch, holidays)?)?
        .to_f64()
        .unwrap_or(f64::NAN);
    let clamped = raw < 0.0;
    Ok(ForecastRow {
        date,
        predicted_ridership: if clamped { 0.0 } else { raw },
        clamped,
    })
}

/// Predicts the `horizon` days after the series' last observation. Negative
/// predictions are reported as zero with `clamped` set.
pub fn forecast<T: Scalar>(
    model: &TrainedModel<T>,
    series: &StationSeries,
    horizon: usize,
    holidays: &HolidayCalendar,
) -> Result<ForecastReport, ForecastError> {
    if horizon == 0 {
        return Err(ForecastError::ZeroLength("horizon"));
    }
    model.check_calendar_schema()?;
    let last = series.last_date();
    let rows = (1..=horizon as u64)
        .map(|k| {
            let date = last
                .checked_add_days(Days::new(k))
                .ok_or(ForecastError::DateOverflow(last))?;
            clamped_prediction(model, date, series.epoch(), holidays)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForecastReport {
        station: series.station.clone(),
        model_algorithm: model.algorithm(),
        horizon,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationDay {
    pub date: NaiveDate,
    pub actual: u64,
    pub predicted: f64,
    /// Percent; `None` when the actual is zero and the day is excluded.
    pub abs_pct_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub station: String,
    pub algorithm: Algorithm,
    pub holdout_days: usize,
    pub per_day: Vec<EvaluationDay>,
    pub mape: f64,
    pub accuracy: f64,
    pub low_accuracy: bool,
    pub excluded_zero_days: usize,
}

/// Trains on all but the last `holdout` observations through `factory` and
/// scores clamped predictions for the withheld days.
pub fn evaluate_holdout<T, F>(
    factory: F,
    series: &StationSeries,
    holidays: &HolidayCalendar,
    holdout: usize,
) -> Result<EvaluationReport, ForecastError>
where
    T: Scalar,
    F: FnOnce(&StationSeries) -> Result<TrainedModel<T>, ForecastError>,
{
    if holdout == 0 {
        return Err(ForecastError::ZeroLength("holdout"));
    }
    let required = holdout + MIN_HOLDOUT_TRAIN_ROWS + 1;
    if series.len() < required {
        return Err(ForecastError::SeriesTooShort {
            station: series.station.clone(),
            n: series.len(),
            required,
        });
    }
    let split = series.len() - holdout;
    let head = series.head(split).expect("split inside the series");
    let model = factory(&head)?;
    model.check_calendar_schema()?;

    let tail = &series.observations()[split..];
    let mut per_day = Vec::with_capacity(holdout);
    let mut actual = Vec::with_capacity(holdout);
    let mut predicted = Vec::with_capacity(holdout);
    for obs in tail {
        let row = clamped_prediction(&model, obs.date, series.epoch(), holidays)?;
        let a = obs.ridership as f64;
        per_day.push(EvaluationDay {
            date: obs.date,
            actual: obs.ridership,
            predicted: row.predicted_ridership,
            abs_pct_error: (obs.ridership != 0).then(|| 100.0 * ((a - row.predicted_ridership) / a).abs()),
        });
        actual.push(a);
        predicted.push(row.predicted_ridership);
    }
    let score = mape(&actual, &predicted)?;
    let acc = accuracy(score.value);
    Ok(EvaluationReport {
        station: series.station.clone(),
        algorithm: model.algorithm(),
        holdout_days: holdout,
        per_day,
        mape: score.value,
        accuracy: acc.value,
        low_accuracy: acc.low_accuracy,
        excluded_zero_days: score.excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub station: String,
    /// Descending by share; equal shares keep feature declaration order.
    pub shares: Vec<(String, f64)>,
    pub dominant_feature: String,
    pub no_splits: bool,
}

pub fn importance_report<T: Scalar>(model: &TrainedModel<T>, station: &str) -> ImportanceReport {
    let imp = feature_importance(&model.payload);
    let mut shares: Vec<(String, f64)> = imp
        .shares
        .into_iter()
        .map(|(name, s)| (name, s.to_f64().unwrap_or(0.0)))
        .collect();
    shares.sort_by(|a, b| b.1.total_cmp(&a.1));
    ImportanceReport {
        station: station.to_string(),
        dominant_feature: shares.first().map(|(n, _)| n.clone()).unwrap_or_default(),
        shares,
        no_splits: imp.no_splits,
    }
}

fn write_pretty_json<W: Write, V: Serialize>(mut sink: W, value: &V) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut sink, value)?;
    sink.write_all(b"\n")
}

impl ForecastReport {
    /// `date,predicted`.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["date", "predicted"])?;
        for r in &self.rows {
            w.write_record([r.date.format(DATE_FORMAT).to_string(), r.predicted_ridership.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, sink: W) -> std::io::Result<()> {
        write_pretty_json(sink, self)
    }
}

impl EvaluationReport {
    /// `date,actual,predicted,abs_pct_error`; excluded days leave the error empty.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["date", "actual", "predicted", "abs_pct_error"])?;
        for d in &self.per_day {
            w.write_record([
                d.date.format(DATE_FORMAT).to_string(),
                d.actual.to_string(),
                d.predicted.to_string(),
                d.abs_pct_error.map(|e| e.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, sink: W) -> std::io::Result<()> {
        write_pretty_json(sink, self)
    }
}

impl ImportanceReport {
    pub fn write_json<W: Write>(&self, sink: W) -> std::io::Result<()> {
        write_pretty_json(sink, self)
    }
}
