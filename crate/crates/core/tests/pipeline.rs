use chrono::NaiveDate;

use ridecast::ensemble::{load_model, save_model_to_string, ModelMetadata, TrainedModel};
use ridecast::forecast::{evaluate_holdout, forecast, generate_synthetic, importance_report, ForecastError, SyntheticSpec};
use ridecast::ingest::{
    build_design_matrix, clean, parse_ridership_csv, read_clean_csv, write_clean_csv, HolidayCalendar, StationSeries,
};
use ridecast::select::{
    default_grid, make_rolling_splits, search, select_best_per_station, FixedClock, SearchBudget, TrainingData,
    MIN_TRAIN_ROWS,
};

fn fit_best(series: &StationSeries, holidays: &HolidayCalendar, max_candidates: usize) -> Result<TrainedModel<f64>, ForecastError> {
    let design = build_design_matrix(series, holidays)?;
    let data = TrainingData::<f64>::from_design(&design);
    let plan = make_rolling_splits(data.len(), 3, 7, MIN_TRAIN_ROWS)?;
    let budget = SearchBudget {
        max_candidates,
        wall_clock_limit: None,
        ..SearchBudget::default()
    };
    let board = search(&series.station, &data, &plan, &budget, default_grid(1), &FixedClock)?;
    let best = board.best().expect("non-empty leaderboard");
    Ok(TrainedModel {
        payload: best.candidate.hyperparams.fit(&data.x, &data.y, best.candidate.seed)?,
        metadata: ModelMetadata {
            station: series.station.clone(),
            seed: best.candidate.seed,
            train_row_count: data.len(),
            cv_nrmse: best.mean_nrmse,
            cv_mape: best.mean_mape,
            trained_at: chrono::DateTime::from_timestamp(0, 0).unwrap(),
        },
    })
}

#[test]
fn raw_csv_to_clean_series_round_trip() {
    let data = generate_synthetic(&SyntheticSpec::new(3, 90, 0.05, 2)).unwrap();
    let mut raw = Vec::new();
    data.write_csv(&mut raw).unwrap();
    let records = parse_ridership_csv(raw.as_slice()).unwrap();
    assert_eq!(records, data.records);

    let cleaned: Vec<StationSeries> = data
        .series
        .iter()
        .map(|s| clean(&records, &s.station, &data.holidays).unwrap().series)
        .collect();
    assert_eq!(cleaned, data.series);

    let mut csv = Vec::new();
    write_clean_csv(&mut csv, &cleaned).unwrap();
    assert_eq!(read_clean_csv(csv.as_slice()).unwrap(), cleaned);
}

#[test]
fn noiseless_station_is_forecast_exactly() {
    let data = generate_synthetic(&SyntheticSpec::new(2, 140, 0.0, 5)).unwrap();
    let series = &data.series[1];
    let report = evaluate_holdout(|head| fit_best(head, &data.holidays, 42), series, &data.holidays, 7).unwrap();
    assert_eq!(report.holdout_days, 7);
    assert_eq!(report.excluded_zero_days, 0);
    assert!((report.accuracy - 100.0).abs() < 1e-9, "accuracy {}", report.accuracy);
}

#[test]
fn persisted_model_forecasts_identically() {
    let data = generate_synthetic(&SyntheticSpec::new(1, 120, 0.05, 8)).unwrap();
    let series = &data.series[0];
    let model = fit_best(series, &data.holidays, 3).unwrap();
    let reloaded: TrainedModel<f64> = load_model(save_model_to_string(&model).as_bytes()).unwrap();

    let a = forecast(&model, series, 14, &data.holidays).unwrap();
    let b = forecast(&reloaded, series, 14, &data.holidays).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 14);
    assert_eq!(a.rows[0].date, series.last_date().succ_opt().unwrap());
    assert!(a.rows.iter().all(|r| r.predicted_ridership >= 0.0));

    let imp = importance_report(&model, &series.station);
    let total: f64 = imp.shares.iter().map(|(_, s)| s).sum();
    assert!(imp.no_splits || (total - 1.0).abs() < 1e-12);
}

#[test]
fn lockdown_days_are_zero_and_excluded() {
    let mut spec = SyntheticSpec::new(1, 120, 0.0, 4);
    let start = spec.start;
    let last = start + chrono::Days::new(119);
    let window = (last - chrono::Days::new(2), last);
    spec.lockdown_windows.push(window);
    let data = generate_synthetic(&spec).unwrap();
    let series = &data.series[0];
    let zeros = series.observations().iter().filter(|o| o.ridership == 0).count();
    assert_eq!(zeros, 3);

    let report = evaluate_holdout(|head| fit_best(head, &data.holidays, 2), series, &data.holidays, 7).unwrap();
    assert_eq!(report.excluded_zero_days, 3);
    assert_eq!(report.per_day.iter().filter(|d| d.abs_pct_error.is_none()).count(), 3);
}

#[test]
fn selection_counts_every_family() {
    let data = generate_synthetic(&SyntheticSpec::new(2, 100, 0.05, 6)).unwrap();
    let boards: Vec<_> = data
        .series
        .iter()
        .map(|s| {
            let design = build_design_matrix(s, &data.holidays).unwrap();
            let d = TrainingData::<f64>::from_design(&design);
            let plan = make_rolling_splits(d.len(), 2, 7, MIN_TRAIN_ROWS).unwrap();
            let budget = SearchBudget {
                max_candidates: 3,
                wall_clock_limit: None,
                ..SearchBudget::default()
            };
            search(&s.station, &d, &plan, &budget, default_grid(0), &FixedClock).unwrap()
        })
        .collect();
    let selection = select_best_per_station(&boards).unwrap();
    assert_eq!(selection.registry.len(), 2);
    assert_eq!(selection.algorithm_counts.len(), 3);
    assert_eq!(selection.algorithm_counts.values().sum::<usize>(), 2);
}

#[test]
fn too_short_for_holdout() {
    let data = generate_synthetic(&SyntheticSpec::starting(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 1, 60, 0.0, 1)).unwrap();
    let short = data.series[0].head(20).unwrap();
    let err = evaluate_holdout(|head| fit_best(head, &data.holidays, 1), &short, &data.holidays, 7).unwrap_err();
    assert!(matches!(err, ForecastError::SeriesTooShort { .. }), "{err}");
}
