//! The `ridecast` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 model or series error.
//! Diagnostics go to standard error; reports go to files or standard output.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ensemble::{load_model, save_model, ModelMetadata, PersistError, TrainedModel};
use crate::forecast::{evaluate_holdout, forecast, generate_synthetic, ForecastError, SyntheticSpec};
use crate::ingest::{
    build_design_matrix, clean, load_holidays, parse_ridership_csv, read_clean_csv, station_names, write_clean_csv,
    HolidayCalendar, IngestError, StationSeries, DATE_FORMAT,
};
use crate::select::{
    default_grid, make_rolling_splits, search, select_best_per_station, Leaderboard, SearchBudget, SelectError,
    SystemClock, TrainingData, MIN_TRAIN_ROWS,
};
use crate::trees::TreeError;

#[derive(Debug, Parser)]
#[command(name = "ridecast", version, about = "Daily station ridership forecasting with tree ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic raw ridership CSV and its holiday file.
    Synth(SynthArgs),
    /// Deduplicate and flag a raw CSV into the clean per-station schema.
    Clean(CleanArgs),
    /// Search the default grid per station and save the best model.
    Train(TrainArgs),
    /// Forecast the days after a station's last observation.
    Forecast(ForecastArgs),
    /// Refit saved models on all but the last days and score those days.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Raw CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Holiday file to write.
    #[arg(long)]
    pub holidays: PathBuf,
    #[arg(long, default_value_t = 13, value_parser = clap::value_parser!(u32).range(1..))]
    pub stations: u32,
    #[arg(long, default_value_t = 730, value_parser = clap::value_parser!(u32).range(60..))]
    pub days: u32,
    /// Relative noise standard deviation.
    #[arg(long, default_value_t = 0.05, value_parser = parse_noise)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// First day of the series.
    #[arg(long, value_parser = parse_date_arg)]
    pub start: Option<NaiveDate>,
    /// Zero-ridership window `START:END` (inclusive); repeatable.
    #[arg(long, value_parser = parse_window)]
    pub lockdown: Vec<(NaiveDate, NaiveDate)>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub holidays: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Clean CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Holiday file; defaults to the `is_holiday` flags of the input.
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    /// Directory for models, leaderboards and `summary.csv`.
    #[arg(long)]
    pub output: PathBuf,
    /// Station names to train, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    pub stations: Vec<String>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub folds: u32,
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: u32,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub patience: u32,
    #[arg(long, default_value_t = 42, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_candidates: u32,
    /// Per-station search budget in seconds; 0 disables it.
    #[arg(long, default_value_t = 300.0, value_parser = parse_seconds)]
    pub time_budget: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; the rayon default when omitted.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Clean CSV holding the station's history.
    #[arg(long)]
    pub input: PathBuf,
    /// Holiday file covering the forecast days.
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    /// Station to forecast; defaults to the station recorded in the model.
    #[arg(long)]
    pub station: Option<String>,
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Report file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// A single model file.
    #[arg(long, conflicts_with = "models", required_unless_present = "models")]
    pub model: Option<PathBuf>,
    /// A `train` output directory; every station with a model file is scored.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub stations: Vec<String>,
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..))]
    pub holdout: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Directory for per-station `<station>.evaluation.{csv,json}` reports.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
}

fn parse_date_arg(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|e| format!("`{s}` is not a YYYY-MM-DD date: {e}"))
}

fn parse_window(s: &str) -> Result<(NaiveDate, NaiveDate), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("`{s}` is not START:END"))?;
    let (a, b) = (parse_date_arg(a)?, parse_date_arg(b)?);
    if a > b {
        return Err(format!("window `{s}` ends before it starts"));
    }
    Ok((a, b))
}

fn parse_noise(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite value >= 0")),
    }
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    parse_noise(s)
}

/// A failed command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Model(_) => 3,
        }
    }
}

fn data_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<PersistError> for CliError {
    fn from(e: PersistError) -> Self {
        Self::Model(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        Self::Model(e.to_string())
    }
}

impl From<SelectError> for CliError {
    fn from(e: SelectError) -> Self {
        Self::Model(e.to_string())
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::Ingest(e) => e.into(),
            ForecastError::InvalidSpec(m) => Self::Usage(m),
            other => Self::Model(other.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => cmd_synth(a, err),
        Command::Clean(a) => cmd_clean(a, err),
        Command::Train(a) => with_threads(a.threads, || cmd_train(a, err)),
        Command::Forecast(a) => cmd_forecast(a, out),
        Command::Evaluate(a) => with_threads(a.threads, || cmd_evaluate(a, out, err)),
    }
}

fn with_threads<R: Send>(threads: Option<u32>, f: impl FnOnce() -> Result<R, CliError> + Send) -> Result<R, CliError> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

/// File-name form of a station: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn station_file_stem(station: &str) -> String {
    station
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

/// Writes through a temporary file in the target directory, then renames it
/// into place.
fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut (dyn Write + Send)) -> Result<(), Box<dyn std::error::Error>>,
{
    let fail = |e: &dyn std::fmt::Display| data_err(format!("writing {}", path.display()), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(|e| fail(&e))?;
        buf.flush().map_err(|e| fail(&e))?;
    }
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| data_err(format!("cannot read {}", path.display()), e))
}

fn read_series(path: &Path) -> Result<Vec<StationSeries>, CliError> {
    read_clean_csv(open(path)?).map_err(|e| data_err(path.display(), e))
}

fn resolve_holidays(path: Option<&Path>, series: &[StationSeries]) -> Result<HolidayCalendar, CliError> {
    match path {
        Some(p) => load_holidays(open(p)?).map_err(|e| data_err(p.display(), e)),
        None => Ok(HolidayCalendar::from_series(series)),
    }
}

fn pick_stations<'a>(all: &'a [StationSeries], wanted: &[String]) -> Result<Vec<&'a StationSeries>, CliError> {
    if wanted.is_empty() {
        return Ok(all.iter().collect());
    }
    wanted
        .iter()
        .map(|w| {
            all.iter()
                .find(|s| &s.station == w)
                .ok_or_else(|| CliError::Data(format!("station `{w}` not found in input")))
        })
        .collect()
}

fn cmd_synth(a: &SynthArgs, err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (n, days) = (a.stations as usize, a.days as usize);
    let mut spec = match a.start {
        Some(start) => SyntheticSpec::starting(start, n, days, a.noise, a.seed),
        None => SyntheticSpec::new(n, days, a.noise, a.seed),
    };
    spec.lockdown_windows = a.lockdown.clone();
    let data = generate_synthetic(&spec)?;
    write_atomic(&a.output, |w| Ok(data.write_csv(w)?))?;
    write_atomic(&a.holidays, |w| Ok(data.write_holidays(w)?))?;
    let _ = writeln!(
        err,
        "wrote {} rows for {} stations to {}",
        data.records.len(),
        data.series.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_clean(a: &CleanArgs, err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let records = parse_ridership_csv(open(&a.input)?).map_err(|e| data_err(a.input.display(), e))?;
    let holidays = load_holidays(open(&a.holidays)?).map_err(|e| data_err(a.holidays.display(), e))?;
    let mut cleaned = Vec::new();
    for station in station_names(&records) {
        let outcome = clean(&records, &station, &holidays)?;
        for w in &outcome.warnings {
            let _ = writeln!(err, "warning: {station}: {w}");
        }
        let _ = writeln!(err, "{station}: {} rows", outcome.series.len());
        cleaned.push(outcome.series);
    }
    write_atomic(&a.output, |w| Ok(write_clean_csv(w, &cleaned)?))?;
    let _ = writeln!(err, "read {} raw rows, wrote {} stations", records.len(), cleaned.len());
    Ok(())
}

fn cmd_train(a: &TrainArgs, err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let all = read_series(&a.input)?;
    let holidays = resolve_holidays(a.holidays.as_deref(), &all)?;
    let stations = pick_stations(&all, &a.stations)?;
    fs::create_dir_all(&a.output).map_err(|e| data_err(a.output.display(), e))?;
    let budget = SearchBudget {
        patience: a.patience as usize,
        max_candidates: a.max_candidates as usize,
        wall_clock_limit: (a.time_budget > 0.0).then(|| Duration::from_secs_f64(a.time_budget)),
        base_seed: a.seed,
    };
    let grid = default_grid(a.seed);

    let mut boards = Vec::with_capacity(stations.len());
    for series in stations {
        let station = &series.station;
        let design = build_design_matrix(series, &holidays)?;
        let plan = make_rolling_splits(design.len(), a.folds as usize, a.horizon as usize, MIN_TRAIN_ROWS)
            .map_err(|e| CliError::Model(format!("station `{station}`: {e}")))?;
        let data = TrainingData::<f64>::from_design(&design);
        let board = search(station, &data, &plan, &budget, grid.iter().copied(), &SystemClock::new())
            .map_err(|e| CliError::Model(format!("station `{station}`: {e}")))?;
        let best = board.best().expect("search returns at least one entry");
        let payload = best.candidate.hyperparams.fit(&data.x, &data.y, best.candidate.seed)?;
        let model = TrainedModel {
            payload,
            metadata: ModelMetadata {
                station: station.clone(),
                seed: best.candidate.seed,
                train_row_count: design.len(),
                cv_nrmse: best.mean_nrmse,
                cv_mape: best.mean_mape,
                trained_at: Utc::now(),
            },
        };
        let stem = station_file_stem(station);
        write_atomic(&a.output.join(format!("{stem}.model.json")), |w| Ok(save_model(&model, w)?))?;
        write_atomic(&a.output.join(format!("{stem}.leaderboard.csv")), |w| Ok(board.write_csv(w)?))?;
        write_atomic(&a.output.join(format!("{stem}.leaderboard.json")), |w| Ok(board.write_json(w)?))?;
        let _ = writeln!(
            err,
            "{station}: {} candidates, best #{} {} nrmse={:.6} accuracy={:.2} (stopped: {:?})",
            board.entries.len(),
            best.candidate.candidate_index,
            best.candidate.algorithm,
            best.mean_nrmse,
            best.mean_accuracy,
            board.stop_reason
        );
        boards.push(board);
    }
    write_summary(&a.output.join("summary.csv"), &boards)
}

/// `station,algorithm,cv_nrmse,cv_mape,cv_accuracy` rows in input order, then
/// one `# algorithm,count` footer line per algorithm.
fn write_summary(path: &Path, boards: &[Leaderboard]) -> Result<(), CliError> {
    let selection = select_best_per_station(boards)?;
    write_atomic(path, |w| {
        {
            let mut csv = csv::Writer::from_writer(&mut *w);
            csv.write_record(["station", "algorithm", "cv_nrmse", "cv_mape", "cv_accuracy"])?;
            for b in boards {
                let top = &selection.registry[&b.station];
                csv.write_record([
                    b.station.clone(),
                    top.candidate.algorithm.to_string(),
                    top.mean_nrmse.to_string(),
                    top.mean_mape.to_string(),
                    top.mean_accuracy.to_string(),
                ])?;
            }
            csv.flush()?;
        }
        for (algorithm, count) in &selection.algorithm_counts {
            writeln!(w, "# {algorithm},{count}")?;
        }
        Ok(())
    })
}

fn refit_on(model: &TrainedModel<f64>, head: &StationSeries, holidays: &HolidayCalendar) -> Result<TrainedModel<f64>, ForecastError> {
    let design = build_design_matrix(head, holidays)?;
    let data = TrainingData::<f64>::from_design(&design);
    let payload = model.payload.params().fit(&data.x, &data.y, model.metadata.seed)?;
    Ok(TrainedModel {
        payload,
        metadata: ModelMetadata {
            train_row_count: design.len(),
            ..model.metadata.clone()
        },
    })
}

fn load_model_file(path: &Path) -> Result<TrainedModel<f64>, CliError> {
    load_model(open(path)?).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))
}

fn cmd_forecast(a: &ForecastArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let model = load_model_file(&a.model)?;
    let all = read_series(&a.input)?;
    let holidays = resolve_holidays(a.holidays.as_deref(), &all)?;
    let station = a.station.clone().unwrap_or_else(|| model.metadata.station.clone());
    let series = pick_stations(&all, std::slice::from_ref(&station))?[0];
    let report = forecast(&model, series, a.horizon as usize, &holidays)?;
    let render = |w: &mut (dyn Write + Send)| -> Result<(), Box<dyn std::error::Error>> {
        match a.format {
            Format::Csv => report.write_csv(w)?,
            Format::Json => report.write_json(w)?,
        }
        Ok(())
    };
    match &a.output {
        Some(path) => write_atomic(path, render),
        None => render(out).map_err(|e| data_err("writing report", e)),
    }
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let all = read_series(&a.input)?;
    let holidays = resolve_holidays(a.holidays.as_deref(), &all)?;

    let mut jobs: Vec<(&StationSeries, PathBuf)> = Vec::new();
    if let Some(path) = &a.model {
        let station = match a.stations.as_slice() {
            [] => load_model_file(path)?.metadata.station,
            [one] => one.clone(),
            _ => return Err(CliError::Usage("--model scores one station; use --models for several".into())),
        };
        jobs.push((pick_stations(&all, std::slice::from_ref(&station))?[0], path.clone()));
    } else if let Some(dir) = &a.models {
        let explicit = !a.stations.is_empty();
        for series in pick_stations(&all, &a.stations)? {
            let path = dir.join(format!("{}.model.json", station_file_stem(&series.station)));
            if path.is_file() {
                jobs.push((series, path));
            } else if explicit {
                return Err(CliError::Model(format!("no model for `{}` in {}", series.station, dir.display())));
            }
        }
        if jobs.is_empty() {
            return Err(CliError::Model(format!("no model files for the input stations in {}", dir.display())));
        }
    }
    if let Some(dir) = &a.output {
        fs::create_dir_all(dir).map_err(|e| data_err(dir.display(), e))?;
    }

    let mut accuracies = Vec::with_capacity(jobs.len());
    for (series, path) in jobs {
        let model = load_model_file(&path)?;
        let report = evaluate_holdout(|head| refit_on(&model, head, &holidays), series, &holidays, a.holdout as usize)?;
        let _ = writeln!(
            out,
            "station={} algorithm={} holdout_days={} mape={:.2} accuracy={:.2} excluded_zero_days={}",
            series.station, report.algorithm, report.holdout_days, report.mape, report.accuracy, report.excluded_zero_days
        );
        if report.low_accuracy {
            let _ = writeln!(err, "warning: {}: accuracy below zero", series.station);
        }
        if let Some(dir) = &a.output {
            let stem = station_file_stem(&series.station);
            match a.format {
                Format::Csv => write_atomic(&dir.join(format!("{stem}.evaluation.csv")), |w| Ok(report.write_csv(w)?))?,
                Format::Json => write_atomic(&dir.join(format!("{stem}.evaluation.json")), |w| Ok(report.write_json(w)?))?,
            }
        }
        accuracies.push(report.accuracy);
    }
    if accuracies.len() > 1 {
        let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
        let _ = writeln!(out, "stations={} mean_accuracy={mean:.2}", accuracies.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("ridecast").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn file_stems() {
        assert_eq!(station_file_stem("North Avenue"), "North_Avenue");
        assert_eq!(station_file_stem("Taft/EDSA"), "Taft_EDSA");
        assert_eq!(station_file_stem("Boni"), "Boni");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["clean", "--holidays", "h", "--output", "o"]).0, 1);
        assert_eq!(run_args(&["synth", "--output", "a", "--holidays", "b", "--days", "10"]).0, 1);
        assert_eq!(run_args(&["evaluate", "--input", "x", "--model", "m", "--holdout", "0"]).0, 1);
        assert_eq!(run_args(&["frobnicate"]).0, 1);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("train"));
    }

    #[test]
    fn missing_input_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        let (code, _, err) = run_args(&[
            "train",
            "--input",
            missing.to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        assert!(err.contains("nope.csv"));
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        fs::write(&path, "old contents that are longer").unwrap();
        write_atomic(&path, |w| Ok(w.write_all(b"new")?)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "new");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
