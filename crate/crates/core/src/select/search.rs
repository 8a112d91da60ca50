use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, mape, nrmse, Leaderboard, LeaderboardEntry, RollingCVPlan, SelectError, StopReason};
use crate::ensemble::{Algorithm, ErtParams, GbParams, HyperParams, LgbmParams};
use crate::ingest::DesignMatrix;
use crate::matrix::FeatureMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub candidate_index: usize,
    pub algorithm: Algorithm,
    pub hyperparams: HyperParams,
    pub seed: u64,
}

impl CandidateSpec {
    /// The seed is `base_seed + candidate_index`.
    pub fn new(candidate_index: usize, hyperparams: HyperParams, base_seed: u64) -> Self {
        Self {
            candidate_index,
            algorithm: hyperparams.algorithm(),
            hyperparams,
            seed: base_seed.wrapping_add(candidate_index as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    /// Consecutive non-improving candidates tolerated.
    pub patience: usize,
    pub max_candidates: usize,
    /// `None` disables the wall-clock stop.
    pub wall_clock_limit: Option<Duration>,
    pub base_seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            patience: 20,
            max_candidates: 42,
            wall_clock_limit: Some(Duration::from_secs(300)),
            base_seed: 42,
        }
    }
}

impl SearchBudget {
    pub fn validate(&self) -> Result<(), SelectError> {
        if self.patience < 1 {
            return Err(SelectError::InvalidBudget("patience must be >= 1".into()));
        }
        if self.max_candidates < 1 {
            return Err(SelectError::InvalidBudget("max_candidates must be >= 1".into()));
        }
        Ok(())
    }
}

/// Time source for fit timing and the wall-clock budget.
pub trait Clock: Sync {
    fn elapsed(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// A clock that never advances: timings read zero and the wall-clock limit
/// never fires, which makes leaderboards reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock;

impl Clock for FixedClock {
    fn elapsed(&self) -> Duration {
        Duration::ZERO
    }
}

/// Features and targets in the learners' scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData<T> {
    pub x: FeatureMatrix<T>,
    pub y: Vec<T>,
}

impl<T: Real> TrainingData<T> {
    pub fn new(x: FeatureMatrix<T>, y: Vec<T>) -> Result<Self, SelectError> {
        if x.n_rows() != y.len() {
            return Err(SelectError::LengthMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn from_design(matrix: &DesignMatrix) -> Self {
        let y = matrix
            .targets
            .iter()
            .map(|&v| T::from_f64(v).expect("target representable"))
            .collect();
        Self { x: matrix.features(), y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub mean_nrmse: f64,
    pub mean_mape: f64,
    pub mean_accuracy: f64,
    pub fit_seconds: f64,
}

fn score_fold<T: Real>(spec: &CandidateSpec, data: &TrainingData<T>, fold: &super::Fold, number: usize) -> Result<(T, T), SelectError> {
    let x_train = data.x.slice_rows(fold.train());
    let model = spec
        .hyperparams
        .fit(&x_train, &data.y[fold.train()], spec.seed)
        .map_err(|source| SelectError::Fit { fold: number, source })?;
    let predicted = model.predict_matrix(&data.x.slice_rows(fold.test()));
    let actual = &data.y[fold.test()];
    let wrap = |source| SelectError::Score {
        fold: number,
        source: Box::new(source),
    };
    let n = nrmse(actual, &predicted).map_err(wrap)?;
    let m = mape(actual, &predicted).map_err(wrap)?;
    Ok((n, m.value))
}

/// Fits and scores the candidate on every fold; folds run in parallel but are
/// averaged in fold order, so the result does not depend on the thread count.
pub fn evaluate_candidate<T: Real>(
    spec: &CandidateSpec,
    data: &TrainingData<T>,
    plan: &RollingCVPlan,
    clock: &dyn Clock,
) -> Result<CandidateScore, SelectError> {
    if plan.n != data.len() {
        return Err(SelectError::PlanMismatch {
            plan: plan.n,
            rows: data.len(),
        });
    }
    let started = clock.elapsed();
    let per_fold: Vec<Result<(T, T), SelectError>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(j, fold)| score_fold(spec, data, fold, j + 1))
        .collect();
    let mut sum_nrmse = T::zero();
    let mut sum_mape = T::zero();
    for result in per_fold {
        let (n, m) = result?;
        sum_nrmse = sum_nrmse + n;
        sum_mape = sum_mape + m;
    }
    let k = T::from_count(plan.folds.len());
    let mean_mape = (sum_mape / k).to_f64().unwrap_or(f64::NAN);
    Ok(CandidateScore {
        mean_nrmse: (sum_nrmse / k).to_f64().unwrap_or(f64::NAN),
        mean_mape,
        mean_accuracy: accuracy(mean_mape).value,
        fit_seconds: clock.elapsed().saturating_sub(started).as_secs_f64(),
    })
}

/// The stopping rules and leaderboard assembly, with scoring supplied by the
/// caller. Candidates are consumed in stream order and must carry strictly
/// increasing indices.
pub fn search_with<F>(
    station: &str,
    budget: &SearchBudget,
    grid: impl IntoIterator<Item = CandidateSpec>,
    clock: &dyn Clock,
    mut score: F,
) -> Result<Leaderboard, SelectError>
where
    F: FnMut(&CandidateSpec) -> Result<CandidateScore, SelectError>,
{
    budget.validate()?;
    let start = clock.elapsed();
    let mut entries: Vec<LeaderboardEntry> = Vec::new();
    let mut best = f64::INFINITY;
    let mut misses = 0usize;
    let mut stop_reason = StopReason::GridExhausted;
    for spec in grid {
        if let Some(last) = entries.last() {
            if spec.candidate_index <= last.candidate.candidate_index {
                return Err(SelectError::InvalidPlan(format!(
                    "candidate {} arrived after {}",
                    spec.candidate_index, last.candidate.candidate_index
                )));
            }
            if budget
                .wall_clock_limit
                .is_some_and(|limit| clock.elapsed().saturating_sub(start) >= limit)
            {
                stop_reason = StopReason::WallClock;
                break;
            }
        }
        let s = score(&spec)?;
        if s.mean_nrmse < best {
            best = s.mean_nrmse;
            misses = 0;
        } else {
            misses += 1;
        }
        entries.push(LeaderboardEntry {
            candidate: spec,
            mean_nrmse: s.mean_nrmse,
            mean_mape: s.mean_mape,
            mean_accuracy: s.mean_accuracy,
            fit_seconds: s.fit_seconds,
        });
        if misses >= budget.patience {
            stop_reason = StopReason::Patience;
            break;
        }
        if entries.len() >= budget.max_candidates {
            stop_reason = StopReason::MaxCandidates;
            break;
        }
    }
    if entries.is_empty() {
        return Err(SelectError::NoCandidates);
    }
    entries.sort_by(|a, b| {
        a.mean_nrmse
            .total_cmp(&b.mean_nrmse)
            .then(a.candidate.candidate_index.cmp(&b.candidate.candidate_index))
    });
    Ok(Leaderboard {
        station: station.to_string(),
        entries,
        stop_reason,
    })
}

/// Rolling-origin search over `grid`, scoring each candidate with
/// [`evaluate_candidate`].
pub fn search<T: Real>(
    station: &str,
    data: &TrainingData<T>,
    plan: &RollingCVPlan,
    budget: &SearchBudget,
    grid: impl IntoIterator<Item = CandidateSpec>,
    clock: &dyn Clock,
) -> Result<Leaderboard, SelectError> {
    search_with(station, budget, grid, clock, |spec| evaluate_candidate(spec, data, plan, clock))
}

const ROUNDS: [usize; 3] = [50, 100, 200];

/// The fixed 42-candidate grid, interleaved GB → ERT → LGBM until the shorter
/// families run out; the last six candidates are GB.
pub fn default_grid(base_seed: u64) -> Vec<CandidateSpec> {
    let mut gb = Vec::new();
    for n_rounds in ROUNDS {
        for learning_rate in [0.05, 0.1, 0.3] {
            for max_depth in [3, 5] {
                gb.push(HyperParams::Gb(GbParams {
                    n_rounds,
                    learning_rate,
                    max_depth,
                    min_samples_leaf: 1,
                    min_gain: 0.0,
                }));
            }
        }
    }
    let mut ert = Vec::new();
    for n_trees in ROUNDS {
        for k_features in [3, 8] {
            for min_samples_split in [2, 10] {
                ert.push(HyperParams::Ert(ErtParams {
                    n_trees,
                    k_features,
                    min_samples_split,
                }));
            }
        }
    }
    let mut lgbm = Vec::new();
    for n_rounds in ROUNDS {
        for learning_rate in [0.05, 0.1] {
            for max_leaves in [7, 31] {
                lgbm.push(HyperParams::Lgbm(LgbmParams {
                    n_rounds,
                    learning_rate,
                    max_bins: 64,
                    max_leaves,
                    min_child_samples: 20,
                    lambda: 0.0,
                }));
            }
        }
    }
    let mut families = [gb.into_iter(), ert.into_iter(), lgbm.into_iter()];
    let mut out = Vec::new();
    loop {
        let before = out.len();
        for family in families.iter_mut() {
            if let Some(params) = family.next() {
                out.push(CandidateSpec::new(out.len(), params, base_seed));
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Winning leaderboard entry per station.
    pub registry: BTreeMap<String, LeaderboardEntry>,
    /// Stations won per algorithm; every algorithm is present.
    pub algorithm_counts: BTreeMap<Algorithm, usize>,
}

pub fn select_best_per_station<'a>(
    leaderboards: impl IntoIterator<Item = &'a Leaderboard>,
) -> Result<Selection, SelectError> {
    let mut registry = BTreeMap::new();
    let mut algorithm_counts: BTreeMap<Algorithm, usize> = Algorithm::ALL.iter().map(|&a| (a, 0)).collect();
    for board in leaderboards {
        let top = board
            .best()
            .ok_or_else(|| SelectError::EmptyLeaderboard(board.station.clone()))?;
        *algorithm_counts.entry(top.candidate.algorithm).or_default() += 1;
        registry.insert(board.station.clone(), top.clone());
    }
    Ok(Selection {
        registry,
        algorithm_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::make_rolling_splits;

    fn scripted(nrmses: &[f64], patience: usize) -> Leaderboard {
        let budget = SearchBudget {
            patience,
            max_candidates: 100,
            wall_clock_limit: None,
            base_seed: 0,
        };
        let grid: Vec<CandidateSpec> = (0..nrmses.len())
            .map(|i| CandidateSpec::new(i, HyperParams::Gb(GbParams::default()), 0))
            .collect();
        search_with("S", &budget, grid, &FixedClock, |spec| {
            let n = nrmses[spec.candidate_index];
            Ok(CandidateScore {
                mean_nrmse: n,
                mean_mape: n * 10.0,
                mean_accuracy: 100.0 - n * 10.0,
                fit_seconds: 0.0,
            })
        })
        .unwrap()
    }

    fn indices(board: &Leaderboard) -> Vec<usize> {
        board.entries.iter().map(|e| e.candidate.candidate_index).collect()
    }

    #[test]
    fn patience_two_stops_after_two_misses() {
        let board = scripted(&[0.5, 0.6, 0.7, 0.1], 2);
        assert_eq!(indices(&board), vec![0, 1, 2]);
        assert_eq!(board.stop_reason, StopReason::Patience);
    }

    #[test]
    fn improvement_resets_counter() {
        let board = scripted(&[0.5, 0.4, 0.6, 0.7, 0.05], 2);
        assert_eq!(indices(&board), vec![1, 0, 2, 3]);
    }

    #[test]
    fn grid_runs_out_first() {
        let board = scripted(&[0.5, 0.6, 0.7, 0.8, 0.9], 20);
        assert_eq!(board.entries.len(), 5);
        assert_eq!(board.stop_reason, StopReason::GridExhausted);
    }

    #[test]
    fn equal_scores_do_not_improve_and_sort_by_index() {
        let board = scripted(&[0.3, 0.3, 0.3], 2);
        assert_eq!(indices(&board), vec![0, 1, 2]);
        assert_eq!(board.stop_reason, StopReason::Patience);
    }

    #[test]
    fn max_candidates_caps() {
        let budget = SearchBudget {
            max_candidates: 2,
            wall_clock_limit: None,
            ..SearchBudget::default()
        };
        let board = search_with("S", &budget, default_grid(0), &FixedClock, |_| {
            Ok(CandidateScore {
                mean_nrmse: 1.0,
                mean_mape: 1.0,
                mean_accuracy: 99.0,
                fit_seconds: 0.0,
            })
        })
        .unwrap();
        assert_eq!(board.entries.len(), 2);
        assert_eq!(board.stop_reason, StopReason::MaxCandidates);
    }

    struct Ticking(std::sync::atomic::AtomicU64);

    impl Clock for Ticking {
        fn elapsed(&self) -> Duration {
            Duration::from_secs(self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst))
        }
    }

    #[test]
    fn wall_clock_checked_between_candidates() {
        let budget = SearchBudget {
            wall_clock_limit: Some(Duration::from_secs(3)),
            ..SearchBudget::default()
        };
        let clock = Ticking(0.into());
        let mut next = 1.0;
        let board = search_with("S", &budget, default_grid(0), &clock, |_| {
            next /= 2.0;
            Ok(CandidateScore {
                mean_nrmse: next,
                mean_mape: 0.0,
                mean_accuracy: 100.0,
                fit_seconds: 0.0,
            })
        })
        .unwrap();
        assert_eq!(board.stop_reason, StopReason::WallClock);
        assert_eq!(board.entries.len(), 3);
    }

    #[test]
    fn empty_grid() {
        let r = search_with("S", &SearchBudget::default(), Vec::new(), &FixedClock, |_| unreachable!());
        assert!(matches!(r, Err(SelectError::NoCandidates)));
    }

    #[test]
    fn grid_shape() {
        let grid = default_grid(7);
        assert_eq!(grid.len(), 42);
        assert_eq!(
            grid[..3].iter().map(|c| c.algorithm).collect::<Vec<_>>(),
            vec![Algorithm::Gb, Algorithm::Ert, Algorithm::Lgbm]
        );
        assert!(grid[36..].iter().all(|c| c.algorithm == Algorithm::Gb));
        for (i, c) in grid.iter().enumerate() {
            assert_eq!(c.candidate_index, i);
            assert_eq!(c.seed, 7 + i as u64);
        }
        assert_eq!(grid, default_grid(7));
        let count = |a| grid.iter().filter(|c| c.algorithm == a).count();
        assert_eq!((count(Algorithm::Gb), count(Algorithm::Ert), count(Algorithm::Lgbm)), (18, 12, 12));
    }

    fn constant_data(rows: usize, value: f64) -> TrainingData<f64> {
        let x = FeatureMatrix::from_columns(vec![(0..rows).map(|i| i as f64).collect()]).unwrap();
        TrainingData::new(x, vec![value; rows]).unwrap()
    }

    #[test]
    fn constant_series_uses_fallback() {
        let data = constant_data(40, 50.0);
        let plan = make_rolling_splits(40, 3, 4, 10).unwrap();
        let spec = CandidateSpec::new(0, HyperParams::Gb(GbParams::default()), 1);
        let s = evaluate_candidate(&spec, &data, &plan, &FixedClock).unwrap();
        assert_eq!((s.mean_nrmse, s.mean_mape, s.mean_accuracy), (0.0, 0.0, 100.0));
    }

    #[test]
    fn single_fold_means_are_that_fold() {
        let x = FeatureMatrix::from_columns(vec![(0..30).map(|i| (i % 7) as f64).collect()]).unwrap();
        let y: Vec<f64> = (0..30).map(|i| 100.0 + (i % 7) as f64 * 3.0 + (i % 3) as f64).collect();
        let data = TrainingData::new(x, y).unwrap();
        let plan = make_rolling_splits(30, 1, 5, 10).unwrap();
        let spec = CandidateSpec::new(0, HyperParams::Gb(GbParams::default()), 1);
        let s = evaluate_candidate(&spec, &data, &plan, &FixedClock).unwrap();
        let model = spec.hyperparams.fit(&data.x.slice_rows(0..25), &data.y[..25], 1).unwrap();
        let p = model.predict_matrix(&data.x.slice_rows(25..30));
        assert_eq!(s.mean_nrmse, nrmse(&data.y[25..], &p).unwrap());
        assert_eq!(s.mean_mape, mape(&data.y[25..], &p).unwrap().value);
        assert_eq!(s, evaluate_candidate(&spec, &data, &plan, &FixedClock).unwrap());
    }

    #[test]
    fn fold_errors_carry_fold_number() {
        let data = constant_data(40, 0.0);
        let plan = make_rolling_splits(40, 3, 4, 10).unwrap();
        let spec = CandidateSpec::new(0, HyperParams::Gb(GbParams::default()), 1);
        let err = evaluate_candidate(&spec, &data, &plan, &FixedClock).unwrap_err();
        assert!(matches!(err, SelectError::Score { fold: 1, .. }));
        let short = make_rolling_splits(39, 3, 4, 10).unwrap();
        assert!(matches!(
            evaluate_candidate(&spec, &data, &short, &FixedClock),
            Err(SelectError::PlanMismatch { .. })
        ));
    }

    #[test]
    fn selection_tallies() {
        let a = scripted(&[0.5, 0.4], 2);
        let mut b = a.clone();
        b.station = "T".into();
        let sel = select_best_per_station([&a, &b]).unwrap();
        assert_eq!(sel.registry.len(), 2);
        assert_eq!(sel.algorithm_counts.values().sum::<usize>(), 2);
        assert_eq!(sel.registry["S"].candidate.algorithm, sel.registry["T"].candidate.algorithm);
        let empty = Leaderboard {
            station: "E".into(),
            entries: vec![],
            stop_reason: StopReason::GridExhausted,
        };
        assert!(matches!(select_best_per_station([&empty]), Err(SelectError::EmptyLeaderboard(s)) if s == "E"));
    }
}
