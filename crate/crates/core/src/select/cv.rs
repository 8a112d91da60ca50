use serde::{Deserialize, Serialize};

use super::SelectError;

/// One expanding-window fold. Training rows are `[0, train_end)` and test rows
/// `[test_start, test_end)`; `train_end == test_start` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_end: usize,
    pub test_start: usize,
    pub test_end: usize,
}

impl Fold {
    pub fn train(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn test(&self) -> std::ops::Range<usize> {
        self.test_start..self.test_end
    }
}

/// Fewest training rows the first fold of a command-line search may have.
pub const MIN_TRAIN_ROWS: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingCVPlan {
    pub n: usize,
    pub k: usize,
    pub h: usize,
    pub folds: Vec<Fold>,
}

/// Rolling-origin plan whose `k` test blocks of length `h` tile the last
/// `k·h` rows. Fold `j` (1-based) tests on `[n − (k−j+1)·h, n − (k−j)·h)`.
pub fn make_rolling_splits(n: usize, k: usize, h: usize, min_train: usize) -> Result<RollingCVPlan, SelectError> {
    if k == 0 || h == 0 {
        return Err(SelectError::InvalidPlan(format!("folds ({k}) and horizon ({h}) must be >= 1")));
    }
    if min_train == 0 {
        return Err(SelectError::InvalidPlan("min_train must be >= 1".into()));
    }
    let required = k
        .checked_mul(h)
        .and_then(|kh| kh.checked_add(min_train))
        .ok_or_else(|| SelectError::InvalidPlan("plan size overflows".into()))?;
    if n < required {
        return Err(SelectError::SeriesTooShort { n, required });
    }
    let folds = (1..=k)
        .map(|j| {
            let test_start = n - (k - j + 1) * h;
            Fold {
                train_end: test_start,
                test_start,
                test_end: n - (k - j) * h,
            }
        })
        .collect();
    Ok(RollingCVPlan { n, k, h, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_rows_five_weekly_folds() {
        let plan = make_rolling_splits(100, 5, 7, 28).unwrap();
        let got: Vec<_> = plan.folds.iter().map(|f| (f.train_end, f.test_start, f.test_end)).collect();
        assert_eq!(got, vec![(65, 65, 72), (72, 72, 79), (79, 79, 86), (86, 86, 93), (93, 93, 100)]);
    }

    #[test]
    fn boundary_length() {
        let plan = make_rolling_splits(45, 5, 7, 10).unwrap();
        assert_eq!(plan.folds[0].train(), 0..10);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            make_rolling_splits(34, 5, 7, 10),
            Err(SelectError::SeriesTooShort { n: 34, required: 45 })
        ));
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(make_rolling_splits(100, 0, 7, 1).is_err());
        assert!(make_rolling_splits(100, 5, 0, 1).is_err());
        assert!(make_rolling_splits(100, 5, 7, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_tile_the_tail(k in 1usize..8, h in 1usize..15, min_train in 1usize..40, extra in 0usize..50) {
            let n = k * h + min_train + extra;
            let plan = make_rolling_splits(n, k, h, min_train).unwrap();
            prop_assert_eq!(plan.folds.len(), k);
            prop_assert_eq!(plan.folds[0].test_start, n - k * h);
            prop_assert_eq!(plan.folds[k - 1].test_end, n);
            for w in plan.folds.windows(2) {
                prop_assert_eq!(w[0].test_end, w[1].test_start);
                prop_assert!(w[0].train_end < w[1].train_end);
            }
            for f in &plan.folds {
                prop_assert_eq!(f.test_end - f.test_start, h);
                prop_assert_eq!(f.train_end, f.test_start);
                prop_assert!(f.train_end >= min_train);
            }
        }
    }
}
