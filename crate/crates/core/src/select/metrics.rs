use serde::Serialize;

use super::SelectError;
use crate::scalar::{Real, Scalar};

fn check_lengths<T>(actual: &[T], predicted: &[T]) -> Result<(), SelectError> {
    if actual.len() != predicted.len() {
        return Err(SelectError::LengthMismatch {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    Ok(())
}

/// `sqrt(mean((a − p)²))`.
pub fn rmse<T: Real>(actual: &[T], predicted: &[T]) -> Result<T, SelectError> {
    check_lengths(actual, predicted)?;
    let sse = actual
        .iter()
        .zip(predicted)
        .fold(T::zero(), |acc, (&a, &p)| acc + (a - p) * (a - p));
    Ok((sse / T::from_count(actual.len())).sqrt())
}

/// RMSE over the range of `actual`; a constant series falls back to `|mean|`.
pub fn nrmse<T: Real>(actual: &[T], predicted: &[T]) -> Result<T, SelectError> {
    let err = rmse(actual, predicted)?;
    let (lo, hi) = actual
        .iter()
        .fold((actual[0], actual[0]), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    let range = hi - lo;
    if range > T::zero() {
        return Ok(err / range);
    }
    let mean = actual.iter().fold(T::zero(), |acc, &a| acc + a) / T::from_count(actual.len());
    if mean.abs() > T::zero() {
        Ok(err / mean.abs())
    } else {
        Err(SelectError::DegenerateTarget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapeScore<T> {
    /// Percent.
    pub value: T,
    /// Observations skipped because the actual was zero.
    pub excluded: usize,
}

/// Mean absolute percentage error over the nonzero actuals.
pub fn mape<T: Real>(actual: &[T], predicted: &[T]) -> Result<MapeScore<T>, SelectError> {
    check_lengths(actual, predicted)?;
    let mut sum = T::zero();
    let mut used = 0usize;
    for (&a, &p) in actual.iter().zip(predicted) {
        if a != T::zero() {
            sum = sum + ((a - p) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(SelectError::AllActualsZero);
    }
    let hundred = T::from_f64(100.0).expect("100 representable");
    Ok(MapeScore {
        value: hundred * sum / T::from_count(used),
        excluded: actual.len() - used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracy<T> {
    pub value: T,
    pub low_accuracy: bool,
}

/// `100 − mape`, unclamped. Exact in rational arithmetic.
pub fn accuracy<T: Scalar>(mape_value: T) -> Accuracy<T> {
    let value = T::from_u8(100).expect("100 representable") - mape_value;
    Accuracy {
        value,
        low_accuracy: value < T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 10.0], &[5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(rmse(&[3.0], &[7.0]).unwrap(), 4.0);
    }

    #[test]
    fn rmse_errors() {
        assert!(matches!(rmse::<f64>(&[], &[]), Err(SelectError::EmptyInput)));
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(SelectError::LengthMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[0.0, 10.0], &[5.0, 5.0]).unwrap(), 0.5);
        assert_eq!(nrmse(&[3.0, 9.0, 1e6], &[3.0, 9.0, 1e6]).unwrap(), 0.0);
        assert_eq!(nrmse(&[4.0, 4.0], &[5.0, 5.0]).unwrap(), 0.25);
        assert_eq!(nrmse(&[-4.0, -4.0], &[-5.0, -5.0]).unwrap(), 0.25);
        assert!(matches!(nrmse(&[0.0, 0.0], &[1.0, 1.0]), Err(SelectError::DegenerateTarget)));
    }

    #[test]
    fn mape_examples() {
        let m = mape::<f64>(&[100.0, 200.0], &[90.0, 220.0]).unwrap();
        assert!((m.value - 10.0).abs() < 1e-12);
        assert_eq!(m.excluded, 0);
        assert_eq!(mape(&[0.0, 100.0], &[50.0, 100.0]).unwrap(), MapeScore { value: 0.0, excluded: 1 });
        assert_eq!(mape(&[7.0, 8.0], &[7.0, 8.0]).unwrap().value, 0.0);
        assert!(matches!(mape(&[0.0, 0.0], &[1.0, 1.0]), Err(SelectError::AllActualsZero)));
    }

    #[test]
    fn accuracy_examples() {
        let exact = accuracy(Ratio::<i128>::new(398, 100));
        assert_eq!(exact.value, Ratio::new(9602, 100));
        assert!((accuracy(3.98f64).value - 96.02).abs() < 1e-12);
        assert_eq!(accuracy(0.0f64).value, 100.0);
        let low = accuracy(120.0f64);
        assert_eq!(low.value, -20.0);
        assert!(low.low_accuracy);
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(1.0f64..1000.0, n),
                proptest::collection::vec(0.0f64..1000.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn nrmse_scale_invariant((a, p) in pairs(), c in 0.01f64..100.0) {
            prop_assume!(a.iter().any(|&v| v != a[0]));
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let base = nrmse(&a, &p).unwrap();
            prop_assert!((nrmse(&ca, &cp).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn mape_scale_invariant((a, p) in pairs(), c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let base = mape(&a, &p).unwrap().value;
            prop_assert!((mape(&ca, &cp).unwrap().value - base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn perfect_prediction_is_full_accuracy((a, _) in pairs()) {
            prop_assert_eq!(accuracy(mape(&a, &a).unwrap().value).value, 100.0);
        }
    }
}
