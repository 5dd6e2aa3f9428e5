//! Small order-statistic and distribution helpers shared by the estimators.

use statrs::function::erf::erfc;

use crate::scalar::Scalar;

/// Median of a non-empty slice (average of the two middle values for even length).
pub fn median<T: Scalar>(values: &[T]) -> T {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, cmp);
    let upper = *upper;
    if v.len() % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(T::neg_infinity(), T::max);
        (lower + upper) / T::of(2.0)
    }
}

/// Median absolute deviation about the median, without a consistency constant.
pub fn mad<T: Scalar>(values: &[T]) -> T {
    let m = median(values);
    let dev: Vec<T> = values.iter().map(|&v| (v - m).abs()).collect();
    median(&dev)
}

/// Sample quantile with linear interpolation between order statistics
/// (the default "type 7" rule of R and NumPy).
pub fn quantile<T: Scalar>(values: &[T], prob: f64) -> T {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut v = values.to_vec();
    v.sort_by(cmp);
    let h = (v.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::of(h - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::of_usize(values.len())
}

/// Sample standard deviation with divisor n - 1.
pub fn sample_sd<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    let ss: T = values.iter().map(|&v| (v - m) * (v - m)).sum();
    (ss / T::of_usize(values.len() - 1)).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn mad_of_known_values() {
        // median 3, deviations 2 1 0 1 6 -> median 1
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 9.0]), 1.0);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.75), 4.0);
        assert!((quantile::<f64>(&[1.0, 2.0, 3.0, 4.0], 0.75) - 3.25).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(-1.6448536269514722) - 0.05).abs() < 1e-9);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
    }
}
