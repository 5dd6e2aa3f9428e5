//! The Gaussian null: a centered normal with diagonal covariance whose
//! eigenvalues follow a factor-analysis model (low-rank signal plus a constant
//! background-noise floor), estimated from the observations of one node.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, ShcError};
use crate::linalg::symmetric_eigenvalues;
use crate::rng;
use crate::scalar::Scalar;
use crate::stats;

/// Phi^{-1}(0.75): makes the MAD a consistent estimate of a Gaussian scale.
pub const MAD_CONSISTENCY: f64 = 0.6744898;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Hard,
    Soft,
    Sample,
}

impl std::str::FromStr for EigenMethod {
    type Err = ShcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(EigenMethod::Hard),
            "soft" => Ok(EigenMethod::Soft),
            "sample" => Ok(EigenMethod::Sample),
            other => Err(ShcError::InvalidConfig(format!(
                "unknown eigen method {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel<T> {
    /// Null covariance eigenvalues, length p, descending.
    pub eigenvalues: Vec<T>,
    pub sigma_b_sq: T,
    pub method: EigenMethod,
    pub n_source: usize,
    /// Sample spectrum before padding and thresholding.
    pub raw_eigenvalues: Vec<T>,
}

impl<T: Scalar> NullModel<T> {
    /// A null with a known spectrum, bypassing estimation.
    pub fn known(mut eigenvalues: Vec<T>) -> Result<Self> {
        if eigenvalues.is_empty()
            || eigenvalues
                .iter()
                .any(|v| !(v.is_finite() && *v >= T::zero()))
        {
            return Err(ShcError::InvalidConfig(
                "known spectrum must be finite and nonnegative".into(),
            ));
        }
        eigenvalues.sort_by(|a, b| stats::cmp(b, a));
        let floor = eigenvalues[eigenvalues.len() - 1];
        Ok(NullModel {
            raw_eigenvalues: eigenvalues.clone(),
            eigenvalues,
            sigma_b_sq: floor,
            method: EigenMethod::Sample,
            n_source: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Nonzero-candidate eigenvalues of the sample covariance (divisor N - 1),
/// descending, length `min(N - 1, p)`. Uses the N x N Gram matrix when p > N.
pub fn sample_cov_eigenvalues<T: Scalar>(data: &DataMatrix<T>) -> Result<Vec<T>> {
    let (n, p) = (data.n_obs(), data.n_vars());
    if n < 2 {
        return Err(ShcError::TooFewObservations { need: 2, got: n });
    }
    let xc = data.column_centered();
    let denom = T::of_usize(n - 1);
    let cross = if p > n {
        xc.dot(&xc.t())
    } else {
        xc.t().dot(&xc)
    };
    let mut ev = symmetric_eigenvalues(&cross.mapv(|v| v / denom));
    ev.truncate((n - 1).min(p));
    for v in &mut ev {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    Ok(ev)
}

/// Background-noise variance from the MAD of all column-centered entries.
pub fn estimate_sigma_b_sq<T: Scalar>(data: &DataMatrix<T>) -> Result<T> {
    let xc = data.column_centered();
    let entries: Vec<T> = xc.iter().copied().collect();
    let mad = stats::mad(&entries);
    if !(mad > T::zero()) {
        return Err(ShcError::DegenerateData(
            "median absolute deviation is zero".into(),
        ));
    }
    let s = mad / T::of(MAD_CONSISTENCY);
    Ok(s * s)
}

/// Fits the null spectrum from a node's observations.
pub fn fit_null<T: Scalar>(data: &DataMatrix<T>, method: EigenMethod) -> Result<NullModel<T>> {
    let p = data.n_vars();
    let raw = sample_cov_eigenvalues(data)?;
    let sigma_b_sq = estimate_sigma_b_sq(data)?;
    let mut padded = raw.clone();
    padded.resize(p, T::zero());
    let eigenvalues = match method {
        EigenMethod::Sample => padded,
        EigenMethod::Hard => padded.iter().map(|&l| l.max(sigma_b_sq)).collect(),
        EigenMethod::Soft => soft_threshold(&padded, sigma_b_sq),
    };
    Ok(NullModel {
        eigenvalues,
        sigma_b_sq,
        method,
        n_source: data.n_obs(),
        raw_eigenvalues: raw,
    })
}

/// `max(lambda_j - tau, floor)` with `tau >= 0` chosen by bisection so the
/// total equals the raw total. When the raw total is below `p * floor` no
/// such tau exists and the spectrum saturates at the floor.
pub fn soft_threshold<T: Scalar>(padded: &[T], floor: T) -> Vec<T> {
    let lam: Vec<f64> = padded.iter().map(|v| v.f64()).collect();
    let sb = floor.f64();
    let target: f64 = lam.iter().sum();
    let total = |tau: f64| lam.iter().map(|&l| (l - tau).max(sb)).sum::<f64>();

    let tau = if target <= lam.len() as f64 * sb {
        f64::INFINITY
    } else if total(0.0) <= target {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, lam.iter().copied().fold(0.0, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    lam.iter().map(|&l| T::of((l - tau).max(sb))).collect()
}

/// `n` independent draws from N(0, diag(eigenvalues)), row by row from one stream.
pub fn sample_null<T: Scalar>(model: &NullModel<T>, n: usize, seed: u64) -> Result<DataMatrix<T>> {
    if n < 2 {
        return Err(ShcError::TooFewObservations { need: 2, got: n });
    }
    let mut rng = rng::stream(seed, &[]);
    let sd: Vec<f64> = model
        .eigenvalues
        .iter()
        .map(|v| v.f64().max(0.0).sqrt())
        .collect();
    let p = sd.len();
    let mut values = Vec::with_capacity(n * p);
    for _ in 0..n {
        for &s in &sd {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(T::of(z * s));
        }
    }
    let values = Array2::from_shape_vec((n, p), values).expect("shape matches buffer");
    DataMatrix::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_rows_have_zero_spectrum() {
        let d = DataMatrix::<f64>::new(array![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        let ev = sample_cov_eigenvalues(&d).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn one_axis_spread() {
        let d = DataMatrix::<f64>::new(array![[-1.0, 0.0], [1.0, 0.0]]).unwrap();
        let ev = sample_cov_eigenvalues(&d).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0] - 2.0).abs() < 1e-14);
        let model = fit_null(
            &DataMatrix::new(array![[-1.0, 0.5], [1.0, 0.0], [0.0, -0.5]]).unwrap(),
            EigenMethod::Sample,
        )
        .unwrap();
        assert_eq!(model.eigenvalues.len(), 2);
    }

    #[test]
    fn sigma_scales_quadratically() {
        let d = DataMatrix::<f64>::new(array![[1.0, 4.0], [2.0, -1.0], [7.0, 0.5], [3.0, 3.0]]).unwrap();
        let s1 = estimate_sigma_b_sq(&d).unwrap();
        let scaled = DataMatrix::new(d.values() * 3.0).unwrap();
        let s3 = estimate_sigma_b_sq(&scaled).unwrap();
        assert!((s3 - 9.0 * s1).abs() < 1e-10 * s3);
    }

    #[test]
    fn constant_matrix_is_degenerate() {
        let d = DataMatrix::new(array![[2.0, 2.0], [2.0, 2.0]]).unwrap();
        assert!(matches!(
            estimate_sigma_b_sq(&d),
            Err(ShcError::DegenerateData(_))
        ));
    }

    #[test]
    fn hard_threshold_floors_small_values() {
        let out = fit_null(
            &DataMatrix::new(array![
                [0.0, 0.0, 0.0],
                [4.0, 1.0, 0.0],
                [1.0, 3.0, 1.0],
                [9.0, 2.0, 2.0]
            ])
            .unwrap(),
            EigenMethod::Hard,
        )
        .unwrap();
        let mut padded = out.raw_eigenvalues.clone();
        padded.resize(3, 0.0);
        for (l, r) in out.eigenvalues.iter().zip(&padded) {
            assert_eq!(*l, f64::max(*r, out.sigma_b_sq));
        }
    }

    #[test]
    fn soft_threshold_preserves_total() {
        let padded = vec![50.0, 10.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let out = soft_threshold(&padded, 1.5);
        let total: f64 = out.iter().sum();
        assert!((total - 64.0).abs() < 1e-9 * 64.0);
        assert!(out.iter().all(|&v| v >= 1.5));
        assert!(out.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn soft_threshold_saturates_below_floor_total() {
        let out = soft_threshold(&[3.0, 1.0, 0.0, 0.0], 2.0);
        assert_eq!(out, vec![2.0; 4]);
    }

    #[test]
    fn zero_eigenvalue_gives_zero_column() {
        let model = NullModel::known(vec![2.0, 0.0]).unwrap();
        let x = sample_null(&model, 20, 5).unwrap();
        assert!(x.values().column(1).iter().all(|&v| v == 0.0));
        assert!(x.values().column(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = NullModel::known(vec![1.0, 2.0, 3.0]).unwrap();
        let a = sample_null(&model, 10, 99).unwrap();
        let b = sample_null(&model, 10, 99).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            sample_null(&model, 1, 0),
            Err(ShcError::TooFewObservations { .. })
        ));
    }
}
