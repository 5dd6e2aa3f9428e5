//! Per-node Monte Carlo significance tests and the root-down sequential
//! procedure that controls the family-wise error rate along the dendrogram.
//!
//! A node `j` joining `n_j` of the `N` observations is tested at the cutoff
//! `alpha * (n_j - 1) / (N - 1)`, and only once its parent has been rejected.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster_index::{
    kmeans_two_ci, stronger_than, two_means_ci, CiValue, ClusterIndexKind, Direction, KMeansConfig,
};
use crate::data::DataMatrix;
use crate::error::{Result, ShcError};
use crate::hclust::{agglomerate, node_split, ClusterAssignment, Dendrogram, LinkageKind};
use crate::null_model::{fit_null, sample_null, EigenMethod, NullModel};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::stats;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Seed coordinate reserved for the K-means search on observed data.
const OBSERVED_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShcVariant {
    /// K-means 2-means CI on observed and null data.
    Shc1,
    /// Linkage value of the hierarchical split.
    Shc2Linkage,
    /// 2-means CI of the hierarchical split.
    Shc2TwoMeans,
}

impl ShcVariant {
    pub fn index_kind(self) -> ClusterIndexKind {
        match self {
            ShcVariant::Shc2Linkage => ClusterIndexKind::LinkageValue,
            ShcVariant::Shc1 | ShcVariant::Shc2TwoMeans => ClusterIndexKind::TwoMeansCI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShcVariant::Shc1 => "shc1",
            ShcVariant::Shc2Linkage => "shc2-l",
            ShcVariant::Shc2TwoMeans => "shc2-2",
        }
    }
}

impl std::str::FromStr for ShcVariant {
    type Err = ShcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shc1" => Ok(ShcVariant::Shc1),
            "shc2-l" | "shc2l" | "shc2_l" => Ok(ShcVariant::Shc2Linkage),
            "shc2-2" | "shc22" | "shc2_2" => Ok(ShcVariant::Shc2TwoMeans),
            other => Err(ShcError::InvalidConfig(format!(
                "unknown variant {other:?}"
            ))),
        }
    }
}

/// Which p-value drives the rejection decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueKind {
    #[default]
    Empirical,
    Gaussian,
}

impl std::str::FromStr for PValueKind {
    type Err = ShcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" => Ok(PValueKind::Empirical),
            "gaussian" => Ok(PValueKind::Gaussian),
            other => Err(ShcError::InvalidConfig(format!(
                "unknown p-value kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShcConfig {
    pub variant: ShcVariant,
    pub n_sim: usize,
    pub alpha: f64,
    pub n_min: usize,
    pub eigen_method: EigenMethod,
    pub linkage: LinkageKind,
    pub seed: u64,
    pub p_value: PValueKind,
    pub kmeans: KMeansConfig,
    /// Known null spectrum used instead of estimating one at each node.
    /// Only meaningful for calibration studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_null: Option<Vec<f64>>,
}

impl Default for ShcConfig {
    fn default() -> Self {
        ShcConfig {
            variant: ShcVariant::Shc2TwoMeans,
            n_sim: 100,
            alpha: 0.05,
            n_min: 10,
            eigen_method: EigenMethod::Soft,
            linkage: LinkageKind::Ward,
            seed: 0,
            p_value: PValueKind::Empirical,
            kmeans: KMeansConfig::default(),
            known_null: None,
        }
    }
}

impl ShcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sim < 1 {
            return Err(ShcError::InvalidConfig("n_sim must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ShcError::InvalidConfig(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        if self.n_min < 3 {
            return Err(ShcError::InvalidConfig("n_min must be at least 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTestResult<T> {
    pub node: usize,
    pub n_j: usize,
    pub observed: Option<CiValue<T>>,
    pub null_indices: Vec<T>,
    pub p_empirical: Option<f64>,
    pub p_gaussian: Option<f64>,
    /// Set when the null indices have zero spread and the Gaussian fit fell back to 0 or 1.
    pub degenerate_nulls: bool,
    pub alpha_star: f64,
    pub tested: bool,
    pub rejected: bool,
}

impl<T> NodeTestResult<T> {
    pub fn p_value(&self, kind: PValueKind) -> Option<f64> {
        match kind {
            PValueKind::Empirical => self.p_empirical,
            PValueKind::Gaussian => self.p_gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShcReport<T> {
    pub schema_version: u32,
    pub config: ShcConfig,
    pub dendrogram: Dendrogram<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_labels: Option<Vec<String>>,
    pub results: BTreeMap<usize, NodeTestResult<T>>,
    /// Rejected nodes in breadth-first order from the root.
    pub significant: Vec<usize>,
    pub k_hat: usize,
}

/// Two sides of an internal node, as row indices into the node's own subset.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit<T> {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Merge height of the node in the observed dendrogram.
    pub height: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub p: f64,
    pub degenerate: bool,
}

/// Tail probability of the observed index under a normal fitted to the null
/// indices (sample sd, divisor B - 1), in the direction of stronger clustering.
/// With zero spread the p-value is 0 if the observed index is stronger than the
/// common null value and 1 otherwise, and the result is flagged.
pub fn gaussian_fit_p<T: Scalar>(null_indices: &[T], observed: &CiValue<T>) -> GaussianFit {
    let degenerate = |common: T| {
        let stronger = match observed.direction() {
            Direction::SmallerIsStronger => observed.value < common,
            Direction::LargerIsStronger => observed.value > common,
        };
        GaussianFit {
            p: if stronger { 0.0 } else { 1.0 },
            degenerate: true,
        }
    };
    if null_indices.len() < 2 {
        return degenerate(null_indices.first().copied().unwrap_or(observed.value));
    }
    let mean = stats::mean(null_indices).f64();
    let sd = stats::sample_sd(null_indices).f64();
    if !(sd > 0.0) {
        return degenerate(null_indices[0]);
    }
    let z = (observed.value.f64() - mean) / sd;
    let p = match observed.direction() {
        Direction::SmallerIsStronger => stats::normal_cdf(z),
        Direction::LargerIsStronger => stats::normal_cdf(-z),
    };
    GaussianFit {
        p,
        degenerate: false,
    }
}

/// Fraction of null indices strictly stronger than the observed one.
pub fn empirical_p<T: Scalar>(null_indices: &[T], observed: &CiValue<T>) -> f64 {
    let stronger = null_indices
        .iter()
        .filter(|&&v| {
            stronger_than(
                &CiValue {
                    value: v,
                    kind: observed.kind,
                },
                observed,
            )
            .unwrap_or(false)
        })
        .count();
    stronger as f64 / null_indices.len() as f64
}

/// Monte Carlo test at one node. `node` seeds the per-simulation streams; the
/// returned result carries p-values but no cutoff or decision yet.
pub fn node_test<T: Scalar>(
    subset: &DataMatrix<T>,
    split: &NodeSplit<T>,
    config: &ShcConfig,
    node: usize,
) -> Result<NodeTestResult<T>> {
    let n_j = subset.n_obs();
    if split.left.len() + split.right.len() != n_j {
        return Err(ShcError::InvalidData(
            "split does not cover the node's observations".into(),
        ));
    }
    if n_j < config.n_min {
        return Err(ShcError::NodeTooSmall {
            n_j,
            n_min: config.n_min,
        });
    }

    let observed = match config.variant {
        ShcVariant::Shc2Linkage => CiValue::linkage(split.height),
        ShcVariant::Shc2TwoMeans => {
            two_means_ci(subset, &ClusterAssignment::from_split(n_j, &split.left)?)?
        }
        ShcVariant::Shc1 => {
            let seed = derive_seed(config.seed, &[node as u64, OBSERVED_STREAM]);
            kmeans_two_ci(subset, config.kmeans.restarts, config.kmeans.max_iter, seed)?.0
        }
    };

    let model = match &config.known_null {
        Some(spectrum) => {
            if spectrum.len() != subset.n_vars() {
                return Err(ShcError::InvalidConfig(format!(
                    "known null has {} eigenvalues for {} variables",
                    spectrum.len(),
                    subset.n_vars()
                )));
            }
            NullModel::known(spectrum.iter().map(|&v| T::of(v)).collect())?
        }
        None => fit_null(subset, config.eigen_method)?,
    };

    let null_indices = (0..config.n_sim)
        .into_par_iter()
        .map(|b| {
            let seed = derive_seed(config.seed, &[node as u64, b as u64]);
            let x = sample_null(&model, n_j, seed)?;
            null_index(&x, config, seed)
        })
        .collect::<Result<Vec<T>>>()?;

    let p_empirical = empirical_p(&null_indices, &observed);
    let fit = gaussian_fit_p(&null_indices, &observed);
    Ok(NodeTestResult {
        node,
        n_j,
        observed: Some(observed),
        null_indices,
        p_empirical: Some(p_empirical),
        p_gaussian: Some(fit.p),
        degenerate_nulls: fit.degenerate,
        alpha_star: f64::NAN,
        tested: true,
        rejected: false,
    })
}

fn null_index<T: Scalar>(x: &DataMatrix<T>, config: &ShcConfig, seed: u64) -> Result<T> {
    match config.variant {
        ShcVariant::Shc2Linkage => {
            let dend = agglomerate(x, config.linkage)?;
            dend.height(dend.root())
        }
        ShcVariant::Shc2TwoMeans => {
            let dend = agglomerate(x, config.linkage)?;
            let (left, _) = node_split(&dend, dend.root())?;
            Ok(two_means_ci(x, &ClusterAssignment::from_split(x.n_obs(), &left)?)?.value)
        }
        ShcVariant::Shc1 => {
            let seed = derive_seed(seed, &[OBSERVED_STREAM]);
            Ok(
                kmeans_two_ci(x, config.kmeans.restarts, config.kmeans.max_iter, seed)?
                    .0
                    .value,
            )
        }
    }
}

/// Modified cutoff for a node holding `n_j` of `n` observations.
pub fn alpha_star(alpha: f64, n_j: usize, n: usize) -> f64 {
    alpha * (n_j as f64 - 1.0) / (n as f64 - 1.0)
}

/// Clusters the data and walks the dendrogram breadth-first from the root,
/// testing a node only when its parent was rejected and it holds at least
/// `n_min` observations.
pub fn run_shc<T: Scalar>(data: &DataMatrix<T>, config: &ShcConfig) -> Result<ShcReport<T>> {
    config.validate()?;
    let n = data.n_obs();
    let need = config.n_min.max(4);
    if n < need {
        return Err(ShcError::TooFewObservations { need, got: n });
    }
    let dend = agglomerate(data, config.linkage)?;
    run_shc_on(data, dend, config)
}

/// Runs the sequential procedure on a precomputed dendrogram of `data`.
pub fn run_shc_on<T: Scalar>(
    data: &DataMatrix<T>,
    dend: Dendrogram<T>,
    config: &ShcConfig,
) -> Result<ShcReport<T>> {
    config.validate()?;
    let n = data.n_obs();
    if dend.n_leaves != n {
        return Err(ShcError::InvalidData(
            "dendrogram does not match the data".into(),
        ));
    }
    let mut results = BTreeMap::new();
    let mut significant = Vec::new();
    let mut queue = VecDeque::from([dend.root()]);

    while let Some(node) = queue.pop_front() {
        let n_j = dend.size(node)?;
        let cutoff = alpha_star(config.alpha, n_j, n);
        if n_j < config.n_min {
            results.insert(
                node,
                NodeTestResult {
                    node,
                    n_j,
                    observed: None,
                    null_indices: Vec::new(),
                    p_empirical: None,
                    p_gaussian: None,
                    degenerate_nulls: false,
                    alpha_star: cutoff,
                    tested: false,
                    rejected: false,
                },
            );
            continue;
        }
        let leaves = dend.leaves(node)?;
        let subset = data.select_rows(&leaves);
        let (left, right) = node_split(&dend, node)?;
        let position = |ids: &[usize]| -> Vec<usize> {
            ids.iter()
                .map(|id| {
                    leaves
                        .binary_search(id)
                        .expect("child leaf lies under its parent")
                })
                .collect()
        };
        let split = NodeSplit {
            left: position(&left),
            right: position(&right),
            height: dend.height(node)?,
        };
        let mut result = node_test(&subset, &split, config, node)?;
        result.alpha_star = cutoff;
        let p = result
            .p_value(config.p_value)
            .expect("tested node carries p-values");
        result.rejected = p < cutoff;
        if result.rejected {
            significant.push(node);
            let (l, r) = dend.children(node)?;
            queue.extend([l, r].into_iter().filter(|&c| !dend.is_leaf(c)));
        }
        results.insert(node, result);
    }

    let k_hat = significant.len() + 1;
    Ok(ShcReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.clone(),
        leaf_labels: data.row_labels().map(<[String]>::to_vec),
        dendrogram: dend,
        results,
        significant,
        k_hat,
    })
}

/// Number of subtrees left after cutting at every significant node.
pub fn count_k_hat<T>(report: &ShcReport<T>) -> usize {
    report.significant.len() + 1
}

impl<T: Scalar> ShcReport<T> {
    /// Checks the sequential-procedure invariants: the significant set hangs
    /// off the root, every rejection beat its cutoff, cutoffs shrink downward.
    pub fn validate(&self) -> Result<()> {
        let dend = &self.dendrogram;
        dend.validate()?;
        let parents = dend.parents();
        let n = dend.n_leaves;
        let bad = |msg: String| Err(ShcError::InvalidData(msg));
        for r in self.results.values() {
            if (r.alpha_star - alpha_star(self.config.alpha, r.n_j, n)).abs() > 1e-12 {
                return bad(format!("node {} has a wrong cutoff", r.node));
            }
            if r.rejected {
                let p = r.p_value(self.config.p_value);
                if !r.tested || p.is_none_or(|p| p >= r.alpha_star) {
                    return bad(format!(
                        "node {} rejected without meeting its cutoff",
                        r.node
                    ));
                }
            }
            if let Some(parent) = parents[r.node] {
                match self.results.get(&parent) {
                    Some(pr) if pr.rejected => {
                        if r.alpha_star > pr.alpha_star {
                            return bad(format!("cutoff grows below node {parent}"));
                        }
                    }
                    _ => {
                        return bad(format!(
                            "node {} visited under an unrejected parent",
                            r.node
                        ))
                    }
                }
            }
            if let Some(p) = r.p_empirical {
                let b = r.null_indices.len() as f64;
                if ((p * b).round() - p * b).abs() > 1e-9 || !(0.0..=1.0).contains(&p) {
                    return bad(format!("node {} has an off-grid empirical p", r.node));
                }
            }
        }
        for &s in &self.significant {
            if !self.results.get(&s).is_some_and(|r| r.rejected) {
                return bad(format!("significant node {s} was not rejected"));
            }
        }
        if self.k_hat != count_k_hat(self) {
            return bad("k_hat does not match the significant set".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DataMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(Array2::from_shape_fn((n, p), |_| {
            StandardNormal.sample(&mut rng)
        }))
        .unwrap()
    }

    #[test]
    fn gaussian_p_at_mean_is_half() {
        let nulls = [0.4, 0.5, 0.6];
        let fit = gaussian_fit_p(&nulls, &CiValue::two_means(0.5));
        assert!((fit.p - 0.5).abs() < 1e-12);
        assert!(!fit.degenerate);
        let fit = gaussian_fit_p(&nulls, &CiValue::linkage(0.5));
        assert!((fit.p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_p_lower_tail_quantile() {
        let nulls = [0.4, 0.5, 0.6];
        let sd = 0.1; // sample sd with divisor 2
        let fit = gaussian_fit_p(&nulls, &CiValue::two_means(0.5 - 1.6448536269514722 * sd));
        assert!((fit.p - 0.05).abs() < 1e-9, "{}", fit.p);
        let fit = gaussian_fit_p(&nulls, &CiValue::linkage(0.5 + 1.6448536269514722 * sd));
        assert!((fit.p - 0.05).abs() < 1e-9, "{}", fit.p);
    }

    #[test]
    fn gaussian_p_degenerate_nulls() {
        let nulls = [0.5, 0.5, 0.5];
        let fit = gaussian_fit_p(&nulls, &CiValue::two_means(0.4));
        assert_eq!((fit.p, fit.degenerate), (0.0, true));
        let fit = gaussian_fit_p(&nulls, &CiValue::two_means(0.5));
        assert_eq!((fit.p, fit.degenerate), (1.0, true));
        let fit = gaussian_fit_p(&nulls, &CiValue::linkage(0.6));
        assert_eq!((fit.p, fit.degenerate), (0.0, true));
    }

    #[test]
    fn empirical_p_edge_cases() {
        let nulls: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        // observed linkage stronger than every null
        assert_eq!(empirical_p(&nulls, &CiValue::linkage(1000.0)), 0.0);
        // at the median, half the nulls are larger
        assert!((empirical_p(&nulls, &CiValue::linkage(50.5)) - 0.5).abs() <= 0.01);
        assert!((empirical_p(&nulls, &CiValue::two_means(50.5)) - 0.5).abs() <= 0.01);
        // ties are not counted as stronger
        assert_eq!(empirical_p(&[2.0, 2.0], &CiValue::linkage(2.0)), 0.0);
    }

    #[test]
    fn alpha_star_formula() {
        assert_eq!(alpha_star(0.05, 150, 150), 0.05);
        assert!((alpha_star(0.05, 96, 150) - 0.05 * 95.0 / 149.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = ShcConfig::default();
        c.validate().unwrap();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        c = ShcConfig {
            n_min: 2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = ShcConfig {
            n_sim: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn node_too_small() {
        let data = gaussian(6, 2, 1);
        let split = NodeSplit {
            left: vec![0, 1, 2],
            right: vec![3, 4, 5],
            height: 1.0,
        };
        let err = node_test(&data, &split, &ShcConfig::default(), 10).unwrap_err();
        assert!(matches!(err, ShcError::NodeTooSmall { n_j: 6, n_min: 10 }));
    }

    #[test]
    fn too_few_observations_for_run() {
        let err = run_shc(&gaussian(8, 2, 1), &ShcConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            ShcError::TooFewObservations { need: 10, got: 8 }
        ));
    }

    #[test]
    fn unrejected_root_stops_the_walk() {
        let data = gaussian(30, 3, 4);
        // A cutoff no p-value can beat.
        let config = ShcConfig {
            alpha: 1e-9,
            n_sim: 20,
            ..Default::default()
        };
        let report = run_shc(&data, &config).unwrap();
        assert_eq!(report.results.len(), 1);
        assert!(report.significant.is_empty());
        assert_eq!(report.k_hat, 1);
        report.validate().unwrap();
    }

    #[test]
    fn separated_groups_are_found() {
        let mut x = gaussian(40, 2, 9).into_values();
        for i in 20..40 {
            x[[i, 0]] += 12.0;
        }
        let data = DataMatrix::new(x).unwrap();
        for variant in [
            ShcVariant::Shc1,
            ShcVariant::Shc2Linkage,
            ShcVariant::Shc2TwoMeans,
        ] {
            let config = ShcConfig {
                variant,
                n_sim: 50,
                eigen_method: EigenMethod::Sample,
                ..Default::default()
            };
            let report = run_shc(&data, &config).unwrap();
            report.validate().unwrap();
            let root = &report.results[&report.dendrogram.root()];
            if variant.index_kind() == ClusterIndexKind::TwoMeansCI {
                assert_eq!(root.p_empirical, Some(0.0), "{variant:?}");
            }
            assert!(root.rejected, "{variant:?}");
            assert_eq!(report.k_hat, 2, "{variant:?}");
            assert_eq!(count_k_hat(&report), 2);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            ShcVariant::Shc1,
            ShcVariant::Shc2Linkage,
            ShcVariant::Shc2TwoMeans,
        ] {
            assert_eq!(v.name().parse::<ShcVariant>().unwrap(), v);
        }
    }
}
