//! Mixture designs for power and level studies, replicate runners, and the
//! closed-form best-fit Gaussian spectrum of a two-component mixture.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::engine::{run_shc, PValueKind, ShcConfig, ShcVariant};
use crate::error::{Result, ShcError};
use crate::null_model::EigenMethod;
use crate::rng::{self, derive_seed};
use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    SpikeNull,
    TwoCluster,
    LineThree,
    TriangleThree,
    SquareFour,
    TetrahedronFour,
    RectangleFour,
    StretchedTetraFour,
}

impl DesignKind {
    pub const ALL: [DesignKind; 8] = [
        DesignKind::SpikeNull,
        DesignKind::TwoCluster,
        DesignKind::LineThree,
        DesignKind::TriangleThree,
        DesignKind::SquareFour,
        DesignKind::TetrahedronFour,
        DesignKind::RectangleFour,
        DesignKind::StretchedTetraFour,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::SpikeNull => "spike-null",
            DesignKind::TwoCluster => "two",
            DesignKind::LineThree => "line3",
            DesignKind::TriangleThree => "triangle3",
            DesignKind::SquareFour => "square4",
            DesignKind::TetrahedronFour => "tetra4",
            DesignKind::RectangleFour => "rectangle4",
            DesignKind::StretchedTetraFour => "stretched-tetra4",
        }
    }

    pub fn n_components(self) -> usize {
        match self {
            DesignKind::SpikeNull => 1,
            DesignKind::TwoCluster => 2,
            DesignKind::LineThree | DesignKind::TriangleThree => 3,
            _ => 4,
        }
    }

    /// Coordinates the means occupy before zero padding.
    pub fn embedding_dim(self) -> usize {
        match self {
            DesignKind::SpikeNull | DesignKind::TwoCluster | DesignKind::LineThree => 1,
            DesignKind::TriangleThree | DesignKind::SquareFour | DesignKind::RectangleFour => 2,
            DesignKind::TetrahedronFour | DesignKind::StretchedTetraFour => 3,
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = ShcError;

    fn from_str(s: &str) -> Result<Self> {
        DesignKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ShcError::InvalidDesign(format!("unknown design {s:?}")))
    }
}

/// Low-rank signal of the single-component null: the first `w` coordinates have variance `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub w: usize,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDesign {
    pub kind: DesignKind,
    pub p: usize,
    pub n_per_component: usize,
    pub delta: f64,
    pub spike: Option<Spike>,
    /// Per-component variances; `None` means all 1.
    pub sigmas: Option<Vec<f64>>,
}

impl MixtureDesign {
    pub fn new(kind: DesignKind, p: usize, n_per_component: usize, delta: f64) -> Self {
        MixtureDesign { kind, p, n_per_component, delta, spike: None, sigmas: None }
    }

    pub fn spike_null(p: usize, n: usize, w: usize, v: f64) -> Self {
        MixtureDesign { spike: Some(Spike { w, v }), ..Self::new(DesignKind::SpikeNull, p, n, 0.0) }
    }

    pub fn n_total(&self) -> usize {
        self.kind.n_components() * self.n_per_component
    }

    /// Soft thresholding when variables outnumber observations, the plain
    /// sample spectrum otherwise.
    pub fn default_eigen_method(&self) -> EigenMethod {
        if self.p > self.n_total() {
            EigenMethod::Soft
        } else {
            EigenMethod::Sample
        }
    }

    fn variance(&self, k: usize) -> f64 {
        self.sigmas.as_ref().map_or(1.0, |s| s[k])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ShcError::InvalidDesign(m));
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta {} must be finite and nonnegative", self.delta));
        }
        if self.p < self.kind.embedding_dim() {
            return bad(format!(
                "{} needs p >= {}, got {}",
                self.kind.name(),
                self.kind.embedding_dim(),
                self.p
            ));
        }
        if self.n_per_component < 1 {
            return bad("n_per_component must be positive".into());
        }
        if let Some(s) = &self.sigmas {
            if s.len() != self.kind.n_components() || s.iter().any(|&v| !(v > 0.0)) {
                return bad("need one positive variance per component".into());
            }
        }
        if self.kind == DesignKind::SpikeNull {
            match self.spike {
                Some(Spike { w, v }) if w <= self.p && v >= 1.0 => {}
                Some(_) => return bad("spike needs w <= p and v >= 1".into()),
                None => return bad("spike-null design needs a spike".into()),
            }
        }
        Ok(())
    }
}

/// Component means in R^p.
pub fn component_means(design: &MixtureDesign) -> Result<Vec<Vec<f64>>> {
    design.validate()?;
    let d = design.delta;
    let h3 = d * 3f64.sqrt() / 2.0;
    let planar: Vec<[f64; 3]> = match design.kind {
        DesignKind::SpikeNull => vec![[0.0; 3]],
        DesignKind::TwoCluster => vec![[0.0; 3], [d, 0.0, 0.0]],
        DesignKind::LineThree => vec![[0.0; 3], [d, 0.0, 0.0], [2.0 * d, 0.0, 0.0]],
        DesignKind::TriangleThree => vec![[0.0; 3], [d, 0.0, 0.0], [d / 2.0, h3, 0.0]],
        DesignKind::SquareFour => vec![[0.0; 3], [d, 0.0, 0.0], [0.0, d, 0.0], [d, d, 0.0]],
        DesignKind::RectangleFour => {
            vec![[0.0; 3], [d, 0.0, 0.0], [0.0, 1.5 * d, 0.0], [d, 1.5 * d, 0.0]]
        }
        DesignKind::TetrahedronFour | DesignKind::StretchedTetraFour => {
            let apex_edge = if design.kind == DesignKind::TetrahedronFour { d } else { 1.5 * d };
            // Apex above the base centroid, which lies d / sqrt(3) from each base vertex.
            let height = (apex_edge * apex_edge - d * d / 3.0).max(0.0).sqrt();
            vec![
                [0.0; 3],
                [d, 0.0, 0.0],
                [d / 2.0, h3, 0.0],
                [d / 2.0, h3 / 3.0, height],
            ]
        }
    };
    Ok(planar
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; design.p];
            let dim = design.kind.embedding_dim().min(design.p);
            v[..dim].copy_from_slice(&c[..dim]);
            v
        })
        .collect())
}

/// Draws `n_per_component` rows per component, grouped by component, with the true labels.
pub fn generate<T: Scalar>(design: &MixtureDesign, seed: u64) -> Result<(DataMatrix<T>, Vec<usize>)> {
    let means = component_means(design)?;
    let p = design.p;
    let n = design.n_total();
    let mut rng = rng::stream(seed, &[]);
    let mut values = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for (k, mu) in means.iter().enumerate() {
        let base_sd = design.variance(k).sqrt();
        for _ in 0..design.n_per_component {
            for (j, &m) in mu.iter().enumerate() {
                let sd = match design.spike {
                    Some(Spike { w, v }) if design.kind == DesignKind::SpikeNull && j < w => v.sqrt(),
                    _ => base_sd,
                };
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(T::of(m + sd * z));
            }
            labels.push(k);
        }
    }
    let values = Array2::from_shape_vec((n, p), values).expect("buffer matches shape");
    Ok((DataMatrix::new(values)?, labels))
}

/// Eigenvalues of the best-fit single Gaussian to a two-component spherical
/// mixture with `n` and `m` draws: one inflated direction along the mean
/// difference and `p - 1` equal ones.
pub fn theoretical_mixture_spectrum(
    n: usize,
    m: usize,
    mu1: &[f64],
    mu2: &[f64],
    s1_sq: f64,
    s2_sq: f64,
    p: usize,
) -> Vec<f64> {
    let (nf, mf) = (n as f64, m as f64);
    let scale = nf * mf / (nf + mf);
    let gap: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    let rest = scale * (s1_sq / mf + s2_sq / nf);
    let first = scale * (gap / (nf + mf)) + rest;
    let mut out = vec![rest; p];
    if p > 0 {
        out[0] = first;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub k_hat: usize,
    pub root_p_empirical: f64,
    pub root_p_gaussian: f64,
    pub wall_time_sec: f64,
    pub seed: u64,
    /// Whether the root split coincides with a union of true components
    /// separating component 0 from at least one other.
    pub root_split_pure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub count_correct_k: usize,
    pub mean_p: f64,
    pub median_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub design: MixtureDesign,
    pub variant: ShcVariant,
    pub n_replicates: usize,
    pub p_value: PValueKind,
    pub outcomes: Vec<ReplicateOutcome>,
    pub summary: StudySummary,
}

/// Summary columns recomputed from the outcomes.
pub fn summarize(design: &MixtureDesign, p_value: PValueKind, outcomes: &[ReplicateOutcome]) -> StudySummary {
    let target = design.kind.n_components();
    let count_correct_k = outcomes.iter().filter(|o| o.k_hat == target).count();
    let ps: Vec<f64> = outcomes
        .iter()
        .map(|o| match p_value {
            PValueKind::Empirical => o.root_p_empirical,
            PValueKind::Gaussian => o.root_p_gaussian,
        })
        .collect();
    let times: Vec<f64> = outcomes.iter().map(|o| o.wall_time_sec).collect();
    StudySummary {
        count_correct_k,
        mean_p: if ps.is_empty() { f64::NAN } else { stats::mean(&ps) },
        median_time: if times.is_empty() { f64::NAN } else { stats::median(&times) },
    }
}

/// One replicate: generate, then run the full procedure.
pub fn run_replicate<T: Scalar>(design: &MixtureDesign, config: &ShcConfig, seed: u64) -> Result<ReplicateOutcome> {
    let (data, labels) = generate::<T>(design, derive_seed(seed, &[0]))?;
    let config = ShcConfig { seed: derive_seed(seed, &[1]), ..config.clone() };
    let start = Instant::now();
    let report = run_shc(&data, &config)?;
    let wall_time_sec = start.elapsed().as_secs_f64();
    let dend = &report.dendrogram;
    let root = &report.results[&dend.root()];
    let (left, right) = crate::hclust::node_split(dend, dend.root())?;
    Ok(ReplicateOutcome {
        k_hat: report.k_hat,
        root_p_empirical: root.p_empirical.unwrap_or(f64::NAN),
        root_p_gaussian: root.p_gaussian.unwrap_or(f64::NAN),
        wall_time_sec,
        seed,
        root_split_pure: split_is_pure(&labels, &left, &right),
    })
}

/// True when neither side of the split mixes observations of one component.
pub fn split_is_pure(labels: &[usize], left: &[usize], right: &[usize]) -> bool {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut side = vec![None; k];
    for (ids, s) in [(left, 0u8), (right, 1u8)] {
        for &i in ids {
            match side[labels[i]] {
                None => side[labels[i]] = Some(s),
                Some(prev) if prev != s => return false,
                _ => {}
            }
        }
    }
    true
}

/// Independent replicates with derived seeds; outcomes come back in replicate order.
pub fn run_study(design: &MixtureDesign, variant: ShcVariant, n_replicates: usize, config: &ShcConfig) -> Result<StudyResult> {
    design.validate()?;
    let config = ShcConfig { variant, ..config.clone() };
    let outcomes = (0..n_replicates)
        .into_par_iter()
        .map(|r| run_replicate::<f64>(design, &config, derive_seed(config.seed, &[r as u64])))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(design, config.p_value, &outcomes);
    Ok(StudyResult {
        design: design.clone(),
        variant,
        n_replicates,
        p_value: config.p_value,
        outcomes,
        summary,
    })
}

/// One row of the study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub design: String,
    pub p: usize,
    pub delta: f64,
    pub variant: String,
    pub n_reps: usize,
    pub count_correct: usize,
    pub mean_p: f64,
    pub median_time_sec: f64,
}

impl From<&StudyResult> for TableRow {
    fn from(r: &StudyResult) -> Self {
        TableRow {
            design: r.design.kind.name().to_string(),
            p: r.design.p,
            delta: r.design.delta,
            variant: r.variant.name().to_string(),
            n_reps: r.n_replicates,
            count_correct: r.summary.count_correct_k,
            mean_p: r.summary.mean_p,
            median_time_sec: r.summary.median_time,
        }
    }
}

pub fn emit_table(results: &[StudyResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if results.is_empty() {
        return Err(ShcError::InvalidConfig("no study results to write".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| ShcError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in results {
        w.serialize(TableRow::from(r)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ShcError::io(path, e))
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Vec<TableRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| ShcError::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<Vec<TableRow>, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> ShcError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ShcError::io(path, io),
        other => ShcError::Parse { path: path.display().to_string(), line, msg: format!("{other:?}") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(means: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                let d: f64 = means[i].iter().zip(&means[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(d.sqrt());
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn triangle_is_equilateral() {
        let m = component_means(&MixtureDesign::new(DesignKind::TriangleThree, 10, 5, 5.0)).unwrap();
        assert!(pairwise(&m).iter().all(|d| (d - 5.0).abs() < 1e-12));
        assert!(m.iter().all(|v| v[2..].iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn tetrahedron_is_regular() {
        let m = component_means(&MixtureDesign::new(DesignKind::TetrahedronFour, 3, 5, 8.0)).unwrap();
        let d = pairwise(&m);
        assert_eq!(d.len(), 6);
        assert!(d.iter().all(|d| (d - 8.0).abs() < 1e-12), "{d:?}");
    }

    #[test]
    fn rectangle_distances() {
        let m = component_means(&MixtureDesign::new(DesignKind::RectangleFour, 2, 5, 4.0)).unwrap();
        let expected = [4.0, 4.0, 6.0, 6.0, 52f64.sqrt(), 52f64.sqrt()];
        for (a, b) in pairwise(&m).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stretched_tetrahedron_edges() {
        let m = component_means(&MixtureDesign::new(DesignKind::StretchedTetraFour, 3, 5, 2.0)).unwrap();
        let expected = [2.0, 2.0, 2.0, 3.0, 3.0, 3.0];
        for (a, b) in pairwise(&m).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn line_and_square() {
        let line = component_means(&MixtureDesign::new(DesignKind::LineThree, 1, 5, 3.0)).unwrap();
        assert_eq!(line, vec![vec![0.0], vec![3.0], vec![6.0]]);
        let sq = component_means(&MixtureDesign::new(DesignKind::SquareFour, 2, 5, 1.0)).unwrap();
        let d = pairwise(&sq);
        assert!(d[..4].iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!(d[4..].iter().all(|x| (x - 2f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn invalid_designs() {
        let e = component_means(&MixtureDesign::new(DesignKind::TetrahedronFour, 2, 5, 1.0)).unwrap_err();
        assert!(matches!(e, ShcError::InvalidDesign(_)));
        assert!(MixtureDesign::new(DesignKind::TwoCluster, 2, 5, -1.0).validate().is_err());
        assert!(MixtureDesign::new(DesignKind::SpikeNull, 2, 5, 0.0).validate().is_err());
    }

    #[test]
    fn generate_labels_and_determinism() {
        let design = MixtureDesign::new(DesignKind::SquareFour, 4, 7, 3.0);
        let (a, la) = generate::<f64>(&design, 5).unwrap();
        let (b, _) = generate::<f64>(&design, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n_obs(), a.n_vars()), (28, 4));
        for k in 0..4 {
            assert_eq!(la.iter().filter(|&&l| l == k).count(), 7);
        }
    }

    #[test]
    fn theoretical_spectrum_cases() {
        let s = theoretical_mixture_spectrum(50, 50, &[0.0, 0.0], &[0.0, 0.0], 1.0, 1.0, 5);
        assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let s = theoretical_mixture_spectrum(50, 50, &[0.0, 0.0], &[10.0, 0.0], 1.0, 1.0, 4);
        assert!((s[0] - 26.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn split_purity() {
        let labels = [0, 0, 1, 1, 2, 2];
        assert!(split_is_pure(&labels, &[0, 1], &[2, 3, 4, 5]));
        assert!(!split_is_pure(&labels, &[0, 2], &[1, 3, 4, 5]));
    }

    #[test]
    fn design_names_parse() {
        for k in DesignKind::ALL {
            assert_eq!(k.name().parse::<DesignKind>().unwrap(), k);
        }
    }
}
