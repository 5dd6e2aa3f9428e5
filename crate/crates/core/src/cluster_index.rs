//! Cluster-strength statistics: the 2-means cluster index (within-cluster over
//! total sum of squares) and the merge-height linkage statistic.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, ShcError};
use crate::hclust::{agglomerate, node_split, ClusterAssignment, Dendrogram, LinkageKind};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterIndexKind {
    TwoMeansCI,
    LinkageValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SmallerIsStronger,
    LargerIsStronger,
}

impl ClusterIndexKind {
    pub fn direction(self) -> Direction {
        match self {
            ClusterIndexKind::TwoMeansCI => Direction::SmallerIsStronger,
            ClusterIndexKind::LinkageValue => Direction::LargerIsStronger,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiValue<T> {
    pub value: T,
    pub kind: ClusterIndexKind,
}

impl<T: Scalar> CiValue<T> {
    pub fn two_means(value: T) -> Self {
        CiValue {
            value,
            kind: ClusterIndexKind::TwoMeansCI,
        }
    }

    pub fn linkage(value: T) -> Self {
        CiValue {
            value,
            kind: ClusterIndexKind::LinkageValue,
        }
    }

    pub fn direction(&self) -> Direction {
        self.kind.direction()
    }
}

/// Strict comparison in the direction of stronger clustering.
pub fn stronger_than<T: Scalar>(a: &CiValue<T>, b: &CiValue<T>) -> Result<bool> {
    if a.kind != b.kind {
        return Err(ShcError::KindMismatch);
    }
    Ok(match a.kind.direction() {
        Direction::SmallerIsStronger => a.value < b.value,
        Direction::LargerIsStronger => a.value > b.value,
    })
}

/// Merge height at an internal node as a larger-is-stronger statistic.
pub fn linkage_index<T: Scalar>(dend: &Dendrogram<T>, node: usize) -> Result<CiValue<T>> {
    dend.children(node)?;
    Ok(CiValue::linkage(dend.height(node)?))
}

fn centroid<T: Scalar>(x: &Array2<T>, members: &[usize]) -> Array1<T> {
    let mut c = Array1::zeros(x.ncols());
    for &i in members {
        c += &x.row(i);
    }
    c / T::of_usize(members.len().max(1))
}

#[inline]
fn sq_dist<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (&u, &v)| {
        let d = u - v;
        acc + d * d
    })
}

fn sum_sq_about<T: Scalar>(x: &Array2<T>, members: &[usize]) -> T {
    let c = centroid(x, members);
    members.iter().map(|&i| sq_dist(x.row(i), c.view())).sum()
}

pub(crate) fn total_ss<T: Scalar>(x: &Array2<T>) -> T {
    let c = x.mean_axis(Axis(0)).expect("nonempty matrix");
    x.rows().into_iter().map(|r| sq_dist(r, c.view())).sum()
}

/// CI of the bipartition `first` / complement, given a precomputed TSS.
fn ci_of_split<T: Scalar>(x: &Array2<T>, labels: &[usize], tss: T) -> T {
    let (a, b): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == 0);
    (sum_sq_about(x, &a) + sum_sq_about(x, &b)) / tss
}

fn checked_tss<T: Scalar>(x: &Array2<T>) -> Result<T> {
    let tss = total_ss(x);
    if !(tss > T::zero()) {
        return Err(ShcError::DegenerateData(
            "total sum of squares is zero".into(),
        ));
    }
    Ok(tss)
}

/// 2-means cluster index `(SS1 + SS2) / TSS` of a given two-cluster partition.
pub fn two_means_ci<T: Scalar>(
    data: &DataMatrix<T>,
    assignment: &ClusterAssignment,
) -> Result<CiValue<T>> {
    if assignment.k != 2 || assignment.labels.len() != data.n_obs() {
        return Err(ShcError::InvalidK {
            k: assignment.k,
            n: 2,
        });
    }
    let tss = checked_tss(data.values())?;
    let ci = ci_of_split(data.values(), &assignment.labels, tss);
    Ok(CiValue::two_means(ci.min(T::one()).max(T::zero())))
}

/// Settings for the 2-means search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 10,
            max_iter: 100,
        }
    }
}

/// Approximately optimal 2-means CI: Lloyd's algorithm started from the Ward
/// root split and from `restarts` k-means++ seedings. Restart `r` always draws
/// from the same stream, so adding restarts never worsens the result.
pub fn kmeans_two_ci<T: Scalar>(
    data: &DataMatrix<T>,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<(CiValue<T>, ClusterAssignment)> {
    let n = data.n_obs();
    if n < 2 {
        return Err(ShcError::TooFewObservations { need: 2, got: n });
    }
    let x = data.values();
    let tss = checked_tss(x)?;

    let ward = agglomerate(data, LinkageKind::Ward)?;
    let (left, _) = node_split(&ward, ward.root())?;
    let mut labels = vec![1usize; n];
    for i in left {
        labels[i] = 0;
    }
    let start = [
        centroid(x, &members(&labels, 0)),
        centroid(x, &members(&labels, 1)),
    ];
    let mut best_labels = lloyd(x, start, max_iter);
    let mut best = ci_of_split(x, &best_labels, tss);

    for r in 0..restarts {
        let mut rng = rng::stream(seed, &[r as u64]);
        let Some(start) = plus_plus_seeds(x, &mut rng) else {
            continue;
        };
        let labels = lloyd(x, start, max_iter);
        let ci = ci_of_split(x, &labels, tss);
        if ci < best {
            best = ci;
            best_labels = labels;
        }
    }
    let ci = CiValue::two_means(best.min(T::one()).max(T::zero()));
    Ok((ci, ClusterAssignment::new(best_labels, 2)?))
}

fn members(labels: &[usize], k: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == k).collect()
}

/// First center uniform, second drawn with probability proportional to the
/// squared distance from the first. `None` if every point coincides with the first.
fn plus_plus_seeds<T: Scalar, R: Rng>(x: &Array2<T>, rng: &mut R) -> Option<[Array1<T>; 2]> {
    let n = x.nrows();
    let first = rng.gen_range(0..n);
    let weights: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(first)).f64())
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut target = rng.gen::<f64>() * total;
    let mut second = n - 1;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            second = i;
            if target < w {
                break;
            }
            target -= w;
        }
    }
    Some([x.row(first).to_owned(), x.row(second).to_owned()])
}

/// Lloyd iterations for k = 2 until the assignment stops changing.
fn lloyd<T: Scalar>(x: &Array2<T>, mut centers: [Array1<T>; 2], max_iter: usize) -> Vec<usize> {
    let n = x.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..n {
            let d0 = sq_dist(x.row(i), centers[0].view());
            let d1 = sq_dist(x.row(i), centers[1].view());
            let l = usize::from(d1 < d0);
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
        }
        let mut groups = [members(&labels, 0), members(&labels, 1)];
        for k in 0..2 {
            if groups[k].is_empty() {
                // Move the point farthest from its centroid into the empty cluster.
                let other = 1 - k;
                let c = centroid(x, &groups[other]);
                let far = groups[other]
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        sq_dist(x.row(a), c.view())
                            .partial_cmp(&sq_dist(x.row(b), c.view()))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("other cluster holds every point");
                labels[far] = k;
                groups = [members(&labels, 0), members(&labels, 1)];
                changed = true;
            }
        }
        if !changed {
            break;
        }
        centers = [centroid(x, &groups[0]), centroid(x, &groups[1])];
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn col(v: &[f64]) -> DataMatrix<f64> {
        DataMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn ci_of_perfect_split_is_zero() {
        let ci = two_means_ci(
            &col(&[0.0, 2.0]),
            &ClusterAssignment::new(vec![0, 1], 2).unwrap(),
        )
        .unwrap();
        assert_eq!(ci.value, 0.0);
    }

    #[test]
    fn ci_direct_arithmetic() {
        let a = ClusterAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let ci = two_means_ci(&col(&[0.0, 1.0, 3.0, 4.0]), &a).unwrap();
        assert!((ci.value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_tss() {
        let a = ClusterAssignment::new(vec![0, 1, 1], 2).unwrap();
        assert!(matches!(
            two_means_ci(&col(&[3.0, 3.0, 3.0]), &a),
            Err(ShcError::DegenerateData(_))
        ));
        assert!(matches!(
            kmeans_two_ci(&col(&[3.0, 3.0, 3.0]), 3, 10, 1),
            Err(ShcError::DegenerateData(_))
        ));
    }

    #[test]
    fn kmeans_separates_pairs() {
        let data =
            DataMatrix::<f64>::new(array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]).unwrap();
        let (ci, a) = kmeans_two_ci(&data, 5, 100, 3).unwrap();
        assert_eq!(a.labels[0], a.labels[1]);
        assert_eq!(a.labels[2], a.labels[3]);
        assert_ne!(a.labels[0], a.labels[2]);
        // SS = 0.5 + 0.5, TSS = 4 * (25 + 0.25)
        assert!((ci.value - 1.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_two_points() {
        let (ci, _) = kmeans_two_ci(&col(&[1.0, 5.0]), 0, 10, 0).unwrap();
        assert_eq!(ci.value, 0.0);
    }

    #[test]
    fn comparisons() {
        let lo = CiValue::two_means(0.3);
        let hi = CiValue::two_means(0.5);
        assert!(stronger_than(&lo, &hi).unwrap());
        assert!(!stronger_than(&lo, &lo).unwrap());
        assert!(!stronger_than(&CiValue::linkage(10.0), &CiValue::linkage(12.0)).unwrap());
        assert!(matches!(
            stronger_than(&lo, &CiValue::linkage(1.0)),
            Err(ShcError::KindMismatch)
        ));
    }

    #[test]
    fn linkage_index_at_root_and_leaf() {
        let data = DataMatrix::new(array![[0.0], [1.0], [5.0]]).unwrap();
        let dend = agglomerate(&data, LinkageKind::Ward).unwrap();
        let root = linkage_index(&dend, dend.root()).unwrap();
        assert_eq!(root.value, dend.merges.last().unwrap().height);
        assert!(matches!(
            linkage_index(&dend, 0),
            Err(ShcError::NotInternal(0))
        ));
    }
}
