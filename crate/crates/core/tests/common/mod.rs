#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shc::DataMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, p: usize, seed: u64) -> DataMatrix {
    let mut r = rng(seed);
    let v = Array2::from_shape_simple_fn((n, p), || r.sample::<f64, _>(StandardNormal));
    DataMatrix::new(v).unwrap()
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(p: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    let m = nalgebra::DMatrix::<f64>::from_fn(p, p, |_, _| r.sample(StandardNormal));
    let q = m.qr().q();
    Array2::from_shape_fn((p, p), |(i, j)| q[(i, j)])
}

/// X Q + c with a random orthogonal Q and shift c.
pub fn rotate_shift(data: &DataMatrix, seed: u64) -> DataMatrix {
    let p = data.n_vars();
    let q = random_orthogonal(p, seed);
    let mut r = rng(seed ^ 0x5eed);
    let c: Vec<f64> = (0..p).map(|_| r.gen_range(-20.0..20.0)).collect();
    let mut y = data.values().dot(&q);
    for mut row in y.rows_mut() {
        for (x, s) in row.iter_mut().zip(&c) {
            *x += s;
        }
    }
    DataMatrix::new(y).unwrap()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn rows(data: &DataMatrix) -> Vec<Vec<f64>> {
    data.values().rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Within-cluster over total sum of squares, computed from scratch.
pub fn ci_oracle(points: &[Vec<f64>], in_first: &[bool]) -> f64 {
    let p = points[0].len();
    let centroid = |sel: &dyn Fn(usize) -> bool| {
        let idx: Vec<usize> = (0..points.len()).filter(|&i| sel(i)).collect();
        let mut c = vec![0.0; p];
        for &i in &idx {
            for k in 0..p {
                c[k] += points[i][k];
            }
        }
        for v in &mut c {
            *v /= idx.len() as f64;
        }
        (idx, c)
    };
    let ss = |idx: &[usize], c: &[f64]| idx.iter().map(|&i| sq_dist(&points[i], c)).sum::<f64>();
    let (all, call) = centroid(&|_| true);
    let (a, ca) = centroid(&|i| in_first[i]);
    let (b, cb) = centroid(&|i| !in_first[i]);
    (ss(&a, &ca) + ss(&b, &cb)) / ss(&all, &call)
}
