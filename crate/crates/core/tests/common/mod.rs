#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rosdos::DataMatrix;

/// I.i.d. `N(0, var)` entries.
pub fn gaussian(p: usize, n: usize, var: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = var.sqrt();
    DMatrix::from_fn(p, n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sd * z
    })
}

/// `dim × r` matrix with orthonormal columns.
pub fn orthonormal(dim: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let q = gaussian(dim, r, 1.0, seed).qr().q();
    q.columns(0, r).into_owned()
}

/// `U · diag(values) · Vᵀ` with seeded random orthonormal factors.
pub fn low_rank(p: usize, n: usize, values: &[f64], seed: u64) -> DMatrix<f64> {
    let r = values.len();
    let mut u = orthonormal(p, r, seed);
    let v = orthonormal(n, r, seed ^ 0x5eed);
    for (c, s) in values.iter().enumerate() {
        u.column_mut(c).scale_mut(*s);
    }
    u * v.transpose()
}

pub fn data(m: DMatrix<f64>) -> DataMatrix {
    DataMatrix::new(m).expect("finite test matrix")
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Indices of the `k` smallest entries of `d`, skipping `skip`.
pub fn nearest(d: &[f64], k: usize, skip: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).filter(|&j| j != skip).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
