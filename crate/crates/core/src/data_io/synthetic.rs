//! Synthetic stand-in with the shape of the `a1a` benchmark: one-hot encoded
//! categorical attributes, about a quarter positive labels.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng;

use super::SparseDataset;

pub const A1A_ROWS: usize = 1605;
pub const A1A_FEATURES: usize = 123;

/// Category counts of the 14 attributes; they sum to 123.
const GROUPS: [usize; 14] = [5, 7, 16, 16, 7, 14, 6, 5, 2, 2, 3, 3, 5, 32];

/// Rows are unit-normalised; labels follow a noisy logistic model.
pub fn a1a_surrogate(seed: u64) -> SparseDataset {
    let mut r = rng::stream(seed, rng::SETUP, 0xa1a);
    let weights: Vec<f64> = (0..A1A_FEATURES)
        .map(|_| 1.5 * Distribution::<f64>::sample(&StandardNormal, &mut r))
        .collect();
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(A1A_ROWS);
    let mut scores = Vec::with_capacity(A1A_ROWS);
    for _ in 0..A1A_ROWS {
        let mut feats = Vec::new();
        let mut offset = 0usize;
        for &size in &GROUPS {
            // a few attributes are missing, as in the census extract
            if r.random::<f64>() >= 0.03 {
                // skewed category frequencies
                let u: f64 = r.random();
                let c = ((u * u) * size as f64) as usize;
                feats.push((offset + c.min(size - 1)) as u32);
            }
            offset += size;
        }
        if feats.is_empty() {
            feats.push(0);
        }
        scores.push(feats.iter().map(|&f| weights[f as usize]).sum::<f64>() / (feats.len() as f64).sqrt());
        rows.push(feats);
    }
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[(0.76 * A1A_ROWS as f64) as usize];

    let mut ds = SparseDataset {
        n_features: A1A_FEATURES,
        indptr: vec![0],
        indices: Vec::new(),
        values: Vec::new(),
        labels: Vec::with_capacity(A1A_ROWS),
    };
    for (feats, s) in rows.into_iter().zip(scores) {
        let p = 1.0 / (1.0 + (-3.0 * (s - cut)).exp());
        ds.labels.push(if r.random::<f64>() < p { 1.0 } else { -1.0 });
        let v = 1.0 / (feats.len() as f64).sqrt();
        ds.values.extend(std::iter::repeat(v).take(feats.len()));
        ds.indices.extend(feats);
        ds.indptr.push(ds.indices.len());
    }
    ds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_normalization() {
        let ds = a1a_surrogate(0);
        assert_eq!(ds.n_rows(), A1A_ROWS);
        assert_eq!(ds.n_features, A1A_FEATURES);
        assert_eq!(GROUPS.iter().sum::<usize>(), A1A_FEATURES);
        ds.check_normalized(1e-12).unwrap();
        let pos = ds.labels.iter().filter(|l| **l > 0.0).count() as f64 / A1A_ROWS as f64;
        assert!((0.18..0.32).contains(&pos), "{pos}");
        let nnz = ds.nnz() as f64 / A1A_ROWS as f64;
        assert!((13.0..14.2).contains(&nnz), "{nnz}");
        assert_eq!(ds, a1a_surrogate(0));
    }
}
