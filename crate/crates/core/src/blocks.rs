//! Coordinate blocks, per-worker block sampling and masking.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::sample_distinct;
use crate::scalar::Scalar;

/// Enumeration guard for brute-force oracles.
pub const ENUMERATION_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    d: usize,
    offsets: Vec<usize>,
}

/// Selected block indices, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockSample {
    blocks: Vec<usize>,
}

impl BlockSample {
    pub fn new(mut blocks: Vec<usize>) -> Self {
        blocks.sort_unstable();
        blocks.dedup();
        Self { blocks }
    }

    pub fn full(m: usize) -> Self {
        Self {
            blocks: (0..m).collect(),
        }
    }

    pub fn empty() -> Self {
        Self { blocks: Vec::new() }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn complement(&self, m: usize) -> Self {
        Self {
            blocks: (0..m).filter(|b| self.blocks.binary_search(b).is_err()).collect(),
        }
    }
}

/// Coordinates selected by a sample, plus a membership table unless the
/// sample is full.
#[derive(Debug, Clone)]
pub struct CoordSet {
    coords: Vec<usize>,
    member: Option<Vec<bool>>,
}

impl CoordSet {
    pub fn full(d: usize) -> Self {
        Self {
            coords: (0..d).collect(),
            member: None,
        }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn member(&self) -> Option<&[bool]> {
        self.member.as_deref()
    }

    pub fn is_full(&self) -> bool {
        self.member.is_none()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl BlockPartition {
    /// Near-equal contiguous blocks: the first `d mod m` have `ceil(d/m)`
    /// coordinates, the rest `floor(d/m)`.
    pub fn uniform(d: usize, m: usize) -> Result<Self> {
        if m == 0 || m > d {
            return Err(Error::BlockCount { d, m });
        }
        let base = d / m;
        let extra = d % m;
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        let mut at = 0;
        for b in 0..m {
            at += base + usize::from(b < extra);
            offsets.push(at);
        }
        Ok(Self { d, offsets })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of blocks `tau * m`; errors unless that product is an integer.
    pub fn blocks_per_sample(&self, tau: f64) -> Result<usize> {
        blocks_for_tau(self.m(), tau)
    }

    pub fn sample_subset<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> Result<BlockSample> {
        let k = self.blocks_per_sample(tau)?;
        Ok(self.sample_k(k, rng))
    }

    /// Uniform `k`-subset of block indices.
    pub fn sample_k<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> BlockSample {
        let m = self.m();
        if k == m {
            return BlockSample::full(m);
        }
        BlockSample::new(sample_distinct(m, k, rng))
    }

    pub fn mask<T: Scalar>(&self, x: &[T], s: &BlockSample) -> Result<Vec<T>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let mut out = vec![T::zero(); self.d];
        for &b in s.blocks() {
            let r = self.block_range(b);
            out[r.clone()].copy_from_slice(&x[r]);
        }
        Ok(out)
    }

    /// Coordinates covered by the sample, ascending.
    pub fn coordinates<'a>(&'a self, s: &'a BlockSample) -> impl Iterator<Item = usize> + 'a {
        s.blocks().iter().flat_map(move |&b| self.block_range(b))
    }

    pub fn coord_set(&self, s: &BlockSample) -> CoordSet {
        if s.len() == self.m() {
            return CoordSet::full(self.d);
        }
        let coords: Vec<usize> = self.coordinates(s).collect();
        let mut member = vec![false; self.d];
        for &c in &coords {
            member[c] = true;
        }
        CoordSet {
            coords,
            member: Some(member),
        }
    }

    pub fn sample_dim(&self, s: &BlockSample) -> usize {
        s.blocks().iter().map(|&b| self.offsets[b + 1] - self.offsets[b]).sum()
    }

    /// Every `tau*m`-subset once, in lexicographic order.
    pub fn enumerate_subsets(&self, tau: f64) -> Result<Vec<BlockSample>> {
        let k = self.blocks_per_sample(tau)?;
        let m = self.m();
        let count = binomial(m, k);
        if count > ENUMERATION_LIMIT {
            return Err(Error::CombinatorialBlowup {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(BlockSample { blocks: idx.clone() });
            let mut i = k;
            while i > 0 && idx[i - 1] == m - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                return Ok(out);
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

pub fn blocks_for_tau(m: usize, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1]")));
    }
    let product = tau * m as f64;
    let k = product.round();
    if (product - k).abs() > 1e-9 || k < 1.0 {
        let lo = (product.floor() as usize).max(1);
        let hi = (product.ceil() as usize).clamp(1, m);
        return Err(Error::NonIntegerTau {
            tau,
            m,
            product,
            below: format!("{lo}/{m}"),
            above: format!("{hi}/{m}"),
        });
    }
    Ok(k as usize)
}

pub fn sample_bernoulli<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> Result<bool> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Bernoulli probability {tau} must lie in (0, 1]"
        )));
    }
    if tau == 1.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < tau)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}
