//! l2-regularized logistic loss `log(1 + exp(b a^T x)) + l2/2 |x|^2` over
//! unit-norm sparse rows, sharded across workers.

use crate::data_io::SparseDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Logistic<T> {
    pub(crate) d: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
    labels: Vec<T>,
    pub(crate) shards: Vec<Vec<usize>>,
    pub(crate) l2: T,
}

#[inline]
pub fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Logistic<T> {
    pub(crate) fn new(ds: &SparseDataset, shards: Vec<Vec<usize>>, l2: f64) -> Result<Self> {
        if !(l2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("l2 = {l2} must be non-negative")));
        }
        for (r, b) in ds.labels.iter().enumerate() {
            if *b != 1.0 && *b != -1.0 {
                return Err(Error::Validation(format!("row {r} has label {b}, expected +1 or -1")));
            }
        }
        ds.check_normalized(1e-6).map_err(|e| Error::Validation(e.to_string()))?;
        if shards.iter().any(Vec::is_empty) {
            return Err(Error::Construction("every worker needs at least one row".into()));
        }
        Ok(Self {
            d: ds.n_features,
            indptr: ds.indptr.clone(),
            indices: ds.indices.clone(),
            values: ds.values.iter().map(|v| T::lit(*v)).collect(),
            labels: ds.labels.iter().map(|v| T::lit(*v)).collect(),
            shards,
            l2: T::lit(l2),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[T]) -> T {
        let mut s = T::zero();
        for k in self.indptr[r]..self.indptr[r + 1] {
            s += self.values[k] * x[self.indices[k] as usize];
        }
        s
    }

    #[inline]
    fn row_add(&self, r: usize, scale: T, out: &mut [T]) {
        for k in self.indptr[r]..self.indptr[r + 1] {
            out[self.indices[k] as usize] += scale * self.values[k];
        }
    }

    /// Derivative of the row loss with respect to `a^T x`, times `b`.
    #[inline]
    fn row_coef(&self, r: usize, x: &[T]) -> T {
        let b = self.labels[r];
        b * sigmoid(b * self.row_dot(r, x))
    }

    pub fn row_value(&self, r: usize, x: &[T]) -> T {
        softplus(self.labels[r] * self.row_dot(r, x))
    }

    fn reg_value(&self, x: &[T]) -> T {
        T::lit(0.5) * self.l2 * x.iter().map(|v| *v * *v).sum::<T>()
    }

    pub fn value_i(&self, i: usize, x: &[T]) -> T {
        let shard = &self.shards[i];
        let s: T = shard.iter().map(|&r| self.row_value(r, x)).sum();
        s / T::from_usize_lossy(shard.len()) + self.reg_value(x)
    }

    pub fn value_inner(&self, i: usize, j: usize, x: &[T]) -> T {
        self.row_value(self.shards[i][j], x) + self.reg_value(x)
    }

    /// Full-dimensional gradient of `f_i` into `out` (overwritten).
    pub fn grad_i(&self, i: usize, x: &[T], out: &mut [T]) {
        let shard = &self.shards[i];
        let inv = T::one() / T::from_usize_lossy(shard.len());
        out.iter_mut().for_each(|o| *o = T::zero());
        for &r in shard {
            let c = self.row_coef(r, x) * inv;
            self.row_add(r, c, out);
        }
        for (o, xk) in out.iter_mut().zip(x) {
            *o += self.l2 * *xk;
        }
    }

    /// Mean over workers of `f_i(x)`, with its gradient written to `out`.
    /// One exponential per row serves both the loss and its derivative.
    pub fn value_grad_mean(&self, x: &[T], out: &mut [T]) -> T {
        out.iter_mut().for_each(|o| *o = T::zero());
        let n = T::from_usize_lossy(self.shards.len());
        let mut value = T::zero();
        for shard in &self.shards {
            let inv = T::one() / (T::from_usize_lossy(shard.len()) * n);
            for &r in shard {
                let b = self.labels[r];
                let z = b * self.row_dot(r, x);
                let e = (-z.abs()).exp();
                value += (z.max(T::zero()) + e.ln_1p()) * inv;
                let s = if z >= T::zero() { T::one() / (T::one() + e) } else { e / (T::one() + e) };
                self.row_add(r, b * s * inv, out);
            }
        }
        for (o, xk) in out.iter_mut().zip(x) {
            *o += self.l2 * *xk;
        }
        value + self.reg_value(x)
    }

    /// Adds `scale * grad f_ij` restricted to the coordinates flagged in `member`.
    pub fn add_inner_grad_on(
        &self,
        i: usize,
        j: usize,
        x: &[T],
        coords: &[usize],
        member: Option<&[bool]>,
        scale: T,
        out: &mut [T],
    ) {
        let r = self.shards[i][j];
        let c = self.row_coef(r, x) * scale;
        for k in self.indptr[r]..self.indptr[r + 1] {
            let idx = self.indices[k] as usize;
            if member.map_or(true, |m| m[idx]) {
                out[idx] += c * self.values[k];
            }
        }
        for &k in coords {
            out[k] += scale * self.l2 * x[k];
        }
    }
}
