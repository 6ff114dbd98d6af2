//! Quadratic objectives `f_i(x) = 1/2 x^T M_i x`, each split into inner
//! components built from a few rank-one terms and an optional linear shift.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, power_iteration, DenseMatrix, SymmetricEigen};
use crate::rng;
use crate::scalar::Scalar;

/// `f_ij(x) = 1/2 sum_k c_k (u_k^T x)^2 + b^T x`
#[derive(Debug, Clone)]
pub struct QuadComponent<T> {
    pub terms: Vec<(T, Vec<T>)>,
    pub shift: Option<Vec<T>>,
}

impl<T: Scalar> QuadComponent<T> {
    fn projections(&self, x: &[T]) -> Vec<T> {
        self.terms.iter().map(|(c, u)| *c * dot(u, x)).collect()
    }

    pub fn value(&self, x: &[T]) -> T {
        let mut v = T::zero();
        for (c, u) in &self.terms {
            let p = dot(u, x);
            v += T::lit(0.5) * *c * p * p;
        }
        if let Some(b) = &self.shift {
            v += dot(b, x);
        }
        v
    }

    /// Adds `scale * grad` on the listed coordinates.
    pub fn add_grad_on(&self, x: &[T], coords: &[usize], scale: T, out: &mut [T]) {
        let p = self.projections(x);
        for &c in coords {
            let mut g = T::zero();
            for ((_, u), pk) in self.terms.iter().zip(&p) {
                g += *pk * u[c];
            }
            if let Some(b) = &self.shift {
                g += b[c];
            }
            out[c] += scale * g;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Quadratic<T> {
    pub(crate) d: usize,
    pub(crate) mats: Vec<DenseMatrix<T>>,
    pub(crate) mean: DenseMatrix<T>,
    pub(crate) comps: Vec<Vec<QuadComponent<T>>>,
}

/// Output of the quadratic constructors before reference-solution bookkeeping.
pub(crate) struct QuadraticParts<T> {
    pub quad: Quadratic<T>,
    pub l: T,
    pub mu: T,
    pub convex: bool,
}

impl<T: Scalar> Quadratic<T> {
    pub fn matrix(&self, i: usize) -> &DenseMatrix<T> {
        &self.mats[i]
    }

    pub fn mean_matrix(&self) -> &DenseMatrix<T> {
        &self.mean
    }

    pub fn component(&self, i: usize, j: usize) -> &QuadComponent<T> {
        &self.comps[i][j]
    }

    pub fn value_i(&self, i: usize, x: &[T]) -> T {
        T::lit(0.5) * dot(x, &self.mats[i].matvec(x))
    }

    pub fn value_mean(&self, x: &[T]) -> T {
        T::lit(0.5) * dot(x, &self.mean.matvec(x))
    }

    /// Writes `(M_i x)_c` for every listed coordinate.
    pub fn grad_on(&self, i: usize, x: &[T], coords: &[usize], out: &mut [T]) {
        let m = &self.mats[i];
        for &c in coords {
            out[c] = dot(m.row(c), x);
        }
    }

    pub fn grad_mean(&self, x: &[T]) -> Vec<T> {
        self.mean.matvec(x)
    }
}

fn gaussian_vec<T: Scalar>(len: usize, rng: &mut rng::Stream) -> Vec<T> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z)
        })
        .collect()
}

/// `M_i = v v^T + P (A_i A_i^T / lambda_max(A_i A_i^T)) P` with `P = I - v v^T`
/// and Gaussian `v`, `A_i` (d x o). Inner component `j` keeps column `j` of
/// `A_i`, so worker `i` has `o` components. `shift_scale > 0` adds centred
/// Gaussian linear terms to the components; `f_i` and `x* = 0` are unchanged.
pub(crate) fn synthesize<T: Scalar>(
    d: usize,
    n: usize,
    o: usize,
    seed: u64,
    shift_scale: f64,
) -> Result<QuadraticParts<T>> {
    if d == 0 || n == 0 || o == 0 {
        return Err(Error::Construction(format!(
            "quadratic needs d, n, o >= 1 (got d={d}, n={n}, o={o})"
        )));
    }
    let mut r = rng::stream(seed, rng::SETUP, 0);
    let mut v: Vec<T> = gaussian_vec(d, &mut r);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let project = |a: &[T]| -> Vec<T> {
        let s = dot(&v, a);
        a.iter().zip(&v).map(|(ai, vi)| *ai - s * *vi).collect()
    };

    let mut mats = Vec::with_capacity(n);
    let mut comps = Vec::with_capacity(n);
    for i in 0..n {
        let cols: Vec<Vec<T>> = (0..o).map(|_| gaussian_vec(d, &mut r)).collect();
        let mut gram = DenseMatrix::zeros(o, o);
        for a in 0..o {
            for b in a..o {
                let g = dot(&cols[a], &cols[b]);
                gram[(a, b)] = g;
                gram[(b, a)] = g;
            }
        }
        let lam = SymmetricEigen::new(&gram).max();
        if !(lam > T::zero()) {
            return Err(Error::Construction(format!(
                "A_{i} is degenerate (largest eigenvalue of A A^T is {lam})"
            )));
        }
        let mut m = DenseMatrix::zeros(d, d);
        m.add_outer(T::one(), &v);
        let scale = (T::from_usize_lossy(o) / lam).sqrt();
        let mut wi = Vec::with_capacity(o);
        for a in &cols {
            let pa = project(a);
            m.add_outer(T::one() / lam, &pa);
            wi.push(pa.into_iter().map(|x| x * scale).collect::<Vec<T>>());
        }
        let shifts = if shift_scale > 0.0 {
            let mut bs: Vec<Vec<T>> = (0..o)
                .map(|_| {
                    gaussian_vec::<T>(d, &mut r)
                        .into_iter()
                        .map(|x| x * T::lit(shift_scale))
                        .collect()
                })
                .collect();
            let mut mean = vec![T::zero(); d];
            for b in &bs {
                for (mk, bk) in mean.iter_mut().zip(b) {
                    *mk += *bk;
                }
            }
            for mk in mean.iter_mut() {
                *mk /= T::from_usize_lossy(o);
            }
            for b in bs.iter_mut() {
                for (bk, mk) in b.iter_mut().zip(&mean) {
                    *bk -= *mk;
                }
            }
            bs.into_iter().map(Some).collect()
        } else {
            vec![None; o]
        };
        comps.push(
            wi.into_iter()
                .zip(shifts)
                .map(|(w, shift)| QuadComponent {
                    terms: vec![(T::one(), v.clone()), (T::one(), w)],
                    shift,
                })
                .collect(),
        );
        mats.push(m);
    }
    finish(d, mats, comps, true)
}

/// Quadratic with the given symmetric matrices; worker `i` is split into `d`
/// rank-one components `d * lambda_k u_k u_k^T` from its eigen-decomposition.
pub(crate) fn from_matrices<T: Scalar>(mats: Vec<DenseMatrix<T>>) -> Result<QuadraticParts<T>> {
    let Some(first) = mats.first() else {
        return Err(Error::Construction("no matrices given".into()));
    };
    let d = first.rows();
    let mut convex = true;
    let mut comps = Vec::with_capacity(mats.len());
    for (i, m) in mats.iter().enumerate() {
        if !m.is_square() || m.rows() != d {
            return Err(Error::Construction(format!("matrix {i} is not {d} x {d}")));
        }
        let sym_tol = T::lit(1e-10) * m.as_slice().iter().fold(T::one(), |a, b| a.max(b.abs()));
        if m.max_asymmetry() > sym_tol {
            return Err(Error::Construction(format!("matrix {i} is not symmetric")));
        }
        let e = SymmetricEigen::new(m);
        if e.min() < -T::lit(1e-12) * e.max().abs().max(T::one()) {
            convex = false;
        }
        let dd = T::from_usize_lossy(d);
        comps.push(
            (0..d)
                .map(|k| QuadComponent {
                    terms: vec![(dd * e.values[k], e.vector(k))],
                    shift: None,
                })
                .collect(),
        );
    }
    finish(d, mats, comps, convex)
}

fn finish<T: Scalar>(
    d: usize,
    mats: Vec<DenseMatrix<T>>,
    comps: Vec<Vec<QuadComponent<T>>>,
    convex: bool,
) -> Result<QuadraticParts<T>> {
    let n = mats.len();
    let mut mean = DenseMatrix::zeros(d, d);
    for m in &mats {
        mean.add_scaled(T::one() / T::from_usize_lossy(n), m);
    }
    let l = if convex {
        mats.iter()
            .map(|m| power_iteration(m, T::lit(1e-12), 200_000))
            .fold(T::zero(), T::max)
    } else {
        mats.iter()
            .map(|m| {
                let e = SymmetricEigen::new(m);
                e.max().abs().max(e.min().abs())
            })
            .fold(T::zero(), T::max)
    };
    let mu = SymmetricEigen::new(&mean).min().max(T::zero());
    Ok(QuadraticParts {
        quad: Quadratic {
            d,
            mats,
            mean,
            comps,
        },
        l,
        mu,
        convex,
    })
}
