//! Objective instances `f = (1/n) sum_i f_i (+ R)` and their gradient oracles.

pub mod logistic;
pub mod quadratic;

use rand::Rng;

use crate::blocks::CoordSet;
use crate::data_io::{partition_data, SparseDataset};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm, DenseMatrix};
use crate::prox::Regularizer;
use crate::scalar::Scalar;

pub use logistic::Logistic;
pub use quadratic::{QuadComponent, Quadratic};

/// Default relative tolerance of the reference solver.
pub const REFERENCE_TOL: f64 = 1e-12;
const REFERENCE_MAX_ITER: usize = 2_000_000;

#[derive(Debug, Clone)]
pub enum Objective<T> {
    Quadratic(Quadratic<T>),
    Logistic(Logistic<T>),
}

/// Minibatch oracle: average of `batch` inner gradients drawn with replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StochasticSpec {
    pub batch: usize,
}

#[derive(Debug, Clone)]
pub struct Problem<T> {
    objective: Objective<T>,
    reg: Regularizer,
    l: T,
    mu: T,
    x_star: Vec<T>,
    f_star: T,
    zero_grads: bool,
    convex: bool,
    label: String,
}

impl<T: Scalar> Problem<T> {
    fn assemble(objective: Objective<T>, l: T, mu: T, convex: bool, label: String) -> Result<Self> {
        let d = match &objective {
            Objective::Quadratic(q) => q.d,
            Objective::Logistic(g) => g.d,
        };
        let mut p = Self {
            objective,
            reg: Regularizer::Zero,
            l,
            mu,
            x_star: vec![T::zero(); d],
            f_star: T::zero(),
            zero_grads: false,
            convex,
            label,
        };
        p.resolve(T::lit(REFERENCE_TOL))?;
        Ok(p)
    }

    /// Random quadratic with `n` workers of `o` inner components each.
    pub fn quadratic_synthesize(d: usize, n: usize, o: usize, seed: u64) -> Result<Self> {
        Self::quadratic_synthesize_noisy(d, n, o, seed, 0.0)
    }

    /// As [`Problem::quadratic_synthesize`], with centred linear shifts of scale
    /// `shift_scale` on the inner components so minibatch noise does not vanish
    /// at the optimum.
    pub fn quadratic_synthesize_noisy(
        d: usize,
        n: usize,
        o: usize,
        seed: u64,
        shift_scale: f64,
    ) -> Result<Self> {
        let parts = quadratic::synthesize(d, n, o, seed, shift_scale)?;
        let label = format!("quadratic(d={d},n={n},o={o},seed={seed},shift={shift_scale})");
        Self::assemble(Objective::Quadratic(parts.quad), parts.l, parts.mu, parts.convex, label)
    }

    pub fn quadratic_from_matrices(mats: Vec<DenseMatrix<T>>) -> Result<Self> {
        let n = mats.len();
        let parts = quadratic::from_matrices(mats)?;
        let label = format!("quadratic(explicit, n={n})");
        Self::assemble(Objective::Quadratic(parts.quad), parts.l, parts.mu, parts.convex, label)
    }

    /// Single-worker logistic regression over all rows.
    pub fn logreg_build(ds: &SparseDataset, l2: f64) -> Result<Self> {
        let shards = vec![(0..ds.n_rows()).collect()];
        Self::logreg_sharded(ds, shards, l2)
    }

    /// Logistic regression with rows split evenly at random across `n` workers.
    pub fn logreg_distributed(ds: &SparseDataset, n: usize, seed: u64, l2: f64) -> Result<Self> {
        let shards = partition_data(ds.n_rows(), n, seed)?;
        Self::logreg_sharded(ds, shards, l2)
    }

    pub fn logreg_sharded(ds: &SparseDataset, shards: Vec<Vec<usize>>, l2: f64) -> Result<Self> {
        for s in &shards {
            if let Some(&r) = s.iter().find(|&&r| r >= ds.n_rows()) {
                return Err(Error::IndexOutOfRange {
                    what: "row",
                    index: r,
                    len: ds.n_rows(),
                });
            }
        }
        let n = shards.len();
        let g = Logistic::new(ds, shards, l2)?;
        let l = T::lit(0.25 + l2);
        let mu = T::lit(l2);
        let label = format!("logistic(N={},d={},n={n},l2={l2})", ds.n_rows(), ds.n_features);
        Self::assemble(Objective::Logistic(g), l, mu, true, label)
    }

    /// Replaces the regularizer and recomputes the reference solution.
    pub fn with_regularizer(mut self, reg: Regularizer) -> Result<Self> {
        self.reg = reg;
        self.resolve(T::lit(REFERENCE_TOL))?;
        Ok(self)
    }

    fn resolve(&mut self, tol: T) -> Result<()> {
        let x0 = vec![T::zero(); self.d()];
        let (x, f) = self.solve_reference_from(&x0, tol)?;
        self.x_star = x;
        self.f_star = f;
        self.zero_grads = self.check_zero_grads();
        Ok(())
    }

    fn check_zero_grads(&self) -> bool {
        let thr = T::lit(1e-8) * norm(&self.x_star).max(T::one());
        (0..self.n_components()).all(|i| norm(&self.grad_full_unchecked(i, &self.x_star)) <= thr)
    }

    pub fn objective(&self) -> &Objective<T> {
        &self.objective
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn d(&self) -> usize {
        match &self.objective {
            Objective::Quadratic(q) => q.d,
            Objective::Logistic(g) => g.d,
        }
    }

    pub fn n_components(&self) -> usize {
        match &self.objective {
            Objective::Quadratic(q) => q.mats.len(),
            Objective::Logistic(g) => g.shards.len(),
        }
    }

    /// Number of inner components `l` of worker `i`.
    pub fn inner_count(&self, i: usize) -> usize {
        match &self.objective {
            Objective::Quadratic(q) => q.comps[i].len(),
            Objective::Logistic(g) => g.shards[i].len(),
        }
    }

    /// Common inner count when every worker has the same number, else `None`.
    pub fn uniform_inner_count(&self) -> Option<usize> {
        let l = self.inner_count(0);
        (1..self.n_components())
            .all(|i| self.inner_count(i) == l)
            .then_some(l)
    }

    /// Total components when `f` is an equal-weight average over all of them.
    pub fn n_global(&self) -> Option<usize> {
        self.uniform_inner_count().map(|l| l * self.n_components())
    }

    pub fn global_index(&self, g: usize) -> (usize, usize) {
        let l = self.inner_count(0);
        (g / l, g % l)
    }

    pub fn regularizer(&self) -> Regularizer {
        self.reg
    }

    pub fn smoothness(&self) -> T {
        self.l
    }

    pub fn strong_convexity(&self) -> T {
        self.mu
    }

    pub fn x_star(&self) -> &[T] {
        &self.x_star
    }

    pub fn f_star(&self) -> T {
        self.f_star
    }

    pub fn satisfies_zero_grads(&self) -> bool {
        self.zero_grads
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    fn check_x(&self, x: &[T]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_i(&self, i: usize) -> Result<()> {
        if i >= self.n_components() {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: i,
                len: self.n_components(),
            });
        }
        Ok(())
    }

    fn check_j(&self, i: usize, j: usize) -> Result<()> {
        self.check_i(i)?;
        if j >= self.inner_count(i) {
            return Err(Error::IndexOutOfRange {
                what: "inner component",
                index: j,
                len: self.inner_count(i),
            });
        }
        Ok(())
    }

    /// Smooth part `(1/n) sum_i f_i(x)`.
    pub fn smooth_value(&self, x: &[T]) -> T {
        match &self.objective {
            Objective::Quadratic(q) => q.value_mean(x),
            Objective::Logistic(g) => {
                let n = g.shards.len();
                (0..n).map(|i| g.value_i(i, x)).sum::<T>() / T::from_usize_lossy(n)
            }
        }
    }

    /// Smooth value and gradient in one pass.
    pub fn smooth_value_grad(&self, x: &[T]) -> (T, Vec<T>) {
        match &self.objective {
            Objective::Quadratic(q) => {
                let g = q.grad_mean(x);
                (T::lit(0.5) * crate::linalg::dot(x, &g), g)
            }
            Objective::Logistic(g) => {
                let mut grad = vec![T::zero(); self.d()];
                let v = g.value_grad_mean(x, &mut grad);
                (v, grad)
            }
        }
    }

    /// `f(x) + R(x)`.
    pub fn value(&self, x: &[T]) -> T {
        self.smooth_value(x) + self.reg.value(x)
    }

    pub fn component_value(&self, i: usize, x: &[T]) -> Result<T> {
        self.check_i(i)?;
        self.check_x(x)?;
        Ok(match &self.objective {
            Objective::Quadratic(q) => q.value_i(i, x),
            Objective::Logistic(g) => g.value_i(i, x),
        })
    }

    pub fn inner_value(&self, i: usize, j: usize, x: &[T]) -> Result<T> {
        self.check_j(i, j)?;
        self.check_x(x)?;
        Ok(match &self.objective {
            Objective::Quadratic(q) => q.component(i, j).value(x),
            Objective::Logistic(g) => g.value_inner(i, j, x),
        })
    }

    pub fn grad_full(&self, i: usize, x: &[T]) -> Result<Vec<T>> {
        self.check_i(i)?;
        self.check_x(x)?;
        Ok(self.grad_full_unchecked(i, x))
    }

    pub(crate) fn grad_full_unchecked(&self, i: usize, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.d()];
        self.grad_on(i, x, &CoordSet::full(self.d()), &mut out);
        out
    }

    pub fn grad_component(&self, i: usize, j: usize, x: &[T]) -> Result<Vec<T>> {
        self.check_j(i, j)?;
        self.check_x(x)?;
        let mut out = vec![T::zero(); self.d()];
        self.add_inner_grad_on(i, j, x, &CoordSet::full(self.d()), T::one(), &mut out);
        Ok(out)
    }

    /// Gradient of the smooth part of `f`.
    pub fn grad(&self, x: &[T]) -> Vec<T> {
        match &self.objective {
            Objective::Quadratic(q) => q.grad_mean(x),
            Objective::Logistic(_) => {
                let n = self.n_components();
                let mut acc = vec![T::zero(); self.d()];
                for i in 0..n {
                    let g = self.grad_full_unchecked(i, x);
                    for (a, b) in acc.iter_mut().zip(g) {
                        *a += b;
                    }
                }
                let inv = T::one() / T::from_usize_lossy(n);
                acc.iter_mut().for_each(|a| *a *= inv);
                acc
            }
        }
    }

    /// Writes `grad f_i(x)` on the coordinates of `cs`; other entries of `out`
    /// are left as they are.
    pub fn grad_on(&self, i: usize, x: &[T], cs: &CoordSet, out: &mut [T]) {
        match &self.objective {
            Objective::Quadratic(q) => q.grad_on(i, x, cs.coords(), out),
            Objective::Logistic(g) => {
                if cs.is_full() {
                    g.grad_i(i, x, out);
                } else {
                    let mut full = vec![T::zero(); self.d()];
                    g.grad_i(i, x, &mut full);
                    for &c in cs.coords() {
                        out[c] = full[c];
                    }
                }
            }
        }
    }

    /// Adds `scale * grad f_ij(x)` on the coordinates of `cs`.
    pub fn add_inner_grad_on(&self, i: usize, j: usize, x: &[T], cs: &CoordSet, scale: T, out: &mut [T]) {
        match &self.objective {
            Objective::Quadratic(q) => q.component(i, j).add_grad_on(x, cs.coords(), scale, out),
            Objective::Logistic(g) => {
                g.add_inner_grad_on(i, j, x, cs.coords(), cs.member(), scale, out)
            }
        }
    }

    /// Minibatch estimate of `grad f_i(x)` on the coordinates of `cs`. A batch
    /// covering all inner components returns the exact gradient.
    pub fn stochastic_grad_on<R: Rng + ?Sized>(
        &self,
        i: usize,
        x: &[T],
        spec: StochasticSpec,
        rng: &mut R,
        cs: &CoordSet,
        out: &mut [T],
    ) -> Result<()> {
        let l = self.inner_count(i);
        if spec.batch == 0 {
            return Err(Error::InvalidParameter("minibatch size must be positive".into()));
        }
        if spec.batch > l {
            return Err(Error::InvalidParameter(format!(
                "minibatch size {} exceeds the {l} components of worker {i}",
                spec.batch
            )));
        }
        if spec.batch == l {
            self.grad_on(i, x, cs, out);
            return Ok(());
        }
        for &c in cs.coords() {
            out[c] = T::zero();
        }
        let scale = T::one() / T::from_usize_lossy(spec.batch);
        for _ in 0..spec.batch {
            let j = rng.random_range(0..l);
            self.add_inner_grad_on(i, j, x, cs, scale, out);
        }
        Ok(())
    }

    pub fn stochastic_grad<R: Rng + ?Sized>(
        &self,
        i: usize,
        x: &[T],
        spec: StochasticSpec,
        rng: &mut R,
    ) -> Result<Vec<T>> {
        self.check_i(i)?;
        self.check_x(x)?;
        let mut out = vec![T::zero(); self.d()];
        self.stochastic_grad_on(i, x, spec, rng, &CoordSet::full(self.d()), &mut out)?;
        Ok(out)
    }

    /// Exact `E|g_i - grad f_i(x)|^2` of the minibatch oracle.
    pub fn stochastic_variance(&self, i: usize, x: &[T], spec: StochasticSpec) -> Result<T> {
        self.check_i(i)?;
        let l = self.inner_count(i);
        if spec.batch == 0 || spec.batch > l {
            return Err(Error::InvalidParameter(format!("invalid minibatch size {}", spec.batch)));
        }
        if spec.batch == l {
            return Ok(T::zero());
        }
        let g = self.grad_full_unchecked(i, x);
        let mut s = T::zero();
        for j in 0..l {
            s += dist_sq(&self.grad_component(i, j, x)?, &g);
        }
        Ok(s / T::from_usize_lossy(l) / T::from_usize_lossy(spec.batch))
    }

    pub fn solve_reference(&self, tol: T) -> Result<(Vec<T>, T)> {
        let x0 = vec![T::zero(); self.d()];
        self.solve_reference_from(&x0, tol)
    }

    /// Proximal gradient descent with step `1/L`, stopped once the gradient
    /// mapping norm falls below `tol * max(1, |x|)`.
    pub fn solve_reference_from(&self, x0: &[T], tol: T) -> Result<(Vec<T>, T)> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidParameter("reference tolerance must be positive".into()));
        }
        self.check_x(x0)?;
        let step = T::one() / self.l;
        let mut x = x0.to_vec();
        let mut residual = T::infinity();
        for _ in 0..REFERENCE_MAX_ITER {
            let g = self.grad(&x);
            let mut y: Vec<T> = x.iter().zip(&g).map(|(a, b)| *a - step * *b).collect();
            self.reg.prox_in_place(step, &mut y)?;
            residual = dist_sq(&x, &y).sqrt() * self.l;
            x = y;
            if residual <= tol * norm(&x).max(T::one()) {
                let f = self.value(&x);
                return Ok((x, f));
            }
        }
        Err(Error::NonConvergence {
            iterations: REFERENCE_MAX_ITER,
            residual: residual.as_f64(),
        })
    }
}
