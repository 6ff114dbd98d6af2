//! Classical single-worker SAGA over the flattened components.

use rand::Rng;

use crate::blocks::CoordSet;
use crate::error::Result;
use crate::problems::Problem;
use crate::rng;
use crate::scalar::Scalar;

use super::engine::SagaTable;

/// One SAGA step at component `j` (before the prox); updates the memory.
pub(crate) fn saga_step<T: Scalar>(
    problem: &Problem<T>,
    table: &mut SagaTable<T>,
    x: &[T],
    gamma: T,
    j: usize,
) -> Vec<T> {
    let d = x.len();
    let full = CoordSet::full(d);
    let (ci, cj) = problem.global_index(j);
    let mut gj = vec![T::zero(); d];
    problem.add_inner_grad_on(ci, cj, x, &full, T::one(), &mut gj);
    let a = &table.alpha[j];
    let next = (0..d)
        .map(|c| x[c] - gamma * ((gj[c] - a[c]) + table.mean[c]))
        .collect();
    table.update(j, &gj, &full);
    next
}

/// Iterates of plain SAGA for `rounds` steps, memory initialised at `x0`;
/// component `j` of round `t` is drawn from the server stream of `(seed, t)`.
pub fn reference_saga<T: Scalar>(
    problem: &Problem<T>,
    x0: &[T],
    gamma: T,
    rounds: u64,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    let ng = problem
        .n_global()
        .ok_or_else(|| crate::Error::InvalidParameter("unequal component counts".into()))?;
    let full = CoordSet::full(x0.len());
    let alpha = (0..ng)
        .map(|g| {
            let (i, j) = problem.global_index(g);
            let mut a = vec![T::zero(); x0.len()];
            problem.add_inner_grad_on(i, j, x0, &full, T::one(), &mut a);
            a
        })
        .collect();
    let mut table = SagaTable::new(alpha);
    let mut x = x0.to_vec();
    let mut out = vec![x.clone()];
    for t in 0..rounds {
        let j = rng::stream(seed, rng::SERVER, t).random_range(0..ng);
        let mut next = saga_step(problem, &mut table, &x, gamma, j);
        problem.regularizer().prox_in_place(gamma, &mut next)?;
        x = next;
        out.push(x.clone());
    }
    Ok(out)
}
