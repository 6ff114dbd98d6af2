use crate::blocks::{blocks_for_tau, sample_bernoulli, BlockPartition, BlockSample, CoordSet};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::problems::{Problem, StochasticSpec};
use crate::rng::{self, sample_distinct};
use crate::scalar::Scalar;

use super::{stepsize_default, stepsize_figure, MethodConfig, MethodKind, Schedule, StepsizeRule};
use rand::Rng;

/// Configuration checked against a problem, with every derived constant.
#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub kind: MethodKind,
    pub n: usize,
    pub m: usize,
    /// Blocks per worker sample, `tau * m`.
    pub k: usize,
    pub tau: f64,
    pub partition: BlockPartition,
    pub schedule: Schedule<T>,
    pub stochastic: Option<StochasticSpec>,
    pub accel: Option<AccelParams<T>>,
    /// Component count of the shared data set (shared-data methods only).
    pub n_global: Option<usize>,
}

/// Constants of the accelerated three-sequence recursion.
#[derive(Debug, Clone, Copy)]
pub struct AccelParams<T> {
    pub rho_hat: T,
    pub eta: T,
    pub gamma: T,
    pub beta: T,
    pub alpha: T,
}

impl<T: Scalar> AccelParams<T> {
    /// `rho_hat` is the strong-growth constant of the estimator; `L`, `mu`
    /// those of `f`.
    pub fn new(rho_hat: T, l: T, mu: T) -> Self {
        let eta = T::one() / (rho_hat * l);
        let s = (mu * eta / rho_hat).sqrt();
        Self {
            rho_hat,
            eta,
            gamma: T::one() / (rho_hat * s),
            beta: T::one() - s,
            alpha: s / (T::one() + s),
        }
    }
}

impl<T: Scalar> Resolved<T> {
    pub fn new(problem: &Problem<T>, cfg: &MethodConfig) -> Result<Self> {
        let kind = cfg.kind;
        let d = problem.d();
        let m = if cfg.blocks == 0 { d } else { cfg.blocks };
        let partition = BlockPartition::uniform(d, m)?;

        let (n, n_global) = if kind.uses_shared_data() {
            let n_global = problem.n_global().ok_or_else(|| {
                Error::InvalidParameter(
                    "shared-data methods need workers with equal component counts".into(),
                )
            })?;
            let n = if kind == MethodKind::Saga {
                if cfg.n_workers > 1 {
                    return Err(Error::InvalidParameter("saga runs on a single worker".into()));
                }
                1
            } else if cfg.n_workers == 0 {
                1
            } else {
                cfg.n_workers
            };
            if n_global < n {
                return Err(Error::InvalidParameter(format!(
                    "{n} workers need at least {n} components, the problem has {n_global}"
                )));
            }
            (n, Some(n_global))
        } else {
            let nc = problem.n_components();
            if cfg.n_workers != 0 && cfg.n_workers != nc {
                return Err(Error::InvalidParameter(format!(
                    "{kind} needs one worker per component: n = {} but the problem has {nc}",
                    cfg.n_workers
                )));
            }
            (nc, None)
        };

        let tau = match kind {
            MethodKind::Gd | MethodKind::Saga => {
                if (cfg.tau - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("{kind} requires tau = 1")));
                }
                1.0
            }
            _ => cfg.tau,
        };
        let k = match kind {
            MethodKind::Ibgd => {
                if !(tau > 0.0 && tau <= 1.0) {
                    return Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1]")));
                }
                m
            }
            _ => blocks_for_tau(m, tau)?,
        };

        let stochastic = match (kind.is_stochastic_oracle(), cfg.stochastic) {
            (_, None) => None,
            (true, Some(spec)) => {
                let min_l = (0..problem.n_components())
                    .map(|i| problem.inner_count(i))
                    .min()
                    .unwrap_or(0);
                if spec.batch == 0 || spec.batch > min_l {
                    return Err(Error::InvalidParameter(format!(
                        "minibatch size {} must lie in 1..={min_l}",
                        spec.batch
                    )));
                }
                Some(spec)
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(format!(
                    "{kind} uses exact gradients; remove the minibatch setting"
                )))
            }
        };

        let l = problem.smoothness();
        let schedule = match cfg.stepsize {
            StepsizeRule::Default => stepsize_default(kind, problem, n, tau)?,
            StepsizeRule::Figure => stepsize_figure(kind, problem, n, tau)?,
            StepsizeRule::Constant(g) => Schedule::Constant(T::lit(g)),
            StepsizeRule::OverL(c) => Schedule::Constant(T::lit(c) / l),
            StepsizeRule::Decreasing { a, c } => {
                if !(a > 0.0 && c >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "decreasing schedule needs a > 0 and c >= 0 (got a={a}, c={c})"
                    )));
                }
                Schedule::Decreasing {
                    a: T::lit(a),
                    c: T::lit(c),
                }
            }
        };
        if !(schedule.initial() > T::zero()) || !schedule.initial().is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stepsize {} must be positive and finite",
                schedule.initial()
            )));
        }

        let accel = if kind == MethodKind::Iasgd {
            let rho = cfg.rho_hat.ok_or_else(|| {
                Error::InvalidParameter("iasgd needs rho_hat (set it directly or grid-search it)".into())
            })?;
            if !(rho >= 1.0) {
                return Err(Error::InvalidParameter(format!("rho_hat = {rho} must be at least 1")));
            }
            let mu = problem.strong_convexity();
            if !(mu > T::zero()) {
                return Err(Error::InvalidParameter(
                    "iasgd needs a strongly convex objective (mu > 0)".into(),
                ));
            }
            if !problem.regularizer().is_zero() {
                return Err(Error::InvalidParameter("iasgd does not support a regularizer".into()));
            }
            Some(AccelParams::new(T::lit(rho), l, mu))
        } else {
            None
        };

        if kind == MethodKind::IsagaDistributed && !problem.satisfies_zero_grads() {
            log::warn!(
                "distributed ISAGA on a problem whose local gradients do not vanish at the optimum; \
                 the method converges to a neighbourhood only"
            );
        }

        Ok(Self {
            kind,
            n,
            m,
            k,
            tau,
            partition,
            schedule,
            stochastic,
            accel,
            n_global,
        })
    }

    /// `tau` as realised by the block count.
    pub fn tau_effective(&self) -> f64 {
        self.k as f64 / self.m as f64
    }
}

/// Gradient memory: one vector per component and their running mean.
#[derive(Debug, Clone)]
pub struct SagaTable<T> {
    pub alpha: Vec<Vec<T>>,
    pub mean: Vec<T>,
}

impl<T: Scalar> SagaTable<T> {
    pub(crate) fn new(alpha: Vec<Vec<T>>) -> Self {
        let mean = fresh_mean(&alpha);
        Self { alpha, mean }
    }

    /// Largest deviation between the running mean and a fresh average.
    pub fn audit(&self) -> T {
        let fresh = fresh_mean(&self.alpha);
        fresh
            .iter()
            .zip(&self.mean)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// Sets `alpha_j` to `grad` on `cs`, keeping the mean in sync.
    pub(crate) fn update(&mut self, j: usize, grad: &[T], cs: &CoordSet) {
        let inv = T::from_usize_lossy(self.alpha.len());
        let row = &mut self.alpha[j];
        for &c in cs.coords() {
            self.mean[c] += (grad[c] - row[c]) / inv;
            row[c] = grad[c];
        }
    }
}

fn fresh_mean<T: Scalar>(rows: &[Vec<T>]) -> Vec<T> {
    let d = rows.first().map_or(0, Vec::len);
    let mut mean = vec![T::zero(); d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += *v;
        }
    }
    let inv = T::from_usize_lossy(rows.len());
    mean.iter_mut().for_each(|m| *m /= inv);
    mean
}

#[derive(Debug, Clone)]
pub struct WorkerState<T> {
    pub id: usize,
    pub saga: Option<SagaTable<T>>,
    pub h: Option<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct AccelState<T> {
    pub v: Vec<T>,
    pub y: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ServerState<T> {
    pub t: u64,
    pub x: Vec<T>,
    /// `sum_k x^k / gamma^k` and `sum_k 1 / gamma^k`.
    pub weighted: Option<(Vec<T>, T)>,
    pub accel: Option<AccelState<T>>,
}

impl<T: Scalar> ServerState<T> {
    pub fn weighted_average(&self) -> Option<Vec<T>> {
        self.weighted
            .as_ref()
            .map(|(acc, z)| acc.iter().map(|a| *a / *z).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundComm {
    pub blocks_up: u64,
    pub blocks_down: u64,
}

/// Average of the proposals `x - gamma * g_i` where `g_i` is read on the
/// coordinates of its set and zero elsewhere; proposals are summed in
/// ascending worker order and divided by their count.
pub(crate) fn sparsified_average<T: Scalar>(x: &[T], gamma: T, parts: &[(CoordSet, Vec<T>)]) -> Vec<T> {
    let mut acc: Vec<T> = Vec::new();
    let mut prop = vec![T::zero(); x.len()];
    for (i, (cs, g)) in parts.iter().enumerate() {
        prop.copy_from_slice(x);
        for &c in cs.coords() {
            prop[c] = x[c] - gamma * g[c];
        }
        if i == 0 {
            acc = prop.clone();
        } else {
            for (a, p) in acc.iter_mut().zip(&prop) {
                *a += *p;
            }
        }
    }
    let n = T::from_usize_lossy(parts.len());
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Server average of one independent-block round for fixed per-worker samples.
pub fn ibcd_aggregate<T: Scalar>(
    problem: &Problem<T>,
    part: &BlockPartition,
    x: &[T],
    gamma: T,
    samples: &[BlockSample],
) -> Vec<T> {
    let parts: Vec<(CoordSet, Vec<T>)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cs = part.coord_set(s);
            let mut g = vec![T::zero(); x.len()];
            problem.grad_on(i, x, &cs, &mut g);
            (cs, g)
        })
        .collect();
    sparsified_average(x, gamma, &parts)
}

/// Server average of a whole-gradient-with-probability round for fixed coins.
pub fn ibgd_aggregate<T: Scalar>(
    problem: &Problem<T>,
    part: &BlockPartition,
    x: &[T],
    gamma: T,
    coins: &[bool],
) -> Vec<T> {
    let samples: Vec<BlockSample> = coins
        .iter()
        .map(|&c| if c { BlockSample::full(part.m()) } else { BlockSample::empty() })
        .collect();
    ibcd_aggregate(problem, part, x, gamma, &samples)
}

/// Gradient estimate `h + (1/tau) (grad f_i - h)_U` of worker `i`; afterwards
/// `h` holds `grad f_i` on `U`. Only the sampled partial derivatives are
/// evaluated.
pub fn isega_estimate<T: Scalar>(
    problem: &Problem<T>,
    part: &BlockPartition,
    i: usize,
    x: &[T],
    h: &mut [T],
    sample: &BlockSample,
    tau: T,
) -> Vec<T> {
    let cs = part.coord_set(sample);
    let mut grad = vec![T::zero(); x.len()];
    problem.grad_on(i, x, &cs, &mut grad);
    let mut g = h.to_vec();
    let inv_tau = T::one() / tau;
    for &c in cs.coords() {
        let r = grad[c] - h[c];
        g[c] = h[c] + inv_tau * r;
        h[c] += r;
    }
    g
}

/// State machine running one synchronous method round by round.
pub struct Engine<'a, T> {
    pub problem: &'a Problem<T>,
    pub res: Resolved<T>,
    pub seed: u64,
    pub server: ServerState<T>,
    pub workers: Vec<WorkerState<T>>,
    /// Shared-data memory, indexed by global component.
    pub shared: Option<SagaTable<T>>,
}

impl<'a, T: Scalar> Engine<'a, T> {
    pub fn new(problem: &'a Problem<T>, cfg: &MethodConfig, x0: &[T], seed: u64) -> Result<Self> {
        let res = Resolved::new(problem, cfg)?;
        Self::with_resolved(problem, res, x0, seed)
    }

    pub fn with_resolved(problem: &'a Problem<T>, res: Resolved<T>, x0: &[T], seed: u64) -> Result<Self> {
        let d = problem.d();
        if x0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x0.len(),
            });
        }
        if res.kind == MethodKind::AsyncIsgd {
            return Err(Error::InvalidParameter(
                "the asynchronous method runs through the asynchronous simulator".into(),
            ));
        }
        let full = CoordSet::full(d);
        let shared = if res.kind.uses_shared_data() {
            let ng = res.n_global.expect("resolved shared method has a component count");
            let alpha = (0..ng)
                .map(|g| {
                    let (i, j) = problem.global_index(g);
                    let mut a = vec![T::zero(); d];
                    problem.add_inner_grad_on(i, j, x0, &full, T::one(), &mut a);
                    a
                })
                .collect();
            Some(SagaTable::new(alpha))
        } else {
            None
        };
        let workers = (0..res.n)
            .map(|i| {
                let saga = (res.kind == MethodKind::IsagaDistributed).then(|| {
                    SagaTable::new(
                        (0..problem.inner_count(i))
                            .map(|j| {
                                let mut a = vec![T::zero(); d];
                                problem.add_inner_grad_on(i, j, x0, &full, T::one(), &mut a);
                                a
                            })
                            .collect(),
                    )
                });
                let h = (res.kind == MethodKind::Isega).then(|| vec![T::zero(); d]);
                WorkerState { id: i, saga, h }
            })
            .collect();
        let weighted = matches!(res.kind, MethodKind::Isgd | MethodKind::IsgdNonconvex).then(|| {
            let inv = T::one() / res.schedule.at(0);
            (x0.iter().map(|v| *v * inv).collect(), inv)
        });
        let accel = res.accel.map(|_| AccelState {
            v: x0.to_vec(),
            y: x0.to_vec(),
        });
        Ok(Self {
            problem,
            res,
            seed,
            server: ServerState {
                t: 0,
                x: x0.to_vec(),
                weighted,
                accel,
            },
            workers,
            shared,
        })
    }

    pub fn round(&self) -> u64 {
        self.server.t
    }

    pub fn x(&self) -> &[T] {
        &self.server.x
    }

    fn worker_rng(&self, i: usize) -> rng::Stream {
        rng::stream(self.seed, i as u64, self.server.t)
    }

    fn server_rng(&self) -> rng::Stream {
        rng::stream(self.seed, rng::SERVER, self.server.t)
    }

    /// Advances `x^t` to `x^{t+1}`.
    pub fn step(&mut self) -> Result<RoundComm> {
        if self.server.t == u64::MAX {
            return Err(Error::InvalidParameter("round counter exhausted".into()));
        }
        let gamma = self.res.schedule.at(self.server.t);
        let n = self.res.n as u64;
        let m = self.res.m as u64;
        let mut comm = RoundComm {
            blocks_up: 0,
            blocks_down: n * m,
        };
        let next = match self.res.kind {
            MethodKind::Gd => {
                let samples = vec![BlockSample::full(self.res.m); self.res.n];
                comm.blocks_up = n * m;
                ibcd_aggregate(self.problem, &self.res.partition, &self.server.x, gamma, &samples)
            }
            MethodKind::Ibcd => {
                let samples: Vec<BlockSample> = (0..self.res.n)
                    .map(|i| self.res.partition.sample_k(self.res.k, &mut self.worker_rng(i)))
                    .collect();
                comm.blocks_up = samples.iter().map(|s| s.len() as u64).sum();
                ibcd_aggregate(self.problem, &self.res.partition, &self.server.x, gamma, &samples)
            }
            MethodKind::CdShared => {
                let s = self.res.partition.sample_k(self.res.k, &mut self.server_rng());
                let samples = vec![s; self.res.n];
                comm.blocks_up = samples.iter().map(|s| s.len() as u64).sum();
                ibcd_aggregate(self.problem, &self.res.partition, &self.server.x, gamma, &samples)
            }
            MethodKind::Ibgd => {
                let coins = (0..self.res.n)
                    .map(|i| sample_bernoulli(self.res.tau, &mut self.worker_rng(i)))
                    .collect::<Result<Vec<bool>>>()?;
                comm.blocks_up = coins.iter().filter(|c| **c).count() as u64 * m;
                ibgd_aggregate(self.problem, &self.res.partition, &self.server.x, gamma, &coins)
            }
            MethodKind::Isgd | MethodKind::IsgdNonconvex => {
                let mut parts = Vec::with_capacity(self.res.n);
                for i in 0..self.res.n {
                    let mut r = self.worker_rng(i);
                    let s = self.res.partition.sample_k(self.res.k, &mut r);
                    comm.blocks_up += s.len() as u64;
                    let cs = self.res.partition.coord_set(&s);
                    let mut g = vec![T::zero(); self.problem.d()];
                    self.local_grad(i, &self.server.x, &mut r, &cs, &mut g)?;
                    parts.push((cs, g));
                }
                sparsified_average(&self.server.x, gamma, &parts)
            }
            MethodKind::Saga => {
                let ng = self.res.n_global.expect("shared count");
                let j = self.server_rng().random_range(0..ng);
                let table = self.shared.as_mut().expect("saga memory");
                comm.blocks_up = m;
                comm.blocks_down = m;
                super::saga::saga_step(self.problem, table, &self.server.x, gamma, j)
            }
            MethodKind::IsagaShared => {
                let ng = self.res.n_global.expect("shared count");
                let js = sample_distinct(ng, self.res.n, &mut self.server_rng());
                let mut parts = Vec::with_capacity(self.res.n);
                let mut fresh = Vec::with_capacity(self.res.n);
                let table = self.shared.as_ref().expect("shared memory");
                for (i, &j) in js.iter().enumerate() {
                    let s = self.res.partition.sample_k(self.res.k, &mut self.worker_rng(i));
                    comm.blocks_up += s.len() as u64;
                    let cs = self.res.partition.coord_set(&s);
                    let (ci, cj) = self.problem.global_index(j);
                    let mut gj = vec![T::zero(); self.problem.d()];
                    self.problem.add_inner_grad_on(ci, cj, &self.server.x, &cs, T::one(), &mut gj);
                    let a = &table.alpha[j];
                    let est: Vec<T> = (0..gj.len())
                        .map(|c| (gj[c] - a[c]) + table.mean[c])
                        .collect();
                    parts.push((cs.clone(), est));
                    fresh.push((j, gj, cs));
                }
                let next = sparsified_average(&self.server.x, gamma, &parts);
                let table = self.shared.as_mut().expect("shared memory");
                for (j, gj, cs) in fresh {
                    table.update(j, &gj, &cs);
                }
                next
            }
            MethodKind::IsagaDistributed => {
                let mut parts = Vec::with_capacity(self.res.n);
                let mut fresh = Vec::with_capacity(self.res.n);
                for i in 0..self.res.n {
                    let mut r = self.worker_rng(i);
                    let s = self.res.partition.sample_k(self.res.k, &mut r);
                    comm.blocks_up += s.len() as u64;
                    let cs = self.res.partition.coord_set(&s);
                    let table = self.workers[i].saga.as_ref().expect("worker memory");
                    let j = r.random_range(0..table.alpha.len());
                    let mut gj = vec![T::zero(); self.problem.d()];
                    self.problem.add_inner_grad_on(i, j, &self.server.x, &cs, T::one(), &mut gj);
                    let a = &table.alpha[j];
                    let est: Vec<T> = (0..gj.len())
                        .map(|c| (gj[c] - a[c]) + table.mean[c])
                        .collect();
                    parts.push((cs.clone(), est));
                    fresh.push((j, gj, cs));
                }
                let next = sparsified_average(&self.server.x, gamma, &parts);
                for (i, (j, gj, cs)) in fresh.into_iter().enumerate() {
                    self.workers[i].saga.as_mut().expect("worker memory").update(j, &gj, &cs);
                }
                next
            }
            MethodKind::Isega => {
                let d = self.problem.d();
                let tau = T::lit(self.res.tau_effective());
                let mut acc = vec![T::zero(); d];
                for i in 0..self.res.n {
                    let s = self.res.partition.sample_k(self.res.k, &mut self.worker_rng(i));
                    comm.blocks_up += s.len() as u64;
                    let h = self.workers[i].h.as_mut().expect("sega memory");
                    let g = isega_estimate(
                        self.problem,
                        &self.res.partition,
                        i,
                        &self.server.x,
                        h,
                        &s,
                        tau,
                    );
                    for (a, v) in acc.iter_mut().zip(&g) {
                        *a += *v;
                    }
                }
                let inv = T::one() / T::from_usize_lossy(self.res.n);
                let x = &self.server.x;
                (0..d).map(|c| x[c] - gamma * (acc[c] * inv)).collect()
            }
            MethodKind::Iasgd => {
                let p = self.res.accel.expect("accelerated constants");
                let st = self.server.accel.as_ref().expect("accelerated state");
                let d = self.problem.d();
                let mut q = vec![T::zero(); d];
                let mut g = vec![T::zero(); d];
                for i in 0..self.res.n {
                    let mut r = self.worker_rng(i);
                    let s = self.res.partition.sample_k(self.res.k, &mut r);
                    comm.blocks_up += s.len() as u64;
                    let cs = self.res.partition.coord_set(&s);
                    self.local_grad(i, &st.y, &mut r, &cs, &mut g)?;
                    for &c in cs.coords() {
                        q[c] += g[c];
                    }
                }
                let scale = T::one() / (T::from_usize_lossy(self.res.n) * T::lit(self.res.tau_effective()));
                q.iter_mut().for_each(|v| *v *= scale);
                let w: Vec<T> = st.y.iter().zip(&q).map(|(y, qv)| *y - p.eta * *qv).collect();
                let v: Vec<T> = (0..d)
                    .map(|c| p.beta * st.v[c] + (T::one() - p.beta) * st.y[c] - p.gamma * p.eta * q[c])
                    .collect();
                let y: Vec<T> = (0..d)
                    .map(|c| p.alpha * v[c] + (T::one() - p.alpha) * w[c])
                    .collect();
                self.server.accel = Some(AccelState { v, y });
                w
            }
            MethodKind::AsyncIsgd => unreachable!("rejected at construction"),
        };
        let mut next = next;
        if self.res.kind != MethodKind::Iasgd {
            self.problem.regularizer().prox_in_place(gamma, &mut next)?;
        }
        self.server.x = next;
        self.server.t += 1;
        if let Some((acc, z)) = self.server.weighted.as_mut() {
            let inv = T::one() / self.res.schedule.at(self.server.t);
            axpy(inv, &self.server.x, acc);
            *z += inv;
        }
        Ok(comm)
    }

    /// Local gradient (exact or minibatch) of worker `i` on `cs`.
    fn local_grad(&self, i: usize, x: &[T], r: &mut rng::Stream, cs: &CoordSet, out: &mut [T]) -> Result<()> {
        match self.res.stochastic {
            Some(spec) => self.problem.stochastic_grad_on(i, x, spec, r, cs, out),
            None => {
                self.problem.grad_on(i, x, cs, out);
                Ok(())
            }
        }
    }

    /// Lyapunov coefficient `c = (1/n)(1/(gamma L) - 1/n - tau)` of the SAGA
    /// family, when positive.
    pub fn lyapunov_coefficient(&self) -> Option<T> {
        if !matches!(
            self.res.kind,
            MethodKind::Saga | MethodKind::IsagaShared | MethodKind::IsagaDistributed
        ) {
            return None;
        }
        let gamma = self.res.schedule.initial();
        let n = T::from_usize_lossy(self.res.n);
        let tau = T::lit(self.res.tau_effective());
        let c = (T::one() / (gamma * self.problem.smoothness()) - T::one() / n - tau) / n;
        (c > T::zero()).then_some(c)
    }

    /// Memory rows with their `(worker, inner)` owners, in global order.
    pub fn memory_rows(&self) -> Option<Vec<((usize, usize), &[T])>> {
        if let Some(t) = &self.shared {
            return Some(
                t.alpha
                    .iter()
                    .enumerate()
                    .map(|(g, a)| (self.problem.global_index(g), a.as_slice()))
                    .collect(),
            );
        }
        if self.res.kind == MethodKind::IsagaDistributed {
            let mut rows = Vec::new();
            for w in &self.workers {
                let t = w.saga.as_ref()?;
                for (j, a) in t.alpha.iter().enumerate() {
                    rows.push(((w.id, j), a.as_slice()));
                }
            }
            return Some(rows);
        }
        None
    }

    /// Worst running-mean drift over all gradient memories.
    pub fn audit_memory(&self) -> Option<T> {
        let mut worst: Option<T> = self.shared.as_ref().map(SagaTable::audit);
        for w in &self.workers {
            if let Some(t) = &w.saga {
                let a = t.audit();
                worst = Some(worst.map_or(a, |b| b.max(a)));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist_sq, norm_sq};

    fn quad(n: usize) -> Problem<f64> {
        Problem::quadratic_synthesize(8, n, 4, 3).unwrap()
    }

    #[test]
    fn single_worker_full_ibcd_is_a_gradient_step() {
        let p = quad(1);
        let part = BlockPartition::uniform(8, 4).unwrap();
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 3.0).collect();
        let out = ibcd_aggregate(&p, &part, &x, 0.3, &[BlockSample::full(4)]);
        let g = p.grad_full(0, &x).unwrap();
        for c in 0..8 {
            assert_eq!(out[c], x[c] - 0.3 * g[c]);
        }
    }

    #[test]
    fn optimum_is_fixed_for_every_sample() {
        let p = quad(2);
        let part = BlockPartition::uniform(8, 4).unwrap();
        let x = p.x_star().to_vec();
        let subs = part.enumerate_subsets(0.5).unwrap();
        for a in &subs {
            for b in &subs {
                let out = ibcd_aggregate(&p, &part, &x, 0.7, &[a.clone(), b.clone()]);
                assert_eq!(out, x);
            }
        }
    }

    #[test]
    fn enumerated_ibcd_mean_is_scaled_gradient_step() {
        let p = quad(2);
        let part = BlockPartition::uniform(8, 4).unwrap();
        let x: Vec<f64> = (0..8).map(|i| (i as f64).cos()).collect();
        let gamma = 0.4;
        let subs = part.enumerate_subsets(0.5).unwrap();
        let mut mean = [0.0; 8];
        for a in &subs {
            for b in &subs {
                let out = ibcd_aggregate(&p, &part, &x, gamma, &[a.clone(), b.clone()]);
                for (m, o) in mean.iter_mut().zip(out) {
                    *m += o / 36.0;
                }
            }
        }
        let g = p.grad(&x);
        for c in 0..8 {
            approx::assert_abs_diff_eq!(mean[c], x[c] - gamma * 0.5 * g[c], epsilon = 1e-12);
        }
    }

    #[test]
    fn ibgd_coin_moments() {
        let p = quad(1);
        let part = BlockPartition::uniform(8, 8).unwrap();
        let x: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let gamma = 0.25;
        let tau = 0.3;
        let on = ibgd_aggregate(&p, &part, &x, gamma, &[true]);
        let off = ibgd_aggregate(&p, &part, &x, gamma, &[false]);
        assert_eq!(off, x);
        let g = p.grad_full(0, &x).unwrap();
        let mean: Vec<f64> = (0..8).map(|c| tau * on[c] + (1.0 - tau) * off[c]).collect();
        for c in 0..8 {
            approx::assert_abs_diff_eq!(mean[c], x[c] - gamma * tau * g[c], epsilon = 1e-14);
        }
        let second = tau * dist_sq(&on, &mean) + (1.0 - tau) * dist_sq(&off, &mean);
        approx::assert_relative_eq!(
            second,
            tau * (1.0 - tau) * gamma * gamma * norm_sq(&g),
            max_relative = 1e-12
        );
    }

    #[test]
    fn isega_estimator_is_unbiased_and_h_learns() {
        let p = quad(1);
        let part = BlockPartition::uniform(8, 4).unwrap();
        let x: Vec<f64> = (0..8).map(|i| 0.3 * i as f64 - 1.0).collect();
        let h0: Vec<f64> = (0..8).map(|i| (i as f64 * 0.9).sin()).collect();
        let g = p.grad_full(0, &x).unwrap();
        let subs = part.enumerate_subsets(0.5).unwrap();
        let mut mean = [0.0; 8];
        for s in &subs {
            let mut h = h0.clone();
            let est = isega_estimate(&p, &part, 0, &x, &mut h, s, 0.5);
            for (m, e) in mean.iter_mut().zip(est) {
                *m += e / subs.len() as f64;
            }
        }
        for c in 0..8 {
            approx::assert_abs_diff_eq!(mean[c], g[c], epsilon = 1e-12);
        }
        let mut h = g.clone();
        let est = isega_estimate(&p, &part, 0, &x, &mut h, &subs[0], 0.5);
        assert_eq!(est, g);
    }

    #[test]
    fn isega_h_contracts_in_expectation() {
        let p = Problem::<f64>::quadratic_synthesize(8, 2, 4, 5).unwrap();
        let part = BlockPartition::uniform(8, 4).unwrap();
        let x: Vec<f64> = (0..8).map(|i| 0.2 * i as f64 - 0.5).collect();
        let h0: Vec<f64> = (0..8).map(|i| (i as f64).cos()).collect();
        let gstar = p.grad_full(1, p.x_star()).unwrap();
        let gx = p.grad_full(1, &x).unwrap();
        for tau in [0.25, 0.5, 0.75, 1.0] {
            let subs = part.enumerate_subsets(tau).unwrap();
            let mut lhs = 0.0;
            for s in &subs {
                let mut h = h0.clone();
                isega_estimate(&p, &part, 1, &x, &mut h, s, tau);
                lhs += dist_sq(&h, &gstar) / subs.len() as f64;
            }
            let rhs = (1.0 - tau) * dist_sq(&h0, &gstar) + tau * dist_sq(&gx, &gstar);
            approx::assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn resolution_errors() {
        let p = quad(2);
        let bad_tau = MethodConfig::new(MethodKind::Ibcd).tau(0.3).blocks(4);
        assert!(matches!(Resolved::new(&p, &bad_tau), Err(Error::NonIntegerTau { .. })));
        let wrong_n = MethodConfig::new(MethodKind::Ibcd).workers(3);
        assert!(Resolved::new(&p, &wrong_n).is_err());
        let no_rho = MethodConfig::new(MethodKind::Iasgd);
        assert!(Resolved::new(&p, &no_rho).is_err());
        let batch_on_exact = MethodConfig::new(MethodKind::Ibcd).batch(1);
        assert!(Resolved::new(&p, &batch_on_exact).is_err());
        let big_batch = MethodConfig::new(MethodKind::Isgd).batch(5);
        assert!(Resolved::new(&p, &big_batch).is_err());
        let too_many = MethodConfig::new(MethodKind::IsagaShared).workers(9);
        assert!(Resolved::new(&p, &too_many).is_err());
    }

    #[test]
    fn saga_memory_stays_in_sync() {
        let p = Problem::<f64>::quadratic_synthesize_noisy(6, 3, 5, 2, 0.5).unwrap();
        let x0 = vec![1.0; 6];
        for kind in [MethodKind::IsagaShared, MethodKind::IsagaDistributed] {
            let cfg = MethodConfig::new(kind).tau(0.5).blocks(6).workers(3);
            let mut e = Engine::new(&p, &cfg, &x0, 4).unwrap();
            for _ in 0..1000 {
                e.step().unwrap();
            }
            assert!(e.audit_memory().unwrap() < 1e-10);
        }
    }

    #[test]
    fn decreasing_schedule_normalizer() {
        let p = Problem::<f64>::quadratic_synthesize_noisy(6, 2, 5, 2, 0.5).unwrap();
        let cfg = MethodConfig::new(MethodKind::Isgd).tau(0.5).blocks(6).batch(1);
        let mut e = Engine::new(&p, &cfg, &[1.0; 6], 1).unwrap();
        let Schedule::Decreasing { a, c } = e.res.schedule else { panic!() };
        for _ in 0..50 {
            e.step().unwrap();
        }
        let t = e.round() as f64;
        let z = e.server.weighted.as_ref().unwrap().1;
        approx::assert_relative_eq!(z, (t + 1.0) * a + 0.5 * c * t * (t + 1.0), max_relative = 1e-12);
    }
}
