//! Verification machinery: finite differences, exhaustive enumeration of
//! sampling outcomes, Lyapunov values, theoretical rates and rate fitting.

use crate::blocks::{binomial, BlockPartition, BlockSample, CoordSet, ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::methods::{ibcd_aggregate, MethodKind};
use crate::problems::Problem;
use crate::rng;
use crate::scalar::Scalar;
use crate::simulator::{Metric, Trace};

/// Monte-Carlo draws used when enumeration would be too large.
pub const MONTE_CARLO_SAMPLES: usize = 200_000;

/// Central-difference gradient of `f_i` (or of `f` when `i` is `None`).
pub fn fd_gradient<T: Scalar>(problem: &Problem<T>, i: Option<usize>, x: &[T], h: T) -> Result<Vec<T>> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("step h = {h} must be positive")));
    }
    let eval = |y: &[T]| -> Result<T> {
        match i {
            Some(i) => problem.component_value(i, y),
            None => Ok(problem.smooth_value(y)),
        }
    };
    let mut y = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for c in 0..x.len() {
        y[c] = x[c] + h;
        let up = eval(&y)?;
        y[c] = x[c] - h;
        let down = eval(&y)?;
        y[c] = x[c];
        out.push((up - down) / (h + h));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub mean: Vec<T>,
    /// `E ||X - E X||^2`.
    pub variance: T,
    pub outcomes: usize,
    /// `false` when the moments come from Monte-Carlo sampling.
    pub exact: bool,
}

fn joint_count(m: usize, k: usize, n: usize) -> f64 {
    binomial(m, k).powi(n as i32)
}

/// Exact mean and variance of the independent-block aggregate at `x`, over
/// every joint choice of per-worker subsets.
pub fn moment_enumerate<T: Scalar>(
    problem: &Problem<T>,
    x: &[T],
    partition: &BlockPartition,
    tau: f64,
    gamma: T,
) -> Result<Moments<T>> {
    let n = problem.n_components();
    let k = partition.blocks_per_sample(tau)?;
    let count = joint_count(partition.m(), k, n);
    if count > ENUMERATION_LIMIT {
        return Err(Error::CombinatorialBlowup {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let subsets = partition.enumerate_subsets(tau)?;
    let mut idx = vec![0usize; n];
    let mut outs: Vec<Vec<T>> = Vec::with_capacity(count as usize);
    loop {
        let samples: Vec<BlockSample> = idx.iter().map(|&s| subsets[s].clone()).collect();
        outs.push(ibcd_aggregate(problem, partition, x, gamma, &samples));
        let mut w = 0;
        while w < n {
            idx[w] += 1;
            if idx[w] < subsets.len() {
                break;
            }
            idx[w] = 0;
            w += 1;
        }
        if w == n {
            break;
        }
    }
    Ok(summarize(outs, true))
}

fn summarize<T: Scalar>(outs: Vec<Vec<T>>, exact: bool) -> Moments<T> {
    let k = T::from_usize_lossy(outs.len());
    let d = outs[0].len();
    let mut mean = vec![T::zero(); d];
    for o in &outs {
        for (m, v) in mean.iter_mut().zip(o) {
            *m += *v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let variance = outs.iter().map(|o| dist_sq(o, &mean)).fold(T::zero(), |a, b| a + b) / k;
    Moments {
        mean,
        variance,
        outcomes: outs.len(),
        exact,
    }
}

/// Moments of the aggregate: enumerated when the joint outcome count is at
/// most the enumeration limit, sampled otherwise.
pub fn moment_oracle<T: Scalar>(
    problem: &Problem<T>,
    x: &[T],
    partition: &BlockPartition,
    tau: f64,
    gamma: T,
) -> Result<Moments<T>> {
    match moment_enumerate(problem, x, partition, tau, gamma) {
        Err(Error::CombinatorialBlowup { .. }) => {}
        other => return other,
    }
    let n = problem.n_components();
    let k = partition.blocks_per_sample(tau)?;
    let outs = (0..MONTE_CARLO_SAMPLES as u64)
        .map(|s| {
            let samples: Vec<BlockSample> = (0..n)
                .map(|i| partition.sample_k(k, &mut rng::stream(s, i as u64, rng::SETUP)))
                .collect();
            ibcd_aggregate(problem, partition, x, gamma, &samples)
        })
        .collect();
    Ok(summarize(outs, false))
}

/// Closed-form noiseless moments: mean `x - gamma tau grad f(x)` and variance
/// `gamma^2 tau (1 - tau) / n^2 * sum_i ||grad f_i(x)||^2`.
pub fn moments_closed_form<T: Scalar>(problem: &Problem<T>, x: &[T], tau: f64, gamma: T) -> Result<(Vec<T>, T)> {
    let n = problem.n_components();
    let tau = T::lit(tau);
    let g = problem.grad(x);
    let mean = x.iter().zip(&g).map(|(xv, gv)| *xv - gamma * tau * *gv).collect();
    let mut s = T::zero();
    for i in 0..n {
        s += norm_sq(&problem.grad_full(i, x)?);
    }
    let nf = T::from_usize_lossy(n);
    Ok((mean, gamma * gamma * tau * (T::one() - tau) / (nf * nf) * s))
}

/// Theorem constants for one method at a given stepsize.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBundle {
    pub kind: MethodKind,
    /// Contraction of the bounded quantity per round (per epoch for the
    /// asynchronous method); `1` for methods with a sublinear rate.
    pub factor: f64,
    /// Largest stepsize the theorem allows.
    pub gamma_bound: f64,
    /// Lyapunov coefficient `c` (SAGA family).
    pub lyapunov_c: Option<f64>,
    /// `vartheta` (SAGA family).
    pub theta: Option<f64>,
    /// `(a, c)` of the decreasing schedule (ISGD).
    pub schedule: Option<(f64, f64)>,
    /// Coefficient of `sigma^2` in the asymptotic floor (asynchronous ISGD).
    pub floor_coeff: Option<f64>,
    pub per_epoch: bool,
}

impl RateBundle {
    fn new(kind: MethodKind, factor: f64, gamma_bound: f64) -> Self {
        Self {
            kind,
            factor,
            gamma_bound,
            lyapunov_c: None,
            theta: None,
            schedule: None,
            floor_coeff: None,
            per_epoch: false,
        }
    }
}

fn check_gamma(gamma: f64, bound: f64, rule: &'static str) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("stepsize {gamma} must be positive")));
    }
    // the bound is evaluated in floating point; allow its last bits
    if gamma > bound * (1.0 + 1e-12) {
        return Err(Error::StepsizeBound { gamma, bound, rule });
    }
    Ok(())
}

/// Guaranteed rate of `kind` with `n` workers, ratio `tau` and stepsize
/// `gamma`; rejects stepsizes above the theorem's bound.
pub fn theoretical_rate<T: Scalar>(
    kind: MethodKind,
    problem: &Problem<T>,
    n: usize,
    tau: f64,
    gamma: f64,
) -> Result<RateBundle> {
    let l = problem.smoothness().as_f64();
    let mu = problem.strong_convexity().as_f64();
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("rates need a strongly convex problem (mu > 0)".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("need n >= 1 and tau in (0, 1], got n={n}, tau={tau}")));
    }
    let nf = n as f64;
    match kind {
        MethodKind::Gd | MethodKind::Ibcd | MethodKind::Ibgd => {
            let bound = nf / (tau * nf + 2.0 * (1.0 - tau)) / (2.0 * l);
            check_gamma(gamma, bound, "gamma <= n / (tau n + 2(1 - tau)) / (2L)")?;
            Ok(RateBundle::new(kind, 1.0 - gamma * tau * mu, bound))
        }
        MethodKind::Saga | MethodKind::IsagaShared | MethodKind::IsagaDistributed => {
            let bound = 1.0 / (l * (3.0 / nf + tau));
            check_gamma(gamma, bound, "gamma <= 1 / (L (3/n + tau))")?;
            let c = (1.0 / (gamma * l) - 1.0 / nf - tau) / nf;
            let second = if kind == MethodKind::IsagaDistributed {
                let li = problem.uniform_inner_count().ok_or_else(|| {
                    Error::InvalidParameter("distributed rate needs equal local component counts".into())
                })? as f64;
                1.0 / li - 2.0 / (nf * nf * li * c)
            } else {
                let big_n = problem.n_global().ok_or_else(|| {
                    Error::InvalidParameter("shared rate needs equal component counts".into())
                })? as f64;
                nf / big_n - 2.0 / (nf * big_n * c)
            };
            // at the bound the second term is zero up to rounding
            let theta = tau * (gamma * mu).min(second.max(0.0));
            let mut b = RateBundle::new(kind, 1.0 - theta, bound);
            b.lyapunov_c = Some(c);
            b.theta = Some(theta);
            Ok(b)
        }
        MethodKind::Isega => {
            let bound = (1.0 / (4.0 * l * (1.0 + 1.0 / (nf * tau)))).min(1.0 / (mu / tau + 4.0 * l / (nf * tau)));
            check_gamma(gamma, bound, "gamma <= min{1/(4L(1 + 1/(n tau))), 1/(mu/tau + 4L/(n tau))}")?;
            Ok(RateBundle::new(kind, 1.0 - gamma * mu, bound))
        }
        MethodKind::Isgd => {
            let a = 2.0 * (tau + 2.0 * (1.0 - tau) / nf) * l;
            let mut b = RateBundle::new(kind, 1.0, 1.0 / a);
            check_gamma(gamma, 1.0 / a, "gamma^0 <= 1/a with a = 2(tau + 2(1 - tau)/n) L")?;
            b.schedule = Some((a, mu * tau / 4.0));
            Ok(b)
        }
        MethodKind::AsyncIsgd => {
            let bound = 1.0 / (2.0 * l * (tau + 2.0 / nf));
            check_gamma(gamma, bound, "gamma <= 1 / (2L (tau + 2/n))")?;
            let mut b = RateBundle::new(kind, 1.0 - tau * gamma * mu, bound);
            b.floor_coeff = Some(4.0 * gamma / (mu * nf));
            b.per_epoch = true;
            Ok(b)
        }
        MethodKind::Iasgd => Err(Error::InvalidParameter(
            "the accelerated rate depends on rho_hat; use accelerated_rate".into(),
        )),
        MethodKind::CdShared | MethodKind::IsgdNonconvex => Err(Error::InvalidParameter(format!(
            "no linear rate is stated for {kind}"
        ))),
    }
}

/// Per-round factor `1 - sqrt(mu / (L rho_hat^2))` of the accelerated method.
pub fn accelerated_rate<T: Scalar>(problem: &Problem<T>, rho_hat: f64) -> Result<f64> {
    let l = problem.smoothness().as_f64();
    let mu = problem.strong_convexity().as_f64();
    if !(mu > 0.0) || !(rho_hat >= 1.0) {
        return Err(Error::InvalidParameter("need mu > 0 and rho_hat >= 1".into()));
    }
    Ok(1.0 - (mu / (l * rho_hat * rho_hat)).sqrt())
}

/// `grad psi_j(x*)` for each memory owner `(worker, inner)`.
pub fn optimal_memory<T: Scalar>(problem: &Problem<T>, owners: &[(usize, usize)]) -> Vec<Vec<T>> {
    let d = problem.d();
    let full = CoordSet::full(d);
    owners
        .iter()
        .map(|&(i, j)| {
            let mut g = vec![T::zero(); d];
            problem.add_inner_grad_on(i, j, problem.x_star(), &full, T::one(), &mut g);
            g
        })
        .collect()
}

/// `||x - x*||^2 + c gamma^2 sum_j ||alpha_j - alpha_j^*||^2`.
pub fn lyapunov_from_rows<T: Scalar>(x: &[T], x_star: &[T], rows: &[&[T]], optimal: &[Vec<T>], c: T, gamma: T) -> T {
    let mem = rows
        .iter()
        .zip(optimal)
        .map(|(a, o)| dist_sq(a, o))
        .fold(T::zero(), |s, v| s + v);
    dist_sq(x, x_star) + c * gamma * gamma * mem
}

/// Lyapunov value of a SAGA-family state; `alpha` pairs each memory row with
/// its `(worker, inner)` owner.
pub fn lyapunov_saga<T: Scalar>(
    x: &[T],
    alpha: &[((usize, usize), &[T])],
    problem: &Problem<T>,
    c: T,
    gamma: T,
) -> Result<T> {
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!("Lyapunov coefficient c = {c} must be positive")));
    }
    let owners: Vec<(usize, usize)> = alpha.iter().map(|(o, _)| *o).collect();
    let rows: Vec<&[T]> = alpha.iter().map(|(_, r)| *r).collect();
    let opt = optimal_memory(problem, &owners);
    Ok(lyapunov_from_rows(x, problem.x_star(), &rows, &opt, c, gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// `exp(slope)` of the least-squares fit of `log(metric)` against round.
    pub factor: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Log-linear fit over the points whose round lies in `lo..=hi`.
pub fn empirical_rate_fit(rounds: &[u64], values: &[f64], lo: u64, hi: u64) -> Result<RateFit> {
    let mut pts = Vec::new();
    for (r, v) in rounds.iter().zip(values) {
        if *r < lo || *r > hi {
            continue;
        }
        if *v == 0.0 {
            return Err(Error::ZeroMetric { round: *r });
        }
        if !(*v > 0.0) {
            return Err(Error::InvalidParameter(format!("metric {v} at round {r} is not positive")));
        }
        pts.push((*r as f64, v.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two points in rounds {lo}..={hi}, found {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit {
        factor: slope.exp(),
        r_squared,
        points: pts.len(),
    })
}

pub fn trace_rate_fit(trace: &Trace, metric: Metric, lo: u64, hi: u64) -> Result<RateFit> {
    empirical_rate_fit(&trace.rounds_of(), &trace.metric(metric), lo, hi)
}
