//! Round drivers, traces and communication accounting.

mod asynchronous;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::methods::{Engine, MethodConfig, MethodKind};
use crate::oracles::{lyapunov_from_rows, optimal_memory};
use crate::problems::Problem;
use crate::scalar::Scalar;

pub use asynchronous::{run_asynchronous, DelaySchedule};

/// Rounds recorded without thinning.
pub const DENSE_RECORD_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub round: u64,
    pub subopt: f64,
    pub dist_sq: f64,
    pub grad_sq: f64,
    pub lyapunov: Option<f64>,
    pub blocks_up: u64,
    pub blocks_down: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: String,
    pub n_workers: usize,
    pub m: usize,
    pub seed: u64,
    /// Rounds actually run.
    pub rounds: u64,
    pub records: Vec<TraceRecord>,
    /// Suboptimality at the stepsize-weighted average, one entry per record
    /// (ISGD family only).
    pub subopt_avg: Option<Vec<f64>>,
    /// Epoch starts `T_k` (asynchronous runs only).
    pub epoch_starts: Vec<u64>,
    /// Largest iterate age consumed in each round (asynchronous runs only).
    pub max_age: Vec<u64>,
    pub total_up: u64,
    pub total_down: u64,
}

impl Trace {
    pub(crate) fn new(method: MethodKind, n_workers: usize, m: usize, seed: u64) -> Self {
        Self {
            method: method.name().to_string(),
            n_workers,
            m,
            seed,
            rounds: 0,
            records: Vec::new(),
            subopt_avg: None,
            epoch_starts: Vec::new(),
            max_age: Vec::new(),
            total_up: 0,
            total_down: 0,
        }
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("traces hold the initial record")
    }

    pub fn rounds_of(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.round).collect()
    }

    pub fn metric(&self, metric: Metric) -> Vec<f64> {
        self.records.iter().map(|r| metric.of(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Subopt,
    DistSq,
    GradSq,
    Lyapunov,
}

impl Metric {
    pub fn of(self, r: &TraceRecord) -> f64 {
        match self {
            Self::Subopt => r.subopt,
            Self::DistSq => r.dist_sq,
            Self::GradSq => r.grad_sq,
            Self::Lyapunov => r.lyapunov.unwrap_or(f64::NAN),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subopt" => Ok(Self::Subopt),
            "dist_sq" => Ok(Self::DistSq),
            "grad_sq" => Ok(Self::GradSq),
            "lyapunov" => Ok(Self::Lyapunov),
            _ => Err(Error::InvalidParameter(format!("unknown metric `{s}`"))),
        }
    }
}

/// Whether round `t` is kept: every round up to the dense limit, then powers
/// of two and about a thousand evenly spaced rounds per octave.
pub fn should_record(t: u64) -> bool {
    if t <= DENSE_RECORD_LIMIT {
        return true;
    }
    if t.is_power_of_two() {
        return true;
    }
    let octave = 63 - t.leading_zeros();
    let stride = 1u64 << octave.saturating_sub(10);
    t % stride == 0
}

pub(crate) fn metrics<T: Scalar>(problem: &Problem<T>, x: &[T]) -> (f64, f64, f64) {
    let (f, g) = problem.smooth_value_grad(x);
    let value = f + problem.regularizer().value(x);
    let subopt = (value - problem.f_star()).as_f64();
    (subopt, dist_sq(x, problem.x_star()).as_f64(), norm_sq(&g).as_f64())
}

/// Runs a synchronous method for `rounds` rounds.
pub fn run_synchronous<T: Scalar>(
    problem: &Problem<T>,
    cfg: &MethodConfig,
    x0: &[T],
    rounds: u64,
    seed: u64,
) -> Result<Trace> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be at least 1".into()));
    }
    let mut engine = Engine::new(problem, cfg, x0, seed)?;
    let mut trace = Trace::new(cfg.kind, engine.res.n, engine.res.m, seed);

    let lyap = if cfg.record_lyapunov {
        let c = engine.lyapunov_coefficient().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no positive Lyapunov coefficient for {} at this stepsize",
                cfg.kind
            ))
        })?;
        let owners: Vec<(usize, usize)> = engine
            .memory_rows()
            .expect("saga family has memory")
            .into_iter()
            .map(|(o, _)| o)
            .collect();
        Some((c, optimal_memory(problem, &owners)))
    } else {
        None
    };
    let gamma0 = engine.res.schedule.initial();
    let lyap_value = |e: &Engine<'_, T>| -> Option<f64> {
        let (c, opt) = lyap.as_ref()?;
        let rows: Vec<&[T]> = e.memory_rows()?.into_iter().map(|(_, r)| r).collect();
        Some(lyapunov_from_rows(e.x(), problem.x_star(), &rows, opt, *c, gamma0).as_f64())
    };
    let avg_subopt = |e: &Engine<'_, T>| -> Option<f64> {
        let xa = e.server.weighted_average()?;
        Some((problem.value(&xa) - problem.f_star()).as_f64())
    };

    let push = |trace: &mut Trace, e: &Engine<'_, T>, up: u64, down: u64| {
        let (subopt, dist, grad) = metrics(problem, e.x());
        trace.records.push(TraceRecord {
            round: e.round(),
            subopt,
            dist_sq: dist,
            grad_sq: grad,
            lyapunov: lyap_value(e),
            blocks_up: up,
            blocks_down: down,
        });
        if let Some(v) = avg_subopt(e) {
            trace.subopt_avg.get_or_insert_with(Vec::new).push(v);
        }
    };

    push(&mut trace, &engine, 0, 0);
    for _ in 0..rounds {
        let comm = engine.step()?;
        trace.total_up += comm.blocks_up;
        trace.total_down += comm.blocks_down;
        let t = engine.round();
        if should_record(t) || t == rounds {
            push(&mut trace, &engine, comm.blocks_up, comm.blocks_down);
        }
    }
    trace.rounds = rounds;
    Ok(trace)
}

/// Runs `cfg` through the driver its method kind needs.
pub fn run_method<T: Scalar>(
    problem: &Problem<T>,
    cfg: &MethodConfig,
    x0: &[T],
    rounds: u64,
    seed: u64,
) -> Result<Trace> {
    if cfg.kind == MethodKind::AsyncIsgd {
        run_asynchronous(problem, cfg, x0, rounds, &cfg.delays, seed)
    } else {
        run_synchronous(problem, cfg, x0, rounds, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommSummary {
    pub rounds: u64,
    pub total_up: u64,
    pub total_down: u64,
    pub mean_up: f64,
    pub mean_down: f64,
    /// `1 - blocks_up / (n m rounds)`.
    pub savings_ratio: f64,
}

pub fn comm_accounting(trace: &Trace) -> Result<CommSummary> {
    if trace.rounds == 0 {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let rounds = trace.rounds as f64;
    let dense = trace.n_workers as f64 * trace.m as f64 * rounds;
    Ok(CommSummary {
        rounds: trace.rounds,
        total_up: trace.total_up,
        total_down: trace.total_down,
        mean_up: trace.total_up as f64 / rounds,
        mean_down: trace.total_down as f64 / rounds,
        savings_ratio: (dense - trace.total_up as f64) / dense,
    })
}

/// Per-record mean and standard error across seeds; the error is NaN for a
/// single seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSeries {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrace {
    pub method: String,
    pub n_seeds: usize,
    pub rounds: Vec<u64>,
    pub subopt: MeanSeries,
    pub dist_sq: MeanSeries,
    pub grad_sq: MeanSeries,
    pub lyapunov: Option<MeanSeries>,
    pub subopt_avg: Option<MeanSeries>,
    pub blocks_up: MeanSeries,
    pub blocks_down: MeanSeries,
    pub traces: Vec<Trace>,
}

impl MeanTrace {
    pub fn series(&self, metric: Metric) -> Option<&MeanSeries> {
        match metric {
            Metric::Subopt => Some(&self.subopt),
            Metric::DistSq => Some(&self.dist_sq),
            Metric::GradSq => Some(&self.grad_sq),
            Metric::Lyapunov => self.lyapunov.as_ref(),
        }
    }
}

fn mean_series(columns: &[Vec<f64>]) -> MeanSeries {
    let k = columns.len() as f64;
    let len = columns[0].len();
    let mut mean = vec![0.0; len];
    let mut std_err = vec![0.0; len];
    for r in 0..len {
        // offsets from the first seed keep identical columns exact
        let first = columns[0][r];
        let m = first + columns.iter().map(|c| c[r] - first).sum::<f64>() / k;
        let var = columns.iter().map(|c| (c[r] - m).powi(2)).sum::<f64>() / (k - 1.0);
        mean[r] = m;
        // a single seed has no standard error
        std_err[r] = if k > 1.0 { (var / k).sqrt() } else { f64::NAN };
    }
    MeanSeries { mean, std_err }
}

/// Averages traces produced by `run(seed)` for seeds `base_seed..base_seed + n_seeds`.
pub fn monte_carlo_with<F>(n_seeds: usize, base_seed: u64, run: F) -> Result<MeanTrace>
where
    F: Fn(u64) -> Result<Trace> + Sync,
{
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("monte carlo needs at least one seed".into()));
    }
    let traces: Vec<Trace> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| run(base_seed.wrapping_add(s)))
        .collect::<Result<_>>()?;
    let rounds = traces[0].rounds_of();
    if traces.iter().any(|t| t.rounds_of() != rounds) {
        return Err(Error::GridMismatch("seeds recorded different rounds".into()));
    }
    let col = |f: &dyn Fn(&TraceRecord) -> f64| -> Vec<Vec<f64>> {
        traces.iter().map(|t| t.records.iter().map(f).collect()).collect()
    };
    let lyapunov = traces[0].records[0]
        .lyapunov
        .is_some()
        .then(|| mean_series(&col(&|r| r.lyapunov.unwrap_or(f64::NAN))));
    let subopt_avg = traces[0].subopt_avg.is_some().then(|| {
        let cols: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.subopt_avg.clone().unwrap_or_default())
            .collect();
        mean_series(&cols)
    });
    Ok(MeanTrace {
        method: traces[0].method.clone(),
        n_seeds,
        rounds,
        subopt: mean_series(&col(&|r| r.subopt)),
        dist_sq: mean_series(&col(&|r| r.dist_sq)),
        grad_sq: mean_series(&col(&|r| r.grad_sq)),
        lyapunov,
        subopt_avg,
        blocks_up: mean_series(&col(&|r| r.blocks_up as f64)),
        blocks_down: mean_series(&col(&|r| r.blocks_down as f64)),
        traces,
    })
}

/// Seed-averaged run of `cfg` over seeds `0..n_seeds`.
pub fn monte_carlo<T: Scalar>(
    problem: &Problem<T>,
    cfg: &MethodConfig,
    x0: &[T],
    rounds: u64,
    n_seeds: usize,
) -> Result<MeanTrace> {
    monte_carlo_with(n_seeds, 0, |seed| run_method(problem, cfg, x0, rounds, seed))
}

/// Runs the accelerated method for each `rho_hat` in `grid` and keeps the one
/// with the smallest final suboptimality.
pub fn grid_search_rho<T: Scalar>(
    problem: &Problem<T>,
    cfg: &MethodConfig,
    x0: &[T],
    rounds: u64,
    grid: &[f64],
    seed: u64,
) -> Result<(f64, Trace)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty rho_hat grid".into()));
    }
    let mut best: Option<(f64, Trace)> = None;
    for &rho in grid {
        let c = cfg.clone().rho_hat(rho);
        let trace = run_synchronous(problem, &c, x0, rounds, seed)?;
        let last = trace.last().subopt;
        if !last.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |(_, b)| last < b.last().subopt) {
            best = Some((rho, trace));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("every rho_hat in the grid diverged".into()))
}

/// First recorded round where `series` drops to `target` or below.
pub fn rounds_to_target(rounds: &[u64], series: &[f64], target: f64) -> Option<u64> {
    rounds
        .iter()
        .zip(series)
        .find(|(_, v)| **v <= target)
        .map(|(r, _)| *r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::StepsizeRule;

    fn quad(n: usize) -> Problem<f64> {
        Problem::quadratic_synthesize(20, n, 5, 11).unwrap()
    }

    #[test]
    fn thinning_rule() {
        assert!((0..=DENSE_RECORD_LIMIT).all(should_record));
        assert!(should_record(1 << 17));
        assert!(!should_record((1 << 17) + 1));
        assert!(should_record((1 << 17) + (1 << 7)));
        let kept = ((1u64 << 20)..(1 << 21)).filter(|t| should_record(*t)).count();
        assert_eq!(kept, 1024);
    }

    #[test]
    fn gd_distance_is_monotone() {
        let p = quad(3);
        let x0 = vec![1.0; 20];
        let tr = run_synchronous(&p, &MethodConfig::new(MethodKind::Gd), &x0, 200, 0).unwrap();
        assert_eq!(tr.records.len(), 201);
        for w in tr.records.windows(2) {
            assert!(w[1].dist_sq <= w[0].dist_sq);
            assert_eq!(w[1].round, w[0].round + 1);
        }
    }

    #[test]
    fn optimum_is_flat() {
        let p = quad(3);
        let cfg = MethodConfig::new(MethodKind::Ibcd).tau(0.2).blocks(10);
        let tr = run_synchronous(&p, &cfg, p.x_star(), 50, 4).unwrap();
        for r in &tr.records {
            assert!(r.dist_sq < 1e-28, "{}", r.dist_sq);
            assert!(r.subopt.abs() < 1e-13);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let p = quad(3);
        let cfg = MethodConfig::new(MethodKind::Isega).tau(0.2).blocks(10);
        let a = run_synchronous(&p, &cfg, &[0.5; 20], 100, 9).unwrap();
        let b = run_synchronous(&p, &cfg, &[0.5; 20], 100, 9).unwrap();
        assert_eq!(a, b);
        let c = run_synchronous(&p, &cfg, &[0.5; 20], 100, 10).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn accounting_matches_sample_sizes() {
        let p = quad(4);
        let gd = run_synchronous(&p, &MethodConfig::new(MethodKind::Gd), &[1.0; 20], 10, 0).unwrap();
        assert_eq!(comm_accounting(&gd).unwrap().savings_ratio, 0.0);
        let cfg = MethodConfig::new(MethodKind::Ibcd).tau(0.25).blocks(4);
        let tr = run_synchronous(&p, &cfg, &[1.0; 20], 10, 0).unwrap();
        for r in &tr.records[1..] {
            assert_eq!(r.blocks_up, 4);
            assert_eq!(r.blocks_down, 16);
        }
        assert_eq!(comm_accounting(&tr).unwrap().savings_ratio, 0.75);
    }

    #[test]
    fn monte_carlo_reproduces_deterministic_runs() {
        let p = quad(2);
        let cfg = MethodConfig::new(MethodKind::Gd);
        assert!(monte_carlo(&p, &cfg, &[1.0; 20], 10, 0).is_err());
        let one = monte_carlo(&p, &cfg, &[1.0; 20], 10, 1).unwrap();
        assert!(one.subopt.std_err.iter().all(|s| s.is_nan()));
        let mc = monte_carlo(&p, &cfg, &[1.0; 20], 30, 3).unwrap();
        let single = run_synchronous(&p, &cfg, &[1.0; 20], 30, 0).unwrap();
        assert_eq!(mc.dist_sq.mean, single.metric(Metric::DistSq));
        assert!(mc.dist_sq.std_err.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn lyapunov_is_recorded_for_saga_family() {
        let p = Problem::<f64>::quadratic_synthesize_noisy(10, 2, 4, 1, 0.3).unwrap();
        let cfg = MethodConfig::new(MethodKind::IsagaDistributed)
            .tau(0.5)
            .blocks(10)
            .stepsize(StepsizeRule::OverL(0.3))
            .lyapunov(true);
        let tr = run_synchronous(&p, &cfg, &[1.0; 10], 20, 0).unwrap();
        for r in &tr.records {
            assert!(r.lyapunov.unwrap() >= r.dist_sq);
        }
        let bad = MethodConfig::new(MethodKind::Ibcd).lyapunov(true);
        assert!(run_synchronous(&p, &bad, &[1.0; 10], 5, 0).is_err());
    }

    #[test]
    fn rounds_to_target_finds_first_crossing() {
        assert_eq!(rounds_to_target(&[0, 1, 2, 3], &[1.0, 0.5, 0.1, 0.2], 0.3), Some(2));
        assert_eq!(rounds_to_target(&[0, 1], &[1.0, 0.5], 0.1), None);
    }
}
