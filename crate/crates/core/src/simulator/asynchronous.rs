//! Bounded-delay asynchronous ISGD, simulated over a global round counter.
//!
//! At round `t` worker `i` reads `x^{t - d_i^t}` and contributes
//! `x_i = z_i - gamma (g_i)_{U_i}`; the server averages the freshest
//! contributions into `w` and publishes `x^{t+1} = prox(w)`. A worker whose
//! read iterate did not change keeps its previous contribution untouched.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::methods::{MethodConfig, MethodKind, Resolved};
use crate::problems::Problem;
use crate::rng;
use crate::scalar::Scalar;

use super::{metrics, should_record, Trace, TraceRecord};

/// Stream ids for delay draws start here so they never share a stream with
/// the block and minibatch draws of the same worker.
const DELAY_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DelaySchedule {
    /// Every worker reads the latest iterate.
    #[default]
    None,
    /// Every worker reads `x^{t-M}` (or `x^0` early on).
    Fixed(u64),
    /// Delays drawn uniformly from `0..=M`.
    Uniform(u64),
    /// Worker `i` at round `t` uses `delays[(t + i) % len]`; entries above
    /// `bound` are an error.
    Adversarial { bound: u64, delays: Vec<u64> },
}

impl DelaySchedule {
    pub fn bound(&self) -> u64 {
        match self {
            Self::None => 0,
            Self::Fixed(m) | Self::Uniform(m) => *m,
            Self::Adversarial { bound, .. } => *bound,
        }
    }

    /// Nominal delay of worker `i` at round `t`, capped at `t`.
    fn delay(&self, i: usize, t: u64, seed: u64) -> Result<u64> {
        let d = match self {
            Self::None => 0,
            Self::Fixed(m) => *m,
            Self::Uniform(m) => {
                rng::stream(seed, DELAY_STREAM_BASE + i as u64, t).random_range(0..=*m)
            }
            Self::Adversarial { bound, delays } => {
                if delays.is_empty() {
                    return Err(Error::InvalidParameter("empty adversarial delay list".into()));
                }
                let d = delays[((t + i as u64) % delays.len() as u64) as usize];
                if d > *bound {
                    return Err(Error::DelayBound {
                        round: t,
                        delay: d,
                        bound: *bound,
                    });
                }
                d
            }
        };
        Ok(d.min(t))
    }
}

impl std::fmt::Display for DelaySchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Fixed(m) => write!(f, "fixed:{m}"),
            Self::Uniform(m) => write!(f, "uniform:{m}"),
            Self::Adversarial { bound, delays } => {
                let list: Vec<String> = delays.iter().map(u64::to_string).collect();
                write!(f, "adversarial:{bound}:{}", list.join(";"))
            }
        }
    }
}

impl std::str::FromStr for DelaySchedule {
    type Err = Error;

    /// `none`, `fixed:M`, `uniform:M` or `adversarial:M:d0;d1;...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse delay schedule `{s}`"));
        let num = |v: &str| v.trim().parse::<u64>().map_err(|_| bad());
        let t = s.trim();
        if t == "none" {
            return Ok(Self::None);
        }
        let (mode, rest) = t.split_once(':').ok_or_else(bad)?;
        match mode {
            "fixed" => Ok(Self::Fixed(num(rest)?)),
            "uniform" => Ok(Self::Uniform(num(rest)?)),
            "adversarial" => {
                let (bound, list) = rest.split_once(':').ok_or_else(bad)?;
                let delays = list.split(';').map(num).collect::<Result<Vec<_>>>()?;
                Ok(Self::Adversarial {
                    bound: num(bound)?,
                    delays,
                })
            }
            _ => Err(bad()),
        }
    }
}

struct Worker<T> {
    read: Option<u64>,
    contribution: Vec<T>,
}

/// Runs asynchronous ISGD under `delays` for `rounds` rounds.
pub fn run_asynchronous<T: Scalar>(
    problem: &Problem<T>,
    cfg: &MethodConfig,
    x0: &[T],
    rounds: u64,
    delays: &DelaySchedule,
    seed: u64,
) -> Result<Trace> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be at least 1".into()));
    }
    if cfg.kind != MethodKind::AsyncIsgd {
        return Err(Error::InvalidParameter(format!(
            "the asynchronous simulator runs async_iasgd, not {}",
            cfg.kind
        )));
    }
    let d = problem.d();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    let res = Resolved::new(problem, cfg)?;
    let bound = delays.bound();
    let n = res.n;
    let m = res.m as u64;
    let reg = problem.regularizer();

    let mut trace = Trace::new(cfg.kind, n, res.m, seed);
    trace.epoch_starts.push(0);
    let mut history: VecDeque<(u64, Vec<T>)> = VecDeque::new();
    history.push_back((0, x0.to_vec()));
    let mut workers: Vec<Worker<T>> = (0..n)
        .map(|_| Worker {
            read: None,
            contribution: Vec::new(),
        })
        .collect();

    let record = |trace: &mut Trace, t: u64, x: &[T], up: u64, down: u64| {
        let (subopt, dist, grad) = metrics(problem, x);
        trace.records.push(TraceRecord {
            round: t,
            subopt,
            dist_sq: dist,
            grad_sq: grad,
            lyapunov: None,
            blocks_up: up,
            blocks_down: down,
        });
    };
    record(&mut trace, 0, x0, 0, 0);

    let mut g = vec![T::zero(); d];
    for t in 0..rounds {
        let gamma = res.schedule.at(t);
        let (mut up, mut down, mut max_age) = (0u64, 0u64, 0u64);
        for (i, w) in workers.iter_mut().enumerate() {
            let nominal = t - delays.delay(i, t, seed)?;
            let r = w.read.map_or(nominal, |prev| nominal.max(prev));
            max_age = max_age.max(t - r);
            if w.read == Some(r) {
                continue;
            }
            let z = &history
                .iter()
                .find(|(k, _)| *k == r)
                .expect("history holds the last M + 1 iterates")
                .1;
            let mut stream = rng::stream(seed, i as u64, t);
            let s = res.partition.sample_k(res.k, &mut stream);
            let cs = res.partition.coord_set(&s);
            match res.stochastic {
                Some(spec) => problem.stochastic_grad_on(i, z, spec, &mut stream, &cs, &mut g)?,
                None => problem.grad_on(i, z, &cs, &mut g),
            }
            w.contribution.clone_from(z);
            for &c in cs.coords() {
                w.contribution[c] = z[c] - gamma * g[c];
            }
            w.read = Some(r);
            up += s.len() as u64;
            down += m;
        }
        if max_age > bound {
            return Err(Error::DelayBound {
                round: t,
                delay: max_age,
                bound,
            });
        }

        let mut next = workers[0].contribution.clone();
        for w in &workers[1..] {
            for (a, v) in next.iter_mut().zip(&w.contribution) {
                *a += *v;
            }
        }
        let inv = T::from_usize_lossy(n);
        next.iter_mut().for_each(|a| *a /= inv);
        reg.prox_in_place(gamma, &mut next)?;

        let last_epoch = *trace.epoch_starts.last().expect("T_0 = 0");
        if t > last_epoch && t - max_age >= last_epoch {
            trace.epoch_starts.push(t);
        }
        trace.max_age.push(max_age);
        trace.total_up += up;
        trace.total_down += down;
        if should_record(t + 1) || t + 1 == rounds {
            record(&mut trace, t + 1, &next, up, down);
        }
        history.push_back((t + 1, next));
        while history.front().is_some_and(|(k, _)| k + bound < t + 1) {
            history.pop_front();
        }
    }
    trace.rounds = rounds;
    Ok(trace)
}
