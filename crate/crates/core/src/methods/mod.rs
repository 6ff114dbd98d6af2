//! Method configuration, default stepsizes and the per-round update rules.

mod engine;
pub mod saga;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::problems::{Problem, StochasticSpec};
use crate::scalar::Scalar;
use crate::simulator::DelaySchedule;

pub use engine::{
    ibcd_aggregate, ibgd_aggregate, isega_estimate, AccelState, Engine, Resolved, RoundComm,
    ServerState, WorkerState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Gd,
    CdShared,
    Ibcd,
    Ibgd,
    Isgd,
    IsgdNonconvex,
    Saga,
    IsagaShared,
    IsagaDistributed,
    Isega,
    Iasgd,
    AsyncIsgd,
}

impl MethodKind {
    pub const ALL: [MethodKind; 12] = [
        Self::Gd,
        Self::CdShared,
        Self::Ibcd,
        Self::Ibgd,
        Self::Isgd,
        Self::IsgdNonconvex,
        Self::Saga,
        Self::IsagaShared,
        Self::IsagaDistributed,
        Self::Isega,
        Self::Iasgd,
        Self::AsyncIsgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gd => "gd",
            Self::CdShared => "cd_shared",
            Self::Ibcd => "ibcd",
            Self::Ibgd => "ibgd",
            Self::Isgd => "isgd",
            Self::IsgdNonconvex => "isgd_nonconvex",
            Self::Saga => "saga",
            Self::IsagaShared => "isaga_shared",
            Self::IsagaDistributed => "isaga_distributed",
            Self::Isega => "isega",
            Self::Iasgd => "iasgd",
            Self::AsyncIsgd => "async_iasgd",
        }
    }

    /// Methods whose workers share one data set instead of owning `f_i`.
    pub fn uses_shared_data(self) -> bool {
        matches!(self, Self::Saga | Self::IsagaShared)
    }

    pub fn is_stochastic_oracle(self) -> bool {
        matches!(
            self,
            Self::Isgd | Self::IsgdNonconvex | Self::Iasgd | Self::AsyncIsgd
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        if key == "async_isgd" {
            return Ok(Self::AsyncIsgd);
        }
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// How the stepsize is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeRule {
    /// The theorem-prescribed value for the method.
    Default,
    /// The value used for the published figures, where it differs.
    Figure,
    Constant(f64),
    /// `k / L`.
    OverL(f64),
    /// `gamma^t = 1/(a + c t)`.
    Decreasing { a: f64, c: f64 },
}

impl FromStr for StepsizeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse stepsize `{s}`"));
        match t {
            "default" => return Ok(Self::Default),
            "figure" => return Ok(Self::Figure),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("decreasing:") {
            let (a, c) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(Self::Decreasing {
                a: a.trim().parse().map_err(|_| bad())?,
                c: c.trim().parse().map_err(|_| bad())?,
            });
        }
        if let Some(k) = t.strip_suffix("/L") {
            let k = k.trim();
            let k = if k.is_empty() { 1.0 } else { parse_number(k).ok_or_else(bad)? };
            return Ok(Self::OverL(k));
        }
        parse_number(t).map(Self::Constant).ok_or_else(bad)
    }
}

impl fmt::Display for StepsizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Default => f.write_str("default"),
            Self::Figure => f.write_str("figure"),
            Self::Constant(g) => write!(f, "{g:?}"),
            Self::OverL(k) => write!(f, "{k:?}/L"),
            Self::Decreasing { a, c } => write!(f, "decreasing:{a:?}:{c:?}"),
        }
    }
}

/// Parses `0.25`, `1e-3` or a fraction such as `1/30`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        return (q != 0.0).then_some(p / q);
    }
    s.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub kind: MethodKind,
    pub tau: f64,
    /// Worker count; `0` uses the problem's component count.
    pub n_workers: usize,
    /// Block count `m`; `0` uses one block per coordinate.
    pub blocks: usize,
    pub stepsize: StepsizeRule,
    /// Minibatch oracle; `None` means exact local gradients.
    pub stochastic: Option<StochasticSpec>,
    /// Strong-growth parameter of the accelerated method.
    pub rho_hat: Option<f64>,
    pub delays: DelaySchedule,
    pub record_lyapunov: bool,
}

impl MethodConfig {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            tau: 1.0,
            n_workers: 0,
            blocks: 0,
            stepsize: StepsizeRule::Default,
            stochastic: None,
            rho_hat: None,
            delays: DelaySchedule::None,
            record_lyapunov: false,
        }
    }

    pub fn tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn workers(mut self, n: usize) -> Self {
        self.n_workers = n;
        self
    }

    pub fn blocks(mut self, m: usize) -> Self {
        self.blocks = m;
        self
    }

    pub fn stepsize(mut self, rule: StepsizeRule) -> Self {
        self.stepsize = rule;
        self
    }

    pub fn batch(mut self, batch: usize) -> Self {
        self.stochastic = Some(StochasticSpec { batch });
        self
    }

    pub fn rho_hat(mut self, rho: f64) -> Self {
        self.rho_hat = Some(rho);
        self
    }

    pub fn delays(mut self, delays: DelaySchedule) -> Self {
        self.delays = delays;
        self
    }

    pub fn lyapunov(mut self, on: bool) -> Self {
        self.record_lyapunov = on;
        self
    }
}

/// A stepsize that may depend on the round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule<T> {
    Constant(T),
    Decreasing { a: T, c: T },
}

impl<T: Scalar> Schedule<T> {
    pub fn at(&self, t: u64) -> T {
        match *self {
            Self::Constant(g) => g,
            Self::Decreasing { a, c } => T::one() / (a + c * T::lit(t as f64)),
        }
    }

    pub fn initial(&self) -> T {
        self.at(0)
    }
}

/// Theorem-prescribed stepsize for `kind` with `n` workers and ratio `tau`.
pub fn stepsize_default<T: Scalar>(
    kind: MethodKind,
    problem: &Problem<T>,
    n: usize,
    tau: f64,
) -> Result<Schedule<T>> {
    let l = problem.smoothness().as_f64();
    let mu = problem.strong_convexity().as_f64();
    if !(l > 0.0) {
        return Err(Error::InvalidParameter("smoothness constant must be positive".into()));
    }
    let nf = n as f64;
    let g = match kind {
        MethodKind::Gd => 1.0 / (2.0 * l),
        MethodKind::CdShared => 1.0 / l,
        MethodKind::Ibcd | MethodKind::Ibgd => {
            nf / (tau * nf + 2.0 * (1.0 - tau)) / (2.0 * l)
        }
        MethodKind::Isgd => {
            let a = 2.0 * (tau + 2.0 * (1.0 - tau) / nf) * l;
            let c = mu * tau / 4.0;
            return Ok(if c > 0.0 {
                Schedule::Decreasing {
                    a: T::lit(a),
                    c: T::lit(c),
                }
            } else {
                Schedule::Constant(T::lit(1.0 / a))
            });
        }
        MethodKind::IsgdNonconvex => 1.0 / (2.0 * l * (tau / 2.0 + (1.0 - tau) / nf)),
        MethodKind::Saga | MethodKind::IsagaShared | MethodKind::IsagaDistributed => {
            1.0 / (l * (3.0 / nf + tau))
        }
        MethodKind::Isega => {
            let a = 1.0 / (4.0 * l * (1.0 + 1.0 / (nf * tau)));
            let b = 1.0 / (mu / tau + 4.0 * l / (nf * tau));
            a.min(b)
        }
        // step length of the inner gradient step at rho_hat = 1
        MethodKind::Iasgd => 1.0 / l,
        MethodKind::AsyncIsgd => 1.0 / (2.0 * l * (tau + 2.0 / nf)),
    };
    Ok(Schedule::Constant(T::lit(g)))
}

/// Stepsize used in the published figures where it differs from the theorem.
pub fn stepsize_figure<T: Scalar>(
    kind: MethodKind,
    problem: &Problem<T>,
    n: usize,
    tau: f64,
) -> Result<Schedule<T>> {
    let l = problem.smoothness().as_f64();
    match kind {
        MethodKind::Isega => Ok(Schedule::Constant(T::lit(
            1.0 / (l * (1.0 + 1.0 / (n as f64 * tau))),
        ))),
        MethodKind::Isgd | MethodKind::IsgdNonconvex => {
            Ok(Schedule::Constant(T::lit(1.0 / (5.0 * l))))
        }
        _ => stepsize_default(kind, problem, n, tau),
    }
}

/// Strong-growth constants of the sparsified aggregate `q`.
pub fn strong_growth_params(
    rho_tilde: f64,
    sigma_tilde_sq: f64,
    rho_bar: f64,
    sigma_bar_sq: f64,
    n: usize,
    tau: f64,
) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    for (name, v) in [
        ("rho_tilde", rho_tilde),
        ("sigma_tilde_sq", sigma_tilde_sq),
        ("rho_bar", rho_bar),
        ("sigma_bar_sq", sigma_bar_sq),
    ] {
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be non-negative")));
        }
    }
    let nf = n as f64;
    let w = 1.0 / tau - 1.0 + rho_bar / tau;
    let rho_hat = 1.0 + rho_tilde / nf * w;
    let sigma_hat_sq = sigma_bar_sq / (nf * tau) + sigma_tilde_sq / nf * w;
    Ok((rho_hat, sigma_hat_sq))
}
