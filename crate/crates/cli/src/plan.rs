//! Experiment plans from a config file, command-line flags, or both. Flags
//! override the matching keys of the file.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use indblock::data_io::{parse_experiment_config, ExperimentConfig};

#[derive(Args, Debug, Default)]
pub struct PlanArgs {
    /// Experiment file (`key = value` lines).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// quadratic (or quad) or logistic.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub o: Option<String>,
    #[arg(long)]
    pub problem_seed: Option<String>,
    #[arg(long)]
    pub noise: Option<String>,
    /// LibSVM path or surrogate:a1a[:seed].
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub l2: Option<String>,
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long)]
    pub shard_seed: Option<String>,
    #[arg(long)]
    pub reg: Option<String>,
    /// Comma list; the per-run keys below broadcast against it.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub stepsize: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub rho_hat: Option<String>,
    #[arg(long)]
    pub delays: Option<String>,
    #[arg(long)]
    pub lyapunov: Option<String>,
    #[arg(long)]
    pub rounds: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub x0: Option<String>,
}

impl PlanArgs {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let fields: [(&'static str, &Option<String>); 25] = [
            ("name", &self.name),
            ("problem", &self.problem),
            ("d", &self.d),
            ("n", &self.n),
            ("o", &self.o),
            ("problem_seed", &self.problem_seed),
            ("noise", &self.noise),
            ("data", &self.data),
            ("l2", &self.l2),
            ("layout", &self.layout),
            ("shard_seed", &self.shard_seed),
            ("reg", &self.reg),
            ("method", &self.method),
            ("tau", &self.tau),
            ("workers", &self.workers),
            ("blocks", &self.blocks),
            ("stepsize", &self.stepsize),
            ("batch", &self.batch),
            ("rho_hat", &self.rho_hat),
            ("delays", &self.delays),
            ("lyapunov", &self.lyapunov),
            ("rounds", &self.rounds),
            ("seeds", &self.seeds),
            ("seed", &self.seed),
            ("x0", &self.x0),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.config.is_none() && self.overrides().is_empty()
    }

    /// Plan text after applying the flag overrides.
    pub fn text(&self) -> anyhow::Result<String> {
        let overrides = self.overrides();
        let mut text = String::new();
        if let Some(path) = &self.config {
            let file = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            for line in file.lines() {
                let key = line.split('#').next().unwrap_or("").split('=').next().unwrap_or("").trim();
                if overrides.iter().any(|(k, _)| *k == key) {
                    continue;
                }
                text.push_str(line);
                text.push('\n');
            }
        }
        for (k, v) in overrides {
            text.push_str(&format!("{k} = {v}\n"));
        }
        Ok(text)
    }

    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        if self.is_empty() {
            bail!("no plan given: pass --config or plan flags such as --problem and --method");
        }
        let cfg = parse_experiment_config(&self.text()?)?;
        if cfg.rounds == 0 {
            bail!("rounds must be at least 1");
        }
        if cfg.seeds == 0 {
            bail!("seeds must be at least 1");
        }
        Ok(cfg)
    }
}
