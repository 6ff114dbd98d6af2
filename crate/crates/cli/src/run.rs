use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use indblock::data_io::{write_mean_trace_csv, write_trace_csv, ExperimentConfig, SparseDataset};
use indblock::methods::{Engine, Resolved, Schedule};
use indblock::simulator::{monte_carlo_with, run_method, MeanTrace};
use indblock::{MethodConfig, Problem};

use crate::plan::PlanArgs;
use crate::Failure;

/// File stem of run `idx`, e.g. `01_isega`.
pub fn run_stem(idx: usize, cfg: &MethodConfig) -> String {
    format!("{:02}_{}", idx, cfg.kind)
}

/// Column label of a run in merged output.
pub fn run_label(cfg: &MethodConfig) -> String {
    format!("{}_n{}_tau{:?}", cfg.kind, cfg.n_workers, cfg.tau)
}

pub struct Executed {
    pub method: MethodConfig,
    pub problem: Problem<f64>,
    pub mean: MeanTrace,
}

/// Runs every method of `plan` over its seeds.
pub fn execute(plan: &ExperimentConfig) -> anyhow::Result<Vec<Executed>> {
    let ds = plan.load_dataset().context("loading the data set")?;
    let mut out = Vec::with_capacity(plan.methods.len());
    for (idx, method) in plan.methods.iter().enumerate() {
        let problem = build_problem(plan, method, ds.as_ref())
            .with_context(|| format!("run {idx} ({})", method.kind))?;
        let x0 = plan.x0.vector(problem.d());
        // surfaces parameter errors before any work
        Resolved::new(&problem, method).with_context(|| format!("run {idx} ({})", method.kind))?;
        log::info!("run {idx}: {} over {} seeds", method.kind, plan.seeds);
        let mean = monte_carlo_with(plan.seeds, plan.base_seed, |seed| {
            run_method(&problem, method, &x0, plan.rounds, seed)
        })
        .with_context(|| format!("run {idx} ({})", method.kind))?;
        out.push(Executed {
            method: method.clone(),
            problem,
            mean,
        });
    }
    Ok(out)
}

fn build_problem(plan: &ExperimentConfig, m: &MethodConfig, ds: Option<&SparseDataset>) -> indblock::Result<Problem<f64>> {
    plan.problem_for(m, ds)
}

/// Plan text followed by the derived constants of every run.
pub fn manifest(plan: &ExperimentConfig, runs: &[Executed]) -> String {
    let mut s = plan.to_text();
    for (idx, r) in runs.iter().enumerate() {
        let p = &r.problem;
        let key = |name: &str| format!("derived.{idx}.{name}");
        let _ = writeln!(s, "{} = {}", key("method"), r.method.kind);
        let _ = writeln!(s, "{} = {}", key("d"), p.d());
        let _ = writeln!(s, "{} = {:?}", key("L"), p.smoothness());
        let _ = writeln!(s, "{} = {:?}", key("mu"), p.strong_convexity());
        let _ = writeln!(s, "{} = {:?}", key("f_star"), p.f_star());
        let Ok(res) = Resolved::new(p, &r.method) else {
            continue;
        };
        let _ = writeln!(s, "{} = {}", key("n"), res.n);
        let _ = writeln!(s, "{} = {}", key("m"), res.m);
        let _ = writeln!(s, "{} = {}", key("blocks_per_sample"), res.k);
        let _ = writeln!(s, "{} = {:?}", key("tau"), res.tau);
        match res.schedule {
            Schedule::Constant(g) => {
                let _ = writeln!(s, "{} = {g:?}", key("gamma"));
            }
            Schedule::Decreasing { a, c } => {
                let _ = writeln!(s, "{} = {a:?}\n{} = {c:?}", key("a"), key("c"));
            }
        }
        if let Some(acc) = res.accel {
            let _ = writeln!(s, "{} = {:?}", key("rho_hat"), acc.rho_hat);
            let _ = writeln!(s, "{} = {:?}", key("eta"), acc.eta);
            let _ = writeln!(s, "{} = {:?}", key("accel_gamma"), acc.gamma);
            let _ = writeln!(s, "{} = {:?}", key("beta"), acc.beta);
            let _ = writeln!(s, "{} = {:?}", key("alpha"), acc.alpha);
        }
        let x0 = plan.x0.vector(p.d());
        if let Some(c) = Engine::new(p, &r.method, &x0, plan.base_seed)
            .ok()
            .and_then(|e| e.lyapunov_coefficient())
        {
            let _ = writeln!(s, "{} = {c:?}", key("lyapunov_c"));
        }
    }
    s
}

pub fn cmd_run(args: &PlanArgs, out: &Path) -> Result<(), Failure> {
    let plan = args.resolve()?;
    let runs = execute(&plan)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (idx, r) in runs.iter().enumerate() {
        let stem = run_stem(idx, &r.method);
        for (k, trace) in r.mean.traces.iter().enumerate() {
            let seed = plan.base_seed.wrapping_add(k as u64);
            let path = out.join(format!("{stem}_seed{seed}.csv"));
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_trace_csv(trace, BufWriter::new(f))?;
        }
        let path = out.join(format!("{stem}_mean.csv"));
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_mean_trace_csv(&r.mean, BufWriter::new(f))?;
        let last = r.mean.subopt.mean.last().copied().unwrap_or(f64::NAN);
        println!("{stem}: final mean suboptimality {last:e}");
    }
    let path = out.join("manifest.cfg");
    std::fs::write(&path, manifest(&plan, &runs)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
