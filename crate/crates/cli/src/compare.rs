use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use indblock::simulator::Metric;
use indblock::Error;

use crate::plan::PlanArgs;
use crate::run::{execute, run_label};
use crate::Failure;

/// One seed-averaged metric series.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub label: String,
    pub rounds: Vec<u64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Writes `round` followed by a value and `_se` column per input, in input
/// order. Repeated labels get a `#k` suffix.
pub fn merge<W: Write>(columns: &[Column], w: W) -> anyhow::Result<()> {
    let Some(first) = columns.first() else {
        bail!("nothing to compare");
    };
    for c in columns {
        if c.rounds != first.rounds {
            return Err(Error::GridMismatch(format!(
                "`{}` has {} records, `{}` has {}, or their rounds differ",
                c.label,
                c.rounds.len(),
                first.label,
                first.rounds.len()
            ))
            .into());
        }
    }
    let mut labels: Vec<String> = Vec::new();
    for c in columns {
        let seen = labels
            .iter()
            .filter(|l| l.split('#').next() == Some(c.label.as_str()))
            .count();
        labels.push(if seen == 0 { c.label.clone() } else { format!("{}#{}", c.label, seen + 1) });
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["round".to_string()];
    for l in &labels {
        header.push(l.clone());
        header.push(format!("{l}_se"));
    }
    out.write_record(&header)?;
    for (k, r) in first.rounds.iter().enumerate() {
        let mut row = vec![r.to_string()];
        for c in columns {
            row.push(format!("{:?}", c.mean[k]));
            row.push(format!("{:?}", c.std_err[k]));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `metric` and its standard error from a seed-averaged CSV.
pub fn read_mean_column(path: &Path, metric: &str) -> anyhow::Result<Column> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} has no `{name}` column", path.display()))
    };
    let (ri, mi, si) = (find("round")?, find(metric)?, find(&format!("{metric}_se"))?);
    let mut col = Column {
        label: path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        rounds: Vec::new(),
        mean: Vec::new(),
        std_err: Vec::new(),
    };
    for row in rdr.records() {
        let row = row?;
        col.rounds.push(row[ri].parse().with_context(|| format!("bad round in {}", path.display()))?);
        col.mean.push(row[mi].parse().with_context(|| format!("bad value in {}", path.display()))?);
        col.std_err.push(row[si].parse().with_context(|| format!("bad value in {}", path.display()))?);
    }
    Ok(col)
}

pub fn cmd_compare(inputs: &[PathBuf], plan: &PlanArgs, metric: &str, out: Option<&Path>) -> Result<(), Failure> {
    let columns = if inputs.is_empty() {
        let m: Metric = metric.parse()?;
        let plan = plan.resolve()?;
        execute(&plan)?
            .into_iter()
            .map(|r| {
                let s = r
                    .mean
                    .series(m)
                    .ok_or_else(|| anyhow!("run {} did not record {metric}", r.method.kind))?;
                Ok(Column {
                    label: run_label(&r.method),
                    rounds: r.mean.rounds.clone(),
                    mean: s.mean.clone(),
                    std_err: s.std_err.clone(),
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    } else {
        if !plan.is_empty() {
            return Err(anyhow!("pass either trace files or a plan, not both").into());
        }
        inputs
            .iter()
            .map(|p| read_mean_column(p, metric))
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    match out {
        Some(path) => {
            let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            merge(&columns, std::io::BufWriter::new(f))?;
        }
        None => merge(&columns, std::io::stdout().lock())?,
    }
    Ok(())
}
