use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::simulator::{MeanSeries, MeanTrace, Trace, TraceRecord};

pub const TRACE_HEADER: [&str; 7] = [
    "round",
    "subopt",
    "dist_sq",
    "grad_sq",
    "lyapunov",
    "blocks_up",
    "blocks_down",
];

fn float(v: f64) -> String {
    format!("{v:?}")
}

/// Writes one row per record; floats use the shortest representation that
/// parses back to the same value.
pub fn write_trace_csv<W: Write>(trace: &Trace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        out.write_record([
            r.round.to_string(),
            float(r.subopt),
            float(r.dist_sq),
            float(r.grad_sq),
            r.lyapunov.map(float).unwrap_or_default(),
            r.blocks_up.to_string(),
            r.blocks_down.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(Error::Validation(format!(
            "trace header is `{}`, expected `{}`",
            header.join(","),
            TRACE_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |col: usize| Error::Validation(format!("trace row {}: bad `{}` value `{}`", i + 1, TRACE_HEADER[col], &row[col]));
        let f = |col: usize| row[col].parse::<f64>().map_err(|_| bad(col));
        let u = |col: usize| row[col].parse::<u64>().map_err(|_| bad(col));
        out.push(TraceRecord {
            round: u(0)?,
            subopt: f(1)?,
            dist_sq: f(2)?,
            grad_sq: f(3)?,
            lyapunov: if row[4].is_empty() { None } else { Some(f(4)?) },
            blocks_up: u(5)?,
            blocks_down: u(6)?,
        });
    }
    Ok(out)
}

/// Seed-averaged trace: each metric followed by its standard error.
pub fn write_mean_trace_csv<W: Write>(mean: &MeanTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut cols: Vec<(&str, &MeanSeries)> = vec![
        ("subopt", &mean.subopt),
        ("dist_sq", &mean.dist_sq),
        ("grad_sq", &mean.grad_sq),
    ];
    if let Some(l) = &mean.lyapunov {
        cols.push(("lyapunov", l));
    }
    if let Some(a) = &mean.subopt_avg {
        cols.push(("subopt_avg", a));
    }
    cols.push(("blocks_up", &mean.blocks_up));
    cols.push(("blocks_down", &mean.blocks_down));
    let mut header = vec!["round".to_string()];
    for (name, _) in &cols {
        header.push(name.to_string());
        header.push(format!("{name}_se"));
    }
    out.write_record(&header)?;
    for (k, round) in mean.rounds.iter().enumerate() {
        let mut row = vec![round.to_string()];
        for (_, s) in &cols {
            row.push(float(s.mean[k]));
            row.push(float(s.std_err[k]));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
