use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use kcalmap_core::eval::{AggregateReport, EvaluationReport, ReferenceRegistry};

use super::usage;
use crate::ReportArgs;

struct Row {
    name: String,
    runs: usize,
    mae: f64,
    mape: f64,
}

fn read_row(path: &Path) -> anyhow::Result<Row> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(a) = serde_json::from_str::<AggregateReport>(&text) {
        let p = &a.runs[0].pipeline;
        return Ok(Row {
            name: format!("{} + {}", p.encoder, p.decoder),
            runs: a.run_count,
            mae: a.mean_mae,
            mape: a.mean_mape,
        });
    }
    let r: EvaluationReport =
        serde_json::from_str(&text).with_context(|| format!("{} is not an evaluation report", path.display()))?;
    Ok(Row {
        name: format!("{} + {}", r.pipeline.encoder, r.pipeline.decoder),
        runs: 1,
        mae: r.mae,
        mape: r.mape,
    })
}

pub fn render(rows: &[(String, usize, f64, f64)], table: u32) -> anyhow::Result<String> {
    let registry = ReferenceRegistry::builtin();
    let reference = registry
        .table(table)
        .ok_or_else(|| usage(format!("no reference table {table} (available: 1, 2, 3)")))?;
    let mut s = String::new();
    writeln!(s, "## Results")?;
    writeln!(s)?;
    writeln!(s, "| Pipeline | Runs | MAE (kCal) | MAPE (%) |")?;
    writeln!(s, "|---|---|---|---|")?;
    for (name, runs, mae, mape) in rows {
        writeln!(s, "| {name} | {runs} | {mae:.1} | {mape:.1} |")?;
    }
    writeln!(s)?;
    writeln!(s, "## Reference: table {} ({})", reference.table, reference.title)?;
    writeln!(s)?;
    writeln!(s, "| Method | Pretrained | MAE (kCal) | MAPE (%) |")?;
    writeln!(s, "|---|---|---|---|")?;
    for r in &reference.rows {
        let pre = match r.pretrained {
            Some(true) => "yes",
            Some(false) => "no",
            None => "",
        };
        writeln!(s, "| {} | {pre} | {} | {} |", r.method, r.mae, r.mape)?;
    }
    writeln!(s)?;
    writeln!(s, "{}", registry.note)?;
    Ok(s)
}

pub fn run(args: ReportArgs) -> anyhow::Result<()> {
    let rows = args
        .inputs
        .iter()
        .map(|p| read_row(p).map(|r| (r.name, r.runs, r.mae, r.mape)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let text = render(&rows, args.table.unwrap_or(1))?;
    print!("{text}");
    if let Some(out) = args.out {
        std::fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
