use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::config::TableFormat;
use crate::run::ResultRow;
use crate::HarnessError;

pub const COLUMNS: [&str; 17] = [
    "run",
    "seed",
    "algorithm",
    "alm_iterations",
    "alm_objective",
    "alm_time_s",
    "alm_rho",
    "alm_v",
    "newton_iterations",
    "newton_objective",
    "newton_time_s",
    "full_steps",
    "damped_steps",
    "gradient_steps",
    "status",
    "residual",
    "m_stationary",
];

/// Six significant digits in positional notation.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp: i32 = format!("{v:.5e}").split_once('e').map_or(0, |(_, e)| e.parse().unwrap_or(0));
    let decimals = (5 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

fn algorithm_name(row: &ResultRow) -> String {
    format!("{:?}", row.algorithm).to_lowercase()
}

/// Cell values in [`COLUMNS`] order. Wall times are blank unless `timings`.
pub fn record(row: &ResultRow, timings: bool) -> Vec<String> {
    let time = |t: f64| if timings { sig6(t) } else { String::new() };
    let mut out = vec![row.run.to_string(), row.seed.to_string(), algorithm_name(row)];
    match &row.alm {
        Some(a) => out.extend([a.iterations.to_string(), sig6(a.objective), time(a.time_s), sci(a.rho), sci(a.final_v)]),
        None => out.extend(std::iter::repeat_n(String::new(), 5)),
    }
    match &row.newton {
        Some(n) => out.extend([
            n.iterations.to_string(),
            sig6(n.objective),
            time(n.time_s),
            n.full_steps.to_string(),
            n.damped_steps.to_string(),
            n.gradient_steps.to_string(),
        ]),
        None => out.extend(std::iter::repeat_n(String::new(), 6)),
    }
    out.extend([row.status.to_string(), sci(row.residual), row.m_stationary.to_string()]);
    out
}

pub fn render_csv(rows: &[ResultRow], timings: bool) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(record(row, timings))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_markdown(rows: &[ResultRow], timings: bool) -> String {
    let mut out = format!("| {} |\n", COLUMNS.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", record(row, timings).join(" | ")));
    }
    out
}

pub fn render(rows: &[ResultRow], format: TableFormat, timings: bool) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("no rows to emit".into()));
    }
    match format {
        TableFormat::Csv => render_csv(rows, timings),
        TableFormat::Md => Ok(render_markdown(rows, timings)),
    }
}

pub fn emit_table(rows: &[ResultRow], format: TableFormat, path: &Path, timings: bool) -> Result<(), HarnessError> {
    let text = render(rows, format, timings)?;
    File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}
