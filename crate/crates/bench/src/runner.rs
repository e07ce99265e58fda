//! Chunked parallel execution with resumable, atomically rewritten outputs.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::config::Plan;
use crate::experiments::{self, Unit, UnitOutput, INVARIANT_SUFFIX};
use crate::output::{
    self, completed_units, read_csv, sort_by_unit, summarize, write_csv_atomic, ResultRow, TraceRow,
    PLAN_FILE, ROWS_FILE, ROWS_HEADER, SUMMARY_FILE, SUMMARY_HEADER, TRACES_FILE, TRACES_HEADER,
};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub units_total: usize,
    pub units_run: usize,
    pub units_skipped: usize,
    /// `family/N/trial: metric` for every invariant metric that came out 0,
    /// including those of resumed units.
    pub invariant_failures: Vec<String>,
}

/// Units computed between two rewrites of the output files.
fn chunk_size(jobs: usize) -> usize {
    (4 * jobs).max(8)
}

/// Runs `plan` into `out`, skipping units already present in its rows file.
///
/// `jobs = 0` uses rayon's default worker count. Results do not depend on
/// the worker count.
pub fn run(plan: &Plan, out: &Path, jobs: usize) -> Result<RunSummary, BenchError> {
    fs::create_dir_all(out).map_err(|e| BenchError::Io {
        path: out.to_path_buf(),
        message: e.to_string(),
    })?;
    check_plan_file(plan, out)?;

    let rows_path = out.join(ROWS_FILE);
    let traces_path = out.join(TRACES_FILE);
    let mut rows: Vec<ResultRow> = read_csv(&rows_path)?;
    let exp = plan.experiment.name();
    if let Some(r) = rows.iter().find(|r| r.experiment != exp) {
        return Err(BenchError::Config(format!(
            "{} holds rows of experiment {}, not {exp}",
            rows_path.display(),
            r.experiment
        )));
    }
    let tracing = plan.experiment == crate::Experiment::Fig4;
    let mut traces: Vec<TraceRow> = if tracing { read_csv(&traces_path)? } else { Vec::new() };

    let all = experiments::units(plan);
    let done = completed_units(&rows);
    let todo: Vec<&Unit> = all
        .iter()
        .filter(|u| !done.contains(&(u.family.clone(), u.n, u.trial)))
        .collect();
    let units_skipped = all.len() - todo.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start workers: {e}")))?;

    let write_all = |rows: &mut Vec<ResultRow>, traces: &mut Vec<TraceRow>| -> Result<(), BenchError> {
        sort_by_unit(rows);
        write_csv_atomic(&rows_path, &ROWS_HEADER, rows)?;
        if tracing {
            sort_by_unit(traces);
            write_csv_atomic(&traces_path, &TRACES_HEADER, traces)?;
        }
        Ok(())
    };

    for chunk in todo.chunks(chunk_size(pool.current_num_threads())) {
        let results: Vec<Result<UnitOutput, BenchError>> =
            pool.install(|| chunk.par_iter().map(|u| experiments::compute(plan, u)).collect());
        for (unit, res) in chunk.iter().zip(results) {
            let res = res.map_err(|e| e.in_unit(unit))?;
            append(exp, unit, res, &mut rows, &mut traces);
        }
        write_all(&mut rows, &mut traces)?;
    }
    // files exist with headers even when there is nothing to run
    write_all(&mut rows, &mut traces)?;
    write_csv_atomic(&out.join(SUMMARY_FILE), &SUMMARY_HEADER, &summarize(&rows))?;

    let invariant_failures = rows
        .iter()
        .filter(|r| r.metric.ends_with(INVARIANT_SUFFIX) && r.value != 1.0)
        .map(|r| format!("{}/{}/{}: {}", r.family, r.n, r.trial, r.metric))
        .collect();
    Ok(RunSummary {
        units_total: all.len(),
        units_run: todo.len(),
        units_skipped,
        invariant_failures,
    })
}

fn append(exp: &str, unit: &Unit, res: UnitOutput, rows: &mut Vec<ResultRow>, traces: &mut Vec<TraceRow>) {
    rows.extend(res.metrics.into_iter().map(|(metric, value)| ResultRow {
        experiment: exp.to_string(),
        family: unit.family.clone(),
        n: unit.n,
        trial: unit.trial,
        seed: unit.seed,
        metric,
        value,
    }));
    traces.extend(res.traces.into_iter().map(|(algorithm, iter, phi)| TraceRow {
        experiment: exp.to_string(),
        family: unit.family.clone(),
        n: unit.n,
        trial: unit.trial,
        seed: unit.seed,
        algorithm,
        iter,
        phi,
    }));
}

/// Records the resolved plan, or checks it against the one already there so
/// a resumed run cannot mix configurations.
fn check_plan_file(plan: &Plan, out: &Path) -> Result<(), BenchError> {
    let path = out.join(PLAN_FILE);
    let text = serde_json::to_string_pretty(plan).expect("plan serializes") + "\n";
    if path.exists() {
        let old = fs::read_to_string(&path).map_err(|e| BenchError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let same = serde_json::from_str::<Plan>(&old).is_ok_and(|p| &p == plan);
        if !same {
            return Err(BenchError::Config(format!(
                "{} was produced by a different configuration",
                out.display()
            )));
        }
        return Ok(());
    }
    output::write_text_atomic(&path, &text)
}
