//! Merge completed runs into comparison tables and SVG curves: accumulated
//! error solid, SSIM dashed, one color per run, plus the retained-memory
//! table with its ordering checks.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::csvio::{format_f64, parse_f64, read_csv, write_csv, CsvTable};
use crate::error::io_err;
use crate::svg::{line_plot, write_svg, LineStyle, Series};
use crate::{CliError, Result};
use spf_core::trainers::{retained_memory_report, MeterRow};

#[derive(Deserialize)]
struct RunInfo {
    framework: String,
    delta: usize,
    model_params: usize,
    peak_retained_bytes: u64,
    #[allow(dead_code)]
    final_loss: f64,
    #[allow(dead_code)]
    epochs: usize,
}

struct LoadedRun {
    name: String,
    info: RunInfo,
    eval: CsvTable,
}

fn load_run(dir: &Path) -> Result<LoadedRun> {
    let info_path = dir.join("run_info.json");
    let text = std::fs::read_to_string(&info_path).map_err(|e| io_err(&info_path, e))?;
    let info: RunInfo =
        serde_json::from_str(&text).map_err(|e| CliError::Meta(format!("run_info: {e}")))?;
    let eval = read_csv(&dir.join("eval.csv"))?;
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(LoadedRun { name, info, eval })
}

pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<()> {
    if run_dirs.is_empty() {
        return Err(CliError::Config("report needs at least one run directory".into()));
    }
    let runs = run_dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    // Comparison table: one row per run with the end-of-horizon metrics.
    let mut comparison = CsvTable::new(&[
        "run",
        "framework",
        "delta",
        "acc_error_final",
        "ssim_final",
        "ssim_step1",
        "peak_retained_bytes",
    ]);
    for run in &runs {
        let acc = run.eval.column("acc_error")?;
        let ssim = run.eval.column("ssim")?;
        comparison.push_row(vec![
            run.name.clone(),
            run.info.framework.clone(),
            run.info.delta.to_string(),
            format_f64(*acc.last().unwrap_or(&f64::NAN)),
            format_f64(*ssim.last().unwrap_or(&f64::NAN)),
            format_f64(*ssim.first().unwrap_or(&f64::NAN)),
            run.info.peak_retained_bytes.to_string(),
        ]);
    }
    write_csv(&out_dir.join("comparison.csv"), &comparison)?;

    // Curves: solid accumulated error, dashed SSIM, one color per run.
    let mut series = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let steps: Vec<f64> =
            run.eval.rows.iter().map(|r| parse_f64(&r[0])).collect::<Result<_>>()?;
        let acc = run.eval.column("acc_error")?;
        let ssim = run.eval.column("ssim")?;
        series.push(Series {
            label: format!("{} acc error", run.name),
            points: steps.iter().cloned().zip(acc).collect(),
            style: LineStyle::Solid,
            color_index: k,
        });
        series.push(Series {
            label: format!("{} ssim", run.name),
            points: steps.iter().cloned().zip(ssim).collect(),
            style: LineStyle::Dashed,
            color_index: k,
        });
    }
    write_svg(&out_dir.join("curves.svg"), &line_plot("framework comparison", "step", &series))?;

    // Memory table with ordering checks.
    let rows: Vec<MeterRow> = runs
        .iter()
        .map(|r| MeterRow {
            framework: r.info.framework.clone(),
            delta: r.info.delta,
            peak_bytes: r.info.peak_retained_bytes,
            model_params: r.info.model_params,
        })
        .collect();
    let report = retained_memory_report(&rows)?;
    let mut memory = CsvTable::new(&["framework", "delta", "model_params", "peak_retained_bytes"]);
    for row in &report.rows {
        memory.push_row(vec![
            row.framework.clone(),
            row.delta.to_string(),
            row.model_params.to_string(),
            row.peak_bytes.to_string(),
        ]);
    }
    write_csv(&out_dir.join("memory.csv"), &memory)?;

    let mut orderings = CsvTable::new(&["check", "holds"]);
    for (name, flag) in [
        ("one_step_smallest", report.one_step_smallest),
        ("spf_constant_in_delta", report.spf_constant_in_delta),
        ("atf_increasing_in_delta", report.atf_increasing_in_delta),
        ("pf_below_atf", report.pf_below_atf),
        ("spf_at_most_pf", report.spf_at_most_pf),
    ] {
        orderings.push_row(vec![name.into(), flag.to_string()]);
    }
    write_csv(&out_dir.join("memory_orderings.csv"), &orderings)?;
    Ok(())
}
