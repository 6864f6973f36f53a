//! Executes a parsed experiment and applies its checks.

use std::fs;
use std::path::{Path, PathBuf};

use xnet_core::autodiff::gradcheck;
use xnet_core::fit::{run_fit, Fitted};
use xnet_core::metrics::metrics_from_slices;
use xnet_core::models::Checkpoint;
use xnet_core::pinn::solve_poisson;
use xnet_core::report::{emit_report, Check, RunReport, Table};
use xnet_core::targets::{generate_series, load_csv_series};
use xnet_core::timeseries::compare_models;

use crate::config::{CheckSpec, ExperimentConfig, GradcheckConfig, Kind, SeriesSource};
use crate::CliError;

pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
    pub checkpoint: Option<Checkpoint>,
}

/// Runs the experiment. `fault` injects a sign error into one op's backward
/// pass for gradcheck runs.
pub fn execute(
    cfg: &ExperimentConfig,
    seed: u64,
    fault: Option<&'static str>,
) -> Result<RunOutput, CliError> {
    let mut out = match cfg.kind {
        Kind::Fit => {
            let fit = cfg.fit.as_ref().expect("validated");
            let o = run_fit(&cfg.name, fit, seed)?;
            let checkpoint = match &o.model {
                Fitted::Net(m) => Some(Checkpoint::new(m, seed)),
                Fitted::Spline(_) => None,
            };
            RunOutput {
                report: o.report,
                tables: o.tables,
                checkpoint,
            }
        }
        Kind::Pinn => {
            let o = solve_poisson(&cfg.name, cfg.pinn.as_ref().expect("validated"), seed)?;
            RunOutput {
                checkpoint: Some(Checkpoint::new(&o.model, seed)),
                report: o.report,
                tables: vec![o.field],
            }
        }
        Kind::Ts => run_ts(cfg, seed)?,
        Kind::Gradcheck => run_gradcheck(cfg, seed, fault)?,
    };
    if let Some(d) = &cfg.description {
        out.report.config["description"] = serde_json::Value::String(d.clone());
    }
    apply_checks(&mut out.report, &cfg.checks)?;
    Ok(out)
}

fn run_ts(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, CliError> {
    let ts = cfg.ts.as_ref().expect("validated");
    let series = match &ts.series {
        SeriesSource::Synthetic(s) => generate_series(&s.spec(seed))?,
        SeriesSource::Csv { path, column } => load_csv_series(&cfg.resolve_path(path), column)?,
    };
    let cmp = compare_models(&series, ts.split, &ts.models, seed, ts.reference.as_deref())?;
    let first = &cmp.rows[0];
    let mut report = RunReport::new(
        &cfg.name,
        "ts",
        seed,
        serde_json::to_value(ts)?,
        first.metrics,
    );
    report.history = first.history.clone();
    for r in &cmp.rows {
        report.extra.insert(r.label.clone(), r.metrics);
        if let Some(&(_, loss)) = r.history.last() {
            report
                .values
                .insert(format!("{}.final_loss", r.label), loss);
        }
    }
    report
        .values
        .insert("series_length".into(), series.len() as f64);
    report
        .values
        .insert("test_points".into(), first.actual.len() as f64);
    report.references = cmp.references.clone();
    let mut series_table = Table::new("series", &["index", "value"]);
    for (i, v) in series.iter().enumerate() {
        series_table.push(vec![i as f64, *v]);
    }
    Ok(RunOutput {
        report,
        tables: vec![cmp.predictions_table(), series_table],
        checkpoint: None,
    })
}

fn run_gradcheck(
    cfg: &ExperimentConfig,
    seed: u64,
    fault: Option<&'static str>,
) -> Result<RunOutput, CliError> {
    let gc = cfg.gradcheck.clone().unwrap_or_default();
    let started = std::time::Instant::now();
    let checks = gradcheck::run_all(gc.seeds, fault)?;
    let elapsed = started.elapsed().as_secs_f64();
    let errs: Vec<f64> = checks.iter().map(|c| c.max_err).collect();
    let metrics = metrics_from_slices(&errs, &vec![0.0; errs.len()], elapsed)?;
    let snapshot = serde_json::json!({ "seeds": gc.seeds, "fault": fault });
    let mut report = RunReport::new(&cfg.name, "gradcheck", seed, snapshot, metrics);
    let mut table = Table {
        name: "checks".into(),
        header: vec!["index".into(), "max_err".into(), "tol".into()],
        rows: vec![],
    };
    for (i, c) in checks.iter().enumerate() {
        let key = format!("{}/{}", c.suite, c.name);
        report.values.insert(key.clone(), c.max_err);
        report.checks.push(Check::at_most(key, c.max_err, c.tol));
        table.push(vec![i as f64, c.max_err, c.tol]);
    }
    Ok(RunOutput {
        report,
        tables: vec![table],
        checkpoint: None,
    })
}

/// A config for the built-in gradient-check suite.
pub fn gradcheck_config(seeds: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "gradcheck".into(),
        kind: Kind::Gradcheck,
        description: None,
        seed: Some(0),
        out_dir: None,
        fit: None,
        pinn: None,
        ts: None,
        gradcheck: Some(GradcheckConfig { seeds }),
        checks: vec![],
        base_dir: PathBuf::new(),
    }
}

fn resolve(report: &RunReport, expr: &str) -> Result<f64, CliError> {
    let one = |k: &str| {
        report
            .lookup(k.trim())
            .ok_or_else(|| CliError::Usage(format!("check refers to unknown value `{}`", k.trim())))
    };
    match expr.split_once('/') {
        Some((a, b)) => Ok(one(a)? / one(b)?),
        None => one(expr),
    }
}

pub fn apply_checks(report: &mut RunReport, specs: &[CheckSpec]) -> Result<(), CliError> {
    for s in specs {
        let v = resolve(report, &s.value)?;
        if let Some(max) = s.max {
            report.checks.push(Check::at_most(s.value.clone(), v, max));
        }
        if let Some(min) = s.min {
            report.checks.push(Check::at_least(s.value.clone(), v, min));
        }
    }
    Ok(())
}

/// Writes report, CSVs and checkpoint into `dir`, creating it if needed.
pub fn write_outputs(out: &mut RunOutput, dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    if let Some(ck) = &out.checkpoint {
        let file = format!("{}_model.json", out.report.experiment);
        ck.save(&dir.join(&file))?;
        if !out.report.artifacts.contains(&file) {
            out.report.artifacts.push(file);
        }
    }
    Ok(emit_report(&mut out.report, dir, &out.tables)?)
}

/// Human-readable summary lines.
pub fn summary(report: &RunReport) -> Vec<String> {
    let m = &report.metrics;
    let mut lines = vec![format!(
        "{} ({}, seed {}): mse={:.4e} rmse={:.4e} mae={:.4e} time={:.2}s",
        report.experiment, report.kind, report.seed, m.mse, m.rmse, m.mae, m.wall_time_s
    )];
    for (k, e) in &report.extra {
        lines.push(format!(
            "  {k}: mse={:.4e} rmse={:.4e} mae={:.4e}",
            e.mse, e.rmse, e.mae
        ));
    }
    for r in &report.references {
        lines.push(format!(
            "  [{}] {}: mse={:.4e} ({})",
            r.citation, r.model, r.mse, r.note
        ));
    }
    for c in &report.checks {
        if report.kind != "gradcheck" || !c.passed {
            let op = match c.bound {
                xnet_core::report::Bound::AtMost => "<=",
                xnet_core::report::Bound::AtLeast => ">=",
            };
            let tag = if c.passed { "PASS" } else { "FAIL" };
            lines.push(format!(
                "  {tag} {} = {:.4e} {op} {:.4e}",
                c.name, c.value, c.limit
            ));
        }
    }
    if report.kind == "gradcheck" {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        lines.push(format!(
            "  {} checks, {} failed",
            report.checks.len(),
            failed
        ));
    }
    lines
}
