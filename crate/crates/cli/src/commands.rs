use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use exohawkes::analytics::{
    branching_report, expected_count, influence_decomposition, influence_on_grid, influence_summary,
    residual_diagnostics, write_influence_csv, write_influence_summary_csv, BranchingReport, MIN_RESIDUAL_EVENTS,
};
use exohawkes::events::{
    filter_median_interval, fold_extended_labels, parse_events_file, summary_stats, write_events_file,
    write_stats_csv, ParseOptions, RateQuantileBounds, EXTENDED_EMOTIONS,
};
use exohawkes::fitter::bootstrap_fit;
use exohawkes::simulator::{round_trip_validate, simulate_corpus, RecoveryReport};
use exohawkes::{EmotionSet, HawkesParams, SessionCollection, SimConfig, SubtitleSource};
use log::info;
use serde::Serialize;

use crate::config::{RunConfig, QUICK_DURATION, QUICK_SESSIONS};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::input(format!("cannot write {}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::numerical(format!("cannot serialize {}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

fn write_csv<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    fill(&mut w).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a PathBuf, CliError> {
    p.as_ref()
        .ok_or_else(|| CliError::input(format!("missing {what} (pass {flag} or set it in the config file)")))
}

/// Reads an events file with the input labels, then narrows it to the
/// modeled labels.
fn load_events(cfg: &RunConfig, path: &Path) -> Result<SessionCollection, CliError> {
    let input = cfg.input_set()?;
    let collection = parse_events_file(path, &input, ParseOptions::default())?;
    let model = cfg.model_set()?;
    if model == input {
        Ok(collection)
    } else {
        Ok(collection.select_labels(&model)?)
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    let path = required(&cfg.inputs.events, "events file", "--input")?;
    let settings = &cfg.prepare;
    let options = ParseOptions {
        strict_subtitle_window: settings.strict_subtitle_window,
    };
    let mut collection = if settings.extended_labels {
        let extended = EmotionSet::new(EXTENDED_EMOTIONS)?;
        fold_extended_labels(&parse_events_file(path, &extended, options)?)?
    } else {
        parse_events_file(path, &cfg.input_set()?, options)?
    };
    if let Some(labels) = &cfg.emotions {
        collection = collection.select_labels(&EmotionSet::new(labels.clone())?)?;
    }

    let mut report = String::new();
    let _ = writeln!(report, "input: {} sessions", collection.len());
    if settings.filters {
        let before = collection.len();
        collection = filter_median_interval(&collection, settings.min_gap, settings.max_gap)?;
        let _ = writeln!(
            report,
            "median gap filter: keep [{}, {}] min; kept {} of {before}",
            settings.min_gap,
            settings.max_gap,
            collection.len()
        );
        if collection.len() >= 2 {
            let before = collection.len();
            let bounds = RateQuantileBounds::compute(&collection, settings.q_lo, settings.q_hi)?;
            collection = bounds.apply(&collection);
            report.push_str(&bounds.describe(&collection.emotion_set));
            let _ = writeln!(report, "  kept {} of {before}", collection.len());
        } else {
            let _ = writeln!(report, "rate quantile filter: skipped, fewer than two sessions");
        }
    } else {
        let _ = writeln!(report, "filters disabled");
    }
    let _ = writeln!(report, "output: {} sessions", collection.len());

    let out = &cfg.out;
    write_text(&out.join("filter_report.txt"), &report)?;
    write_events_file(&collection, out.join("events.jsonl"))?;
    if collection.is_empty() {
        return Err(CliError::validation("no sessions survived the filters"));
    }
    let summary = summary_stats(&collection)?;
    write_stats_csv(&summary, &collection.emotion_set, create(&out.join("stats.csv"))?)?;
    info!("prepare: kept {} sessions", collection.len());
    Ok(())
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let path = required(&cfg.inputs.events, "events file", "--events")?;
    let collection = load_events(cfg, path)?;
    let shape = cfg.shape.build()?;
    let report = bootstrap_fit(&collection, &shape, &cfg.fit.fit_config(cfg.seed), &cfg.fit.bootstrap())?;
    report.params.save(cfg.out.join("params.json"))?;
    write_text(&cfg.out.join("fit_report.json"), &report.to_json()?)?;
    for s in report.status.iter().filter(|s| s.status.is_none()) {
        log::warn!("{}: fit failed: {}", s.target, s.error.as_deref().unwrap_or("unknown error"));
    }
    if report.n_failed() == collection.emotion_set.len() {
        return Err(CliError::numerical("every label failed to fit"));
    }
    Ok(())
}

fn sim_config(cfg: &RunConfig, duration: f64, n_labels: usize) -> Result<SimConfig, CliError> {
    Ok(SimConfig {
        duration,
        seed: cfg.seed,
        subtitles: SubtitleSource::Rates(cfg.simulate.rates_for(n_labels)?),
        window: cfg.simulate.window,
        max_events: cfg.simulate.max_events,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let params = HawkesParams::load(required(&cfg.inputs.params, "params file", "--params")?)?;
    let sim = sim_config(cfg, cfg.simulate.duration, params.emotions.len())?;
    let corpus = simulate_corpus(&params, &sim, cfg.simulate.sessions)?;
    write_events_file(&corpus, cfg.out.join("events.jsonl"))?;
    info!(
        "simulate: {} sessions, {} events",
        corpus.len(),
        corpus.sessions.iter().map(|s| s.total_chat_events()).sum::<usize>()
    );
    Ok(())
}

#[derive(Serialize)]
struct BranchingFile<'a> {
    labels: &'a [String],
    #[serde(flatten)]
    report: BranchingReport,
}

/// `target,<label>...` grid, rows and columns in emotion-set order.
fn write_matrix(path: &Path, labels: &[String], m: &[Vec<f64>]) -> Result<(), CliError> {
    write_csv(path, |w| {
        let mut header = vec!["target".to_string()];
        header.extend(labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in labels.iter().zip(m) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let params = HawkesParams::load(required(&cfg.inputs.params, "params file", "--params")?)?;
    let collection = load_events(cfg, required(&cfg.inputs.events, "events file", "--events")?)?;
    if params.emotions != collection.emotion_set {
        return Err(CliError::input(format!(
            "params use labels {:?} but events are read as {:?} (set --input-labels/--emotions to match)",
            params.emotions.labels(),
            collection.emotion_set.labels()
        )));
    }
    let labels = params.emotions.labels();
    let out = &cfg.out;

    let influence = influence_decomposition(&params, &collection, true)?;
    write_influence_csv(&influence, create(&out.join("influence.csv"))?)?;
    let summary = influence_summary(&influence, &params)?;
    write_influence_summary_csv(&summary, create(&out.join("influence_summary.csv"))?)?;

    let branching = branching_report(&params.alpha_matrix())?;
    write_json(
        &out.join("branching.json"),
        &BranchingFile {
            labels,
            report: branching,
        },
    )?;
    write_matrix(&out.join("alpha.csv"), labels, &params.alpha_matrix())?;
    write_matrix(&out.join("nu.csv"), labels, &params.nu_matrix())?;
    write_csv(&out.join("baseline.csv"), |w| {
        w.write_record(["target", "mu0", "gamma"])?;
        for p in &params.per_emotion {
            w.write_record([p.target.clone(), p.mu0.to_string(), p.gamma.to_string()])?;
        }
        Ok(())
    })?;

    let mut rows = Vec::new();
    for s in &collection.sessions {
        for (e, label) in labels.iter().enumerate() {
            let (stat, p) = if s.count(e) >= MIN_RESIDUAL_EVENTS {
                let r = residual_diagnostics(&params, s, e)?;
                (Some(r.ks_statistic), Some(r.ks_p_value))
            } else {
                (None, None)
            };
            rows.push([
                s.id.clone(),
                label.clone(),
                s.count(e).to_string(),
                expected_count(&params, s, e).to_string(),
                opt(stat),
                opt(p),
            ]);
        }
    }
    write_csv(&out.join("residuals.csv"), |w| {
        w.write_record(["session", "label", "n_events", "expected_count", "ks_statistic", "ks_p_value"])?;
        rows.iter().try_for_each(|r| w.write_record(r))
    })?;

    if let Some(step) = cfg.analyze.grid_step {
        let mut grid = Vec::new();
        for s in &collection.sessions {
            for (e, label) in labels.iter().enumerate() {
                for r in influence_on_grid(&params, s, e, step)? {
                    grid.push([
                        s.id.clone(),
                        label.clone(),
                        r.time.to_string(),
                        r.r_exo.to_string(),
                        r.r_endo.to_string(),
                        opt(r.r0),
                        opt(r.r1),
                    ]);
                }
            }
        }
        write_csv(&out.join("influence_grid.csv"), |w| {
            w.write_record(["session", "label", "time", "r_exo", "r_endo", "r0", "r1"])?;
            grid.iter().try_for_each(|r| w.write_record(r))
        })?;
    }
    Ok(())
}

fn write_recovery_csv(path: &Path, report: &RecoveryReport) -> Result<(), CliError> {
    write_csv(path, |w| {
        w.write_record([
            "target",
            "parameter",
            "truth",
            "estimate",
            "abs_error",
            "rel_error",
            "replica_mean",
            "replica_std",
            "checked",
            "pass",
        ])?;
        for r in &report.rows {
            w.write_record([
                r.target.clone(),
                r.parameter.clone(),
                r.truth.to_string(),
                r.estimate.to_string(),
                r.abs_error.to_string(),
                opt(r.rel_error),
                opt(r.replica_mean),
                opt(r.replica_std),
                r.checked.to_string(),
                r.pass.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let truth = HawkesParams::load(required(&cfg.inputs.params, "params file", "--params")?)?;
    let v = &cfg.validate;
    let (sessions, duration) = if v.quick {
        (QUICK_SESSIONS, QUICK_DURATION)
    } else {
        (v.sessions, v.duration)
    };
    let sim = sim_config(cfg, duration, truth.emotions.len())?;
    let (report, fit, _) = round_trip_validate(
        &truth,
        sessions,
        &sim,
        &cfg.fit.fit_config(cfg.seed),
        &cfg.fit.bootstrap(),
        &v.tolerances,
    )?;
    let out = &cfg.out;
    write_json(&out.join("recovery.json"), &report)?;
    write_recovery_csv(&out.join("recovery.csv"), &report)?;
    write_text(&out.join("fit_report.json"), &fit.to_json()?)?;
    if report.passed {
        println!("recovery passed: {} checked parameters", report.rows.iter().filter(|r| r.checked).count());
        return Ok(());
    }
    let mut msg = String::from("recovery failed:");
    for label in &report.failed_labels {
        let _ = write!(msg, "\n  {label}: fit failed");
    }
    for r in report.failures() {
        let _ = write!(
            msg,
            "\n  {} {}: truth {} estimate {} (abs error {:.4}{})",
            r.target,
            r.parameter,
            r.truth,
            r.estimate,
            r.abs_error,
            r.rel_error.map(|x| format!(", rel error {x:.4}")).unwrap_or_default()
        );
    }
    Err(CliError::validation(msg))
}
