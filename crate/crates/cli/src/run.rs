//! `run`: one scenario, one agent configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use drivestack::agent::{run_route_with, AgentConfig, RunOptions};
use drivestack::planner::{write_candidates_csv, CANDIDATE_COLUMNS};
use drivestack::scoring::ScoreReport;
use drivestack::sim::log::write_log;
use drivestack::sim::{load_scenario, DegradationConfig, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{create_dir, io_err, write_file, CliError, CliResult};
use crate::presets::{Preset, PresetFile};

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub scenario: PathBuf,
    pub agent_config: Option<PathBuf>,
    pub preset: Option<String>,
    pub presets: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub dump_candidates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub arrived: bool,
    pub ticks: usize,
    pub report: ScoreReport,
}

/// Keeps names usable as a single path component.
pub fn path_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_+.".contains(c) { c } else { '_' })
        .collect()
}

pub fn scenario_label(sc: &Scenario, path: &Path) -> String {
    if sc.name.is_empty() {
        path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    } else {
        sc.name.clone()
    }
}

pub fn lookup_preset(file: &PresetFile, name: &str) -> CliResult<Preset> {
    file.get(name).cloned().ok_or_else(|| {
        CliError::Usage(format!("unknown preset {name:?}; valid presets: {}", file.names().join(", ")))
    })
}

pub fn load_agent_config(path: Option<&Path>) -> CliResult<AgentConfig> {
    Ok(match path {
        Some(p) => AgentConfig::load(p)?,
        None => AgentConfig::default(),
    })
}

pub fn cmd_run(args: &RunArgs) -> CliResult<PathBuf> {
    let preset = match &args.preset {
        Some(name) => Some(lookup_preset(&PresetFile::load(args.presets.as_deref())?, name)?),
        None => None,
    };
    let scenario = Arc::new(load_scenario(&args.scenario)?);
    let base = load_agent_config(args.agent_config.as_deref())?;
    let (cfg, mut degradation) = match &preset {
        Some(p) => (p.configure(&base), p.degradation.clone()),
        None => (base, DegradationConfig::identity()),
    };
    let seed = args.seed.unwrap_or(scenario.seed);
    degradation.seed = seed;

    let label = scenario_label(&scenario, &args.scenario);
    let preset_name = preset.as_ref().map_or("custom", |p| p.name.as_str());
    let dir = args
        .out
        .join(format!("run-{}-{}-s{seed}", path_safe(&label), path_safe(preset_name)));
    create_dir(&dir)?;

    let cand_path = dir.join("candidates.csv");
    let mut dump = if args.dump_candidates {
        let mut w = csv::Writer::from_path(&cand_path).map_err(|e| CliError::Failed(format!("{}: {e}", cand_path.display())))?;
        w.write_record(CANDIDATE_COLUMNS)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        Some(w)
    } else {
        None
    };
    let mut dump_err: Option<drivestack::Error> = None;
    let out = run_route_with(scenario.clone(), &cfg, &degradation, &RunOptions::default(), |rec, diag| {
        if let (Some(w), Some(chosen)) = (dump.as_mut(), diag.chosen.as_ref()) {
            if dump_err.is_none() {
                if let Err(e) = write_candidates_csv(w, rec.tick - 1, &diag.candidates, chosen.index()) {
                    dump_err = Some(e);
                }
            }
        }
    })?;
    if let Some(e) = dump_err {
        return Err(e.into());
    }
    if let Some(mut w) = dump {
        w.flush().map_err(|e| io_err(&cand_path, e))?;
    }

    let summary = RunSummary {
        scenario: label,
        preset: preset.map(|p| p.name),
        seed,
        arrived: out.arrived,
        ticks: out.log.len(),
        report: out.report,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    write_file(&dir.join("report.json"), text.as_bytes())?;
    let mut log = Vec::new();
    write_log(&mut log, &out.log)?;
    write_file(&dir.join("log.jsonl"), &log)?;
    println!(
        "{}: DS {:.2} RC {:.2} IS {:.3} -> {}",
        summary.scenario,
        summary.report.driving_score,
        summary.report.route_completion,
        summary.report.infraction_penalty,
        dir.display()
    );
    Ok(dir)
}
