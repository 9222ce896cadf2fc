//! `ablation`: every preset over every scenario of a suite, several seeds.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use drivestack::agent::{run_route_with, AgentConfig, RunOptions};
use drivestack::controller::calibrate_default;
use drivestack::scoring::{aggregate, markdown_table, write_csv, ScoreReport, ScoreSummary};
use drivestack::sim::{load_scenario, InfractionKind, Scenario, SimParams};
use drivestack::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{create_dir, io_err, write_file, CliError, CliResult};
use crate::presets::{Preset, PresetFile};
use crate::run::{load_agent_config, lookup_preset, path_safe, scenario_label};

#[derive(Debug, Clone)]
pub struct AblationArgs {
    pub suite: PathBuf,
    pub matrix: Option<PathBuf>,
    pub presets: Option<PathBuf>,
    pub agent_config: Option<PathBuf>,
    pub jobs: usize,
    pub out: PathBuf,
}

/// Which presets and seeds to run; empty `presets` means all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Matrix {
    pub presets: Vec<String>,
    pub seeds: Vec<u64>,
}

impl Default for Matrix {
    fn default() -> Self {
        Self {
            presets: Vec::new(),
            seeds: vec![1, 2, 3],
        }
    }
}

impl Matrix {
    pub fn from_json_str(text: &str, origin: &str) -> drivestack::Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if m.seeds.is_empty() {
            return Err(Error::Empty(format!("{origin}: no seeds")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct RunRow {
    pub scenario: String,
    pub preset: String,
    pub seed: u64,
    pub result: Result<ScoreReport, String>,
}

/// Scenario JSON files of a suite directory, sorted by file name.
pub fn load_suite(dir: &Path) -> CliResult<Vec<(String, Arc<Scenario>)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty(format!("{}: no scenario files", dir.display())).into());
    }
    paths
        .iter()
        .map(|p| {
            let sc = load_scenario(p)?;
            Ok((scenario_label(&sc, p), Arc::new(sc)))
        })
        .collect()
}

/// Runs the full matrix on at most `jobs` threads. Rows come back in
/// scenario, preset, seed order regardless of scheduling.
pub fn run_matrix(
    suite: &[(String, Arc<Scenario>)],
    presets: &[Preset],
    seeds: &[u64],
    base: &AgentConfig,
    jobs: usize,
) -> CliResult<Vec<RunRow>> {
    let opts = RunOptions {
        calibration: Some(Arc::new(calibrate_default(&SimParams::default().vehicle, SimParams::default().tick))),
        ..RunOptions::default()
    };
    let mut cells = Vec::new();
    for (name, sc) in suite {
        for p in presets {
            for &seed in seeds {
                cells.push((name, sc, p, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|(name, sc, p, seed)| {
                let cfg = p.configure(base);
                let mut deg = p.degradation.clone();
                deg.seed = *seed;
                let result = run_route_with((*sc).clone(), &cfg, &deg, &opts, |_, _| {})
                    .map(|o| o.report)
                    .map_err(|e| e.to_string());
                if let Err(e) = &result {
                    log::error!("{name} / {} / seed {seed}: {e}", p.name);
                }
                RunRow {
                    scenario: (*name).clone(),
                    preset: p.name.clone(),
                    seed: *seed,
                    result,
                }
            })
            .collect()
    });
    Ok(rows)
}

/// One summary per preset, in preset order; `None` when any run failed.
pub fn summarize(rows: &[RunRow], presets: &[Preset]) -> Vec<(String, Option<ScoreSummary>)> {
    presets
        .iter()
        .map(|p| {
            let mine: Vec<&RunRow> = rows.iter().filter(|r| r.preset == p.name).collect();
            let reports: Option<Vec<ScoreReport>> = mine.iter().map(|r| r.result.clone().ok()).collect();
            let summary = reports.and_then(|r| aggregate(&r).ok());
            (p.name.clone(), summary)
        })
        .collect()
}

fn runs_csv(rows: &[RunRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["scenario", "preset", "seed", "status", "DS", "RC", "IS"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(InfractionKind::ALL.iter().map(|k| k.name().to_string()));
    let fail = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(&header).map_err(fail)?;
    for r in rows {
        let mut rec = vec![r.scenario.clone(), r.preset.clone(), r.seed.to_string()];
        match &r.result {
            Ok(rep) => {
                rec.push("ok".into());
                rec.push(format!("{}", rep.driving_score));
                rec.push(format!("{}", rep.route_completion));
                rec.push(format!("{}", rep.infraction_penalty));
                rec.extend(
                    InfractionKind::ALL
                        .iter()
                        .map(|k| rep.counts.get(k).copied().unwrap_or(0).to_string()),
                );
            }
            Err(e) => {
                rec.push(format!("failed: {e}"));
                rec.extend(std::iter::repeat(String::new()).take(3 + InfractionKind::ALL.len()));
            }
        }
        w.write_record(&rec).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Failed(e.to_string()))
}

pub fn cmd_ablation(args: &AblationArgs) -> CliResult<PathBuf> {
    let file = PresetFile::load(args.presets.as_deref())?;
    let matrix = match &args.matrix {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Matrix::from_json_str(&text, &p.display().to_string())?
        }
        None => Matrix::default(),
    };
    let presets: Vec<Preset> = if matrix.presets.is_empty() {
        file.presets.clone()
    } else {
        matrix
            .presets
            .iter()
            .map(|n| lookup_preset(&file, n))
            .collect::<CliResult<_>>()?
    };
    let suite = load_suite(&args.suite)?;
    let base = load_agent_config(args.agent_config.as_deref())?;
    let rows = run_matrix(&suite, &presets, &matrix.seeds, &base, args.jobs)?;
    let table = summarize(&rows, &presets);

    let suite_name = args
        .suite
        .file_name()
        .map_or_else(|| "suite".into(), |s| s.to_string_lossy().into_owned());
    let dir = args.out.join(format!("ablation-{}", path_safe(&suite_name)));
    create_dir(&dir)?;
    write_file(&dir.join("runs.csv"), &runs_csv(&rows)?)?;
    let mut summary = Vec::new();
    write_csv(&mut summary, &table)?;
    write_file(&dir.join("summary.csv"), &summary)?;
    let md = markdown_table(&table);
    write_file(&dir.join("summary.md"), md.as_bytes())?;
    print!("{md}");
    Ok(dir)
}
