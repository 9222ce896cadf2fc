//! `train`, `gen-demos` and `calibrate`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use drivestack::controller::calibrate_default;
use drivestack::irl::{
    generate_synthetic, ingest_demos, mmp_train, prepare_demos, synthetic_map, write_demo_table, IngestConfig,
    SyntheticConfig, TrainConfig, WeightsFile,
};
use drivestack::map::LaneMap;
use drivestack::planner::PlannerConfig;
use drivestack::sim::SimParams;
use drivestack::Error;
use serde::{Deserialize, Serialize};

use crate::error::{create_dir, io_err, write_file, CliError, CliResult};
use crate::run::path_safe;

/// Contents of the `--config` file for `train`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainFile {
    pub train: TrainConfig,
    pub ingest: IngestConfig,
    pub planner: PlannerConfig,
}

impl TrainFile {
    pub fn from_json_str(text: &str, origin: &str) -> drivestack::Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        f.train.validate()?;
        f.planner.validate()?;
        Ok(f)
    }
}

fn to_json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Failed(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| "demos".into(), |s| path_safe(&s.to_string_lossy()))
}

/// Trains on `lanemap.json` plus every `*.csv` table in `demos`; writes
/// `weights.json` with the evaluation metrics embedded.
pub fn cmd_train(demos: &Path, config: Option<&Path>, out: &Path) -> CliResult<PathBuf> {
    let cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            TrainFile::from_json_str(&text, &p.display().to_string())?
        }
        None => TrainFile::default(),
    };
    let entries = std::fs::read_dir(demos).map_err(|e| io_err(demos, e))?;
    let mut tables: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    tables.sort();
    if tables.is_empty() {
        return Err(Error::Empty(format!("{}: no demo tables (*.csv)", demos.display())).into());
    }
    let map = Arc::new(LaneMap::load(demos.join("lanemap.json"))?);
    let (experts, ingest) = ingest_demos(&tables, map, &cfg.ingest, &cfg.planner)?;
    let prepared = prepare_demos(&experts, &cfg.planner)?;
    let result = mmp_train(&prepared, &cfg.train)?;

    let per_gamma: Vec<_> = result
        .per_gamma
        .iter()
        .map(|g| {
            serde_json::json!({
                "gamma": g.gamma,
                "validation": g.validation,
                "final_objective": g.objective.last(),
            })
        })
        .collect();
    let metrics = serde_json::json!({
        "demos": result.demos,
        "ingest": ingest,
        "train": result.train,
        "validation": result.validation,
        "per_gamma": per_gamma,
    });
    let file = WeightsFile::new(result.weights, Some(metrics));
    let dir = out.join(format!("train-{}", dir_name(demos)));
    create_dir(&dir)?;
    write_file(&dir.join("weights.json"), &to_json(&file)?)?;
    let v = result.validation.unwrap_or(result.train);
    println!(
        "{} demos, gamma {}, match rate {:.3}, mean loss {:.4} -> {}",
        result.demos,
        result.weights.gamma,
        v.match_rate,
        v.mean_loss,
        dir.display()
    );
    Ok(dir)
}

/// Writes a synthetic demo directory generated under known weights.
pub fn cmd_gen_demos(cfg: &SyntheticConfig, out: &Path) -> CliResult<PathBuf> {
    let map = synthetic_map();
    let tables = generate_synthetic(cfg, &map, &IngestConfig::default(), &PlannerConfig::default())?;
    let dir = out.join(format!("demos-s{}", cfg.seed));
    create_dir(&dir)?;
    write_file(&dir.join("lanemap.json"), &to_json(&map.to_json_value())?)?;
    for (i, rows) in tables.iter().enumerate() {
        let mut buf = Vec::new();
        write_demo_table(&mut buf, rows)?;
        write_file(&dir.join(format!("context_{i:04}.csv")), &buf)?;
    }
    write_file(&dir.join("generator.json"), &to_json(cfg)?)?;
    println!("{} demo tables -> {}", tables.len(), dir.display());
    Ok(dir)
}

/// Writes the feed-forward table measured on the default plant.
pub fn cmd_calibrate(tick: f64, out: &Path) -> CliResult<PathBuf> {
    if !(tick > 0.0) {
        return Err(CliError::Usage("--tick must be > 0".into()));
    }
    let plant = SimParams::default().vehicle;
    let table = calibrate_default(&plant, tick);
    let dir = out.join("calibration");
    create_dir(&dir)?;
    let path = dir.join("caltable.csv");
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(&path, &buf)?;
    println!("{} cells -> {}", table.command.len(), path.display());
    Ok(path)
}
