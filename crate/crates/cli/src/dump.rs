//! `plot-dump`: flat CSVs from a tick log.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use drivestack::sim::log::read_log;
use drivestack::sim::TickRecord;

use crate::error::{create_dir, io_err, write_file, CliError, CliResult};
use crate::run::path_safe;

pub const EGO_COLUMNS: [&str; 12] = [
    "tick", "time", "x", "y", "yaw", "speed", "accel", "route_s", "route_offset", "throttle", "brake", "steering",
];
pub const TRACK_COLUMNS: [&str; 8] = ["tick", "time", "id", "category", "x", "y", "yaw", "speed"];
pub const DECISION_COLUMNS: [&str; 10] = [
    "tick", "time", "behavior", "path_index", "accel_index", "cost", "emergency", "tracks", "stop_s", "error",
];
pub const EVENT_COLUMNS: [&str; 5] = ["tick", "time", "kind", "x", "y"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn table<const N: usize>(header: [&str; N], rows: Vec<[String; N]>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Failed(e.to_string()))
}

/// The four dump tables, in the order ego, tracks, decisions, events.
pub fn dump_tables(records: &[TickRecord]) -> CliResult<[Vec<u8>; 4]> {
    let mut ego = Vec::new();
    let mut tracks = Vec::new();
    let mut decisions = Vec::new();
    let mut events = Vec::new();
    for r in records {
        let (tick, time) = (r.tick.to_string(), r.time.to_string());
        let e = &r.ego;
        ego.push([
            tick.clone(),
            time.clone(),
            e.pose.x.to_string(),
            e.pose.y.to_string(),
            e.pose.yaw.to_string(),
            e.speed.to_string(),
            e.accel.to_string(),
            r.route_s.to_string(),
            r.route_offset.to_string(),
            r.command.throttle.to_string(),
            r.command.brake.to_string(),
            r.command.steering.to_string(),
        ]);
        if let Some(t) = &r.trace {
            for o in &t.objects {
                tracks.push([
                    tick.clone(),
                    time.clone(),
                    o.id.to_string(),
                    o.category.name().to_string(),
                    o.x.to_string(),
                    o.y.to_string(),
                    o.yaw.to_string(),
                    o.speed.to_string(),
                ]);
            }
            decisions.push([
                tick.clone(),
                time.clone(),
                t.behavior.clone(),
                opt(t.path_index),
                opt(t.accel_index),
                opt(t.cost),
                u8::from(t.emergency).to_string(),
                t.tracks.to_string(),
                opt(t.stop_s),
                t.error.clone().unwrap_or_default(),
            ]);
        }
        for ev in &r.events {
            events.push([
                tick.clone(),
                time.clone(),
                ev.kind.name().to_string(),
                ev.location.x.to_string(),
                ev.location.y.to_string(),
            ]);
        }
    }
    Ok([
        table(EGO_COLUMNS, ego)?,
        table(TRACK_COLUMNS, tracks)?,
        table(DECISION_COLUMNS, decisions)?,
        table(EVENT_COLUMNS, events)?,
    ])
}

pub const DUMP_FILES: [&str; 4] = ["ego_trace.csv", "tracks.csv", "decisions.csv", "events.csv"];

pub fn cmd_plot_dump(log: &Path, out: &Path) -> CliResult<PathBuf> {
    let f = std::fs::File::open(log).map_err(|e| io_err(log, e))?;
    let records = read_log(BufReader::new(f), &log.display().to_string())?;
    let tables = dump_tables(&records)?;
    let stem = log
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| log.file_stem())
        .map_or_else(|| "log".into(), |s| path_safe(&s.to_string_lossy()));
    let dir = out.join(format!("dump-{stem}"));
    create_dir(&dir)?;
    for (name, bytes) in DUMP_FILES.iter().zip(&tables) {
        write_file(&dir.join(name), bytes)?;
    }
    println!("{} ticks -> {}", records.len(), dir.display());
    Ok(dir)
}
