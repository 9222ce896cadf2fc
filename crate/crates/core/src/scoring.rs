//! Leaderboard-style driving score: route completion times a multiplicative
//! infraction penalty.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::map::RoutePlan;
use crate::sim::events::{InfractionKind, RawInfractionEvent};

/// Distance to the final route point that counts as arriving.
pub const ARRIVAL_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTable {
    pub coefficients: BTreeMap<InfractionKind, f64>,
}

impl Default for PenaltyTable {
    fn default() -> Self {
        use InfractionKind::*;
        let coefficients = InfractionKind::ALL
            .into_iter()
            .map(|k| {
                let c = match k {
                    CollisionPedestrian => 0.50,
                    CollisionVehicle => 0.60,
                    CollisionStatic => 0.65,
                    RedLight => 0.70,
                    StopSign => 0.80,
                    _ => 0.70,
                };
                (k, c)
            })
            .collect();
        Self { coefficients }
    }
}

impl PenaltyTable {
    pub fn new(coefficients: BTreeMap<InfractionKind, f64>) -> Result<Self> {
        for (k, c) in &coefficients {
            if !(*c > 0.0 && *c <= 1.0) {
                return Err(Error::invalid(
                    format!("penalty[{}]", k.name()),
                    format!("coefficient {c} outside (0, 1]"),
                ));
            }
        }
        Ok(Self { coefficients })
    }

    /// Table where every kind shares one coefficient.
    pub fn uniform(c: f64) -> Result<Self> {
        Self::new(InfractionKind::ALL.into_iter().map(|k| (k, c)).collect())
    }

    pub fn coefficient(&self, kind: InfractionKind) -> Result<f64> {
        self.coefficients
            .get(&kind)
            .copied()
            .ok_or_else(|| Error::UnknownKind(kind.name().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub route_completion: f64,
    pub infraction_penalty: f64,
    pub driving_score: f64,
    pub events: Vec<RawInfractionEvent>,
    pub counts: BTreeMap<InfractionKind, usize>,
}

/// Percentage of the route reached, measured as the furthest projected arc
/// length. Exactly 100 only when the trace comes within [`ARRIVAL_RADIUS`]
/// of the final route point.
pub fn route_completion(route: &RoutePlan, trace: &[Pose2D]) -> f64 {
    let path = &route.reference_path;
    let end = path.last().pose;
    let mut max_s: f64 = 0.0;
    for p in trace {
        if p.distance(&end) <= ARRIVAL_RADIUS {
            return 100.0;
        }
        max_s = max_s.max(path.project(p.x, p.y).s);
    }
    let pct = 100.0 * max_s / route.total_length;
    // never report full completion without arriving
    pct.min(100.0 * (1.0 - 1e-9))
}

/// `DS = RC * IS` with `IS` the product of one coefficient per event.
pub fn compute_score(
    rc: f64,
    events: &[RawInfractionEvent],
    table: &PenaltyTable,
) -> Result<ScoreReport> {
    let mut counts: BTreeMap<InfractionKind, usize> = BTreeMap::new();
    for e in events {
        table.coefficient(e.kind)?;
        *counts.entry(e.kind).or_default() += 1;
    }
    // multiply in canonical kind order so the result is order-independent
    let mut penalty = 1.0;
    for (kind, n) in &counts {
        let c = table.coefficient(*kind)?;
        for _ in 0..*n {
            penalty *= c;
        }
    }
    Ok(ScoreReport {
        route_completion: rc,
        infraction_penalty: penalty,
        driving_score: rc * penalty,
        events: events.to_vec(),
        counts,
    })
}

/// Columns of the module-impact table, in order after the label.
pub const TABLE_COLUMNS: [&str; 12] = [
    "DS", "RC", "IS", "Ped", "Veh", "Stat", "Red", "Stop", "Dev", "Spd", "Emrg", "Block",
];

const TABLE_KINDS: [InfractionKind; 9] = [
    InfractionKind::CollisionPedestrian,
    InfractionKind::CollisionVehicle,
    InfractionKind::CollisionStatic,
    InfractionKind::RedLight,
    InfractionKind::StopSign,
    InfractionKind::RouteDeviation,
    InfractionKind::MinSpeed,
    InfractionKind::EmergencyYield,
    InfractionKind::AgentBlocked,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub routes: usize,
    pub driving_score: f64,
    pub route_completion: f64,
    pub infraction_penalty: f64,
    /// Events of each kind per route.
    pub per_route: BTreeMap<InfractionKind, f64>,
}

impl ScoreSummary {
    pub fn per_route(&self, kind: InfractionKind) -> f64 {
        self.per_route.get(&kind).copied().unwrap_or(0.0)
    }

    /// Values in [`TABLE_COLUMNS`] order.
    pub fn row(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0] = self.driving_score;
        out[1] = self.route_completion;
        out[2] = self.infraction_penalty;
        for (i, k) in TABLE_KINDS.iter().enumerate() {
            out[3 + i] = self.per_route(*k);
        }
        out
    }
}

pub fn aggregate(reports: &[ScoreReport]) -> Result<ScoreSummary> {
    if reports.is_empty() {
        return Err(Error::Empty("no score reports to aggregate".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&ScoreReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let per_route = InfractionKind::ALL
        .into_iter()
        .map(|k| {
            let total: usize = reports
                .iter()
                .map(|r| r.counts.get(&k).copied().unwrap_or(0))
                .sum();
            (k, total as f64 / n)
        })
        .collect();
    Ok(ScoreSummary {
        routes: reports.len(),
        driving_score: mean(|r| r.driving_score),
        route_completion: mean(|r| r.route_completion),
        infraction_penalty: mean(|r| r.infraction_penalty),
        per_route,
    })
}

/// Writes labelled summary rows as CSV in the table's column order.
pub fn write_csv<W: Write>(out: W, rows: &[(String, Option<ScoreSummary>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["exp"];
    header.extend(TABLE_COLUMNS);
    w.write_record(&header).map_err(|e| Error::parse("csv", e))?;
    for (label, summary) in rows {
        let mut rec = vec![label.clone()];
        match summary {
            Some(s) => rec.extend(s.row().iter().map(|v| format!("{v:.2}"))),
            None => rec.extend(TABLE_COLUMNS.iter().map(|_| "FAILED".to_string())),
        }
        w.write_record(&rec).map_err(|e| Error::parse("csv", e))?;
    }
    w.flush().map_err(|e| Error::io("csv", e))?;
    Ok(())
}

/// Markdown rendering of the same table.
pub fn markdown_table(rows: &[(String, Option<ScoreSummary>)]) -> String {
    let mut s = String::from("| exp |");
    for c in TABLE_COLUMNS {
        s.push_str(&format!(" {c} |"));
    }
    s.push_str("\n|---|");
    for _ in TABLE_COLUMNS {
        s.push_str("---:|");
    }
    s.push('\n');
    for (label, summary) in rows {
        s.push_str(&format!("| {label} |"));
        match summary {
            Some(sum) => {
                for v in sum.row() {
                    s.push_str(&format!(" {v:.2} |"));
                }
            }
            None => {
                for _ in TABLE_COLUMNS {
                    s.push_str(" FAILED |");
                }
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Path;
    use proptest::prelude::*;

    fn ev(kind: InfractionKind) -> RawInfractionEvent {
        RawInfractionEvent {
            kind,
            time: 0.0,
            location: Pose2D::new(0.0, 0.0, 0.0),
        }
    }

    fn straight_route(len: f64) -> RoutePlan {
        let xy: Vec<[f64; 2]> = (0..=(len as usize / 5)).map(|i| [5.0 * i as f64, 0.0]).collect();
        RoutePlan::from_path(Path::from_xy(&xy).unwrap(), 10.0)
    }

    #[test]
    fn worked_examples() {
        let half = PenaltyTable::uniform(0.5).unwrap();
        let r = compute_score(10.0, &[ev(InfractionKind::CollisionVehicle)], &half).unwrap();
        assert_eq!(r.driving_score, 5.0);
        let four = vec![ev(InfractionKind::CollisionVehicle); 4];
        let r = compute_score(40.0, &four, &half).unwrap();
        assert_eq!(r.driving_score, 2.5);
        let clean = compute_score(100.0, &[], &PenaltyTable::default()).unwrap();
        assert_eq!((clean.driving_score, clean.infraction_penalty), (100.0, 1.0));
    }

    #[test]
    fn further_driving_can_score_lower() {
        // equal infractions per distance: the agent that drives further loses
        let half = PenaltyTable::uniform(0.5).unwrap();
        let short = compute_score(10.0, &[ev(InfractionKind::RedLight)], &half).unwrap();
        let long = compute_score(40.0, &vec![ev(InfractionKind::RedLight); 4], &half).unwrap();
        assert!(long.route_completion > short.route_completion);
        assert!(long.driving_score < short.driving_score);
    }

    #[test]
    fn missing_kind_is_error() {
        let mut table = PenaltyTable::default();
        table.coefficients.remove(&InfractionKind::Timeout);
        assert!(matches!(
            compute_score(50.0, &[ev(InfractionKind::Timeout)], &table),
            Err(Error::UnknownKind(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_coefficients() {
        assert!(PenaltyTable::uniform(0.0).is_err());
        assert!(PenaltyTable::uniform(1.2).is_err());
        assert!(PenaltyTable::uniform(1.0).is_ok());
    }

    #[test]
    fn completion_cases() {
        let route = straight_route(200.0);
        let still = vec![Pose2D::new(0.0, 0.0, 0.0); 10];
        assert_eq!(route_completion(&route, &still), 0.0);
        let half: Vec<_> = (0..=100).map(|i| Pose2D::new(i as f64, 0.0, 0.0)).collect();
        assert!((route_completion(&route, &half) - 50.0).abs() < 1e-9);
        let full: Vec<_> = (0..=200).map(|i| Pose2D::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(route_completion(&route, &full), 100.0);
        // backtracking earns nothing
        let mut back = half.clone();
        back.extend((0..50).map(|i| Pose2D::new(100.0 - i as f64, 0.0, 0.0)));
        assert!((route_completion(&route, &back) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_means() {
        let table = PenaltyTable::default();
        let a = compute_score(10.0, &[], &table).unwrap();
        let b = compute_score(20.0, &[], &table).unwrap();
        let s = aggregate(&[a.clone(), b]).unwrap();
        assert_eq!(s.driving_score, 15.0);
        let single = aggregate(&[a.clone()]).unwrap();
        assert_eq!(single.driving_score, a.driving_score);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn per_route_averages_are_fractional() {
        let table = PenaltyTable::default();
        // 31 vehicle collisions spread over 18 routes
        let reports: Vec<_> = (0..18)
            .map(|i| {
                let n = if i < 13 { 2 } else { 1 };
                compute_score(50.0, &vec![ev(InfractionKind::CollisionVehicle); n], &table).unwrap()
            })
            .collect();
        let s = aggregate(&reports).unwrap();
        assert!((s.per_route(InfractionKind::CollisionVehicle) - 31.0 / 18.0).abs() < 1e-12);
        assert!((s.per_route(InfractionKind::CollisionVehicle) - 1.72).abs() < 0.005);
    }

    #[test]
    fn csv_header_order() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[("Mp".into(), None)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("exp,DS,RC,IS,Ped,Veh,Stat,Red,Stop,Dev,Spd,Emrg,Block\n"));
        assert!(text.contains("Mp,FAILED"));
    }

    fn arb_kind() -> impl Strategy<Value = InfractionKind> {
        (0..InfractionKind::ALL.len()).prop_map(|i| InfractionKind::ALL[i])
    }

    proptest! {
        #[test]
        fn score_is_product_and_order_free(rc in 0.0..100.0f64,
                                           kinds in proptest::collection::vec(arb_kind(), 0..12),
                                           extra in arb_kind()) {
            let table = PenaltyTable::default();
            let events: Vec<_> = kinds.iter().map(|k| ev(*k)).collect();
            let r = compute_score(rc, &events, &table).unwrap();
            prop_assert_eq!(r.driving_score, r.route_completion * r.infraction_penalty);
            let mut rev = events.clone();
            rev.reverse();
            let r2 = compute_score(rc, &rev, &table).unwrap();
            prop_assert_eq!(r.infraction_penalty, r2.infraction_penalty);
            let mut more = events.clone();
            more.push(ev(extra));
            let r3 = compute_score(rc, &more, &table).unwrap();
            if rc > 0.0 {
                prop_assert!(r3.driving_score < r.driving_score);
            }
        }

        #[test]
        fn completion_monotone_in_prefix(xs in proptest::collection::vec(-20.0..220.0f64, 1..40)) {
            let route = straight_route(200.0);
            let trace: Vec<_> = xs.iter().map(|x| Pose2D::new(*x, 1.0, 0.0)).collect();
            let mut prev = 0.0;
            for k in 1..=trace.len() {
                let rc = route_completion(&route, &trace[..k]);
                prop_assert!(rc >= prev);
                prev = rc;
            }
        }
    }
}
