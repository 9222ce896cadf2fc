//! Observation model: ground truth filtered through range limits, noise,
//! dropout and signal misreads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::map::LaneId;
use crate::world::{DetectedObject, EgoState, LightState, SignalKind, TrafficSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationConfig {
    /// `None` means unlimited.
    pub detection_range: Option<f64>,
    pub position_noise_sigma: f64,
    pub yaw_noise_sigma: f64,
    pub dropout_prob: f64,
    pub provide_ids: bool,
    pub signal_misread_prob: f64,
    pub ego_pos_noise_sigma: f64,
    pub seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self::identity()
    }
}

impl DegradationConfig {
    pub fn identity() -> Self {
        Self {
            detection_range: None,
            position_noise_sigma: 0.0,
            yaw_noise_sigma: 0.0,
            dropout_prob: 0.0,
            provide_ids: true,
            signal_misread_prob: 0.0,
            ego_pos_noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("dropout_prob", self.dropout_prob),
            ("signal_misread_prob", self.signal_misread_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("{p} not in [0,1]")));
            }
        }
        for (name, s) in [
            ("position_noise_sigma", self.position_noise_sigma),
            ("yaw_noise_sigma", self.yaw_noise_sigma),
            ("ego_pos_noise_sigma", self.ego_pos_noise_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(name, format!("{s} must be >= 0")));
            }
        }
        if let Some(r) = self.detection_range {
            if !(r > 0.0) {
                return Err(Error::invalid("detection_range", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalObservation {
    pub id: u32,
    pub kind: SignalKind,
    pub pose: Pose2D,
    pub lane: LaneId,
    pub light: Option<LightState>,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub tick: u64,
    pub ego: EgoState,
    pub objects: Vec<DetectedObject>,
    pub signals: Vec<SignalObservation>,
}

/// Stream families, so ego, object and signal draws never collide.
#[derive(Clone, Copy)]
pub(crate) enum Stream {
    Ego = 1,
    Object = 2,
    Signal = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one (seed, tick, stream, index) cell.
pub(crate) fn cell_rng(seed: u64, tick: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    h = splitmix(h ^ tick);
    h = splitmix(h ^ stream as u64);
    h = splitmix(h ^ index);
    ChaCha8Rng::seed_from_u64(h)
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

/// Ground-truth object as seen by the sensor model.
#[derive(Debug, Clone)]
pub struct TruthObject {
    pub id: u64,
    pub object: DetectedObject,
}

pub fn sense(
    time: f64,
    tick: u64,
    ego: &EgoState,
    truth: &[TruthObject],
    signals: &[TrafficSignal],
    cfg: &DegradationConfig,
) -> Observation {
    let mut ego_obs = *ego;
    if cfg.ego_pos_noise_sigma > 0.0 {
        let mut rng = cell_rng(cfg.seed, tick, Stream::Ego, 0);
        let p = ego.pose;
        let dx = gauss(&mut rng, cfg.ego_pos_noise_sigma);
        let dy = gauss(&mut rng, cfg.ego_pos_noise_sigma);
        ego_obs = ego.with_pose(Pose2D::new(p.x + dx, p.y + dy, p.yaw));
    }

    let mut objects = Vec::with_capacity(truth.len());
    for t in truth {
        let c = t.object.bbox.center;
        if let Some(r) = cfg.detection_range {
            if (c.x - ego.pose.x).hypot(c.y - ego.pose.y) > r {
                continue;
            }
        }
        let mut rng = cell_rng(cfg.seed, tick, Stream::Object, t.id);
        if cfg.dropout_prob > 0.0 && rng.gen::<f64>() < cfg.dropout_prob {
            continue;
        }
        let mut det = t.object.clone();
        if cfg.position_noise_sigma > 0.0 || cfg.yaw_noise_sigma > 0.0 {
            let dx = gauss(&mut rng, cfg.position_noise_sigma);
            let dy = gauss(&mut rng, cfg.position_noise_sigma);
            let dyaw = gauss(&mut rng, cfg.yaw_noise_sigma);
            det.bbox = det.bbox.with_center(Pose2D::new(c.x + dx, c.y + dy, c.yaw + dyaw));
        }
        det.id = cfg.provide_ids.then_some(t.id);
        objects.push(det);
    }

    let signals = signals
        .iter()
        .map(|s| {
            let mut light = s.light_state(time);
            if light == Some(LightState::Green) && cfg.signal_misread_prob > 0.0 {
                let mut rng = cell_rng(cfg.seed, tick, Stream::Signal, u64::from(s.id));
                if rng.gen::<f64>() < cfg.signal_misread_prob {
                    light = Some(LightState::Red);
                }
            }
            SignalObservation {
                id: s.id,
                kind: s.kind,
                pose: s.pose,
                lane: s.lane,
                light,
                speed: s.speed,
            }
        })
        .collect();

    Observation {
        time,
        tick,
        ego: ego_obs,
        objects,
        signals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use crate::world::{LightInterval, ObjectCategory};

    fn truth(id: u64, x: f64) -> TruthObject {
        TruthObject {
            id,
            object: DetectedObject {
                category: ObjectCategory::Car,
                bbox: OrientedBox::new(Pose2D::new(x, 0.0, 0.0), 4.5, 1.9),
                timestamp: 1.0,
                id: Some(id),
            },
        }
    }

    fn green() -> TrafficSignal {
        TrafficSignal {
            id: 4,
            kind: SignalKind::TrafficLight,
            pose: Pose2D::new(50.0, 0.0, 0.0),
            lane: 1,
            schedule: vec![LightInterval {
                state: LightState::Green,
                start: 0.0,
                end: 100.0,
            }],
            speed: None,
        }
    }

    #[test]
    fn identity_is_ground_truth() {
        let ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let t = vec![truth(1, 20.0), truth(2, 400.0)];
        let obs = sense(1.0, 20, &ego, &t, &[green()], &DegradationConfig::identity());
        let expected: Vec<_> = t.iter().map(|t| t.object.clone()).collect();
        assert_eq!(obs.objects, expected);
        assert_eq!(obs.ego, ego);
        assert_eq!(obs.signals[0].light, Some(LightState::Green));
    }

    #[test]
    fn range_limit() {
        let ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let cfg = DegradationConfig {
            detection_range: Some(32.0),
            ..DegradationConfig::identity()
        };
        let obs = sense(0.0, 0, &ego, &[truth(1, 40.0), truth(2, 20.0)], &[], &cfg);
        let ids: Vec<_> = obs.objects.iter().map(|o| o.id).collect();
        assert_eq!(ids, vec![Some(2)]);
    }

    #[test]
    fn full_dropout_and_id_stripping() {
        let ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let mut cfg = DegradationConfig {
            dropout_prob: 1.0,
            ..DegradationConfig::identity()
        };
        for tick in 0..50 {
            assert!(sense(0.0, tick, &ego, &[truth(1, 5.0)], &[], &cfg).objects.is_empty());
        }
        cfg.dropout_prob = 0.0;
        cfg.provide_ids = false;
        assert_eq!(sense(0.0, 0, &ego, &[truth(1, 5.0)], &[], &cfg).objects[0].id, None);
    }

    #[test]
    fn noise_is_per_object() {
        let ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let cfg = DegradationConfig {
            position_noise_sigma: 0.5,
            dropout_prob: 0.3,
            seed: 9,
            ..DegradationConfig::identity()
        };
        let both = sense(0.0, 7, &ego, &[truth(1, 5.0), truth(2, 9.0)], &[], &cfg);
        let alone = sense(0.0, 7, &ego, &[truth(2, 9.0)], &[], &cfg);
        let two = |o: &Observation| o.objects.iter().find(|d| d.id == Some(2)).cloned();
        assert_eq!(two(&both), two(&alone));
    }

    #[test]
    fn misread_only_turns_green_red() {
        let ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let cfg = DegradationConfig {
            signal_misread_prob: 0.5,
            seed: 3,
            ..DegradationConfig::identity()
        };
        let reds = (0..1000)
            .filter(|&k| {
                sense(0.0, k, &ego, &[], &[green()], &cfg).signals[0].light == Some(LightState::Red)
            })
            .count();
        assert!((400..600).contains(&reds), "{reds}");
        let mut red = green();
        red.schedule[0].state = LightState::Red;
        for k in 0..100 {
            assert_eq!(
                sense(0.0, k, &ego, &[], &[red.clone()], &cfg).signals[0].light,
                Some(LightState::Red)
            );
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        let mut c = DegradationConfig::identity();
        c.dropout_prob = 1.5;
        assert!(c.validate().is_err());
        c.dropout_prob = 0.0;
        c.yaw_noise_sigma = -1.0;
        assert!(c.validate().is_err());
    }
}
