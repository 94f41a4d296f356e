//! Decision rules: MAP, sampling a posteriori (SAP), Neyman–Pearson at the
//! matched position, and the extended-SAP typical-set decoder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::PosteriorPair;
use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::sigmodel::{sinc_correlate, ScenarioConfig, Snapshot, TargetState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorId {
    Map,
    Sap,
    Np,
    Typical,
}

impl DetectorId {
    pub const ALL: [DetectorId; 4] = [
        DetectorId::Map,
        DetectorId::Sap,
        DetectorId::Np,
        DetectorId::Typical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorId::Map => "map",
            DetectorId::Sap => "sap",
            DetectorId::Np => "np",
            DetectorId::Typical => "typical",
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown detector {s:?} (expected map, sap, np or typical)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub declared_state: TargetState,
    pub detector_id: DetectorId,
}

impl Decision {
    fn new(present: bool, detector_id: DetectorId) -> Self {
        Self {
            declared_state: TargetState::from_present(present),
            detector_id,
        }
    }
}

/// False-alarm constraint η for Neyman–Pearson detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpConfig {
    pub target_pfa: f64,
}

impl NpConfig {
    pub fn new(target_pfa: f64) -> Result<Self> {
        if !(target_pfa > 0.0 && target_pfa < 1.0) {
            return Err(Error::domain(format!(
                "target false-alarm probability must lie in (0, 1), got {target_pfa}"
            )));
        }
        Ok(Self { target_pfa })
    }
}

/// Everything a detector may look at for one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub snapshot: &'a Snapshot,
    pub config: &'a ScenarioConfig,
    pub posterior: PosteriorPair,
}

/// Common interface over the single-snapshot decision rules.
pub trait Detector: Send + Sync {
    fn id(&self) -> DetectorId;

    /// `rng` is only consumed by stochastic rules.
    fn decide(&self, obs: &Observation<'_>, rng: &mut Substream) -> Decision;
}

/// Declares presence iff P(1|y) > ½; an exact tie declares absence.
pub fn map_decide(post: &PosteriorPair) -> Decision {
    Decision::new(post.p_present > 0.5, DetectorId::Map)
}

/// Draws the decision from the posterior with one uniform variate.
pub fn sap_decide(post: &PosteriorPair, rng: &mut Substream) -> Decision {
    Decision::new(rng.uniform() < post.p_present, DetectorId::Sap)
}

/// Envelope threshold `T_h = √(−N₀ ln η)` on |uᴴ(x₀)y|, so that a Rayleigh
/// envelope of total variance N₀ exceeds it with probability η.
pub fn np_threshold(config: &ScenarioConfig, np: &NpConfig) -> Result<f64> {
    let np = NpConfig::new(np.target_pfa)?;
    Ok((-config.noise_power * np.target_pfa.ln()).sqrt())
}

/// Threshold test on the matched-filter envelope at the true delay.
pub fn np_decide(snapshot: &Snapshot, config: &ScenarioConfig, np: &NpConfig) -> Result<Decision> {
    let threshold = np_threshold(config, np)?;
    Ok(np_decide_with_threshold(snapshot, config, threshold))
}

pub(crate) fn np_decide_with_threshold(
    snapshot: &Snapshot,
    config: &ScenarioConfig,
    threshold: f64,
) -> Decision {
    let envelope = sinc_correlate(
        &snapshot.samples,
        snapshot.first_index(),
        config.true_position,
    )
    .norm();
    Decision::new(envelope > threshold, DetectorId::Np)
}

/// Extended SAP: one independent posterior draw per snapshot.
pub fn typical_set_decide(posteriors: &[PosteriorPair], rng: &mut Substream) -> Vec<Decision> {
    posteriors
        .iter()
        .map(|p| Decision::new(rng.uniform() < p.p_present, DetectorId::Typical))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MapDetector;

impl Detector for MapDetector {
    fn id(&self) -> DetectorId {
        DetectorId::Map
    }

    fn decide(&self, obs: &Observation<'_>, _rng: &mut Substream) -> Decision {
        map_decide(&obs.posterior)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SapDetector;

impl Detector for SapDetector {
    fn id(&self) -> DetectorId {
        DetectorId::Sap
    }

    fn decide(&self, obs: &Observation<'_>, rng: &mut Substream) -> Decision {
        sap_decide(&obs.posterior, rng)
    }
}

/// Neyman–Pearson detector with its threshold fixed at construction.
#[derive(Debug, Clone, Copy)]
pub struct NpDetector {
    pub np: NpConfig,
    threshold: f64,
}

impl NpDetector {
    pub fn new(config: &ScenarioConfig, np: NpConfig) -> Result<Self> {
        Ok(Self {
            np,
            threshold: np_threshold(config, &np)?,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Detector for NpDetector {
    fn id(&self) -> DetectorId {
        DetectorId::Np
    }

    fn decide(&self, obs: &Observation<'_>, _rng: &mut Substream) -> Decision {
        np_decide_with_threshold(obs.snapshot, obs.config, self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lane;

    fn post(p: f64) -> PosteriorPair {
        PosteriorPair::from_present(p).unwrap()
    }

    #[test]
    fn map_examples() {
        assert_eq!(map_decide(&post(0.7)).declared_state, TargetState::Present);
        assert_eq!(map_decide(&post(0.3)).declared_state, TargetState::Absent);
        assert_eq!(map_decide(&post(0.5)).declared_state, TargetState::Absent);
    }

    #[test]
    fn sap_degenerate_and_deterministic() {
        let mut rng = Substream::new(1, 0, 0, Lane::Decision);
        for _ in 0..1000 {
            assert_eq!(
                sap_decide(&post(0.0), &mut rng).declared_state,
                TargetState::Absent
            );
            assert_eq!(
                sap_decide(&post(1.0), &mut rng).declared_state,
                TargetState::Present
            );
        }
        let a: Vec<_> = (0..50)
            .map(|t| sap_decide(&post(0.4), &mut Substream::new(9, 1, t, Lane::Decision)))
            .collect();
        let b: Vec<_> = (0..50)
            .map(|t| sap_decide(&post(0.4), &mut Substream::new(9, 1, t, Lane::Decision)))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn np_threshold_examples() {
        let c = ScenarioConfig::default();
        let t = np_threshold(
            &c,
            &NpConfig {
                target_pfa: (-1.0f64).exp(),
            },
        )
        .unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        let t = np_threshold(
            &c,
            &NpConfig {
                target_pfa: 1.0 - 1e-12,
            },
        )
        .unwrap();
        assert!(t < 1e-5);
        assert!(np_threshold(&c, &NpConfig { target_pfa: 0.0 }).is_err());
        assert!(np_threshold(&c, &NpConfig { target_pfa: 1.0 }).is_err());
        assert!(NpConfig::new(1.5).is_err());
    }

    #[test]
    fn typical_m1_matches_sap() {
        let p = post(0.63);
        for t in 0..100 {
            let mut a = Substream::new(4, 0, t, Lane::Decision);
            let mut b = Substream::new(4, 0, t, Lane::Decision);
            let seq = typical_set_decide(&[p], &mut a);
            assert_eq!(seq[0].declared_state, sap_decide(&p, &mut b).declared_state);
        }
        let ones = typical_set_decide(
            &[post(1.0); 6],
            &mut Substream::new(1, 1, 1, Lane::Decision),
        );
        assert!(ones
            .iter()
            .all(|d| d.declared_state == TargetState::Present));
    }

    #[test]
    fn detector_ids_round_trip() {
        for d in DetectorId::ALL {
            assert_eq!(d.as_str().parse::<DetectorId>().unwrap(), d);
            assert_eq!(serde_json::to_string(&d).unwrap(), format!("\"{d}\""));
        }
        assert!("ml".parse::<DetectorId>().is_err());
    }
}
