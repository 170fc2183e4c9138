//! Scenario files: one TOML document describing topology, traffic and every
//! model parameter, with defaults for anything left out.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ctipon::cti::CtiConfig;
use ctipon::pon::{DbaMode, OnuId, PonConfig, TcontId};
use ctipon::ran::{mcs_entry, IqFormat, SlotConfig, TrafficKind, UeId, UeTrafficProfile};
use ctipon::sim::SimTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{} validation error(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetrySettings {
    pub window: SimTime,
}

impl Default for TelemetrySettings {
    fn default() -> Self {
        TelemetrySettings {
            window: SimTime::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveSettings {
    pub port: u16,
    /// Simulated seconds per wall-clock second; 0 runs unpaced.
    pub pace: f64,
    /// Where to mirror encoded CTI reports as UDP datagrams.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cti_mirror: Option<String>,
}

impl Default for LiveSettings {
    fn default() -> Self {
        LiveSettings {
            port: 7878,
            pace: 1.0,
            cti_mirror: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnuSpec {
    pub onu_id: OnuId,
    #[serde(default = "default_fiber_km")]
    pub fiber_km: f64,
    /// TCONT carrying fronthaul from UEs attached to this ONU.
    pub fronthaul_tcont: TcontId,
    /// Best-effort TCONT for the ONU's other applications.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_tcont: Option<TcontId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<UeTrafficProfile>,
}

fn default_fiber_km() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub ue_id: UeId,
    pub onu: OnuId,
    pub tcont: TcontId,
    #[serde(default = "default_mcs")]
    pub mcs: u8,
    pub traffic: UeTrafficProfile,
}

fn default_mcs() -> u8 {
    ctipon::ran::MCS_256QAM_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration: SimTime,
    pub mode: DbaMode,
    pub slot: SlotConfig,
    pub iq: IqFormat,
    pub pon: PonConfig,
    pub cti: CtiConfig,
    pub telemetry: TelemetrySettings,
    pub live: LiveSettings,
    pub onus: Vec<OnuSpec>,
    pub ues: Vec<UeSpec>,
}

impl Default for ScenarioConfig {
    /// Four ONUs on 10 km of fiber, each with a fronthaul and an on-off
    /// background TCONT; one video-like 50 Mb/s UE behind ONU 0.
    fn default() -> Self {
        let onus = (0..4u16)
            .map(|i| OnuSpec {
                onu_id: i,
                fiber_km: default_fiber_km(),
                fronthaul_tcont: 1 + i,
                background_tcont: Some(101 + i),
                background: Some(UeTrafficProfile {
                    kind: TrafficKind::OnOff {
                        on: SimTime::from_millis(5),
                        off: SimTime::from_millis(5),
                        exponential: true,
                    },
                    mean_rate: 500e6,
                    scale: 1.0,
                }),
            })
            .collect();
        ScenarioConfig {
            name: "default".into(),
            seed: 1,
            duration: SimTime::from_secs(2),
            mode: DbaMode::Cti,
            slot: SlotConfig::default(),
            iq: IqFormat::default(),
            pon: PonConfig::default(),
            cti: CtiConfig::default(),
            telemetry: TelemetrySettings::default(),
            live: LiveSettings::default(),
            onus,
            ues: vec![UeSpec {
                ue_id: 0,
                onu: 0,
                tcont: 1,
                mcs: default_mcs(),
                traffic: UeTrafficProfile {
                    kind: TrafficKind::video(),
                    mean_rate: 50e6,
                    scale: 1.0,
                },
            }],
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let errors = cfg.validate();
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every problem with the configuration, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.duration == SimTime::ZERO {
            errs.push("duration: must be > 0".into());
        }
        errs.extend(self.slot.validate().into_iter().map(|e| format!("slot: {e}")));
        errs.extend(self.pon.validate().into_iter().map(|e| format!("pon: {e}")));
        errs.extend(self.cti.validate().into_iter().map(|e| format!("cti: {e}")));
        if self.telemetry.window == SimTime::ZERO {
            errs.push("telemetry.window: must be > 0".into());
        }
        if !(self.live.pace >= 0.0 && self.live.pace.is_finite()) {
            errs.push(format!("live.pace: must be >= 0, got {}", self.live.pace));
        }
        if let Some(addr) = &self.live.cti_mirror {
            if addr.parse::<std::net::SocketAddr>().is_err() {
                errs.push(format!("live.cti_mirror: not a host:port address: {addr:?}"));
            }
        }
        if self.onus.is_empty() {
            errs.push("onus: at least one ONU is required".into());
        }

        let mut onu_ids = BTreeSet::new();
        let mut tconts: BTreeMap<TcontId, String> = BTreeMap::new();
        let mut fronthaul_of: BTreeMap<OnuId, TcontId> = BTreeMap::new();
        for (i, o) in self.onus.iter().enumerate() {
            if !onu_ids.insert(o.onu_id) {
                errs.push(format!("onus[{i}].onu_id: duplicate onu_id {}", o.onu_id));
            }
            if !(o.fiber_km >= 0.0 && o.fiber_km.is_finite()) {
                errs.push(format!("onus[{i}].fiber_km: must be >= 0, got {}", o.fiber_km));
            }
            let mut claim = |id: TcontId, field: &str| {
                let here = format!("onus[{i}].{field}");
                if let Some(prev) = tconts.get(&id) {
                    errs.push(format!("{here}: duplicate tcont_id {id} (already used by {prev})"));
                } else {
                    tconts.insert(id, here);
                }
            };
            claim(o.fronthaul_tcont, "fronthaul_tcont");
            fronthaul_of.entry(o.onu_id).or_insert(o.fronthaul_tcont);
            match (&o.background_tcont, &o.background) {
                (Some(t), _) => claim(*t, "background_tcont"),
                (None, Some(_)) => errs.push(format!(
                    "onus[{i}].background: profile given but no background_tcont"
                )),
                (None, None) => {}
            }
            if let Some(p) = &o.background {
                errs.extend(
                    p.validate()
                        .into_iter()
                        .map(|e| format!("onus[{i}].background: {e}")),
                );
            }
        }

        let mut ue_ids = BTreeSet::new();
        for (i, u) in self.ues.iter().enumerate() {
            if !ue_ids.insert(u.ue_id) {
                errs.push(format!("ues[{i}].ue_id: duplicate ue_id {}", u.ue_id));
            }
            match fronthaul_of.get(&u.onu) {
                None => errs.push(format!("ues[{i}].onu: unknown onu {}", u.onu)),
                Some(&fh) if fh != u.tcont => errs.push(format!(
                    "ues[{i}].tcont: unknown tcont {} (onu {} carries fronthaul on tcont {fh})",
                    u.tcont, u.onu
                )),
                Some(_) => {}
            }
            if mcs_entry(u.mcs).is_err() {
                errs.push(format!("ues[{i}].mcs: unknown MCS index {}", u.mcs));
            }
            errs.extend(
                u.traffic
                    .validate()
                    .into_iter()
                    .map(|e| format!("ues[{i}].traffic: {e}")),
            );
        }
        errs
    }

    /// SHA-256 over the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn ue_tcont_map(&self) -> BTreeMap<UeId, TcontId> {
        self.ues.iter().map(|u| (u.ue_id, u.tcont)).collect()
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text)
}
