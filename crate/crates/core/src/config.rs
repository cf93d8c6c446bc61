//! Structured-text configuration files.
//!
//! The on-disk format is a JSON tree with explicit units in the field names
//! (`_kV`, `_mH`, `_ms`, `_km`, ...). Sections: `system`, `cable_types`,
//! `buses`, `cables`, `converters`, `breakers`, `zones`, `scenarios`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::model::*;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSection {
    pub name: String,
    #[serde(rename = "u_dc_kV")]
    pub u_dc_kv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CableTypeSection {
    pub r_ohm_per_km: f64,
    #[serde(rename = "l_mH_per_km")]
    pub l_mh_per_km: f64,
    #[serde(rename = "c_uF_per_km")]
    pub c_uf_per_km: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CableSection {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_km: f64,
    #[serde(rename = "type")]
    pub cable_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConverterSection {
    pub id: String,
    pub bus: String,
    #[serde(rename = "s_MVA")]
    pub s_mva: f64,
    #[serde(rename = "p_MW")]
    pub p_mw: f64,
    #[serde(rename = "u_ac_kV")]
    pub u_ac_kv: f64,
    #[serde(rename = "arm_peak_rated_kA")]
    pub arm_peak_rated_ka: f64,
    pub i_ac_max_pu: f64,
    #[serde(rename = "k_pu")]
    pub k_overcurrent_pu: f64,
    pub r_arm_ohm: f64,
    #[serde(rename = "l_arm_mH")]
    pub l_arm_mh: f64,
    #[serde(rename = "c_sm_uF")]
    pub c_sm_uf: f64,
    pub n_sm: u32,
    pub control: ControlMode,
    #[serde(rename = "droop_kV_per_MW", default, skip_serializing_if = "Option::is_none")]
    pub droop_kv_per_mw: Option<f64>,
    pub frt: FrtRequirement,
    #[serde(default = "default_p_min")]
    pub p_min_pu: f64,
    #[serde(default = "default_p_max")]
    pub p_max_pu: f64,
}

fn default_p_min() -> f64 {
    -1.0
}
fn default_p_max() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakerSection {
    pub id: String,
    pub bus: String,
    pub cable: String,
    #[serde(rename = "i_rated_kA")]
    pub i_rated_ka: f64,
    #[serde(rename = "i_max_kA")]
    pub i_max_ka: f64,
    pub t_cb_ms: f64,
    #[serde(default = "default_t_relay")]
    pub t_relay_ms: f64,
    #[serde(default = "default_clamp")]
    pub clamp_pu: f64,
    #[serde(rename = "l_dc_mH", default = "default_l_dc")]
    pub l_dc_mh: f64,
}

fn default_t_relay() -> f64 {
    DEFAULT_T_RELAY_MS
}
fn default_clamp() -> f64 {
    1.5
}
fn default_l_dc() -> f64 {
    100.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ZoneSection {
    #[serde(default)]
    pub buses: Vec<String>,
    #[serde(default)]
    pub cables: Vec<String>,
    #[serde(default)]
    pub converters: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub id: String,
    #[serde(rename = "k_pu")]
    pub k_pu: f64,
    #[serde(rename = "i_cb_max_kA")]
    pub i_cb_max_ka: f64,
    pub t_cb_ms: f64,
    #[serde(default = "default_t_relay")]
    pub t_relay_ms: f64,
    #[serde(default)]
    pub setpoints_pu: BTreeMap<String, f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_kpi_target")]
    pub kpi_target: f64,
    #[serde(default = "default_alpha_cap")]
    pub alpha_cap: f64,
    #[serde(default = "default_dt_us")]
    pub dt_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_ms: Option<f64>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_kpi_target() -> f64 {
    DEFAULT_KPI_TARGET
}
fn default_alpha_cap() -> f64 {
    DEFAULT_ALPHA_CAP
}
fn default_dt_us() -> f64 {
    DEFAULT_DT_US
}

/// Root of the configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub cable_types: BTreeMap<String, CableTypeSection>,
    pub buses: Vec<String>,
    pub cables: Vec<CableSection>,
    pub converters: Vec<ConverterSection>,
    pub breakers: Vec<BreakerSection>,
    pub zones: BTreeMap<String, ZoneSection>,
    pub scenarios: Vec<ScenarioSection>,
}

impl ConfigFile {
    pub fn to_model(&self) -> Result<(GridModel, Vec<DesignScenario>), ConfigError> {
        let u_dc = self.system.u_dc_kv;
        let mut cables = Vec::new();
        for c in &self.cables {
            let ct = self.cable_types.get(&c.cable_type).ok_or_else(|| {
                ConfigError::UnknownReference(format!(
                    "cable {}: cable type {}",
                    c.id, c.cable_type
                ))
            })?;
            cables.push(Cable {
                id: CableId::new(&c.id),
                from: BusId::new(&c.from),
                to: BusId::new(&c.to),
                params: CableParams {
                    length_km: c.length_km,
                    r_ohm_per_km: ct.r_ohm_per_km,
                    l_mh_per_km: ct.l_mh_per_km,
                    c_uf_per_km: ct.c_uf_per_km,
                },
            });
        }
        let converters = self
            .converters
            .iter()
            .map(|c| Converter {
                id: ConverterId::new(&c.id),
                bus: BusId::new(&c.bus),
                params: ConverterParams {
                    s_mva: c.s_mva,
                    p_mw: c.p_mw,
                    u_dc_kv: u_dc,
                    u_ac_kv: c.u_ac_kv,
                    arm_peak_rated_ka: c.arm_peak_rated_ka,
                    i_ac_max_pu: c.i_ac_max_pu,
                    k_overcurrent: c.k_overcurrent_pu,
                    r_arm_ohm: c.r_arm_ohm,
                    l_arm_mh: c.l_arm_mh,
                    c_sm_uf: c.c_sm_uf,
                    n_sm: c.n_sm,
                    control: c.control,
                    droop_kv_per_mw: c.droop_kv_per_mw,
                    frt: c.frt,
                    p_min_pu: c.p_min_pu,
                    p_max_pu: c.p_max_pu,
                },
            })
            .collect();
        let breakers = self
            .breakers
            .iter()
            .map(|b| Breaker {
                id: BreakerId::new(&b.id),
                bus: BusId::new(&b.bus),
                cable: CableId::new(&b.cable),
                params: BreakerParams {
                    i_rated_ka: b.i_rated_ka,
                    i_max_ka: b.i_max_ka,
                    t_cb_ms: b.t_cb_ms,
                    t_relay_ms: b.t_relay_ms,
                    clamp_pu: b.clamp_pu,
                },
                l_dc_mh: b.l_dc_mh,
            })
            .collect();
        let zones = self
            .zones
            .iter()
            .map(|(z, m)| {
                (
                    ZoneId::new(z),
                    ZoneMembers {
                        buses: m.buses.iter().map(BusId::new).collect(),
                        cables: m.cables.iter().map(CableId::new).collect(),
                        converters: m.converters.iter().map(ConverterId::new).collect(),
                    },
                )
            })
            .collect();

        let model = GridModel {
            name: self.system.name.clone(),
            u_dc_kv: u_dc,
            buses: self.buses.iter().map(BusId::new).collect(),
            cables,
            converters,
            breakers,
            zones,
        };

        let scenarios: Vec<DesignScenario> = self
            .scenarios
            .iter()
            .map(|s| DesignScenario {
                id: ScenarioId::new(&s.id),
                k_pu: s.k_pu,
                i_cb_max_ka: s.i_cb_max_ka,
                t_cb_ms: s.t_cb_ms,
                t_relay_ms: s.t_relay_ms,
                setpoints_pu: s
                    .setpoints_pu
                    .iter()
                    .map(|(k, v)| (ConverterId::new(k), *v))
                    .collect(),
                epsilon: s.epsilon,
                kpi_target: s.kpi_target,
                alpha_cap: s.alpha_cap,
                dt_us: s.dt_us,
                horizon_ms: s.horizon_ms,
            })
            .collect();

        let mut violations = model.validate();
        for s in &scenarios {
            violations.extend(validate_scenario(&model, s));
        }
        if !violations.is_empty() {
            violations.sort();
            return Err(ConfigError::Validation(violations));
        }
        Ok((model, scenarios))
    }

    /// Rebuild a config tree from a model + scenarios. Cable types are
    /// deduplicated by their parameter triple.
    pub fn from_model(model: &GridModel, scenarios: &[DesignScenario]) -> ConfigFile {
        let mut cable_types: BTreeMap<String, CableTypeSection> = BTreeMap::new();
        let mut type_of: BTreeMap<CableId, String> = BTreeMap::new();
        for c in &model.cables {
            let key = cable_types
                .iter()
                .find(|(_, t)| {
                    t.r_ohm_per_km == c.params.r_ohm_per_km
                        && t.l_mh_per_km == c.params.l_mh_per_km
                        && t.c_uf_per_km == c.params.c_uf_per_km
                })
                .map(|(k, _)| k.clone());
            let key = key.unwrap_or_else(|| {
                let k = format!("type{}", cable_types.len() + 1);
                cable_types.insert(
                    k.clone(),
                    CableTypeSection {
                        r_ohm_per_km: c.params.r_ohm_per_km,
                        l_mh_per_km: c.params.l_mh_per_km,
                        c_uf_per_km: c.params.c_uf_per_km,
                    },
                );
                k
            });
            type_of.insert(c.id.clone(), key);
        }

        ConfigFile {
            system: SystemSection {
                name: model.name.clone(),
                u_dc_kv: model.u_dc_kv,
            },
            cable_types,
            buses: model.buses.iter().map(|b| b.0.clone()).collect(),
            cables: model
                .cables
                .iter()
                .map(|c| CableSection {
                    id: c.id.0.clone(),
                    from: c.from.0.clone(),
                    to: c.to.0.clone(),
                    length_km: c.params.length_km,
                    cable_type: type_of[&c.id].clone(),
                })
                .collect(),
            converters: model
                .converters
                .iter()
                .map(|c| ConverterSection {
                    id: c.id.0.clone(),
                    bus: c.bus.0.clone(),
                    s_mva: c.params.s_mva,
                    p_mw: c.params.p_mw,
                    u_ac_kv: c.params.u_ac_kv,
                    arm_peak_rated_ka: c.params.arm_peak_rated_ka,
                    i_ac_max_pu: c.params.i_ac_max_pu,
                    k_overcurrent_pu: c.params.k_overcurrent,
                    r_arm_ohm: c.params.r_arm_ohm,
                    l_arm_mh: c.params.l_arm_mh,
                    c_sm_uf: c.params.c_sm_uf,
                    n_sm: c.params.n_sm,
                    control: c.params.control,
                    droop_kv_per_mw: c.params.droop_kv_per_mw,
                    frt: c.params.frt,
                    p_min_pu: c.params.p_min_pu,
                    p_max_pu: c.params.p_max_pu,
                })
                .collect(),
            breakers: model
                .breakers
                .iter()
                .map(|b| BreakerSection {
                    id: b.id.0.clone(),
                    bus: b.bus.0.clone(),
                    cable: b.cable.0.clone(),
                    i_rated_ka: b.params.i_rated_ka,
                    i_max_ka: b.params.i_max_ka,
                    t_cb_ms: b.params.t_cb_ms,
                    t_relay_ms: b.params.t_relay_ms,
                    clamp_pu: b.params.clamp_pu,
                    l_dc_mh: b.l_dc_mh,
                })
                .collect(),
            zones: model
                .zones
                .iter()
                .map(|(z, m)| {
                    (
                        z.0.clone(),
                        ZoneSection {
                            buses: m.buses.iter().map(|b| b.0.clone()).collect(),
                            cables: m.cables.iter().map(|c| c.0.clone()).collect(),
                            converters: m.converters.iter().map(|c| c.0.clone()).collect(),
                        },
                    )
                })
                .collect(),
            scenarios: scenarios
                .iter()
                .map(|s| ScenarioSection {
                    id: s.id.0.clone(),
                    k_pu: s.k_pu,
                    i_cb_max_ka: s.i_cb_max_ka,
                    t_cb_ms: s.t_cb_ms,
                    t_relay_ms: s.t_relay_ms,
                    setpoints_pu: s
                        .setpoints_pu
                        .iter()
                        .map(|(k, v)| (k.0.clone(), *v))
                        .collect(),
                    epsilon: s.epsilon,
                    kpi_target: s.kpi_target,
                    alpha_cap: s.alpha_cap,
                    dt_us: s.dt_us,
                    horizon_ms: s.horizon_ms,
                })
                .collect(),
        }
    }
}

/// Load and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<(GridModel, Vec<DesignScenario>), ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let cfg: ConfigFile = serde_json::from_str(&text)?;
    cfg.to_model()
}

/// Parse a configuration from a string (validated).
pub fn parse_config(text: &str) -> Result<(GridModel, Vec<DesignScenario>), ConfigError> {
    let cfg: ConfigFile = serde_json::from_str(text)?;
    cfg.to_model()
}

/// Serialize a model + scenarios back to the config text format.
pub fn serialize_config(model: &GridModel, scenarios: &[DesignScenario]) -> String {
    let cfg = ConfigFile::from_model(model, scenarios);
    serde_json::to_string_pretty(&cfg).expect("config serialization cannot fail")
}

/// Stable hash of a config file's semantic content, used to tie reports to
/// the config they were produced from.
pub fn config_hash(model: &GridModel, scenarios: &[DesignScenario]) -> String {
    let canonical = serialize_config(model, scenarios);
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_round_trips() {
        let text = r#"{
            "system": {"name": "mini", "u_dc_kV": 525.0},
            "cable_types": {"xlpe": {"r_ohm_per_km": 0.011, "l_mH_per_km": 0.21, "c_uF_per_km": 0.22}},
            "buses": ["B1", "B2"],
            "cables": [{"id": "c1", "from": "B1", "to": "B2", "length_km": 100.0, "type": "xlpe"}],
            "converters": [
                {"id": "C1", "bus": "B1", "s_MVA": 1034, "p_MW": 1000, "u_ac_kV": 273,
                 "arm_peak_rated_kA": 2.2, "i_ac_max_pu": 1.2, "k_pu": 1.5,
                 "r_arm_ohm": 0.4, "l_arm_mH": 15, "c_sm_uF": 6000, "n_sm": 276,
                 "control": "constant-pq", "frt": "continuous-operation"},
                {"id": "C2", "bus": "B2", "s_MVA": 1034, "p_MW": 1000, "u_ac_kV": 273,
                 "arm_peak_rated_kA": 2.2, "i_ac_max_pu": 1.2, "k_pu": 1.5,
                 "r_arm_ohm": 0.4, "l_arm_mH": 15, "c_sm_uF": 6000, "n_sm": 276,
                 "control": "dc-voltage-droop", "droop_kV_per_MW": 0.02,
                 "frt": "continuous-operation"}
            ],
            "breakers": [{"id": "B12", "bus": "B1", "cable": "c1",
                          "i_rated_kA": 3, "i_max_kA": 12, "t_cb_ms": 2}],
            "zones": {
                "Z1": {"buses": ["B1"], "converters": ["C1"]},
                "Z2": {"buses": ["B2"], "cables": ["c1"], "converters": ["C2"]}
            },
            "scenarios": [{"id": "s1", "k_pu": 1.5, "i_cb_max_kA": 12, "t_cb_ms": 2}]
        }"#;
        let (model, scens) = parse_config(text).expect("valid config");
        assert_eq!(model.buses.len(), 2);
        assert_eq!(scens.len(), 1);
        assert!((scens[0].epsilon - 0.05).abs() < 1e-12);
        // defaults
        assert!((model.breakers[0].params.t_relay_ms - 0.1).abs() < 1e-12);

        let text2 = serialize_config(&model, &scens);
        let (model2, scens2) = parse_config(&text2).expect("round trip");
        assert_eq!(model, model2);
        assert_eq!(scens, scens2);
    }

    #[test]
    fn k_at_unity_is_rejected() {
        let text = r#"{
            "system": {"name": "bad", "u_dc_kV": 525.0},
            "cable_types": {"xlpe": {"r_ohm_per_km": 0.011, "l_mH_per_km": 0.21, "c_uF_per_km": 0.22}},
            "buses": ["B1"],
            "cables": [],
            "converters": [
                {"id": "C1", "bus": "B1", "s_MVA": 1034, "p_MW": 1000, "u_ac_kV": 273,
                 "arm_peak_rated_kA": 2.2, "i_ac_max_pu": 1.2, "k_pu": 1.0,
                 "r_arm_ohm": 0.4, "l_arm_mH": 15, "c_sm_uF": 6000, "n_sm": 276,
                 "control": "constant-pq", "frt": "continuous-operation"}
            ],
            "breakers": [],
            "zones": {"Z1": {"buses": ["B1"], "converters": ["C1"]}},
            "scenarios": []
        }"#;
        match parse_config(text) {
            Err(ConfigError::Validation(v)) => {
                assert!(v.iter().any(|m| m.contains("K must exceed 1")), "{v:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unassigned_converter_is_reported() {
        let text = r#"{
            "system": {"name": "bad", "u_dc_kV": 525.0},
            "cable_types": {"xlpe": {"r_ohm_per_km": 0.011, "l_mH_per_km": 0.21, "c_uF_per_km": 0.22}},
            "buses": ["B1"],
            "cables": [],
            "converters": [
                {"id": "C1", "bus": "B1", "s_MVA": 1034, "p_MW": 1000, "u_ac_kV": 273,
                 "arm_peak_rated_kA": 2.2, "i_ac_max_pu": 1.2, "k_pu": 1.5,
                 "r_arm_ohm": 0.4, "l_arm_mH": 15, "c_sm_uF": 6000, "n_sm": 276,
                 "control": "constant-pq", "frt": "continuous-operation"}
            ],
            "breakers": [],
            "zones": {"Z1": {"buses": ["B1"]}},
            "scenarios": []
        }"#;
        match parse_config(text) {
            Err(ConfigError::Validation(v)) => {
                assert!(
                    v.iter().any(|m| m == "converter C1 unassigned to any zone"),
                    "{v:?}"
                );
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
