//! Grid data model: buses, cables, converters, breakers, protection zones and
//! design scenarios.
//!
//! Everything is stored in a single consistent unit system: kV, kA, ms, ohm,
//! mH and microfarad at the boundary (converted to milli-farad internally by
//! the solver, where kV * mF / ms = kA). Power is MW/MVA, since kV * kA = MW.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Converter outer control mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// DC-voltage droop: the converter shifts its voltage command against
    /// power deviation and absorbs system imbalance.
    DcVoltageDroop,
    /// Constant active power (PI on the power error).
    ConstantPq,
}

/// DC fault ride-through requirement of a converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrtRequirement {
    /// Must remain operational during out-of-zone faults; imposes an
    /// inductor constraint.
    ContinuousOperation,
    /// May block; imposes no inductor constraint.
    MayBlock,
}

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(BusId);
id_type!(CableId);
id_type!(ConverterId);
id_type!(BreakerId);
id_type!(ZoneId);
id_type!(ScenarioId);

/// Converter electrical and control parameters (per pole).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    /// Rated apparent power per pole (MVA).
    pub s_mva: f64,
    /// Rated active power per pole (MW).
    pub p_mw: f64,
    /// Rated DC voltage (kV).
    pub u_dc_kv: f64,
    /// Rated AC voltage, converter side, line-to-line rms (kV).
    pub u_ac_kv: f64,
    /// Rated peak arm current (kA).
    pub arm_peak_rated_ka: f64,
    /// AC current limit in pu of rated peak AC current.
    pub i_ac_max_pu: f64,
    /// Overcurrent (blocking) factor in pu of rated peak arm current.
    pub k_overcurrent: f64,
    /// Arm resistance (ohm).
    pub r_arm_ohm: f64,
    /// Arm inductance (mH).
    pub l_arm_mh: f64,
    /// Submodule capacitance (uF).
    pub c_sm_uf: f64,
    /// Submodules per arm.
    pub n_sm: u32,
    /// Outer control mode.
    pub control: ControlMode,
    /// Droop gain (kV per MW); required for droop mode.
    pub droop_kv_per_mw: Option<f64>,
    /// DC fault ride-through requirement.
    pub frt: FrtRequirement,
    /// Minimum active power setpoint (pu); 0 for converters that cannot
    /// invert (e.g. offshore wind infeed).
    pub p_min_pu: f64,
    /// Maximum active power setpoint (pu).
    pub p_max_pu: f64,
}

impl ConverterParams {
    /// Rated DC current (kA).
    pub fn rated_dc_current_ka(&self) -> f64 {
        self.p_mw / self.u_dc_kv
    }

    /// Converter equivalent inductance seen from the DC terminal (mH).
    pub fn equivalent_inductance_mh(&self) -> f64 {
        (2.0 / 3.0) * self.l_arm_mh
    }

    /// Converter equivalent resistance seen from the DC terminal (ohm).
    pub fn equivalent_resistance_ohm(&self) -> f64 {
        (2.0 / 3.0) * self.r_arm_ohm
    }

    /// AC current limit converted to kA peak phase current.
    pub fn i_ac_max_ka(&self) -> f64 {
        self.i_ac_max_pu * std::f64::consts::SQRT_2 * self.s_mva / (3f64.sqrt() * self.u_ac_kv)
    }

    /// Aggregate DC-side capacitance of the submodule stacks, per pole (uF).
    pub fn aggregate_dc_capacitance_uf(&self) -> f64 {
        6.0 * self.c_sm_uf / self.n_sm as f64
    }

    /// Arm-current estimate used for the blocking decision (kA).
    pub fn arm_current_estimate_ka(&self, i_dc_ka: f64) -> f64 {
        i_dc_ka.abs() / 3.0 + self.i_ac_max_ka() / 2.0
    }

    /// Blocking threshold on the arm-current estimate (kA).
    pub fn blocking_threshold_ka(&self) -> f64 {
        self.k_overcurrent * self.arm_peak_rated_ka
    }

    /// AC-side active power capability at the current limit (MW).
    pub fn p_ac_limit_mw(&self) -> f64 {
        self.i_ac_max_pu * self.s_mva
    }
}

/// DC circuit breaker parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakerParams {
    /// Rated (continuous) current (kA).
    pub i_rated_ka: f64,
    /// Maximum interruptible current (kA).
    pub i_max_ka: f64,
    /// Internal current commutation time (ms).
    pub t_cb_ms: f64,
    /// Relay / protection delay (ms).
    pub t_relay_ms: f64,
    /// Varistor clamp voltage in pu of rated DC voltage.
    pub clamp_pu: f64,
}

impl BreakerParams {
    /// Fault neutralization time t_n = t_relay + t_cb (ms).
    pub fn neutralization_time_ms(&self) -> f64 {
        self.t_relay_ms + self.t_cb_ms
    }
}

/// Per-km cable data plus length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableParams {
    pub length_km: f64,
    /// Series resistance (ohm/km).
    pub r_ohm_per_km: f64,
    /// Series inductance (mH/km).
    pub l_mh_per_km: f64,
    /// Shunt capacitance (uF/km).
    pub c_uf_per_km: f64,
}

impl CableParams {
    /// Surge impedance Z_c = sqrt(L'/C') (ohm). mH/mF = ohm^2.
    pub fn surge_impedance_ohm(&self) -> f64 {
        (self.l_mh_per_km / (self.c_uf_per_km * 1e-3)).sqrt()
    }

    /// Wave velocity (km/ms).
    pub fn wave_velocity_km_per_ms(&self) -> f64 {
        1.0 / (self.l_mh_per_km * self.c_uf_per_km * 1e-3).sqrt()
    }

    /// One-way travel delay (ms).
    pub fn travel_delay_ms(&self) -> f64 {
        self.length_km / self.wave_velocity_km_per_ms()
    }

    /// Total series resistance (ohm), inductance (mH), capacitance (uF).
    pub fn totals(&self) -> (f64, f64, f64) {
        (
            self.r_ohm_per_km * self.length_km,
            self.l_mh_per_km * self.length_km,
            self.c_uf_per_km * self.length_km,
        )
    }
}

/// A cable between two buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cable {
    pub id: CableId,
    pub from: BusId,
    pub to: BusId,
    pub params: CableParams,
}

/// A converter attached to a bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Converter {
    pub id: ConverterId,
    pub bus: BusId,
    pub params: ConverterParams,
}

/// A breaker (with its series DC inductor) between a bus and one end of a
/// cable. The bus side and the cable belong to different protection zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breaker {
    pub id: BreakerId,
    /// Bus the breaker connects to.
    pub bus: BusId,
    /// Cable whose near end is connected through the breaker + inductor.
    pub cable: CableId,
    pub params: BreakerParams,
    /// Series fault-current-limiting inductance (mH). Starting value; the
    /// sizing algorithm overrides it per scenario.
    pub l_dc_mh: f64,
}

/// Membership sets of one protection zone.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZoneMembers {
    pub buses: BTreeSet<BusId>,
    pub cables: BTreeSet<CableId>,
    pub converters: BTreeSet<ConverterId>,
}

/// A design scenario: the key input triple plus timing and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignScenario {
    pub id: ScenarioId,
    /// Converter overcurrent factor applied to every converter (pu).
    pub k_pu: f64,
    /// Breaker maximum interruptible current applied to every breaker (kA).
    pub i_cb_max_ka: f64,
    /// Breaker internal commutation time (ms).
    pub t_cb_ms: f64,
    /// Relay delay (ms).
    pub t_relay_ms: f64,
    /// Optional explicit per-converter setpoints (pu, + = rectifier); used by
    /// replay-style runs. The sizing loop derives its own critical flows.
    #[serde(default)]
    pub setpoints_pu: BTreeMap<ConverterId, f64>,
    /// Convergence tolerance for the iterative analytical stage (fraction).
    pub epsilon: f64,
    /// Current-margin target for the refinement stage (fraction).
    pub kpi_target: f64,
    /// Absolute cap on the per-iteration reduction rate (fraction).
    pub alpha_cap: f64,
    /// Simulation step (us).
    pub dt_us: f64,
    /// Optional fixed simulation horizon (ms); derived from timing if absent.
    pub horizon_ms: Option<f64>,
}

impl DesignScenario {
    pub fn neutralization_time_ms(&self) -> f64 {
        self.t_relay_ms + self.t_cb_ms
    }
}

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_KPI_TARGET: f64 = 0.05;
pub const DEFAULT_ALPHA_CAP: f64 = 0.4;
pub const DEFAULT_DT_US: f64 = 20.0;
pub const DEFAULT_T_RELAY_MS: f64 = 0.1;

/// The complete grid model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub name: String,
    /// Rated pole-to-ground DC voltage (kV).
    pub u_dc_kv: f64,
    pub buses: Vec<BusId>,
    pub cables: Vec<Cable>,
    pub converters: Vec<Converter>,
    pub breakers: Vec<Breaker>,
    pub zones: BTreeMap<ZoneId, ZoneMembers>,
}

impl GridModel {
    pub fn cable(&self, id: &CableId) -> Option<&Cable> {
        self.cables.iter().find(|c| &c.id == id)
    }

    pub fn converter(&self, id: &ConverterId) -> Option<&Converter> {
        self.converters.iter().find(|c| &c.id == id)
    }

    pub fn breaker(&self, id: &BreakerId) -> Option<&Breaker> {
        self.breakers.iter().find(|b| &b.id == id)
    }

    pub fn breaker_mut(&mut self, id: &BreakerId) -> Option<&mut Breaker> {
        self.breakers.iter_mut().find(|b| &b.id == id)
    }

    /// Zone containing the given bus, if any.
    pub fn zone_of_bus(&self, bus: &BusId) -> Option<&ZoneId> {
        self.zones.iter().find(|(_, m)| m.buses.contains(bus)).map(|(z, _)| z)
    }

    /// Zone containing the given cable, if any.
    pub fn zone_of_cable(&self, cable: &CableId) -> Option<&ZoneId> {
        self.zones
            .iter()
            .find(|(_, m)| m.cables.contains(cable))
            .map(|(z, _)| z)
    }

    /// Zone containing the given converter, if any.
    pub fn zone_of_converter(&self, conv: &ConverterId) -> Option<&ZoneId> {
        self.zones
            .iter()
            .find(|(_, m)| m.converters.contains(conv))
            .map(|(z, _)| z)
    }

    /// The zone pair separated by a breaker: (bus-side zone, cable-side zone).
    pub fn breaker_zone_pair(&self, breaker: &Breaker) -> Option<(ZoneId, ZoneId)> {
        let bus_zone = self.zone_of_bus(&breaker.bus)?.clone();
        let cable_zone = self.zone_of_cable(&breaker.cable)?.clone();
        Some((bus_zone, cable_zone))
    }

    /// Zone adjacency: 1 entry per unordered zone pair that shares exactly one
    /// breaker-separated boundary. Returned sorted for determinism.
    pub fn zone_adjacency(&self) -> BTreeMap<(ZoneId, ZoneId), BreakerId> {
        let mut adj = BTreeMap::new();
        for b in &self.breakers {
            if let Some((zi, zj)) = self.breaker_zone_pair(b) {
                let key = if zi <= zj { (zi, zj) } else { (zj, zi) };
                adj.insert(key, b.id.clone());
            }
        }
        adj
    }

    /// Whether zones i and j are adjacent (share a breaker boundary).
    pub fn zones_adjacent(&self, i: &ZoneId, j: &ZoneId) -> bool {
        let key = if i <= j {
            (i.clone(), j.clone())
        } else {
            (j.clone(), i.clone())
        };
        self.zone_adjacency().contains_key(&key)
    }

    /// Connection cable of a converter: the single cable whose one end is the
    /// converter bus and where that bus hosts nothing else. Converters sitting
    /// directly on a junction bus have no connection cable.
    pub fn connection_cable(&self, conv: &Converter) -> Option<&Cable> {
        let incident: Vec<&Cable> = self
            .cables
            .iter()
            .filter(|c| c.from == conv.bus || c.to == conv.bus)
            .collect();
        let breaker_here = self.breakers.iter().any(|b| b.bus == conv.bus);
        let converters_here = self
            .converters
            .iter()
            .filter(|c| c.bus == conv.bus)
            .count();
        if incident.len() == 1 && !breaker_here && converters_here == 1 {
            Some(incident[0])
        } else {
            None
        }
    }

    /// Equivalent inductance of a converter including its connection cable (mH).
    pub fn converter_l_eq_mh(&self, conv: &Converter) -> f64 {
        let l_cab = self
            .connection_cable(conv)
            .map(|c| c.params.l_mh_per_km * c.params.length_km)
            .unwrap_or(0.0);
        conv.params.equivalent_inductance_mh() + l_cab
    }

    /// Apply a scenario's key design inputs to every converter and breaker,
    /// returning the adjusted model. The sizing battery varies (K, I_cb_max,
    /// t_cb, t_relay) uniformly across the fleet.
    pub fn with_scenario_inputs(&self, scen: &DesignScenario) -> GridModel {
        let mut m = self.clone();
        for c in &mut m.converters {
            c.params.k_overcurrent = scen.k_pu;
        }
        for b in &mut m.breakers {
            b.params.i_max_ka = scen.i_cb_max_ka;
            b.params.t_cb_ms = scen.t_cb_ms;
            b.params.t_relay_ms = scen.t_relay_ms;
        }
        m
    }

    /// Validate the model. Returns a deterministic, order-stable list of
    /// human-readable violations; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();

        for c in &self.converters {
            let p = &c.params;
            let id = &c.id;
            if p.k_overcurrent <= 1.0 {
                v.push(format!("converter {id}: K must exceed 1"));
            }
            if p.i_ac_max_pu < 1.0 {
                v.push(format!("converter {id}: i_ac_max must be at least 1 pu"));
            }
            for (name, val) in [
                ("S", p.s_mva),
                ("P", p.p_mw),
                ("U_dc", p.u_dc_kv),
                ("u_ac", p.u_ac_kv),
                ("rated peak arm current", p.arm_peak_rated_ka),
                ("R_arm", p.r_arm_ohm),
                ("L_arm", p.l_arm_mh),
                ("C_sm", p.c_sm_uf),
            ] {
                if val <= 0.0 {
                    v.push(format!("converter {id}: {name} must be positive"));
                }
            }
            if p.control == ControlMode::DcVoltageDroop && p.droop_kv_per_mw.is_none() {
                v.push(format!("converter {id}: droop mode requires a droop gain"));
            }
            if p.p_min_pu > p.p_max_pu {
                v.push(format!("converter {id}: p_min exceeds p_max"));
            }
            if self.zone_of_converter(id).is_none() {
                v.push(format!("converter {id} unassigned to any zone"));
            }
            if !self.buses.contains(&c.bus) {
                v.push(format!("converter {id}: unknown bus {}", c.bus));
            }
        }

        for b in &self.breakers {
            let id = &b.id;
            let p = &b.params;
            if p.i_rated_ka <= 0.0 {
                v.push(format!("breaker {id}: rated current must be positive"));
            }
            if p.i_max_ka <= p.i_rated_ka {
                v.push(format!("breaker {id}: I_cb_max must exceed I_cb_r"));
            }
            if p.t_cb_ms <= 0.0 {
                v.push(format!("breaker {id}: t_cb must be positive"));
            }
            if p.t_relay_ms < 0.0 {
                v.push(format!("breaker {id}: t_relay must be non-negative"));
            }
            if p.clamp_pu <= 1.0 {
                v.push(format!("breaker {id}: varistor clamp factor must exceed 1"));
            }
            if b.l_dc_mh < 0.0 {
                v.push(format!("breaker {id}: series inductance must be non-negative"));
            }
            if !self.buses.contains(&b.bus) {
                v.push(format!("breaker {id}: unknown bus {}", b.bus));
            }
            match self.cable(&b.cable) {
                None => v.push(format!("breaker {id}: unknown cable {}", b.cable)),
                Some(c) => {
                    if c.from != b.bus && c.to != b.bus {
                        v.push(format!(
                            "breaker {id}: cable {} does not terminate at bus {}",
                            b.cable, b.bus
                        ));
                    }
                    match (self.zone_of_bus(&b.bus), self.zone_of_cable(&b.cable)) {
                        (Some(zi), Some(zj)) if zi == zj => v.push(format!(
                            "breaker {id} not on a zone boundary (bus and cable both in zone {zi})"
                        )),
                        _ => {}
                    }
                }
            }
        }

        for c in &self.cables {
            let id = &c.id;
            let p = &c.params;
            if p.length_km < 0.0 {
                v.push(format!("cable {id}: length must be non-negative"));
            }
            for (name, val) in [
                ("R'", p.r_ohm_per_km),
                ("L'", p.l_mh_per_km),
                ("C'", p.c_uf_per_km),
            ] {
                if val <= 0.0 {
                    v.push(format!("cable {id}: {name} must be positive"));
                }
            }
            for bus in [&c.from, &c.to] {
                if !self.buses.contains(bus) {
                    v.push(format!("cable {id}: unknown bus {bus}"));
                }
            }
        }

        // Zone partition: every element in exactly one zone.
        let count_zones = |pred: &dyn Fn(&ZoneMembers) -> bool| -> usize {
            self.zones.values().filter(|m| pred(m)).count()
        };
        for bus in &self.buses {
            let n = count_zones(&|m| m.buses.contains(bus));
            if n == 0 {
                v.push(format!("bus {bus} unassigned to any zone"));
            } else if n > 1 {
                v.push(format!("bus {bus} assigned to {n} zones"));
            }
        }
        for c in &self.cables {
            let n = count_zones(&|m| m.cables.contains(&c.id));
            if n == 0 {
                v.push(format!("cable {} unassigned to any zone", c.id));
            } else if n > 1 {
                v.push(format!("cable {} assigned to {n} zones", c.id));
            }
        }
        for c in &self.converters {
            let n = count_zones(&|m| m.converters.contains(&c.id));
            if n > 1 {
                v.push(format!("converter {} assigned to {n} zones", c.id));
            }
        }

        // Each adjacent zone pair must share exactly one breaker.
        let mut pair_count: BTreeMap<(ZoneId, ZoneId), usize> = BTreeMap::new();
        for b in &self.breakers {
            if let Some((zi, zj)) = self.breaker_zone_pair(b) {
                let key = if zi <= zj { (zi, zj) } else { (zj, zi) };
                *pair_count.entry(key).or_insert(0) += 1;
            }
        }
        for ((zi, zj), n) in &pair_count {
            if *n > 1 {
                v.push(format!("zones {zi} and {zj} share {n} breakers (expected one)"));
            }
        }

        // Electrical connectivity of the bus graph (cables + breaker branches).
        if !self.buses.is_empty() {
            let idx: BTreeMap<&BusId, usize> =
                self.buses.iter().enumerate().map(|(i, b)| (b, i)).collect();
            let mut dsu: Vec<usize> = (0..self.buses.len()).collect();
            fn find(dsu: &mut Vec<usize>, i: usize) -> usize {
                if dsu[i] != i {
                    let r = find(dsu, dsu[i]);
                    dsu[i] = r;
                }
                dsu[i]
            }
            for c in &self.cables {
                if let (Some(&a), Some(&b)) = (idx.get(&c.from), idx.get(&c.to)) {
                    let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
                    dsu[ra] = rb;
                }
            }
            let root = find(&mut dsu, 0);
            let mut disconnected: Vec<&BusId> = Vec::new();
            for (bus, &i) in &idx {
                if find(&mut dsu, i) != root {
                    disconnected.push(bus);
                }
            }
            if !disconnected.is_empty() {
                v.push(format!(
                    "grid is not connected: buses {} unreachable from {}",
                    disconnected
                        .iter()
                        .map(|b| b.as_str())
                        .collect::<Vec<_>>()
                        .join(", "),
                    self.buses[0]
                ));
            }
        }

        v.sort();
        v
    }
}

/// Validate a scenario against a model.
pub fn validate_scenario(model: &GridModel, s: &DesignScenario) -> Vec<String> {
    let mut v = Vec::new();
    let id = &s.id;
    if s.k_pu <= 1.0 {
        v.push(format!("scenario {id}: K must exceed 1"));
    }
    if s.epsilon <= 0.0 || s.epsilon >= 1.0 {
        v.push(format!("scenario {id}: epsilon must lie in (0, 1)"));
    }
    if s.kpi_target <= 0.0 || s.kpi_target > 1.0 {
        v.push(format!("scenario {id}: KPI target must lie in (0, 1]"));
    }
    if s.t_cb_ms <= 0.0 {
        v.push(format!("scenario {id}: t_cb must be positive"));
    }
    if s.t_relay_ms < 0.0 {
        v.push(format!("scenario {id}: t_relay must be non-negative"));
    }
    if s.dt_us <= 0.0 {
        v.push(format!("scenario {id}: dt must be positive"));
    }
    for b in &model.breakers {
        if s.i_cb_max_ka <= b.params.i_rated_ka {
            v.push(format!(
                "scenario {id}: I_cb_max {} kA does not exceed rated current of breaker {}",
                s.i_cb_max_ka, b.id
            ));
        }
    }
    for (cid, sp) in &s.setpoints_pu {
        if model.converter(cid).is_none() {
            v.push(format!("scenario {id}: setpoint for unknown converter {cid}"));
        }
        if !(-1.0..=1.0).contains(sp) {
            v.push(format!(
                "scenario {id}: setpoint {sp} for {cid} outside [-1, 1]"
            ));
        }
    }
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_converter() -> ConverterParams {
        ConverterParams {
            s_mva: 1034.0,
            p_mw: 1000.0,
            u_dc_kv: 525.0,
            u_ac_kv: 273.0,
            arm_peak_rated_ka: 2.2,
            i_ac_max_pu: 1.2,
            k_overcurrent: 1.5,
            r_arm_ohm: 0.4,
            l_arm_mh: 15.0,
            c_sm_uf: 6000.0,
            n_sm: 276,
            control: ControlMode::ConstantPq,
            droop_kv_per_mw: None,
            frt: FrtRequirement::ContinuousOperation,
            p_min_pu: -1.0,
            p_max_pu: 1.0,
        }
    }

    #[test]
    fn derived_converter_quantities() {
        let p = reference_converter();
        // P / U_dc for the 525 kV / 1000 MW dataset
        assert!((p.rated_dc_current_ka() - 1.9047619).abs() < 1e-6);
        assert!((p.equivalent_inductance_mh() - 10.0).abs() < 1e-12);
        // 1.2 * sqrt(2) * 1034 / (sqrt(3) * 273)
        assert!((p.i_ac_max_ka() - 3.7110218).abs() < 1e-4);
        assert!((p.aggregate_dc_capacitance_uf() - 130.43478).abs() < 1e-4);
    }

    #[test]
    fn cable_derived_quantities() {
        let c = CableParams {
            length_km: 200.0,
            r_ohm_per_km: 0.011,
            l_mh_per_km: 0.21,
            c_uf_per_km: 0.22,
        };
        let z = c.surge_impedance_ohm();
        let v = c.wave_velocity_km_per_ms();
        assert!((z - 30.89).abs() < 0.01, "z = {z}");
        // ~1.47e5 km/s
        assert!((v - 147.1).abs() < 0.2, "v = {v}");
        assert!((c.travel_delay_ms() - 200.0 / v).abs() < 1e-12);
    }

    #[test]
    fn neutralization_time_is_sum() {
        let b = BreakerParams {
            i_rated_ka: 3.0,
            i_max_ka: 12.0,
            t_cb_ms: 2.0,
            t_relay_ms: 0.1,
            clamp_pu: 1.5,
        };
        assert!((b.neutralization_time_ms() - 2.1).abs() < 1e-12);
    }
}
