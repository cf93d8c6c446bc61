//! Simulator port: the interface the sizing loop drives.
//!
//! The built-in transient engine implements [`FaultSimulator`]; the same
//! seam accepts external tool adapters (e.g. a vendor EMT environment), so
//! engines are registered by name and selected at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::EmtError;
use crate::model::*;

/// Where the pole-to-ground fault is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultLocation {
    /// On a cable, `position_km` measured from the `from_bus` end.
    OnCable {
        cable: CableId,
        from_bus: BusId,
        position_km: f64,
    },
    /// Directly at a bus (zero-impedance bus fault).
    AtBus { bus: BusId },
}

impl FaultLocation {
    pub fn describe(&self) -> String {
        match self {
            FaultLocation::OnCable {
                cable,
                from_bus,
                position_km,
            } => format!("{cable}@{position_km:.1}km-from-{from_bus}"),
            FaultLocation::AtBus { bus } => format!("bus-{bus}"),
        }
    }
}

/// Voltage probe for the faulted-cable terminal voltage.
#[derive(Debug, Clone, PartialEq)]
pub enum VoltageProbe {
    /// Voltage of the cable-side terminal node of `cable` at `bus` end
    /// (behind the breaker + inductor if one sits there).
    CableTerminal { cable: CableId, bus: BusId },
    /// Plain bus voltage.
    Bus { bus: BusId },
}

/// What to measure during a fault run. Window-based scalars are taken over
/// [t_arrival, t_arrival + t_n], where t_arrival is the first instant the
/// study breaker's bus voltage drops below 0.95 of rated.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    /// Breaker under study.
    pub breaker: BreakerId,
    /// Neutralization window length (ms).
    pub t_n_ms: f64,
    /// Converter whose arm-current estimate feeds the converter KPI.
    pub critical_converter: Option<ConverterId>,
    /// Bus where adjacent-cable infeed is summed.
    pub infeed_bus: BusId,
    /// Cables whose currents into `infeed_bus` count as infeed.
    pub infeed_cables: Vec<CableId>,
    /// Connection cable of the critical converter, with the bus-side end the
    /// discharge is measured at.
    pub connection_cable: Option<(CableId, BusId)>,
    /// Probe for the faulted-cable terminal voltage.
    pub u_c_probe: VoltageProbe,
}

/// Scalars derived from the traces of one fault run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedScalars {
    /// Wave arrival at the study breaker's bus (ms from fault application).
    pub t_arrival_ms: f64,
    /// Change of summed adjacent-cable infeed current over the window (kA).
    pub delta_i_in_ka: f64,
    /// Change of connection-cable discharge current over the window (kA).
    pub delta_i_cab_ka: f64,
    /// Peak arm-current estimate of the critical converter over the window (kA).
    pub i_a_a_ka: Option<f64>,
    /// Peak study-breaker current up to commutation completion (kA).
    pub i_cb_a_ka: f64,
    /// Faulted-cable terminal voltage averaged over the window (kV).
    pub u_c_avg_kv: f64,
}

/// Full result of a single fault simulation.
#[derive(Debug, Clone)]
pub struct TransientResult {
    /// Time step (ms).
    pub dt_ms: f64,
    /// Time axis, `horizon/dt + 1` samples, `t = 0` is fault application (ms).
    pub time_ms: Vec<f64>,
    /// Bus voltages (kV).
    pub bus_voltage_kv: BTreeMap<BusId, Vec<f64>>,
    /// Breaker branch currents, bus side -> cable side positive (kA).
    pub breaker_current_ka: BTreeMap<BreakerId, Vec<f64>>,
    /// Converter DC terminal currents, positive = rectifier injection (kA).
    pub converter_dc_current_ka: BTreeMap<ConverterId, Vec<f64>>,
    /// Converter arm-current estimates (kA).
    pub converter_arm_estimate_ka: BTreeMap<ConverterId, Vec<f64>>,
    /// Converters that blocked during the run, with block time (ms).
    pub blocked_converters: BTreeMap<ConverterId, f64>,
    /// Cable end currents flowing from the cable into the named bus (kA).
    pub cable_end_current_ka: BTreeMap<(CableId, BusId), Vec<f64>>,
    /// Cable-side terminal node voltages at the named bus end (kV).
    pub cable_terminal_voltage_kv: BTreeMap<(CableId, BusId), Vec<f64>>,
    /// Varistor energies at end of run (MJ).
    pub varistor_energy_mj: BTreeMap<BreakerId, f64>,
    /// Scalars derived from the traces above per the measurement plan.
    pub derived: DerivedScalars,
}

impl TransientResult {
    /// Recompute the derived scalars from the stored traces. The constructor
    /// uses exactly this path, so equality with `self.derived` is an
    /// invariant.
    pub fn rederive(&self, model: &GridModel, plan: &MeasurementPlan) -> DerivedScalars {
        derive_scalars(self, model, plan)
    }
}

/// Derive the window scalars from raw traces.
pub fn derive_scalars(
    res: &TransientResult,
    model: &GridModel,
    plan: &MeasurementPlan,
) -> DerivedScalars {
    let dt = res.dt_ms;
    let n = res.time_ms.len();
    let breaker = model
        .breaker(&plan.breaker)
        .expect("measurement plan names a known breaker");

    // Wave arrival: study breaker's bus voltage below 0.95 of rated.
    let bus_v = &res.bus_voltage_kv[&breaker.bus];
    let threshold = 0.95 * model.u_dc_kv;
    let arrival_idx = bus_v.iter().position(|&v| v < threshold).unwrap_or(0);
    let t_arrival_ms = res.time_ms[arrival_idx];

    let window_steps = (plan.t_n_ms / dt).round() as usize;
    let end_idx = (arrival_idx + window_steps).min(n - 1);

    let sum_infeed = |idx: usize| -> f64 {
        plan.infeed_cables
            .iter()
            .map(|c| res.cable_end_current_ka[&(c.clone(), plan.infeed_bus.clone())][idx])
            .sum()
    };
    let delta_i_in_ka = sum_infeed(end_idx) - sum_infeed(arrival_idx);

    // Connection-cable discharge: bus-end inflow minus the converter's own
    // terminal current, so only the cable's capacitive contribution counts.
    let delta_i_cab_ka = match (&plan.connection_cable, &plan.critical_converter) {
        (Some((cable, bus)), Some(conv)) => {
            let cab = &res.cable_end_current_ka[&(cable.clone(), bus.clone())];
            let con = &res.converter_dc_current_ka[conv];
            let disch = |i: usize| cab[i] - con[i];
            disch(end_idx) - disch(arrival_idx)
        }
        _ => 0.0,
    };

    let i_a_a_ka = plan.critical_converter.as_ref().map(|conv| {
        res.converter_arm_estimate_ka[conv][arrival_idx..=end_idx]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    });

    // Breaker current up to commutation completion: trip + t_cb, where the
    // trip fires t_relay after local wave arrival.
    let commutation_ms =
        t_arrival_ms + breaker.params.t_relay_ms + breaker.params.t_cb_ms;
    let comm_idx = ((commutation_ms / dt).round() as usize).min(n - 1);
    let i_cb = &res.breaker_current_ka[&plan.breaker];
    let i_cb_a_ka = i_cb[..=comm_idx]
        .iter()
        .map(|i| i.abs())
        .fold(f64::NEG_INFINITY, f64::max);

    let u_c_trace: &Vec<f64> = match &plan.u_c_probe {
        VoltageProbe::CableTerminal { cable, bus } => {
            &res.cable_terminal_voltage_kv[&(cable.clone(), bus.clone())]
        }
        VoltageProbe::Bus { bus } => &res.bus_voltage_kv[bus],
    };
    let span = &u_c_trace[arrival_idx..=end_idx];
    let u_c_avg_kv = span.iter().sum::<f64>() / span.len() as f64;

    DerivedScalars {
        t_arrival_ms,
        delta_i_in_ka,
        delta_i_cab_ka,
        i_a_a_ka,
        i_cb_a_ka,
        u_c_avg_kv,
    }
}

/// System snapshot handed to a simulator: the model already carries the
/// scenario's key inputs and the current inductance values.
pub struct SystemState<'a> {
    pub model: &'a GridModel,
    pub scenario: &'a DesignScenario,
    /// Pre-fault active power setpoints (pu of rated) per converter.
    pub setpoints_pu: &'a BTreeMap<ConverterId, f64>,
}

/// A transient engine able to run one pole-to-ground fault case from a
/// settled pre-fault state.
pub trait FaultSimulator: Send + Sync {
    /// Initialize steady state, apply the fault at t = 0, run `horizon_ms`
    /// and return traces + derived scalars.
    fn run_fault_case(
        &self,
        sys: &SystemState,
        fault: &FaultLocation,
        plan: &MeasurementPlan,
        horizon_ms: f64,
    ) -> Result<TransientResult, EmtError>;

    /// Engine name as registered.
    fn name(&self) -> &str;
}

/// Factory creating a simulator instance for one sizing run.
pub trait SimulatorFactory: Send + Sync {
    fn name(&self) -> &str;
    fn create(&self) -> Arc<dyn FaultSimulator>;
}

/// Name-keyed registry of transient engines.
pub struct SimulatorRegistry {
    entries: BTreeMap<String, Arc<dyn SimulatorFactory>>,
}

impl SimulatorRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry with the built-in engine registered under `"builtin"`.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(crate::emt::BuiltinFactory));
        r
    }

    pub fn register(&mut self, factory: Arc<dyn SimulatorFactory>) {
        self.entries.insert(factory.name().to_string(), factory);
    }

    pub fn create(&self, name: &str) -> Option<Arc<dyn FaultSimulator>> {
        self.entries.get(name).map(|f| f.create())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }
}
