//! Inductor sizing: the single-inductor core loop (analytical bracketing,
//! iterative measurement, margin-driven refinement) and the multi-zone
//! driver that sizes every breaker of the grid.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analytics::{
    self, bus_fault_envelope, converged, critical_converter, critical_power_flow,
    inductor_for_breaker, inductor_for_converter, voltage_envelope, InductorRequirement, KpiSet,
    LimitingComponent, VoltageEnvelope,
};
use crate::error::{AnalyticsError, SizingError};
use crate::model::*;
use crate::port::{
    DerivedScalars, FaultLocation, FaultSimulator, MeasurementPlan, SystemState, VoltageProbe,
};

/// Iteration caps and behaviour switches of the sizing loops.
#[derive(Debug, Clone)]
pub struct SizingOptions {
    pub part_b_cap: usize,
    pub part_c_cap: usize,
    /// Repeat the refinement stage until no inductor moves by epsilon.
    pub refine_to_fixpoint: bool,
    pub max_refine_passes: usize,
}

impl Default for SizingOptions {
    fn default() -> Self {
        SizingOptions {
            part_b_cap: 15,
            part_c_cap: 25,
            refine_to_fixpoint: false,
            max_refine_passes: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PartTag {
    B,
    C,
}

/// One iteration of the core loop that invoked the simulator.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub part: PartTag,
    /// Inductance the system was evaluated at (mH).
    pub l_mh: f64,
    pub measurement: DerivedScalars,
    /// KPI set (refinement records only).
    pub kpis: Option<KpiRecord>,
    /// Reduction rate applied after this record (refinement records only).
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KpiRecord {
    pub converter: Option<f64>,
    pub breaker: f64,
    pub overall: f64,
    pub limiting: LimitingComponent,
}

impl From<KpiSet> for KpiRecord {
    fn from(k: KpiSet) -> Self {
        KpiRecord {
            converter: k.converter,
            breaker: k.breaker,
            overall: k.overall,
            limiting: k.limiting,
        }
    }
}

/// Full record of one directional core run.
#[derive(Debug, Clone, Serialize)]
pub struct SizingTrace {
    pub breaker: BreakerId,
    /// Zone whose requirement this run sizes.
    pub protected_zone: ZoneId,
    /// Zone the fault is applied in.
    pub faulted_zone: ZoneId,
    pub critical_converter: Option<ConverterId>,
    pub setpoints_pu: BTreeMap<ConverterId, f64>,
    pub fault: FaultLocation,
    /// Voltage envelope minimum used in the analytical stage (kV).
    pub u_envelope_min_kv: f64,
    pub t_c_ms: f64,
    pub critical_position_km: f64,
    /// Simulator invocations spent on the envelope scan (fresh ones only).
    pub envelope_runs: usize,
    /// Analytical starting values (mH).
    pub l_converter_initial_mh: Option<f64>,
    pub l_breaker_mh: f64,
    /// Whether the analytical stage skipped straight to refinement.
    pub breaker_bound: bool,
    pub records: Vec<IterationRecord>,
    /// Simulator invocations by the iterative stages.
    pub emt_runs: usize,
    pub final_l_mh: f64,
    pub final_kpis: Option<KpiRecord>,
}

/// Per-breaker outcome of the multi-zone design.
#[derive(Debug, Clone, Serialize)]
pub struct BreakerReport {
    pub breaker: BreakerId,
    /// (bus-side zone, cable-side zone).
    pub zone_bus_side: ZoneId,
    pub zone_cable_side: ZoneId,
    /// Requirement of the bus-side zone (mH).
    pub l_req_bus_side_mh: f64,
    /// Requirement of the cable-side zone (mH).
    pub l_req_cable_side_mh: f64,
    pub l_final_mh: f64,
    /// Which directional requirement set the final value.
    pub driven_by_bus_side: bool,
    pub limiting: LimitingComponent,
    pub final_kpis: Option<KpiRecord>,
    pub emt_runs: usize,
    pub envelope_runs: usize,
    /// Relative change of the final value in the last refinement pass.
    pub refinement_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizingReport {
    pub scenario: ScenarioId,
    pub k_pu: f64,
    pub i_cb_max_ka: f64,
    pub t_cb_ms: f64,
    pub t_relay_ms: f64,
    pub breakers: Vec<BreakerReport>,
    pub emt_runs_total: usize,
    pub envelope_runs_total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub traces: Vec<SizingTrace>,
}

/// Core failure together with whatever had been sized before it.
#[derive(Debug)]
pub struct SizeAllError {
    pub error: SizingError,
    pub partial: Box<SizingReport>,
}

impl std::fmt::Display for SizeAllError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for SizeAllError {}

type EnvelopeCache = BTreeMap<(CableId, BusId, u64), VoltageEnvelope>;

/// The critical fault case of one sizing direction.
struct CriticalCase {
    fault: FaultLocation,
    plan: MeasurementPlan,
    envelope: VoltageEnvelope,
    envelope_fresh_runs: usize,
    horizon_ms: f64,
}

fn direction_zones(model: &GridModel, breaker: &Breaker) -> Result<(ZoneId, ZoneId), SizingError> {
    model.breaker_zone_pair(breaker).ok_or_else(|| {
        SizingError::Analytics(AnalyticsError::InvalidInput(format!(
            "breaker {} is not on a zone boundary",
            breaker.id
        )))
    })
}

/// Pick the zone-j cable the fault goes on, as seen from the breaker, plus
/// the end positions are measured from.
fn select_fault_cable(
    model: &GridModel,
    breaker: &Breaker,
    zone_j: &ZoneId,
) -> Option<(CableId, BusId)> {
    let cable_side_zone = model.zone_of_cable(&breaker.cable);
    if cable_side_zone == Some(zone_j) {
        // Fault on the breaker's own cable, positions from the breaker end.
        return Some((breaker.cable.clone(), breaker.bus.clone()));
    }
    // Faulted zone is the bus side: take the lowest-id zone-j cable incident
    // to the breaker bus.
    let members = model.zones.get(zone_j)?;
    let mut candidates: Vec<&Cable> = model
        .cables
        .iter()
        .filter(|c| members.cables.contains(&c.id))
        .filter(|c| c.from == breaker.bus || c.to == breaker.bus)
        .collect();
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    candidates
        .first()
        .map(|c| (c.id.clone(), breaker.bus.clone()))
}

/// Junction bus on the protected side where adjacent-cable infeed is summed.
fn infeed_bus(model: &GridModel, breaker: &Breaker, zone_i: &ZoneId) -> BusId {
    if model.zone_of_bus(&breaker.bus) == Some(zone_i) {
        breaker.bus.clone()
    } else {
        let cable = model.cable(&breaker.cable).expect("breaker cable exists");
        if cable.from == breaker.bus {
            cable.to.clone()
        } else {
            cable.from.clone()
        }
    }
}

fn build_measurement_plan(
    model: &GridModel,
    breaker: &Breaker,
    zone_i: &ZoneId,
    crit_conv: Option<&ConverterId>,
    fault: &FaultLocation,
    t_n_ms: f64,
) -> MeasurementPlan {
    let junction = infeed_bus(model, breaker, zone_i);
    let connection_cable = crit_conv.and_then(|cid| {
        let conv = model.converter(cid)?;
        let cable = model.connection_cable(conv)?;
        let far = if cable.from == conv.bus {
            cable.to.clone()
        } else {
            cable.from.clone()
        };
        Some((cable.id.clone(), far))
    });
    let faulted_cable = match fault {
        FaultLocation::OnCable { cable, .. } => Some(cable.clone()),
        FaultLocation::AtBus { .. } => None,
    };
    let infeed_cables: Vec<CableId> = model
        .cables
        .iter()
        .filter(|c| c.from == junction || c.to == junction)
        .filter(|c| c.id != breaker.cable)
        .filter(|c| Some(&c.id) != faulted_cable.as_ref())
        .filter(|c| Some((&c.id, &junction)) != connection_cable.as_ref().map(|(a, b)| (a, b)))
        .map(|c| c.id.clone())
        .collect();
    let u_c_probe = match fault {
        FaultLocation::OnCable { cable, from_bus, .. } => VoltageProbe::CableTerminal {
            cable: cable.clone(),
            bus: from_bus.clone(),
        },
        FaultLocation::AtBus { bus } => VoltageProbe::Bus { bus: bus.clone() },
    };
    MeasurementPlan {
        breaker: breaker.id.clone(),
        t_n_ms,
        critical_converter: crit_conv.cloned(),
        infeed_bus: junction,
        infeed_cables,
        connection_cable,
        u_c_probe,
    }
}

/// Part A: identify the critical case of one direction and bound the
/// voltage envelope.
#[allow(clippy::too_many_arguments)]
fn part_a(
    model: &GridModel,
    scen: &DesignScenario,
    breaker: &Breaker,
    zone_i: &ZoneId,
    zone_j: &ZoneId,
    crit_conv: Option<&ConverterId>,
    setpoints: &BTreeMap<ConverterId, f64>,
    sim: &dyn FaultSimulator,
    cache: &mut EnvelopeCache,
) -> Result<CriticalCase, SizingError> {
    let t_n = scen.neutralization_time_ms();
    let fault_cable = select_fault_cable(model, breaker, zone_j);

    let (fault0, horizon_env) = match &fault_cable {
        Some((cable, from_bus)) => {
            let tau = model.cable(cable).expect("cable exists").params.travel_delay_ms();
            (
                FaultLocation::OnCable {
                    cable: cable.clone(),
                    from_bus: from_bus.clone(),
                    position_km: 0.0,
                },
                tau + t_n.max(10.0) + 4.0,
            )
        }
        None => (
            FaultLocation::AtBus {
                bus: breaker.bus.clone(),
            },
            t_n.max(10.0) + 4.0,
        ),
    };
    let plan = build_measurement_plan(model, breaker, zone_i, crit_conv, &fault0, t_n);

    let (envelope, fresh) = match &fault_cable {
        None => (bus_fault_envelope(), 0),
        Some((cable, from_bus)) => {
            let key = (cable.clone(), from_bus.clone(), (t_n * 1000.0).round() as u64);
            match cache.get(&key) {
                Some(env) => (env.clone(), 0),
                None => {
                    let sys = SystemState {
                        model,
                        scenario: scen,
                        setpoints_pu: setpoints,
                    };
                    let env = voltage_envelope(
                        cable,
                        from_bus,
                        t_n,
                        &sys,
                        &plan,
                        sim,
                        horizon_env,
                    )?;
                    let runs = env.simulator_runs;
                    cache.insert(key.clone(), env);
                    (cache[&key].clone(), runs)
                }
            }
        }
    };

    let fault = match &fault_cable {
        Some((cable, from_bus)) => FaultLocation::OnCable {
            cable: cable.clone(),
            from_bus: from_bus.clone(),
            position_km: envelope.critical_position_km,
        },
        None => fault0.clone(),
    };

    let horizon = scen.horizon_ms.unwrap_or_else(|| {
        let tau = match &fault_cable {
            Some((cable, _)) => model.cable(cable).unwrap().params.travel_delay_ms(),
            None => 0.0,
        };
        tau + t_n + 6.0
    });

    Ok(CriticalCase {
        fault,
        plan,
        envelope,
        envelope_fresh_runs: fresh,
        horizon_ms: horizon,
    })
}

/// Size one inductor for the requirement of `zone_i` against faults in the
/// adjacent `zone_j`, starting from the model's current inductances.
pub fn size_core(
    zone_i: &ZoneId,
    zone_j: &ZoneId,
    model: &GridModel,
    scen: &DesignScenario,
    sim: &dyn FaultSimulator,
    opts: &SizingOptions,
) -> Result<SizingTrace, SizingError> {
    let mut cache = EnvelopeCache::new();
    size_core_cached(zone_i, zone_j, model, scen, sim, opts, &mut cache)
}

#[allow(clippy::too_many_arguments)]
fn size_core_cached(
    zone_i: &ZoneId,
    zone_j: &ZoneId,
    model: &GridModel,
    scen: &DesignScenario,
    sim: &dyn FaultSimulator,
    opts: &SizingOptions,
    cache: &mut EnvelopeCache,
) -> Result<SizingTrace, SizingError> {
    let adjacency = model.zone_adjacency();
    let key = if zone_i <= zone_j {
        (zone_i.clone(), zone_j.clone())
    } else {
        (zone_j.clone(), zone_i.clone())
    };
    let breaker_id = adjacency
        .get(&key)
        .ok_or_else(|| {
            SizingError::Analytics(AnalyticsError::InvalidInput(format!(
                "zones {zone_i} and {zone_j} are not breaker-adjacent"
            )))
        })?
        .clone();
    let breaker = model.breaker(&breaker_id).expect("adjacency names a breaker").clone();
    let t_n = scen.neutralization_time_ms();
    let u_dc = model.u_dc_kv;

    let crit_conv = critical_converter(zone_i, model, t_n)?;
    let setpoints = critical_power_flow(zone_i, zone_j, model);
    let case = part_a(
        model,
        scen,
        &breaker,
        zone_i,
        zone_j,
        crit_conv.as_ref(),
        &setpoints,
        sim,
        cache,
    )?;

    let mut trace = SizingTrace {
        breaker: breaker_id.clone(),
        protected_zone: zone_i.clone(),
        faulted_zone: zone_j.clone(),
        critical_converter: crit_conv.clone(),
        setpoints_pu: setpoints.clone(),
        fault: case.fault.clone(),
        u_envelope_min_kv: case.envelope.u_envelope_min_kv,
        t_c_ms: case.envelope.t_c_ms,
        critical_position_km: case.envelope.critical_position_km,
        envelope_runs: case.envelope_fresh_runs,
        l_converter_initial_mh: None,
        l_breaker_mh: 0.0,
        breaker_bound: false,
        records: Vec::new(),
        emt_runs: 0,
        final_l_mh: 0.0,
        final_kpis: None,
    };

    let u_env = case.envelope.u_envelope_min_kv;
    let l_cb = inductor_for_breaker(
        u_dc,
        u_env,
        scen.i_cb_max_ka,
        breaker.params.i_rated_ka,
        t_n,
    )?;
    trace.l_breaker_mh = l_cb;

    // A run of the simulator at a given inductance for this breaker.
    let run_at = |l_mh: f64, trace: &mut SizingTrace| -> Result<DerivedScalars, SizingError> {
        let mut m = model.clone();
        m.breaker_mut(&breaker_id).expect("breaker exists").l_dc_mh = l_mh;
        let sys = SystemState {
            model: &m,
            scenario: scen,
            setpoints_pu: &setpoints,
        };
        let res = sim.run_fault_case(&sys, &case.fault, &case.plan, case.horizon_ms)?;
        trace.emt_runs += 1;
        Ok(res.derived)
    };

    // Part B: analytical bracketing with measured correction terms.
    let conv_params = crit_conv
        .as_ref()
        .map(|cid| model.converter(cid).expect("converter exists").params.clone());
    let mut l_work = l_cb;
    if let Some(params) = &conv_params {
        let limit = analytics::converter_limit(params)?;
        let l_eq = model.converter_l_eq_mh(model.converter(crit_conv.as_ref().unwrap()).unwrap());
        let l0 = inductor_for_converter(&limit, u_dc, u_env, t_n, l_eq, 0.0, 0.0)?;
        match l0 {
            InductorRequirement::NoConstraint => {
                trace.breaker_bound = true;
            }
            InductorRequirement::Constraint { l_mh: l0 } => {
                trace.l_converter_initial_mh = Some(l0);
                if l0 < l_cb {
                    // The breaker requirement is already more restrictive;
                    // no measurement iteration needed.
                    trace.breaker_bound = true;
                } else {
                    let mut l_prev = l0;
                    let mut iterations = 0usize;
                    loop {
                        if iterations >= opts.part_b_cap {
                            return Err(SizingError::IterationCap {
                                part: 'B',
                                cap: opts.part_b_cap,
                                breaker: breaker_id.to_string(),
                                zone: zone_i.to_string(),
                            });
                        }
                        iterations += 1;
                        let l_eval = l_prev.max(l_cb);
                        let meas = run_at(l_eval, &mut trace)?;
                        let l_next = inductor_for_converter(
                            &limit,
                            u_dc,
                            u_env,
                            t_n,
                            l_eq,
                            meas.delta_i_in_ka.max(0.0),
                            meas.delta_i_cab_ka.max(0.0),
                        )?
                        .l_mh();
                        trace.records.push(IterationRecord {
                            part: PartTag::B,
                            l_mh: l_eval,
                            measurement: meas,
                            kpis: None,
                            alpha: None,
                        });
                        if l_prev <= 1e-9 {
                            break;
                        }
                        let done = converged(l_next, l_prev, scen.epsilon);
                        l_prev = l_next;
                        if done {
                            break;
                        }
                    }
                    l_work = l_prev.max(l_cb);
                }
            }
        }
    } else {
        trace.breaker_bound = true;
    }

    // Part C: walk the inductance down until the smallest margin sits inside
    // the target window; revert and halve the step on overshoot.
    let mut l = l_work.max(1e-3);
    let mut l_accepted: Option<f64> = None;
    let mut alpha_last = 0.0;
    let mut iterations = 0usize;
    loop {
        if iterations >= opts.part_c_cap {
            return Err(SizingError::IterationCap {
                part: 'C',
                cap: opts.part_c_cap,
                breaker: breaker_id.to_string(),
                zone: zone_i.to_string(),
            });
        }
        iterations += 1;
        let meas = run_at(l, &mut trace)?;
        let set = analytics::kpis(
            meas.i_a_a_ka,
            meas.i_cb_a_ka,
            conv_params.as_ref(),
            scen.i_cb_max_ka,
            breaker.params.i_rated_ka,
        );
        let mut record = IterationRecord {
            part: PartTag::C,
            l_mh: l,
            measurement: meas,
            kpis: Some(set.into()),
            alpha: None,
        };
        if set.overall >= 0.0 && set.overall < scen.kpi_target {
            trace.records.push(record);
            trace.final_l_mh = l;
            trace.final_kpis = Some(set.into());
            return Ok(trace);
        }
        if set.overall >= scen.kpi_target {
            let alpha = (0.4 * set.overall).min(scen.alpha_cap);
            record.alpha = Some(alpha);
            trace.records.push(record);
            l_accepted = Some(l);
            alpha_last = alpha;
            l *= 1.0 - alpha;
        } else {
            // Margin violated. Step back toward the last feasible value, or
            // grow when even the starting point is infeasible.
            trace.records.push(record);
            match l_accepted {
                Some(prev) => {
                    alpha_last *= 0.5;
                    if alpha_last < 5e-4 {
                        // The window cannot be split further; settle on the
                        // last feasible value.
                        let meas = run_at(prev, &mut trace)?;
                        let set = analytics::kpis(
                            meas.i_a_a_ka,
                            meas.i_cb_a_ka,
                            conv_params.as_ref(),
                            scen.i_cb_max_ka,
                            breaker.params.i_rated_ka,
                        );
                        trace.records.push(IterationRecord {
                            part: PartTag::C,
                            l_mh: prev,
                            measurement: meas,
                            kpis: Some(set.into()),
                            alpha: None,
                        });
                        trace.final_l_mh = prev;
                        trace.final_kpis = Some(set.into());
                        return Ok(trace);
                    }
                    l = prev * (1.0 - alpha_last);
                }
                None => {
                    l *= 1.25;
                }
            }
        }
    }
}

/// Compare two reports breaker-by-breaker; true when any final value moved
/// by at least `epsilon` (relative, inclusive).
pub fn refinement_needed(
    prev: &SizingReport,
    new: &SizingReport,
    epsilon: f64,
) -> Result<bool, SizingError> {
    if prev.breakers.len() != new.breakers.len()
        || prev
            .breakers
            .iter()
            .zip(new.breakers.iter())
            .any(|(a, b)| a.breaker != b.breaker)
    {
        return Err(SizingError::MismatchedBreakerSets(format!(
            "{:?} vs {:?}",
            prev.breakers.iter().map(|b| b.breaker.to_string()).collect::<Vec<_>>(),
            new.breakers.iter().map(|b| b.breaker.to_string()).collect::<Vec<_>>()
        )));
    }
    Ok(prev
        .breakers
        .iter()
        .zip(new.breakers.iter())
        .any(|(a, b)| {
            let base = a.l_final_mh.max(1e-9);
            (b.l_final_mh - a.l_final_mh).abs() / base >= epsilon
        }))
}

/// Size every inductor of the grid for one scenario.
///
/// Inductors start at their breaker-requirement values; breakers are
/// processed in ascending id order, each newly designed value written back
/// before the next; one refinement pass repeats the sweep with designed
/// values as the starting point, re-simulating only breakers whose
/// electrical neighbourhood moved by at least epsilon.
pub fn size_all(
    model: &GridModel,
    scen: &DesignScenario,
    sim: &dyn FaultSimulator,
    opts: &SizingOptions,
) -> Result<SizingReport, Box<SizeAllError>> {
    let mut work = model.with_scenario_inputs(scen);
    let t_n = scen.neutralization_time_ms();
    let mut cache = EnvelopeCache::new();

    let mut report = SizingReport {
        scenario: scen.id.clone(),
        k_pu: scen.k_pu,
        i_cb_max_ka: scen.i_cb_max_ka,
        t_cb_ms: scen.t_cb_ms,
        t_relay_ms: scen.t_relay_ms,
        breakers: Vec::new(),
        emt_runs_total: 0,
        envelope_runs_total: 0,
        config_hash: None,
        traces: Vec::new(),
    };

    // Stage 1: breaker-requirement initial values.
    for b in work.breakers.iter_mut() {
        let l = inductor_for_breaker(
            model.u_dc_kv,
            0.0,
            scen.i_cb_max_ka,
            b.params.i_rated_ka,
            t_n,
        )
        .map_err(|e| {
            Box::new(SizeAllError {
                error: SizingError::Analytics(e),
                partial: Box::new(report_snapshot(&report)),
            })
        })?;
        b.l_dc_mh = l;
    }

    let mut breaker_ids: Vec<BreakerId> = work.breakers.iter().map(|b| b.id.clone()).collect();
    breaker_ids.sort();

    // Environment snapshot at the time each breaker was last designed.
    let mut env_at_design: BTreeMap<BreakerId, BTreeMap<BreakerId, f64>> = BTreeMap::new();
    let l_values = |m: &GridModel| -> BTreeMap<BreakerId, f64> {
        m.breakers.iter().map(|b| (b.id.clone(), b.l_dc_mh)).collect()
    };

    let design_one = |work: &mut GridModel,
                          id: &BreakerId,
                          cache: &mut EnvelopeCache,
                          report: &mut SizingReport|
     -> Result<(f64, f64), SizingError> {
        let breaker = work.breaker(id).expect("breaker exists").clone();
        let (zone_bus, zone_cable) = direction_zones(work, &breaker)?;
        let trace_bus =
            size_core_cached(&zone_bus, &zone_cable, work, scen, sim, opts, cache)?;
        let trace_cable =
            size_core_cached(&zone_cable, &zone_bus, work, scen, sim, opts, cache)?;
        let l_bus = trace_bus.final_l_mh;
        let l_cable = trace_cable.final_l_mh;
        let l_final = l_bus.max(l_cable);
        let driven_by_bus_side = l_bus >= l_cable;
        let binding = if driven_by_bus_side { &trace_bus } else { &trace_cable };
        let row = BreakerReport {
            breaker: id.clone(),
            zone_bus_side: zone_bus.clone(),
            zone_cable_side: zone_cable.clone(),
            l_req_bus_side_mh: l_bus,
            l_req_cable_side_mh: l_cable,
            l_final_mh: l_final,
            driven_by_bus_side,
            limiting: binding
                .final_kpis
                .map(|k| k.limiting)
                .unwrap_or(LimitingComponent::Breaker),
            final_kpis: binding.final_kpis,
            emt_runs: trace_bus.emt_runs + trace_cable.emt_runs,
            envelope_runs: trace_bus.envelope_runs + trace_cable.envelope_runs,
            refinement_change: 0.0,
        };
        report.emt_runs_total += row.emt_runs;
        report.envelope_runs_total += row.envelope_runs;
        report.traces.push(trace_bus);
        report.traces.push(trace_cable);
        // Replace or append the row.
        match report.breakers.iter_mut().find(|r| &r.breaker == id) {
            Some(existing) => {
                let prev = existing.l_final_mh;
                let mut row = row;
                row.refinement_change = (l_final - prev).abs() / prev.max(1e-9);
                *existing = row;
            }
            None => report.breakers.push(row),
        }
        work.breaker_mut(id).expect("breaker exists").l_dc_mh = l_final;
        Ok((l_bus, l_cable))
    };

    // Stage 2: first full sweep.
    for id in &breaker_ids {
        env_at_design.insert(id.clone(), l_values(&work));
        if let Err(e) = design_one(&mut work, id, &mut cache, &mut report) {
            return Err(Box::new(SizeAllError {
                error: e,
                partial: Box::new(report_snapshot(&report)),
            }));
        }
    }

    // Stage 3: refinement passes with the designed values as initial values.
    let passes = if opts.refine_to_fixpoint {
        opts.max_refine_passes
    } else {
        1
    };
    for _ in 0..passes {
        let mut changed = false;
        for id in &breaker_ids {
            let now = l_values(&work);
            let then = &env_at_design[id];
            let moved = now.iter().any(|(bid, l)| {
                if bid == id {
                    return false;
                }
                let b = then[bid].max(1e-9);
                (l - b).abs() / b >= scen.epsilon
            });
            if !moved {
                continue;
            }
            env_at_design.insert(id.clone(), now);
            let before = work.breaker(id).unwrap().l_dc_mh;
            match design_one(&mut work, id, &mut cache, &mut report) {
                Ok(_) => {
                    let after = work.breaker(id).unwrap().l_dc_mh;
                    if (after - before).abs() / before.max(1e-9) >= scen.epsilon {
                        changed = true;
                    }
                }
                Err(e) => {
                    return Err(Box::new(SizeAllError {
                        error: e,
                        partial: Box::new(report_snapshot(&report)),
                    }));
                }
            }
        }
        if !changed {
            break;
        }
    }

    report.breakers.sort_by(|a, b| a.breaker.cmp(&b.breaker));
    Ok(report)
}

fn report_snapshot(r: &SizingReport) -> SizingReport {
    SizingReport {
        scenario: r.scenario.clone(),
        k_pu: r.k_pu,
        i_cb_max_ka: r.i_cb_max_ka,
        t_cb_ms: r.t_cb_ms,
        t_relay_ms: r.t_relay_ms,
        breakers: r.breakers.clone(),
        emt_runs_total: r.emt_runs_total,
        envelope_runs_total: r.envelope_runs_total,
        config_hash: r.config_hash.clone(),
        traces: r.traces.clone(),
    }
}

/// Outcome of replaying one critical fault case at the designed values.
#[derive(Debug, Clone, Serialize)]
pub struct ReplayCheck {
    pub breaker: BreakerId,
    pub protected_zone: ZoneId,
    pub faulted_zone: ZoneId,
    /// Converters that blocked although their zone was healthy.
    pub blocked_healthy: Vec<ConverterId>,
    /// Highest breaker current against the interruption limit (kA).
    pub worst_breaker_current_ka: f64,
    pub i_cb_max_ka: f64,
    pub kpis: Option<KpiRecord>,
}

impl ReplayCheck {
    pub fn passed(&self) -> bool {
        self.blocked_healthy.is_empty() && self.worst_breaker_current_ka <= self.i_cb_max_ka
    }
}

/// Re-run every directional critical case with all inductors at their final
/// values and check the hard design requirements.
pub fn replay_report(
    model: &GridModel,
    scen: &DesignScenario,
    report: &SizingReport,
    sim: &dyn FaultSimulator,
) -> Result<Vec<ReplayCheck>, SizingError> {
    let mut work = model.with_scenario_inputs(scen);
    for row in &report.breakers {
        if let Some(b) = work.breaker_mut(&row.breaker) {
            b.l_dc_mh = row.l_final_mh;
        }
    }
    let mut checks = Vec::new();
    // Latest trace per direction carries the critical case.
    let mut latest: BTreeMap<(BreakerId, ZoneId), &SizingTrace> = BTreeMap::new();
    for t in &report.traces {
        latest.insert((t.breaker.clone(), t.protected_zone.clone()), t);
    }
    for ((breaker_id, _), trace) in latest {
        let breaker = work.breaker(&breaker_id).expect("breaker exists").clone();
        let plan = build_measurement_plan(
            &work,
            &breaker,
            &trace.protected_zone,
            trace.critical_converter.as_ref(),
            &trace.fault,
            scen.neutralization_time_ms(),
        );
        let horizon = scen.horizon_ms.unwrap_or_else(|| {
            let tau = match &trace.fault {
                FaultLocation::OnCable { cable, .. } => {
                    work.cable(cable).map(|c| c.params.travel_delay_ms()).unwrap_or(0.0)
                }
                FaultLocation::AtBus { .. } => 0.0,
            };
            tau + scen.neutralization_time_ms() + 6.0
        });
        let sys = SystemState {
            model: &work,
            scenario: scen,
            setpoints_pu: &trace.setpoints_pu,
        };
        let res = sim.run_fault_case(&sys, &trace.fault, &plan, horizon)?;
        let blocked_healthy: Vec<ConverterId> = res
            .blocked_converters
            .keys()
            .filter(|cid| work.zone_of_converter(cid) != Some(&trace.faulted_zone))
            .cloned()
            .collect();
        let worst = res
            .breaker_current_ka
            .values()
            .flat_map(|t| t.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        let conv_params = trace
            .critical_converter
            .as_ref()
            .and_then(|cid| work.converter(cid))
            .map(|c| c.params.clone());
        let set = analytics::kpis(
            res.derived.i_a_a_ka,
            res.derived.i_cb_a_ka,
            conv_params.as_ref(),
            scen.i_cb_max_ka,
            breaker.params.i_rated_ka,
        );
        checks.push(ReplayCheck {
            breaker: breaker_id,
            protected_zone: trace.protected_zone.clone(),
            faulted_zone: trace.faulted_zone.clone(),
            blocked_healthy,
            worst_breaker_current_ka: worst,
            i_cb_max_ka: scen.i_cb_max_ka,
            kpis: Some(set.into()),
        });
    }
    Ok(checks)
}
