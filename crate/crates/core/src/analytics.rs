//! Closed-form sizing relations, current-margin KPIs and critical-case
//! identification.
//!
//! These are pure functions over the grid model; the only one touching the
//! simulator is [`voltage_envelope`], which scans fault positions to bound
//! the faulted-cable terminal voltage.

use std::collections::BTreeMap;

use crate::error::{AnalyticsError, EmtError};
use crate::model::*;
use crate::port::{
    FaultLocation, FaultSimulator, MeasurementPlan, SystemState, VoltageProbe,
};

/// Converter DC-side current limit derived from the arm-current limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterLimit {
    /// Maximum DC terminal current before blocking (kA).
    pub i_con_max_ka: f64,
    /// Critical current change: max minus rated DC current (kA).
    pub delta_i_crit_ka: f64,
}

/// Result of the converter inductor relation; headroom long enough that the
/// formula goes negative means the converter imposes nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InductorRequirement {
    Constraint { l_mh: f64 },
    NoConstraint,
}

impl InductorRequirement {
    pub fn l_mh(&self) -> f64 {
        match self {
            InductorRequirement::Constraint { l_mh } => *l_mh,
            InductorRequirement::NoConstraint => 0.0,
        }
    }
}

/// Which component the margin KPI identifies as limiting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitingComponent {
    Converter,
    Breaker,
}

/// Current-margin KPI set for one evaluated design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiSet {
    /// Converter margin; `None` when no converter constraint exists.
    pub converter: Option<f64>,
    /// Breaker margin.
    pub breaker: f64,
    /// min of the members.
    pub overall: f64,
    /// Arg-min; ties resolve to the converter.
    pub limiting: LimitingComponent,
}

/// Maximum DC terminal current from the arm limit:
/// I_max = 3 (K i_a_r - i_ac_hat / 2).
pub fn converter_limit(cv: &ConverterParams) -> Result<ConverterLimit, AnalyticsError> {
    let arm_budget = cv.k_overcurrent * cv.arm_peak_rated_ka;
    let ac_share = cv.i_ac_max_ka() / 2.0;
    if arm_budget <= ac_share {
        return Err(AnalyticsError::NoHeadroom {
            id: String::new(),
            lhs: arm_budget,
            rhs: ac_share,
        });
    }
    let i_con_max_ka = 3.0 * (arm_budget - ac_share);
    Ok(ConverterLimit {
        i_con_max_ka,
        delta_i_crit_ka: i_con_max_ka - cv.rated_dc_current_ka(),
    })
}

/// Inductor needed so the converter stays below its blocking limit over the
/// neutralization window:
/// L = [(U_dc - U_env) t_n - L_eq dI_con] / (dI_con + dI_in + dI_cab).
///
/// Negative results clamp to zero and report "no constraint".
#[allow(clippy::too_many_arguments)]
pub fn inductor_for_converter(
    limit: &ConverterLimit,
    u_dc_kv: f64,
    u_envelope_min_kv: f64,
    t_n_ms: f64,
    l_eq_mh: f64,
    delta_i_in_ka: f64,
    delta_i_cab_ka: f64,
) -> Result<InductorRequirement, AnalyticsError> {
    if limit.delta_i_crit_ka <= 0.0 {
        return Err(AnalyticsError::InvalidInput(format!(
            "critical current change must be positive, got {} kA",
            limit.delta_i_crit_ka
        )));
    }
    if t_n_ms < 0.0 {
        return Err(AnalyticsError::InvalidInput(
            "neutralization time must be non-negative".into(),
        ));
    }
    if u_envelope_min_kv > 0.0 {
        return Err(AnalyticsError::InvalidInput(
            "voltage envelope must be non-positive".into(),
        ));
    }
    let denom = limit.delta_i_crit_ka + delta_i_in_ka + delta_i_cab_ka;
    if denom <= 0.0 {
        return Err(AnalyticsError::NonPositiveDenominator(denom));
    }
    let l = ((u_dc_kv - u_envelope_min_kv) * t_n_ms - l_eq_mh * limit.delta_i_crit_ka) / denom;
    if l <= 0.0 {
        Ok(InductorRequirement::NoConstraint)
    } else {
        Ok(InductorRequirement::Constraint { l_mh: l })
    }
}

/// Inductor needed so the breaker current stays interruptible:
/// L = (U_dc - U_env) t_n / (I_cb_max - I_cb_r).
pub fn inductor_for_breaker(
    u_dc_kv: f64,
    u_envelope_min_kv: f64,
    i_cb_max_ka: f64,
    i_cb_rated_ka: f64,
    t_n_ms: f64,
) -> Result<f64, AnalyticsError> {
    if i_cb_max_ka <= i_cb_rated_ka {
        return Err(AnalyticsError::InvalidInput(format!(
            "I_cb_max {i_cb_max_ka} kA must exceed I_cb_r {i_cb_rated_ka} kA"
        )));
    }
    if t_n_ms < 0.0 {
        return Err(AnalyticsError::InvalidInput(
            "neutralization time must be non-negative".into(),
        ));
    }
    Ok((u_dc_kv - u_envelope_min_kv) * t_n_ms / (i_cb_max_ka - i_cb_rated_ka))
}

/// Relative-change convergence test between two successive inductor values.
pub fn converged(l_mh: f64, l_prev_mh: f64, epsilon: f64) -> bool {
    debug_assert!(l_prev_mh > 0.0);
    (l_mh - l_prev_mh).abs() / l_prev_mh < epsilon
}

/// Current-margin KPIs for converter and breaker at an evaluated design point.
///
/// Converter: (K i_a_r - i_a_a) / (i_a_r (K - 1)); breaker:
/// (I_cb_max - I_cb_a) / (I_cb_max - I_cb_r). Negative values pass through
/// unchanged and flag a violated limit.
pub fn kpis(
    i_a_a_ka: Option<f64>,
    i_cb_a_ka: f64,
    cv: Option<&ConverterParams>,
    i_cb_max_ka: f64,
    i_cb_rated_ka: f64,
) -> KpiSet {
    let converter = match (i_a_a_ka, cv) {
        (Some(i_a_a), Some(cv)) => {
            let k = cv.k_overcurrent;
            let i_a_r = cv.arm_peak_rated_ka;
            Some((k * i_a_r - i_a_a) / (i_a_r * (k - 1.0)))
        }
        _ => None,
    };
    let breaker = (i_cb_max_ka - i_cb_a_ka) / (i_cb_max_ka - i_cb_rated_ka);
    let (overall, limiting) = match converter {
        Some(c) if c <= breaker => (c, LimitingComponent::Converter),
        Some(_) => (breaker, LimitingComponent::Breaker),
        None => (breaker, LimitingComponent::Breaker),
    };
    KpiSet {
        converter,
        breaker,
        overall,
        limiting,
    }
}

/// Identify the critical converter of a zone: the continuous-operation
/// converter requiring the largest inductor under the worst-case assumptions
/// (no infeed, no cable discharge, zero envelope). Ties break to the smaller
/// equivalent inductance, then to id order.
pub fn critical_converter(
    zone: &ZoneId,
    model: &GridModel,
    t_n_ms: f64,
) -> Result<Option<ConverterId>, AnalyticsError> {
    let members = match model.zones.get(zone) {
        Some(m) => m,
        None => return Ok(None),
    };
    let mut best: Option<(f64, f64, ConverterId)> = None; // (l_req, l_eq, id)
    for cid in &members.converters {
        let conv = model
            .converter(cid)
            .ok_or_else(|| AnalyticsError::InvalidInput(format!("unknown converter {cid}")))?;
        if conv.params.frt != FrtRequirement::ContinuousOperation {
            continue;
        }
        let limit = converter_limit(&conv.params).map_err(|e| match e {
            AnalyticsError::NoHeadroom { lhs, rhs, .. } => AnalyticsError::NoHeadroom {
                id: cid.to_string(),
                lhs,
                rhs,
            },
            other => other,
        })?;
        let l_eq = model.converter_l_eq_mh(conv);
        let req = inductor_for_converter(&limit, conv.params.u_dc_kv, 0.0, t_n_ms, l_eq, 0.0, 0.0)?
            .l_mh();
        let better = match &best {
            None => true,
            Some((l_best, l_eq_best, id_best)) => {
                req > *l_best + 1e-9
                    || ((req - *l_best).abs() <= 1e-9
                        && (l_eq < *l_eq_best - 1e-9
                            || ((l_eq - *l_eq_best).abs() <= 1e-9 && cid < id_best)))
            }
        };
        if better {
            best = Some((req, l_eq, cid.clone()));
        }
    }
    Ok(best.map(|(_, _, id)| id))
}

/// Critical pre-fault power flow for sizing the inductor protecting zone `i`
/// against a fault in zone `j`.
///
/// Fixed-power converters on the protected side of the breaker push power
/// toward the fault (+1 pu, clamped to their allowed range); those on the
/// faulted side absorb (-1 pu, clamped). Droop converters balance at zero
/// setpoint. Sides are graph distances over the zone adjacency with the
/// studied breaker edge removed; equidistant or unreachable converters stay
/// neutral.
pub fn critical_power_flow(
    zone_i: &ZoneId,
    zone_j: &ZoneId,
    model: &GridModel,
) -> BTreeMap<ConverterId, f64> {
    // Zone adjacency graph minus the (i, j) edge.
    let adjacency = model.zone_adjacency();
    let mut edges: Vec<(&ZoneId, &ZoneId)> = Vec::new();
    for (zi, zj) in adjacency.keys() {
        let is_studied = (zi == zone_i && zj == zone_j) || (zi == zone_j && zj == zone_i);
        if !is_studied {
            edges.push((zi, zj));
        }
    }
    let dist_from = |start: &ZoneId| -> BTreeMap<ZoneId, usize> {
        let mut dist = BTreeMap::new();
        dist.insert(start.clone(), 0usize);
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start.clone());
        while let Some(z) = queue.pop_front() {
            let d = dist[&z];
            for (a, b) in &edges {
                let next = if **a == z {
                    Some((*b).clone())
                } else if **b == z {
                    Some((*a).clone())
                } else {
                    None
                };
                if let Some(n) = next {
                    if !dist.contains_key(&n) {
                        dist.insert(n.clone(), d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    };
    let d_i = dist_from(zone_i);
    let d_j = dist_from(zone_j);

    let mut setpoints = BTreeMap::new();
    for conv in &model.converters {
        if conv.params.control == ControlMode::DcVoltageDroop {
            setpoints.insert(conv.id.clone(), 0.0);
            continue;
        }
        let zone = match model.zone_of_converter(&conv.id) {
            Some(z) => z.clone(),
            None => continue,
        };
        let di = d_i.get(&zone).copied();
        let dj = d_j.get(&zone).copied();
        let raw: f64 = match (di, dj) {
            (Some(a), Some(b)) if a < b => 1.0,
            (Some(a), Some(b)) if b < a => -1.0,
            (Some(_), None) => 1.0,
            (None, Some(_)) => -1.0,
            _ => 0.0,
        };
        let clamped = raw.clamp(conv.params.p_min_pu, conv.params.p_max_pu);
        setpoints.insert(conv.id.clone(), clamped);
    }
    setpoints
}

/// Voltage envelope of faults along a cable, as seen from the breaker end.
#[derive(Debug, Clone)]
pub struct VoltageEnvelope {
    /// min over positions of min(avg U_C over t_n, 0) (kV).
    pub u_envelope_min_kv: f64,
    /// Critical neutralization time: smallest window above which the
    /// terminal position is the worst case (ms).
    pub t_c_ms: f64,
    /// Position at which the envelope is attained (km from the breaker end).
    pub critical_position_km: f64,
    /// (position km, average U_C over t_n kV) per sampled position.
    pub table: Vec<(f64, f64)>,
    /// Peak study-breaker current per sampled position (kA), same order.
    pub breaker_peak_ka: Vec<(f64, f64)>,
    /// Number of simulator invocations spent.
    pub simulator_runs: usize,
}

/// Coarse fault-position fractions scanned along the cable.
pub const ENVELOPE_POSITIONS: [f64; 6] = [0.0, 0.10, 0.25, 0.50, 0.75, 1.0];

/// Scan pole-to-ground faults along `cable` (positions measured from
/// `from_bus`, the breaker end), average the faulted-cable terminal voltage
/// over the t_n window following wave arrival, and derive the envelope.
///
/// After the coarse scan the neighbourhood of the arg-min is refined once
/// with the midpoints to its neighbours.
#[allow(clippy::too_many_arguments)]
pub fn voltage_envelope(
    cable_id: &CableId,
    from_bus: &BusId,
    t_n_ms: f64,
    sys: &SystemState,
    plan: &MeasurementPlan,
    sim: &dyn FaultSimulator,
    horizon_ms: f64,
) -> Result<VoltageEnvelope, EmtError> {
    let cable = sys
        .model
        .cable(cable_id)
        .ok_or_else(|| EmtError::NoSuchCable(cable_id.to_string()))?;
    let len = cable.params.length_km;

    let mut runs = 0usize;
    let mut table: Vec<(f64, f64)> = Vec::new();
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    // Per-position (avg-window fn) for the t_c scan: remember enough of each
    // trace to re-average over other window lengths without re-simulating.
    let mut window_avg: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();

    let eval = |pos_km: f64| -> Result<(f64, f64, Box<dyn Fn(f64) -> f64>), EmtError> {
        let fault = FaultLocation::OnCable {
            cable: cable_id.clone(),
            from_bus: from_bus.clone(),
            position_km: pos_km,
        };
        let res = sim.run_fault_case(sys, &fault, plan, horizon_ms)?;
        let peak = res.derived.i_cb_a_ka;
        // Capture the U_C trace and arrival index for window re-averaging.
        let trace: Vec<f64> = match &plan.u_c_probe {
            VoltageProbe::CableTerminal { cable, bus } => {
                res.cable_terminal_voltage_kv[&(cable.clone(), bus.clone())].clone()
            }
            VoltageProbe::Bus { bus } => res.bus_voltage_kv[bus].clone(),
        };
        let dt = res.dt_ms;
        let arrival = (res.derived.t_arrival_ms / dt).round() as usize;
        let avg_fn = move |window_ms: f64| -> f64 {
            let steps = (window_ms / dt).round() as usize;
            let end = (arrival + steps).min(trace.len() - 1);
            let span = &trace[arrival..=end];
            span.iter().sum::<f64>() / span.len() as f64
        };
        let u_avg = avg_fn(t_n_ms);
        Ok((u_avg, peak, Box::new(avg_fn)))
    };

    let mut positions: Vec<f64> = ENVELOPE_POSITIONS.iter().map(|f| f * len).collect();
    positions.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    for &p in &positions {
        let (u, pk, f) = eval(p)?;
        runs += 1;
        table.push((p, u));
        peaks.push((p, pk));
        window_avg.push(f);
    }

    // One refinement pass around the arg-min of the clamped envelope.
    let clamped = |u: f64| u.min(0.0);
    let argmin = table
        .iter()
        .enumerate()
        .min_by(|a, b| clamped(a.1 .1).partial_cmp(&clamped(b.1 .1)).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if clamped(table[argmin].1) < 0.0 {
        let mut extra = Vec::new();
        if argmin > 0 {
            extra.push(0.5 * (table[argmin - 1].0 + table[argmin].0));
        }
        if argmin + 1 < table.len() {
            extra.push(0.5 * (table[argmin].0 + table[argmin + 1].0));
        }
        for p in extra {
            if table.iter().all(|(q, _)| (q - p).abs() > 1e-9) {
                let (u, pk, f) = eval(p)?;
                runs += 1;
                table.push((p, u));
                peaks.push((p, pk));
                window_avg.push(f);
            }
        }
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        peaks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }

    let (critical_position_km, u_min) = table
        .iter()
        .map(|&(p, u)| (p, clamped(u)))
        .min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then(a.0.partial_cmp(&b.0).unwrap())
        })
        .unwrap_or((0.0, 0.0));

    // Critical time: smallest window for which every sampled position's
    // clamped average is zero, i.e. the terminal fault becomes the worst
    // case. Re-averages the recorded traces; no further simulation.
    let t_c_ms = {
        let candidates: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
        let mut t_c = f64::NAN;
        for w in candidates {
            // Re-sort window_avg is unnecessary: order matches insertion, and
            // the criterion quantifies over all of them.
            if window_avg.iter().all(|f| f(w) >= -1e-9) {
                t_c = w;
                break;
            }
        }
        if t_c.is_nan() {
            10.0
        } else {
            t_c
        }
    };

    Ok(VoltageEnvelope {
        u_envelope_min_kv: u_min,
        t_c_ms,
        critical_position_km,
        table,
        breaker_peak_ka: peaks,
        simulator_runs: runs,
    })
}

/// Envelope of a bus fault (for zones with no cable): the terminal voltage
/// at an ideally shorted node is identically zero.
pub fn bus_fault_envelope() -> VoltageEnvelope {
    VoltageEnvelope {
        u_envelope_min_kv: 0.0,
        t_c_ms: 0.0,
        critical_position_km: 0.0,
        table: vec![(0.0, 0.0)],
        breaker_peak_ka: Vec::new(),
        simulator_runs: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_converter(k: f64) -> ConverterParams {
        ConverterParams {
            s_mva: 1034.0,
            p_mw: 1000.0,
            u_dc_kv: 525.0,
            u_ac_kv: 273.0,
            arm_peak_rated_ka: 2.2,
            i_ac_max_pu: 1.2,
            k_overcurrent: k,
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

    // Frozen oracle values, hand-evaluated with an independent calculator for
    // the 525 kV reference converter dataset.
    #[test]
    fn converter_limit_reference_values() {
        let lim = converter_limit(&reference_converter(1.5)).unwrap();
        assert_relative_eq!(lim.i_con_max_ka, 4.3337, max_relative = 1e-3);
        assert_relative_eq!(lim.delta_i_crit_ka, 2.4289, max_relative = 1e-3);

        let lim2 = converter_limit(&reference_converter(2.0)).unwrap();
        assert_relative_eq!(lim2.i_con_max_ka, 7.6337, max_relative = 1e-3);
    }

    #[test]
    fn converter_limit_zero_headroom_is_error() {
        let mut cv = reference_converter(1.5);
        // Shrink the arm budget to the boundary K * i_a_r = i_ac_hat / 2.
        cv.arm_peak_rated_ka = cv.i_ac_max_ka() / 2.0 / cv.k_overcurrent * (1.0 - 1e-12);
        assert!(converter_limit(&cv).is_err());
    }

    #[test]
    fn converter_inductor_reference_values() {
        let lim = converter_limit(&reference_converter(1.5)).unwrap();
        // No infeed, terminal fault, 2 ms window, bare converter inductance.
        let l = inductor_for_converter(&lim, 525.0, 0.0, 2.0, 10.0, 0.0, 0.0)
            .unwrap()
            .l_mh();
        assert_relative_eq!(l, 422.3, max_relative = 5e-3);

        // Doubling the denominator halves the result.
        let l2 = inductor_for_converter(&lim, 525.0, 0.0, 2.0, 10.0, lim.delta_i_crit_ka, 0.0)
            .unwrap()
            .l_mh();
        assert_relative_eq!(l2, 211.1, max_relative = 5e-3);

        // Zero window with zero equivalent inductance yields no requirement.
        let l3 = inductor_for_converter(&lim, 525.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(l3, InductorRequirement::NoConstraint);
    }

    #[test]
    fn breaker_inductor_reference_values() {
        let l = inductor_for_breaker(525.0, 0.0, 12.0, 3.0, 2.0).unwrap();
        assert_relative_eq!(l, 116.7, max_relative = 1e-3);
        let l5 = inductor_for_breaker(525.0, 0.0, 12.0, 3.0, 5.0).unwrap();
        assert_relative_eq!(l5, 291.7, max_relative = 1e-3);
        assert_eq!(inductor_for_breaker(525.0, 0.0, 12.0, 3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn convergence_test_examples() {
        assert!(converged(182.0, 190.0, 0.05));
        assert!(converged(100.0, 100.0, 0.05));
        assert!(!converged(200.0, 100.0, 0.05));
    }

    #[test]
    fn kpi_reference_values() {
        let cv = reference_converter(1.5);
        // At the blocking limit the converter margin vanishes.
        let at_limit = kpis(Some(1.5 * 2.2), 8.0, Some(&cv), 12.0, 3.0);
        assert_relative_eq!(at_limit.converter.unwrap(), 0.0, epsilon = 1e-12);
        // At rated arm current the margin is exactly one.
        let at_rated = kpis(Some(2.2), 8.0, Some(&cv), 12.0, 3.0);
        assert_relative_eq!(at_rated.converter.unwrap(), 1.0, epsilon = 1e-12);
        // Mixed case: converter at 5 %, breaker at 44.4 %, converter limits.
        let mixed = kpis(Some(3.245), 8.0, Some(&cv), 12.0, 3.0);
        assert_relative_eq!(mixed.converter.unwrap(), 0.050, epsilon = 1e-9);
        assert_relative_eq!(mixed.breaker, 0.4444, max_relative = 1e-3);
        assert_eq!(mixed.limiting, LimitingComponent::Converter);
    }

    #[test]
    fn kpi_tie_resolves_to_converter() {
        let cv = reference_converter(1.5);
        // Construct an exact tie.
        let i_a_a = 1.5 * 2.2 - 0.25 * (2.2 * 0.5); // converter margin 0.25
        let i_cb_a = 12.0 - 0.25 * 9.0; // breaker margin 0.25
        let set = kpis(Some(i_a_a), i_cb_a, Some(&cv), 12.0, 3.0);
        assert_eq!(set.limiting, LimitingComponent::Converter);
    }

    proptest::proptest! {
        // The converter relation is strictly decreasing in the measured
        // current contributions for a fixed positive numerator.
        #[test]
        fn converter_inductor_monotone_in_infeed(
            d_extra in 0.01f64..20.0,
            d_base in 0.0f64..10.0,
            t_n in 0.5f64..6.0,
            l_eq in 0.0f64..80.0,
        ) {
            let lim = ConverterLimit { i_con_max_ka: 4.0, delta_i_crit_ka: 2.0 };
            let numerator = 525.0 * t_n - l_eq * lim.delta_i_crit_ka;
            proptest::prop_assume!(numerator > 1.0);
            let a = inductor_for_converter(&lim, 525.0, 0.0, t_n, l_eq, d_base, 0.0)
                .unwrap().l_mh();
            let b = inductor_for_converter(&lim, 525.0, 0.0, t_n, l_eq, d_base + d_extra, 0.0)
                .unwrap().l_mh();
            proptest::prop_assert!(b < a);
        }

        // The breaker relation is exactly linear in t_n and in the inverse
        // current margin.
        #[test]
        fn breaker_inductor_linearity(
            t_n in 0.1f64..10.0,
            scale in 0.1f64..5.0,
            margin in 1.0f64..30.0,
        ) {
            let base = inductor_for_breaker(525.0, 0.0, 3.0 + margin, 3.0, t_n).unwrap();
            let scaled_t = inductor_for_breaker(525.0, 0.0, 3.0 + margin, 3.0, t_n * scale).unwrap();
            proptest::prop_assert!((scaled_t - base * scale).abs() < 1e-9 * base.max(1.0));
            let scaled_m = inductor_for_breaker(525.0, 0.0, 3.0 + margin * scale, 3.0, t_n).unwrap();
            proptest::prop_assert!((scaled_m - base / scale).abs() < 1e-9 * base.max(1.0));
        }

        // KPI normalization holds for any K > 1.
        #[test]
        fn kpi_normalization(k in 1.01f64..4.0) {
            let mut cv = reference_converter(1.5);
            cv.k_overcurrent = k;
            let at_rated = kpis(Some(cv.arm_peak_rated_ka), 5.0, Some(&cv), 12.0, 3.0);
            proptest::prop_assert!((at_rated.converter.unwrap() - 1.0).abs() < 1e-12);
            let at_limit = kpis(Some(k * cv.arm_peak_rated_ka), 5.0, Some(&cv), 12.0, 3.0);
            proptest::prop_assert!(at_limit.converter.unwrap().abs() < 1e-12);
        }
    }
}
