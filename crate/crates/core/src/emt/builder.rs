//! Assembly of a [`GridSim`] from a [`GridModel`]: node allocation, breaker
//! chains, cable sections (with optional fault split), converter units and
//! steady-state handling.

use std::collections::BTreeMap;

use crate::error::EmtError;
use crate::model::*;
use crate::port::FaultLocation;

use super::breaker::BreakerUnit;
use super::converter::ConverterUnit;
use super::network::{Network, SwitchPhase};

/// Breaker main-path on resistance (ohm).
const R_ON_OHM: f64 = 5e-4;
/// Varistor series resistance while clamping (ohm).
const R_MOV_OHM: f64 = 0.1;
/// Residual series resistance of the DC inductor branch (ohm).
const R_SERIES_FLOOR_OHM: f64 = 1e-4;

/// One electrical section of a cable.
#[derive(Debug, Clone)]
pub enum Segment {
    Wave {
        line: usize,
        node_a: usize,
        node_b: usize,
    },
    /// Lumped pi fallback for sections shorter than one wave step.
    Pi {
        branch: usize,
        cap_a: usize,
        cap_b: usize,
        node_a: usize,
        node_b: usize,
    },
}

/// A cable as built: terminal nodes and one or two segments (two when a
/// mid-cable fault node splits it).
#[derive(Debug, Clone)]
pub struct CableRun {
    pub node_from: usize,
    pub node_to: usize,
    /// (node, km from the `from` end) of a mid-cable fault node.
    pub fault_split: Option<(usize, f64)>,
    pub segments: Vec<Segment>,
}

/// Semantic steady-state snapshot; independent of the inductance values and
/// of any fault split, so it seeds later runs of the same flow case.
#[derive(Debug, Clone)]
pub struct SteadySeed {
    pub bus_v_kv: BTreeMap<BusId, f64>,
    /// Current into each cable at its `from` end (kA).
    pub cable_i_from_ka: BTreeMap<CableId, f64>,
    /// Breaker branch currents, bus -> cable direction (kA).
    pub breaker_i_ka: BTreeMap<BreakerId, f64>,
    /// (internal voltage kV, integrator kV, terminal current kA).
    pub converter: BTreeMap<ConverterId, (f64, f64, f64)>,
}

pub struct GridSim {
    pub net: Network,
    pub model: GridModel,
    pub bus_node: BTreeMap<BusId, usize>,
    /// Node each (cable, end-bus) pair attaches to (breaker terminal or bus).
    pub attach_node: BTreeMap<(CableId, BusId), usize>,
    pub cables: BTreeMap<CableId, CableRun>,
    pub converters: Vec<ConverterUnit>,
    pub breakers: Vec<BreakerUnit>,
    pub fault_node: Option<usize>,
    pub faulted_zone: Option<ZoneId>,
    max_tau_ms: f64,
}

impl GridSim {
    /// Build the discretized grid. `fault` pre-allocates the fault node (not
    /// yet clamped) so the topology is identical before and after t = 0.
    pub fn build(
        model: &GridModel,
        dt_ms: f64,
        setpoints_pu: &BTreeMap<ConverterId, f64>,
        fault: Option<&FaultLocation>,
    ) -> Result<GridSim, EmtError> {
        let mut net = Network::new(dt_ms);
        let u_dc = model.u_dc_kv;

        let mut bus_node = BTreeMap::new();
        for b in &model.buses {
            let n = net.add_node(format!("bus:{b}"));
            bus_node.insert(b.clone(), n);
        }

        // Breaker chains: bus -- switch -- mid -- L_dc -- term.
        let mut attach_node: BTreeMap<(CableId, BusId), usize> = BTreeMap::new();
        let mut breakers = Vec::new();
        for br in &model.breakers {
            let nb = bus_node[&br.bus];
            let mid = net.add_node(format!("brk:{}:mid", br.id));
            let term = net.add_node(format!("brk:{}:term", br.id));
            let sw = net.add_switch(
                format!("brk:{}:sw", br.id),
                Some(nb),
                Some(mid),
                R_ON_OHM,
                R_MOV_OHM,
                br.params.clamp_pu * u_dc,
            );
            net.add_series_rl(
                format!("brk:{}:ldc", br.id),
                Some(mid),
                Some(term),
                R_SERIES_FLOOR_OHM,
                br.l_dc_mh,
            );
            attach_node.insert((br.cable.clone(), br.bus.clone()), term);
            breakers.push(BreakerUnit::new(
                br.id.clone(),
                br.params.clone(),
                nb,
                sw,
                u_dc,
            ));
        }

        // Resolve the fault request to (cable, km-from-from-end) or a bus.
        let mut fault_on_cable: Option<(CableId, f64)> = None;
        let mut fault_node = None;
        let mut faulted_zone = None;
        if let Some(f) = fault {
            match f {
                FaultLocation::AtBus { bus } => {
                    let n = *bus_node
                        .get(bus)
                        .ok_or_else(|| EmtError::NoSuchCable(format!("bus {bus}")))?;
                    fault_node = Some(n);
                    faulted_zone = model.zone_of_bus(bus).cloned();
                }
                FaultLocation::OnCable {
                    cable,
                    from_bus,
                    position_km,
                } => {
                    let c = model
                        .cable(cable)
                        .ok_or_else(|| EmtError::NoSuchCable(cable.to_string()))?;
                    let len = c.params.length_km;
                    if *position_km < -1e-9 || *position_km > len + 1e-9 {
                        return Err(EmtError::FaultOutsideCable {
                            cable: cable.to_string(),
                            position_km: *position_km,
                            length_km: len,
                        });
                    }
                    let d = if *from_bus == c.from {
                        *position_km
                    } else {
                        len - *position_km
                    };
                    fault_on_cable = Some((cable.clone(), d.clamp(0.0, len)));
                    faulted_zone = model.zone_of_cable(cable).cloned();
                }
            }
        }

        // Cables.
        let mut cables = BTreeMap::new();
        for c in &model.cables {
            let n_from = *attach_node
                .get(&(c.id.clone(), c.from.clone()))
                .unwrap_or(&bus_node[&c.from]);
            let n_to = *attach_node
                .get(&(c.id.clone(), c.to.clone()))
                .unwrap_or(&bus_node[&c.to]);
            attach_node.entry((c.id.clone(), c.from.clone())).or_insert(n_from);
            attach_node.entry((c.id.clone(), c.to.clone())).or_insert(n_to);

            let len = c.params.length_km;
            let mut fault_split = None;
            let mut segments = Vec::new();

            let snap_km = (c.params.wave_velocity_km_per_ms() * dt_ms).max(1e-3);
            let split_at = match &fault_on_cable {
                Some((cid, d)) if *cid == c.id => {
                    if *d <= snap_km {
                        fault_node = Some(n_from);
                        None
                    } else if *d >= len - snap_km {
                        fault_node = Some(n_to);
                        None
                    } else {
                        Some(*d)
                    }
                }
                _ => None,
            };

            match split_at {
                None => {
                    segments.push(Self::build_segment(
                        &mut net,
                        &format!("cab:{}", c.id),
                        n_from,
                        n_to,
                        &c.params,
                        len,
                    ));
                }
                Some(d) => {
                    let nf = net.add_node(format!("cab:{}:fault", c.id));
                    segments.push(Self::build_segment(
                        &mut net,
                        &format!("cab:{}:near", c.id),
                        n_from,
                        nf,
                        &c.params,
                        d,
                    ));
                    segments.push(Self::build_segment(
                        &mut net,
                        &format!("cab:{}:far", c.id),
                        nf,
                        n_to,
                        &c.params,
                        len - d,
                    ));
                    fault_split = Some((nf, d));
                    fault_node = Some(nf);
                }
            }

            cables.insert(
                c.id.clone(),
                CableRun {
                    node_from: n_from,
                    node_to: n_to,
                    fault_split,
                    segments,
                },
            );
        }

        // Converters: internal source behind the equivalent arm impedance,
        // aggregate submodule capacitance at the terminal.
        let mut converters = Vec::new();
        for conv in &model.converters {
            let nt = bus_node[&conv.bus];
            let ne = net.add_node(format!("conv:{}:e", conv.id));
            net.set_fixed(ne, Some(u_dc));
            let branch = net.add_series_rl(
                format!("conv:{}:arm", conv.id),
                Some(ne),
                Some(nt),
                conv.params.equivalent_resistance_ohm(),
                conv.params.equivalent_inductance_mh(),
            );
            net.add_capacitor(
                format!("conv:{}:cdc", conv.id),
                Some(nt),
                None,
                conv.params.aggregate_dc_capacitance_uf() * 1e-3,
            );
            let p_set = setpoints_pu.get(&conv.id).copied().unwrap_or(0.0) * conv.params.p_mw;
            converters.push(ConverterUnit::new(
                conv.id.clone(),
                conv.params.clone(),
                p_set,
                ne,
                nt,
                branch,
                u_dc,
            ));
        }

        let max_tau_ms = model
            .cables
            .iter()
            .map(|c| c.params.travel_delay_ms())
            .fold(0.0, f64::max);

        let mut sim = GridSim {
            net,
            model: model.clone(),
            bus_node,
            attach_node,
            cables,
            converters,
            breakers,
            fault_node,
            faulted_zone,
            max_tau_ms,
        };
        sim.flat_start();
        Ok(sim)
    }

    fn build_segment(
        net: &mut Network,
        name: &str,
        node_a: usize,
        node_b: usize,
        p: &CableParams,
        length_km: f64,
    ) -> Segment {
        let tau = length_km / p.wave_velocity_km_per_ms();
        if tau >= net.dt_ms {
            let line = net.add_wave_line(
                name,
                Some(node_a),
                Some(node_b),
                p.surge_impedance_ohm(),
                tau,
                p.r_ohm_per_km * length_km,
            );
            Segment::Wave { line, node_a, node_b }
        } else {
            log::warn!(
                "cable section {name} ({length_km:.2} km) shorter than one wave step; using lumped pi fallback"
            );
            let r = (p.r_ohm_per_km * length_km).max(1e-6);
            let l = p.l_mh_per_km * length_km;
            let c_half = 0.5 * p.c_uf_per_km * length_km * 1e-3;
            let branch = net.add_series_rl(format!("{name}:rl"), Some(node_a), Some(node_b), r, l);
            let cap_a = net.add_capacitor(format!("{name}:ca"), Some(node_a), None, c_half);
            let cap_b = net.add_capacitor(format!("{name}:cb"), Some(node_b), None, c_half);
            Segment::Pi {
                branch,
                cap_a,
                cap_b,
                node_a,
                node_b,
            }
        }
    }

    /// Reset every state to the uniform no-load operating point at rated
    /// voltage.
    pub fn flat_start(&mut self) {
        let u = self.model.u_dc_kv;
        for v in self.net.v.iter_mut() {
            *v = u;
        }
        for i in 0..self.net.fixed.len() {
            if self.net.fixed[i].is_some() {
                self.net.update_fixed(i, u);
            }
        }
        for c in self.net.capacitors.iter_mut() {
            c.v_prev = u; // all capacitors are shunt (node to ground)
            c.i_prev = 0.0;
        }
        for rl in self.net.series_rl.iter_mut() {
            rl.v_prev = 0.0;
            rl.i_prev = 0.0;
            rl.enabled = true;
        }
        for l in self.net.lines.iter_mut() {
            let s = u; // v = u, i = 0
            l.hist_a.iter_mut().for_each(|x| *x = s);
            l.hist_b.iter_mut().for_each(|x| *x = s);
            l.i_a = 0.0;
            l.i_b = 0.0;
        }
        for s in self.net.switches.iter_mut() {
            s.phase = SwitchPhase::Closed;
            s.i = 0.0;
            s.v_cv = 0.0;
            s.energy_kj = 0.0;
        }
        for cv in self.converters.iter_mut() {
            cv.e_kv = u;
            cv.integrator_kv = 0.0;
            cv.blocked = false;
            cv.block_time_ms = None;
            cv.i_a_est_ka = 0.0;
            cv.conducting = true;
        }
        self.net.time_ms = 0.0;
        self.net.step_count = 0;
        self.net.line_energy_in_kj = 0.0;
    }

    /// One solver step plus all control updates and the divergence guard.
    pub fn step(&mut self) -> Result<(), EmtError> {
        self.net.step()?;
        let limit = 10.0 * self.model.u_dc_kv;
        for (i, &v) in self.net.v.iter().enumerate() {
            if !v.is_finite() || v.abs() > limit {
                return Err(EmtError::Diverged {
                    step: self.net.step_count,
                    t_ms: self.net.time_ms,
                    node: self.net.names[i].clone(),
                    v_kv: v,
                });
            }
        }
        let net = &mut self.net;
        for cv in self.converters.iter_mut() {
            cv.control_step(net);
        }
        for br in self.breakers.iter_mut() {
            br.control_step(net);
        }
        Ok(())
    }

    /// Run until every bus voltage is stable (0.1 % of rated over a 5 ms
    /// window) and every constant-power converter tracks its setpoint within
    /// 1 % of rating. Errors after `limit_ms` of simulated time.
    pub fn settle(&mut self, limit_ms: f64) -> Result<(), EmtError> {
        const WINDOW_MS: f64 = 5.0;
        let u = self.model.u_dc_kv;
        let tol_v = 1e-3 * u;
        let check_every = (0.5 / self.net.dt_ms).max(1.0) as usize;
        let window_checks = (WINDOW_MS / 0.5).round() as usize;
        let min_time = (2.0 * self.max_tau_ms + WINDOW_MS).max(10.0);

        let mut history: Vec<Vec<f64>> = Vec::new();
        let start = self.net.time_ms;
        loop {
            for _ in 0..check_every {
                self.step()?;
            }
            let snapshot: Vec<f64> = self.bus_node.values().map(|&n| self.net.v[n]).collect();
            history.push(snapshot);
            if history.len() > window_checks + 1 {
                history.remove(0);
            }
            let elapsed = self.net.time_ms - start;
            if elapsed >= min_time && history.len() > window_checks {
                let stable = (0..self.bus_node.len()).all(|i| {
                    let vals: Vec<f64> = history.iter().map(|h| h[i]).collect();
                    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    max - min < tol_v
                });
                let powers_ok = self.converters.iter().all(|cv| {
                    cv.params.control != ControlMode::ConstantPq
                        || (cv.p_out_mw(&self.net) - cv.p_set_mw).abs() < 0.01 * cv.params.p_mw
                });
                if stable && powers_ok {
                    return Ok(());
                }
            }
            if elapsed > limit_ms {
                return Err(EmtError::NoSteadyState { limit_ms });
            }
        }
    }

    /// Capture the semantic operating point.
    pub fn snapshot_seed(&self) -> SteadySeed {
        let bus_v_kv = self
            .bus_node
            .iter()
            .map(|(b, &n)| (b.clone(), self.net.v[n]))
            .collect();
        let cable_i_from_ka = self
            .cables
            .iter()
            .map(|(id, run)| {
                let i = match &run.segments[0] {
                    Segment::Wave { line, .. } => self.net.lines[*line].i_a,
                    Segment::Pi { branch, .. } => self.net.series_rl[*branch].i_prev,
                };
                (id.clone(), i)
            })
            .collect();
        let breaker_i_ka = self
            .breakers
            .iter()
            .map(|b| (b.id.clone(), self.net.switches[b.switch].i))
            .collect();
        let converter = self
            .converters
            .iter()
            .map(|c| {
                (
                    c.id.clone(),
                    (c.e_kv, c.integrator_kv, c.i_dc_ka(&self.net)),
                )
            })
            .collect();
        SteadySeed {
            bus_v_kv,
            cable_i_from_ka,
            breaker_i_ka,
            converter,
        }
    }

    /// Rebuild the full network state from a semantic seed. The DC operating
    /// point does not depend on inductances, so seeds transfer across runs
    /// with different series inductor values and fault splits.
    pub fn restore_seed(&mut self, seed: &SteadySeed) {
        self.flat_start();
        for (b, &n) in &self.bus_node {
            if let Some(v) = seed.bus_v_kv.get(b) {
                self.net.v[n] = *v;
            }
        }
        // Breaker chains: propagate bus voltage through R_on and the
        // inductor's residual resistance.
        for (bu, br) in self.breakers.iter().zip(self.model.breakers.iter()) {
            let i = seed.breaker_i_ka.get(&bu.id).copied().unwrap_or(0.0);
            let v_bus = self.net.v[bu.node_bus];
            self.net.switches[bu.switch].i = i;
            let v_mid = v_bus - i * R_ON_OHM;
            let name = format!("brk:{}:ldc", br.id);
            if let Some(idx) = self.net.series_rl.iter().position(|r| r.name == name) {
                let (mid, term, r) = {
                    let rl = &mut self.net.series_rl[idx];
                    rl.i_prev = i;
                    rl.v_prev = i * rl.r;
                    (
                        rl.a.expect("breaker mid node"),
                        rl.b.expect("breaker term node"),
                        rl.r,
                    )
                };
                self.net.v[mid] = v_mid;
                self.net.v[term] = v_mid - i * r;
            }
        }
        // Cables: linear voltage profile along the run, uniform current.
        for (cid, run) in &self.cables {
            let cable = self.model.cable(cid).expect("cable exists");
            let i_from = seed.cable_i_from_ka.get(cid).copied().unwrap_or(0.0);
            let v_from = self.net.v[run.node_from];
            if let Some((nf, d)) = run.fault_split {
                self.net.v[nf] = v_from - i_from * cable.params.r_ohm_per_km * d;
            }
            for seg in &run.segments {
                match seg {
                    Segment::Wave { line, node_a, node_b } => {
                        let l = &mut self.net.lines[*line];
                        let va = self.net.v[*node_a];
                        let vb = self.net.v[*node_b];
                        l.i_a = i_from;
                        l.i_b = -i_from;
                        let sa = va + l.h * l.i_a;
                        let sb = vb + l.h * l.i_b;
                        l.hist_a.iter_mut().for_each(|x| *x = sa);
                        l.hist_b.iter_mut().for_each(|x| *x = sb);
                    }
                    Segment::Pi {
                        branch,
                        cap_a,
                        cap_b,
                        node_a,
                        node_b,
                    } => {
                        let va = self.net.v[*node_a];
                        let vb = self.net.v[*node_b];
                        let rl = &mut self.net.series_rl[*branch];
                        rl.i_prev = i_from;
                        rl.v_prev = va - vb;
                        self.net.capacitors[*cap_a].v_prev = va;
                        self.net.capacitors[*cap_b].v_prev = vb;
                    }
                }
            }
        }
        for cv in self.converters.iter_mut() {
            if let Some((e, x, i)) = seed.converter.get(&cv.id) {
                cv.e_kv = *e;
                cv.integrator_kv = *x;
                self.net.update_fixed(cv.node_e, *e);
                self.net.v[cv.node_e] = *e;
                let rl = &mut self.net.series_rl[cv.branch];
                rl.i_prev = *i;
                rl.v_prev = *i * rl.r;
            }
        }
        // Shunt capacitors at buses follow the restored node voltages.
        for c in self.net.capacitors.iter_mut() {
            if let Some(n) = c.a {
                c.v_prev = self.net.v[n];
            }
        }
    }

    /// Clamp the fault node to ground and arm the breakers bounding the
    /// faulted zone. Resets the clock so traces start at fault application.
    pub fn apply_fault(&mut self) {
        let node = self.fault_node.expect("fault node allocated at build time");
        self.net.set_fixed(node, Some(0.0));
        if let Some(zone) = &self.faulted_zone {
            let pairs: BTreeMap<BreakerId, (ZoneId, ZoneId)> = self
                .model
                .breakers
                .iter()
                .filter_map(|b| self.model.breaker_zone_pair(b).map(|p| (b.id.clone(), p)))
                .collect();
            for bu in self.breakers.iter_mut() {
                if let Some((zi, zj)) = pairs.get(&bu.id) {
                    bu.armed = zi == zone || zj == zone;
                }
            }
        }
        self.net.time_ms = 0.0;
        self.net.step_count = 0;
    }

    /// Current flowing from `cable` into the attachment node at `bus` (kA).
    pub fn cable_end_current(&self, cable: &CableId, bus: &BusId) -> f64 {
        let run = &self.cables[cable];
        let c = self.model.cable(cable).expect("cable exists");
        let at_from = *bus == c.from;
        let seg = if at_from {
            run.segments.first()
        } else {
            run.segments.last()
        };
        match seg {
            Some(Segment::Wave { line, .. }) => {
                let l = &self.net.lines[*line];
                if at_from {
                    -l.i_a
                } else {
                    -l.i_b
                }
            }
            Some(Segment::Pi {
                branch,
                cap_a,
                cap_b,
                ..
            }) => {
                let i_series = self.net.series_rl[*branch].i_prev;
                if at_from {
                    -(i_series + self.net.capacitors[*cap_a].i_prev)
                } else {
                    i_series - self.net.capacitors[*cap_b].i_prev
                }
            }
            None => 0.0,
        }
    }
}
