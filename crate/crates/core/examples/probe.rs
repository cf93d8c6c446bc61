//! Scratch probe for engine behaviour on the bundled case studies.

use std::collections::BTreeMap;

use hvdcsize_core::analytics::{self, critical_power_flow};
use hvdcsize_core::emt::BuiltinSimulator;
use hvdcsize_core::model::*;
use hvdcsize_core::port::{FaultLocation, FaultSimulator, MeasurementPlan, SystemState, VoltageProbe};

fn main() {
    let (model, scens) = hvdcsize_core::load_config("configs/case_study_1.json").unwrap();
    let scen = &scens[0];
    let model = model.with_scenario_inputs(scen);
    println!("scenario {} K={} Imax={} tcb={}", scen.id, scen.k_pu, scen.i_cb_max_ka, scen.t_cb_ms);

    let z1 = ZoneId::new("Z1");
    let z2 = ZoneId::new("Z2");
    let crit = analytics::critical_converter(&z1, &model, scen.neutralization_time_ms()).unwrap();
    println!("critical converter of Z1: {crit:?}");
    let sp = critical_power_flow(&z1, &z2, &model);
    println!("setpoints for (Z1,Z2): {sp:?}");
    let sp21 = critical_power_flow(&z2, &z1, &model);
    println!("setpoints for (Z2,Z1): {sp21:?}");

    let sim = BuiltinSimulator::new();

    // Terminal fault on trunk1 just past breaker B12, sweep inductances.
    for l_mh in [422.3_f64, 300.0, 200.0, 150.0, 116.7, 80.0] {
        let mut m = model.clone();
        m.breaker_mut(&BreakerId::new("B12")).unwrap().l_dc_mh = l_mh;
        let plan = MeasurementPlan {
            breaker: BreakerId::new("B12"),
            t_n_ms: scen.neutralization_time_ms(),
            critical_converter: crit.clone(),
            infeed_bus: BusId::new("B1"),
            infeed_cables: vec![CableId::new("stub")],
            connection_cable: None,
            u_c_probe: VoltageProbe::CableTerminal {
                cable: CableId::new("trunk1"),
                bus: BusId::new("B1"),
            },
        };
        let sys = SystemState {
            model: &m,
            scenario: scen,
            setpoints_pu: &sp,
        };
        let fault = FaultLocation::OnCable {
            cable: CableId::new("trunk1"),
            from_bus: BusId::new("B1"),
            position_km: 0.0,
        };
        let t0 = std::time::Instant::now();
        match sim.run_fault_case(&sys, &fault, &plan, 10.0) {
            Ok(res) => {
                let d = &res.derived;
                let set = analytics::kpis(
                    d.i_a_a_ka,
                    d.i_cb_a_ka,
                    Some(&m.converter(&ConverterId::new("C1")).unwrap().params),
                    scen.i_cb_max_ka,
                    3.0,
                );
                println!(
                    "L={l_mh:7.1} mH  dIin={:6.3}  dIcab={:6.3}  i_a_a={:6.3}  I_cb_a={:6.3}  Uc_avg={:7.2}  arr={:5.3} kpi_con={:?} kpi_cb={:.3} blocked={:?}  ({} ms)",
                    d.delta_i_in_ka,
                    d.delta_i_cab_ka,
                    d.i_a_a_ka.unwrap_or(f64::NAN),
                    d.i_cb_a_ka,
                    d.u_c_avg_kv,
                    d.t_arrival_ms,
                    set.converter.map(|x| (x * 1000.0).round() / 1000.0),
                    set.breaker,
                    res.blocked_converters.keys().collect::<Vec<_>>(),
                    t0.elapsed().as_millis(),
                );
            }
            Err(e) => println!("L={l_mh:7.1} mH  error: {e}"),
        }
    }

    // No-load steady state sanity.
    let zero: BTreeMap<ConverterId, f64> = BTreeMap::new();
    let sys = SystemState {
        model: &model,
        scenario: scen,
        setpoints_pu: &zero,
    };
    let t0 = std::time::Instant::now();
    match sim.initialize_steady_state(&sys) {
        Ok(g) => {
            println!("no-load settle ok in {} ms wall", t0.elapsed().as_millis());
            for (b, &n) in &g.bus_node {
                println!("  {b}: {:.3} kV", g.net.v[n]);
            }
        }
        Err(e) => println!("no-load settle failed: {e}"),
    }
}
