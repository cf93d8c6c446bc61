//! Controller settling diagnostics.

use std::collections::BTreeMap;

use hvdcsize_core::emt::GridSim;
use hvdcsize_core::model::*;

fn main() {
    let (model, scens) = hvdcsize_core::load_config("configs/case_study_1.json").unwrap();
    let scen = &scens[0];
    let model = model.with_scenario_inputs(scen);

    let mut sp: BTreeMap<ConverterId, f64> = BTreeMap::new();
    sp.insert(ConverterId::new("C1"), 1.0);
    sp.insert(ConverterId::new("C3"), -1.0);
    sp.insert(ConverterId::new("C4"), -1.0);

    let mut sim = GridSim::build(&model, scen.dt_us * 1e-3, &sp, None).unwrap();
    for k in 0..40 {
        for _ in 0..(10.0 / (scen.dt_us * 1e-3)) as usize {
            if let Err(e) = sim.step() {
                println!("step error at {:.2} ms: {e}", sim.net.time_ms);
                return;
            }
        }
        let t = sim.net.time_ms;
        let powers: Vec<String> = sim
            .converters
            .iter()
            .map(|c| format!("{}={:7.1}MW(E={:6.1})", c.id, c.p_out_mw(&sim.net), c.e_kv))
            .collect();
        let vb1 = sim.net.v[sim.bus_node[&BusId::new("B1")]];
        let vb2 = sim.net.v[sim.bus_node[&BusId::new("B2")]];
        println!("t={t:6.1} ms  vB1={vb1:7.2} vB2={vb2:7.2}  {}", powers.join(" "));
        if k == 39 {
            break;
        }
    }
}
