//! Breaker unit: trip scheduling on local wave arrival, varistor insertion
//! after the internal commutation time, opening at the first current zero.

use crate::model::{BreakerId, BreakerParams};

use super::network::{Network, SwitchPhase};

#[derive(Debug, Clone)]
pub struct BreakerUnit {
    pub id: BreakerId,
    pub params: BreakerParams,
    /// Bus-side node (wave-arrival detection point).
    pub node_bus: usize,
    /// Index of the main switch in `Network::switches`.
    pub switch: usize,
    /// Only breakers bounding the faulted zone react to the fault.
    pub armed: bool,
    /// Local wave arrival (ms), once detected.
    pub arrival_ms: Option<f64>,
    /// Trip command time: arrival + relay delay (ms).
    pub trip_ms: Option<f64>,
    /// Detection threshold (kV).
    pub detect_kv: f64,
}

impl BreakerUnit {
    pub fn new(
        id: BreakerId,
        params: BreakerParams,
        node_bus: usize,
        switch: usize,
        u_rated_kv: f64,
    ) -> Self {
        BreakerUnit {
            id,
            params,
            node_bus,
            switch,
            armed: false,
            arrival_ms: None,
            trip_ms: None,
            detect_kv: 0.95 * u_rated_kv,
        }
    }

    pub fn phase(&self, net: &Network) -> SwitchPhase {
        net.switches[self.switch].phase
    }

    pub fn current_ka(&self, net: &Network) -> f64 {
        net.switches[self.switch].i
    }

    /// Per-step state machine. Phases only move forward.
    pub fn control_step(&mut self, net: &mut Network) {
        if !self.armed {
            return;
        }
        let t = net.time_ms;
        if self.arrival_ms.is_none() && net.v[self.node_bus] < self.detect_kv {
            self.arrival_ms = Some(t);
            self.trip_ms = Some(t + self.params.t_relay_ms);
        }
        let phase = net.switches[self.switch].phase;
        match phase {
            SwitchPhase::Closed => {
                if let Some(trip) = self.trip_ms {
                    if t >= trip - 1e-12 {
                        net.switches[self.switch].phase = SwitchPhase::Commutating;
                        // Conductance unchanged; no rebuild needed.
                    }
                }
            }
            SwitchPhase::Commutating => {
                let trip = self.trip_ms.expect("commutating implies tripped");
                if t >= trip + self.params.t_cb_ms - 1e-12 {
                    let sw = &mut net.switches[self.switch];
                    sw.phase = SwitchPhase::Clamping;
                    sw.v_cv = sw.clamp_kv * sw.i.signum();
                    net.mark_dirty();
                }
            }
            SwitchPhase::Clamping => {
                let sw = &net.switches[self.switch];
                if sw.i == 0.0 || sw.i.signum() != sw.v_cv.signum() {
                    net.switches[self.switch].phase = SwitchPhase::Open;
                    net.mark_dirty();
                }
            }
            SwitchPhase::Open => {}
        }
    }
}
