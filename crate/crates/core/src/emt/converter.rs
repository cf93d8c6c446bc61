//! Average-value converter unit: a controlled internal voltage behind the
//! equivalent arm impedance, with droop / constant-power outer control, the
//! AC-side current limit folded into both the power saturation and the
//! arm-current estimate, and a latched blocking state.

use crate::model::{ControlMode, ConverterId, ConverterParams};

use super::network::Network;

/// Integral gain of the constant-power controller (kV per MW*ms).
pub const PQ_KI: f64 = 8.0e-4;
/// Proportional gain of the constant-power controller (kV per MW).
pub const PQ_KP: f64 = 2.0e-3;
/// Low-pass on the measured power feeding the outer controllers (ms);
/// keeps them from chasing traveling-wave content.
pub const P_FILTER_MS: f64 = 2.0;
/// Voltage-command tracking constant, constant-power mode (ms).
pub const CMD_TIME_CONSTANT_MS: f64 = 0.2;
/// Voltage-command tracking constant, droop mode (ms). The droop
/// characteristic is stiff; the slower actuator keeps the loop clear of the
/// cable reflection band.
pub const DROOP_TRACK_MS: f64 = 5.0;
/// Ceiling on the voltage command (pu of rated).
pub const E_CMD_MAX_PU: f64 = 1.15;

#[derive(Debug, Clone)]
pub struct ConverterUnit {
    pub id: ConverterId,
    pub params: ConverterParams,
    /// Active power setpoint (MW).
    pub p_set_mw: f64,
    /// Node index of the controlled internal voltage.
    pub node_e: usize,
    /// Node index of the DC terminal (its bus).
    pub node_t: usize,
    /// Index of the series R-L branch in `Network::series_rl`.
    pub branch: usize,
    /// Internal voltage presently applied (kV).
    pub e_kv: f64,
    /// Integrator state of the constant-power controller (kV).
    pub integrator_kv: f64,
    /// Filtered terminal power (MW).
    pub p_filt_mw: f64,
    pub blocked: bool,
    pub block_time_ms: Option<f64>,
    /// Latched estimate of the peak arm current seen so far (kA).
    pub i_a_est_ka: f64,
    /// Conduction flag after blocking; reverse current opens the branch.
    pub conducting: bool,
}

impl ConverterUnit {
    pub fn new(
        id: ConverterId,
        params: ConverterParams,
        p_set_mw: f64,
        node_e: usize,
        node_t: usize,
        branch: usize,
        e0_kv: f64,
    ) -> Self {
        ConverterUnit {
            id,
            params,
            p_set_mw,
            node_e,
            node_t,
            branch,
            e_kv: e0_kv,
            integrator_kv: 0.0,
            p_filt_mw: 0.0,
            blocked: false,
            block_time_ms: None,
            i_a_est_ka: 0.0,
            conducting: true,
        }
    }

    /// DC terminal current, positive = injection into the grid (kA).
    pub fn i_dc_ka(&self, net: &Network) -> f64 {
        net.series_rl[self.branch].i_prev
    }

    /// Arm-current estimate from the DC current and the AC current limit.
    pub fn arm_estimate_ka(&self, i_dc_ka: f64) -> f64 {
        self.params.arm_current_estimate_ka(i_dc_ka)
    }

    /// Per-step control update. Reads the solved step, commands the internal
    /// voltage for the next one.
    pub fn control_step(&mut self, net: &mut Network) {
        let dt = net.dt_ms;
        let i_dc = self.i_dc_ka(net);
        let v_t = net.v[self.node_t];
        let u_ref = self.params.u_dc_kv;

        let est = self.arm_estimate_ka(i_dc);
        self.i_a_est_ka = self.i_a_est_ka.max(est);

        if !self.blocked && est > self.params.blocking_threshold_ka() {
            self.blocked = true;
            self.block_time_ms = Some(net.time_ms);
        }

        if self.blocked {
            // Internal voltage frozen; conduction becomes one-way. Reverse
            // current opens the branch, forward bias recloses it.
            if self.conducting && i_dc < -1e-6 {
                self.conducting = false;
                net.series_rl[self.branch].enabled = false;
                net.mark_dirty();
            } else if !self.conducting && self.e_kv > v_t + 1.0 {
                self.conducting = true;
                net.series_rl[self.branch].enabled = true;
                net.mark_dirty();
            }
            return;
        }

        let p_out = v_t * i_dc;
        let p_limit = self.params.p_ac_limit_mw();
        let e_cmd = match self.params.control {
            ControlMode::DcVoltageDroop => {
                let k = self.params.droop_kv_per_mw.unwrap_or(0.02);
                u_ref - k * (p_out - self.p_set_mw)
            }
            ControlMode::ConstantPq => {
                // PI control on the power error; the AC-side capability
                // bounds how hard the converter may push.
                let err = (self.p_set_mw - p_out).clamp(-p_limit, p_limit);
                self.integrator_kv += PQ_KI * err * dt;
                let cap = 0.25 * u_ref;
                self.integrator_kv = self.integrator_kv.clamp(-cap, cap);
                u_ref + self.integrator_kv + PQ_KP * err
            }
        };
        let e_cmd = e_cmd.clamp(0.0, E_CMD_MAX_PU * u_ref);

        // First-order tracking toward the command.
        let alpha = dt / (CMD_TIME_CONSTANT_MS + dt);
        self.e_kv += alpha * (e_cmd - self.e_kv);
        net.update_fixed(self.node_e, self.e_kv);
    }

    /// Measured active power at the terminal (MW).
    pub fn p_out_mw(&self, net: &Network) -> f64 {
        net.v[self.node_t] * self.i_dc_ka(net)
    }
}
