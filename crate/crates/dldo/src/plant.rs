//! Electrical model of the output node: gated PMOS current arrays charging
//! the load capacitor against a constant-current or resistive load. The
//! node is advanced in closed form between clock edges so ripple figures
//! reflect the controller, not integrator step error.

use crate::controller::ThermometerCode;
use crate::error::{DldoError, Result};

/// Load attached to the output node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadModel {
    /// Fixed current sink [A], independent of output voltage.
    ConstantCurrent { i_load: f64 },
    /// Resistor to ground [ohm].
    Resistive { r_load: f64 },
}

/// Output-stage parameterization: rails, load capacitor, array sizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Supply rail [V].
    pub v_dd: f64,
    /// Load capacitance [F].
    pub c_load: f64,
    pub load_model: LoadModel,
    /// Current of one coarse PMOS unit [A].
    pub i_unit_coarse: f64,
    /// Current of one fine PMOS unit [A].
    pub i_unit_fine: f64,
    /// Coarse array width.
    pub n_coarse: u32,
    /// Fine array width.
    pub n_fine: u32,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            v_dd: 1.8,
            c_load: 100e-12,
            load_model: LoadModel::ConstantCurrent { i_load: 10e-3 },
            // full coarse array covers the 10 mA maximum load
            i_unit_coarse: 312.5e-6,
            i_unit_fine: 50e-6,
            n_coarse: 32,
            n_fine: 64,
        }
    }
}

/// Output node state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Output voltage [V], held inside [0, v_dd].
    pub v_out: f64,
    /// Absolute time [s].
    pub t: f64,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self.v_dd.is_finite()
            && self.c_load.is_finite()
            && self.i_unit_coarse.is_finite()
            && self.i_unit_fine.is_finite()
            && match self.load_model {
                LoadModel::ConstantCurrent { i_load } => i_load.is_finite(),
                LoadModel::Resistive { r_load } => r_load.is_finite(),
            };
        if !finite {
            return Err(DldoError::NonFinite { context: "plant config" });
        }
        if self.v_dd <= 0.0 {
            return Err(DldoError::InvalidConfig("v_dd must be > 0".into()));
        }
        if self.c_load <= 0.0 {
            return Err(DldoError::InvalidConfig("c_load must be > 0".into()));
        }
        if self.i_unit_coarse <= 0.0 || self.i_unit_fine <= 0.0 {
            return Err(DldoError::InvalidConfig("unit currents must be > 0".into()));
        }
        if self.i_unit_coarse <= self.i_unit_fine {
            return Err(DldoError::InvalidConfig(
                "i_unit_coarse must exceed i_unit_fine".into(),
            ));
        }
        if self.n_coarse < 1 || self.n_fine < 1 {
            return Err(DldoError::InvalidConfig("array widths must be >= 1".into()));
        }
        match self.load_model {
            LoadModel::ConstantCurrent { i_load } if i_load < 0.0 => {
                Err(DldoError::InvalidConfig("i_load must be >= 0".into()))
            }
            LoadModel::Resistive { r_load } if r_load <= 0.0 => {
                Err(DldoError::InvalidConfig("r_load must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Total array current for the given register states. Devices are ideal
    /// gate-switched current sources, so this is exact unit arithmetic.
    pub fn drive_current(&self, coarse: &ThermometerCode, fine: &ThermometerCode) -> f64 {
        debug_assert_eq!(coarse.width(), self.n_coarse);
        debug_assert_eq!(fine.width(), self.n_fine);
        coarse.count() as f64 * self.i_unit_coarse + fine.count() as f64 * self.i_unit_fine
    }

    /// Advance the node by `dt` with `i_drive` held constant (zero-order
    /// hold). Constant-current loads integrate the net current; resistive
    /// loads follow the exact affine-ODE solution. The result is clamped to
    /// the rails.
    pub fn advance(&self, state: PlantState, i_drive: f64, dt: f64) -> Result<PlantState> {
        if !state.v_out.is_finite() || !i_drive.is_finite() || !dt.is_finite() {
            return Err(DldoError::NonFinite { context: "plant advance" });
        }
        if dt < 0.0 {
            return Err(DldoError::InvalidConfig("advance requires dt >= 0".into()));
        }
        let v_next = match self.load_model {
            LoadModel::ConstantCurrent { i_load } => {
                state.v_out + (i_drive - i_load) * dt / self.c_load
            }
            LoadModel::Resistive { r_load } => {
                let v_inf = i_drive * r_load;
                let tau = r_load * self.c_load;
                v_inf + (state.v_out - v_inf) * (-dt / tau).exp()
            }
        };
        if !v_next.is_finite() {
            return Err(DldoError::NonFinite { context: "plant advance" });
        }
        Ok(PlantState { v_out: v_next.clamp(0.0, self.v_dd), t: state.t + dt })
    }
}
