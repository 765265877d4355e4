//! Transient simulation engine: the clock-edge event loop binding plant and
//! controller, and extraction of settling/ripple/undershoot/efficiency
//! figures of merit from the recorded waveform.
//!
//! Per clock edge, in order: sample the output, classify it and arbitrate
//! the loop mode, run the comparator, shift the active register only, then
//! hold the new drive current to the next edge (zero-order hold). Load
//! steps split the hold interval exactly at the step instant.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{
    arbitrate, Band, ClockConfig, ComparatorConfig, LoopMode, PeakDetectorConfig, ThermometerCode,
};
use crate::error::{DldoError, Result};
use crate::plant::{LoadModel, PlantConfig, PlantState};

/// Default half-width of the peak-detector window around `v_ref` [V],
/// roughly one coarse step's voltage impact so the coarse loop does not
/// fire on fine-loop ripple.
pub const DEFAULT_PEAK_HALFWIDTH: f64 = 30e-3;

/// Default controller quiescent current [A].
pub const DEFAULT_I_Q: f64 = 325e-6;

/// Peak-detector window specification. Explicit bounds win; absent bounds
/// derive from the scenario's `v_ref` as `v_ref +/- 30 mV`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakWindow {
    pub v_high: Option<f64>,
    pub v_low: Option<f64>,
    /// Consecutive in-band edges before the fine loop takes over.
    pub dwell: usize,
}

impl Default for PeakWindow {
    fn default() -> Self {
        PeakWindow { v_high: None, v_low: None, dwell: 4 }
    }
}

impl PeakWindow {
    pub fn resolve(&self, v_ref: f64) -> PeakDetectorConfig {
        PeakDetectorConfig {
            v_high: self.v_high.unwrap_or(v_ref + DEFAULT_PEAK_HALFWIDTH),
            v_low: self.v_low.unwrap_or(v_ref - DEFAULT_PEAK_HALFWIDTH),
            dwell: self.dwell,
        }
    }
}

/// Full parameterization of one regulator instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DldoConfig {
    pub plant: PlantConfig,
    pub comparator: ComparatorConfig,
    pub peak: PeakWindow,
    pub clock: ClockConfig,
    /// Controller quiescent current [A], charged against efficiency.
    pub i_q: f64,
}

impl Default for DldoConfig {
    fn default() -> Self {
        DldoConfig {
            plant: PlantConfig::default(),
            comparator: ComparatorConfig::default(),
            peak: PeakWindow::default(),
            clock: ClockConfig::default(),
            i_q: DEFAULT_I_Q,
        }
    }
}

impl DldoConfig {
    pub fn validate(&self, v_ref: f64) -> Result<()> {
        self.plant.validate()?;
        self.comparator.validate()?;
        self.clock.validate()?;
        self.peak.resolve(v_ref).validate(v_ref)?;
        if !self.i_q.is_finite() || self.i_q < 0.0 {
            return Err(DldoError::InvalidConfig("i_q must be >= 0".into()));
        }
        if v_ref >= self.plant.v_dd {
            return Err(DldoError::InvalidConfig(format!(
                "v_ref = {} must lie below v_dd = {} (positive dropout)",
                v_ref, self.plant.v_dd
            )));
        }
        Ok(())
    }

    /// Default settling band: twice the voltage moved by one fine step held
    /// for one nominal clock period. A quantized loop never converges
    /// tighter than its LSB limit cycle.
    pub fn default_settling_band(&self) -> f64 {
        2.0 * self.plant.i_unit_fine / (self.clock.f_clk * self.plant.c_load)
    }
}

/// New load value applied at a step instant; the unit must match the
/// configured load model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadValue {
    Amperes(f64),
    Ohms(f64),
}

/// One scheduled load change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadStep {
    pub t: f64,
    pub value: LoadValue,
}

/// Stimulus description: regulation target, run length, initial condition,
/// and the load timeline. The load before the first step comes from the
/// plant configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Regulation target [V].
    pub v_ref: f64,
    /// Run length [s].
    pub duration: f64,
    pub load_steps: Vec<LoadStep>,
    /// Output voltage at t = 0 [V].
    pub initial_v_out: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !self.v_ref.is_finite() || !self.duration.is_finite() || !self.initial_v_out.is_finite()
        {
            return Err(DldoError::NonFinite { context: "scenario" });
        }
        if self.duration < 0.0 {
            return Err(DldoError::InvalidConfig("duration must be >= 0".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for step in &self.load_steps {
            if !step.t.is_finite() {
                return Err(DldoError::NonFinite { context: "load step time" });
            }
            if step.t <= prev {
                return Err(DldoError::InvalidConfig(
                    "load step times must be strictly increasing".into(),
                ));
            }
            if step.t < 0.0 || step.t > self.duration {
                return Err(DldoError::InvalidConfig(format!(
                    "load step at t = {} lies outside [0, duration]",
                    step.t
                )));
            }
            let v = match step.value {
                LoadValue::Amperes(i) => i,
                LoadValue::Ohms(r) => r,
            };
            if !v.is_finite() || v < 0.0 {
                return Err(DldoError::InvalidConfig("load step value must be >= 0".into()));
            }
            prev = step.t;
        }
        Ok(())
    }
}

/// One recorded point: the output voltage sampled at the edge, and the
/// controller state as acted on that edge (codes after the shift, the drive
/// current held to the next edge, the mode the arbiter selected).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub v_out: f64,
    pub code_coarse: u32,
    pub code_fine: u32,
    pub i_drive: f64,
    pub mode: LoopMode,
}

/// Uniformly sampled record of a run: one sample per clock edge, one per
/// load-step instant, and one at the end of the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Sample>,
}

/// Figures of merit extracted by [`measure`]. Step-response fields are
/// `None` when the scenario has no load up-step; `settling_time` and
/// `recovery_time` are `None` when the band is never held to the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientMetrics {
    pub settling_time: Option<f64>,
    pub undershoot_depth: Option<f64>,
    pub undershoot_min_v: Option<f64>,
    pub overshoot_peak_v: f64,
    pub ripple_pp: f64,
    pub recovery_time: Option<f64>,
    pub current_efficiency: f64,
    pub power_efficiency: f64,
}

fn apply_step(model: LoadModel, step: &LoadStep) -> Result<LoadModel> {
    match (model, step.value) {
        (LoadModel::ConstantCurrent { .. }, LoadValue::Amperes(i_load)) => {
            Ok(LoadModel::ConstantCurrent { i_load })
        }
        (LoadModel::Resistive { .. }, LoadValue::Ohms(r_load)) => {
            if r_load <= 0.0 {
                return Err(DldoError::InvalidConfig("load step r_load must be > 0".into()));
            }
            Ok(LoadModel::Resistive { r_load })
        }
        _ => Err(DldoError::InvalidConfig(
            "load step unit does not match the configured load model".into(),
        )),
    }
}

/// Run one transient. Deterministic for fixed seeds: the comparator and
/// clock consume independent seeded streams.
pub fn simulate(cfg: &DldoConfig, scenario: &Scenario) -> Result<Waveform> {
    cfg.validate(scenario.v_ref)?;
    scenario.validate()?;
    for step in &scenario.load_steps {
        apply_step(cfg.plant.load_model, step)?;
    }

    let peak = cfg.peak.resolve(scenario.v_ref);
    let mut comparator_rng = ChaCha8Rng::seed_from_u64(cfg.comparator.seed);
    let mut clock_rng = ChaCha8Rng::seed_from_u64(cfg.clock.seed);

    let mut plant = cfg.plant;
    let mut coarse = ThermometerCode::zero(plant.n_coarse);
    let mut fine = ThermometerCode::zero(plant.n_fine);
    // startup: coarse loop active, window history primed out-of-band
    let mut mode = LoopMode::Coarse;
    let mut history: VecDeque<Band> = std::iter::repeat_n(Band::OutOfBand, peak.dwell).collect();

    let mut state = PlantState { v_out: scenario.initial_v_out.clamp(0.0, plant.v_dd), t: 0.0 };
    let mut waveform = Waveform::default();
    let mut steps = scenario.load_steps.iter().peekable();

    // load steps scheduled at t = 0 take effect before the first edge
    while let Some(step) = steps.peek() {
        if step.t > 0.0 {
            break;
        }
        plant.load_model = apply_step(plant.load_model, step)?;
        steps.next();
    }

    let diverged = |w: &Waveform, at: f64| DldoError::Diverged {
        at,
        waveform: Box::new(w.clone()),
    };

    let mut t_edge = 0.0;
    let mut i_drive = 0.0;
    while t_edge < scenario.duration {
        // (1) sample, (2) classify + arbitrate, (3) compare, (4) shift
        let band = peak.classify(state.v_out);
        history.pop_front();
        history.push_back(band);
        mode = arbitrate(mode, history.make_contiguous());
        let dir = cfg.comparator.decide(scenario.v_ref, state.v_out, &mut comparator_rng);
        match mode {
            LoopMode::Coarse => coarse = coarse.step(dir),
            LoopMode::Fine => fine = fine.step(dir),
        }
        i_drive = plant.drive_current(&coarse, &fine);
        waveform.samples.push(Sample {
            t: t_edge,
            v_out: state.v_out,
            code_coarse: coarse.count(),
            code_fine: fine.count(),
            i_drive,
            mode,
        });

        // (5) hold the drive to the next edge, splitting at load steps
        let mut t_next = cfg.clock.next_edge(t_edge, &mut clock_rng);
        if t_next <= t_edge {
            return Err(DldoError::InvalidConfig(format!(
                "clock period underflows the time accumulator at t = {t_edge:e}"
            )));
        }
        if t_next > scenario.duration {
            t_next = scenario.duration;
        }
        while let Some(step) = steps.peek() {
            if step.t > t_next {
                break;
            }
            state = plant
                .advance(state, i_drive, step.t - state.t)
                .map_err(|_| diverged(&waveform, state.t))?;
            waveform.samples.push(Sample {
                t: state.t,
                v_out: state.v_out,
                code_coarse: coarse.count(),
                code_fine: fine.count(),
                i_drive,
                mode,
            });
            plant.load_model = apply_step(plant.load_model, step)?;
            steps.next();
        }
        state = plant
            .advance(state, i_drive, t_next - state.t)
            .map_err(|_| diverged(&waveform, state.t))?;
        if !state.v_out.is_finite() {
            return Err(diverged(&waveform, state.t));
        }
        t_edge = t_next;
    }

    // end-of-run boundary sample
    if !waveform.samples.is_empty() {
        waveform.samples.push(Sample {
            t: scenario.duration,
            v_out: state.v_out,
            code_coarse: coarse.count(),
            code_fine: fine.count(),
            i_drive,
            mode,
        });
    }
    Ok(waveform)
}

/// Load current demanded at the regulation point.
fn demand_current(model: LoadModel, v_ref: f64) -> f64 {
    match model {
        LoadModel::ConstantCurrent { i_load } => i_load,
        LoadModel::Resistive { r_load } => v_ref / r_load,
    }
}

fn step_demand(value: LoadValue, v_ref: f64) -> f64 {
    match value {
        LoadValue::Amperes(i) => i,
        LoadValue::Ohms(r) => v_ref / r,
    }
}

/// Extract figures of merit from a waveform.
///
/// `band` is the settling half-width around `v_ref`. Undershoot and
/// recovery are measured after the load step with the largest demand
/// increase, with the pre-step baseline taken from the plant configuration.
/// Returns `None` for an empty waveform.
pub fn measure(
    waveform: &Waveform,
    scenario: &Scenario,
    band: f64,
    cfg: &DldoConfig,
) -> Option<TransientMetrics> {
    let samples = &waveform.samples;
    if samples.is_empty() {
        return None;
    }
    let v_ref = scenario.v_ref;

    // settling: first time after which the output never leaves the band
    let last_violation = samples.iter().rposition(|s| (s.v_out - v_ref).abs() > band);
    let settling_time = match last_violation {
        None => Some(samples[0].t),
        Some(i) if i + 1 < samples.len() => Some(samples[i + 1].t),
        Some(_) => None,
    };

    // ripple and mean level over the final 20% of the run
    let t_tail = 0.8 * scenario.duration;
    let tail: Vec<&Sample> = samples.iter().filter(|s| s.t >= t_tail).collect();
    let (mut v_min_tail, mut v_max_tail, mut v_sum_tail) = (f64::MAX, f64::MIN, 0.0);
    for s in &tail {
        v_min_tail = v_min_tail.min(s.v_out);
        v_max_tail = v_max_tail.max(s.v_out);
        v_sum_tail += s.v_out;
    }
    let (ripple_pp, v_mean_tail) = if tail.is_empty() {
        (0.0, samples.last().unwrap().v_out)
    } else {
        (v_max_tail - v_min_tail, v_sum_tail / tail.len() as f64)
    };

    let overshoot_peak_v = samples.iter().map(|s| s.v_out).fold(f64::MIN, f64::max);

    // largest load up-step in the demand timeline
    let mut prev_demand = demand_current(cfg.plant.load_model, v_ref);
    let mut final_demand = prev_demand;
    let mut up_step: Option<(f64, f64)> = None; // (time, demand increase)
    for step in &scenario.load_steps {
        let demand = step_demand(step.value, v_ref);
        let delta = demand - prev_demand;
        if delta > 0.0 && up_step.is_none_or(|(_, best)| delta > best) {
            up_step = Some((step.t, delta));
        }
        prev_demand = demand;
        final_demand = demand;
    }

    let (undershoot_depth, undershoot_min_v, recovery_time) = match up_step {
        Some((t_step, _)) => {
            let after: Vec<(usize, &Sample)> =
                samples.iter().enumerate().filter(|(_, s)| s.t >= t_step).collect();
            let min_v = after.iter().map(|(_, s)| s.v_out).fold(f64::MAX, f64::min);
            // first sample from which the band holds to the end of the run
            let last_out = after.iter().rposition(|(_, s)| (s.v_out - v_ref).abs() > band);
            let recovery = match last_out {
                None => Some(0.0),
                Some(i) if i + 1 < after.len() => Some(after[i + 1].1.t - t_step),
                Some(_) => None,
            };
            (Some(v_ref - min_v), Some(min_v), recovery)
        }
        None => (None, None, None),
    };

    let (current_efficiency, power_efficiency) =
        efficiency(v_mean_tail, cfg.plant.v_dd, final_demand, cfg.i_q);

    Some(TransientMetrics {
        settling_time,
        undershoot_depth,
        undershoot_min_v,
        overshoot_peak_v,
        ripple_pp,
        recovery_time,
        current_efficiency,
        power_efficiency,
    })
}

/// Current and power efficiency for one operating point.
pub fn efficiency(v_out: f64, v_in: f64, i_load: f64, i_q: f64) -> (f64, f64) {
    let current_eff = i_load / (i_load + i_q);
    let power_eff = (v_out * i_load) / (v_in * (i_load + i_q));
    (current_eff, power_eff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Direction;
    use approx::assert_relative_eq;

    fn quiet_scenario(v_ref: f64, duration: f64) -> Scenario {
        Scenario { v_ref, duration, load_steps: vec![], initial_v_out: 0.0 }
    }

    fn fig6_like_config() -> DldoConfig {
        // resistive operating point: 10 mA at 1.7 V
        DldoConfig {
            plant: PlantConfig {
                load_model: LoadModel::Resistive { r_load: 170.0 },
                i_unit_coarse: 310e-6,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn quiescent_null_case_stays_at_zero() {
        // v_ref = 0 with a zero-current load: tie-break keeps drive at 0
        let cfg = DldoConfig {
            plant: PlantConfig {
                load_model: LoadModel::ConstantCurrent { i_load: 0.0 },
                ..Default::default()
            },
            ..Default::default()
        };
        let scenario = quiet_scenario(0.0, 1e-6);
        let w = simulate(&cfg, &scenario).unwrap();
        assert!(!w.samples.is_empty());
        for s in &w.samples {
            assert_eq!(s.v_out, 0.0);
            assert_eq!(s.code_coarse, 0);
            assert_eq!(s.code_fine, 0);
            assert_eq!(s.i_drive, 0.0);
        }
    }

    #[test]
    fn zero_duration_gives_empty_waveform() {
        let cfg = fig6_like_config();
        let w = simulate(&cfg, &quiet_scenario(1.7, 0.0)).unwrap();
        assert!(w.samples.is_empty());
        assert!(measure(&w, &quiet_scenario(1.7, 0.0), 1e-3, &cfg).is_none());
    }

    #[test]
    fn rejects_vref_at_or_above_vdd() {
        let cfg = fig6_like_config();
        assert!(simulate(&cfg, &quiet_scenario(1.8, 1e-6)).is_err());
    }

    #[test]
    fn rejects_mismatched_load_step_unit() {
        let cfg = fig6_like_config(); // resistive
        let scenario = Scenario {
            v_ref: 1.7,
            duration: 1e-6,
            load_steps: vec![LoadStep { t: 5e-7, value: LoadValue::Amperes(1e-3) }],
            initial_v_out: 0.0,
        };
        assert!(simulate(&cfg, &scenario).is_err());
    }

    #[test]
    fn rejects_unordered_load_steps() {
        let scenario = Scenario {
            v_ref: 1.7,
            duration: 1e-6,
            load_steps: vec![
                LoadStep { t: 5e-7, value: LoadValue::Ohms(100.0) },
                LoadStep { t: 4e-7, value: LoadValue::Ohms(200.0) },
            ],
            initial_v_out: 0.0,
        };
        assert!(scenario.validate().is_err());
    }

    #[test]
    fn waveform_contains_edge_loadstep_and_end_samples() {
        let cfg = fig6_like_config();
        let t_step = 1.23e-6;
        let scenario = Scenario {
            v_ref: 1.7,
            duration: 2e-6,
            load_steps: vec![LoadStep { t: t_step, value: LoadValue::Ohms(1700.0) }],
            initial_v_out: 0.0,
        };
        let w = simulate(&cfg, &scenario).unwrap();
        assert!(w.samples.iter().any(|s| s.t == t_step), "sample at the step instant");
        assert_eq!(w.samples.last().unwrap().t, scenario.duration);
        for pair in w.samples.windows(2) {
            assert!(pair[0].t <= pair[1].t);
        }
    }

    #[test]
    fn simulation_is_bit_deterministic() {
        let mut cfg = fig6_like_config();
        cfg.comparator.noise_model = crate::controller::NoiseModel::Gaussian;
        cfg.clock.jitter_sigma = 0.05e-9;
        let scenario = quiet_scenario(1.7, 3e-6);
        let a = simulate(&cfg, &scenario).unwrap();
        let b = simulate(&cfg, &scenario).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.v_out.to_bits(), y.v_out.to_bits());
            assert_eq!(x.i_drive.to_bits(), y.i_drive.to_bits());
            assert_eq!((x.code_coarse, x.code_fine, x.mode), (y.code_coarse, y.code_fine, y.mode));
        }
    }

    #[test]
    fn out_of_band_sample_acts_in_coarse_mode() {
        let cfg = fig6_like_config();
        let w = simulate(&cfg, &quiet_scenario(1.7, 5e-6)).unwrap();
        let peak = cfg.peak.resolve(1.7);
        for s in &w.samples {
            if peak.classify(s.v_out) == Band::OutOfBand {
                assert_eq!(s.mode, LoopMode::Coarse, "at t = {}", s.t);
            }
        }
    }

    #[test]
    fn drive_moves_at_most_one_unit_per_edge() {
        let cfg = fig6_like_config();
        let w = simulate(&cfg, &quiet_scenario(1.7, 5e-6)).unwrap();
        let max_step = cfg.plant.i_unit_coarse.max(cfg.plant.i_unit_fine);
        for pair in w.samples.windows(2) {
            let delta = (pair[1].i_drive - pair[0].i_drive).abs();
            assert!(delta <= max_step + 1e-15, "delta = {delta}");
        }
    }

    #[test]
    fn time_accounting_reaches_duration_exactly() {
        let mut cfg = fig6_like_config();
        cfg.clock.jitter_sigma = 0.1e-9; // duration not an edge multiple
        let scenario = quiet_scenario(1.7, 2.7e-6);
        let w = simulate(&cfg, &scenario).unwrap();
        assert_eq!(w.samples.last().unwrap().t, scenario.duration);
    }

    #[test]
    fn diverging_plant_reports_partial_waveform() {
        // absurd unit current into an absurd resistance overflows v_inf
        let cfg = DldoConfig {
            plant: PlantConfig {
                load_model: LoadModel::Resistive { r_load: 1e200 },
                i_unit_coarse: 1e200,
                i_unit_fine: 1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        match simulate(&cfg, &quiet_scenario(1.7, 1e-6)) {
            Err(DldoError::Diverged { waveform, .. }) => {
                assert!(!waveform.samples.is_empty());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn one_coarse_step_changes_drive_by_one_unit() {
        let cfg = fig6_like_config();
        let coarse = ThermometerCode::new(7, 32).unwrap();
        let fine = ThermometerCode::new(3, 64).unwrap();
        let before = cfg.plant.drive_current(&coarse, &fine);
        let after = cfg.plant.drive_current(&coarse.step(Direction::Up), &fine);
        assert_relative_eq!(after - before, cfg.plant.i_unit_coarse, max_relative = 1e-12);
    }

    #[test]
    fn measure_constant_waveform() {
        let cfg = fig6_like_config();
        let scenario = quiet_scenario(1.7, 1e-6);
        let samples: Vec<Sample> = (0..101)
            .map(|i| Sample {
                t: i as f64 * 1e-8,
                v_out: 1.7,
                code_coarse: 32,
                code_fine: 0,
                i_drive: 10e-3,
                mode: LoopMode::Fine,
            })
            .collect();
        let m = measure(&Waveform { samples }, &scenario, 1e-3, &cfg).unwrap();
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.ripple_pp, 0.0);
    }

    #[test]
    fn measure_triangle_ripple_is_twice_amplitude() {
        let cfg = fig6_like_config();
        let scenario = quiet_scenario(1.7, 1e-6);
        let a = 2.5e-3;
        // settled at v_ref early on, triangle of amplitude `a` in the tail
        let samples: Vec<Sample> = (0..=1000)
            .map(|i| {
                let t = i as f64 * 1e-9;
                let v = if t < 0.8e-6 {
                    1.7
                } else {
                    let phase = ((i % 4) as f64 - 2.0).abs() - 1.0; // -1, 0, 1, 0
                    1.7 + a * phase
                };
                Sample { t, v_out: v, code_coarse: 32, code_fine: 0, i_drive: 10e-3, mode: LoopMode::Fine }
            })
            .collect();
        let m = measure(&Waveform { samples }, &scenario, 10e-3, &cfg).unwrap();
        assert_relative_eq!(m.ripple_pp, 2.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn measure_undershoot_and_recovery_on_synthetic_step() {
        let cfg = DldoConfig::default(); // constant-current base 10 mA
        let t_step = 0.5e-6;
        let scenario = Scenario {
            v_ref: 1.7,
            duration: 1e-6,
            // base 10 mA -> 20 mA is the (only) up-step
            load_steps: vec![LoadStep { t: t_step, value: LoadValue::Amperes(20e-3) }],
            initial_v_out: 0.0,
        };
        let dip = |t: f64| -> f64 {
            // vee shape: 1.7 down to 1.3 at t_step + 100 ns, back by +200 ns
            let dt = t - t_step;
            if dt < 0.0 {
                1.7
            } else if dt < 100e-9 {
                1.7 - 0.4 * (dt / 100e-9)
            } else if dt < 200e-9 {
                1.3 + 0.4 * ((dt - 100e-9) / 100e-9)
            } else {
                1.7
            }
        };
        let samples: Vec<Sample> = (0..=1000)
            .map(|i| {
                let t = i as f64 * 1e-9;
                Sample { t, v_out: dip(t), code_coarse: 16, code_fine: 0, i_drive: 10e-3, mode: LoopMode::Coarse }
            })
            .collect();
        let m = measure(&Waveform { samples }, &scenario, 5e-3, &cfg).unwrap();
        assert_relative_eq!(m.undershoot_min_v.unwrap(), 1.3, max_relative = 1e-9);
        assert_relative_eq!(m.undershoot_depth.unwrap(), 0.4, max_relative = 1e-9);
        let rec = m.recovery_time.unwrap();
        assert!(rec > 150e-9 && rec < 250e-9, "recovery = {rec}");
    }

    #[test]
    fn measure_without_up_step_leaves_step_fields_absent() {
        let cfg = fig6_like_config();
        let scenario = quiet_scenario(1.7, 1e-6);
        let w = simulate(&cfg, &scenario).unwrap();
        let m = measure(&w, &scenario, 10e-3, &cfg).unwrap();
        assert!(m.undershoot_depth.is_none());
        assert!(m.recovery_time.is_none());
    }

    #[test]
    fn efficiency_lossless_control() {
        let (ce, pe) = efficiency(1.7, 1.8, 10e-3, 0.0);
        assert_eq!(ce, 1.0);
        assert_relative_eq!(pe, 1.7 / 1.8, max_relative = 1e-15);
    }

    #[test]
    fn efficiency_table_point() {
        let (ce, pe) = efficiency(1.7, 1.8, 10e-3, 325e-6);
        assert_relative_eq!(ce, 0.01 / 0.010325, max_relative = 1e-12);
        assert_relative_eq!(pe, 0.017 / (1.8 * 0.010325), max_relative = 1e-12);
    }

    #[test]
    fn settled_run_stays_inside_peak_window() {
        let cfg = fig6_like_config();
        let scenario = quiet_scenario(1.7, 20e-6);
        let w = simulate(&cfg, &scenario).unwrap();
        let m = measure(&w, &scenario, cfg.default_settling_band(), &cfg).unwrap();
        let t_settle = m.settling_time.expect("run must settle");
        let peak = cfg.peak.resolve(1.7);
        for s in w.samples.iter().filter(|s| s.t >= t_settle) {
            assert_eq!(peak.classify(s.v_out), Band::InBand, "at t = {}", s.t);
        }
    }
}
