//! Discrete controller state machines: the clocked comparator decision, the
//! saturating bidirectional shift registers driving the PMOS arrays, the
//! overshoot/undershoot window detector with coarse/fine arbitration, and
//! the loop clock source.

use crate::error::{DldoError, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Comparator output: add drive or remove drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Which register bank the clock gate selects on a given edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    Coarse,
    Fine,
}

/// Window-detector classification of one output sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    InBand,
    OutOfBand,
}

/// Register state of one PMOS array: `count` contiguous ones from the LSB
/// end. Only contiguous-ones states are representable, so the device count
/// is the whole state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThermometerCode {
    count: u32,
    width: u32,
}

impl ThermometerCode {
    /// All devices off.
    pub fn zero(width: u32) -> Self {
        ThermometerCode { count: 0, width }
    }

    /// `None` if `count` exceeds the register width.
    pub fn new(count: u32, width: u32) -> Option<Self> {
        (count <= width).then_some(ThermometerCode { count, width })
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// One shift per clock: `Up` enables one more device, `Down` disables
    /// one, saturating at both ends.
    pub fn step(self, dir: Direction) -> Self {
        let count = match dir {
            Direction::Up => (self.count + 1).min(self.width),
            Direction::Down => self.count.saturating_sub(1),
        };
        ThermometerCode { count, ..self }
    }
}

/// Comparator decision noise shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    #[default]
    None,
    Uniform,
    Gaussian,
}

/// Behavioral model of the clocked comparator: systematic offset plus a
/// per-decision noise draw bounded by the measured uncertainty half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorConfig {
    /// Input-referred offset [V].
    pub offset: f64,
    /// Decision uncertainty half-width [V]. Uniform noise spans +/- this;
    /// Gaussian noise uses a third of it as sigma.
    pub uncertainty_halfwidth: f64,
    pub noise_model: NoiseModel,
    /// Seed of the noise stream.
    pub seed: u64,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        ComparatorConfig {
            offset: 0.0,
            uncertainty_halfwidth: 3e-3,
            noise_model: NoiseModel::None,
            seed: 1,
        }
    }
}

impl ComparatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() || !self.uncertainty_halfwidth.is_finite() {
            return Err(DldoError::NonFinite { context: "comparator config" });
        }
        if self.uncertainty_halfwidth < 0.0 {
            return Err(DldoError::InvalidConfig(
                "uncertainty_halfwidth must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// `Up` when the (offset- and noise-shifted) reference exceeds the
    /// feedback voltage. Ties resolve to `Down` so a noise-free comparator
    /// is a pure function of its inputs.
    pub fn decide<R: Rng>(&self, v_ref: f64, v_fb: f64, rng: &mut R) -> Direction {
        let h = self.uncertainty_halfwidth;
        let noise = match self.noise_model {
            NoiseModel::None => 0.0,
            _ if h == 0.0 => 0.0,
            NoiseModel::Uniform => rng.random_range(-h..=h),
            NoiseModel::Gaussian => Normal::new(0.0, h / 3.0).unwrap().sample(rng),
        };
        if v_ref + self.offset + noise > v_fb {
            Direction::Up
        } else {
            Direction::Down
        }
    }
}

/// Overshoot/undershoot references of the peak detector, plus the number of
/// consecutive in-band samples required before the fine loop takes over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDetectorConfig {
    /// Overshoot reference [V].
    pub v_high: f64,
    /// Undershoot reference [V].
    pub v_low: f64,
    pub dwell: usize,
}

impl PeakDetectorConfig {
    pub fn validate(&self, v_ref: f64) -> Result<()> {
        if !(self.v_low < v_ref && v_ref < self.v_high) {
            return Err(DldoError::InvalidConfig(format!(
                "peak detector window must satisfy v_low < v_ref < v_high \
                 (got v_low = {}, v_ref = {}, v_high = {})",
                self.v_low, v_ref, self.v_high
            )));
        }
        if self.dwell < 1 {
            return Err(DldoError::InvalidConfig("dwell must be >= 1".into()));
        }
        Ok(())
    }

    /// Boundary samples count as in-band.
    pub fn classify(&self, v_out: f64) -> Band {
        if v_out > self.v_high || v_out < self.v_low {
            Band::OutOfBand
        } else {
            Band::InBand
        }
    }
}

/// Loop selection from the last `dwell` band samples. Any excursion hands
/// control to the coarse loop on the spot; the fine loop takes over only
/// once the whole window is in band; otherwise the mode holds.
pub fn arbitrate(mode: LoopMode, band_history: &[Band]) -> LoopMode {
    match band_history.last() {
        Some(Band::OutOfBand) => LoopMode::Coarse,
        Some(Band::InBand) if band_history.iter().all(|b| *b == Band::InBand) => LoopMode::Fine,
        _ => mode,
    }
}

/// Loop clock source. The self-generated clock is abstracted to a fixed
/// frequency with optional Gaussian period jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockConfig {
    /// Clock frequency [Hz].
    pub f_clk: f64,
    /// Period jitter sigma [s].
    pub jitter_sigma: f64,
    /// Seed of the jitter stream.
    pub seed: u64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig { f_clk: 100e6, jitter_sigma: 0.0, seed: 2 }
    }
}

impl ClockConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.f_clk.is_finite() || !self.jitter_sigma.is_finite() {
            return Err(DldoError::NonFinite { context: "clock config" });
        }
        if self.f_clk <= 0.0 {
            return Err(DldoError::InvalidConfig("f_clk must be > 0".into()));
        }
        if self.jitter_sigma < 0.0 {
            return Err(DldoError::InvalidConfig("jitter_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Time of the edge following `t`. Jittered periods are resampled until
    /// positive so the edge sequence is strictly increasing.
    pub fn next_edge<R: Rng>(&self, t: f64, rng: &mut R) -> f64 {
        let nominal = 1.0 / self.f_clk;
        if self.jitter_sigma == 0.0 {
            return t + nominal;
        }
        let normal = Normal::new(0.0, self.jitter_sigma).unwrap();
        loop {
            let period = nominal + normal.sample(rng);
            if period > 0.0 {
                return t + period;
            }
        }
    }
}
