//! Z-domain small-signal model of the loop: open-loop transfer function,
//! closed-loop poles under unity negative feedback, an analytic stability
//! criterion, and pole-locus sweeps over clock frequency, load capacitance,
//! and load current.
//!
//! The open loop is `g_c * g_out / ((z - 1)(z - p))` with the output pole
//! `p = exp(-omega_out / f_clk)`. Closing unity feedback gives the
//! characteristic polynomial `z^2 - (1 + p) z + (p + g_c * g_out)`.

use crate::error::{DldoError, Result};
use num_complex::Complex64;

/// Poles within this distance of the unit circle are reported unstable;
/// conservative at design-space boundaries.
pub const MARGINAL_TOL: f64 = 1e-12;

/// Small-signal loop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSignalParams {
    /// Comparator/quantizer gain.
    pub g_c: f64,
    /// DC plant gain [V per code step].
    pub g_out: f64,
    /// Output-pole frequency [rad/s].
    pub omega_out: f64,
    /// Loop clock [Hz].
    pub f_clk: f64,
}

impl SmallSignalParams {
    /// Discrete-time output pole `exp(-omega_out / f_clk)`.
    pub fn pole(&self) -> f64 {
        (-self.omega_out / self.f_clk).exp()
    }

    /// Loop gain `g_c * g_out`.
    pub fn loop_gain(&self) -> f64 {
        self.g_c * self.g_out
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.g_c, self.g_out, self.omega_out, self.f_clk];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DldoError::NonFinite { context: "small-signal params" });
        }
        if self.omega_out <= 0.0 {
            return Err(DldoError::InvalidConfig("omega_out must be > 0".into()));
        }
        if self.f_clk <= 0.0 {
            return Err(DldoError::InvalidConfig("f_clk must be > 0".into()));
        }
        if self.g_c < 0.0 || self.g_out < 0.0 {
            return Err(DldoError::InvalidConfig("gains must be >= 0".into()));
        }
        let p = self.pole();
        if !(p > 0.0 && p < 1.0) {
            return Err(DldoError::InvalidConfig(format!(
                "derived pole exp(-omega_out/f_clk) = {p} must lie in (0, 1)"
            )));
        }
        Ok(())
    }
}

/// Closed-loop pole pair with the dominant magnitude and stability verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleResult {
    pub poles: [Complex64; 2],
    pub max_magnitude: f64,
    pub stable: bool,
}

/// Evaluate the open-loop transfer function at `z`.
pub fn open_loop_tf(params: &SmallSignalParams, z: Complex64) -> Result<Complex64> {
    let p = params.pole();
    let den = (z - 1.0) * (z - p);
    if den == Complex64::new(0.0, 0.0) {
        return Err(DldoError::Singularity { z });
    }
    Ok(params.loop_gain() / den)
}

/// Roots of the closed-loop characteristic polynomial, computed from the
/// quadratic formula in its numerically stable form. For a complex pair the
/// squared magnitude equals the constant coefficient, so the magnitude is
/// taken from there directly.
pub fn closed_loop_poles(params: &SmallSignalParams) -> PoleResult {
    let p = params.pole();
    let sum = 1.0 + p;
    let prod = p + params.loop_gain();
    let disc = sum * sum - 4.0 * prod;
    let (poles, max_magnitude) = if disc >= 0.0 {
        let s = disc.sqrt();
        let q = 0.5 * (sum + s); // sum > 0, so this branch avoids cancellation
        let r1 = q;
        let r2 = prod / q;
        (
            [Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)],
            r1.abs().max(r2.abs()),
        )
    } else {
        let re = 0.5 * sum;
        let im = 0.5 * (-disc).sqrt();
        ([Complex64::new(re, im), Complex64::new(re, -im)], prod.sqrt())
    };
    PoleResult { poles, max_magnitude, stable: max_magnitude < 1.0 - MARGINAL_TOL }
}

/// Analytic stability test, branch-complete and free of root extraction.
///
/// Complex branch: the pair magnitude is `sqrt(p + g)`. Real branch: Jury
/// conditions for a monic quadratic, `P(1) > 0`, `P(-1) > 0`, `|c| < 1`,
/// where `P(1)` reduces algebraically to the loop gain itself.
pub fn stability_criterion(params: &SmallSignalParams) -> bool {
    let p = params.pole();
    let g = params.loop_gain();
    let sum = 1.0 + p;
    let prod = p + g;
    let disc = sum * sum - 4.0 * prod;
    if disc < 0.0 {
        prod.sqrt() < 1.0 - MARGINAL_TOL
    } else {
        let at_one = g; // 1 - (1 + p) + (p + g)
        let at_minus_one = 2.0 + 2.0 * p + g;
        at_one > 0.0 && at_minus_one > 0.0 && prod.abs() < 1.0
    }
}

/// Supremum of the loop gain `g_c * g_out` that keeps the closed loop
/// stable for a given output pole `p`. The binding constraint is the
/// complex-pair magnitude `sqrt(p + g) < 1`, so the boundary is `1 - p`.
pub fn max_stable_gain(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    1.0 - p
}

/// Sweep axis for pole-locus studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    FClk,
    CLoad,
    ILoad,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::FClk => "f_clk",
            SweepAxis::CLoad => "c_load",
            SweepAxis::ILoad => "i_load",
        }
    }
}

/// Turns a swept physical value into small-signal parameters.
pub trait SweepMapping {
    fn map(&self, base: &SmallSignalParams, axis: SweepAxis, value: f64)
        -> Result<SmallSignalParams>;
}

/// Standard output-pole and DC-gain identification for a current-DAC into
/// an RC stage: `r_load = v_ref / i_load`, `omega_out = 1 / (r_load *
/// c_load)`, `g_out = i_unit * r_load`.
///
/// Swapping in a different `SweepMapping` changes how the load-current axis
/// is interpreted without touching the pole computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultMapping {
    /// Regulation target [V].
    pub v_ref: f64,
    /// Base load current [A].
    pub i_load: f64,
    /// Base load capacitance [F].
    pub c_load: f64,
    /// Unit current used for the DC gain [A].
    pub i_unit: f64,
}

impl DefaultMapping {
    pub fn r_load(&self) -> f64 {
        self.v_ref / self.i_load
    }
}

impl SweepMapping for DefaultMapping {
    fn map(
        &self,
        base: &SmallSignalParams,
        axis: SweepAxis,
        value: f64,
    ) -> Result<SmallSignalParams> {
        if !(value.is_finite() && value > 0.0) {
            return Err(DldoError::InvalidConfig(format!(
                "sweep value must be positive and finite, got {value}"
            )));
        }
        let params = match axis {
            SweepAxis::FClk => SmallSignalParams { f_clk: value, ..*base },
            SweepAxis::CLoad => SmallSignalParams {
                omega_out: 1.0 / (self.r_load() * value),
                ..*base
            },
            SweepAxis::ILoad => {
                let r = self.v_ref / value;
                SmallSignalParams {
                    omega_out: 1.0 / (r * self.c_load),
                    g_out: self.i_unit * r,
                    ..*base
                }
            }
        };
        params.validate()?;
        Ok(params)
    }
}

/// One point of a pole-locus sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub result: Result<PoleResult>,
}

/// Closed-loop poles along a grid. Points whose mapping produces invalid
/// parameters become per-point errors; the sweep always completes in grid
/// order.
pub fn pole_locus_sweep(
    base: &SmallSignalParams,
    axis: SweepAxis,
    grid: &[f64],
    mapping: &dyn SweepMapping,
) -> Vec<SweepPoint> {
    grid.iter()
        .map(|&value| SweepPoint {
            value,
            result: mapping.map(base, axis, value).map(|p| closed_loop_poles(&p)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Params with a prescribed pole and loop gain (g_out carries the gain).
    fn params(p: f64, gain: f64) -> SmallSignalParams {
        let f_clk = 100e6;
        SmallSignalParams { g_c: 1.0, g_out: gain, omega_out: -p.ln() * f_clk, f_clk }
    }

    /// Independent root oracle: eigenvalues of the companion matrix of the
    /// closed-loop characteristic polynomial.
    fn companion_roots(p: f64, gain: f64) -> Vec<Complex64> {
        let m = nalgebra::Matrix2::new(0.0, -(p + gain), 1.0, 1.0 + p);
        let mut eig: Vec<Complex64> = m
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        eig.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        eig
    }

    fn sorted(poles: [Complex64; 2]) -> Vec<Complex64> {
        let mut v = poles.to_vec();
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn params_pole_in_unit_interval() {
        let p = params(0.9, 0.02);
        assert_relative_eq!(p.pole(), 0.9, max_relative = 1e-14);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn open_loop_zero_numerator() {
        let sp = params(0.5, 0.0);
        for z in [Complex64::new(2.0, 0.0), Complex64::new(-3.0, 4.0)] {
            assert_eq!(open_loop_tf(&sp, z).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn open_loop_hand_value() {
        // 1 / ((2 - 1)(2 - 0.5)) = 2/3
        let sp = params(0.5, 1.0);
        let tf = open_loop_tf(&sp, Complex64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(tf.re, 2.0 / 3.0, max_relative = 1e-14);
        assert_abs_diff_eq!(tf.im, 0.0);
    }

    #[test]
    fn open_loop_rolls_off_at_large_z() {
        let sp = params(0.5, 1.0);
        let tf = open_loop_tf(&sp, Complex64::new(1e6, 0.0)).unwrap();
        assert!(tf.norm() < 1e-10);
    }

    #[test]
    fn open_loop_singular_at_poles() {
        let sp = params(0.5, 1.0);
        assert!(matches!(
            open_loop_tf(&sp, Complex64::new(1.0, 0.0)),
            Err(DldoError::Singularity { .. })
        ));
        assert!(matches!(
            open_loop_tf(&sp, Complex64::new(0.5, 0.0)),
            Err(DldoError::Singularity { .. })
        ));
    }

    #[test]
    fn zero_gain_leaves_open_loop_poles() {
        for p in [0.1, 0.5, 0.9, 0.99] {
            let r = closed_loop_poles(&params(p, 0.0));
            let got = sorted(r.poles);
            assert_abs_diff_eq!(got[0].re, p, epsilon = 1e-13);
            assert_abs_diff_eq!(got[1].re, 1.0, epsilon = 1e-13);
            assert!(!r.stable, "integrator pole at z = 1 is marginal");
            assert!(!stability_criterion(&params(p, 0.0)));
        }
    }

    #[test]
    fn complex_pair_hand_value() {
        // p = 0.9, gain = 0.02: re = 0.95, im = sqrt(4*0.92 - 3.61)/2
        // = sqrt(0.07)/2 = 0.13229..., |z| = sqrt(0.92) = 0.95917...
        let r = closed_loop_poles(&params(0.9, 0.02));
        let expected_im = 0.07f64.sqrt() / 2.0;
        assert_relative_eq!(r.poles[0].re, 0.95, max_relative = 1e-12);
        assert_relative_eq!(r.poles[0].im.abs(), expected_im, max_relative = 1e-12);
        assert_relative_eq!(expected_im, 0.132288, max_relative = 1e-5);
        assert_relative_eq!(r.max_magnitude, 0.92f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.max_magnitude, 0.95917, max_relative = 1e-5);
        assert!(r.stable);
        // cross-check against the companion-matrix oracle
        let oracle = companion_roots(0.9, 0.02);
        for (a, b) in sorted(r.poles).iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-10);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn unstable_hand_value() {
        // p = 0.99, gain = 0.05: complex pair, |z| = sqrt(1.04) = 1.01980...
        let r = closed_loop_poles(&params(0.99, 0.05));
        assert_relative_eq!(r.max_magnitude, 1.04f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.max_magnitude, 1.01980, max_relative = 1e-5);
        assert!(!r.stable);
        assert!(!stability_criterion(&params(0.99, 0.05)));
    }

    #[test]
    fn criterion_complex_branch_hand_value() {
        // p = 0.9, gain = 0.05: p + g = 0.95 < 1, stable
        assert!(stability_criterion(&params(0.9, 0.05)));
    }

    #[test]
    fn criterion_agrees_with_poles_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let p = rng.random_range(0.01..0.999);
            let gain = 10f64.powf(rng.random_range(-6.0..0.5));
            let sp = params(p, gain);
            let poles = closed_loop_poles(&sp);
            assert_eq!(
                stability_criterion(&sp),
                poles.stable,
                "disagreement at p = {p}, gain = {gain}"
            );
            assert_eq!(poles.stable, poles.max_magnitude < 1.0 - MARGINAL_TOL);
        }
    }

    #[test]
    fn root_identities_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10_000 {
            let p = rng.random_range(0.01..0.999);
            let gain = 10f64.powf(rng.random_range(-6.0..0.5));
            let r = closed_loop_poles(&params(p, gain));
            let sum = r.poles[0] + r.poles[1];
            let prod = r.poles[0] * r.poles[1];
            assert_relative_eq!(sum.re, 1.0 + p, max_relative = 1e-12);
            assert_abs_diff_eq!(sum.im, 0.0, epsilon = 1e-12);
            assert_relative_eq!(prod.re, p + gain, max_relative = 1e-12);
            assert_abs_diff_eq!(prod.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn max_stable_gain_boundary() {
        assert_relative_eq!(max_stable_gain(0.9), 0.1, max_relative = 1e-12);
        assert_relative_eq!(max_stable_gain(0.5), 0.5, max_relative = 1e-12);
        // fast clock limit: p -> 1 leaves no stable gain
        assert!(max_stable_gain(1.0 - 1e-9) < 2e-9);
        // the criterion flips across the boundary
        for p in [0.5, 0.9] {
            let g = max_stable_gain(p);
            assert!(stability_criterion(&params(p, g - 1e-9)));
            assert!(!stability_criterion(&params(p, g + 1e-9)));
        }
    }

    #[test]
    fn fclk_sweep_monotone_in_complex_regime() {
        // gain >= 0.25 keeps the pair complex for every p in (0, 1)
        let base = SmallSignalParams { g_c: 1.0, g_out: 0.3, omega_out: 5.88e7, f_clk: 100e6 };
        let mapping =
            DefaultMapping { v_ref: 1.7, i_load: 10e-3, c_load: 100e-12, i_unit: 50e-6 };
        let grid = [50e6, 100e6, 1e9];
        let points = pole_locus_sweep(&base, SweepAxis::FClk, &grid, &mapping);
        let mags: Vec<f64> =
            points.iter().map(|p| p.result.as_ref().unwrap().max_magnitude).collect();
        assert!(mags[0] < mags[1] && mags[1] < mags[2], "{mags:?}");
    }

    #[test]
    fn cload_sweep_monotone_in_complex_regime() {
        let base = SmallSignalParams { g_c: 1.0, g_out: 0.3, omega_out: 5.88e7, f_clk: 100e6 };
        let mapping =
            DefaultMapping { v_ref: 1.7, i_load: 10e-3, c_load: 100e-12, i_unit: 50e-6 };
        let grid = [10e-12, 100e-12, 1e-9];
        let points = pole_locus_sweep(&base, SweepAxis::CLoad, &grid, &mapping);
        let mags: Vec<f64> =
            points.iter().map(|p| p.result.as_ref().unwrap().max_magnitude).collect();
        assert!(mags[0] < mags[1] && mags[1] < mags[2], "{mags:?}");
    }

    #[test]
    fn single_point_sweep_matches_direct_computation() {
        let base = SmallSignalParams { g_c: 2.0, g_out: 0.01, omega_out: 5.88e7, f_clk: 100e6 };
        let mapping =
            DefaultMapping { v_ref: 1.7, i_load: 10e-3, c_load: 100e-12, i_unit: 50e-6 };
        let points = pole_locus_sweep(&base, SweepAxis::FClk, &[100e6], &mapping);
        assert_eq!(points.len(), 1);
        let got = points[0].result.as_ref().unwrap();
        let want = closed_loop_poles(&base);
        assert_eq!(got.poles, want.poles);
        assert_eq!(got.stable, want.stable);
    }

    #[test]
    fn sweep_records_per_point_errors_and_continues() {
        let base = SmallSignalParams { g_c: 1.0, g_out: 0.01, omega_out: 5.88e7, f_clk: 100e6 };
        let mapping =
            DefaultMapping { v_ref: 1.7, i_load: 10e-3, c_load: 100e-12, i_unit: 50e-6 };
        let points = pole_locus_sweep(&base, SweepAxis::FClk, &[-1.0, 100e6], &mapping);
        assert!(points[0].result.is_err());
        assert!(points[1].result.is_ok());
    }

    #[test]
    fn iload_mapping_moves_pole_and_gain() {
        let base = SmallSignalParams { g_c: 1.0, g_out: 0.0085, omega_out: 5.88e7, f_clk: 100e6 };
        let mapping =
            DefaultMapping { v_ref: 1.7, i_load: 10e-3, c_load: 100e-12, i_unit: 50e-6 };
        let mapped = mapping.map(&base, SweepAxis::ILoad, 1e-3).unwrap();
        let r = 1.7 / 1e-3;
        assert_relative_eq!(mapped.omega_out, 1.0 / (r * 100e-12), max_relative = 1e-12);
        assert_relative_eq!(mapped.g_out, 50e-6 * r, max_relative = 1e-12);
        assert_eq!(mapped.f_clk, base.f_clk);
    }
}
