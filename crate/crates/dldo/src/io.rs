//! CSV and JSON artifact formats: waveform traces, transient metrics,
//! pole-locus tables, and sweep aggregates.

use std::io::{BufRead, Write};

use crate::analysis::SweepPoint;
use crate::controller::LoopMode;
use crate::engine::{Sample, TransientMetrics, Waveform};
use crate::error::{DldoError, Result};

pub const WAVEFORM_HEADER: &str = "t_s,v_out_v,code_coarse,code_fine,i_drive_a,mode";
pub const POLE_HEADER: &str = "axis_value,pole1_re,pole1_im,pole2_re,pole2_im,max_mag,stable";
pub const SWEEP_HEADER: &str = "axis_value,status,settling_time_s,undershoot_depth_v,\
undershoot_min_v,overshoot_peak_v,ripple_pp_v,recovery_time_s,current_efficiency,\
power_efficiency,td_stable,ss_max_mag,ss_stable";

/// Floats in waveform CSVs carry 9 significant digits.
fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_waveform_csv<W: Write>(out: &mut W, waveform: &Waveform) -> Result<()> {
    writeln!(out, "{WAVEFORM_HEADER}")?;
    for s in &waveform.samples {
        let mode = match s.mode {
            LoopMode::Coarse => 'C',
            LoopMode::Fine => 'F',
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig9(s.t),
            sig9(s.v_out),
            s.code_coarse,
            s.code_fine,
            sig9(s.i_drive),
            mode
        )?;
    }
    Ok(())
}

pub fn read_waveform_csv<R: BufRead>(input: R) -> Result<Waveform> {
    let mut lines = input.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| DldoError::Parse("empty waveform file".into()))?
        .1?;
    if header.trim() != WAVEFORM_HEADER {
        return Err(DldoError::Parse(format!(
            "unexpected waveform header '{}'",
            header.trim()
        )));
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(DldoError::Parse(format!(
                "line {}: expected 6 fields, got {}",
                idx + 1,
                fields.len()
            )));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| DldoError::Parse(format!("line {}: bad {name} '{}'", idx + 1, fields[i])))
        };
        let count = |i: usize, name: &str| -> Result<u32> {
            fields[i]
                .parse()
                .map_err(|_| DldoError::Parse(format!("line {}: bad {name} '{}'", idx + 1, fields[i])))
        };
        let mode = match fields[5] {
            "C" => LoopMode::Coarse,
            "F" => LoopMode::Fine,
            other => {
                return Err(DldoError::Parse(format!("line {}: bad mode '{other}'", idx + 1)))
            }
        };
        samples.push(Sample {
            t: num(0, "time")?,
            v_out: num(1, "voltage")?,
            code_coarse: count(2, "coarse code")?,
            code_fine: count(3, "fine code")?,
            i_drive: num(4, "drive current")?,
            mode,
        });
    }
    Ok(Waveform { samples })
}

/// Metrics JSON: the `TransientMetrics` fields verbatim, `null` marking
/// absent values (and a bare `null` document for an empty run).
pub fn metrics_json(metrics: &Option<TransientMetrics>) -> String {
    serde_json::to_string_pretty(metrics).expect("metrics are always serializable")
}

/// Pole table rows in grid order. The dominant pole is listed first.
/// Errored points keep their row with `nan` fields and the error message
/// in the `stable` column.
pub fn write_pole_csv<W: Write>(out: &mut W, points: &[SweepPoint]) -> Result<()> {
    writeln!(out, "{POLE_HEADER}")?;
    for point in points {
        match &point.result {
            Ok(r) => {
                let mut poles = r.poles;
                poles.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    point.value,
                    poles[0].re,
                    poles[0].im,
                    poles[1].re,
                    poles[1].im,
                    r.max_magnitude,
                    r.stable
                )?;
            }
            Err(e) => {
                let msg = e.to_string().replace(',', ";");
                writeln!(out, "{},nan,nan,nan,nan,nan,error: {}", point.value, msg)?;
            }
        }
    }
    Ok(())
}

/// One aggregated sweep row: transient metrics plus the time-domain and
/// small-signal stability verdicts.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub status: String,
    pub metrics: Option<TransientMetrics>,
    /// Simulation completed and settled.
    pub td_stable: Option<bool>,
    pub ss_max_mag: Option<f64>,
    pub ss_stable: Option<bool>,
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        let m = row.metrics.as_ref();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.axis_value,
            row.status.replace(',', ";"),
            opt_num(m.and_then(|m| m.settling_time)),
            opt_num(m.and_then(|m| m.undershoot_depth)),
            opt_num(m.and_then(|m| m.undershoot_min_v)),
            opt_num(m.map(|m| m.overshoot_peak_v)),
            opt_num(m.map(|m| m.ripple_pp)),
            opt_num(m.and_then(|m| m.recovery_time)),
            opt_num(m.map(|m| m.current_efficiency)),
            opt_num(m.map(|m| m.power_efficiency)),
            opt_bool(row.td_stable),
            opt_num(row.ss_max_mag),
            opt_bool(row.ss_stable),
        )?;
    }
    Ok(())
}
