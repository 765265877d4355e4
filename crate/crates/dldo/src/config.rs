//! Plain-text run configuration and scenario formats.
//!
//! Configs are INI-style with sections `[plant]`, `[controller]`, `[clock]`,
//! `[analysis]`. Keys are the field names of the corresponding structs;
//! unknown keys are rejected and missing keys take the documented defaults.
//! Numeric literals accept the case-sensitive SI suffixes p, n, u, m, k, M,
//! G (`100p` is exactly 1e-10). `#` starts a comment.
//!
//! Scenario files hold `v_ref`, `duration`, `initial_v_out` as key = value
//! lines plus the load timeline as bare `t value` lines, in order.

use crate::analysis::SmallSignalParams;
use crate::controller::NoiseModel;
use crate::engine::{DldoConfig, LoadStep, LoadValue, Scenario};
use crate::error::{DldoError, Result};
use crate::plant::LoadModel;

/// Which unit bare scenario load values carry; fixed by the configured load
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Current,
    Resistance,
}

impl LoadKind {
    pub fn of(model: &LoadModel) -> Self {
        match model {
            LoadModel::ConstantCurrent { .. } => LoadKind::Current,
            LoadModel::Resistive { .. } => LoadKind::Resistance,
        }
    }
}

/// Parsed config file: the regulator instance plus the optional
/// `[analysis]` small-signal point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub dldo: DldoConfig,
    pub analysis: Option<SmallSignalParams>,
}

fn suffix_exponent(c: char) -> Option<i32> {
    match c {
        'p' => Some(-12),
        'n' => Some(-9),
        'u' => Some(-6),
        'm' => Some(-3),
        'k' => Some(3),
        'M' => Some(6),
        'G' => Some(9),
        _ => None,
    }
}

/// Parse a numeric literal with an optional SI suffix. The suffix is folded
/// into the decimal exponent before a single correctly-rounded parse, so
/// `100p` and `1e-10` yield identical bits.
pub fn parse_si(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty numeric literal".into());
    }
    let (body, shift) = match text.chars().last() {
        Some(c) if c.is_ascii_alphabetic() => match suffix_exponent(c) {
            Some(k) => (&text[..text.len() - 1], k),
            None => return Err(format!("unknown unit suffix '{c}' in '{text}'")),
        },
        _ => (text, 0),
    };
    if body.is_empty() {
        return Err(format!("missing digits in '{text}'"));
    }
    let normalized = if shift == 0 {
        body.to_string()
    } else if let Some(pos) = body.find(['e', 'E']) {
        let (mantissa, exp) = (&body[..pos], &body[pos + 1..]);
        let exp: i32 = exp
            .parse()
            .map_err(|_| format!("bad exponent in '{text}'"))?;
        format!("{mantissa}e{}", exp + shift)
    } else {
        format!("{body}e{shift}")
    };
    let value: f64 = normalized
        .parse()
        .map_err(|_| format!("invalid numeric literal '{text}'"))?;
    if !value.is_finite() {
        return Err(format!("literal '{text}' is out of range"));
    }
    Ok(value)
}

struct KeyValue<'a> {
    section: &'a str,
    key: &'a str,
    value: &'a str,
    line: usize,
}

impl KeyValue<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> DldoError {
        DldoError::Parse(format!(
            "line {}: [{}] {}: {}",
            self.line, self.section, self.key, msg
        ))
    }

    fn number(&self) -> Result<f64> {
        parse_si(self.value).map_err(|e| self.err(e))
    }

    fn count(&self) -> Result<u32> {
        let v = self.number()?;
        if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
            return Err(self.err("must be a non-negative integer"));
        }
        Ok(v as u32)
    }

    fn seed(&self) -> Result<u64> {
        self.value
            .parse()
            .map_err(|_| self.err("must be an unsigned integer"))
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Parse a run config, materializing defaults for absent keys.
pub fn parse_config(text: &str) -> Result<FileConfig> {
    let mut cfg = DldoConfig::default();
    let mut analysis: Option<SmallSignalParams> = None;

    // load-model payload bookkeeping: the payload key must match the model
    let mut load_model_kind: Option<&str> = None;
    let mut i_load: Option<f64> = None;
    let mut r_load: Option<f64> = None;

    let mut section = String::new();
    let mut seen: Vec<(String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| DldoError::Parse(format!("line {}: unterminated section header", idx + 1)))?
                .trim();
            if !["plant", "controller", "clock", "analysis"].contains(&name) {
                return Err(DldoError::Parse(format!("line {}: unknown section [{name}]", idx + 1)));
            }
            if name == "analysis" && analysis.is_none() {
                analysis = Some(SmallSignalParams {
                    g_c: 1.0,
                    g_out: 8.5e-3,
                    omega_out: 5.88e7,
                    f_clk: 100e6,
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            DldoError::Parse(format!("line {}: expected 'key = value', got '{line}'", idx + 1))
        })?;
        let kv = KeyValue { section: &section, key: key.trim(), value: value.trim(), line: idx + 1 };
        if section.is_empty() {
            return Err(kv.err("key appears before any section header"));
        }
        let ident = (section.clone(), kv.key.to_string());
        if seen.contains(&ident) {
            return Err(kv.err("duplicate key"));
        }
        seen.push(ident);

        match (section.as_str(), kv.key) {
            ("plant", "v_dd") => cfg.plant.v_dd = kv.number()?,
            ("plant", "c_load") => cfg.plant.c_load = kv.number()?,
            ("plant", "load_model") => match kv.value {
                "constant_current" | "resistive" => load_model_kind = Some(match kv.value {
                    "constant_current" => "constant_current",
                    _ => "resistive",
                }),
                other => {
                    return Err(kv.err(format!(
                        "unknown load model '{other}' (expected constant_current or resistive)"
                    )))
                }
            },
            ("plant", "i_load") => i_load = Some(kv.number()?),
            ("plant", "r_load") => r_load = Some(kv.number()?),
            ("plant", "i_unit_coarse") => cfg.plant.i_unit_coarse = kv.number()?,
            ("plant", "i_unit_fine") => cfg.plant.i_unit_fine = kv.number()?,
            ("plant", "n_coarse") => cfg.plant.n_coarse = kv.count()?,
            ("plant", "n_fine") => cfg.plant.n_fine = kv.count()?,
            ("plant", "i_q") => cfg.i_q = kv.number()?,
            ("controller", "offset") => cfg.comparator.offset = kv.number()?,
            ("controller", "uncertainty_halfwidth") => {
                cfg.comparator.uncertainty_halfwidth = kv.number()?
            }
            ("controller", "noise_model") => {
                cfg.comparator.noise_model = match kv.value {
                    "none" => NoiseModel::None,
                    "uniform" => NoiseModel::Uniform,
                    "gaussian" => NoiseModel::Gaussian,
                    other => {
                        return Err(kv.err(format!(
                            "unknown noise model '{other}' (expected none, uniform, gaussian)"
                        )))
                    }
                }
            }
            ("controller", "seed") => cfg.comparator.seed = kv.seed()?,
            ("controller", "v_high") => cfg.peak.v_high = Some(kv.number()?),
            ("controller", "v_low") => cfg.peak.v_low = Some(kv.number()?),
            ("controller", "dwell") => cfg.peak.dwell = kv.count()? as usize,
            ("clock", "f_clk") => cfg.clock.f_clk = kv.number()?,
            ("clock", "jitter_sigma") => cfg.clock.jitter_sigma = kv.number()?,
            ("clock", "seed") => cfg.clock.seed = kv.seed()?,
            ("analysis", "g_c") => analysis.as_mut().unwrap().g_c = kv.number()?,
            ("analysis", "g_out") => analysis.as_mut().unwrap().g_out = kv.number()?,
            ("analysis", "omega_out") => analysis.as_mut().unwrap().omega_out = kv.number()?,
            ("analysis", "f_clk") => analysis.as_mut().unwrap().f_clk = kv.number()?,
            _ => return Err(kv.err("unknown key")),
        }
    }

    // assemble the load model from kind + matching payload key
    let kind = load_model_kind.unwrap_or(match cfg.plant.load_model {
        LoadModel::ConstantCurrent { .. } => "constant_current",
        LoadModel::Resistive { .. } => "resistive",
    });
    match kind {
        "constant_current" => {
            if r_load.is_some() {
                return Err(DldoError::Parse(
                    "[plant] r_load requires load_model = resistive".into(),
                ));
            }
            cfg.plant.load_model = LoadModel::ConstantCurrent { i_load: i_load.unwrap_or(10e-3) };
        }
        _ => {
            if i_load.is_some() {
                return Err(DldoError::Parse(
                    "[plant] i_load requires load_model = constant_current".into(),
                ));
            }
            cfg.plant.load_model = LoadModel::Resistive { r_load: r_load.unwrap_or(170.0) };
        }
    }

    Ok(FileConfig { dldo: cfg, analysis })
}

/// Render a config with every key materialized; `parse_config` of the
/// output reproduces the input parameters exactly.
pub fn render_config(cfg: &FileConfig) -> String {
    let mut out = String::new();
    let d = &cfg.dldo;
    out.push_str("[plant]\n");
    out.push_str(&format!("v_dd = {}\n", d.plant.v_dd));
    out.push_str(&format!("c_load = {}\n", d.plant.c_load));
    match d.plant.load_model {
        LoadModel::ConstantCurrent { i_load } => {
            out.push_str("load_model = constant_current\n");
            out.push_str(&format!("i_load = {i_load}\n"));
        }
        LoadModel::Resistive { r_load } => {
            out.push_str("load_model = resistive\n");
            out.push_str(&format!("r_load = {r_load}\n"));
        }
    }
    out.push_str(&format!("i_unit_coarse = {}\n", d.plant.i_unit_coarse));
    out.push_str(&format!("i_unit_fine = {}\n", d.plant.i_unit_fine));
    out.push_str(&format!("n_coarse = {}\n", d.plant.n_coarse));
    out.push_str(&format!("n_fine = {}\n", d.plant.n_fine));
    out.push_str(&format!("i_q = {}\n", d.i_q));
    out.push_str("\n[controller]\n");
    out.push_str(&format!("offset = {}\n", d.comparator.offset));
    out.push_str(&format!("uncertainty_halfwidth = {}\n", d.comparator.uncertainty_halfwidth));
    let noise = match d.comparator.noise_model {
        NoiseModel::None => "none",
        NoiseModel::Uniform => "uniform",
        NoiseModel::Gaussian => "gaussian",
    };
    out.push_str(&format!("noise_model = {noise}\n"));
    out.push_str(&format!("seed = {}\n", d.comparator.seed));
    if let Some(v) = d.peak.v_high {
        out.push_str(&format!("v_high = {v}\n"));
    }
    if let Some(v) = d.peak.v_low {
        out.push_str(&format!("v_low = {v}\n"));
    }
    out.push_str(&format!("dwell = {}\n", d.peak.dwell));
    out.push_str("\n[clock]\n");
    out.push_str(&format!("f_clk = {}\n", d.clock.f_clk));
    out.push_str(&format!("jitter_sigma = {}\n", d.clock.jitter_sigma));
    out.push_str(&format!("seed = {}\n", d.clock.seed));
    if let Some(a) = &cfg.analysis {
        out.push_str("\n[analysis]\n");
        out.push_str(&format!("g_c = {}\n", a.g_c));
        out.push_str(&format!("g_out = {}\n", a.g_out));
        out.push_str(&format!("omega_out = {}\n", a.omega_out));
        out.push_str(&format!("f_clk = {}\n", a.f_clk));
    }
    out
}

/// Parse a scenario file; bare load values take their unit from `kind`.
pub fn parse_scenario(text: &str, kind: LoadKind) -> Result<Scenario> {
    let mut v_ref: Option<f64> = None;
    let mut duration: Option<f64> = None;
    let mut initial_v_out = 0.0;
    let mut load_steps = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| DldoError::Parse(format!("line {}: {msg}", idx + 1));
        if let Some((key, value)) = line.split_once('=') {
            let (key, value) = (key.trim(), value.trim());
            let number = parse_si(value).map_err(|e| perr(format!("{key}: {e}")))?;
            match key {
                "v_ref" => v_ref = Some(number),
                "duration" => duration = Some(number),
                "initial_v_out" => initial_v_out = number,
                other => return Err(perr(format!("unknown scenario key '{other}'"))),
            }
            continue;
        }
        // bare `t value` load-step line
        let mut parts = line.split_whitespace();
        let (t, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(v), None) => (t, v),
            _ => return Err(perr(format!("expected 'key = value' or 't value', got '{line}'"))),
        };
        let t = parse_si(t).map_err(|e| perr(format!("load step time: {e}")))?;
        let v = parse_si(value).map_err(|e| perr(format!("load step value: {e}")))?;
        let value = match kind {
            LoadKind::Current => LoadValue::Amperes(v),
            LoadKind::Resistance => LoadValue::Ohms(v),
        };
        load_steps.push(LoadStep { t, value });
    }

    let scenario = Scenario {
        v_ref: v_ref.ok_or_else(|| DldoError::Parse("scenario is missing v_ref".into()))?,
        duration: duration
            .ok_or_else(|| DldoError::Parse("scenario is missing duration".into()))?,
        load_steps,
        initial_v_out,
    };
    scenario.validate()?;
    Ok(scenario)
}
