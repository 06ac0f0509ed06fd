//! Sectioned `key = value` configuration with mandatory units.
//!
//! ```text
//! [readout]
//! omega_c_max = [1, 10, 18] gamma
//! probe_duration = 6us
//! [trap]
//! depth = 5mK
//! ```

use std::path::Path;

use eit_core::geometry::LatticeGeometry;
use eit_core::master::LevelScheme;
use eit_core::protocols::{DetectionModel, ScanGrid, SimOptions};
use eit_core::pulses::{PhaseGateParams, ReadoutParams};
use eit_core::StarkMode;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub gamma_e: f64,
    pub branching: Vec<f64>,
    pub dephasing_ab: f64,
    pub dephasing_ac: f64,
    pub dephasing_bc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadoutConfig {
    pub omega_c_max: Vec<f64>,
    pub probe_peak: f64,
    pub probe_duration_us: f64,
    pub ramp_us: f64,
    pub repump_duration_us: f64,
    pub repump_imbalance: f64,
    pub repeats: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateConfig {
    pub omega_c_max: Vec<f64>,
    pub omega_c_min: f64,
    pub probe_peak: f64,
    pub probe_duration_us: f64,
    pub coupling_duration_us: f64,
    pub ramp_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarkConfig {
    pub peak: f64,
    pub duration_us: f64,
    pub ramp_us: f64,
    pub detuning: f64,
    pub mode: StarkMode,
    pub validation_nm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub half_width_nm: f64,
    pub step_nm: f64,
    pub adaptive: bool,
    pub max_refinements: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarkStateConfig {
    pub omega_p: Vec<f64>,
    pub omega_c: Vec<f64>,
    pub delta1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub preset: Option<String>,
    pub scheme: SchemeConfig,
    pub lattice_nm: f64,
    pub node_nm: f64,
    pub readout: ReadoutConfig,
    pub gate: GateConfig,
    pub stark: StarkConfig,
    pub grid: GridConfig,
    pub trap_depth_mk: f64,
    pub detection_efficiency: f64,
    pub numerical_aperture: f64,
    pub downstream_efficiency: f64,
    /// Quoted neighbor perturbation peak, Ω/2π in Hz.
    pub dipole_peak_hz: f64,
    pub dark_state: DarkStateConfig,
    pub dt_factor: f64,
    pub records_per_segment: usize,
    pub max_steps: usize,
    /// Always on; recorded in the manifest.
    pub deterministic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let r = ReadoutParams::default();
        let g = PhaseGateParams::default();
        let d = DetectionModel::default();
        let s = SimOptions::default();
        Self {
            preset: None,
            scheme: SchemeConfig {
                gamma_e: 1.0,
                branching: vec![1.0 / 3.0; 3],
                dephasing_ab: 0.0,
                dephasing_ac: 0.0,
                dephasing_bc: 0.0,
            },
            lattice_nm: LatticeGeometry::default().lambda_lattice_nm,
            node_nm: 0.0,
            readout: ReadoutConfig {
                omega_c_max: vec![18.0],
                probe_peak: r.probe_peak,
                probe_duration_us: r.probe_duration_us,
                ramp_us: r.rise_us,
                repump_duration_us: r.repump_duration_us,
                repump_imbalance: r.repump_imbalance,
                repeats: r.repeats,
            },
            gate: GateConfig {
                omega_c_max: vec![208.0],
                omega_c_min: 8.0,
                probe_peak: g.probe_peak,
                probe_duration_us: g.probe_duration_us,
                coupling_duration_us: g.coupling_duration_us,
                ramp_us: g.rise_us,
            },
            stark: StarkConfig {
                peak: g.stark_peak,
                duration_us: g.stark_duration_us,
                ramp_us: g.stark_rise_us,
                detuning: g.stark_detuning,
                mode: StarkMode::Effective,
                validation_nm: vec![0.0],
            },
            grid: GridConfig {
                half_width_nm: 195.0,
                step_nm: 6.5,
                adaptive: true,
                max_refinements: 10,
            },
            trap_depth_mk: 5.0,
            detection_efficiency: d.combined_efficiency,
            numerical_aperture: d.numerical_aperture,
            downstream_efficiency: d.downstream_efficiency,
            dipole_peak_hz: 159e3,
            dark_state: DarkStateConfig {
                omega_p: vec![0.0, 0.2, 1.0],
                omega_c: vec![1.0, 18.0],
                delta1: vec![0.0],
            },
            dt_factor: s.dt_factor,
            records_per_segment: s.records_per_segment,
            max_steps: s.max_steps,
            deterministic: true,
        }
    }
}

pub const PRESETS: [&str; 4] = ["fig5", "fig6", "fig9", "fig10"];

impl SimConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let mut c = Self::default();
        match name {
            "fig5" => {
                c.readout.omega_c_max = (1..=18).map(f64::from).collect();
            }
            "fig6" => {
                c.readout.omega_c_max = vec![18.0];
                c.trap_depth_mk = 5.0;
            }
            "fig9" => {
                c.gate.omega_c_max = vec![16.0, 128.0, 208.0];
            }
            "fig10" => {
                c.gate.omega_c_max = vec![208.0];
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown preset {name:?}, expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        }
        c.gate.omega_c_min = 8.0;
        c.gate.probe_peak = 8.0;
        c.preset = Some(name.to_string());
        Ok(c)
    }

    pub fn scheme(&self) -> LevelScheme {
        LevelScheme {
            gamma_e: self.scheme.gamma_e,
            branching: [
                self.scheme.branching[0],
                self.scheme.branching[1],
                self.scheme.branching[2],
            ],
            ground_dephasing: [
                self.scheme.dephasing_ab,
                self.scheme.dephasing_ac,
                self.scheme.dephasing_bc,
            ],
            coupled_legs: [true, true],
        }
    }

    pub fn readout_params(&self) -> ReadoutParams {
        ReadoutParams {
            probe_peak: self.readout.probe_peak,
            probe_duration_us: self.readout.probe_duration_us,
            rise_us: self.readout.ramp_us,
            repump_duration_us: self.readout.repump_duration_us,
            repump_imbalance: self.readout.repump_imbalance,
            repeats: self.readout.repeats,
        }
    }

    pub fn gate_params(&self) -> PhaseGateParams {
        PhaseGateParams {
            probe_peak: self.gate.probe_peak,
            probe_duration_us: self.gate.probe_duration_us,
            coupling_duration_us: self.gate.coupling_duration_us,
            rise_us: self.gate.ramp_us,
            stark_peak: self.stark.peak,
            stark_duration_us: self.stark.duration_us,
            stark_rise_us: self.stark.ramp_us,
            stark_detuning: self.stark.detuning,
        }
    }

    pub fn grid(&self) -> ScanGrid {
        ScanGrid {
            center_nm: self.node_nm,
            half_width_nm: self.grid.half_width_nm,
            step_nm: self.grid.step_nm,
            adaptive: self.grid.adaptive,
            max_refinements: self.grid.max_refinements,
        }
    }

    pub fn detection(&self) -> DetectionModel {
        DetectionModel {
            numerical_aperture: self.numerical_aperture,
            downstream_efficiency: self.downstream_efficiency,
            combined_efficiency: self.detection_efficiency,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            dt_factor: self.dt_factor,
            records_per_segment: self.records_per_segment,
            check_positivity: true,
            max_steps: self.max_steps,
        }
    }

    pub fn lattice(&self) -> LatticeGeometry {
        LatticeGeometry {
            lambda_lattice_nm: self.lattice_nm,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, reason: &str| Err(CliError::config(key, reason));
        let s = &self.scheme;
        if !(s.gamma_e > 0.0 && s.gamma_e.is_finite()) {
            return bad("scheme.gamma_e", "must be > 0");
        }
        if s.branching.len() != 3 || s.branching.iter().any(|b| !(*b >= 0.0)) {
            return bad("scheme.branching", "needs three fractions >= 0");
        }
        if (s.branching.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("scheme.branching", "fractions must sum to 1");
        }
        for (k, v) in [
            ("scheme.dephasing_ab", s.dephasing_ab),
            ("scheme.dephasing_ac", s.dephasing_ac),
            ("scheme.dephasing_bc", s.dephasing_bc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(k, "must be >= 0");
            }
        }
        if !(self.lattice_nm > 0.0) {
            return bad("lattice.wavelength", "must be > 0");
        }
        if !self.node_nm.is_finite() {
            return bad("standing_wave.node", "must be finite");
        }
        let r = &self.readout;
        if r.omega_c_max.is_empty() || r.omega_c_max.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("readout.omega_c_max", "needs at least one value > 0");
        }
        if !(r.probe_peak >= 0.0) {
            return bad("readout.probe_peak", "must be >= 0");
        }
        for (k, v) in [
            ("readout.probe_duration", r.probe_duration_us),
            ("readout.repump_duration", r.repump_duration_us),
        ] {
            if !(v > 0.0) {
                return bad(k, "must be > 0");
            }
        }
        if !(r.ramp_us >= 0.0 && 2.0 * r.ramp_us <= r.probe_duration_us) {
            return bad("readout.ramp", "must lie in [0, probe_duration/2]");
        }
        if !(0.0..=1.0).contains(&r.repump_imbalance) {
            return bad("readout.repump_imbalance", "must lie in [0, 1]");
        }
        if r.repeats == 0 {
            return bad("readout.repeats", "must be >= 1");
        }
        let g = &self.gate;
        if g.omega_c_max.is_empty() || g.omega_c_max.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("gate.omega_c_max", "needs at least one value > 0");
        }
        if !(g.omega_c_min >= 0.0) || g.omega_c_max.iter().any(|m| *m < g.omega_c_min) {
            return bad("gate.omega_c_min", "must lie in [0, omega_c_max]");
        }
        if !(g.probe_peak >= 0.0) {
            return bad("gate.probe_peak", "must be >= 0");
        }
        if !(g.probe_duration_us > 0.0 && g.coupling_duration_us > g.probe_duration_us) {
            return bad("gate.coupling_duration", "must exceed gate.probe_duration");
        }
        if !(g.ramp_us > 0.0) {
            return bad("gate.ramp", "must be > 0");
        }
        let st = &self.stark;
        if !(st.peak >= 0.0) {
            return bad("stark.peak", "must be >= 0");
        }
        if !(st.duration_us >= 0.0 && st.ramp_us >= 0.0) {
            return bad("stark.duration", "must be >= 0");
        }
        if !(st.detuning != 0.0 && st.detuning.is_finite()) {
            return bad("stark.detuning", "must be nonzero");
        }
        let gr = &self.grid;
        if !(gr.half_width_nm > 0.0) {
            return bad("grid.half_width", "must be > 0");
        }
        if !(gr.step_nm > 0.0 && gr.step_nm <= gr.half_width_nm) {
            return bad("grid.step", "must lie in (0, half_width]");
        }
        if !(self.trap_depth_mk > 0.0 && self.trap_depth_mk.is_finite()) {
            return bad("trap.depth", "must be > 0");
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return bad("detection.efficiency", "must lie in (0, 1]");
        }
        if !(self.dipole_peak_hz >= 0.0 && self.dipole_peak_hz.is_finite()) {
            return bad("dipole.peak", "must be >= 0");
        }
        let d = &self.dark_state;
        if d.omega_p.iter().chain(&d.omega_c).any(|v| !(*v >= 0.0)) {
            return bad("dark_state.omega_p", "rabi frequencies must be >= 0");
        }
        if !(self.dt_factor > 0.0 && self.dt_factor <= 0.1) {
            return bad("solver.dt_factor", "must lie in (0, 0.1]");
        }
        if self.records_per_segment < 2 {
            return bad("solver.records", "must be >= 2");
        }
        if self.max_steps == 0 {
            return bad("solver.max_steps", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Rate,
    Time,
    Length,
    Temperature,
    Frequency,
    Bare,
    Count,
    Flag,
    Mode,
    RateList,
    LengthList,
    BareList,
}

const KEYS: &[(&str, Kind)] = &[
    ("scheme.gamma_e", Kind::Rate),
    ("scheme.branching", Kind::BareList),
    ("scheme.dephasing_ab", Kind::Rate),
    ("scheme.dephasing_ac", Kind::Rate),
    ("scheme.dephasing_bc", Kind::Rate),
    ("lattice.wavelength", Kind::Length),
    ("standing_wave.node", Kind::Length),
    ("readout.omega_c_max", Kind::RateList),
    ("readout.probe_peak", Kind::Rate),
    ("readout.probe_duration", Kind::Time),
    ("readout.ramp", Kind::Time),
    ("readout.repump_duration", Kind::Time),
    ("readout.repump_imbalance", Kind::Bare),
    ("readout.repeats", Kind::Count),
    ("gate.omega_c_max", Kind::RateList),
    ("gate.omega_c_min", Kind::Rate),
    ("gate.probe_peak", Kind::Rate),
    ("gate.probe_duration", Kind::Time),
    ("gate.coupling_duration", Kind::Time),
    ("gate.ramp", Kind::Time),
    ("stark.peak", Kind::Rate),
    ("stark.duration", Kind::Time),
    ("stark.ramp", Kind::Time),
    ("stark.detuning", Kind::Rate),
    ("stark.mode", Kind::Mode),
    ("stark.validation", Kind::LengthList),
    ("grid.half_width", Kind::Length),
    ("grid.step", Kind::Length),
    ("grid.adaptive", Kind::Flag),
    ("grid.max_refinements", Kind::Count),
    ("trap.depth", Kind::Temperature),
    ("detection.efficiency", Kind::Bare),
    ("detection.numerical_aperture", Kind::Bare),
    ("detection.downstream_efficiency", Kind::Bare),
    ("dipole.peak", Kind::Frequency),
    ("dark_state.omega_p", Kind::RateList),
    ("dark_state.omega_c", Kind::RateList),
    ("dark_state.delta1", Kind::RateList),
    ("solver.dt_factor", Kind::Bare),
    ("solver.records", Kind::Count),
    ("solver.max_steps", Kind::Count),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    List(Vec<f64>),
    Flag(bool),
    Mode(StarkMode),
}

fn units(kind: Kind) -> &'static [(&'static str, f64)] {
    match kind {
        Kind::Rate | Kind::RateList => &[("gamma", 1.0)],
        Kind::Time => &[("us", 1.0), ("ns", 1e-3), ("ms", 1e3), ("s", 1e6)],
        Kind::Length | Kind::LengthList => &[("nm", 1.0), ("um", 1e3)],
        Kind::Temperature => &[("mK", 1.0), ("uK", 1e-3), ("K", 1e3)],
        Kind::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6)],
        _ => &[],
    }
}

/// Splits "12.5us" into (12.5, "us").
fn split_unit(s: &str) -> (&str, &str) {
    let s = s.trim();
    let cut = s
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_alphabetic())
        .last()
        .map_or(s.len(), |(i, _)| i);
    // exponent markers such as "1e5" are not units
    let (num, unit) = s.split_at(cut);
    if unit == "e" || unit == "E" {
        return (s, "");
    }
    (num.trim(), unit)
}

fn parse_number(key: &str, s: &str) -> Result<f64, CliError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::config(key, format!("cannot parse number {s:?}")))
}

fn parse_quantity(key: &str, kind: Kind, s: &str, default_unit: Option<&str>) -> Result<f64, CliError> {
    let allowed = units(kind);
    let (num, unit) = split_unit(s);
    let unit = if unit.is_empty() { default_unit.unwrap_or("") } else { unit };
    if allowed.is_empty() {
        if !unit.is_empty() {
            return Err(CliError::config(key, format!("dimensionless value, unexpected unit {unit:?}")));
        }
        return parse_number(key, num);
    }
    let names: Vec<&str> = allowed.iter().map(|u| u.0).collect();
    if unit.is_empty() {
        return Err(CliError::config(
            key,
            format!("missing unit, expected one of {}", names.join(", ")),
        ));
    }
    let scale = allowed
        .iter()
        .find(|u| u.0 == unit)
        .map(|u| u.1)
        .ok_or_else(|| {
            CliError::config(key, format!("unit {unit:?} not allowed, expected one of {}", names.join(", ")))
        })?;
    Ok(parse_number(key, num)? * scale)
}

fn parse_value(key: &str, kind: Kind, raw: &str) -> Result<Value, CliError> {
    match kind {
        Kind::Flag => match raw {
            "true" | "yes" | "on" => Ok(Value::Flag(true)),
            "false" | "no" | "off" => Ok(Value::Flag(false)),
            _ => Err(CliError::config(key, format!("expected true or false, got {raw:?}"))),
        },
        Kind::Mode => match raw {
            "explicit" => Ok(Value::Mode(StarkMode::Explicit)),
            "effective" => Ok(Value::Mode(StarkMode::Effective)),
            _ => Err(CliError::config(key, format!("expected explicit or effective, got {raw:?}"))),
        },
        Kind::Count => {
            let v: u32 = raw
                .parse()
                .map_err(|_| CliError::config(key, format!("expected a nonnegative integer, got {raw:?}")))?;
            Ok(Value::Num(f64::from(v)))
        }
        Kind::RateList | Kind::LengthList | Kind::BareList => {
            let (body, shared) = match raw.strip_prefix('[') {
                Some(rest) => {
                    let close = rest
                        .find(']')
                        .ok_or_else(|| CliError::config(key, "unterminated list"))?;
                    let unit = rest[close + 1..].trim();
                    (&rest[..close], (!unit.is_empty()).then_some(unit))
                }
                None => (raw, None),
            };
            let items: Vec<&str> = body.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            if items.is_empty() {
                return Err(CliError::config(key, "empty list"));
            }
            items
                .iter()
                .map(|it| parse_quantity(key, kind, it, shared))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List)
        }
        _ => parse_quantity(key, kind, raw, None).map(Value::Num),
    }
}

fn apply(cfg: &mut SimConfig, key: &str, v: Value) {
    let num = |v: &Value| match v {
        Value::Num(x) => *x,
        _ => f64::NAN,
    };
    let list = |v: &Value| match v {
        Value::List(x) => x.clone(),
        _ => Vec::new(),
    };
    let x = num(&v);
    match key {
        "scheme.gamma_e" => cfg.scheme.gamma_e = x,
        "scheme.branching" => cfg.scheme.branching = list(&v),
        "scheme.dephasing_ab" => cfg.scheme.dephasing_ab = x,
        "scheme.dephasing_ac" => cfg.scheme.dephasing_ac = x,
        "scheme.dephasing_bc" => cfg.scheme.dephasing_bc = x,
        "lattice.wavelength" => cfg.lattice_nm = x,
        "standing_wave.node" => cfg.node_nm = x,
        "readout.omega_c_max" => cfg.readout.omega_c_max = list(&v),
        "readout.probe_peak" => cfg.readout.probe_peak = x,
        "readout.probe_duration" => cfg.readout.probe_duration_us = x,
        "readout.ramp" => cfg.readout.ramp_us = x,
        "readout.repump_duration" => cfg.readout.repump_duration_us = x,
        "readout.repump_imbalance" => cfg.readout.repump_imbalance = x,
        "readout.repeats" => cfg.readout.repeats = x as u32,
        "gate.omega_c_max" => cfg.gate.omega_c_max = list(&v),
        "gate.omega_c_min" => cfg.gate.omega_c_min = x,
        "gate.probe_peak" => cfg.gate.probe_peak = x,
        "gate.probe_duration" => cfg.gate.probe_duration_us = x,
        "gate.coupling_duration" => cfg.gate.coupling_duration_us = x,
        "gate.ramp" => cfg.gate.ramp_us = x,
        "stark.peak" => cfg.stark.peak = x,
        "stark.duration" => cfg.stark.duration_us = x,
        "stark.ramp" => cfg.stark.ramp_us = x,
        "stark.detuning" => cfg.stark.detuning = x,
        "stark.mode" => {
            if let Value::Mode(m) = v {
                cfg.stark.mode = m;
            }
        }
        "stark.validation" => cfg.stark.validation_nm = list(&v),
        "grid.half_width" => cfg.grid.half_width_nm = x,
        "grid.step" => cfg.grid.step_nm = x,
        "grid.adaptive" => {
            if let Value::Flag(b) = v {
                cfg.grid.adaptive = b;
            }
        }
        "grid.max_refinements" => cfg.grid.max_refinements = x as u32,
        "trap.depth" => cfg.trap_depth_mk = x,
        "detection.efficiency" => cfg.detection_efficiency = x,
        "detection.numerical_aperture" => cfg.numerical_aperture = x,
        "detection.downstream_efficiency" => cfg.downstream_efficiency = x,
        "dipole.peak" => cfg.dipole_peak_hz = x,
        "dark_state.omega_p" => cfg.dark_state.omega_p = list(&v),
        "dark_state.omega_c" => cfg.dark_state.omega_c = list(&v),
        "dark_state.delta1" => cfg.dark_state.delta1 = list(&v),
        "solver.dt_factor" => cfg.dt_factor = x,
        "solver.records" => cfg.records_per_segment = x as usize,
        "solver.max_steps" => cfg.max_steps = x as usize,
        _ => unreachable!("key table and apply() disagree on {key}"),
    }
}

/// Applies the entries of `text` on top of `base` and validates the result.
pub fn parse_config(text: &str, base: SimConfig) -> Result<SimConfig, CliError> {
    let mut cfg = base;
    let mut section = String::new();
    let mut seen: Vec<String> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| CliError::Parse {
                line: n + 1,
                reason: format!("bad section header {line:?}"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Parse {
            line: n + 1,
            reason: format!("expected key = value, got {line:?}"),
        })?;
        let k = k.trim();
        let key = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        let kind = KEYS
            .iter()
            .find(|(name, _)| *name == key)
            .map(|(_, kind)| *kind)
            .ok_or_else(|| CliError::config(&key, "unknown key"))?;
        if seen.contains(&key) {
            return Err(CliError::config(&key, "given more than once"));
        }
        seen.push(key.clone());
        let value = parse_value(&key, kind, v.trim())?;
        apply(&mut cfg, &key, value);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Preset (or defaults), then the file on top.
pub fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<SimConfig, CliError> {
    let base = match preset {
        Some(p) => SimConfig::preset(p)?,
        None => SimConfig::default(),
    };
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_config(&text, base)
        }
        None => {
            base.validate()?;
            Ok(base)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("", SimConfig::default()).unwrap();
        assert_eq!(c, SimConfig::default());
        let c = parse_config("# only a comment\n\n", SimConfig::default()).unwrap();
        assert_eq!(c, SimConfig::default());
    }

    #[test]
    fn fig5_preset() {
        let c = SimConfig::preset("fig5").unwrap();
        assert_eq!(c.readout.probe_peak, 0.2);
        assert_eq!(c.readout.probe_duration_us, 6.0);
        assert_eq!(c.readout.omega_c_max, (1..=18).map(f64::from).collect::<Vec<_>>());
        let c = SimConfig::preset("fig9").unwrap();
        assert_eq!(c.gate.omega_c_max, vec![16.0, 128.0, 208.0]);
        assert_eq!((c.gate.omega_c_min, c.gate.probe_peak), (8.0, 8.0));
        assert!(SimConfig::preset("fig7").is_err());
    }

    #[test]
    fn negative_trap_depth_names_key() {
        let e = parse_config("[trap]\ndepth = -5mK\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "trap.depth");
    }

    #[test]
    fn units_are_mandatory_and_converted() {
        let e = parse_config("readout.probe_duration = 6\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "readout.probe_duration");
        let e = parse_config("readout.probe_duration = 6nm\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "readout.probe_duration");
        let c = parse_config(
            "[readout]\nprobe_duration = 6000ns\nramp = 1e-3ms\n[grid]\nhalf_width = 0.2um\nstep=5nm\n",
            SimConfig::default(),
        )
        .unwrap();
        assert!((c.readout.probe_duration_us - 6.0).abs() < 1e-12);
        assert!((c.readout.ramp_us - 1.0).abs() < 1e-12);
        assert!((c.grid.half_width_nm - 200.0).abs() < 1e-9);
        let e = parse_config("detection.efficiency = 0.03gamma\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "detection.efficiency");
    }

    #[test]
    fn lists_flags_modes() {
        let c = parse_config(
            "[readout]\nomega_c_max = [1, 10, 18] gamma\n[gate]\nomega_c_max = 16gamma, 208gamma\n\
             [stark]\nmode = explicit\nvalidation = [0, 10]nm\n[grid]\nadaptive = false\n\
             [dipole]\npeak = 0.159MHz\n",
            SimConfig::default(),
        )
        .unwrap();
        assert_eq!(c.readout.omega_c_max, vec![1.0, 10.0, 18.0]);
        assert_eq!(c.gate.omega_c_max, vec![16.0, 208.0]);
        assert_eq!(c.stark.mode, StarkMode::Explicit);
        assert_eq!(c.stark.validation_nm, vec![0.0, 10.0]);
        assert!(!c.grid.adaptive);
        assert!((c.dipole_peak_hz - 159e3).abs() < 1e-6);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let e = parse_config("[trap]\ndepht = 5mK\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "trap.depht");
        let e = parse_config("trap.depth = 5mK\ntrap.depth = 6mK\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "trap.depth");
        assert!(matches!(
            parse_config("nonsense\n", SimConfig::default()),
            Err(CliError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn invariant_violations_name_key() {
        let e = parse_config("[gate]\nomega_c_min = 300gamma\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "gate.omega_c_min");
        let e = parse_config("scheme.branching = [0.5, 0.5, 0.5]\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "scheme.branching");
        let e = parse_config("solver.dt_factor = 0.5\n", SimConfig::default()).unwrap_err();
        assert_eq!(key_of(e), "solver.dt_factor");
    }

    #[test]
    fn exponent_is_not_a_unit() {
        assert_eq!(split_unit("1e5"), ("1e5", ""));
        assert_eq!(split_unit("2.5e-3us"), ("2.5e-3", "us"));
        assert_eq!(split_unit("5 mK"), ("5", "mK"));
    }

    #[test]
    fn every_key_applies() {
        for (key, _) in KEYS {
            let mut c = SimConfig::default();
            apply(&mut c, key, Value::Num(1.0));
        }
    }
}
