//! Sectioned `key = value` configuration with unit-suffixed quantities.
//!
//! ```text
//! # comment
//! [dispersive]
//! g_ec = 33 kHz
//! ```
//!
//! Values resolve in order: command-line file, then preset, then built-in default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::units::{format_quantity, parse_quantity, Kind};
use crate::CliError;

pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub kind: Kind,
    /// Default in config syntax; `None` means derived or unset unless given.
    pub default: Option<&'static str>,
}

const fn k(section: &'static str, key: &'static str, kind: Kind, default: Option<&'static str>) -> KeySpec {
    KeySpec { section, key, kind, default }
}

use Kind::*;

pub const SCHEMA: &[KeySpec] = &[
    k("dispersive", "omega_mw", Frequency, Some("1 GHz")),
    k("dispersive", "omega_q", Frequency, Some("4 GHz")),
    k("dispersive", "g_ec", Frequency, Some("33 kHz")),
    k("dispersive", "g_sc", Frequency, Some("200 MHz")),
    k("dispersive", "sweep_start", Frequency, Some("900 MHz")),
    k("dispersive", "sweep_stop", Frequency, Some("1100 MHz")),
    k("dispersive", "points", Integer, Some("500")),
    k("dispersive", "n_fock", Integer, Some("6")),
    k("dispersive", "readout_freq", Frequency, Some("1.2 GHz")),
    k("dispersive", "noise_dbm_per_hz", Number, Some("-195")),
    k("dispersive", "efficiency", Number, Some("1")),
    k("dispersive", "q_loaded", Number, Some("1e5")),
    k("cooling", "mode_freq", Frequency, Some("1 GHz")),
    k("cooling", "temperature", Temperature, Some("300 mK")),
    k("cooling", "heating", Rate, Some("0 /s")),
    k("cooling", "rabi_gf", Frequency, Some("3 MHz")),
    k("cooling", "rabi_ef", Frequency, Some("3 MHz")),
    k("cooling", "rabi_ge", Frequency, Some("10 MHz")),
    k("cooling", "t_meas", Time, Some("1 us")),
    k("cooling", "pulse_error", Number, Some("0.01")),
    k("cooling", "readout_error", Number, Some("0.01")),
    k("cooling", "n_cavity_max", Integer, Some("40")),
    k("cooling", "gamma_th", Rate, None),
    k("cooling", "q_mode", Number, Some("1e6")),
    k("cooling", "cycles", Integer, Some("30")),
    k("cooling", "initial_n", Number, None),
    k("cooling", "gamma_c", Frequency, Some("33 kHz")),
    k("cooling", "g", Frequency, Some("33 kHz")),
    k("cooling", "gamma_i", Frequency, Some("10 kHz")),
    k("cooling", "gamma_th_e", Rate, Some("10 /s")),
    k("cooling", "n_th", Number, None),
    k("cooling", "ne_paper", Number, None),
    k("coulomb", "row", Integer, Some("0")),
    k("coulomb", "ion_freq", Frequency, Some("2 MHz")),
    k("coulomb", "gamma_i", Frequency, Some("10 kHz")),
    k("coulomb", "gamma_th_e", Rate, Some("10 /s")),
    k("coulomb", "temperature", Temperature, Some("300 mK")),
    k("coulomb", "beta", Frequency, Some("0 Hz")),
    k("coulomb", "alpha_k", Frequency, Some("0 Hz")),
    k("trapfields", "species", Text, Some("electron")),
    k("trapfields", "rf_voltage", Voltage, Some("30 V")),
    k("trapfields", "mw_voltage", Voltage, Some("20 V")),
    k("trapfields", "rf_freq", Frequency, Some("40 MHz")),
    k("trapfields", "mw_freq", Frequency, Some("4 GHz")),
    k("trapfields", "rf_inner", Length, Some("80 um")),
    k("trapfields", "rf_outer", Length, Some("160 um")),
    k("trapfields", "mw_inner", Length, Some("40 um")),
    k("trapfields", "mw_outer", Length, Some("70 um")),
    k("trapfields", "grid_nx", Integer, Some("201")),
    k("trapfields", "grid_nz", Integer, Some("201")),
    k("trapfields", "lateral_factor", Number, Some("4")),
    k("trapfields", "z_min", Length, Some("2 um")),
    k("trapfields", "z_max", Length, Some("400 um")),
    k("trapfields", "drive_freq", Frequency, Some("6 GHz")),
    k("trapfields", "secular_freq", Frequency, Some("1.2 GHz")),
    k("trapfields", "map_half_width", Length, Some("20 um")),
    k("trapfields", "map_points", Integer, Some("41")),
    k("spectra", "threshold", Number, Some("0.1")),
    k("spectra", "base_freq", Frequency, None),
];

pub const PRESETS: &[(&str, &str)] = &[
    (
        "table1",
        "[dispersive]\nomega_mw = 1 GHz\nomega_q = 4 GHz\ng_ec = 33 kHz\ng_sc = 200 MHz\n",
    ),
    (
        "table2-row1",
        "[coulomb]\nrow = 1\n[cooling]\nmode_freq = 800 MHz\ng = 33 kHz\nne_paper = 5.3e-2\n",
    ),
    (
        "table2-row2",
        "[coulomb]\nrow = 2\n[cooling]\nmode_freq = 800 MHz\ng = 0.39 kHz\nne_paper = 5.9\n",
    ),
    (
        "table2-row3",
        "[coulomb]\nrow = 3\n[cooling]\nmode_freq = 500 MHz\ng = 39 kHz\nne_paper = 3.8e-2\n",
    ),
    (
        "table2-row4",
        "[coulomb]\nrow = 4\n[cooling]\nmode_freq = 500 MHz\ng = 1.6e3 kHz\nne_paper = 2.2e-3\n",
    ),
    (
        "fiverail",
        "[trapfields]\nrf_voltage = 30 V\nmw_voltage = 20 V\nrf_freq = 40 MHz\nmw_freq = 4 GHz\n",
    ),
    ("coax", "[trapfields]\nspecies = electron\ndrive_freq = 6 GHz\nsecular_freq = 1.2 GHz\n[dispersive]\nreadout_freq = 1.2 GHz\n"),
    (
        "ideal-pulse",
        "[cooling]\npulse_error = 0\nreadout_error = 0\ngamma_th = 0 /s\nheating = 0 /s\ninitial_n = 6\nn_cavity_max = 200\ncycles = 30\n",
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

fn spec(section: &str, key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.section == section && s.key == key)
}

#[derive(Clone, Debug, PartialEq)]
enum Origin {
    File(String),
    Preset(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    raw: String,
    line: usize,
    origin: Origin,
}

/// Parsed `section → key → raw value`, validated against [`SCHEMA`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<(String, String), Entry>,
}

fn parse_text(text: &str, origin: Origin) -> Result<BTreeMap<(String, String), Entry>, CliError> {
    let err = |line: usize, msg: String| CliError::Config { line: Some(line), msg };
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(line, format!("malformed section header {body:?}")))?.trim();
            if !SCHEMA.iter().any(|s| s.section == name) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, found {body:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.as_deref().ok_or_else(|| err(line, format!("key {key:?} appears before any section")))?;
        let ks = spec(sec, key).ok_or_else(|| err(line, format!("unknown key {key:?} in [{sec}]")))?;
        if value.is_empty() {
            return Err(err(line, format!("{sec}.{key} has no value")));
        }
        parse_value(ks, value).map_err(|m| err(line, format!("{sec}.{key}: {m}")))?;
        let slot = (sec.to_string(), key.to_string());
        if out.contains_key(&slot) {
            return Err(err(line, format!("{sec}.{key} set twice")));
        }
        out.insert(slot, Entry { raw: value.to_string(), line, origin: origin.clone() });
    }
    Ok(out)
}

fn parse_value(ks: &KeySpec, raw: &str) -> Result<f64, String> {
    match ks.kind {
        Kind::Text => Ok(0.0),
        Kind::Integer => raw
            .parse::<u64>()
            .map(|v| v as f64)
            .map_err(|_| format!("{raw:?} is not a non-negative integer")),
        kind => parse_quantity(raw, kind).map_err(|e| e.to_string()),
    }
}

impl Config {
    /// Parses config text; errors carry 1-based line numbers.
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        Ok(Self { entries: parse_text(text, Origin::File(source.to_string()))? })
    }

    pub fn load(preset: Option<&str>, file: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        if let Some(name) = preset {
            let text = PRESETS
                .iter()
                .find(|p| p.0 == name)
                .map(|p| p.1)
                .ok_or_else(|| CliError::Config { line: None, msg: format!("unknown preset {name:?}") })?;
            cfg.entries = parse_text(text, Origin::Preset(PRESETS.iter().find(|p| p.0 == name).unwrap().0))?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config { line: None, msg: format!("cannot read {}: {e}", path.display()) })?;
            let user = parse_text(&text, Origin::File(path.display().to_string()))?;
            cfg.entries.extend(user);
        }
        Ok(cfg)
    }

    fn raw(&self, section: &str, key: &str) -> Option<(String, Option<&Entry>)> {
        let ks = spec(section, key).unwrap_or_else(|| panic!("{section}.{key} missing from schema"));
        match self.entries.get(&(section.to_string(), key.to_string())) {
            Some(e) => Some((e.raw.clone(), Some(e))),
            None => ks.default.map(|d| (d.to_string(), None)),
        }
    }

    fn value(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        let ks = spec(section, key).unwrap_or_else(|| panic!("{section}.{key} missing from schema"));
        let Some((raw, entry)) = self.raw(section, key) else { return Ok(None) };
        parse_value(ks, &raw).map(Some).map_err(|msg| CliError::Config {
            line: entry.map(|e| e.line),
            msg: format!("{section}.{key}: {msg}"),
        })
    }

    /// SI value, or `None` when neither set nor defaulted.
    pub fn opt(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        self.value(section, key)
    }

    pub fn get(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.value(section, key)?
            .ok_or_else(|| CliError::Config { line: None, msg: format!("{section}.{key} must be set") })
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<usize, CliError> {
        Ok(self.get(section, key)? as usize)
    }

    pub fn get_text(&self, section: &str, key: &str) -> Result<String, CliError> {
        self.raw(section, key)
            .map(|r| r.0)
            .ok_or_else(|| CliError::Config { line: None, msg: format!("{section}.{key} must be set") })
    }

    /// Config error pinned to the line that set `section.key`, if any.
    pub fn error_at(&self, section: &str, key: &str, msg: String) -> CliError {
        let line = self.entries.get(&(section.to_string(), key.to_string())).map(|e| e.line);
        CliError::Config { line, msg: format!("{section}.{key}: {msg}") }
    }

    /// Resolved values of `sections` in config syntax, quantities in SI base units.
    pub fn echo(&self, sections: &[&str]) -> Result<String, CliError> {
        let mut out = String::new();
        for sec in sections {
            let _ = writeln!(out, "[{sec}]");
            for ks in SCHEMA.iter().filter(|s| s.section == *sec) {
                let origin = match self.entries.get(&(sec.to_string(), ks.key.to_string())).map(|e| &e.origin) {
                    Some(Origin::File(f)) => format!("file {f}"),
                    Some(Origin::Preset(p)) => format!("preset {p}"),
                    None if ks.default.is_some() => "default".to_string(),
                    None => {
                        let _ = writeln!(out, "# {} unset", ks.key);
                        continue;
                    }
                };
                let shown = match ks.kind {
                    Kind::Text => self.get_text(sec, ks.key)?,
                    Kind::Integer => format!("{}", self.get_usize(sec, ks.key)?),
                    Kind::Number => format_quantity(self.get(sec, ks.key)?, Kind::Number, ""),
                    kind => {
                        let base = kind.base_unit().unwrap_or("");
                        format_quantity(self.get(sec, ks.key)?, kind, base)
                    }
                };
                let _ = writeln!(out, "{} = {shown}  # {origin}", ks.key);
            }
        }
        Ok(out)
    }
}
