//! Quantities written as a number plus unit suffix, converted to SI.
//! Frequencies become angular (rad/s).

use std::f64::consts::TAU;

use etrap_core::hamiltonians::codata::ELEMENTARY_CHARGE;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Frequency,
    Time,
    Temperature,
    Length,
    Voltage,
    Energy,
    Power,
    /// Inverse seconds, not multiplied by 2π.
    Rate,
    Number,
    Integer,
    Text,
}

impl Kind {
    /// Accepted suffixes with their SI factors. The first entry has factor 1.
    pub fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Frequency => &[("rad/s", 1.0), ("Hz", TAU), ("kHz", TAU * 1e3), ("MHz", TAU * 1e6), ("GHz", TAU * 1e9)],
            Kind::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)],
            Kind::Temperature => &[("K", 1.0), ("mK", 1e-3)],
            Kind::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
            Kind::Voltage => &[("V", 1.0)],
            Kind::Energy => &[("J", 1.0), ("eV", ELEMENTARY_CHARGE), ("meV", 1e-3 * ELEMENTARY_CHARGE)],
            Kind::Power => &[("W", 1.0), ("mW", 1e-3)],
            Kind::Rate => &[("/s", 1.0)],
            Kind::Number | Kind::Integer | Kind::Text => &[],
        }
    }

    pub fn base_unit(self) -> Option<&'static str> {
        self.units().first().map(|u| u.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Frequency => "frequency",
            Kind::Time => "time",
            Kind::Temperature => "temperature",
            Kind::Length => "length",
            Kind::Voltage => "voltage",
            Kind::Energy => "energy",
            Kind::Power => "power",
            Kind::Rate => "rate",
            Kind::Number => "number",
            Kind::Integer => "integer",
            Kind::Text => "text",
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum UnitError {
    #[error("{0:?} is not a number")]
    NotANumber(String),
    #[error("{kind} value {text:?} needs a unit ({allowed})")]
    MissingUnit { kind: &'static str, text: String, allowed: String },
    #[error("unit {unit:?} is not a {kind} unit ({allowed})")]
    WrongUnit { kind: &'static str, unit: String, allowed: String },
}

fn allowed(kind: Kind) -> String {
    kind.units().iter().map(|u| u.0).collect::<Vec<_>>().join(", ")
}

fn number(s: &str) -> Result<f64, UnitError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(UnitError::NotANumber(s.trim().to_string())),
    }
}

/// Splits `"1.5 GHz"` or `"1.5GHz"` into number and suffix.
fn split(text: &str) -> (&str, &str) {
    let t = text.trim();
    let cut = t
        .char_indices()
        .find(|&(i, c)| {
            (c.is_alphabetic() || c == '/')
                && !(matches!(c, 'e' | 'E') && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
        })
        .map_or(t.len(), |(i, _)| i);
    (t[..cut].trim(), t[cut..].trim())
}

/// Parses a number with unit into SI.
pub fn parse_quantity(text: &str, kind: Kind) -> Result<f64, UnitError> {
    let units = kind.units();
    if units.is_empty() {
        return number(text);
    }
    let (num, unit) = split(text);
    if num.is_empty() {
        return Err(UnitError::NotANumber(text.trim().to_string()));
    }
    if unit.is_empty() {
        return Err(UnitError::MissingUnit { kind: kind.name(), text: text.trim().to_string(), allowed: allowed(kind) });
    }
    let factor = units
        .iter()
        .find(|u| u.0 == unit)
        .map(|u| u.1)
        .ok_or_else(|| UnitError::WrongUnit { kind: kind.name(), unit: unit.to_string(), allowed: allowed(kind) })?;
    Ok(number(num)? * factor)
}

/// Formats an SI value in `unit` so that [`parse_quantity`] returns exactly `x`.
/// Falls back to the base unit when no decimal in `unit` maps back exactly.
pub fn format_quantity(x: f64, kind: Kind, unit: &str) -> String {
    let units = kind.units();
    if units.is_empty() {
        return format!("{x:?}");
    }
    let factor = units.iter().find(|u| u.0 == unit).map_or(1.0, |u| u.1);
    let v0 = x / factor;
    if v0.is_finite() {
        // x/factor can be off by a few ulps; probe the neighbourhood.
        let mut cands = vec![v0];
        let (mut up, mut down) = (v0, v0);
        for _ in 0..4 {
            up = up.next_up();
            down = down.next_down();
            cands.push(up);
            cands.push(down);
        }
        for v in cands {
            let s = format!("{v:?}");
            if s.parse::<f64>().map(|p| p * factor) == Ok(x) {
                return format!("{s} {unit}");
            }
        }
    }
    format!("{x:?} {}", units[0].0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixes() {
        assert_eq!(parse_quantity("300 mK", Kind::Temperature).unwrap(), 0.3);
        assert_eq!(parse_quantity("1GHz", Kind::Frequency).unwrap(), TAU * 1e9);
        assert_eq!(parse_quantity("1e3 Hz", Kind::Frequency).unwrap(), 1e3 * TAU);
        assert_eq!(parse_quantity("2.5e-3 s", Kind::Time).unwrap(), 2.5e-3);
        assert_eq!(parse_quantity("10 /s", Kind::Rate).unwrap(), 10.0);
        assert_eq!(parse_quantity("-195", Kind::Number).unwrap(), -195.0);
        assert!((parse_quantity("40 meV", Kind::Energy).unwrap() - 0.04 * ELEMENTARY_CHARGE).abs() < 1e-30);
    }

    #[test]
    fn rejects_bad_units() {
        assert!(matches!(parse_quantity("3 GHz", Kind::Length), Err(UnitError::WrongUnit { .. })));
        assert!(matches!(parse_quantity("3", Kind::Length), Err(UnitError::MissingUnit { .. })));
        assert!(matches!(parse_quantity("abc Hz", Kind::Frequency), Err(UnitError::NotANumber(_))));
        assert!(matches!(parse_quantity("3 Ghz", Kind::Frequency), Err(UnitError::WrongUnit { .. })));
    }

    #[test]
    fn format_roundtrips() {
        for &(x, kind, unit) in &[
            (TAU * 986.7e6, Kind::Frequency, "MHz"),
            (0.3, Kind::Temperature, "mK"),
            (1.0 / 3.0, Kind::Length, "um"),
            (1e-300, Kind::Time, "ns"),
        ] {
            let s = format_quantity(x, kind, unit);
            assert_eq!(parse_quantity(&s, kind).unwrap(), x, "{s}");
        }
        assert_eq!(format_quantity(TAU * 1e9, Kind::Frequency, "GHz"), "1.0 GHz");
    }
}
