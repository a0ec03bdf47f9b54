//! Quantities with explicit unit suffixes, converted to SI with angular
//! frequencies in rad/s.

use std::f64::consts::TAU;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Frequency,
    Time,
    Angle,
    Field,
}

impl Quantity {
    fn table(self) -> &'static [(&'static str, f64)] {
        match self {
            Quantity::Frequency => &[
                ("Hz", TAU),
                ("kHz", TAU * 1e3),
                ("MHz", TAU * 1e6),
                ("GHz", TAU * 1e9),
                ("rad/s", 1.0),
                ("krad/s", 1e3),
                ("Mrad/s", 1e6),
                ("Grad/s", 1e9),
            ],
            Quantity::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("µs", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
            ],
            Quantity::Angle => &[("deg", std::f64::consts::PI / 180.0), ("rad", 1.0)],
            Quantity::Field => &[("T", 1.0), ("mT", 1e-3), ("uT", 1e-6), ("µT", 1e-6)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Quantity::Frequency => "frequency",
            Quantity::Time => "time",
            Quantity::Angle => "angle",
            Quantity::Field => "field",
        }
    }
}

/// Parses `"10MHz"`, `"10 MHz"`, `"-2.5e-3 rad"` and similar. Bare numbers
/// are rejected.
pub fn parse_quantity(field: &str, text: &str, kind: Quantity) -> Result<f64, CliError> {
    let s = text.trim();
    let mut units = kind.table().to_vec();
    units.sort_by_key(|(u, _)| std::cmp::Reverse(u.len()));
    let Some((num, scale)) = units
        .iter()
        .find_map(|&(u, k)| s.strip_suffix(u).map(|rest| (rest.trim(), k)))
    else {
        let names: Vec<_> = kind.table().iter().map(|(u, _)| *u).collect();
        let what = if s.parse::<f64>().is_ok() { "missing unit" } else { "unknown unit" };
        return Err(CliError::Config(format!(
            "{field}: {what} in {text:?}; expected a {} in one of {}",
            kind.name(),
            names.join(", ")
        )));
    };
    let value: f64 = num
        .parse()
        .map_err(|_| CliError::Config(format!("{field}: cannot parse number in {text:?}")))?;
    if !value.is_finite() {
        return Err(CliError::Config(format!("{field}: non-finite value {text:?}")));
    }
    Ok(value * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let cases = [
            ("10MHz", Quantity::Frequency, TAU * 1e7),
            ("3 rad/s", Quantity::Frequency, 3.0),
            ("1.5e3krad/s", Quantity::Frequency, 1.5e6),
            ("2.87 GHz", Quantity::Frequency, TAU * 2.87e9),
            ("50ns", Quantity::Time, 50e-9),
            ("2 µs", Quantity::Time, 2e-6),
            ("90deg", Quantity::Angle, std::f64::consts::FRAC_PI_2),
            ("100 mT", Quantity::Field, 0.1),
            ("2e-3T", Quantity::Field, 2e-3),
        ];
        for (text, kind, want) in cases {
            let got = parse_quantity("x", text, kind).unwrap();
            assert!((got - want).abs() <= 1e-15 * want.abs(), "{text}: {got} vs {want}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        for (text, kind) in [("10", Quantity::Frequency), ("10 parsecs", Quantity::Time), ("x ns", Quantity::Time)] {
            let msg = parse_quantity("rabi", text, kind).unwrap_err().to_string();
            assert!(msg.contains("rabi"), "{msg}");
        }
        assert!(parse_quantity("tau", "5 MHz", Quantity::Time).is_err());
    }
}
