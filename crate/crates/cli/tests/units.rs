use proptest::prelude::*;

use etrap_cli::units::{format_quantity, parse_quantity, Kind, UnitError};

const KINDS: [Kind; 8] =
    [Kind::Frequency, Kind::Time, Kind::Temperature, Kind::Length, Kind::Voltage, Kind::Energy, Kind::Power, Kind::Rate];

proptest! {
    #[test]
    fn format_then_parse_is_exact(x in -1e15..1e15f64, k in 0usize..KINDS.len(), u in 0usize..5) {
        let kind = KINDS[k];
        let units = kind.units();
        let unit = units[u % units.len()].0;
        let text = format_quantity(x, kind, unit);
        prop_assert_eq!(parse_quantity(&text, kind).unwrap(), x, "{}", text);
    }

    #[test]
    fn junk_never_panics(s in "\\PC{0,24}", k in 0usize..KINDS.len()) {
        let _ = parse_quantity(&s, KINDS[k]);
    }
}

#[test]
fn rejects_wrong_or_missing_units() {
    assert!(matches!(parse_quantity("3 MHz", Kind::Time), Err(UnitError::WrongUnit { .. })));
    assert!(parse_quantity("3", Kind::Frequency).is_err());
    assert!(matches!(parse_quantity("abc Hz", Kind::Frequency), Err(UnitError::NotANumber(_))));
}
