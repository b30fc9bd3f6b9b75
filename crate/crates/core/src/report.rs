//! Fixed-precision number formatting shared by every emitted table.

/// Significant digits in every emitted number.
pub const SIG_DIGITS: usize = 12;

/// Scientific notation with 12 significant digits; `nan`/`inf` spelled out.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Collapse -0.0 so signed zeros never differ in output.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{:.*e}", SIG_DIGITS - 1, x)
}

/// Rounds to 12 significant digits (for JSON emission).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_sig(x).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_sig(1.0), "1.00000000000e0");
        assert_eq!(fmt_sig(-986.666666666666e6), "-9.86666666667e8");
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(fmt_sig(f64::NAN), "nan");
    }
}
