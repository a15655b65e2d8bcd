//! Canonical number formatting for emitted datasets.
//!
//! Every floating-point value written to CSV or JSON artifacts goes through
//! `sci9`, so identical f64 values always produce identical bytes and
//! datasets from different commands can be compared textually.

/// Scientific notation with nine significant digits. Negative zero is
/// normalized so equal values never differ in sign of zero.
pub fn sci9(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{:.8e}", x)
}

#[cfg(test)]
mod tests {
    use super::sci9;

    #[test]
    fn formats_nine_significant_digits() {
        assert_eq!(sci9(1.0), "1.00000000e0");
        assert_eq!(sci9(0.7), "7.00000000e-1");
        assert_eq!(sci9(-2.5e-7), "-2.50000000e-7");
        assert_eq!(sci9(56.0e-6), "5.60000000e-5");
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(sci9(-0.0), "0.00000000e0");
        assert_eq!(sci9(0.0), "0.00000000e0");
    }

    #[test]
    fn round_trips_through_parse() {
        for &x in &[1.234567891e-4, -9.87654321e8, 3.0e-23] {
            let back: f64 = sci9(x).parse().unwrap();
            assert!((back - x).abs() <= x.abs() * 1e-8);
        }
    }
}
