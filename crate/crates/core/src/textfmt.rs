//! Text encoding of reals for the CSV interchange formats.

use std::fmt::Write as _;

/// Formats `v` like C's `printf("%.17g", v)`.
///
/// Seventeen significant digits round-trip every `f64` exactly.
pub fn fmt_g17(v: f64) -> String {
    let mut s = String::new();
    push_g17(&mut s, v);
    s
}

pub fn push_g17(out: &mut String, v: f64) {
    const PRECISION: i32 = 17;
    if v.is_nan() {
        out.push_str(if v.is_sign_negative() { "-nan" } else { "nan" });
        return;
    }
    if v.is_infinite() {
        out.push_str(if v < 0.0 { "-inf" } else { "inf" });
        return;
    }
    if v == 0.0 {
        out.push_str(if v.is_sign_negative() { "-0" } else { "0" });
        return;
    }
    // scientific form fixes the decimal exponent after rounding
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..PRECISION).contains(&exp) {
        out.push_str(strip_zeros(mantissa));
        let sign = if exp < 0 { '-' } else { '+' };
        let _ = write!(out, "e{sign}{:02}", exp.abs());
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        let fixed = format!("{:.*}", decimals, v);
        out.push_str(strip_zeros(&fixed));
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_fixtures() {
        // expected strings produced by C printf("%.17g")
        let cases: &[(f64, &str)] = &[
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (100.0, "100"),
            (1e17, "1e+17"),
            (1.5e-5, "1.5e-05"),
            (0.0001, "0.0001"),
            (123456789.125, "123456789.125"),
            (1e-300, "1e-300"),
            (f64::MAX, "1.7976931348623157e+308"),
            (0.0, "0"),
        ];
        for &(v, want) in cases {
            assert_eq!(fmt_g17(v), want, "formatting {v:e}");
        }
    }

    proptest! {
        #[test]
        fn round_trips_bitwise(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = fmt_g17(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
