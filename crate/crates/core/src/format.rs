//! Deterministic text rendering of floating-point values.
//!
//! Every float written to a CSV or JSON output goes through [`fmt_sig`]:
//! exactly 12 significant digits, ties rounded half to even on the exact
//! binary value, trailing zeros trimmed. Plain decimal notation is used for
//! exponents in `-6..15`, scientific (`1.5e-7`) outside that range.

/// Significant digits used for all serialized floats.
pub const SIG_DIGITS: usize = 12;

pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // core::fmt rounds the exact binary value half-to-even.
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    let mut out = String::with_capacity(24);
    if negative {
        out.push('-');
    }
    if (-6..15).contains(&exp) {
        if exp < 0 {
            out.push_str("0.");
            for _ in 0..(-exp - 1) {
                out.push('0');
            }
            out.push_str(digits);
        } else {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(digits);
                for _ in digits.len()..int_len {
                    out.push('0');
                }
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push('e');
        out.push_str(&exp.to_string());
    }
    out
}

/// Rounds `x` to [`SIG_DIGITS`] significant digits, for JSON emission.
///
/// Non-finite values map to `None` (serialized as `null`).
pub fn round_sig(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    Some(fmt_sig(x).parse().expect("fmt_sig output parses"))
}
