//! Fixed-precision number printing shared by the CSV and JSON writers.

/// Rounds `x` to `digits` significant digits. Non-finite values pass
/// through unchanged.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal form of `x` rounded to `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r == 0.0 {
        // also folds -0 into 0
        return "0".into();
    }
    format!("{r}")
}
