/// Formats `v` with `sig` significant digits, in plain decimal notation when
/// the exponent is moderate and scientific otherwise.
pub(crate) fn sig(v: f64, sig: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    // log10 can land one off near powers of ten; let the formatter decide.
    let sci = format!("{:.*e}", sig.saturating_sub(1), v);
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..15).contains(&exp) {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, v)
    } else {
        sci
    }
}
