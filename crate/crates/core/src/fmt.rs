//! Number formatting shared by the CSV writers.

/// Fixed-point decimal with 10 significant digits.
pub fn sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            format!("{:.9}", 0.0)
        } else {
            format!("{x}")
        };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.99.. -> 10.0); one more
    // pass at the adjusted magnitude keeps the digit count at ten.
    let rounded: f64 = s.parse().unwrap_or(x);
    let m2 = rounded.abs().log10().floor() as i32;
    if m2 != magnitude {
        let decimals = (9 - m2).max(0) as usize;
        return format!("{x:.decimals$}");
    }
    s
}
