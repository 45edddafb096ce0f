/// Shortest decimal that round-trips to `x` (at most 17 significant digits).
/// Exponent notation is used for very large or small magnitudes.
pub fn format_real(x: f64) -> String {
    format!("{x:?}")
}
