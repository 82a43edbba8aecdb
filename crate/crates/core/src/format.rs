//! Fixed text formatting for emitted numbers, so identical runs produce
//! byte-identical files.

/// Scientific notation with 17 significant digits; `inf`, `-inf` and `nan`
/// for non-finite values.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}
