//! Fixed-point rendering with 17 significant digits, enough to round-trip any `f64`.

/// Positional decimal with exactly 17 significant digits (more integer digits
/// for magnitudes of 1e17 and above). Non-finite input is rendered by `Display`.
pub fn sig17(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).expect("`{:e}` always has an exponent");
    let prec = (16 - exp).max(0) as usize;
    format!("{v:.prec$}")
}

/// Serde adapters writing `f64` as a JSON number with 17 significant digits.
pub(crate) mod json17 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::Number;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if !v.is_finite() {
            return Err(serde::ser::Error::custom("non-finite number in model"));
        }
        let n: Number = super::sig17(*v).parse().map_err(serde::ser::Error::custom)?;
        n.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}
