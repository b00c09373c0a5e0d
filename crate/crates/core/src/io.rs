//! Number formatting and the serde glue shared by the file formats.
//!
//! Every float written by this crate goes through [`format_f64`]: decimal,
//! 17 significant digits, so that files round-trip bit for bit and golden
//! outputs can be compared as text.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// Formats a finite double with exactly 17 significant digits.
///
/// Magnitudes in `[1e-5, 1e16)` are written in fixed notation
/// (`5.0000000000000000`), everything else in scientific notation
/// (`1.2345678901234567e-7`). Non-finite values are written as JSON-invalid
/// tokens and should never reach a file.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        sci
    }
}

fn raw(x: f64) -> Box<RawValue> {
    RawValue::from_string(format_f64(x)).expect("formatted float is valid JSON")
}

pub(crate) fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(serde::ser::Error::custom("non-finite float"));
    }
    raw(*x).serialize(s)
}

pub(crate) fn ser_f64_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if !x.is_finite() {
            return Err(serde::ser::Error::custom("non-finite float"));
        }
        seq.serialize_element(&raw(*x))?;
    }
    seq.end()
}

pub(crate) fn ser_f64_map<S: Serializer>(m: &std::collections::BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, x) in m {
        if !x.is_finite() {
            return Err(serde::ser::Error::custom("non-finite float"));
        }
        map.serialize_entry(k, &raw(*x))?;
    }
    map.end()
}

pub(crate) fn ser_complex<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(serde::ser::Error::custom("non-finite value"));
    }
    [raw(z.re), raw(z.im)].serialize(s)
}

pub(crate) fn ser_complex_vec<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(serde::ser::Error::custom("non-finite value"));
        }
        seq.serialize_element(&[raw(z.re), raw(z.im)])?;
    }
    seq.end()
}

pub(crate) fn de_complex_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
    let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
    pairs
        .into_iter()
        .map(|[re, im]| {
            if re.is_finite() && im.is_finite() {
                Ok(Complex64::new(re, im))
            } else {
                Err(D::Error::custom("non-finite value"))
            }
        })
        .collect()
}
