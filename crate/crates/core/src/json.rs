//! JSON output with a fixed float encoding: every finite float is written
//! with 17 significant digits in exponent form, so reruns are byte
//! identical. Non-finite values are written as strings by the
//! [`extended`] field adapter.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Default)]
struct FixedFloat(CompactFormatter);

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
}

/// One compact JSON document, no trailing newline.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FixedFloat::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

/// Hex SHA-256 of the fixed-encoding JSON of `value`.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let digest = Sha256::digest(to_line(value)?.as_bytes());
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// JSON lines, one document per element, each terminated by a newline.
pub fn to_lines<T: Serialize>(values: &[T]) -> Result<String> {
    let mut out = String::new();
    for v in values {
        out.push_str(&to_line(v)?);
        out.push('\n');
    }
    Ok(out)
}

/// Field adapter for floats that may be infinite or NaN: those are written
/// as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod extended {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    struct Row {
        a: f64,
        #[serde(with = "extended")]
        b: f64,
    }

    #[test]
    fn fixed_encoding_and_round_trip() {
        let r = Row { a: 0.1, b: f64::INFINITY };
        let s = to_line(&r).unwrap();
        assert_eq!(s, r#"{"a":1.0000000000000001e-1,"b":"inf"}"#);
        let back: Row = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn seventeen_digits_round_trip_exactly() {
        for v in [1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 0.0] {
            let s = to_line(&v).unwrap();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
