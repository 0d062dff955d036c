use std::fmt;

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// A real serialized as a JSON number with exactly six decimals.
///
/// Reports and service responses both go through this type, so identical
/// scores print identically everywhere.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fixed6(pub f64);

impl fmt::Display for Fixed6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{:.6}", self.0);
        // -0.000000 and 0.000000 are the same number.
        if s.strip_prefix('-')
            .is_some_and(|rest| rest.bytes().all(|b| b == b'0' || b == b'.'))
        {
            f.write_str(&s[1..])
        } else {
            f.write_str(&s)
        }
    }
}

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(self.to_string()).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}
