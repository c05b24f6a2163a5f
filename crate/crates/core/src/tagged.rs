//! Internally tagged enums whose errors keep the full field path.
//!
//! `{"kind": "x", ...fields}` is rewritten as `{"x": {...fields}}` and read
//! into an externally tagged mirror type, which serde can deserialize
//! without buffering.

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer};
use serde_json::{Map, Value};

/// Prefix that [`crate::experiment`] folds back into the reported key.
pub(crate) const FIELD_MARKER: &str = "at `";

pub(crate) fn deserialize_tagged<'de, D, X>(
    deserializer: D,
    tag: &'static str,
) -> Result<X, D::Error>
where
    D: Deserializer<'de>,
    X: DeserializeOwned,
{
    let mut fields = Map::<String, Value>::deserialize(deserializer)?;
    let variant = match fields.remove(tag) {
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(D::Error::custom(format!(
                "`{tag}` must be a string, got {other}"
            )))
        }
        None => return Err(D::Error::missing_field(tag)),
    };
    let mut outer = Map::new();
    outer.insert(variant, Value::Object(fields));
    serde_path_to_error::deserialize(Value::Object(outer)).map_err(|e| {
        let path = e.path().to_string();
        match path.split_once('.') {
            Some((_, field)) if !field.is_empty() => {
                D::Error::custom(format!("{FIELD_MARKER}{field}`: {}", e.inner()))
            }
            _ => D::Error::custom(e.into_inner()),
        }
    })
}
