//! JSON-friendly encoding for maps keyed by `ParamId` (serialized as a list
//! of `[id, value]` pairs, since JSON object keys must be strings).

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::ParamId;

pub fn serialize<S, V>(map: &BTreeMap<ParamId, V>, s: S) -> Result<S::Ok, S::Error>
where
    S: Serializer,
    V: Serialize,
{
    let pairs: Vec<(&ParamId, &V)> = map.iter().collect();
    pairs.serialize(s)
}

pub fn deserialize<'de, D, V>(d: D) -> Result<BTreeMap<ParamId, V>, D::Error>
where
    D: Deserializer<'de>,
    V: DeserializeOwned,
{
    let pairs: Vec<(ParamId, V)> = Vec::deserialize(d)?;
    Ok(pairs.into_iter().collect())
}

pub mod option {
    use super::*;

    pub fn serialize<S, V>(map: &Option<BTreeMap<ParamId, V>>, s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        V: Serialize,
    {
        let pairs: Option<Vec<(&ParamId, &V)>> = map.as_ref().map(|m| m.iter().collect());
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D, V>(d: D) -> Result<Option<BTreeMap<ParamId, V>>, D::Error>
    where
        D: Deserializer<'de>,
        V: DeserializeOwned,
    {
        let pairs: Option<Vec<(ParamId, V)>> = Option::deserialize(d)?;
        Ok(pairs.map(|p| p.into_iter().collect()))
    }
}
