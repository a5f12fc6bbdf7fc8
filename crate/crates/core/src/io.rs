//! Witness and certificate files.
//!
//! Witnesses are stored as seeds, never as data: space, exponent, recipe
//! parameters and horizon. Loading regenerates the witness and checks that the
//! regenerated descriptor hashes to the stored value.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::constructions::rebuild;
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::series::Witness;
use crate::spaces::SpaceModel;
use crate::transport::{apply_map, tensor_embed, MapTag};

pub const SCHEMA_VERSION: u64 = 1;

/// Recursively sorts object keys, so output never depends on map ordering.
pub fn canonical(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let mut out = Map::new();
            for k in keys {
                out.insert(k.clone(), canonical(&m[k]));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

/// Pretty, key-sorted JSON with a trailing newline.
pub fn to_canonical_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonical(v)).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The hashed part of a witness entry.
pub fn witness_descriptor(w: &Witness) -> Value {
    canonical(&json!({
        "space": w.space.tag(),
        "p": rational::render(&w.p),
        "kind": w.kind,
        "params": w.params,
        "horizon": w.horizon,
        "norm": w.norm,
    }))
}

pub fn witness_hash(w: &Witness) -> String {
    sha256_hex(witness_descriptor(w).to_string().as_bytes())
}

/// Descriptor plus its hash.
pub fn witness_entry(w: &Witness) -> Value {
    let mut d = witness_descriptor(w);
    d["hash"] = json!(witness_hash(w));
    d
}

/// A versioned file holding one or more witnesses; `extra` keys are merged in.
pub fn witness_file(ws: &[Witness], extra: Value) -> Value {
    let mut v = json!({
        "version": SCHEMA_VERSION,
        "witnesses": ws.iter().map(witness_entry).collect::<Vec<_>>(),
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    canonical(&v)
}

fn get<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Schema(format!("missing field {key}")))
}

fn get_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    get(v, key)?.as_str().ok_or_else(|| Error::Schema(format!("field {key} must be a string")))
}

fn get_u64(v: &Value, key: &str) -> Result<u64> {
    get(v, key)?.as_u64().ok_or_else(|| Error::Schema(format!("field {key} must be an integer")))
}

fn schema<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema(_) => e,
        other => Error::Schema(other.to_string()),
    })
}

/// Regenerates a witness from its seed, following transport chains and
/// tensor embeddings.
pub fn regenerate(space: &SpaceModel, p: &Rational, params: &Value, horizon: u64) -> Result<Witness> {
    if let Some(t) = params.get("transport") {
        let native: SpaceModel = get_str(t, "native")?.parse()?;
        let chain = get(t, "chain")?
            .as_array()
            .ok_or_else(|| Error::Schema("transport.chain must be an array".into()))?
            .iter()
            .map(|s| s.as_str().ok_or_else(|| Error::Schema("map tags are strings".into()))?.parse::<MapTag>())
            .collect::<Result<Vec<_>>>()?;
        let mut base = params.clone();
        base.as_object_mut().expect("params with a transport key are objects").remove("transport");
        let mut w = regenerate(&native, p, &base, horizon)?;
        for tag in chain {
            w = apply_map(tag, &w)?;
        }
        if w.space != *space {
            return Err(Error::Schema(format!("chain ends on {}, file says {space}", w.space)));
        }
        return Ok(w);
    }
    if params.get("recipe").and_then(Value::as_str) == Some("tensor") {
        let base = get(params, "base")?;
        let f = regenerate(
            &get_str(base, "space")?.parse()?,
            &rational::parse(get_str(base, "p")?)?,
            get(base, "params")?,
            get_u64(base, "horizon")?,
        )?;
        let coeffs = get(params, "coeffs")?
            .as_array()
            .ok_or_else(|| Error::Schema("coeffs must be an array".into()))?
            .iter()
            .map(|c| rational::parse(c.as_str().ok_or_else(|| Error::Schema("coefficients are strings".into()))?))
            .collect::<Result<Vec<_>>>()?;
        return tensor_embed(&f, &coeffs);
    }
    rebuild(space, p, params, horizon)
}

/// Loads one witness entry: regenerates it and checks its hash.
pub fn load_entry(v: &Value) -> Result<Witness> {
    let stored = get_str(v, "hash")?;
    let mut d = canonical(v);
    d.as_object_mut().ok_or_else(|| Error::Schema("witness entry must be an object".into()))?.remove("hash");
    if sha256_hex(d.to_string().as_bytes()) != stored {
        return Err(Error::Schema("witness hash does not match its content".into()));
    }
    let space: SpaceModel = schema(get_str(v, "space")?.parse())?;
    let p = schema(rational::parse(get_str(v, "p")?))?;
    let w = regenerate(&space, &p, get(v, "params")?, get_u64(v, "horizon")?)?;
    if witness_descriptor(&w) != d {
        return Err(Error::Schema("regenerated witness differs from the stored descriptor".into()));
    }
    Ok(w)
}

pub fn load_witness_file(v: &Value) -> Result<Vec<Witness>> {
    let version = get_u64(v, "version")?;
    if version != SCHEMA_VERSION {
        return Err(Error::Schema(format!("unsupported schema version {version}")));
    }
    get(v, "witnesses")?
        .as_array()
        .ok_or_else(|| Error::Schema("witnesses must be an array".into()))?
        .iter()
        .map(load_entry)
        .collect()
}

pub fn read_json(path: &std::path::Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_basic_family, build_ha, FamilyMode};
    use crate::exactnum::rational::rat;
    use crate::transport::MapTag;

    #[test]
    fn roundtrip_and_tamper() {
        let ws = build_basic_family(SpaceModel::UnitInterval, rat(1, 1), 2, FamilyMode::Sp, None, 6).unwrap();
        let file = witness_file(&ws, json!({}));
        let back = load_witness_file(&file).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(witness_hash(&back[1]), witness_hash(&ws[1]));
        assert_eq!(to_canonical_string(&file), to_canonical_string(&witness_file(&back, json!({}))));

        let mut bad = file.clone();
        bad["witnesses"][0]["horizon"] = json!(7);
        assert!(matches!(load_witness_file(&bad), Err(Error::Schema(_))));
        let mut bad = file;
        bad["witnesses"][0]["norm"]["hi"] = json!("2");
        assert!(matches!(load_witness_file(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn chains_and_tensors_regenerate() {
        let w = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 4).unwrap();
        let c = apply_map(MapTag::Ginv, &apply_map(MapTag::F, &w).unwrap()).unwrap();
        let back = load_entry(&witness_entry(&c)).unwrap();
        assert_eq!(back.space, c.space);
        assert_eq!(back.chain, c.chain);
        let t = tensor_embed(&w, &[rat(3, 5), rat(4, 5)]).unwrap();
        let back = load_entry(&witness_entry(&t)).unwrap();
        assert_eq!(back.norm, t.norm);
        assert_eq!(back.tensor, t.tensor);
    }
}
