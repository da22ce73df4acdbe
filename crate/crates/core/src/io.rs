//! Versioned JSON documents for instances, states and solutions.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Instance, NetworkState, ReconfigSolution};

pub const SCHEMA_VERSION: u64 = 1;

fn save<T: Serialize>(value: &T) -> Result<String> {
    let mut doc = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut doc {
        map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn escape_pointer(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}

fn load<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        pointer: String::new(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = &mut doc else {
        return Err(Error::Parse {
            pointer: String::new(),
            message: "document must be a JSON object".into(),
        });
    };
    if let Some(v) = map.remove("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION) {
            return Err(Error::Parse {
                pointer: "/schema_version".into(),
                message: format!("unsupported schema version {v}"),
            });
        }
    }
    serde_path_to_error::deserialize(doc).map_err(|e| {
        use serde_path_to_error::Segment;
        let mut pointer: String = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                Segment::Seq { index } => Some(format!("/{index}")),
                Segment::Map { key } => Some(format!("/{}", escape_pointer(key))),
                Segment::Enum { variant } => Some(format!("/{}", escape_pointer(variant))),
                Segment::Unknown => None,
            })
            .collect();
        let message = e.inner().to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            pointer.push('/');
            pointer.push_str(&escape_pointer(field));
        }
        Error::Parse { pointer, message }
    })
}

pub fn save_instance(instance: &Instance) -> Result<String> {
    save(instance)
}

/// Parses and validates an instance document.
pub fn load_instance(text: &str) -> Result<Instance> {
    let inst: Instance = load(text)?;
    inst.validate()?;
    Ok(inst)
}

pub fn save_state(state: &NetworkState) -> Result<String> {
    save(state)
}

pub fn load_state(text: &str) -> Result<NetworkState> {
    load(text)
}

pub fn save_solution(solution: &ReconfigSolution) -> Result<String> {
    save(solution)
}

pub fn load_solution(text: &str) -> Result<ReconfigSolution> {
    load(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn instance_round_trip() {
        let inst = fixtures::micro_instance();
        let text = save_instance(&inst).unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        assert_eq!(load_instance(&text).unwrap(), inst);
    }

    #[test]
    fn missing_field_pointer() {
        let inst = fixtures::micro_instance();
        let mut v = serde_json::to_value(&inst).unwrap();
        v.as_object_mut().unwrap().remove("migration_bw");
        match load_instance(&v.to_string()) {
            Err(Error::Parse { pointer, .. }) => assert_eq!(pointer, "/migration_bw"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_type_error_pointer() {
        let inst = fixtures::micro_instance();
        let mut v = serde_json::to_value(&inst).unwrap();
        v["flows"][0]["rate"] = Value::from("fast");
        match load_instance(&v.to_string()) {
            Err(Error::Parse { pointer, .. }) => assert_eq!(pointer, "/flows/0/rate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_sfc_reference() {
        let inst = fixtures::micro_instance();
        let mut v = serde_json::to_value(&inst).unwrap();
        v["flows"][0]["sfc"] = Value::from(9);
        match load_instance(&v.to_string()) {
            Err(Error::Reference { pointer, message }) => {
                assert_eq!(pointer, "/flows/0/sfc");
                assert!(message.contains("unknown SFC"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let text = r#"{"schema_version": 7}"#;
        assert!(matches!(load_state(text), Err(Error::Parse { pointer, .. }) if pointer == "/schema_version"));
    }

    #[test]
    fn state_round_trip() {
        let st = fixtures::micro_state();
        assert_eq!(load_state(&save_state(&st).unwrap()).unwrap(), st);
    }
}
