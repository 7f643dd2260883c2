use std::collections::BTreeSet;

use serde_json::Value;

use marsc::exact::{random_toptw, reduce_toptw};
use marsc::scenarios::{synth_instance, tiny_instance, ScenarioParams};
use marsc::values::ValueKind;

fn schema(name: &str) -> Value {
    let path = format!("{}/../../schemas/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

/// Every key of `doc` is declared by `schema` and every required key is present.
fn conforms_shallow(doc: &Value, schema: &Value) {
    let declared = keys(&schema["properties"]);
    let present = keys(doc);
    assert!(present.is_subset(&declared), "undeclared keys: {:?}", present.difference(&declared));
    for r in schema["required"].as_array().unwrap() {
        assert!(present.contains(r.as_str().unwrap()), "missing {r}");
    }
}

#[test]
fn instances_match_the_schema() {
    let s = schema("instance.schema.json");
    let docs = [
        serde_json::to_value(synth_instance(&ScenarioParams::default()).unwrap()).unwrap(),
        serde_json::to_value(tiny_instance(4, ValueKind::Ndcs)).unwrap(),
        serde_json::to_value(reduce_toptw(&random_toptw(2, 3, 2)).unwrap()).unwrap(),
    ];
    let modes: BTreeSet<&str> = s["properties"]["travel"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["properties"]["mode"]["const"].as_str().unwrap())
        .collect();
    for doc in &docs {
        conforms_shallow(doc, &s);
        for key in ["locations", "agents", "nodes"] {
            for item in doc[key].as_array().unwrap() {
                conforms_shallow(item, &s["properties"][key]["items"]);
            }
        }
        conforms_shallow(&doc["precedence"], &s["properties"]["precedence"]);
        conforms_shallow(&doc["values"], &s["properties"]["values"]);
        assert!(modes.contains(doc["travel"]["mode"].as_str().unwrap()));
    }
    let kinds: Vec<Value> = ValueKind::ALL.iter().map(|k| serde_json::to_value(k).unwrap()).collect();
    assert_eq!(&kinds, s["properties"]["values"]["properties"]["kind"]["enum"].as_array().unwrap());
}

#[test]
fn toptw_matches_the_schema() {
    let s = schema("toptw.schema.json");
    let doc = serde_json::to_value(random_toptw(9, 4, 2)).unwrap();
    conforms_shallow(&doc, &s);
    for node in doc["nodes"].as_array().unwrap() {
        conforms_shallow(node, &s["properties"]["nodes"]["items"]);
    }
}
