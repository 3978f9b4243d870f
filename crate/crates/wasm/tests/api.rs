use dgm_wasm::{embed_json, neighborhood_json, relocc_json};
use serde_json::Value;

const FOUR_DRUGS: &str = include_str!("../../../data/four_drugs.facts");

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

fn sym(v: &Value, id: &Value) -> String {
    v["nodes"][id.as_u64().unwrap() as usize].as_str().unwrap().to_string()
}

#[test]
fn neighborhood_of_pravastatin() {
    let v = parse(neighborhood_json(FOUR_DRUGS, "Pravastatin", 2, 10, 3, 0).unwrap());
    assert_eq!(v["nodes"].as_array().unwrap().len(), 6);
    assert_eq!(v["edges"].as_array().unwrap().len(), 5);
    let mut ball: Vec<String> = v["ball"].as_array().unwrap().iter().map(|i| sym(&v, i)).collect();
    ball.sort();
    assert_eq!(ball, ["Acetaminophen", "BileSaltExportPump", "CytochromeP4502C9", "Simvastatin"]);
    let center = v["center"].as_u64().unwrap() as usize;
    assert_eq!(v["distance"][center], 0);
    // MultidrugResistProtein1 is three hops out
    let far = v["nodes"].as_array().unwrap().iter().position(|n| n == "MultidrugResistProtein1").unwrap();
    assert_eq!(v["distance"][far], 3);
    assert_eq!(v["samples"].as_array().unwrap().len(), 3);
}

#[test]
fn shared_enzyme_counts_once() {
    let clause = "Interacts(D0,D1) :- EnzymeInhib(D0,V0), _EnzymeInhib(V0,D1).";
    let v = parse(embed_json(FOUR_DRUGS, clause, "Pravastatin, Simvastatin", 1, 10, 2, 0).unwrap());
    assert_eq!(v["positive"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["counts"][0], 1);
    }
}

#[test]
fn relocc_scores_every_example() {
    let facts = include_str!("../../../data/ddi_synthetic.facts");
    let v = parse(relocc_json(facts, 1.0, 2, 3, 0).unwrap());
    let ex = v["examples"].as_array().unwrap();
    assert_eq!(ex.len(), 400);
    let mean = |positive: bool| {
        let d: Vec<f64> =
            ex.iter().filter(|e| e["positive"] == positive).map(|e| e["density"].as_f64().unwrap()).collect();
        d.iter().sum::<f64>() / d.len() as f64
    };
    // positives lie closer to the training class
    assert!(mean(true) < mean(false));
    assert!(v["clauses"].as_str().unwrap().contains("% relocc"));
}

#[test]
fn errors_are_messages() {
    assert!(neighborhood_json(FOUR_DRUGS, "Nobody", 1, 1, 1, 0).unwrap_err().contains("Nobody"));
    assert!(embed_json("Bad(", "", "a,b", 1, 1, 1, 0).unwrap_err().starts_with("facts:"));
    assert!(neighborhood_json(FOUR_DRUGS, "Pravastatin", 0, 1, 1, 0).is_err());
}
