use serde_json::Value;
use splitlift_demo::Model;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn every_single_cell_event_lifts_with_fixed_sections() {
    let m = Model::generate(3, 3, 1, 1, 4, true).unwrap();
    let info = parse(&m.summary());
    assert_eq!(info["x"].as_array().unwrap().len(), 3);
    for p in 0..9 {
        let out = parse(&m.lift(&[p]).unwrap());
        for side in ["general", "ac"] {
            assert_eq!(out[side]["ae_equal"], true, "{side} cell {p}");
            for sec in out[side]["sections"].as_array().unwrap() {
                assert_eq!(sec["fixed"], true, "{side} cell {p}");
            }
        }
    }
}

#[test]
fn space_b_general_and_repaired() {
    let text = r#"{"x": {"labels": ["a","b"]}, "y": {"labels": ["u","v"]},
                  "R": [["1","0"],["0","0"]], "rcp": [["1","0"],["0","1"]]}"#;
    let m = Model::from_json(text).unwrap();
    let info = parse(&m.summary());
    assert_eq!(info["it"], false);
    assert_eq!(info["repaired_y"], serde_json::json!([1]));
    let out = parse(&m.lift(&[0, 2]).unwrap());
    assert_eq!(out["general"]["ae_equal"], true);
    let cases = parse(&m.prop27().unwrap());
    let first = &cases["cases"][0];
    assert_eq!(first["agree"], true);
    assert_eq!(first["search"]["kind"], "none");
}

#[test]
fn prop27_covers_every_lifting_of_q() {
    let m = Model::generate(2, 3, 0, 1, 9, true).unwrap();
    let cases = parse(&m.prop27().unwrap());
    let cases = cases["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 2);
    assert!(cases.iter().all(|c| c["agree"] == true));
}

#[test]
fn bad_input_is_reported() {
    let err = Model::from_json("{").err().unwrap();
    assert!(err.contains("line 1"), "{err}");
    assert!(Model::generate(5, 4, 0, 0, 0, false).is_err());
    let m = Model::generate(2, 2, 0, 0, 0, false).unwrap();
    assert!(m.lift(&[7]).is_err());
}
