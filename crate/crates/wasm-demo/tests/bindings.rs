use locdep_wasm::{exact_distance, mc_distance, shapes};

const RADEMACHER: &str = r#"{"family": "iid", "source": {"dist": "rademacher"}}"#;
const ADJACENT: &str = r#"{"family": "m_dependent", "m": 1, "source": {"dist": "rademacher"}}"#;

#[test]
fn shapes_report_structure_and_bounds() {
    let v = shapes(ADJACENT, 12).unwrap();
    assert_eq!(v["kappa"], 4);
    assert_eq!(v["tau"], 11);
    assert!((v["sigma2"].as_f64().unwrap() - 46.0).abs() < 1e-9);
    let names: Vec<&str> = v["bounds"].as_array().unwrap().iter().map(|b| b["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 3);
    assert!(v["bounds"].as_array().unwrap().iter().all(|b| b["shape"].as_f64().unwrap() > 0.0));
}

#[test]
fn exact_distance_matches_binomial() {
    let v = exact_distance(RADEMACHER, 8, "w1").unwrap();
    assert!((v["ks"].as_f64().unwrap() - 35.0 / 256.0).abs() < 1e-12);
}

#[test]
fn mc_distance_sits_near_exact() {
    let exact = exact_distance(RADEMACHER, 10, "w1").unwrap()["ks"].as_f64().unwrap();
    let v = mc_distance(RADEMACHER, 10, "w1", 20_000, 5).unwrap();
    let (ks, band) = (v["ks"].as_f64().unwrap(), v["band"].as_f64().unwrap());
    assert!((ks - exact).abs() <= band, "{ks} vs {exact} ± {band}");
    assert_eq!(mc_distance(RADEMACHER, 10, "w1", 20_000, 5).unwrap(), v);
}

#[test]
fn bad_input_is_an_error_string() {
    assert!(shapes(r#"{"family": "nope"}"#, 5).unwrap_err().contains("family"));
    assert!(exact_distance(RADEMACHER, 5, "w3").unwrap_err().contains("w3"));
}
