//! Exit codes and headline numbers of each subcommand.

mod common;

use common::{latentid, latentid_in, num};

#[test]
fn backdoor_holds_with_observed_confounder() {
    let r = latentid(&["check", "observed_confounder.model.json", "--pair", "X,Y", "--set", "Z", "--criterion", "backdoor"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("holds"));
}

#[test]
fn backdoor_fails_with_latent_confounder() {
    let r = latentid(&[
        "check",
        "latent_confounder_mediator.model.json",
        "--pair",
        "X,Y",
        "--criterion",
        "backdoor",
        "--json",
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["exit_status"], 2);
    assert_eq!(v["outputs"]["holds"], false);
    assert!(v["outputs"]["failing_path"].is_array());
}

#[test]
fn frontdoor_and_dsep() {
    let r = latentid(&["check", "latent_confounder_mediator.model.json", "--pair", "X,Y", "--set", "Z", "--criterion", "frontdoor"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = latentid(&["check", "proxied_outcome.model.json", "--pair", "S,T", "--set", "Y", "--criterion", "dsep"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = latentid(&["check", "proxied_outcome.model.json", "--pair", "S,T", "--criterion", "dsep"]);
    assert_eq!(r.code, 2);
}

#[test]
fn input_errors_exit_four() {
    let r = latentid(&["check", "malformed.model.json", "--pair", "X,Y", "--criterion", "backdoor", "--json"]);
    assert_eq!(r.code, 4);
    let v = r.json();
    assert_eq!(v["diagnostics"][0]["code"], "graph");
    assert!(v["outputs"].is_null());
    assert!(r.stderr.contains("error[graph]"));

    for args in [
        vec!["check", "missing.json", "--pair", "X,Y", "--criterion", "dsep"],
        vec!["check", "proxied_outcome.model.json", "--pair", "X", "--criterion", "dsep"],
        vec!["check", "proxied_outcome.model.json", "--pair", "X,Q", "--criterion", "dsep"],
        vec!["check", "proxied_outcome.model.json", "--criterion", "dsep"],
        vec!["bogus"],
        vec!["bounds", "worked.csv", "--exposure", "X", "--proxies", "T,S", "--convention", "joint-compat"],
        vec!["bounds", "worked.csv", "--exposure", "X", "--proxies", "T,S", "--levels", "S=s1,s9"],
        vec!["bounds", "stratified.csv", "--exposure", "X", "--proxies", "T,S", "--stratify", "Z", "--method", "lp"],
        vec!["identify", "worked.csv", "malformed.model.json", "proxied_outcome.model.json"],
    ] {
        assert_eq!(latentid(&args).code, 4, "{args:?}");
    }
    assert_eq!(latentid(&["--help"]).code, 0);
}

#[test]
fn identify_worked_example_effects() {
    let r = latentid(&["identify", "worked.csv", "worked.design.json", "proxied_outcome.model.json", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    let effects = v["outputs"]["effects"].as_array().unwrap();
    assert_eq!(effects.len(), 2);
    for e in effects {
        let p_y1 = num(&e["distribution"]["probs"][0]);
        let want = match e["exposure"]["value"].as_str().unwrap() {
            "x1" => 0.8,
            "x0" => 0.3,
            other => panic!("{other}"),
        };
        assert!((p_y1 - want).abs() <= 1e-9, "{p_y1} vs {want}");
        assert_eq!(e["criterion"], "back-door");
    }
}

#[test]
fn proportional_q_is_not_identified() {
    let r = latentid(&["identify", "independent.csv", "worked.design.json", "proxied_outcome.model.json", "--json"]);
    assert_eq!(r.code, 3);
    let d = &r.json()["diagnostics"][0];
    assert_eq!(d["condition"], "iii");
    assert!(r.stderr.contains("condition (iii)"));
}

#[test]
fn unknown_order_reports_labeling_free_interval() {
    let r = latentid(&["identify", "worked.csv", "unordered.design.json", "proxied_outcome.model.json", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["diagnostics"][0]["code"], "order-unknown");
    let rows = v["outputs"]["order_free"].as_array().unwrap();
    let x1 = rows.iter().find(|r| r["exposure"]["value"] == "x1").unwrap();
    assert!((num(&x1["bounds"]["lower"]) - 0.2).abs() <= 1e-9);
    assert!((num(&x1["bounds"]["upper"]) - 0.8).abs() <= 1e-9);
}

#[test]
fn simulate_then_identify_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    for (k, strata, seed) in [(2, 1, 1), (3, 2, 7), (5, 3, 11), (8, 1, 3)] {
        let prefix = format!("sim{k}");
        let r = latentid_in(dir.path(), &["simulate", "--k", &k.to_string(), "--strata", &strata.to_string(), "--seed", &seed.to_string(), "--out-prefix", &prefix]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let r = latentid_in(
            dir.path(),
            &["identify", &format!("{prefix}.csv"), &format!("{prefix}.design.json"), &format!("{prefix}.model.json"), "--json"],
        );
        assert_eq!(r.code, 0, "k={k}: {}", r.stderr);
        let got = r.json();
        let truth: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{prefix}.truth.json"))).unwrap()).unwrap();

        let want = truth["effects"].as_array().unwrap();
        let effects = got["outputs"]["effects"].as_array().unwrap();
        assert_eq!(effects.len(), k);
        for (e, t) in effects.iter().zip(want) {
            assert_eq!(e["exposure"], t["exposure"]);
            let (a, b) = (e["distribution"]["probs"].as_array().unwrap(), t["distribution"]["probs"].as_array().unwrap());
            let tv: f64 = a.iter().zip(b).map(|(x, y)| (num(x) - num(y)).abs()).sum::<f64>() / 2.0;
            assert!(tv <= 1e-8, "k={k} {}: {tv:e}", e["exposure"]);
        }
        let strata_out = got["outputs"]["reconstruction"]["strata"].as_array().unwrap();
        for (s, prior) in strata_out.iter().zip(truth["spec"]["prior"].as_array().unwrap()) {
            for (m, p) in s["factors"]["m"].as_array().unwrap().iter().zip(prior.as_array().unwrap()) {
                assert!((num(m) - num(p)).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for prefix in ["a", "b"] {
        let r = latentid_in(dir.path(), &["simulate", "--k", "4", "--strata", "2", "--seed", "42", "--out-prefix", prefix]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    latentid_in(dir.path(), &["simulate", "--k", "4", "--strata", "2", "--seed", "43", "--out-prefix", "c"]);
    for ext in ["csv", "design.json", "model.json", "truth.json"] {
        let read = |p: &str| std::fs::read(dir.path().join(format!("{p}.{ext}"))).unwrap();
        assert_eq!(read("a"), read("b"), "{ext}");
    }
    assert_ne!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("c.csv")).unwrap()
    );
}

#[test]
fn simulate_rejects_cardinality_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    for k in ["1", "9"] {
        let r = latentid_in(dir.path(), &["simulate", "--k", k, "--out-prefix", "x"]);
        assert_eq!(r.code, 4, "k={k}");
    }
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn closed_form_joint_compat_bounds() {
    let r = latentid(&[
        "bounds", "worked.csv", "--exposure", "X", "--proxies", "T,S", "--monotone", "--convention", "joint-compat", "--method",
        "closed", "--json",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let b = &r.json()["outputs"]["bounds"];
    assert_eq!(b[1]["lower"]["exact"], "169/500");
    assert_eq!(b[0]["upper"]["exact"], "861/2500");
}

#[test]
fn unrestricted_program_is_uninformative() {
    let r = latentid(&["bounds", "worked.csv", "--exposure", "X", "--proxies", "T,S", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for b in r.json()["outputs"]["bounds"].as_array().unwrap() {
        assert_eq!((b["lower"]["exact"].as_str(), b["upper"]["exact"].as_str()), (Some("0"), Some("1")));
    }
}

#[test]
fn monotone_certification_depends_on_proxy_coding() {
    let base = ["bounds", "worked.csv", "--exposure", "X", "--proxies", "T,S", "--monotone", "--method", "both", "--json"];
    let r = latentid(&base);
    assert_eq!(r.code, 3);
    assert_eq!(r.json()["diagnostics"][0]["code"], "infeasible");

    let mut recoded = base.to_vec();
    recoded.extend(["--levels", "S=s1,s0"]);
    let r = latentid(&recoded);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let targets = r.json()["outputs"]["certification"]["targets"].clone();
    assert_eq!(targets[0]["lp"]["upper"]["exact"], "7/10");
    assert_eq!(targets[1]["lp"]["lower"]["exact"], "3/10");
    for t in targets.as_array().unwrap() {
        assert_eq!(t["agrees"], true);
        assert_eq!(t["lower_delta"]["exact"], "0");
    }
}

#[test]
fn stratified_bounds_average_strata() {
    let r = latentid(&["bounds", "stratified.csv", "--exposure", "X", "--proxies", "T,S", "--stratify", "Z", "--monotone", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let b = &r.json()["outputs"]["bounds"];
    // Equal weights: (7/10 + 1) / 2 and (3/10 + 0) / 2.
    assert_eq!(b[0]["upper"]["exact"], "17/20");
    assert_eq!(b[1]["lower"]["exact"], "3/20");
}

#[test]
fn report_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let r = latentid(&["bounds", "worked.csv", "--exposure", "X", "--proxies", "T,S", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.starts_with("levels:"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["command"], "bounds");
    assert_eq!(v["inputs"]["files"][0]["name"], "worked.csv");
    assert_eq!(v["inputs"]["digest"].as_str().unwrap().len(), 64);
}
