use std::process::{Command, Output};

fn cevtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cevtree"))
        .args(args)
        .env("CEV_THREADS", "1")
        .output()
        .expect("spawn cevtree")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn price_matches_table_value() {
    let o = cevtree(&[
        "price", "--beta", "1", "--mode", "approx-p", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("price,style,mode,n_steps"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let price: f64 = row[0].parse().unwrap();
    assert!((price - 0.0520).abs() <= 1e-4, "{price}");
    assert_eq!(&row[1..], ["european", "approx-p", "365"]);
}

#[test]
fn price_json_has_declared_fields() {
    let o = cevtree(&["price", "--style", "american", "--steps", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["style"], "american");
    assert_eq!(v["mode"], "exact-h");
    assert_eq!(v["n_steps"], 50);
    assert!(v["price"].as_f64().unwrap() > 0.0);
    assert!(!v["exercise_boundary"].as_array().unwrap().is_empty());
}

#[test]
fn zero_steps_is_a_validation_error() {
    for cmd in ["price", "envelope", "density"] {
        let o = cevtree(&[cmd, "--steps", "0"]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("steps must be ≥ 1"), "{}", stderr(&o));
    }
}

#[test]
fn beta_above_two_points_to_closed_form() {
    let o = cevtree(&["price", "--beta", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("analytic"), "{}", stderr(&o));
}

#[test]
fn bad_flags_are_validation_errors() {
    for args in [
        &["price", "--sigma", "-0.2"][..],
        &["price", "--t", "0"],
        &["price", "--kind", "straddle"],
        &["converge", "--steps", "730,365"],
        &["frobnicate"],
    ] {
        assert_eq!(cevtree(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_fixture_is_a_validation_error() {
    let o = cevtree(&["table1", "--fixture", "/nonexistent/table1.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/table1.csv"));
}

#[test]
fn table1_reports_worst_mismatch() {
    // the fixture's one-year closed-form column is off by up to 0.01
    let o = cevtree(&["table1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("analytic at beta=2, S=0.5, T=1"),
        "{}",
        stderr(&o)
    );
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "beta,s,e,t,analytic,tree365,tree730,fixture_analytic,fixture_tree365,fixture_tree730,delta"
    );
    assert_eq!(text.lines().count(), 28);
}

#[test]
fn table1_passes_on_matching_fixture() {
    let dir = std::env::temp_dir().join(format!("cevtree-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("short.csv");
    std::fs::write(
        &path,
        "beta,s,e,t,analytic,tree365,tree730\n0.5,1,1,0.25,0.0337,0.0332,0.0332\n2,1,1,0.5,0.0442,0.0403,0.0403\n",
    )
    .unwrap();
    let o = cevtree(&[
        "table1",
        "--fixture",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [
        &["price", "--style", "american", "--steps", "100"][..],
        &["converge", "--steps", "50,100"],
        &["mc", "--paths", "2000", "--steps", "50", "--seed", "3"],
        &[
            "density", "--beta", "2", "--steps", "40", "--format", "json",
        ],
    ] {
        let a = cevtree(args);
        let b = cevtree(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn mc_does_not_depend_on_thread_count() {
    let args = ["mc", "--paths", "4000", "--steps", "20", "--antithetic"];
    let one = cevtree(&args);
    let many = Command::new(env!("CARGO_BIN_EXE_cevtree"))
        .args(args)
        .env("CEV_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.stdout, many.stdout);
    let text = stdout(&one);
    assert_eq!(
        text.lines().next(),
        Some("price,std_error,analytic,n_paths,n_time_steps,seed")
    );
}

#[test]
fn lattice_dump_uses_one_based_levels() {
    let path = std::env::temp_dir().join(format!("cevtree-dump-{}.json", std::process::id()));
    let o = cevtree(&[
        "price",
        "--steps",
        "4",
        "--dump-lattice",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v["n_steps"], 4);
    assert!((v["dt"].as_f64().unwrap() - 0.25).abs() < 1e-15);
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 5);
    for (i, level) in levels.iter().enumerate() {
        assert_eq!(level.as_array().unwrap().len(), 2 * i + 1);
        assert_eq!(v["floored"][i].as_array().unwrap().len(), 2 * i + 1);
    }
    assert_eq!(levels[0][0], 1.0);
    // shift identity: S(i+1, j+1) = S(i, j)
    assert_eq!(levels[3][2], levels[2][1]);
}

#[test]
fn envelope_rows_start_at_spot() {
    let o = cevtree(&["envelope", "--s0", "3", "--steps", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("tau,tree_upper,tree_lower,ode_upper,ode_lower")
    );
    assert_eq!(lines.next(), Some("0.0,3.0,3.0,3.0,3.0"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("cevtree-out-{}.csv", std::process::id()));
    let o = cevtree(&[
        "converge",
        "--steps",
        "20,40",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert!(text.starts_with("n_steps,tree_price,analytic_price,abs_error\n20,"));
    assert!(!text.contains('\r'));
}
