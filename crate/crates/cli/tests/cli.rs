use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/data");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_metaqsim"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

#[test]
fn run_bell() {
    assert_eq!(ok(&["run", &data("bell_corr.mq")]), "00\t1/2\n11\t1/2\nOUTPUT1\t1/2\n");
    assert_eq!(
        ok(&["run", &data("bell_corr.mq"), "--output-only"]),
        ok(&["run", &data("bell_corr.mq"), "--output-only", "--jobs", "4"])
    );
}

#[test]
fn invalid_corr_exits_one() {
    let (code, out, err) = run(&["run", &data("anti_corr.mq")]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("invalid correlated measurement"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["run", "/nonexistent.mq"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["compile", &data("bell_corr.mq"), "--pass", "nope"]).0, 2);
    assert_eq!(run(&["run", &data("bell_corr.mq"), "--input", "1"]).0, 2);
}

#[test]
fn compile_then_compare() {
    let dir = std::env::temp_dir().join(format!("metaqsim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = data("postselect_or.mq");
    for pass in ["post2corr", "adpost2corr"] {
        let compiled = ok(&["compile", &src, "--pass", pass]);
        let path = dir.join(format!("{pass}.mq"));
        std::fs::write(&path, compiled).unwrap();
        assert_eq!(ok(&["compare", &src, path.to_str().unwrap()]), "EQUAL\n");
    }
    let nc = data("noncollapse.mq");
    let compiled = ok(&["compile", &nc, "--pass", "pdqp2corr"]);
    let path = dir.join("pdqp.mq");
    std::fs::write(&path, compiled).unwrap();
    assert_eq!(ok(&["compare", &nc, path.to_str().unwrap()]), "EQUAL\n");
    let diff = ok(&["compare", &src, &data("bell_corr.mq")]);
    assert!(diff.starts_with("DIFFER\t"), "{diff}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sampler_modes() {
    let c = data("three_term.mq");
    assert_eq!(ok(&["run", &c]), "111\t1/1\nOUTPUT1\t1/1\n");
    assert_eq!(ok(&["csample", &c, "--mode", "filtered", "--enumerate"]), "111\t1/1\nOUTPUT1\t1/1\n");
    assert_eq!(
        ok(&["csample", &c, "--mode", "literal", "--enumerate"]),
        "100\t1/3\n111\t2/3\nOUTPUT1\t2/3\n"
    );
    let a = ok(&["csample", &c, "--mode", "literal", "--seed", "5", "--shots", "50"]);
    let b = ok(&["csample", &c, "--mode", "literal", "--seed", "5", "--shots", "50"]);
    assert_eq!(a, b);
    assert!(a.ends_with("/50\n"));
}

#[test]
fn seeded_sampling_is_reproducible() {
    let args = ["sample", &data("bell_corr.mq"), "--seed", "9", "--shots", "200"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let total: u64 = a
        .lines()
        .filter(|l| !l.starts_with("OUTPUT1"))
        .map(|l| l.split('\t').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 200);
}

#[test]
fn rdeg_outputs() {
    let out = ok(&["rdeg", &data("xor2.tt")]);
    assert!(out.starts_with("rdeg\t1\ndeg\t2\n"), "{out}");
    assert!(ok(&["rdeg", &data("or2.tt")]).starts_with("rdeg\t2\n"));
    assert_eq!(ok(&["rdeg", &data("or2.tt"), "--degree", "1"]), "feasible\tfalse\n");
    assert!(ok(&["rdeg", &data("and2.tt"), "--eps", "1/10"]).starts_with("rdeg\t1\n"));
}

#[test]
fn poly_commands() {
    assert_eq!(ok(&["poly", "interpolate", &data("and2.tt")]), "1/1*{0,1}\ndegree\t2\n");
    assert_eq!(
        ok(&["poly", "interpolate", &data("values.tab")]),
        "1/4*{} + 1/4*{0} + 1/4*{1} + 1/4*{0,1}\ndegree\t2\n"
    );
    assert_eq!(
        ok(&["poly", "extract", &data("query_one.mq"), "--n", "2"]),
        "queries\t1\nP\t1/2*{0} + 1/2*{1}\nQ\t1/1*{}\ndegree\t1\n"
    );
    let tree = ok(&["poly", "extract", &data("query_adaptive.mq"), "--n", "2"]);
    assert!(tree.starts_with("queries\t2\ndegree\t2\nnode "), "{tree}");
}

#[test]
fn tree_commands() {
    let t = data("and_tree.txt");
    assert_eq!(ok(&["tree", "eval", &t, "--n", "2", "--x", "11"]), "1/1\n");
    assert_eq!(ok(&["tree", "eval", &t, "--n", "2", "--x", "10"]), "0/1\n");
    assert_eq!(ok(&["tree", "flatten", &t, "--n", "2"]).lines().count(), 2);
    let check = ok(&["tree", "check", &t, "--table", &data("and2.tt"), "--eps", "0"]);
    assert!(check.contains("holds\ttrue"), "{check}");
    let ada = ok(&["tree", "ada-build", "--n", "2", "--depth", "1", "--check"]);
    assert!(ada.contains("# degree 2\n"));
    assert!(ada.contains("# holds\ttrue\n"));
    // The built tree is valid input for the other tree commands.
    let dir = std::env::temp_dir().join(format!("metaqsim-tree-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ada.txt");
    std::fs::write(&path, &ada).unwrap();
    let v = ok(&["tree", "eval", path.to_str().unwrap(), "--n", "6", "--x", "110011"]);
    assert_eq!(v.trim(), "1/1");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn kwise_commands() {
    let (d0, d1) = (data("d0.dist"), data("d1.dist"));
    assert_eq!(ok(&["kwise", "epsilon", &d0, &d1, "--k", "2"]), "epsilon\t1/4\n");
    assert_eq!(ok(&["kwise", "epsilon", &d0, &d0, "--k", "3"]), "epsilon\t0/1\n");
    let search = ok(&["kwise", "ratio-bound", &d0, &d1, "--search"]);
    assert!(search.contains("violations\t0\n"), "{search}");
    let one = ok(&[
        "kwise",
        "ratio-bound",
        &d0,
        &d1,
        "--strategy",
        "z0 ? leaf(p=1/4, o=1/4) : leaf(p=1, o=0)",
    ]);
    assert!(one.ends_with("holds\ttrue\n"), "{one}");
}

#[test]
fn forrelation_report_is_reproducible() {
    let args = ["forrelation", "--m", "5", "--seed", "3", "--trials", "100"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    assert!(a.contains("advantage"));
}
