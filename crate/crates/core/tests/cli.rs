use std::fs;
use std::path::Path;
use std::process::Command;

fn skewmax(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_skewmax"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const QUICK: &str = r#"
[field]
name = "zero"

[grid]
spatial = 16
resolutions = [16, 32]

[monte_carlo]
sweep_points = 32
estimate_configs = 20

[suite]
checks = ["field-invariants", "mollify-estimates", "existence-sweep", "maximal-linf"]
"#;

#[test]
fn verify_reports_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out_a = skewmax(&a, &["verify", "--config", &cfg, "--workers", "1"]);
    assert!(out_a.status.success(), "{}", String::from_utf8_lossy(&out_a.stderr));
    let out_b = skewmax(&b, &["verify", "--config", &cfg, "--seed", "0"]);
    assert!(out_b.status.success());
    for name in ["verify_report.txt", "verify_report.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("verify_report.csv")).unwrap();
    assert!(csv.starts_with("check,mandatory,status,metric,value\n"));
    assert!(fs::read_to_string(a.join("verify_report.txt")).unwrap().ends_with("suite: PASS\n"));
}

#[test]
fn subcommands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nspatial = 16\ntimes = 2\n\n[flow]\nseeds = 2\n\n[monte_carlo]\nfamily_size = 10\n",
    );
    for (cmd, file, header) in [
        ("mollify", "mollify.csv", "eps,t,x_1,x_2,u_1,u_2,g_11,g_12,g_21,g_22,grad_norm"),
        ("flow", "flow.csv", "seed,time,x_1,x_2"),
        ("maximal", "maximal.csv", "t,x_1,x_2,value,argmax_eps,admissible_count"),
        ("cover", "cover.csv", "order,index,t,x_1,x_2,epsilon"),
    ] {
        let out = skewmax(dir.path(), &[cmd, "--config", &cfg]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{cmd}");
    }
    let summary = fs::read_to_string(dir.path().join("maximal_summary.txt")).unwrap();
    assert!(summary.contains("linf_bound_holds = true"));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[field]\nname = \"vortex\"\n");
    assert_eq!(skewmax(dir.path(), &["verify", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "[grid]\nspacial = 3\n");
    assert_eq!(skewmax(dir.path(), &["mollify", "--config", &cfg]).status.code(), Some(2));
}
