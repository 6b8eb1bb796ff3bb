use std::path::Path;
use std::process::{Command, Output};

fn ctpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctpc"))
        .args(args)
        .env_remove("CTPC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn transform_examples() {
    let o = ctpc(&["transform", "--kind", "dwht", "--fast", "--in", "1,2,3,4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "10,-2,-4,0\n");
    assert_eq!(
        stdout(&ctpc(&["transform", "--kind", "dwht", "--in", "1,0,0,0"])),
        "1,1,1,1\n"
    );

    let o = ctpc(&["transform", "--kind", "dwht", "--in", "1,2,3", "--fast"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not a power of two"));
}

#[test]
fn transform_check_and_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("v.txt");
    std::fs::write(&f, "1 2 3 4 5 6 7 8\n# comment\n-1,0,0,0,0,0,0,0\n").unwrap();
    let o = ctpc(&[
        "transform",
        "--kind",
        "dct",
        "--fast",
        "--check",
        "--input",
        f.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("36,"));
    for dev in [lines[1], lines[3]] {
        let v: f64 = dev.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(v < 1e-9, "{dev}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(
        ctpc(&["transform", "--kind", "dwht", "--in", "1", "--nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ctpc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        ctpc(&["analyze", "--config", "/nonexistent/net.toml"]).status.code(),
        Some(4)
    );
    assert_eq!(ctpc(&["verify", "--perturb-hadamard"]).status.code(), Some(3));
    assert_eq!(ctpc(&["build"]).status.code(), Some(1));
    assert!(ctpc(&["--help"]).status.success());
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        "transform",
        "bench",
        "build",
        "analyze",
        "compare",
        "train",
        "inspect",
        "verify",
    ] {
        let o = ctpc(&[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
        assert!(stdout(&o).contains("Usage: ctpc"), "{cmd}");
    }
}

#[test]
fn verify_passes_and_degrades_without_targets() {
    let o = ctpc(&["verify"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL "));

    let o = ctpc(&["verify", "--targets", "/nonexistent/targets.toml"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out
        .lines()
        .any(|l| l.starts_with("unchecked") && l.contains("targets unavailable")));
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 8);

    let out = stdout(&ctpc(&["verify", "--perturb-hadamard"]));
    let first = out.lines().next().unwrap();
    assert!(first.starts_with("FAIL") && first.contains("Hadamard"), "{first}");
}

#[test]
fn build_and_analyze_description_file() {
    let dir = tempfile::tempdir().unwrap();
    let desc = dir.path().join("net.toml");
    std::fs::write(
        &desc,
        "family = \"mobilenet_v1\"\nwidth = 1.0\nnum_classes = 100\ninput_size = 32\nscheme = \"DWHT-6-H\"\n",
    )
    .unwrap();
    let d = desc.to_str().unwrap();

    let o = ctpc(&["build", "--config", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    let listing = stdout(&o);
    assert!(listing.contains("block12.pw") && listing.contains("TransformPC DWHT 1024->1024"));
    assert!(listing.contains("block6.pw") && listing.contains("PointwiseConv 512->512"));

    let csv = dir.path().join("cost.csv");
    let o = ctpc(&["analyze", "--config", d, "--csv", csv.to_str().unwrap(), "--compare"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("mobilenet_dwht_6_h"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("layer,params,mult,add,sub,flops\n"));
    let total = text.lines().last().unwrap();
    assert!(total.starts_with("total,688036,"), "{total}");
}

#[test]
fn compare_bundled_targets() {
    let o = ctpc(&["compare"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("params_reduction"));
}

#[test]
fn bench_op_columns_are_deterministic() {
    let args = [
        "bench",
        "--kinds",
        "naive-pc,fast-dwht",
        "--max-log2",
        "5",
        "--reps",
        "1",
    ];
    let cols = |o: Output| -> Vec<String> {
        stdout(&o)
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},{}", f[0], f[1], f[3..].join(","))
            })
            .collect()
    };
    let a = cols(ctpc(&args));
    assert_eq!(a, cols(ctpc(&args)));
    assert_eq!(a[0], "kind,n,mult,add,sub,flops");
    assert!(a.contains(&"fast-dwht,1,0,0,0,0".to_string()));
    assert!(a.contains(&"naive-pc,32,1024,992,0,2016".to_string()));
}

fn train_into(dir: &Path, seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctpc"));
    cmd.args([
        "train",
        "--family",
        "tiny",
        "--width",
        "0.5",
        "--variant",
        "ctpc",
        "--transform",
        "dwht",
        "--epochs",
        "2",
        "--batch-size",
        "32",
        "--wd-override",
        "last3_dw=0.01",
        "--histogram",
        "dw:all",
        "--histogram",
        "transform_activation:block0",
    ]);
    cmd.arg("--out-dir").arg(dir);
    match seed_env {
        Some(s) => cmd.env("CTPC_SEED", s),
        None => cmd.env_remove("CTPC_SEED"),
    };
    cmd.output().unwrap()
}

#[test]
fn train_then_inspect() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = train_into(a.path(), Some("7"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(train_into(b.path(), Some("7")).status.success());
    for f in [
        "metrics_seed7.csv",
        "seed7.ckpt",
        "hist_seed7_depthwise_weights_all.csv",
        "hist_seed7_transform_activation_block0.csv",
    ] {
        let (x, y) = (
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
        );
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let metrics = std::fs::read_to_string(a.path().join("metrics_seed7.csv")).unwrap();
    assert!(metrics.starts_with("epoch,lr,train_loss,train_acc,eval_acc\n"));
    assert_eq!(metrics.lines().count(), 3);

    let ckpt = a.path().join("seed7.ckpt");
    let o = ctpc(&["inspect", "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hist = stdout(&o);
    assert!(hist.starts_with("bin_left,bin_right,count\n"));
    assert_eq!(hist.lines().count(), 102);
    assert_eq!(
        hist,
        std::fs::read_to_string(a.path().join("hist_seed7_depthwise_weights_all.csv")).unwrap()
    );

    let o = ctpc(&[
        "inspect",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--source",
        "transform_activation",
        "--location",
        "nowhere",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
