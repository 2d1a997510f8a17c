use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_causal-cart"));
    cmd.args(args).env_remove("CAUSAL_CART_SEED");
    if let Some(s) = seed_env {
        cmd.env("CAUSAL_CART_SEED", s);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_GRID: &str = "experiment = rmse-grid\nn = 200\ndepths = 1, 2\ngrid_points = 9\nreps = 20\nmethods = dim-nss, ipw-hon, sse-x, cart-nss\n";

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let read = |out: &str, workers: &str, seed: &str| {
        let out = dir.path().join(out);
        let o = cli(&["rmse-grid", "--config", &cfg, "--seed", seed, "--workers", workers, "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("rmse_grid.csv")).unwrap()
    };
    let a = read("a", "1", "7");
    assert_eq!(a, read("b", "1", "7"));
    assert_eq!(a, read("c", "3", "7"));
    assert_ne!(a, read("d", "1", "8"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("rule,scheme,K,x,rmse,se,reps\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2 * 9);
}

#[test]
fn seed_falls_back_to_config_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |cfg_text: &str, flag: Option<&str>, env: Option<&str>| {
        let cfg = write_config(dir.path(), cfg_text);
        let out = dir.path().join("out");
        let mut args = vec!["imse", "--config", &cfg, "--out", out.to_str().unwrap(), "--reps", "10"];
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        let o = cli(&args, env);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("imse.csv")).unwrap()
    };
    let base = "experiment = imse\n";
    let seeded = "experiment = imse\nseed = 5\n";
    assert_eq!(run(seeded, None, Some("9")), run(base, Some("5"), None));
    assert_eq!(run(base, None, Some("9")), run(base, Some("9"), None));
    assert_eq!(run(seeded, Some("9"), None), run(base, Some("9"), None));
    assert_eq!(run(base, None, None), run(base, Some("1"), None));
}

fn assert_rejected(text: &str, experiment: &str, needle: &str) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    let o = cli(&[experiment, "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains(needle), "{:?} lacks {needle:?}", stderr(&o));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0, "nothing may be written");
}

#[test]
fn unknown_keys_are_named() {
    assert_rejected("experiment = imse\nsizes = 50\nwobble = 3\n", "imse", "wobble");
}

#[test]
fn missing_experiment_key_is_named() {
    assert_rejected("n = 100\nreps = 3\n", "bias", "experiment");
}

#[test]
fn mismatched_experiment_is_rejected() {
    assert_rejected("experiment = imse\n", "bias", "imse");
}

#[test]
fn malformed_values_are_rejected() {
    assert_rejected("experiment = bias\nxi = 1.5\n", "bias", "xi");
    assert_rejected("experiment = bias\nn = many\n", "bias", "n");
    assert_rejected("experiment = rmse-grid\nmethods = dim-nss, tree-hon\n", "rmse-grid", "tree");
    assert_rejected("experiment = bias\nthis line has no equals sign\n", "bias", "line");
}

#[test]
fn selftest_exits_cleanly() {
    let o = cli(&["selftest", "--instances", "50", "--seed", "3"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("argmax: 0 mismatches"), "{stdout}");
}

#[test]
fn every_subcommand_writes_its_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("split-index", "experiment = split-index\nn = 100\nreps = 5\n", "split_index.csv", "rule,n,p,rep,coord,index,threshold"),
        ("bias", "experiment = bias\nn = 100\nreps = 8\n", "bias.csv", "rule,scheme,K,x,mean,se,p_empty,reps"),
        ("sup-error", "experiment = sup-error\nn = 200\nreps = 5\n", "sup_error.csv", "rule,scheme,K,n,threshold,exceed_freq,q50,q90,reps"),
        ("beta-measure", "experiment = beta-measure\nsize = 12\nreps = 200\nmin_bucket = 5\n", "beta_measure.csv", "N,k,count,ks_stat,p_value"),
        ("ou-darling-erdos", "experiment = ou-darling-erdos\nL = 4\ndt = 0.02\nreps = 20\n", "ou_darling_erdos.csv", "d,c,L,rep,stat"),
        ("ou-maxloc", "experiment = ou-maxloc\nreps = 20\n", "ou_maxloc.csv", "A,B,C,reps,freq,se"),
    ];
    for (cmd, text, csv, header) in cases {
        let cfg = write_config(dir.path(), text);
        let out = dir.path().join(cmd);
        let o = cli(&[cmd, "--config", &cfg, "--seed", "2", "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let body = fs::read_to_string(out.join(csv)).unwrap();
        assert_eq!(body.lines().next(), Some(header), "{cmd}");
        let stdout = String::from_utf8(o.stdout).unwrap();
        assert!(stdout.contains("seed 2"), "{stdout}");
        let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1, "{cmd}: stray files {names:?}");
    }
}
