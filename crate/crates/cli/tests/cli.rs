use std::process::{Command, Output};

fn drc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const GRID_DRC: &[&str] = &[
    "--set",
    "method=drc",
    "--set",
    "noise.kind=gcm",
    "--set",
    "noise.n_r=6",
    "--set",
    "noise.omega=0.7",
    "--set",
    "drc.n_o=6",
    "--set",
    "drc.known_range=true",
    "--set",
    "agent.steps=2000",
];

#[test]
fn ce_curve_is_flat_past_n_r() {
    let out = stdout(&drc(&[
        "theory",
        "ce-curve",
        "--n-r",
        "4",
        "--omega",
        "0.5",
        "--candidates",
        "1..9",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n_r,n_o,omega,metric,value"));
    let vals: Vec<String> = lines.map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(vals.len(), 8);
    assert_eq!(vals[0], "0.00000000e0");
    assert!(vals[3..].iter().all(|v| *v == vals[3]));
}

#[test]
fn recon_curve_and_prop1_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("recon.csv");
    stdout(&drc(&[
        "theory",
        "recon-curve",
        "--candidates",
        "10,20",
        "--out",
        p.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 3);
    for l in text.lines().skip(1) {
        let v: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v.abs() <= 1e-12, "{l}");
    }
    let prop = stdout(&drc(&["theory", "prop1", "--draws", "2000", "--n-r", "10"]));
    assert!(prop.contains("10,,3.00000000e-1,bound,1.00000000e-1"));
}

#[test]
fn clean_perturb_sample_passes_rewards_through() {
    let out = stdout(&drc(&["perturb", "sample", "--count", "5", "--seed", "4"]));
    for l in out.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[1], f[2]);
        assert_eq!(f[3], "");
    }
    let gcm = stdout(&drc(&[
        "perturb",
        "sample",
        "--set",
        "noise.kind=gcm",
        "--set",
        "noise.n_r=6",
        "--set",
        "noise.omega=1",
        "--count",
        "200",
    ]));
    assert!(gcm.lines().skip(1).any(|l| l.split(',').nth(3) != l.split(',').nth(4)));
}

#[test]
fn run_is_byte_identical_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let sum = dir.path().join("summary.json");
    let run = |out: &std::path::Path, workers: &str| {
        let mut args = GRID_DRC.to_vec();
        args.extend(["--seed", "0..3", "--workers", workers, "--out", out.to_str().unwrap()]);
        args.extend(["run", "--summary", sum.to_str().unwrap()]);
        stdout(&drc(&args));
    };
    run(&a, "1");
    run(&b, "3");
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    // header plus 4 epochs for each of 3 seeds
    assert_eq!(text.lines().count(), 1 + 3 * 4);
    let json = std::fs::read_to_string(&sum).unwrap();
    assert!(json.contains("\"method\": \"drc\"") && json.contains("\"n\": 3"));
}

#[test]
fn sweep_puts_the_axis_first() {
    let mut args = GRID_DRC.to_vec();
    args.extend(["--seed", "0", "sweep", "--axis", "noise.omega", "--values", "0.1,0.7"]);
    let out = stdout(&drc(&args));
    assert!(out.starts_with("noise.omega,config,seed,"));
    assert!(out.lines().any(|l| l.starts_with("0.1,0,")) && out.lines().any(|l| l.starts_with("0.7,1,")));
}

#[test]
fn diagnostics_mark_hidden_labels_evaluation_only() {
    let dir = tempfile::tempdir().unwrap();
    let votes = dir.path().join("votes.csv");
    let args = [
        "--set",
        "method=gdrc",
        "--set",
        "noise.kind=gcm",
        "--set",
        "noise.n_r=6",
        "--set",
        "noise.omega=0.5",
        "--set",
        "agent.steps=1000",
        "--seed",
        "1",
        "diagnostics",
        "--votes",
        votes.to_str().unwrap(),
    ];
    let out = stdout(&drc(&args));
    assert!(out.lines().any(|l| l.contains(",critic_ce,observed,")));
    assert!(out.lines().any(|l| l.contains(",evaluation_only,")));
    let v = std::fs::read_to_string(&votes).unwrap();
    assert!(v.starts_with("config,seed,epoch,candidate,H,dH,votes,winner\n"));
}

#[test]
fn config_errors_name_the_field() {
    let o = drc(&["--set", "bogus.key=1", "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus.key"));

    let o = drc(&[
        "--set",
        "method=drc",
        "--set",
        "noise.kind=gcm",
        "--set",
        "noise.n_r=6",
        "--set",
        "noise.omega=0.5",
        "run",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("drc.n_o"));

    let o = drc(&["--seed", "0..3", "theory", "prop1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# raw baseline\nmethod = raw\nagent.steps = 1000\nseeds = 0..5\n").unwrap();
    let out = stdout(&drc(&["--config", cfg.to_str().unwrap(), "--seed", "7", "run"]));
    assert!(out.lines().skip(1).all(|l| l.starts_with("0,7,")));
    assert_eq!(out.lines().count(), 3);
}
