use std::path::PathBuf;
use std::process::{Command, Output};

fn subconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subconv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("subconv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn without_wall_time(json: &str) -> String {
    json.lines().filter(|l| !l.contains("wall_time_s")).collect::<Vec<_>>().join("\n")
}

#[test]
fn exponent_suite_passes_and_reports() {
    let a = scratch("a.json");
    let b = scratch("b.json");
    let out = subconv(&["suite", "exponents", "--json", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("23/16"));
    subconv(&["suite", "exponents", "--json", b.to_str().unwrap()]);
    let (ja, jb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert!(ja.contains("\"checks\""));
    assert_eq!(without_wall_time(&ja), without_wall_time(&jb));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(subconv(&["suite", "everything"]).status.code(), Some(2));
    assert_eq!(subconv(&["--set", "colour=red", "suite", "exponents"]).status.code(), Some(2));
    assert_eq!(subconv(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn caps_refuse_without_acknowledgement() {
    let grid = scratch("big.txt");
    std::fs::write(&grid, "n = 1000\nsweep.k = 10\n").unwrap();
    let out = subconv(&["sweep", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--unsafe-scale"));
}

#[test]
fn sweep_writes_csv() {
    let grid = scratch("grid.txt");
    let csv = scratch("sweep.csv");
    std::fs::write(&grid, "n = 50\nsweep.k = 5, 10\nquantity = plain\n").unwrap();
    let out = subconv(&["sweep", grid.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("k,direct_re"));
    for l in &lines[1..] {
        let residual: f64 = l.split(',').nth(5).unwrap().parse().unwrap();
        assert!(residual <= 1e-3);
    }
}

#[test]
fn export_coefficients() {
    let out = subconv(&["export", "coefficients", "--set", "model=eisenstein:3,-1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() > 100);
}
