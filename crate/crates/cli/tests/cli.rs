use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn contraflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contraflow")).args(args).output().expect("spawn contraflow")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &Path, seed: &str) -> Output {
    contraflow(&[
        "generate",
        "--rows",
        "3",
        "--cols",
        "3",
        "--vehicles",
        "120",
        "--seed",
        seed,
        "--horizon",
        "900",
        "--flow-window",
        "600",
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn generate_writes_three_files_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = contraflow(&["generate", "--rows", "4", "--cols", "4", "--vehicles", "500", "--seed", "7", "--out"]
        .into_iter()
        .chain([dir.path().to_str().unwrap()])
        .collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files, ["demand.json", "manifest.json", "network.json"]);
    assert!(stdout(&o).contains("nodes=16 roads=48 lanes=96"));
}

#[test]
fn generate_rejects_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = contraflow(&["generate", "--rows", "1", "--cols", "3", "--vehicles", "5", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error: ") && err.contains("rows must be >= 2"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(generate(a.path(), "3").status.success());
    assert!(generate(b.path(), "3").status.success());
    for f in ["network.json", "demand.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn simulate_prints_objectives_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "1");
    let manifest = dir.path().join("manifest.json");
    let o = contraflow(&["simulate", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("Z1=") && line.trim_end().ends_with("Z2=0"), "{line}");
    let csv = fs::read_to_string(dir.path().join("vehicles.csv")).unwrap();
    assert!(csv.starts_with("vehicle_id,route_length_m,travel_time_s,distance_m,arrived,reachable"));
    // base vehicles plus the wave's extra ones
    assert!(csv.lines().count() > 121);

    let net: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("network.json")).unwrap()).unwrap();
    let n = net["reversible_order"].as_array().unwrap().len();
    let mask: String = (0..n).map(|i| if i == 2 || i == 5 || i == 9 { '1' } else { '0' }).collect();
    let o = contraflow(&["simulate", "--manifest", manifest.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--mask", &mask]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("Z2=3"));
}

#[test]
fn simulate_names_violated_constraint() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "1");
    let manifest = dir.path().join("manifest.json");
    let net: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("network.json")).unwrap()).unwrap();
    let n = net["reversible_order"].as_array().unwrap().len();
    let mask = format!("11{}", "0".repeat(n - 2));
    let o = contraflow(&["simulate", "--manifest", manifest.to_str().unwrap(), "--mask", &mask]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("{0,1}"), "{}", stderr(&o));

    let o = contraflow(&["simulate", "--manifest", manifest.to_str().unwrap(), "--mask", "01"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));
}

fn optimize(dir: &Path, extra: &[&str]) -> Output {
    let manifest = dir.join("manifest.json");
    let mut args = vec![
        "optimize",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--pop",
        "8",
        "--generations",
        "3",
        "--snapshot-gens",
        "1,3",
        "--jobs",
        "2",
    ];
    args.extend_from_slice(extra);
    contraflow(&args)
}

fn pareto_rows(dir: &Path) -> Vec<(String, f64, usize)> {
    let text = fs::read_to_string(dir.join("pareto.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mask_bits,z1_ms,z2"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn optimize_writes_outputs_and_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(a.path(), "2");
    generate(b.path(), "2");
    let o = optimize(a.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("cache_hits="));
    assert!(optimize(b.path(), &["--jobs", "1"]).status.success());
    for f in ["pareto.csv", "history.csv", "pareto_gen1.csv", "pareto_gen3.csv", "cache.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let rows = pareto_rows(a.path());
    for (bits, _, z2) in &rows {
        assert_eq!(bits.matches('1').count(), *z2);
    }
    for (i, x) in rows.iter().enumerate() {
        for y in &rows[i + 1..] {
            let dom = |p: &(String, f64, usize), q: &(String, f64, usize)| {
                p.1 >= q.1 && p.2 <= q.2 && (p.1 > q.1 || p.2 < q.2)
            };
            assert!(!dom(x, y) && !dom(y, x));
        }
    }
    let history = fs::read_to_string(a.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("generation,best_z1,mean_z1,archive_size"));
    assert_eq!(history.lines().count(), 5);
}

#[test]
fn optimize_respects_cap_and_zero_generations() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "4");
    let o = optimize(dir.path(), &["--z2-cap", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(pareto_rows(dir.path()).iter().all(|r| r.2 <= 3));

    let o = optimize(dir.path(), &["--generations", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("history.csv")).unwrap().lines().count(), 2);
}

#[test]
fn warm_cache_avoids_simulation() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "5");
    assert!(optimize(dir.path(), &[]).status.success());
    let first = fs::read(dir.path().join("pareto.csv")).unwrap();
    let cache = dir.path().join("cache.csv");
    let saved = dir.path().join("warm.csv");
    fs::copy(&cache, &saved).unwrap();
    let o = optimize(dir.path(), &["--cache", saved.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("simulations=0"), "{}", stdout(&o));
    assert_eq!(fs::read(dir.path().join("pareto.csv")).unwrap(), first);
}

#[test]
fn optimize_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "6");
    let o = optimize(dir.path(), &["--pop", "5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("pop_size"), "{}", stderr(&o));
    let o = contraflow(&["optimize", "--network", "missing.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));
}
