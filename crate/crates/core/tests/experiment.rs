use std::path::PathBuf;
use std::process::Command;

use tokenpass::experiment::{run_experiment, scenario, ExperimentSpec};
use tokenpass::gridmap::GridMap;
use tokenpass::metrics::CSV_HEADER;

fn map_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/maps/small_warehouse.map")
}

fn spec(seeds: Vec<u64>) -> ExperimentSpec {
    ExperimentSpec {
        map: map_path(),
        tasks: 20,
        algos: vec!["tp_replan".into(), "k_tp".into()],
        ks: vec![1],
        seeds,
        ..ExperimentSpec::default()
    }
}

fn without_runtime(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

#[test]
fn one_seed_two_algorithms() {
    let result = run_experiment(&spec(vec![3])).unwrap();
    assert!(result.all_ok());
    let csv = result.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("tp_replan,,,,4,1,10,3,"));
    assert!(lines[2].starts_with("k_tp,1,,,4,1,10,3,"));
    assert!(lines[3].starts_with("tp_replan,,,,4,1,10,mean,"));
    assert!(lines[4].starts_with("k_tp,1,,,4,1,10,mean,"));
}

#[test]
fn rerun_is_identical_up_to_runtime() {
    let a = run_experiment(&spec(vec![0, 1, 2])).unwrap().to_csv();
    let b = run_experiment(&spec(vec![0, 1, 2])).unwrap().to_csv();
    assert_eq!(without_runtime(&a), without_runtime(&b));
}

#[test]
fn scenarios_depend_only_on_the_seed() {
    let map = GridMap::from_file(map_path()).unwrap();
    let s = spec(vec![0]);
    let mut other = s.clone();
    other.algos = vec!["p_tp".into()];
    assert_eq!(scenario(&map, &s, 7).unwrap(), scenario(&map, &other, 7).unwrap());
    assert_ne!(scenario(&map, &s, 7).unwrap().0, scenario(&map, &s, 8).unwrap().0);
}

#[test]
fn spec_file_resolves_map_relative_to_itself() {
    let dir = std::env::temp_dir().join(format!("tokenpass-spec-{}", std::process::id()));
    std::fs::create_dir_all(dir.join("maps")).unwrap();
    std::fs::copy(map_path(), dir.join("maps/w.map")).unwrap();
    std::fs::write(
        dir.join("run.spec"),
        "# small run\nmap = maps/w.map\nalgo = k_tp\nk = 0,2\nseeds = 2..4\ntasks = 10\n",
    )
    .unwrap();
    let s = ExperimentSpec::from_file(dir.join("run.spec")).unwrap();
    assert_eq!(s.seeds, vec![2, 3]);
    let result = run_experiment(&s).unwrap();
    assert_eq!(result.runs.len(), 4);
    assert!(result.all_ok());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn unknown_key_is_rejected() {
    assert!(ExperimentSpec::parse("colour = red\n").is_err());
    assert!(ExperimentSpec::parse("agents = four\n").is_err());
}

#[test]
fn binary_writes_csv_and_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mapd");
    let out = Command::new(bin)
        .args([
            "--map",
            map_path().to_str().unwrap(),
            "--algo",
            "tp_replan,p_tp",
            "--p",
            "0.5",
            "--seeds",
            "2",
            "--tasks",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + 4 + 2);
    assert!(csv.contains("\np_tp,,0.5,0.1,4,1,10,1,"));

    let bad = Command::new(bin).args(["--map", "/nonexistent.map", "--seeds", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let bad = Command::new(bin).args(["--map", map_path().to_str().unwrap(), "--algo", "astar"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
