use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use treecorr_cli::format::load_paired_trees;
use treecorr_cli::{ANGLE_CSV_HEADER, CSV_HEADER};

fn treecorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treecorr"))
        .args(args)
        .env_remove("TREECORR_SEED")
        .env_remove("TREECORR_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn generate(dir: &Path, name: &str, rho: &str, seed: &str) -> String {
    let path = dir.join(name).display().to_string();
    let o = treecorr(&["generate", "--rho", rho, "--seed", seed, "--out", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn theory_reports_the_worked_example() {
    let o = treecorr(&[
        "theory", "--mu1", "5", "--mu2", "5", "--sigma1", "1", "--sigma2", "1", "--rho", "0",
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(field(&s, "c^2"), "5.991465");
    let k1: f64 = field(&s, "k1").parse().unwrap();
    let k2: f64 = field(&s, "k2").parse().unwrap();
    assert!((k1 * k2 - 1.0).abs() < 1e-5);
    assert_eq!(field(&s, "tangent_region"), "yes");
}

#[test]
fn theory_inside_the_ellipse_has_no_tangents() {
    let o = treecorr(&[
        "theory", "--mu1", "0", "--mu2", "0", "--sigma1", "1", "--sigma2", "1", "--rho", "0.2",
    ]);
    assert!(o.status.success());
    assert!(field(&stdout(&o), "tangents").starts_with("undefined"));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let cases: &[&[&str]] = &[
        &["theory", "--mu1", "0"],
        &[
            "theory", "--mu1", "0", "--mu2", "0", "--sigma1", "1", "--sigma2", "1", "--rho", "1.5",
        ],
        &["generate", "--rho", "1.2"],
        &["generate", "--rho", "0.5", "--family", "cauchy"],
        &["simulate", "--rho", "0.5", "--eta", "0.6"],
        &["nonsense"],
    ];
    for args in cases {
        assert_eq!(treecorr(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn exact_schedule_needs_its_rho() {
    let dir = TempDir::new().unwrap();
    let f = generate(dir.path(), "a.tsv", "0.5", "1");
    assert_eq!(
        treecorr(&["angle", &f, "--epsilon", "exact"]).status.code(),
        Some(2)
    );
    let o = treecorr(&["angle", &f, "--epsilon", "exact", "--epsilon-rho", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unreadable_data_exits_with_data_code() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.tsv").display().to_string();
    assert_eq!(treecorr(&["angle", &missing]).status.code(), Some(3));

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "node_id\tparent_id\tx\ty\n1\t\t1.0\n").unwrap();
    let o = treecorr(&["angle", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let cyclic = dir.path().join("cyclic.tsv");
    std::fs::write(
        &cyclic,
        "node_id\tparent_id\tx\ty\nr\t-\t0\t0\na\tb\t1\t1\nb\ta\t2\t2\n",
    )
    .unwrap();
    assert_eq!(
        treecorr(&["angle", cyclic.to_str().unwrap()]).status.code(),
        Some(3)
    );
}

#[test]
fn generate_is_reproducible_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let a = generate(dir.path(), "a.tsv", "0.4", "11");
    let b = generate(dir.path(), "b.tsv", "0.4", "11");
    let c = generate(dir.path(), "c.tsv", "0.4", "12");
    let (ta, tb, tc) = (
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        std::fs::read(&c).unwrap(),
    );
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);

    let data = load_paired_trees(Path::new(&a)).unwrap();
    assert_eq!(data.nodes.len(), 127);
    assert_eq!(
        treecorr_cli::format::write_paired_trees(&data).into_bytes(),
        ta
    );

    let printed = treecorr(&["generate", "--rho", "0.4", "--seed", "11"]);
    assert_eq!(printed.stdout, ta);
    let from_env = Command::new(env!("CARGO_BIN_EXE_treecorr"))
        .args(["generate", "--rho", "0.4"])
        .env("TREECORR_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, ta);
}

#[test]
fn generate_supports_every_family() {
    for family in [
        "gaussian",
        "gamma",
        "f",
        "t",
        "poisson",
        "equal-width",
        "equal-freq",
    ] {
        let o = treecorr(&[
            "generate", "--rho", "0.3", "--family", family, "--depth", "4",
        ]);
        assert!(
            o.status.success(),
            "{family}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(stdout(&o).lines().count(), 2 + 15, "{family}");
    }
}

#[test]
fn angle_is_narrower_for_the_stronger_correlation() {
    let dir = TempDir::new().unwrap();
    let strong = generate(dir.path(), "strong.tsv", "0.9", "5");
    let weak = generate(dir.path(), "weak.tsv", "0.1", "5");
    let csv = dir.path().join("angle.csv");
    let o = treecorr(&[
        "angle",
        &strong,
        "--no-normalize",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(field(&s, "n"), "127");
    assert_eq!(field(&s, "m"), "121");
    assert_eq!(field(&s, "candidates"), "7");
    let written = std::fs::read_to_string(&csv).unwrap();
    let mut lines = written.lines();
    assert_eq!(lines.next(), Some(ANGLE_CSV_HEADER));
    let strong_rad: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();

    let o = treecorr(&["angle", &weak, "--no-normalize"]);
    let weak_deg: f64 = field(&stdout(&o), "delta_theta")
        .trim_end_matches('°')
        .parse()
        .unwrap();
    assert!(
        strong_rad.to_degrees() < weak_deg,
        "{} vs {weak_deg}",
        strong_rad.to_degrees()
    );

    let o = treecorr(&[
        "analyze",
        &strong,
        &weak,
        "--mimic-reps",
        "20",
        "--mimic-batches",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("P(delta_theta_A > delta_theta_B)"));
    assert!(s.contains("per-generation pearson"));
}

#[test]
fn normalized_angle_skips_the_root_generation() {
    let dir = TempDir::new().unwrap();
    let f = generate(dir.path(), "a.tsv", "0.5", "2");
    let s = stdout(&treecorr(&["angle", &f]));
    assert_eq!(field(&s, "skipped_generations"), "1");
    assert_eq!(field(&s, "n"), "126");
    assert_eq!(treecorr(&["angle", &f, "--strict"]).status.code(), Some(3));
}

#[test]
fn simulate_writes_csv_and_honours_thread_env() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.csv");
    let args = [
        "simulate",
        "--rho",
        "0.1,0.5",
        "--eta",
        "0.2,0.6",
        "--reps",
        "10",
        "--batches",
        "2",
        "--normalize",
    ];
    let o = Command::new(env!("CARGO_BIN_EXE_treecorr"))
        .args(args)
        .args(["--out", one.to_str().unwrap()])
        .env("TREECORR_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&one).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    // (0.5, 0.6) leaves the unit interval and is skipped.
    assert_eq!(lines.count(), 3);

    let many = dir.path().join("many.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_treecorr"))
        .args(args)
        .args(["--out", many.to_str().unwrap()])
        .env("TREECORR_THREADS", "4")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&many).unwrap());

    let table = treecorr(&args);
    assert!(stdout(&table).starts_with("rho"));
    let zero = treecorr(&[
        "simulate",
        "--rho",
        "0.1",
        "--eta",
        "0.2",
        "--reps",
        "5",
        "--batches",
        "1",
        "--threads",
        "0",
    ]);
    assert_eq!(zero.status.code(), Some(2));
}
