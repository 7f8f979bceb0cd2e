//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lfpp::RayonExecutor;
use lfpp_core::estimators::{
    annulus_ratio_check, census_of, central_charge, circle_variance, confluence_samples, estimate_xi_crit, fit_q_many, gamma_from_q,
    thickness_map, AnnulusRatioConfig, ConfluenceConfig, FitConfig, GffSource,
};
use lfpp_core::field::sample_gff;
use lfpp_core::properties::exact_suite;
use lfpp_core::GridSpec;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn exec() -> RayonExecutor {
    RayonExecutor::new(0).expect("thread pool")
}

fn desk_fit_config() -> FitConfig {
    FitConfig {
        grid: GridSpec::new(512, 16.0).unwrap(),
        eps_grid: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        replicas: 50,
        seed: 1,
        resamples: 1000,
    }
}

fn exact_axioms() -> Verdict {
    let start = Instant::now();
    let grid = GridSpec::new(64, 4.0).unwrap();
    let mut violations = 0;
    let mut checked = 0;
    let mut worst_weyl: f64 = 0.0;
    for seed in [1, 2, 3] {
        for r in exact_suite(grid, seed, 0.4, 4.0 * grid.spacing(), 100).unwrap() {
            violations += r.violations;
            checked += r.checked;
            if r.axiom == lfpp_core::properties::Axiom::Weyl {
                worst_weyl = worst_weyl.max(r.worst_error);
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && worst_weyl <= 1e-10 && elapsed < Duration::from_secs(10),
        format!("{checked} checks, {violations} violations, worst Weyl error {worst_weyl:.1e}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn oracles() -> Verdict {
    let start = Instant::now();
    type Case = fn(u64) -> Result<(), String>;
    let cases: [(&str, Case); 5] = [
        ("distance", oracle::distance_case),
        ("internal_distance", oracle::internal_distance_case),
        ("crossing_distance", oracle::crossing_case),
        ("across", oracle::across_case),
        ("around", oracle::around_case),
    ];
    let mut failures = Vec::new();
    for (name, case) in cases {
        for seed in 0..oracle::INSTANCES {
            if let Err(e) = case(seed) {
                failures.push(format!("{name} seed {seed}: {e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = match failures.first() {
        None => format!("5 queries x {} instances exact, {:.1} s", oracle::INSTANCES, elapsed.as_secs_f64()),
        Some(f) => format!("{} mismatches, first: {f}", failures.len()),
    };
    verdict(failures.is_empty() && elapsed < Duration::from_secs(30), detail)
}

fn formulas() -> Verdict {
    let c2 = central_charge(2.0);
    let g2 = gamma_from_q(2.0);
    let c_crit = central_charge(5.0 / 6f64.sqrt());
    verdict(c2 == 1.0 && g2 == Some(2.0) && c_crit.abs() <= 1e-12, format!("c(2) = {c2}, gamma(2) = {g2:?}, c(5/sqrt 6) = {c_crit:.1e}"))
}

/// Criteria 4 and 5 share one campaign: the fit at each xi depends only on
/// that xi's replica table, so a joint run on common fields gives the same
/// fits as separate runs.
fn exponent_and_monotonicity() -> (Verdict, Verdict) {
    let xi_star = 1.0 / 6f64.sqrt();
    let xis = [0.2, 0.4, xi_star, 0.8];
    let fits = fit_q_many(&xis, &desk_fit_config(), &exec()).unwrap();
    let by_xi: BTreeMap<u64, &lfpp_core::estimators::ExponentFit> = fits.iter().map(|f| (f.xi.to_bits(), f)).collect();
    let star = by_xi[&xi_star.to_bits()];
    let c4 = verdict(
        (1.55..=2.55).contains(&star.q_hat),
        format!("Q_hat({:.4}) = {:.4} +- {:.4}, c_M_hat = {:.3}", xi_star, star.q_hat, star.stderr, star.c_m_hat),
    );
    let (a, b, c) = (by_xi[&0.2f64.to_bits()], by_xi[&0.4f64.to_bits()], by_xi[&0.8f64.to_bits()]);
    let gap_ok = |hi: &lfpp_core::estimators::ExponentFit, lo: &lfpp_core::estimators::ExponentFit| {
        hi.q_hat - lo.q_hat >= -2.0 * (hi.stderr.powi(2) + lo.stderr.powi(2)).sqrt()
    };
    let c5 = verdict(
        gap_ok(a, b) && gap_ok(b, c),
        format!(
            "Q_hat(0.2) = {:.3} +- {:.3}, Q_hat(0.4) = {:.3} +- {:.3}, Q_hat(0.8) = {:.3} +- {:.3}",
            a.q_hat, a.stderr, b.q_hat, b.stderr, c.q_hat, c.stderr
        ),
    );
    (c4, c5)
}

fn xi_crit() -> Verdict {
    let res = estimate_xi_crit(&[0.25, 0.35, 0.45, 0.55], &desk_fit_config(), &exec()).unwrap();
    let qs: Vec<String> = res.fits.iter().map(|f| format!("{:.3}", f.q_hat)).collect();
    match res.bracket {
        Some(b) => verdict(
            b.lower <= 0.55 && b.upper >= 0.30,
            format!("bracket [{}, {}], root {:.4}, Q_hat = [{}]", b.lower, b.upper, b.root, qs.join(", ")),
        ),
        None => verdict(false, format!("no crossing of Q = 2, Q_hat = [{}]", qs.join(", "))),
    }
}

fn census() -> Verdict {
    let grid = GridSpec::new(512, 1.0).unwrap();
    let r_min = 2.0 * grid.spacing();
    let seeds: Vec<u64> = (0..50).collect();
    let rows = exec_map(&seeds, |&seed| {
        let h = sample_gff(grid, seed).unwrap();
        let t = thickness_map(&h, r_min, 4).unwrap();
        (census_of(0.4, 1.5, r_min, &t).exceed_count, census_of(0.4, 2.6, r_min, &t).exceed_count)
    });
    let positive = rows.iter().filter(|r| r.0 > 0).count();
    let clean = rows.iter().filter(|r| r.1 == 0).count();
    verdict(
        positive * 10 >= 8 * seeds.len() && clean * 10 >= 9 * seeds.len(),
        format!("thickness > 1.5 somewhere in {positive}/50 seeds, none above 2.6 in {clean}/50 seeds"),
    )
}

fn exec_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use lfpp_core::estimators::ReplicaExecutor;
    exec().map_replicas(items.len(), |k| f(&items[k]))
}

fn variance() -> Verdict {
    let grid = GridSpec::new(512, 16.0).unwrap();
    let fit = circle_variance(grid, &[0.25, 0.5, 1.0, 2.0], 1, 100, &exec()).unwrap();
    verdict((0.85..=1.15).contains(&fit.slope), format!("slope {:.4}, variances {:.3?}", fit.slope, fit.variances))
}

fn annulus_ratio() -> Verdict {
    let grid = GridSpec::new(512, 16.0).unwrap();
    let cfg = AnnulusRatioConfig {
        epsilon: 1.0 / 8.0,
        scale: 8.0,
        deltas: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
        centers: vec![grid.center()],
        replicas: 100,
    };
    let report = annulus_ratio_check(&GffSource { grid, seed: 1 }, 0.4, 0.5, &cfg, &exec()).unwrap();
    let f = &report.violation_fraction;
    let supplemental = report.fractions_at(1.0);
    verdict(f.windows(2).all(|w| w[1] <= w[0]), format!("violation fraction {f:?} at zeta = 0.5 (zeta = 1: {supplemental:?})"))
}

fn confluence() -> Verdict {
    let grid = GridSpec::new(256, 8.0).unwrap();
    let cfg = ConfluenceConfig { epsilon: 4.0 * grid.spacing(), target_radius: 2.0, targets: 16, k: 5, replicas: 50 };
    let fractions = confluence_samples(&GffSource { grid, seed: 1 }, 0.4, 1, &cfg, &exec()).unwrap();
    let positive = fractions.iter().filter(|&&f| f > 0.0).count();
    verdict(positive * 10 >= 9 * fractions.len(), format!("positive in {positive}/{} seeds", fractions.len()))
}

/// Every CLI command, small enough to run in seconds.
const CLI_RUNS: &[&[&str]] = &[
    &["sample-field", "--n", "64", "--seed", "5"],
    &["crossing", "--n", "64", "--L", "8", "--eps", "0.5,1", "--replicas", "6"],
    &["fit-q", "--n", "128", "--xi", "0.4", "--eps", "0.5,0.25,0.125,0.0625", "--replicas", "8", "--resamples", "200"],
    &["xi-crit", "--n", "128", "--xi", "0.2,0.4,0.8", "--eps", "0.5,0.25,0.125,0.0625", "--replicas", "8", "--resamples", "200"],
    &["annulus", "--n", "64", "--r1", "1", "--r2", "2"],
    &["annulus-ratio", "--n", "64", "--scale", "4", "--deltas", "0.25,0.125", "--replicas", "4"],
    &["tightness", "--n", "64", "--radii", "0.5,1,2", "--replicas", "4"],
    &["singular-census", "--n", "64", "--L", "1", "--replicas", "3"],
    &["geodesics", "--n", "64", "--to", "2,2;12,3"],
    &["ball", "--n", "64", "--radius", "2"],
    &["verify", "--suite", "exact", "--n", "64", "--seed", "7"],
    &["verify", "--suite", "statistical", "--n", "64", "--replicas", "6", "--pairs", "10"],
    &["compare", "--n", "64", "--pairs", "20"],
    &["central-charge", "--q", "2"],
    &["confluence", "--n", "64", "--L", "8", "--replicas", "4"],
    &["variance", "--n", "64", "--radii", "0.5,1,2", "--replicas", "10"],
];

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            out.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
        }
    }
    out
}

fn run_cli(args: &[&str], out: &Path, threads: &str) -> (i32, Vec<u8>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lfpp"));
    cmd.args(args).args(["--threads", threads]);
    if args[0] != "central-charge" {
        cmd.arg("--out").arg(out);
    }
    let o = cmd.output().expect("run lfpp");
    (o.status.code().unwrap_or(-1), o.stdout)
}

/// Runs each command three times into the same directory: fresh on one
/// thread, fresh on two threads, and again over the existing files (the
/// resume path). Files and stdout must match byte for byte.
fn reproducibility() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut files = 0;
    for (k, args) in CLI_RUNS.iter().enumerate() {
        let out = root.path().join(format!("run{k}"));
        let (c1, s1) = run_cli(args, &out, "1");
        let first = snapshot(&out);
        let _ = std::fs::remove_dir_all(&out);
        let (c2, s2) = run_cli(args, &out, "2");
        let second = snapshot(&out);
        let (c3, s3) = run_cli(args, &out, "2");
        let third = snapshot(&out);
        let last = String::from_utf8_lossy(&s1).lines().last().unwrap_or("").to_string();
        if c1 != 0 || !last.starts_with("RESULT {") {
            problems.push(format!("{} exited {c1}", args[0]));
        } else if (c1, &s1, &first) != (c2, &s2, &second) || (c1, &s1, &first) != (c3, &s3, &third) {
            problems.push(format!("{} output differs between runs", args[0]));
        }
        if args[0] != "central-charge" && first.is_empty() {
            problems.push(format!("{} wrote no files", args[0]));
        }
        files += first.len();
    }
    let detail = match problems.first() {
        None => format!("{} commands, {files} files identical across 3 runs each", CLI_RUNS.len()),
        Some(p) => format!("{} problems, first: {p}", problems.len()),
    };
    verdict(problems.is_empty(), detail)
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

type Results = Vec<(usize, &'static str, Verdict)>;
type Criterion = (usize, &'static str, fn() -> Verdict);

fn report(results: &mut Results, k: usize, name: &'static str, v: Verdict, secs: f64) {
    println!("{} criterion {k:>2} {name}: {} [{secs:.0} s]", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    results.push((k, name, v));
}

fn main() {
    // Optional comma-separated criterion numbers select a subset.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |k: usize| filter.as_deref().is_none_or(|f| f.split(',').any(|x| x == k.to_string()));
    let mut results = Results::new();
    let single: [Criterion; 3] =
        [(1, "exact axiom suite", exact_axioms), (2, "oracle equivalence", oracles), (3, "formula checks", formulas)];
    for (k, name, f) in single {
        if wanted(k) {
            let t = Instant::now();
            let v = guarded(f);
            report(&mut results, k, name, v, t.elapsed().as_secs_f64());
        }
    }
    if wanted(4) || wanted(5) {
        let t = Instant::now();
        let (c4, c5) = match catch_unwind(exponent_and_monotonicity) {
            Ok(pair) => pair,
            Err(_) => (verdict(false, "panicked".into()), verdict(false, "panicked".into())),
        };
        let secs = t.elapsed().as_secs_f64();
        for (k, name, v) in [(4, "exponent at xi = 1/sqrt 6", c4), (5, "monotonicity in xi", c5)] {
            if wanted(k) {
                report(&mut results, k, name, v, secs);
            }
        }
    }
    let rest: [Criterion; 6] = [
        (6, "xi_crit bracket", xi_crit),
        (7, "thick-point census", census),
        (8, "circle-average variance", variance),
        (9, "annulus ratio trend", annulus_ratio),
        (10, "confluence", confluence),
        (11, "CLI reproducibility", reproducibility),
    ];
    for (k, name, f) in rest {
        if wanted(k) {
            let t = Instant::now();
            let v = guarded(f);
            report(&mut results, k, name, v, t.elapsed().as_secs_f64());
        }
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
