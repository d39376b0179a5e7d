//! Acceptance gate: seven criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use anosov_cli::suites::{self, char_poly};
use anosov_cli::{RunConfig, SuiteReport};
use anosov_core::SuspensionFlow;

struct Outcome {
    id: u8,
    title: &'static str,
    pass: bool,
    summary: String,
    elapsed: Duration,
    limit: Duration,
}

fn check_line(r: &SuiteReport) -> String {
    r.checks
        .iter()
        .map(|c| format!("{}={:.3e}/{:e}{}", c.name, c.value, c.tolerance, if c.pass { "" } else { "!" }))
        .collect::<Vec<_>>()
        .join(" ")
}

fn timed<F: FnOnce() -> (bool, String)>(id: u8, title: &'static str, limit_s: u64, f: F) -> Outcome {
    let start = Instant::now();
    let (pass, summary) = f();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_s);
    Outcome { id, title, pass: pass && elapsed <= limit, summary, elapsed, limit }
}

fn suite_outcome(r: anosov_core::Result<SuiteReport>) -> (bool, String) {
    match r {
        Ok(r) => (r.pass, check_line(&r)),
        Err(e) => (false, format!("error: {e}")),
    }
}

fn criterion_1(cfg: &RunConfig) -> Outcome {
    timed(1, "exterior algebra identities, 1000 trials, n <= 6, tol 1e-12", 5, || {
        let r = suites::algebra(cfg);
        let trials = r.details["trials"].as_u64() == Some(1000);
        (r.pass && trials, check_line(&r))
    })
}

fn criterion_2(flow: &SuspensionFlow, cfg: &RunConfig) -> Outcome {
    timed(2, "model: group law, cocycle, volume to 1e-10; rates within 5%", 30, || {
        let poly = char_poly(flow.automorphism().matrix(), 3);
        if poly != [1.0, 0.0, -1.0, -1.0] {
            return (false, format!("unexpected characteristic polynomial {poly:?}"));
        }
        suite_outcome(suites::model(flow, cfg))
    })
}

fn criterion_3(flow: &SuspensionFlow, cfg: &RunConfig) -> Outcome {
    timed(3, "asymmetry: verdict, min nu >= 0.13, r2 >= 0.999, bound on 100 samples, control false", 60, || {
        match suites::rates(flow, cfg) {
            Ok(r) => {
                let min_nu = r.details["min_nu"].as_f64().unwrap_or(f64::NAN);
                let ok = r.pass && min_nu >= 0.13 && cfg.rates.samples == 100;
                (ok, format!("min_nu={min_nu:.6} {}", check_line(&r)))
            }
            Err(e) => (false, format!("error: {e}")),
        }
    })
}

fn criterion_4(flow: &SuspensionFlow, cfg: &RunConfig) -> Outcome {
    timed(4, "Livsic: oracles at 50 sites, manufactured at 100, residual, slopes within 2%", 300, || {
        let ok_sizes = cfg.solver.oracle_sites == 50 && cfg.solver.manufactured_sites == 100 && cfg.solver.check_tol == 1e-6;
        let (pass, line) = suite_outcome(suites::solve(flow, cfg, false));
        (pass && ok_sizes, line)
    })
}

fn criterion_5(flow: &SuspensionFlow, cfg: &RunConfig) -> Outcome {
    timed(5, "L2: unit norms, adjoint k=1..3, orthogonality, weak closedness within 3 sigma", 300, || {
        let ok_sizes = cfg.quadrature.pairs == 20 && cfg.quadrature.points >= 1 << 16;
        let mut pass = ok_sizes;
        let mut lines = Vec::new();
        for r in [suites::adjoint(flow, cfg), suites::orthogonality(flow, cfg), suites::weak_closed(flow, cfg)] {
            let (p, l) = suite_outcome(r);
            pass &= p;
            lines.push(l);
        }
        (pass, lines.join(" "))
    })
}

fn criterion_6(flow: &SuspensionFlow, cfg: &RunConfig) -> Outcome {
    timed(6, "orbit integrals for p <= 4, counts vs brute force, tol 1e-10", 30, || {
        match suites::obstruction(flow, cfg) {
            Ok(r) => {
                let brute_done = r.tables[0].rows.iter().all(|row| row[3] != "skipped");
                (r.pass && brute_done && cfg.obstruction.max_period == 4, check_line(&r))
            }
            Err(e) => (false, format!("error: {e}")),
        }
    })
}

const SMALL_CONFIG: &str = "\
[run]
seed = 11

[algebra]
trials = 200

[rates]
samples = 12

[solver]
oracle_sites = 4
manufactured_sites = 4
residual_sites = 1

[quadrature]
points = 4099
pairs = 2

[obstruction]
max_period = 3
";

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("output directory exists") {
        let path = entry.expect("readable entry").path();
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).expect("readable file"));
    }
    out
}

fn criterion_7() -> Outcome {
    timed(7, "determinism: `all` twice with one config gives bit-identical reports", 600, || {
        let tmp = tempfile::tempdir().expect("temporary directory");
        let cfg_path = tmp.path().join("run.cfg");
        let out = tmp.path().join("out");
        std::fs::write(&cfg_path, format!("{SMALL_CONFIG}\n[output]\ndir = {}\n", out.display())).expect("write config");
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_anosov"))
                .args(["--quiet", "--config"])
                .arg(&cfg_path)
                .arg("all")
                .status()
                .expect("binary runs")
        };
        let first = run();
        let a = snapshot(&out);
        std::fs::remove_dir_all(&out).expect("clear outputs");
        let second = run();
        let b = snapshot(&out);
        let identical = a == b && !a.is_empty();
        let ok = first.success() && second.success() && identical;
        (ok, format!("files={} identical={identical} exit=({:?},{:?})", a.len(), first.code(), second.code()))
    })
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let cfg = RunConfig::default();
    let flow = SuspensionFlow::default_model();
    let outcomes = vec![
        criterion_1(&cfg),
        criterion_2(&flow, &cfg),
        criterion_3(&flow, &cfg),
        criterion_4(&flow, &cfg),
        criterion_5(&flow, &cfg),
        criterion_6(&flow, &cfg),
        criterion_7(),
    ];
    println!();
    for o in &outcomes {
        println!(
            "criterion {} {}: {} [{:.1} s / limit {} s] {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.title,
            o.elapsed.as_secs_f64(),
            o.limit.as_secs(),
            o.summary
        );
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
