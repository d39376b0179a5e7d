//! The verification suites behind each subcommand.

use anosov_core::asymmetry::{is_asymmetric, is_asymmetric_on};
use anosov_core::exterior::{self, det_small, MetricFrame};
use anosov_core::forms::{canonical_alpha, interior_x_volume, random_field, random_partner, random_point, volume_form};
use anosov_core::l2::{self, OrbitQuadrature};
use anosov_core::livsic::{self, SolverOptions};
use anosov_core::snf::IntMatrix;
use anosov_core::{Error, FormAtom, FormField, IndexSet, Point, Result, Shape, SuspensionFlow, TangentVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{fmt, Check, SuiteReport, Table};

pub const SUITES: [&str; 8] = ["algebra-selftest", "model", "rates", "solve", "adjoint", "orthogonality", "weak-closed", "obstruction"];

fn rng_for(cfg: &RunConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    rng
}

pub fn build_flow(cfg: &RunConfig) -> Result<SuspensionFlow> {
    let rows: Vec<Vec<i64>> = cfg.model.matrix.clone();
    SuspensionFlow::new(&rows, cfg.model.roof)
}

/// Characteristic polynomial `x^m + c_1 x^{m-1} + ... + c_m` by Faddeev–LeVerrier.
pub fn char_poly(a: &[i64], m: usize) -> Vec<f64> {
    let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let mul = |x: &[f64], y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                for j in 0..m {
                    out[i * m + j] += x[i * m + k] * y[k * m + j];
                }
            }
        }
        out
    };
    let mut coeffs = vec![1.0];
    let mut mk = vec![0.0; m * m];
    for k in 1..=m {
        let mut prev = mul(&af, &mk);
        let c_prev = coeffs[k - 1];
        for i in 0..m {
            prev[i * m + i] += c_prev;
        }
        mk = prev;
        let am = mul(&af, &mk);
        let tr: f64 = (0..m).map(|i| am[i * m + i]).sum();
        coeffs.push(-tr / k as f64);
    }
    coeffs
}

/// Largest-modulus real root by Newton from both sides of the Cauchy bound.
pub fn newton_dominant_root(coeffs: &[f64]) -> f64 {
    let eval = |x: f64| {
        let (mut p, mut dp) = (0.0, 0.0);
        for &c in coeffs {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    let bound = 1.0 + coeffs[1..].iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let run = |mut x: f64| {
        for _ in 0..200 {
            let (p, dp) = eval(x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-16 * x.abs() {
                break;
            }
        }
        x
    };
    let (r, l) = (run(bound), run(-bound));
    if r.abs() >= l.abs() {
        r
    } else {
        l
    }
}

pub fn algebra(cfg: &RunConfig) -> SuiteReport {
    let rep = exterior::self_test(cfg.algebra.trials, cfg.seed);
    let tol = rep.tolerance;
    let checks = vec![
        Check::abs_within("star_involution_max_error", rep.star_involution_max_error, tol),
        Check::abs_within("hodge_identity_max_error", rep.hodge_identity_max_error, tol),
        Check::abs_within("dual_form_identity_max_error", rep.dual_form_identity_max_error, tol),
    ];
    SuiteReport::new("algebra-selftest", checks, json!(rep), vec![])
}

fn random_tangent(flow: &SuspensionFlow, rng: &mut ChaCha8Rng, p: &Point) -> TangentVector {
    let torus: Vec<f64> = (0..flow.torus_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    TangentVector::new(p.clone(), &torus, rng.random_range(-1.0..1.0)).expect("dimension matches")
}

fn tangent_det(flow: &SuspensionFlow, p: &Point, t: f64) -> f64 {
    let n = flow.dim();
    let mut mat = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let v = TangentVector::new(p.clone(), &e[..n - 1], e[n - 1]).expect("dimension matches");
        let w = flow.tangent_flow(&v, t).components();
        for i in 0..n {
            mat[i * n + j] = w[i];
        }
    }
    det_small(&mut mat, n)
}

pub fn model(flow: &SuspensionFlow, cfg: &RunConfig) -> Result<SuiteReport> {
    let mut rng = rng_for(cfg, 2);
    let (mut group, mut cocycle) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let p = random_point(flow, &mut rng);
        let t1 = rng.random_range(-10.0..10.0);
        let t2 = rng.random_range(-10.0..10.0);
        group = group.max(flow.distance(&flow.flow(&flow.flow(&p, t1), t2), &flow.flow(&p, t1 + t2)));
        let v = random_tangent(flow, &mut rng, &p);
        let a = flow.tangent_flow(&flow.tangent_flow(&v, t1), t2);
        let b = flow.tangent_flow(&v, t1 + t2);
        let scale = b.components().iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let diff = a.components().iter().zip(b.components()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        cocycle = cocycle.max(diff / scale);
    }
    let mut volume = 0.0f64;
    let p = random_point(flow, &mut rng);
    for i in 0..=40 {
        let t = -20.0 + i as f64;
        volume = volume.max((tangent_det(flow, &p, t).abs() - 1.0).abs());
    }
    let a = flow.automorphism();
    let poly = char_poly(a.matrix(), a.dim());
    let rho = newton_dominant_root(&poly).abs();
    let lambda_star = rho.ln();
    let stable: Vec<f64> = a.log_rates().iter().copied().filter(|l| *l < 0.0).collect();
    // with one real expanding root and unimodular A, equal stable moduli share ln ρ
    let equal_stable = a.unstable_dim() == 1 && stable.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12);
    let nu_star = if equal_stable { lambda_star / stable.len() as f64 } else { stable.iter().map(|l| -l).fold(f64::INFINITY, f64::min) };
    let grid: Vec<f64> = (1..=80).map(|i| i as f64 * 0.5).collect();
    let consts = flow.measure_constants(&grid)?;
    let checks = vec![
        Check::abs_within("group_law_max_distance", group, 1e-10),
        Check::abs_within("tangent_cocycle_max_rel_error", cocycle, 1e-10),
        Check::abs_within("volume_det_max_deviation", volume, 1e-10),
        Check::relative("lambda_hat_vs_ln_rho", consts.lambda, lambda_star, 0.05),
        Check::relative("nu_hat_vs_oracle", consts.nu, nu_star, 0.05),
    ];
    let details = json!({
        "description": flow.describe()?,
        "char_poly": poly,
        "rho_newton": rho,
        "lambda_oracle": lambda_star,
        "nu_oracle": nu_star,
        "nu_oracle_source": if equal_stable { "newton" } else { "eigen" },
        "constants": consts,
    });
    Ok(SuiteReport::new("model", checks, details, vec![]))
}

pub fn rates(flow: &SuspensionFlow, cfg: &RunConfig) -> Result<SuiteReport> {
    let steps = 80;
    let grid: Vec<f64> = (0..=steps).map(|i| cfg.rates.t_max * i as f64 / steps as f64).collect();
    let v = is_asymmetric_on(flow, cfg.rates.samples, cfg.rates.tol, cfg.seed, &grid)?;
    let control = is_asymmetric(&SuspensionFlow::symmetric_control(), 16, cfg.rates.tol, cfg.seed)?;
    let a = flow.automorphism();
    let nu_star = a.log_rates().iter().filter(|l| **l < 0.0).map(|l| -l).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::flag("verdict_asymmetric", v.asymmetric),
        Check::relative("min_nu_vs_contraction_rate", v.min_nu, nu_star, 0.05),
        Check::at_least("worst_case_r2", v.worst_case_r2, 0.999),
        Check::abs_within("bound_violations", v.bound_violations as f64, 0.0),
        Check::flag("symmetric_control_rejected", !control.asymmetric),
    ];
    let mut table = Table::new("series", &["point", "config", "kind", "sides", "nu_hat", "c_hat", "r2"]);
    for s in &v.series {
        table.push(vec![
            s.point.to_string(),
            s.config.to_string(),
            serde_json::to_value(s.kind).expect("enum").as_str().unwrap_or_default().to_string(),
            s.sides.to_string(),
            fmt(s.fit.nu_hat),
            fmt(s.fit.c_hat),
            fmt(s.fit.r2),
        ]);
    }
    let details = json!({
        "samples": cfg.rates.samples,
        "min_nu": v.min_nu,
        "nu_oracle": nu_star,
        "worst": v.worst,
        "worst_case_r2": v.worst_case_r2,
        "bound_violations": v.bound_violations,
        "lower_dim_ok": v.lower_dim_ok,
        "constants": v.constants,
        "solver_rates": v.solver_rates,
        "control": { "asymmetric": control.asymmetric, "min_nu": control.min_nu },
    });
    Ok(SuiteReport::new("rates", checks, details, vec![table]))
}

fn eigen_vector(flow: &SuspensionFlow, p: &Point, i: usize, c: f64) -> TangentVector {
    let mut e = vec![0.0; flow.dim()];
    e[i] = c;
    flow.from_eigen(p.clone(), &e)
}

fn single_atom(flow: &SuspensionFlow, idx: &[usize]) -> Result<FormField> {
    let n = flow.dim();
    let atom = FormAtom::periodic(flow, 1.0, IndexSet::new(n, idx)?, Shape::constant(1.0))?;
    FormField::from_atoms(n, idx.len(), vec![atom])
}

/// Refuses degrees outside `[2, n-2]` before any work is done.
pub fn check_solve_degree(flow: &SuspensionFlow, degree: usize) -> Result<()> {
    if degree < 2 || degree + 2 > flow.dim() {
        return Err(Error::DegreeRefused { degree, reason: "uniqueness not guaranteed; refused in solver mode" });
    }
    Ok(())
}

pub fn solve(flow: &SuspensionFlow, cfg: &RunConfig, oracle_only: bool) -> Result<SuiteReport> {
    let degree = cfg.solver.degree;
    check_solve_degree(flow, degree)?;
    let a = flow.automorphism();
    if oracle_only && (degree != 2 || a.dim() != 3 || a.unstable_dim() != 1) {
        return Err(Error::InvalidArgument("closed-form oracles need degree 2 on a 3-torus model with one expanding direction".into()));
    }
    let verdict = is_asymmetric(flow, cfg.rates.samples.min(32), cfg.rates.tol, cfg.seed)?;
    let rates = verdict.solver_rates;
    let opts = SolverOptions { tol: cfg.solver.tol, horizon_cap: cfg.solver.horizon_cap, ..SolverOptions::default() };
    let tol = cfg.solver.check_tol;
    let n = flow.dim();
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let mut details = serde_json::Map::new();

    if degree == 2 && a.dim() == 3 && a.unstable_dim() == 1 {
        let rho = newton_dominant_root(&char_poly(a.matrix(), 3)).abs();
        let ln_rho = rho.ln();
        let u_ds = single_atom(flow, &[1, n])?;
        let stable_plane = single_atom(flow, &[2, 3])?;
        let mut rng = rng_for(cfg, 4);
        let mut table = Table::new("oracle", &["site", "case", "s0", "value", "oracle", "error", "horizon", "tail_bound"]);
        let (mut worst2, mut worst1) = (0.0f64, 0.0f64);
        for site in 0..cfg.solver.oracle_sites {
            let p = random_point(flow, &mut rng);
            let s0 = p.s();
            let c1 = rng.random_range(0.5..2.0);
            let c2 = rng.random_range(0.5..2.0);
            let vs = [eigen_vector(flow, &p, 0, c1), eigen_vector(flow, &p, n - 1, c2)];
            let r = livsic::solve(flow, &u_ds, &p, &vs, Some(&rates), &opts)?;
            let want = c1 * c2 * rho.powf(s0) / ln_rho;
            worst2 = worst2.max((r.value - want).abs());
            table.push(vec![site.to_string(), "two".into(), fmt(s0), fmt(r.value), fmt(want), fmt((r.value - want).abs()), fmt(r.horizon), fmt(r.tail_bound)]);
            let vs = [eigen_vector(flow, &p, 1, c1), eigen_vector(flow, &p, 2, c2)];
            let r = livsic::solve(flow, &stable_plane, &p, &vs, Some(&rates), &opts)?;
            let want = -c1 * c2 * rho.powf(-s0) / ln_rho;
            worst1 = worst1.max((r.value - want).abs());
            table.push(vec![site.to_string(), "one".into(), fmt(s0), fmt(r.value), fmt(want), fmt((r.value - want).abs()), fmt(r.horizon), fmt(r.tail_bound)]);
        }
        checks.push(Check::abs_within("oracle_case_two_max_error", worst2, tol));
        checks.push(Check::abs_within("oracle_case_one_max_error", worst1, tol));
        tables.push(table);

        // slopes of |η_t - η_∞| against the eigen bookkeeping
        let rates_eig = a.log_rates();
        let expected = [("two", rates_eig[0]), ("one", -(rates_eig[1] + rates_eig[2]))];
        let p = Point::new(&[0.37, 0.11, 0.73], 0.25)?;
        let ts: Vec<f64> = (1..=12).map(|i| 2.0 * i as f64).collect();
        let mut conv = Table::new("convergence", &["case", "t", "eta_t", "gap"]);
        for (case, rate) in expected {
            let (field, vs) = if case == "two" {
                (&u_ds, [eigen_vector(flow, &p, 0, 1.0), eigen_vector(flow, &p, n - 1, 1.0)])
            } else {
                (&stable_plane, [eigen_vector(flow, &p, 1, 1.0), eigen_vector(flow, &p, 2, 1.0)])
            };
            let prof = livsic::convergence_profile(flow, field, &p, &vs, &ts, &rates)?;
            for c in &prof.points {
                conv.push(vec![case.into(), fmt(c.t), fmt(c.eta_t), fmt(c.gap)]);
            }
            let slope = prof.slope.unwrap_or(f64::NAN);
            checks.push(Check::relative(format!("convergence_slope_case_{case}"), -slope, rate, 0.02));
            details.insert(format!("convergence_case_{case}"), json!({ "slope": slope, "expected_rate": rate }));
        }
        tables.push(conv);
        details.insert("rho_newton".into(), json!(rho));
    }

    if !oracle_only {
        let mut rng = rng_for(cfg, 5);
        let eta0 = random_field(flow, &mut rng, degree, 3);
        let xi = eta0.lie_derivative_field()?;
        let mut table = Table::new("manufactured", &["site", "value", "exact", "error", "horizon"]);
        let mut worst = 0.0f64;
        for site in 0..cfg.solver.manufactured_sites {
            let p = random_point(flow, &mut rng);
            let vs: Vec<TangentVector> = (0..degree)
                .map(|_| {
                    let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    flow.from_eigen(p.clone(), &e)
                })
                .collect();
            let r = livsic::solve(flow, &xi, &p, &vs, Some(&rates), &opts)?;
            let exact = eta0.evaluate(flow, &p, &vs)?;
            worst = worst.max((r.value - exact).abs());
            table.push(vec![site.to_string(), fmt(r.value), fmt(exact), fmt((r.value - exact).abs()), fmt(r.horizon)]);
        }
        checks.push(Check::abs_within("manufactured_max_error", worst, tol));
        tables.push(table);
        details.insert("manufactured_eta0".into(), json!(eta0.atoms()));

        let tight = SolverOptions { tol: 1e-11, ..opts };
        let mut table = Table::new("residual", &["site", "t", "residual"]);
        let mut worst = 0.0f64;
        for site in 0..cfg.solver.residual_sites {
            let p = random_point(flow, &mut rng);
            let vs: Vec<TangentVector> = (0..degree)
                .map(|_| {
                    let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    flow.from_eigen(p.clone(), &e)
                })
                .collect();
            for t in [1.0, 4.0, 8.0] {
                let res = livsic::residual_identity(flow, &xi, &p, &vs, t, anosov_core::tolerances::FD_STEP, &tight)?;
                worst = worst.max(res);
                table.push(vec![site.to_string(), fmt(t), fmt(res)]);
            }
        }
        checks.push(Check::abs_within("residual_identity_max", worst, tol));
        tables.push(table);
    }

    let p = Point::new(&vec![0.5; a.dim()], 0.5)?;
    let x = eigen_vector(flow, &p, n - 1, 1.0);
    let refused = matches!(
        livsic::solve(flow, &canonical_alpha(flow), &p, &[x], Some(&rates), &opts),
        Err(Error::DegreeRefused { degree: 1, .. })
    );
    checks.push(Check::flag("degree_one_refused", refused));
    details.insert("solver_rates".into(), json!(rates));
    details.insert("options".into(), json!(opts));
    Ok(SuiteReport::new("solve", checks, serde_json::Value::Object(details), tables))
}

fn replica_row(table: &mut Table, item: &str, est: &anosov_core::Estimate) {
    for (i, r) in est.replicas.iter().enumerate() {
        table.push(vec![item.to_string(), i.to_string(), fmt(*r)]);
    }
}

pub fn adjoint(flow: &SuspensionFlow, cfg: &RunConfig) -> Result<SuiteReport> {
    let spec = cfg.quadrature_spec();
    let metric = flow.anosov_metric();
    let mut checks = Vec::new();
    let mut replicas = Table::new("replicas", &["item", "replica", "value"]);
    for (name, field) in [("alpha", canonical_alpha(flow)), ("volume", volume_form(flow))] {
        let e = l2::l2_inner(flow, &field, &field, &metric, &spec)?;
        checks.push(Check::three_sigma(format!("norm_{name}"), &e, 1.0));
        checks.push(Check::abs_within(format!("norm_{name}_sigma"), e.sigma, 1e-3));
        replica_row(&mut replicas, &format!("norm_{name}"), &e);
    }
    let star = l2::star_alpha_identity(flow, 1000, anosov_core::tolerances::EXACT_ALGEBRA, cfg.seed);
    checks.push(Check::abs_within("star_interior_volume_deviation", star.max_deviation, star.tol));
    checks.push(Check::abs_within("interior_x_nilpotence", star.max_nilpotence, star.tol));
    let n = flow.dim();
    let mut stretched = vec![1.0; n];
    stretched[n - 1] = 4.0;
    let control = l2::star_alpha_identity_with(flow, |_| MetricFrame::diagonal_metric(&stretched).expect("positive"), 100, star.tol, cfg.seed);
    checks.push(Check::at_least("non_anosov_metric_deviation", control.max_deviation, 1e-6));

    let mut rng = rng_for(cfg, 6);
    let mut table = Table::new("pairs", &["degree", "pair", "lhs", "rhs", "residual", "sigma", "pass"]);
    for k in 1..n {
        let mut worst_ratio = 0.0f64;
        let mut all = true;
        for pair in 0..cfg.quadrature.pairs {
            let xi = random_field(flow, &mut rng, k, 3);
            let eta = random_partner(flow, &mut rng, &xi)?;
            let rep = l2::adjoint_residual(flow, &xi, &eta, &spec)?;
            all &= rep.pass;
            let band = 3.0 * rep.residual.sigma + anosov_core::tolerances::SIGMA_FLOOR;
            worst_ratio = worst_ratio.max(rep.residual.value.abs() / band);
            table.push(vec![
                k.to_string(),
                pair.to_string(),
                fmt(rep.lhs.value),
                fmt(rep.rhs.value),
                fmt(rep.residual.value),
                fmt(rep.residual.sigma),
                rep.pass.to_string(),
            ]);
            replica_row(&mut replicas, &format!("adjoint_k{k}_p{pair}"), &rep.residual);
        }
        let mut c = Check::abs_within(format!("adjoint_degree_{k}_worst_residual_over_3sigma"), worst_ratio, 1.0);
        c.pass &= all;
        checks.push(c);
    }
    let details = json!({ "quadrature": spec, "star_identity": star, "non_anosov_control": control });
    Ok(SuiteReport::new("adjoint", checks, details, vec![table, replicas]))
}

pub fn orthogonality(flow: &SuspensionFlow, cfg: &RunConfig) -> Result<SuiteReport> {
    let spec = cfg.quadrature_spec();
    let n = flow.dim();
    let mut checks = Vec::new();
    let mut table = Table::new("theta", &["theta", "procedural", "value", "sigma", "pass"]);
    let mut replicas = Table::new("replicas", &["item", "replica", "value"]);
    let own = l2::orthogonality_check(flow, &interior_x_volume(flow), &spec)?;
    checks.push(Check::abs_within("interior_volume_itself", own.value.value, 0.0));
    let mut rng = rng_for(cfg, 7);
    let mut worst_ratio = 0.0f64;
    let mut all = true;
    for i in 0..cfg.quadrature.pairs {
        let atoms = random_field(flow, &mut rng, n - 1, 3);
        let procedural = i % 4 == 3;
        let theta = if procedural { atoms.as_procedural() } else { atoms };
        let rep = l2::orthogonality_check(flow, &theta, &spec)?;
        all &= rep.pass;
        worst_ratio = worst_ratio.max(rep.value.value.abs() / (3.0 * rep.value.sigma + anosov_core::tolerances::SIGMA_FLOOR));
        table.push(vec![i.to_string(), procedural.to_string(), fmt(rep.value.value), fmt(rep.value.sigma), rep.pass.to_string()]);
        replica_row(&mut replicas, &format!("theta_{i}"), &rep.value);
    }
    let mut c = Check::abs_within("worst_inner_over_3sigma", worst_ratio, 1.0);
    c.pass &= all;
    checks.push(c);
    Ok(SuiteReport::new("orthogonality", checks, json!({ "quadrature": spec }), vec![table, replicas]))
}

pub fn weak_closed(flow: &SuspensionFlow, cfg: &RunConfig) -> Result<SuiteReport> {
    let spec = cfg.quadrature_spec();
    let n = flow.dim();
    let mut rng = rng_for(cfg, 8);
    let mut table = Table::new("omega", &["omega", "direct", "direct_sigma", "via_star", "via_star_sigma", "pass"]);
    let mut replicas = Table::new("replicas", &["item", "replica", "value"]);
    let (mut worst_direct, mut worst_star, mut worst_gap, mut d_alpha) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut all = true;
    for i in 0..cfg.quadrature.pairs {
        let omega = random_field(flow, &mut rng, n - 2, 3);
        let rep = l2::weak_closedness(flow, &omega, &spec)?;
        all &= rep.pass;
        let floor = anosov_core::tolerances::SIGMA_FLOOR;
        worst_direct = worst_direct.max(rep.direct.value.abs() / (3.0 * rep.direct.sigma + floor));
        worst_star = worst_star.max(rep.via_star.value.abs() / (3.0 * rep.via_star.sigma + floor));
        worst_gap = worst_gap
            .max((rep.direct.value - rep.via_star.value).abs() / (3.0 * (rep.direct.sigma + rep.via_star.sigma) + floor));
        d_alpha = d_alpha.max(rep.d_alpha);
        table.push(vec![
            i.to_string(),
            fmt(rep.direct.value),
            fmt(rep.direct.sigma),
            fmt(rep.via_star.value),
            fmt(rep.via_star.sigma),
            rep.pass.to_string(),
        ]);
        replica_row(&mut replicas, &format!("omega_{i}_direct"), &rep.direct);
    }
    let mut checks = vec![
        Check::abs_within("worst_direct_over_3sigma", worst_direct, 1.0),
        Check::abs_within("worst_via_star_over_3sigma", worst_star, 1.0),
        Check::abs_within("worst_path_gap_over_3sigma", worst_gap, 1.0),
        Check::abs_within("d_alpha_max", d_alpha, anosov_core::tolerances::EXACT_ALGEBRA),
    ];
    checks.push(Check::flag("all_reports_pass", all));
    Ok(SuiteReport::new("weak-closed", checks, json!({ "quadrature": spec }), vec![table, replicas]))
}

/// Counts `k ∈ (Z/D)^m` with `A^p k ≡ k (mod D)`; `None` when `D^m` exceeds `limit`.
pub fn brute_force_fixed_points(a: &[i64], m: usize, p: u32, limit: u64) -> Result<Option<u64>> {
    let int = IntMatrix::new(m, a.iter().map(|&v| v as i128).collect());
    let ap = int.checked_pow(p)?;
    let d = ap.minus_identity()?.det()?.unsigned_abs();
    if d == 0 {
        return Err(Error::InvalidModel("A^p - I is singular".into()));
    }
    let total = (d as f64).powi(m as i32);
    if total > limit as f64 {
        return Ok(None);
    }
    let d = d as i128;
    let mut count = 0u64;
    let mut k = vec![0i128; m];
    loop {
        let fixed = (0..m).all(|i| {
            let s: i128 = (0..m).map(|j| ap.get(i, j) * k[j]).sum();
            (s - k[i]).rem_euclid(d) == 0
        });
        count += fixed as u64;
        let mut pos = 0;
        loop {
            if pos == m {
                return Ok(Some(count));
            }
            k[pos] += 1;
            if k[pos] < d {
                break;
            }
            k[pos] = 0;
            pos += 1;
        }
    }
}

pub fn obstruction(flow: &SuspensionFlow, cfg: &RunConfig) -> Result<SuiteReport> {
    let a = flow.automorphism();
    let m = a.dim();
    let n = flow.dim();
    let quad = OrbitQuadrature::default();
    let tol = cfg.obstruction.tol;
    let mut rng = rng_for(cfg, 9);
    let xi = random_field(flow, &mut rng, 1, 4);
    let lie_xi = xi.lie_derivative_field()?;
    let psi_atom = FormAtom::periodic(flow, 1.0, IndexSet::EMPTY, Shape::Fourier { a0: 0.3, cos: vec![1.0], sin: vec![0.4] })?;
    let x_psi = FormField::from_atoms(n, 0, vec![psi_atom])?.lie_derivative_field()?;
    let alpha = canonical_alpha(flow);
    let mut checks = Vec::new();
    let mut counts = Table::new("counts", &["period", "enumerated", "det", "brute_force"]);
    let mut orbits = Table::new("orbits", &["period", "numerators", "denominator", "alpha", "lie_xi", "x_psi"]);
    let (mut worst_alpha, mut worst_lie, mut worst_psi) = (0.0f64, 0.0f64, 0.0f64);
    let mut counts_ok = true;
    for p in 1..=cfg.obstruction.max_period {
        let points = flow.periodic_points(p)?;
        let det = IntMatrix::new(m, a.matrix().iter().map(|&v| v as i128).collect()).checked_pow(p)?.minus_identity()?.det()?.unsigned_abs();
        let brute = brute_force_fixed_points(a.matrix(), m, p, cfg.obstruction.brute_force_limit)?;
        counts_ok &= points.len() as u128 == det && brute.is_none_or(|b| b as u128 == det);
        counts.push(vec![p.to_string(), points.len().to_string(), det.to_string(), brute.map_or("skipped".into(), |b| b.to_string())]);
        for orbit in &points {
            let ia = l2::orbit_obstruction(flow, &alpha, orbit, &quad)?;
            let il = l2::orbit_obstruction(flow, &lie_xi, orbit, &quad)?;
            let ip = l2::orbit_obstruction(flow, &x_psi, orbit, &quad)?;
            worst_alpha = worst_alpha.max((ia.value - p as f64).abs());
            worst_lie = worst_lie.max(il.value.abs());
            worst_psi = worst_psi.max(ip.value.abs());
            let nums: Vec<String> = orbit.numerators.iter().map(|v| v.to_string()).collect();
            orbits.push(vec![p.to_string(), nums.join(" "), orbit.denominator.to_string(), fmt(ia.value), fmt(il.value), fmt(ip.value)]);
        }
    }
    checks.push(Check::flag("orbit_counts_match_det", counts_ok));
    checks.push(Check::abs_within("alpha_minus_period_max", worst_alpha, tol));
    checks.push(Check::abs_within("lie_derivative_integral_max", worst_lie, tol));
    checks.push(Check::abs_within("x_psi_integral_max", worst_psi, tol));
    let details = json!({ "xi": xi.atoms(), "quadrature": quad, "max_period": cfg.obstruction.max_period });
    Ok(SuiteReport::new("obstruction", checks, details, vec![counts, orbits]))
}

/// Runs the named suite; `all` runs every suite in order.
pub fn run(command: &str, flow: &SuspensionFlow, cfg: &RunConfig, oracle_only: bool) -> Result<Vec<SuiteReport>> {
    Ok(match command {
        "algebra-selftest" => vec![algebra(cfg)],
        "model" => vec![model(flow, cfg)?],
        "rates" => vec![rates(flow, cfg)?],
        "solve" => vec![solve(flow, cfg, oracle_only)?],
        "adjoint" => vec![adjoint(flow, cfg)?],
        "orthogonality" => vec![orthogonality(flow, cfg)?],
        "weak-closed" => vec![weak_closed(flow, cfg)?],
        "obstruction" => vec![obstruction(flow, cfg)?],
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run(s, flow, cfg, false)?);
            }
            out
        }
        other => return Err(Error::InvalidArgument(format!("unknown subcommand `{other}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_on_default_polynomial() {
        let poly = char_poly(&[0, 1, 0, 0, 0, 1, 1, 1, 0], 3);
        assert_eq!(poly, vec![1.0, 0.0, -1.0, -1.0]);
        let rho = newton_dominant_root(&poly);
        assert!((rho.powi(3) - rho - 1.0).abs() < 1e-14);
        assert!((rho - 1.324_717_957_244_746).abs() < 1e-14);
    }

    #[test]
    fn newton_negative_dominant_root() {
        // -A for the cat map: eigenvalues -(3±√5)/2
        let poly = char_poly(&[-2, -1, -1, -1], 2);
        let r = newton_dominant_root(&poly);
        assert!((r + (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_counts_cat_map() {
        // |det(C^p - I)| = L_{2p} - 2 for the cat map
        let c = [2, 1, 1, 1];
        for (p, want) in [(1u32, 1u64), (2, 5), (3, 16), (4, 45)] {
            assert_eq!(brute_force_fixed_points(&c, 2, p, 1 << 20).unwrap(), Some(want));
        }
        assert_eq!(brute_force_fixed_points(&c, 2, 4, 10).unwrap(), None);
    }

    #[test]
    fn solve_degree_guard() {
        let f = SuspensionFlow::default_model();
        assert!(check_solve_degree(&f, 2).is_ok());
        for k in [0, 1, 3, 4] {
            assert!(matches!(check_solve_degree(&f, k), Err(Error::DegreeRefused { .. })));
        }
    }
}
