//! L² pairings of forms over the fundamental domain and the integral
//! identities built on them.
//!
//! Points of `[0,1)^n` are read as `(x, s)` with `x ∈ T^m`; the volume of the
//! Anosov metric equals `Ω`, so every integral is a plain cube average.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{self, AltForm, IndexSet, MetricFrame};
use crate::forms::{canonical_alpha, interior_x_volume, FormField, LieMode};
use crate::livsic::orbit_breakpoints;
use crate::model::{AnosovMetric, PeriodicPoint, Point, SuspensionFlow};
use crate::quadrature::{integrate_refined, integrate_unit_cube, Estimate, GaussLegendre, QuadratureSpec};
use crate::tolerances;

/// `⟨a, b⟩_g` at height `s` for the diagonal Anosov metric.
pub fn anosov_inner(a: &AltForm, b: &AltForm, metric: &AnosovMetric, s: f64) -> f64 {
    let rates = metric.log_rates();
    let mut total = 0.0;
    for &(idx, c) in a.terms() {
        let d = b.coeff(idx);
        if d != 0.0 {
            let w: f64 = idx.indices().map(|i| rates[i - 1]).sum();
            total += c * d * (-2.0 * w * s).exp();
        }
    }
    total
}

fn split_point(u: &[f64], m: usize) -> (&[f64], f64) {
    (&u[..m], u[m])
}

fn check_pair(a: &FormField, b: &FormField) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if a.degree() != b.degree() {
        return Err(Error::DegreeMismatch { left: a.degree(), right: b.degree() });
    }
    Ok(())
}

fn require_glued(flow: &SuspensionFlow, f: &FormField) -> Result<()> {
    if f.is_analytic() {
        return Ok(());
    }
    let rep = f.gluing_check(flow, 64, 1e-8, 0x91ce);
    if rep.pass {
        Ok(())
    } else {
        Err(Error::GluingFailed { residual: rep.residual })
    }
}

/// `⟨ω, η⟩_g = ∫_M ω ∧ ⋆_g η` with a replica error bar.
pub fn l2_inner(flow: &SuspensionFlow, omega: &FormField, eta: &FormField, metric: &AnosovMetric, spec: &QuadratureSpec) -> Result<Estimate> {
    check_pair(omega, eta)?;
    if metric.dim() != flow.dim() {
        return Err(Error::DimensionMismatch { expected: flow.dim(), got: metric.dim() });
    }
    require_glued(flow, omega)?;
    require_glued(flow, eta)?;
    let m = flow.torus_dim();
    let mut out = integrate_unit_cube(spec, flow.dim(), 1, |u, o| {
        let (x, s) = split_point(u, m);
        o[0] = anosov_inner(&omega.form_at_coords(x, s), &eta.form_at_coords(x, s), metric, s);
    })?;
    Ok(out.remove(0))
}

/// Pointwise `L_X` of a field: analytic for atoms, Richardson differences otherwise.
enum LieOf<'a> {
    Analytic(FormField),
    Numeric(&'a FormField),
}

impl<'a> LieOf<'a> {
    fn new(f: &'a FormField) -> Self {
        match f.lie_derivative_field() {
            Ok(l) => LieOf::Analytic(l),
            Err(_) => LieOf::Numeric(f),
        }
    }

    fn at(&self, flow: &SuspensionFlow, x: &[f64], s: f64) -> (AltForm, f64) {
        match self {
            LieOf::Analytic(l) => (l.form_at_coords(x, s), 0.0),
            LieOf::Numeric(f) => {
                let p = Point::new(x, s).expect("cube point");
                f.lie_form(flow, &p, LieMode::Richardson { h: tolerances::FD_STEP }).expect("positive step")
            }
        }
    }
}

/// Both sides of the adjoint identity and their difference.
#[derive(Clone, Debug, Serialize)]
pub struct AdjointReport {
    pub degree: usize,
    pub sign: f64,
    /// `⟨L_X ξ, η⟩`.
    pub lhs: Estimate,
    /// `sign · ⟨ξ, ⋆ L_X ⋆ η⟩`.
    pub rhs: Estimate,
    /// `lhs - rhs`, estimated replica by replica.
    pub residual: Estimate,
    /// Mean finite-difference error bound, already folded into `residual.sigma`.
    pub fd_error: f64,
    pub pass: bool,
}

/// `|⟨L_X ξ, η⟩ - (-1)^{k(n-k)+1} ⟨ξ, ⋆ L_X ⋆ η⟩|` with propagated error.
pub fn adjoint_residual(flow: &SuspensionFlow, xi: &FormField, eta: &FormField, spec: &QuadratureSpec) -> Result<AdjointReport> {
    check_pair(xi, eta)?;
    require_glued(flow, xi)?;
    require_glued(flow, eta)?;
    let n = flow.dim();
    let k = xi.degree();
    let sign = if (k * (n - k) + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let metric = flow.anosov_metric();
    let m = flow.torus_dim();
    let star_eta = eta.hodge_star(flow);
    let lie_xi = LieOf::new(xi);
    let lie_star_eta = LieOf::new(&star_eta);
    let est = integrate_unit_cube(spec, n, 4, |u, o| {
        let (x, s) = split_point(u, m);
        let xi_here = xi.form_at_coords(x, s);
        let eta_here = eta.form_at_coords(x, s);
        let (lx, e1) = lie_xi.at(flow, x, s);
        let (ls, e2) = lie_star_eta.at(flow, x, s);
        let back = exterior::hodge_star(&ls, &metric.frame_at(s)).expect("dimensions agree");
        let l = anosov_inner(&lx, &eta_here, &metric, s);
        let r = sign * anosov_inner(&xi_here, &back, &metric, s);
        o[0] = l;
        o[1] = r;
        o[2] = l - r;
        // coefficient-wise bound, crude but linear in the FD error
        o[3] = e1 * coeff_sum(&eta_here, &metric, s) + e2 * coeff_sum(&xi_here, &metric, s) * star_gain(&metric, s);
    })?;
    let mut it = est.into_iter();
    let (lhs, rhs, mut residual, fd) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    let fd_error = fd.value.abs();
    residual.sigma += fd_error;
    let pass = residual.within_3sigma(0.0);
    Ok(AdjointReport { degree: k, sign, lhs, rhs, residual, fd_error, pass })
}

fn coeff_sum(a: &AltForm, metric: &AnosovMetric, s: f64) -> f64 {
    let rates = metric.log_rates();
    a.terms()
        .iter()
        .map(|&(idx, c)| c.abs() * (-2.0 * idx.indices().map(|i| rates[i - 1]).sum::<f64>() * s).exp())
        .sum()
}

fn star_gain(metric: &AnosovMetric, s: f64) -> f64 {
    metric.log_rates().iter().map(|l| (2.0 * l.abs() * s).exp()).product()
}

/// `⟨L_X Θ, i_X Ω⟩_g` for an `(n-1)`-form `Θ`.
#[derive(Clone, Debug, Serialize)]
pub struct OrthogonalityReport {
    pub value: Estimate,
    pub fd_error: f64,
    pub pass: bool,
}

pub fn orthogonality_check(flow: &SuspensionFlow, theta: &FormField, spec: &QuadratureSpec) -> Result<OrthogonalityReport> {
    let n = flow.dim();
    if theta.degree() + 1 != n {
        return Err(Error::DegreeMismatch { left: theta.degree(), right: n - 1 });
    }
    require_glued(flow, theta)?;
    let metric = flow.anosov_metric();
    let ixo = interior_x_volume(flow);
    let lie = LieOf::new(theta);
    let m = flow.torus_dim();
    let est = integrate_unit_cube(spec, n, 2, |u, o| {
        let (x, s) = split_point(u, m);
        let (l, e) = lie.at(flow, x, s);
        let target = ixo.form_at_coords(x, s);
        o[0] = anosov_inner(&l, &target, &metric, s);
        o[1] = e;
    })?;
    let mut it = est.into_iter();
    let (mut value, fd) = (it.next().unwrap(), it.next().unwrap());
    let fd_error = fd.value.abs();
    value.sigma += fd_error;
    let pass = value.within_3sigma(0.0);
    Ok(OrthogonalityReport { value, fd_error, pass })
}

/// `∫_M dω ∧ α`, computed directly and through `(-1)^{n-1} ⟨dω, ⋆α⟩_g`.
#[derive(Clone, Debug, Serialize)]
pub struct WeakClosednessReport {
    pub direct: Estimate,
    pub via_star: Estimate,
    /// `max |dα|` over the sample points; zero for `α = ds`.
    pub d_alpha: f64,
    pub paths_agree: bool,
    pub pass: bool,
}

pub fn weak_closedness(flow: &SuspensionFlow, omega: &FormField, spec: &QuadratureSpec) -> Result<WeakClosednessReport> {
    let n = flow.dim();
    if omega.degree() + 2 != n {
        return Err(Error::DegreeMismatch { left: omega.degree(), right: n - 2 });
    }
    let d_omega = omega.exterior_derivative(flow)?;
    let alpha = canonical_alpha(flow);
    let star_alpha = alpha.hodge_star(flow);
    let d_alpha = alpha.exterior_derivative(flow)?;
    let metric = flow.anosov_metric();
    let sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let full = IndexSet::full(n);
    let m = flow.torus_dim();
    let est = integrate_unit_cube(spec, n, 3, |u, o| {
        let (x, s) = split_point(u, m);
        let dw = d_omega.form_at_coords(x, s);
        o[0] = dw.wedge(&alpha.form_at_coords(x, s)).expect("degrees add to n").coeff(full);
        o[1] = sign * anosov_inner(&dw, &star_alpha.form_at_coords(x, s), &metric, s);
        o[2] = d_alpha.form_at_coords(x, s).max_abs();
    })?;
    let mut it = est.into_iter();
    let (direct, via_star, da) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    let d_alpha = da.replicas.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let paths_agree = (direct.value - via_star.value).abs() <= 3.0 * (direct.sigma + via_star.sigma) + tolerances::SIGMA_FLOOR;
    let pass = direct.within_3sigma(0.0) && via_star.within_3sigma(0.0) && paths_agree && d_alpha <= tolerances::EXACT_ALGEBRA;
    Ok(WeakClosednessReport { direct, via_star, d_alpha, paths_agree, pass })
}

/// Pointwise check of `⋆_g (i_X Ω) = (-1)^{n-1} α` and `i_X i_X Ω = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct StarAlphaReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub max_nilpotence: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn star_alpha_identity(flow: &SuspensionFlow, samples: usize, tol: f64, seed: u64) -> StarAlphaReport {
    let metric = flow.anosov_metric();
    star_alpha_identity_with(flow, |s| metric.frame_at(s), samples, tol, seed)
}

/// [`star_alpha_identity`] for an arbitrary metric given in the eigen frame.
pub fn star_alpha_identity_with<G>(flow: &SuspensionFlow, frame: G, samples: usize, tol: f64, seed: u64) -> StarAlphaReport
where
    G: Fn(f64) -> MetricFrame,
{
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = flow.dim();
    let ixo = interior_x_volume(flow);
    let alpha = canonical_alpha(flow);
    let ixixo = ixo.interior_x().expect("degree n - 1");
    let sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut max_deviation = 0.0f64;
    let mut max_nilpotence = 0.0f64;
    for _ in 0..samples.max(1) {
        let x: Vec<f64> = (0..flow.torus_dim()).map(|_| rng.random::<f64>()).collect();
        let s: f64 = rng.random();
        let star = exterior::hodge_star(&ixo.form_at_coords(&x, s), &frame(s)).expect("dimensions agree");
        let want = alpha.form_at_coords(&x, s).scaled(sign);
        max_deviation = max_deviation.max(star.max_abs_diff(&want));
        max_nilpotence = max_nilpotence.max(ixixo.form_at_coords(&x, s).max_abs());
    }
    StarAlphaReport {
        samples: samples.max(1),
        max_deviation,
        max_nilpotence,
        tol,
        pass: max_deviation <= tol && max_nilpotence <= tol,
    }
}

/// `∮_γ ω` over a closed orbit; degree-0 fields integrate along unit-speed time.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitIntegral {
    pub start: Point,
    pub period: u32,
    pub value: f64,
    pub quadrature_error: f64,
    pub closure: f64,
}

/// Knobs of the composite Gauss rule along an orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitQuadrature {
    pub order: usize,
    pub panel: f64,
    pub tol: f64,
    pub max_levels: usize,
}

impl Default for OrbitQuadrature {
    fn default() -> Self {
        OrbitQuadrature { order: 10, panel: 0.25, tol: 1e-13, max_levels: 8 }
    }
}

pub fn orbit_obstruction(flow: &SuspensionFlow, omega: &FormField, orbit: &PeriodicPoint, quad: &OrbitQuadrature) -> Result<OrbitIntegral> {
    let k = omega.degree();
    if k > 1 {
        return Err(Error::InvalidArgument(format!("orbit integrals take degree 0 or 1, got {k}")));
    }
    let start = &orbit.point;
    let period = orbit.period as f64;
    let closure = flow.distance(&flow.flow(start, period), start);
    if closure > tolerances::ORBIT_CLOSURE {
        return Err(Error::NotPeriodic { distance: closure });
    }
    let n = flow.dim();
    let read = |form: &AltForm| if k == 0 { form.coeff(IndexSet::EMPTY) } else { form.coeff(IndexSet::single(n)) };
    let rule = GaussLegendre::new(quad.order);
    let edges = orbit_breakpoints(start.s(), 1.0, period, &omega.breakpoints());
    let r = integrate_refined(&rule, 0.0, period, quad.panel, &edges, quad.tol, quad.max_levels, |t| {
        read(&omega.form_at(&flow.flow(start, t)))
    });
    Ok(OrbitIntegral { start: start.clone(), period: orbit.period, value: r.value, quadrature_error: r.error, closure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{random_atom, random_field, volume_form, AtomKind, FormAtom, Shape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> QuadratureSpec {
        QuadratureSpec::lattice(4099, 7, 8)
    }

    // ⟨ξ, η⟩ for x-independent atoms by 1-D Gauss over s.
    fn periodic_inner_oracle(flow: &SuspensionFlow, a: &FormField, b: &FormField) -> f64 {
        let metric = flow.anosov_metric();
        let rule = GaussLegendre::new(20);
        let x = vec![0.0; flow.torus_dim()];
        (0..16)
            .map(|j| {
                let (lo, hi) = (j as f64 / 16.0, (j + 1) as f64 / 16.0);
                rule.integrate(lo, hi, |s| {
                    let (fa, fb) = (a.form_at_coords(&x, s), b.form_at_coords(&x, s));
                    fa.terms()
                        .iter()
                        .map(|&(idx, c)| {
                            let w: f64 = idx.indices().map(|i| metric.log_rates()[i - 1]).sum();
                            c * fb.coeff(idx) * (-2.0 * w * s).exp()
                        })
                        .sum::<f64>()
                })
            })
            .sum()
    }

    #[test]
    fn unit_norms() {
        let f = SuspensionFlow::default_model();
        let metric = f.anosov_metric();
        for field in [canonical_alpha(&f), volume_form(&f), interior_x_volume(&f)] {
            let e = l2_inner(&f, &field, &field, &metric, &small()).unwrap();
            assert!(e.within_3sigma(1.0), "{e:?}");
            assert!(e.sigma <= 1e-3);
        }
    }

    #[test]
    fn inner_is_symmetric_and_matches_oracle() {
        let f = SuspensionFlow::default_model();
        let metric = f.anosov_metric();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=3 {
            let atoms = |rng: &mut ChaCha8Rng| {
                FormField::from_atoms(4, k, (0..3).map(|_| random_atom(&f, rng, k, AtomKind::Periodic)).collect()).unwrap()
            };
            let a = atoms(&mut rng);
            let b = atoms(&mut rng);
            let ab = l2_inner(&f, &a, &b, &metric, &small()).unwrap();
            let ba = l2_inner(&f, &b, &a, &metric, &small()).unwrap();
            assert_eq!(ab.replicas, ba.replicas);
            let want = periodic_inner_oracle(&f, &a, &b);
            assert!((ab.value - want).abs() <= 3.0 * ab.sigma + 1e-9, "{} vs {want} (σ {})", ab.value, ab.sigma);
        }
    }

    #[test]
    fn inner_rejects_degree_mismatch() {
        let f = SuspensionFlow::default_model();
        let metric = f.anosov_metric();
        let err = l2_inner(&f, &canonical_alpha(&f), &volume_form(&f), &metric, &small()).unwrap_err();
        assert!(matches!(err, Error::DegreeMismatch { .. }));
    }

    #[test]
    fn star_alpha_and_negative_control() {
        let f = SuspensionFlow::default_model();
        let rep = star_alpha_identity(&f, 200, 1e-12, 1);
        assert!(rep.pass, "{rep:?}");
        let bad = star_alpha_identity_with(&f, |_| MetricFrame::diagonal_metric(&[1.0, 1.0, 1.0, 4.0]).unwrap(), 20, 1e-12, 1);
        assert!(!bad.pass);
        assert!((bad.max_deviation - 1.0).abs() < 1e-12);
        assert!(bad.max_nilpotence == 0.0);
    }

    #[test]
    fn adjoint_alpha_is_trivial() {
        let f = SuspensionFlow::default_model();
        let a = canonical_alpha(&f);
        let rep = adjoint_residual(&f, &a, &a, &small()).unwrap();
        assert_eq!(rep.lhs.value, 0.0);
        assert_eq!(rep.rhs.value, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn adjoint_random_pairs() {
        let f = SuspensionFlow::default_model();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 1..=3 {
            let sign = if (k * (4 - k) + 1) % 2 == 0 { 1.0 } else { -1.0 };
            for _ in 0..3 {
                let xi = random_field(&f, &mut rng, k, 3);
                let eta = random_field(&f, &mut rng, k, 3);
                let rep = adjoint_residual(&f, &xi, &eta, &small()).unwrap();
                assert_eq!(rep.sign, sign);
                assert!(rep.pass, "k={k}: {:?} σ {}", rep.residual.value, rep.residual.sigma);
            }
        }
    }

    #[test]
    fn adjoint_procedural_matches_analytic() {
        let f = SuspensionFlow::default_model();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let xi = random_field(&f, &mut rng, 2, 2);
        let eta = random_field(&f, &mut rng, 2, 2);
        let spec = QuadratureSpec::lattice(1021, 3, 8);
        let exact = adjoint_residual(&f, &xi, &eta, &spec).unwrap();
        let fd = adjoint_residual(&f, &xi.as_procedural(), &eta.as_procedural(), &spec).unwrap();
        assert!(fd.pass, "{:?}", fd.residual);
        assert!((exact.lhs.value - fd.lhs.value).abs() < 1e-6);
        assert!((exact.rhs.value - fd.rhs.value).abs() < 1e-6);
    }

    #[test]
    fn orthogonality_examples() {
        let f = SuspensionFlow::default_model();
        let ixo = interior_x_volume(&f);
        let zero = orthogonality_check(&f, &ixo, &small()).unwrap();
        assert_eq!(zero.value.value, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bump = FormField::from_atoms(4, 3, (0..3).map(|_| random_atom(&f, &mut rng, 3, AtomKind::Bump)).collect()).unwrap();
        let proc_rep = orthogonality_check(&f, &bump.as_procedural(), &small()).unwrap();
        assert!(proc_rep.pass, "{proc_rep:?}");
        let shifted = FormField::linear_combination(&[(1.0, &bump), (2.5, &ixo)]).unwrap();
        let a = orthogonality_check(&f, &bump, &small()).unwrap();
        let b = orthogonality_check(&f, &shifted, &small()).unwrap();
        assert!((a.value.value - b.value.value).abs() < 1e-14);
    }

    #[test]
    fn orthogonality_detects_non_glued_theta() {
        // θ_{123} with a non-deck profile: L_X Θ has nonzero average
        let f = SuspensionFlow::default_model();
        let ramp = FormAtom::new_unchecked(
            1.0,
            IndexSet::new(4, &[1, 2, 3]).unwrap(),
            &[0, 0, 0],
            0.0,
            crate::forms::Profile::new(0.3, Shape::constant(1.0)),
        );
        let theta = FormField::from_atoms(4, 3, vec![ramp]).unwrap();
        let rep = orthogonality_check(&f, &theta, &small()).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn weak_closedness_examples() {
        let f = SuspensionFlow::default_model();
        let constant = FormField::from_atoms(
            4,
            2,
            vec![FormAtom::periodic(&f, 1.0, IndexSet::new(4, &[1, 4]).unwrap(), Shape::constant(1.0)).unwrap()],
        )
        .unwrap();
        let rep = weak_closedness(&f, &constant, &small()).unwrap();
        assert_eq!(rep.direct.value, 0.0);
        assert!(rep.pass);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..4 {
            let w = random_field(&f, &mut rng, 2, 3);
            let rep = weak_closedness(&f, &w, &small()).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
        let proc_field = constant.as_procedural();
        assert!(matches!(weak_closedness(&f, &proc_field, &small()), Err(Error::NeedsAtoms(_))));
    }

    #[test]
    fn orbit_integrals() {
        let f = SuspensionFlow::default_model();
        let quad = OrbitQuadrature::default();
        let alpha = canonical_alpha(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xi = random_field(&f, &mut rng, 1, 4);
        let lie = xi.lie_derivative_field().unwrap();
        let psi = FormField::from_atoms(
            4,
            0,
            vec![FormAtom::periodic(&f, 1.0, IndexSet::EMPTY, Shape::Fourier { a0: 0.0, cos: vec![1.0], sin: vec![] }).unwrap()],
        )
        .unwrap();
        let x_psi = psi.lie_derivative_field().unwrap();
        for p in 1..=3 {
            for orbit in f.periodic_points(p).unwrap() {
                let a = orbit_obstruction(&f, &alpha, &orbit, &quad).unwrap();
                assert!((a.value - p as f64).abs() < 1e-10);
                assert!(orbit_obstruction(&f, &lie, &orbit, &quad).unwrap().value.abs() < 1e-10);
                assert!(orbit_obstruction(&f, &x_psi, &orbit, &quad).unwrap().value.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orbit_rejects_non_periodic_start() {
        let f = SuspensionFlow::default_model();
        let fake = PeriodicPoint { point: Point::new(&[0.1, 0.2, 0.3], 0.0).unwrap(), period: 1, denominator: 1, numerators: vec![0, 0, 0] };
        let err = orbit_obstruction(&f, &canonical_alpha(&f), &fake, &OrbitQuadrature::default()).unwrap_err();
        assert!(matches!(err, Error::NotPeriodic { .. }));
    }
}
