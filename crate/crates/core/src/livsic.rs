//! The cohomological equation `L_X η = ξ` in intermediate degrees.
//!
//! Each argument vector splits as `v = v^{cs} + v^{uu}` along the constant
//! splitting. Terms with only `E^{cs}` vectors integrate forward,
//! `η = -∫₀^∞ f_s^* ξ ds`; terms with at least one `E^{uu}` vector integrate
//! backward, `η = ∫₀^∞ f_{-s}^* ξ ds`. Asymmetry makes both integrands decay.

use rayon::prelude::*;
use serde::Serialize;
use smallvec::SmallVec;

use crate::asymmetry::RateFit;
use crate::error::{Error, Result};
use crate::exterior::{k_volume, AltForm, MAX_DIM};
use crate::fit::fit_line;
use crate::forms::FormField;
use crate::model::{Point, SuspensionFlow, TangentVector};
use crate::quadrature::{integrate_refined_multi, GaussLegendre};
use crate::tolerances;

type Coords = SmallVec<[f64; MAX_DIM]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    Cs,
    Uu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    /// All vectors in `E^{cs}`: forward integration.
    One,
    /// At least one vector in `E^{uu}`: backward integration.
    Two,
}

impl Case {
    fn direction(self) -> f64 {
        match self {
            Case::One => 1.0,
            Case::Two => -1.0,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Case::One => -1.0,
            Case::Two => 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitTerm {
    pub sign: f64,
    pub tags: Vec<Tag>,
    pub case: Case,
    /// Eigen-frame components of the projected vectors.
    pub vectors: Vec<Coords>,
}

/// Multilinear expansion of `(v_1, ..., v_k)` over `E^{cs} ⊕ E^{uu}`.
#[derive(Clone, Debug, Serialize)]
pub struct CaseSplit {
    pub terms: Vec<SplitTerm>,
}

impl CaseSplit {
    /// `Σ_terms sign · ω(term vectors)`; equals `ω(v_1, ..., v_k)` for any `k`-form.
    pub fn reassemble(&self, form: &AltForm) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            total += t.sign * form.evaluate(&t.vectors)?;
        }
        Ok(total)
    }
}

/// Projects each vector onto `E^{cs}` and `E^{uu}` and expands multilinearly.
/// Components with norm below `1e-13` of the original vector are dropped.
pub fn case_split(flow: &SuspensionFlow, vs: &[TangentVector]) -> CaseSplit {
    let unstable = flow.unstable_coords();
    let parts: Vec<[Option<Coords>; 2]> = vs
        .iter()
        .map(|v| {
            let c = flow.to_eigen(v);
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut cs = c.clone();
            let mut uu = c.clone();
            for (i, (a, b)) in cs.iter_mut().zip(uu.iter_mut()).enumerate() {
                if unstable.contains(&i) {
                    *a = 0.0;
                } else {
                    *b = 0.0;
                }
            }
            let keep = |w: Coords| {
                let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                (wn > tolerances::CASE_SPLIT_DROP * norm && wn > 0.0).then_some(w)
            };
            [keep(cs), keep(uu)]
        })
        .collect();
    let k = vs.len();
    let mut terms = Vec::new();
    for mask in 0..(1usize << k) {
        let mut tags = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        let mut present = true;
        for (j, part) in parts.iter().enumerate() {
            let uu = mask >> j & 1 == 1;
            match &part[uu as usize] {
                Some(w) => {
                    tags.push(if uu { Tag::Uu } else { Tag::Cs });
                    vectors.push(w.clone());
                }
                None => {
                    present = false;
                    break;
                }
            }
        }
        if present {
            let case = if mask == 0 { Case::One } else { Case::Two };
            terms.push(SplitTerm { sign: 1.0, tags, case, vectors });
        }
    }
    CaseSplit { terms }
}

/// Knobs of the solver; defaults follow the documented quadrature policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub horizon_cap: f64,
    pub panel: f64,
    pub order: usize,
    pub max_levels: usize,
    /// Share of `tol` given to the truncation tail; the rest goes to quadrature.
    pub tail_share: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, horizon_cap: 600.0, panel: 0.5, order: 8, max_levels: 6, tail_share: 0.5 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Self::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TermContribution {
    pub tags: Vec<Tag>,
    pub case: Case,
    pub value: f64,
    pub quadrature_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub value: f64,
    pub horizon: f64,
    pub tail_bound: f64,
    pub quadrature_error: f64,
    pub case_breakdown: Vec<TermContribution>,
}

fn check_degree(flow: &SuspensionFlow, k: usize) -> Result<()> {
    let n = flow.dim();
    if k < 2 || k + 2 > n {
        return Err(Error::DegreeRefused { degree: k, reason: "uniqueness not guaranteed; refused in solver mode" });
    }
    Ok(())
}

/// Times `σ ∈ (0, t)` at which `s0 ± σ` meets the seam or a field breakpoint.
pub(crate) fn orbit_breakpoints(s0: f64, direction: f64, t: f64, field_bps: &[f64]) -> Vec<f64> {
    let mut marks: Vec<f64> = field_bps.to_vec();
    marks.push(0.0);
    let mut out = Vec::new();
    for &b in &marks {
        // σ with s0 + direction σ ≡ b (mod 1)
        let first = if direction > 0.0 { (b - s0).rem_euclid(1.0) } else { (s0 - b).rem_euclid(1.0) };
        let mut sigma = first;
        while sigma < t {
            if sigma > 0.0 {
                out.push(sigma);
            }
            sigma += 1.0;
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Integrates every split term over `[0, t]`, one pullback per quadrature node and case.
fn integrate_terms(
    flow: &SuspensionFlow,
    xi: &FormField,
    p: &Point,
    split: &CaseSplit,
    t: f64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<Vec<TermContribution>> {
    let rule = GaussLegendre::new(opts.order);
    let bps = xi.breakpoints();
    let mut out: Vec<Option<TermContribution>> = vec![None; split.terms.len()];
    for case in [Case::One, Case::Two] {
        let idx: Vec<usize> = (0..split.terms.len()).filter(|&i| split.terms[i].case == case).collect();
        if idx.is_empty() {
            continue;
        }
        if t <= 0.0 {
            for &i in &idx {
                let term = &split.terms[i];
                out[i] = Some(TermContribution { tags: term.tags.clone(), case, value: 0.0, quadrature_error: 0.0 });
            }
            continue;
        }
        let dir = case.direction();
        let edges = orbit_breakpoints(p.s(), dir, t, &bps);
        let per_term_tol = tol / split.terms.len().max(1) as f64;
        let mut failure = None;
        let results = integrate_refined_multi(&rule, 0.0, t, opts.panel, &edges, idx.len(), per_term_tol, opts.max_levels, |sigma, vals| {
            let form = xi.pullback_form(flow, dir * sigma, p);
            for (slot, &i) in vals.iter_mut().zip(&idx) {
                *slot = match form.evaluate(&split.terms[i].vectors) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                };
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        for (r, &i) in results.iter().zip(&idx) {
            let term = &split.terms[i];
            out[i] = Some(TermContribution {
                tags: term.tags.clone(),
                case,
                value: case.sign() * term.sign * r.value,
                quadrature_error: r.error,
            });
        }
    }
    Ok(out.into_iter().map(|c| c.expect("every term integrated")).collect())
}

fn check_inputs(flow: &SuspensionFlow, xi: &FormField, p: &Point, vs: &[TangentVector]) -> Result<()> {
    check_degree(flow, xi.degree())?;
    if xi.dim() != flow.dim() {
        return Err(Error::DimensionMismatch { expected: flow.dim(), got: xi.dim() });
    }
    if vs.len() != xi.degree() {
        return Err(Error::DimensionMismatch { expected: xi.degree(), got: vs.len() });
    }
    if vs.iter().any(|v| v.base() != p) {
        return Err(Error::BasePointMismatch);
    }
    Ok(())
}

/// `η_t(v_1, ..., v_k)`: the truncated Case-1/Case-2 integrals up to time `t`.
pub fn eta_t(flow: &SuspensionFlow, xi: &FormField, p: &Point, vs: &[TangentVector], t: f64, opts: &SolverOptions) -> Result<f64> {
    check_inputs(flow, xi, p, vs)?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("truncation time {t} must be non-negative")));
    }
    let split = case_split(flow, vs);
    let terms = integrate_terms(flow, xi, p, &split, t, opts.tol * (1.0 - opts.tail_share), opts)?;
    Ok(terms.iter().map(|c| c.value).sum())
}

/// Confirms a procedural right-hand side glues across the seam.
fn require_gluing(flow: &SuspensionFlow, xi: &FormField) -> Result<()> {
    if xi.is_analytic() {
        return Ok(());
    }
    let rep = xi.gluing_check(flow, 64, 1e-8, 0x91ce);
    if rep.pass {
        Ok(())
    } else {
        Err(Error::GluingFailed { residual: rep.residual })
    }
}

/// `η_p(v_1, ..., v_k)` for the unique continuous `η` with `L_X η = ξ`, with the
/// truncation horizon chosen from the measured contraction rates.
pub fn solve(
    flow: &SuspensionFlow,
    xi: &FormField,
    p: &Point,
    vs: &[TangentVector],
    rates: Option<&RateFit>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    check_inputs(flow, xi, p, vs)?;
    let rates = rates.ok_or(Error::NoContraction(f64::NAN))?;
    if !(rates.nu_hat > 0.0) {
        return Err(Error::NoContraction(rates.nu_hat));
    }
    require_gluing(flow, xi)?;
    let split = case_split(flow, vs);
    let frame = flow.anosov_metric().frame_at(p.s());
    let mut volume = 0.0;
    for term in &split.terms {
        volume += k_volume(&term.vectors, &frame)?;
    }
    let scale = xi.sup_scale(flow) * rates.c_envelope.max(1.0) * volume / rates.nu_hat;
    let tail_target = opts.tol * opts.tail_share;
    let horizon = if scale <= tail_target {
        0.0
    } else {
        ((scale / tail_target).ln() / rates.nu_hat).min(opts.horizon_cap)
    };
    let tail_bound = scale * (-rates.nu_hat * horizon).exp();
    let terms = integrate_terms(flow, xi, p, &split, horizon, opts.tol * (1.0 - opts.tail_share), opts)?;
    Ok(SolveResult {
        value: terms.iter().map(|c| c.value).sum(),
        horizon,
        tail_bound,
        quadrature_error: terms.iter().map(|c| c.quadrature_error).sum(),
        case_breakdown: terms,
    })
}

/// Solves at many sites in parallel; results come back in input order.
pub fn solve_many(
    flow: &SuspensionFlow,
    xi: &FormField,
    sites: &[(Point, Vec<TangentVector>)],
    rates: Option<&RateFit>,
    opts: &SolverOptions,
) -> Vec<Result<SolveResult>> {
    sites.par_iter().map(|(p, vs)| solve(flow, xi, p, vs, rates, opts)).collect()
}

/// `|L_X η_t(v) - (ξ - f_{±t}^* ξ)(v)|`, with `L_X η_t` from Richardson central
/// differences of `η_t` recomputed at `f_{±h}(p)` on transported vectors.
pub fn residual_identity(flow: &SuspensionFlow, xi: &FormField, p: &Point, vs: &[TangentVector], t: f64, h: f64, opts: &SolverOptions) -> Result<f64> {
    check_inputs(flow, xi, p, vs)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h} must be positive")));
    }
    let eta_at = |tau: f64| -> Result<f64> {
        let q = flow.flow(p, tau);
        let moved: Vec<TangentVector> = vs.iter().map(|v| flow.tangent_flow(v, tau)).collect();
        eta_t(flow, xi, &q, &moved, t, opts)
    };
    let central = |step: f64| -> Result<f64> { Ok((eta_at(step)? - eta_at(-step)?) / (2.0 * step)) };
    let lie = (4.0 * central(h)? - central(2.0 * h)?) / 3.0;
    let split = case_split(flow, vs);
    let here = xi.form_at(p);
    let fwd = xi.pullback_form(flow, t, p);
    let bwd = xi.pullback_form(flow, -t, p);
    let mut expected = 0.0;
    for term in &split.terms {
        let pulled = match term.case {
            Case::One => &fwd,
            Case::Two => &bwd,
        };
        expected += term.sign * (here.evaluate(&term.vectors)? - pulled.evaluate(&term.vectors)?);
    }
    Ok((lie - expected).abs())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergencePoint {
    pub t: f64,
    pub eta_t: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceProfile {
    pub eta_inf: f64,
    pub points: Vec<ConvergencePoint>,
    /// Slope of `ln |η_t - η_∞|` against `t` over the points with a resolvable gap.
    pub slope: Option<f64>,
}

/// `(t, η_t, |η_t - η_∞|)` over an increasing list of times, with `η_∞` solved
/// at a tolerance well below the gaps being measured.
pub fn convergence_profile(
    flow: &SuspensionFlow,
    xi: &FormField,
    p: &Point,
    vs: &[TangentVector],
    t_list: &[f64],
    rates: &RateFit,
) -> Result<ConvergenceProfile> {
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_list must be increasing".into()));
    }
    let tight = SolverOptions::with_tol(1e-12);
    let eta_inf = solve(flow, xi, p, vs, Some(rates), &tight)?.value;
    let points: Vec<ConvergencePoint> = t_list
        .par_iter()
        .map(|&t| {
            let v = eta_t(flow, xi, p, vs, t, &tight)?;
            Ok(ConvergencePoint { t, eta_t: v, gap: (v - eta_inf).abs() })
        })
        .collect::<Result<_>>()?;
    let usable: Vec<&ConvergencePoint> = points.iter().filter(|c| c.gap > 1e-9 * eta_inf.abs().max(1e-3)).collect();
    let slope = (usable.len() >= 3).then(|| {
        let ts: Vec<f64> = usable.iter().map(|c| c.t).collect();
        let ls: Vec<f64> = usable.iter().map(|c| c.gap.ln()).collect();
        fit_line(&ts, &ls).slope
    });
    Ok(ConvergenceProfile { eta_inf, points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymmetry::is_asymmetric;
    use crate::exterior::IndexSet;
    use crate::forms::{random_point, FormAtom, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rates(f: &SuspensionFlow) -> RateFit {
        is_asymmetric(f, 8, 0.01, 3).unwrap().solver_rates
    }

    fn u_ds(f: &SuspensionFlow) -> FormField {
        let a = FormAtom::periodic(f, 1.0, IndexSet::new(4, &[1, 4]).unwrap(), Shape::constant(1.0)).unwrap();
        FormField::from_atoms(4, 2, vec![a]).unwrap()
    }

    fn stable_plane(f: &SuspensionFlow) -> FormField {
        let a = FormAtom::periodic(f, 1.0, IndexSet::new(4, &[2, 3]).unwrap(), Shape::constant(1.0)).unwrap();
        FormField::from_atoms(4, 2, vec![a]).unwrap()
    }

    fn ev(f: &SuspensionFlow, p: &Point, c: [f64; 4]) -> TangentVector {
        f.from_eigen(p.clone(), &c)
    }

    #[test]
    fn case_split_examples() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.1, 0.2, 0.3], 0.4).unwrap();
        let ss = case_split(&f, &[ev(&f, &p, [0.0, 1.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 1.0, 0.0])]);
        assert_eq!(ss.terms.len(), 1);
        assert_eq!(ss.terms[0].case, Case::One);
        let ux = case_split(&f, &[ev(&f, &p, [1.0, 0.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.0, 1.0])]);
        assert_eq!(ux.terms.len(), 1);
        assert_eq!(ux.terms[0].case, Case::Two);
        let mixed = case_split(&f, &[ev(&f, &p, [1.0, 0.5, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.0, 1.0])]);
        assert_eq!(mixed.terms.len(), 2);
        assert_eq!(mixed.terms[0].tags, vec![Tag::Cs, Tag::Cs]);
        assert_eq!(mixed.terms[1].tags, vec![Tag::Uu, Tag::Cs]);
    }

    #[test]
    fn case_split_reassembles_any_form() {
        let f = SuspensionFlow::default_model();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=4 {
            let form = crate::exterior::random_form(&mut rng, 4, k);
            let p = random_point(&f, &mut rng);
            let vs: Vec<TangentVector> =
                (0..k).map(|_| ev(&f, &p, [0; 4].map(|_: i32| rng.random_range(-1.0..1.0)))).collect();
            let split = case_split(&f, &vs);
            assert_eq!(split.terms.len(), 1 << k);
            let eig: Vec<Coords> = vs.iter().map(|v| f.to_eigen(v)).collect();
            let direct = form.evaluate(&eig).unwrap();
            assert!((split.reassemble(&form).unwrap() - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn degree_guards() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.1, 0.2, 0.3], 0.4).unwrap();
        let r = rates(&f);
        let one = crate::forms::canonical_alpha(&f);
        let x = ev(&f, &p, [0.0, 0.0, 0.0, 1.0]);
        let err = solve(&f, &one, &p, std::slice::from_ref(&x), Some(&r), &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegreeRefused { degree: 1, .. }));
        let three = crate::forms::interior_x_volume(&f);
        let vs = [ev(&f, &p, [1.0, 0.0, 0.0, 0.0]), ev(&f, &p, [0.0, 1.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 1.0, 0.0])];
        assert!(matches!(solve(&f, &three, &p, &vs, Some(&r), &SolverOptions::default()), Err(Error::DegreeRefused { degree: 3, .. })));
    }

    #[test]
    fn refuses_without_contraction() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.1, 0.2, 0.3], 0.4).unwrap();
        let vs = [ev(&f, &p, [1.0, 0.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.0, 1.0])];
        let xi = u_ds(&f);
        assert!(matches!(solve(&f, &xi, &p, &vs, None, &SolverOptions::default()), Err(Error::NoContraction(_))));
        let mut r = rates(&f);
        r.nu_hat = 0.0;
        assert!(matches!(solve(&f, &xi, &p, &vs, Some(&r), &SolverOptions::default()), Err(Error::NoContraction(_))));
    }

    #[test]
    fn closed_form_case_two() {
        let f = SuspensionFlow::default_model();
        let rho = f.automorphism().expansion();
        let r = rates(&f);
        for s0 in [0.0, 0.3, 0.77] {
            let p = Point::new(&[0.1, 0.2, 0.3], s0).unwrap();
            let vs = [ev(&f, &p, [1.0, 0.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.0, 1.0])];
            let res = solve(&f, &u_ds(&f), &p, &vs, Some(&r), &SolverOptions::with_tol(1e-9)).unwrap();
            let want = rho.powf(s0) / rho.ln();
            assert!((res.value - want).abs() <= 1e-9, "{} vs {want}", res.value);
            assert!(res.tail_bound <= 0.5e-9 * (1.0 + 1e-9) && res.quadrature_error <= 0.5e-9, "{res:?}");
        }
    }

    #[test]
    fn closed_form_case_one() {
        let f = SuspensionFlow::default_model();
        let rho = f.automorphism().expansion();
        let r = rates(&f);
        let p = Point::new(&[0.6, 0.2, 0.9], 0.45).unwrap();
        let vs = [ev(&f, &p, [0.0, 1.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 1.0, 0.0])];
        let res = solve(&f, &stable_plane(&f), &p, &vs, Some(&r), &SolverOptions::with_tol(1e-9)).unwrap();
        let want = -rho.powf(-0.45) / rho.ln();
        assert!((res.value - want).abs() <= 1e-9, "{} vs {want}", res.value);
    }

    #[test]
    fn eta_t_of_zero_and_at_zero() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.1, 0.2, 0.3], 0.4).unwrap();
        let vs = [ev(&f, &p, [1.0, 0.3, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.2, 1.0])];
        let zero = FormField::zero(4, 2);
        assert_eq!(eta_t(&f, &zero, &p, &vs, 10.0, &SolverOptions::default()).unwrap(), 0.0);
        assert_eq!(eta_t(&f, &u_ds(&f), &p, &vs, 0.0, &SolverOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let f = SuspensionFlow::default_model();
        let r = rates(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let eta0 = FormField::from_atoms(
            4,
            2,
            (0..3).map(|_| crate::forms::random_atom(&f, &mut rng, 2, crate::forms::AtomKind::Periodic)).collect(),
        )
        .unwrap();
        let xi = eta0.lie_derivative_field().unwrap();
        let opts = SolverOptions::with_tol(1e-8);
        for _ in 0..10 {
            let p = random_point(&f, &mut rng);
            let vs: Vec<TangentVector> =
                (0..2).map(|_| ev(&f, &p, [0; 4].map(|_: i32| rng.random_range(-1.0..1.0)))).collect();
            let got = solve(&f, &xi, &p, &vs, Some(&r), &opts).unwrap().value;
            let want = eta0.evaluate(&f, &p, &vs).unwrap();
            assert!((got - want).abs() <= 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn residual_identity_is_small() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.1, 0.2, 0.3], 0.4).unwrap();
        let vs = [ev(&f, &p, [1.0, 0.3, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.2, 1.0])];
        let opts = SolverOptions::with_tol(1e-12);
        let xi = u_ds(&f);
        assert!(residual_identity(&f, &xi, &p, &vs, 0.0, 1e-4, &opts).unwrap() < 1e-9);
        assert!(residual_identity(&f, &xi, &p, &vs, 5.0, 1e-4, &opts).unwrap() <= 1e-6);
    }

    #[test]
    fn convergence_slope_case_two() {
        let f = SuspensionFlow::default_model();
        let rho = f.automorphism().expansion();
        let r = rates(&f);
        let p = Point::new(&[0.1, 0.2, 0.3], 0.25).unwrap();
        let vs = [ev(&f, &p, [1.0, 0.0, 0.0, 0.0]), ev(&f, &p, [0.0, 0.0, 0.0, 1.0])];
        let ts: Vec<f64> = (1..=12).map(|i| 2.0 * i as f64).collect();
        let prof = convergence_profile(&f, &u_ds(&f), &p, &vs, &ts, &r).unwrap();
        for c in &prof.points {
            let want = rho.powf(0.25 - c.t) / rho.ln();
            assert!((c.gap - want).abs() < 1e-10 + 1e-6 * want, "t={} {} vs {want}", c.t, c.gap);
        }
        let slope = prof.slope.unwrap();
        assert!((slope / -rho.ln() - 1.0).abs() < 0.02, "{slope}");
    }

    #[test]
    fn orbit_breakpoints_hit_seam_and_support() {
        let b = orbit_breakpoints(0.3, 1.0, 2.5, &[0.1]);
        let want = [0.7, 0.8, 1.7, 1.8];
        assert_eq!(b.len(), want.len());
        for (x, y) in b.iter().zip(want) {
            assert!((x - y).abs() < 1e-14);
        }
        let back = orbit_breakpoints(0.3, -1.0, 1.5, &[0.1]);
        for (x, y) in back.iter().zip([0.2, 0.3, 1.2, 1.3]) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
