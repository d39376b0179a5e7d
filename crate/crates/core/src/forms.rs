//! Differential forms on the suspension, expressed in the eigen-coframe
//! `(θ_1, ..., θ_m, ds)`: `θ_j` is the `j`-th row of `P⁻¹` applied to the
//! torus part of a vector and `ds` reads off its `X` component.
//!
//! Two representations are supported. *Atoms* are closed-form fields
//! `coeff · cos(2π q·x + phase) · g(s) · θ_I`, with `g(s) = e^{b s} · shape(s)`.
//! The family is closed under `L_X`, `d`, `i_X` and the Hodge star of the
//! Anosov metric, which is what makes them usable as exact oracles.
//! *Procedural* fields wrap an arbitrary evaluator `(x, s) ↦ Λ^k`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exterior::{self, wedge_sign, AltForm, IndexSet, MAX_DIM};
use crate::model::{wrap_unit, Point, SuspensionFlow, TangentVector};
use crate::tolerances;

/// Periodic or compactly supported factor of a profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Shape {
    /// `a0 + Σ_k cos[k-1] cos(2πks) + sin[k-1] sin(2πks)`, period 1.
    Fourier { a0: f64, cos: Vec<f64>, sin: Vec<f64> },
    /// `Σ_j poly[j] z^j` for `|z| < 1` and zero elsewhere, where
    /// `z = (2s - 1)/(1 - 2δ)`; supported in `(δ, 1 - δ)` when `s ∈ [0, 1)`.
    Bump { delta: f64, poly: Vec<f64> },
}

impl Shape {
    /// `(1 - z²)³` on `(δ, 1 - δ)`.
    pub fn standard_bump(delta: f64) -> Self {
        Shape::Bump { delta, poly: vec![1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0] }
    }

    pub fn constant(a0: f64) -> Self {
        Shape::Fourier { a0, cos: vec![], sin: vec![] }
    }

    /// Value and derivative at `s`. Bump shapes treat `s` as a fundamental-domain coordinate.
    fn eval(&self, s: f64) -> (f64, f64) {
        match self {
            Shape::Fourier { a0, cos, sin } => {
                let mut v = *a0;
                let mut d = 0.0;
                for k in 0..cos.len().max(sin.len()) {
                    let w = 2.0 * PI * (k + 1) as f64;
                    let (sn, cs) = (w * s).sin_cos();
                    let a = cos.get(k).copied().unwrap_or(0.0);
                    let b = sin.get(k).copied().unwrap_or(0.0);
                    v += a * cs + b * sn;
                    d += w * (b * cs - a * sn);
                }
                (v, d)
            }
            Shape::Bump { delta, poly } => {
                let scale = 2.0 / (1.0 - 2.0 * delta);
                let z = (2.0 * s - 1.0) / (1.0 - 2.0 * delta);
                if z.abs() >= 1.0 {
                    return (0.0, 0.0);
                }
                let mut v = 0.0;
                let mut d = 0.0;
                for c in poly.iter().rev() {
                    d = d * z + v;
                    v = v * z + c;
                }
                (v, d * scale)
            }
        }
    }

    fn is_bump(&self) -> bool {
        matches!(self, Shape::Bump { .. })
    }
}

/// `g(s) = e^{log_base · s} · shape(s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    pub log_base: f64,
    pub shape: Shape,
}

impl Profile {
    pub fn new(log_base: f64, shape: Shape) -> Self {
        Profile { log_base, shape }
    }

    pub fn value(&self, s: f64) -> f64 {
        (self.log_base * s).exp() * self.shape.eval(s).0
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let (v, d) = self.shape.eval(s);
        (self.log_base * s).exp() * (self.log_base * v + d)
    }

    /// The profile of `d/ds g`, again in closed form.
    pub fn differentiated(&self) -> Profile {
        let b = self.log_base;
        let shape = match &self.shape {
            Shape::Fourier { a0, cos, sin } => {
                let len = cos.len().max(sin.len());
                let get = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);
                let mut nc = Vec::with_capacity(len);
                let mut ns = Vec::with_capacity(len);
                for k in 0..len {
                    let w = 2.0 * PI * (k + 1) as f64;
                    nc.push(b * get(cos, k) + w * get(sin, k));
                    ns.push(b * get(sin, k) - w * get(cos, k));
                }
                Shape::Fourier { a0: b * a0, cos: nc, sin: ns }
            }
            Shape::Bump { delta, poly } => {
                let scale = 2.0 / (1.0 - 2.0 * delta);
                let mut np: Vec<f64> = poly.iter().map(|c| b * c).collect();
                for j in 1..poly.len() {
                    np[j - 1] += scale * j as f64 * poly[j];
                }
                Shape::Bump { delta: *delta, poly: np }
            }
        };
        Profile { log_base: b, shape }
    }

    fn scaled_base(&self, extra: f64) -> Profile {
        Profile { log_base: self.log_base + extra, shape: self.shape.clone() }
    }

    /// Interior non-smooth points in `[0, 1)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Fourier { .. } => vec![],
            Shape::Bump { delta, .. } => vec![*delta, 1.0 - delta],
        }
    }
}

/// `coeff · cos(2π q·x + phase) · g(s) · θ_I`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormAtom {
    pub coeff: f64,
    pub index: IndexSet,
    pub freq: SmallVec<[i64; MAX_DIM]>,
    pub phase: f64,
    pub profile: Profile,
}

impl FormAtom {
    /// Validated constructor. `q = 0` atoms need a Fourier profile whose
    /// `log_base` is `ln λ_I`, where `λ_I > 0` is the scalar deck factor;
    /// `q ≠ 0` atoms need a bump profile with margin at least 0.05.
    pub fn new(flow: &SuspensionFlow, coeff: f64, index: IndexSet, freq: &[i64], phase: f64, profile: Profile) -> Result<Self> {
        let atom = Self::new_unchecked(coeff, index, freq, phase, profile);
        atom.validate(flow)?;
        Ok(atom)
    }

    /// No deck-compatibility check; for negative controls.
    pub fn new_unchecked(coeff: f64, index: IndexSet, freq: &[i64], phase: f64, profile: Profile) -> Self {
        FormAtom { coeff, index, freq: freq.iter().copied().collect(), phase, profile }
    }

    /// `q = 0` Fourier atom with the deck-compatible base filled in.
    pub fn periodic(flow: &SuspensionFlow, coeff: f64, index: IndexSet, shape: Shape) -> Result<Self> {
        let lambda = flow
            .automorphism()
            .deck_factor(index)
            .ok_or_else(|| Error::InvalidAtom(format!("{index:?} splits a rotation block; deck factor is not scalar")))?;
        if lambda <= 0.0 {
            return Err(Error::InvalidAtom(format!("deck factor {lambda} of {index:?} is negative")));
        }
        Self::new(flow, coeff, index, &vec![0; flow.torus_dim()], 0.0, Profile::new(lambda.ln(), shape))
    }

    /// Bump atom with arbitrary spatial frequency.
    pub fn bump(flow: &SuspensionFlow, coeff: f64, index: IndexSet, freq: &[i64], phase: f64, log_base: f64, delta: f64) -> Result<Self> {
        Self::new(flow, coeff, index, freq, phase, Profile::new(log_base, Shape::standard_bump(delta)))
    }

    pub fn degree(&self) -> usize {
        self.index.degree()
    }

    fn is_spatially_constant(&self) -> bool {
        self.freq.iter().all(|&q| q == 0)
    }

    pub fn validate(&self, flow: &SuspensionFlow) -> Result<()> {
        let n = flow.dim();
        if self.index.max_index() > n {
            return Err(Error::InvalidAtom(format!("index {:?} exceeds dimension {n}", self.index)));
        }
        if self.freq.len() != flow.torus_dim() {
            return Err(Error::InvalidAtom(format!("frequency vector must have {} entries", flow.torus_dim())));
        }
        if !self.coeff.is_finite() || !self.phase.is_finite() || !self.profile.log_base.is_finite() {
            return Err(Error::InvalidAtom("non-finite parameter".into()));
        }
        match &self.profile.shape {
            Shape::Bump { delta, poly } => {
                if *delta < tolerances::MIN_BUMP_MARGIN || *delta >= 0.5 {
                    return Err(Error::InvalidAtom(format!("bump margin {delta} outside [0.05, 0.5)")));
                }
                if poly.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidAtom("non-finite bump coefficient".into()));
                }
            }
            Shape::Fourier { a0, cos, sin } => {
                if !self.is_spatially_constant() {
                    return Err(Error::InvalidAtom("atoms with q ≠ 0 need a bump profile".into()));
                }
                if !a0.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(Error::InvalidAtom("non-finite Fourier coefficient".into()));
                }
                let lambda = flow.automorphism().deck_factor(self.index).ok_or_else(|| {
                    Error::InvalidAtom(format!("{:?} splits a rotation block; deck factor is not scalar", self.index))
                })?;
                if lambda <= 0.0 {
                    return Err(Error::InvalidAtom(format!("deck factor {lambda} is negative")));
                }
                let want = lambda.ln();
                if (self.profile.log_base - want).abs() > tolerances::EXACT_ALGEBRA * want.abs().max(1.0) {
                    return Err(Error::InvalidAtom(format!(
                        "profile base {} does not match ln λ_I = {want}",
                        self.profile.log_base
                    )));
                }
            }
        }
        Ok(())
    }

    fn spatial(&self, x: &[f64]) -> f64 {
        if self.is_spatially_constant() {
            return self.phase.cos();
        }
        let arg: f64 = self.freq.iter().zip(x).map(|(&q, &xi)| q as f64 * xi).sum();
        (2.0 * PI * arg + self.phase).cos()
    }

    /// Scalar coefficient of `θ_I` at `(x, s)`.
    pub fn coefficient(&self, x: &[f64], s: f64) -> f64 {
        self.coeff * self.spatial(x) * self.profile.value(s)
    }

    fn with(&self, coeff: f64, index: IndexSet, phase: f64, profile: Profile) -> FormAtom {
        FormAtom { coeff, index, freq: self.freq.clone(), phase, profile }
    }

    /// `L_X` of the atom.
    pub fn lie_derivative(&self) -> FormAtom {
        self.with(self.coeff, self.index, self.phase, self.profile.differentiated())
    }

    /// `i_X` of the atom, `None` when it vanishes.
    pub fn interior_x(&self, n: usize) -> Option<FormAtom> {
        if !self.index.contains(n) {
            return None;
        }
        let sign = if (self.degree() - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        Some(self.with(sign * self.coeff, self.index.without(n), self.phase, self.profile.clone()))
    }

    /// `d` of the atom as a sum of atoms.
    pub fn exterior_derivative(&self, flow: &SuspensionFlow) -> Vec<FormAtom> {
        let n = flow.dim();
        let m = flow.torus_dim();
        let mut out = Vec::new();
        let ds = IndexSet::single(n);
        if ds.is_disjoint(self.index) {
            let sign = wedge_sign(ds, self.index);
            out.push(self.with(sign * self.coeff, ds.union(self.index), self.phase, self.profile.differentiated()));
        }
        if !self.is_spatially_constant() {
            // d cos(2πq·x + φ) = 2π cos(2πq·x + φ + π/2) Σ_i c_i θ_i with c_i = Σ_j q_j P_{ji}
            let frame = flow.automorphism().frame();
            for i in 0..m {
                let ci: f64 = (0..m).map(|j| self.freq[j] as f64 * frame[j * m + i]).sum();
                let th = IndexSet::single(i + 1);
                if ci == 0.0 || !th.is_disjoint(self.index) {
                    continue;
                }
                let sign = wedge_sign(th, self.index);
                out.push(self.with(
                    sign * 2.0 * PI * ci * self.coeff,
                    th.union(self.index),
                    self.phase + PI / 2.0,
                    self.profile.clone(),
                ));
            }
        }
        out
    }

    /// Hodge star under the Anosov metric. With `σ_i = e^{ℓ_i s}` the metric
    /// is `diag(σ²)` and `⋆θ_I = ε(I, Iᶜ) e^{-2sΣ_{i∈I}ℓ_i} θ_{Iᶜ}`.
    pub fn hodge_star(&self, flow: &SuspensionFlow) -> FormAtom {
        let n = flow.dim();
        let rates = flow.anosov_metric();
        let comp = self.index.complement(n);
        let sum: f64 = self.index.indices().map(|i| rates.log_rates()[i - 1]).sum();
        self.with(
            wedge_sign(self.index, comp) * self.coeff,
            comp,
            self.phase,
            self.profile.scaled_base(-2.0 * sum),
        )
    }

    /// `sup_s |coefficient|` measured in the Anosov metric, i.e. of `g(s)·e^{-sΣ_I ℓ_i}`.
    fn sup_norm(&self, flow: &SuspensionFlow) -> f64 {
        let rates = flow.anosov_metric();
        let sum: f64 = self.index.indices().map(|i| rates.log_rates()[i - 1]).sum();
        let mut best = 0.0f64;
        for j in 0..=2000 {
            let s = j as f64 / 2000.0;
            best = best.max((self.profile.value(s) * (-sum * s).exp()).abs());
        }
        self.coeff.abs() * best * 1.01
    }
}

type Evaluator = dyn Fn(&[f64], f64) -> AltForm + Send + Sync;

#[derive(Clone)]
enum Repr {
    Atoms(Vec<FormAtom>),
    Procedural { eval: Arc<Evaluator>, breakpoints: Vec<f64> },
}

/// How `L_X` is computed pointwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LieMode {
    Analytic,
    /// Central difference of the pullback with step `h`.
    FiniteDifference { h: f64 },
    /// Central differences at `h` and `2h` combined to fourth order.
    Richardson { h: f64 },
}

/// A `k`-form on the suspension of dimension `n`.
#[derive(Clone)]
pub struct FormField {
    n: usize,
    k: usize,
    repr: Repr,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Atoms(a) => f.debug_struct("FormField").field("n", &self.n).field("k", &self.k).field("atoms", a).finish(),
            Repr::Procedural { breakpoints, .. } => f
                .debug_struct("FormField")
                .field("n", &self.n)
                .field("k", &self.k)
                .field("procedural_breakpoints", breakpoints)
                .finish(),
        }
    }
}

/// Outcome of [`FormField::gluing_check`].
#[derive(Clone, Debug, Serialize)]
pub struct GluingReport {
    pub residual: f64,
    pub samples: usize,
    pub tol: f64,
    pub pass: bool,
}

impl FormField {
    pub fn from_atoms(n: usize, k: usize, atoms: Vec<FormAtom>) -> Result<Self> {
        if k > n {
            return Err(Error::DegreeMismatch { left: k, right: n });
        }
        for a in &atoms {
            if a.degree() != k {
                return Err(Error::DegreeMismatch { left: k, right: a.degree() });
            }
            if a.index.max_index() > n {
                return Err(Error::InvalidAtom(format!("index {:?} exceeds dimension {n}", a.index)));
            }
        }
        Ok(FormField { n, k, repr: Repr::Atoms(atoms) })
    }

    /// Arbitrary evaluator on the fundamental domain, returning the form in
    /// the eigen-coframe. `breakpoints ⊂ [0, 1)` lists roof heights where the
    /// field is not smooth. Deck compatibility is the caller's claim and must
    /// be confirmed with [`FormField::gluing_check`].
    pub fn procedural<F>(n: usize, k: usize, breakpoints: Vec<f64>, eval: F) -> Self
    where
        F: Fn(&[f64], f64) -> AltForm + Send + Sync + 'static,
    {
        FormField { n, k, repr: Repr::Procedural { eval: Arc::new(eval), breakpoints } }
    }

    pub fn zero(n: usize, k: usize) -> Self {
        FormField { n, k, repr: Repr::Atoms(vec![]) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn atoms(&self) -> Option<&[FormAtom]> {
        match &self.repr {
            Repr::Atoms(a) => Some(a),
            Repr::Procedural { .. } => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.repr, Repr::Atoms(_))
    }

    /// Converts an atom field to a procedural one with the same values.
    pub fn as_procedural(&self) -> FormField {
        let this = self.clone();
        let bps = self.breakpoints();
        FormField::procedural(self.n, self.k, bps, move |x, s| this.form_at_coords(x, s))
    }

    /// Roof heights in `[0, 1)` where the field may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.repr {
            Repr::Atoms(atoms) => atoms.iter().flat_map(|a| a.profile.breakpoints()).collect(),
            Repr::Procedural { breakpoints, .. } => breakpoints.clone(),
        };
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup();
        b
    }

    /// The form at `(x, s)` with `s ∈ [0, 1)`.
    pub fn form_at_coords(&self, x: &[f64], s: f64) -> AltForm {
        match &self.repr {
            Repr::Atoms(atoms) => {
                let mut out = AltForm::zero(self.n, self.k);
                for a in atoms {
                    let c = a.coefficient(x, s);
                    if c != 0.0 {
                        out.add_term(a.index, c);
                    }
                }
                out
            }
            Repr::Procedural { eval, .. } => eval(x, s),
        }
    }

    pub fn form_at(&self, p: &Point) -> AltForm {
        self.form_at_coords(p.x(), p.s())
    }

    fn check_vectors(&self, p: &Point, vs: &[TangentVector]) -> Result<()> {
        if vs.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: vs.len() });
        }
        if vs.iter().any(|v| v.base() != p) {
            return Err(Error::BasePointMismatch);
        }
        Ok(())
    }

    fn eigen_vectors(flow: &SuspensionFlow, vs: &[TangentVector]) -> Vec<SmallVec<[f64; MAX_DIM]>> {
        vs.iter().map(|v| flow.to_eigen(v)).collect()
    }

    /// `ω_p(v_1, ..., v_k)`.
    pub fn evaluate(&self, flow: &SuspensionFlow, p: &Point, vs: &[TangentVector]) -> Result<f64> {
        self.check_vectors(p, vs)?;
        self.form_at(p).evaluate(&Self::eigen_vectors(flow, vs))
    }

    /// `(f_t^* ω)_p` in the eigen-coframe at `p`.
    pub fn pullback_form(&self, flow: &SuspensionFlow, t: f64, p: &Point) -> AltForm {
        match &self.repr {
            Repr::Atoms(atoms) => {
                let mut out = AltForm::zero(self.n, self.k);
                let mut transported: Vec<&FormAtom> = Vec::new();
                let lifted = p.s() + t;
                for a in atoms {
                    if a.is_spatially_constant() && !a.profile.shape.is_bump() {
                        // exact on the cover: the flow is a translation in s
                        let c = a.coeff * a.phase.cos() * a.profile.value(lifted);
                        if c != 0.0 {
                            out.add_term(a.index, c);
                        }
                    } else {
                        transported.push(a);
                    }
                }
                if !transported.is_empty() {
                    let q = flow.flow(p, t);
                    let mut at_q = AltForm::zero(self.n, self.k);
                    for a in transported {
                        let c = a.coefficient(q.x(), q.s());
                        if c != 0.0 {
                            at_q.add_term(a.index, c);
                        }
                    }
                    if !at_q.is_zero() {
                        let tm = flow.transport_eigen(flow.crossings(p, t));
                        out = &out + &at_q.pullback(&tm);
                    }
                }
                out
            }
            Repr::Procedural { .. } => self.pullback_form_transported(flow, t, p),
        }
    }

    /// General route: evaluate at `f_t(p)` and pull back through the tangent map.
    pub fn pullback_form_transported(&self, flow: &SuspensionFlow, t: f64, p: &Point) -> AltForm {
        let q = flow.flow(p, t);
        let tm = flow.transport_eigen(flow.crossings(p, t));
        self.form_at(&q).pullback(&tm)
    }

    /// `(f_t^* ω)_p(v_1, ..., v_k) = ω_{f_t p}(Tf_t v_1, ..., Tf_t v_k)`.
    pub fn pullback_evaluate(&self, flow: &SuspensionFlow, t: f64, p: &Point, vs: &[TangentVector]) -> Result<f64> {
        self.check_vectors(p, vs)?;
        self.pullback_form(flow, t, p).evaluate(&Self::eigen_vectors(flow, vs))
    }

    /// Pointwise `L_X ω` as a form at `p`, with an error estimate (zero in analytic mode).
    pub fn lie_form(&self, flow: &SuspensionFlow, p: &Point, mode: LieMode) -> Result<(AltForm, f64)> {
        let central = |h: f64| -> AltForm {
            let plus = self.pullback_form(flow, h, p);
            let minus = self.pullback_form(flow, -h, p);
            (&plus - &minus).scaled(1.0 / (2.0 * h))
        };
        match mode {
            LieMode::Analytic => Ok((self.lie_derivative_field()?.form_at(p), 0.0)),
            LieMode::FiniteDifference { h } => {
                check_step(h)?;
                Ok((central(h), 0.0))
            }
            LieMode::Richardson { h } => {
                check_step(h)?;
                let d1 = central(h);
                let d2 = central(2.0 * h);
                let r = (&d1.scaled(4.0) - &d2).scaled(1.0 / 3.0);
                let err = d1.max_abs_diff(&d2) / 3.0;
                Ok((r, err))
            }
        }
    }

    /// `(L_X ω)_p(v_1, ..., v_k)`.
    pub fn lie_derivative(&self, flow: &SuspensionFlow, p: &Point, vs: &[TangentVector], mode: LieMode) -> Result<f64> {
        self.check_vectors(p, vs)?;
        self.lie_form(flow, p, mode)?.0.evaluate(&Self::eigen_vectors(flow, vs))
    }

    /// `L_X ω` as an atom field.
    pub fn lie_derivative_field(&self) -> Result<FormField> {
        let atoms = self.atoms().ok_or(Error::NeedsAtoms("analytic Lie derivative"))?;
        Ok(FormField { n: self.n, k: self.k, repr: Repr::Atoms(atoms.iter().map(FormAtom::lie_derivative).collect()) })
    }

    /// `L_X ω` for any field: analytic for atoms, Richardson differences otherwise.
    pub fn lie_derivative_any(&self, flow: &SuspensionFlow) -> FormField {
        if let Ok(f) = self.lie_derivative_field() {
            return f;
        }
        let this = self.clone();
        let fl = flow.clone();
        let bps = self.breakpoints();
        FormField::procedural(self.n, self.k, bps, move |x, s| {
            let p = Point::new(x, s).expect("fundamental-domain point");
            this.lie_form(&fl, &p, LieMode::Richardson { h: tolerances::FD_STEP }).expect("positive step").0
        })
    }

    /// `dω`; atoms only.
    pub fn exterior_derivative(&self, flow: &SuspensionFlow) -> Result<FormField> {
        let atoms = self.atoms().ok_or(Error::NeedsAtoms("exterior derivative"))?;
        if self.k == self.n {
            return Ok(FormField::zero(self.n, self.n));
        }
        Ok(FormField {
            n: self.n,
            k: self.k + 1,
            repr: Repr::Atoms(atoms.iter().flat_map(|a| a.exterior_derivative(flow)).collect()),
        })
    }

    /// `i_X ω`.
    pub fn interior_x(&self) -> Result<FormField> {
        if self.k == 0 {
            return Err(Error::InteriorOfScalar);
        }
        let n = self.n;
        Ok(match &self.repr {
            Repr::Atoms(atoms) => {
                FormField { n, k: self.k - 1, repr: Repr::Atoms(atoms.iter().filter_map(|a| a.interior_x(n)).collect()) }
            }
            Repr::Procedural { eval, breakpoints } => {
                let eval = eval.clone();
                let mut x_vec = vec![0.0; n];
                x_vec[n - 1] = 1.0;
                FormField::procedural(n, self.k - 1, breakpoints.clone(), move |x, s| {
                    eval(x, s).interior(&x_vec).expect("degree checked")
                })
            }
        })
    }

    /// Hodge star of the Anosov metric.
    pub fn hodge_star(&self, flow: &SuspensionFlow) -> FormField {
        let n = self.n;
        match &self.repr {
            Repr::Atoms(atoms) => {
                FormField { n, k: n - self.k, repr: Repr::Atoms(atoms.iter().map(|a| a.hodge_star(flow)).collect()) }
            }
            Repr::Procedural { eval, breakpoints } => {
                let eval = eval.clone();
                let metric = flow.anosov_metric();
                FormField::procedural(n, n - self.k, breakpoints.clone(), move |x, s| {
                    exterior::hodge_star(&eval(x, s), &metric.frame_at(s)).expect("dimensions agree")
                })
            }
        }
    }

    /// `Σ c_i ω_i`; stays analytic when every input is.
    pub fn linear_combination(terms: &[(f64, &FormField)]) -> Result<FormField> {
        let first = terms.first().ok_or_else(|| Error::InvalidArgument("empty combination".into()))?.1;
        let (n, k) = (first.n, first.k);
        for (_, f) in terms {
            if f.n != n {
                return Err(Error::DimensionMismatch { expected: n, got: f.n });
            }
            if f.k != k {
                return Err(Error::DegreeMismatch { left: k, right: f.k });
            }
        }
        if terms.iter().all(|(_, f)| f.is_analytic()) {
            let atoms = terms
                .iter()
                .flat_map(|(c, f)| {
                    f.atoms().unwrap().iter().map(move |a| {
                        let mut a = a.clone();
                        a.coeff *= c;
                        a
                    })
                })
                .collect();
            return Ok(FormField { n, k, repr: Repr::Atoms(atoms) });
        }
        let parts: Vec<(f64, FormField)> = terms.iter().map(|(c, f)| (*c, (*f).clone())).collect();
        let mut bps: Vec<f64> = parts.iter().flat_map(|(_, f)| f.breakpoints()).collect();
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup();
        Ok(FormField::procedural(n, k, bps, move |x, s| {
            let mut out = AltForm::zero(n, k);
            for (c, f) in &parts {
                out.axpy(*c, &f.form_at_coords(x, s));
            }
            out
        }))
    }

    pub fn scaled(&self, c: f64) -> FormField {
        FormField::linear_combination(&[(c, self)]).expect("single term")
    }

    /// Compares the field just below the seam, paired with `v`, against the
    /// deck image paired with the transported `v`. Relative to the field size.
    pub fn gluing_check(&self, flow: &SuspensionFlow, samples: usize, tol: f64, seed: u64) -> GluingReport {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = flow.torus_dim();
        let tm = flow.transport_eigen(1);
        let eps = 1e-13;
        let mut residual = 0.0f64;
        for _ in 0..samples.max(1) {
            let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let below = self.form_at_coords(&x, 1.0 - eps);
            // ω_{(x,1⁻)}(v) against ω_{(Ax,0)}(Av)
            let above = self.form_at(&flow.point(&x, 1.0)).pullback(&tm);
            let scale = 1.0 + below.max_abs();
            residual = residual.max(below.max_abs_diff(&above) / scale);
        }
        GluingReport { residual, samples: samples.max(1), tol, pass: residual <= tol }
    }

    /// Upper bound for `sup |ω|` in the Anosov metric (coefficient sum in the orthonormal coframe).
    pub fn sup_scale(&self, flow: &SuspensionFlow) -> f64 {
        match &self.repr {
            Repr::Atoms(atoms) => atoms.iter().map(|a| a.sup_norm(flow)).sum(),
            Repr::Procedural { .. } => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5ca1e);
                let metric = flow.anosov_metric();
                let mut best = 0.0f64;
                for j in 0..400 {
                    let s = (j as f64 + 0.5) / 400.0;
                    let x: Vec<f64> = (0..flow.torus_dim()).map(|_| rng.random::<f64>()).collect();
                    let w = self.form_at_coords(&x, s);
                    let total: f64 = w
                        .terms()
                        .iter()
                        .map(|(idx, c)| (c * (-idx.indices().map(|i| metric.log_rates()[i - 1] * s).sum::<f64>()).exp()).abs())
                        .sum();
                    best = best.max(total);
                }
                best * 1.5
            }
        }
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("finite-difference step {h} must be positive")))
    }
}

/// `α = ds`.
pub fn canonical_alpha(flow: &SuspensionFlow) -> FormField {
    let n = flow.dim();
    let atom = FormAtom::periodic(flow, 1.0, IndexSet::single(n), Shape::constant(1.0)).expect("ds is deck invariant");
    FormField::from_atoms(n, 1, vec![atom]).expect("degree 1")
}

/// `Ω = θ_1 ∧ ... ∧ θ_m ∧ ds = dx¹ ∧ ... ∧ dx^m ∧ ds`.
pub fn volume_form(flow: &SuspensionFlow) -> FormField {
    let n = flow.dim();
    let atom = FormAtom::periodic(flow, 1.0, IndexSet::full(n), Shape::constant(1.0)).expect("det A = 1");
    FormField::from_atoms(n, n, vec![atom]).expect("top degree")
}

/// `i_X Ω = (-1)^{n-1} θ_1 ∧ ... ∧ θ_m`.
pub fn interior_x_volume(flow: &SuspensionFlow) -> FormField {
    volume_form(flow).interior_x().expect("top degree")
}

/// Which atom family [`random_atom`] draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomKind {
    /// `q = 0`, Fourier profile with deck-compatible base.
    Periodic,
    /// `q ≠ 0`, polynomial bump.
    Bump,
}

/// Random valid atom of degree `k`.
pub fn random_atom<R: Rng>(flow: &SuspensionFlow, rng: &mut R, k: usize, kind: AtomKind) -> FormAtom {
    let n = flow.dim();
    let sets: Vec<IndexSet> = IndexSet::all_of_degree(n, k)
        .into_iter()
        .filter(|&idx| match kind {
            AtomKind::Periodic => flow.automorphism().deck_factor(idx).is_some_and(|l| l > 0.0),
            AtomKind::Bump => true,
        })
        .collect();
    assert!(!sets.is_empty(), "no admissible index set of degree {k}");
    let index = sets[rng.random_range(0..sets.len())];
    random_atom_on(flow, rng, index, kind).expect("index filtered for a positive scalar deck factor")
}

/// Random atom on a fixed index set; periodic atoms need a positive scalar deck factor there.
pub fn random_atom_on<R: Rng>(flow: &SuspensionFlow, rng: &mut R, index: IndexSet, kind: AtomKind) -> Result<FormAtom> {
    let m = flow.torus_dim();
    let coeff = rng.random_range(-1.0..1.0);
    match kind {
        AtomKind::Periodic => {
            let harmonics = rng.random_range(0..3usize);
            let shape = Shape::Fourier {
                a0: rng.random_range(-1.0..1.0),
                cos: (0..harmonics).map(|_| rng.random_range(-0.5..0.5)).collect(),
                sin: (0..harmonics).map(|_| rng.random_range(-0.5..0.5)).collect(),
            };
            FormAtom::periodic(flow, coeff, index, shape)
        }
        AtomKind::Bump => {
            let mut freq: Vec<i64> = (0..m).map(|_| rng.random_range(-2..=2)).collect();
            if freq.iter().all(|&q| q == 0) {
                freq[0] = 1;
            }
            let delta = rng.random_range(0.05..0.2);
            let log_base = rng.random_range(-0.5..0.5);
            let phase = rng.random_range(0.0..2.0 * PI);
            FormAtom::bump(flow, coeff, index, &freq, phase, log_base, delta)
        }
    }
}

/// Random atom field with `count` atoms of either kind.
pub fn random_field<R: Rng>(flow: &SuspensionFlow, rng: &mut R, k: usize, count: usize) -> FormField {
    let atoms = (0..count)
        .map(|_| {
            let kind = if rng.random_bool(0.5) { AtomKind::Periodic } else { AtomKind::Bump };
            random_atom(flow, rng, k, kind)
        })
        .collect();
    FormField::from_atoms(flow.dim(), k, atoms).expect("degrees agree")
}

/// Fresh random atoms on the index sets of `field`, keeping each atom's kind.
pub fn random_partner<R: Rng>(flow: &SuspensionFlow, rng: &mut R, field: &FormField) -> Result<FormField> {
    let atoms = field.atoms().ok_or(Error::NeedsAtoms("random partner"))?;
    let fresh = atoms
        .iter()
        .map(|a| {
            let kind = if a.profile.shape.is_bump() { AtomKind::Bump } else { AtomKind::Periodic };
            random_atom_on(flow, rng, a.index, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    FormField::from_atoms(flow.dim(), field.degree(), fresh)
}

/// Samples a point in the interior of the fundamental domain.
pub fn random_point<R: Rng>(flow: &SuspensionFlow, rng: &mut R) -> Point {
    let x: Vec<f64> = (0..flow.torus_dim()).map(|_| rng.random::<f64>()).collect();
    Point::new(&x, wrap_unit(rng.random::<f64>())).expect("in range")
}
