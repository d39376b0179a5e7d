//! Exact exterior algebra on an oriented inner-product space of dimension n <= 8.
//!
//! Forms are stored sparsely as `(IndexSet, coefficient)` pairs, where an
//! [`IndexSet`] is an n-bit mask over the coframe `e^1, ..., e^n`. Vectors are
//! plain `&[f64]` slices of length n in the working frame.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 8;

/// A strictly increasing set of coframe indices in `1..=n`, stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet(u16);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);

    /// Builds an index set from 1-based indices, which must be strictly increasing and in `1..=n`.
    pub fn new(n: usize, indices: &[usize]) -> Result<Self> {
        if n > MAX_DIM {
            return Err(Error::InvalidIndexSet(format!("ambient dimension {n} exceeds {MAX_DIM}")));
        }
        let mut mask = 0u16;
        let mut prev = 0usize;
        for &i in indices {
            if i == 0 || i > n {
                return Err(Error::InvalidIndexSet(format!("index {i} outside 1..={n}")));
            }
            if i <= prev {
                return Err(Error::InvalidIndexSet(format!("indices {indices:?} not strictly increasing")));
            }
            prev = i;
            mask |= 1 << (i - 1);
        }
        Ok(IndexSet(mask))
    }

    pub const fn from_mask(mask: u16) -> Self {
        IndexSet(mask)
    }

    pub const fn mask(self) -> u16 {
        self.0
    }

    /// `{1, ..., n}`.
    pub const fn full(n: usize) -> Self {
        IndexSet(((1u32 << n) - 1) as u16)
    }

    pub const fn single(i: usize) -> Self {
        IndexSet(1 << (i - 1))
    }

    pub const fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn contains(self, i: usize) -> bool {
        i >= 1 && self.0 & (1 << (i - 1)) != 0
    }

    pub const fn is_disjoint(self, other: IndexSet) -> bool {
        self.0 & other.0 == 0
    }

    pub const fn union(self, other: IndexSet) -> Self {
        IndexSet(self.0 | other.0)
    }

    pub const fn without(self, i: usize) -> Self {
        IndexSet(self.0 & !(1 << (i - 1)))
    }

    pub const fn complement(self, n: usize) -> Self {
        IndexSet(!self.0 & Self::full(n).0)
    }

    pub fn max_index(self) -> usize {
        16 - self.0.leading_zeros() as usize
    }

    /// 1-based indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (1..=16).filter(move |i| mask & (1 << (i - 1)) != 0)
    }

    /// 0-based positions, convenient for slicing vectors.
    pub fn positions(self) -> SmallVec<[usize; MAX_DIM]> {
        self.indices().map(|i| i - 1).collect()
    }

    /// All index sets of degree `k` in `1..=n`, ordered by mask.
    pub fn all_of_degree(n: usize, k: usize) -> Vec<IndexSet> {
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| IndexSet(m as u16))
            .collect()
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "e^{{{}}}", idx.join(""))
    }
}

/// Sign of `e^a ∧ e^b` relative to `e^{a ∪ b}`, or 0 when the sets overlap.
pub fn wedge_sign(a: IndexSet, b: IndexSet) -> f64 {
    if !a.is_disjoint(b) {
        return 0.0;
    }
    // count pairs (i in a, j in b) with i > j
    let mut swaps = 0u32;
    for j in b.indices() {
        swaps += (a.0 >> j).count_ones();
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Determinant of a row-major k x k matrix by Gaussian elimination with partial pivoting.
pub fn det_small(a: &mut [f64], k: usize) -> f64 {
    debug_assert_eq!(a.len(), k * k);
    let mut det = 1.0;
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].abs();
        for r in col + 1..k {
            let v = a[r * k + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..k {
                a.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let d = a[col * k + col];
        det *= d;
        for r in col + 1..k {
            let f = a[r * k + col] / d;
            if f != 0.0 {
                for c in col + 1..k {
                    a[r * k + c] -= f * a[col * k + c];
                }
            }
        }
    }
    det
}

/// Determinant of the submatrix with rows `rows` and columns `cols` of a row-major n x n matrix.
fn minor(mat: &[f64], n: usize, rows: IndexSet, cols: IndexSet) -> f64 {
    let r = rows.positions();
    let c = cols.positions();
    let k = r.len();
    match k {
        0 => 1.0,
        1 => mat[r[0] * n + c[0]],
        2 => mat[r[0] * n + c[0]] * mat[r[1] * n + c[1]] - mat[r[0] * n + c[1]] * mat[r[1] * n + c[0]],
        _ => {
            let mut buf = [0.0; MAX_DIM * MAX_DIM];
            for (a, &ri) in r.iter().enumerate() {
                for (b, &cj) in c.iter().enumerate() {
                    buf[a * k + b] = mat[ri * n + cj];
                }
            }
            det_small(&mut buf[..k * k], k)
        }
    }
}

/// An alternating k-form on an n-dimensional space.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct AltForm {
    n: usize,
    k: usize,
    terms: SmallVec<[(IndexSet, f64); 8]>,
}

impl fmt::Debug for AltForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AltForm(n={}, k={}: ", self.n, self.k)?;
        for (i, (idx, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·{idx:?}")?;
        }
        write!(f, ")")
    }
}

impl AltForm {
    pub fn zero(n: usize, k: usize) -> Self {
        assert!(n <= MAX_DIM && k <= n, "AltForm::zero: k = {k}, n = {n}");
        AltForm { n, k, terms: SmallVec::new() }
    }

    pub fn scalar(n: usize, value: f64) -> Self {
        let mut f = Self::zero(n, 0);
        f.set(IndexSet::EMPTY, value);
        f
    }

    /// The basis element `e^I`.
    pub fn basis(n: usize, idx: IndexSet) -> Self {
        assert!(idx.max_index() <= n);
        let mut f = Self::zero(n, idx.degree());
        f.terms.push((idx, 1.0));
        f
    }

    /// `e^{1..n}`.
    pub fn top(n: usize) -> Self {
        Self::basis(n, IndexSet::full(n))
    }

    /// The 1-form `sum_i c_i e^i`.
    pub fn one_form(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        Self::from_terms(n, 1, coeffs.iter().enumerate().map(|(i, &c)| (IndexSet::single(i + 1), c)))
            .expect("one_form: valid by construction")
    }

    /// Builds a form from arbitrary (possibly repeated) terms; repeated keys are summed.
    pub fn from_terms(n: usize, k: usize, terms: impl IntoIterator<Item = (IndexSet, f64)>) -> Result<Self> {
        let mut f = Self::zero(n, k);
        for (idx, c) in terms {
            if idx.degree() != k {
                return Err(Error::DegreeMismatch { left: k, right: idx.degree() });
            }
            if idx.max_index() > n {
                return Err(Error::InvalidIndexSet(format!("{idx:?} outside dimension {n}")));
            }
            f.add_term(idx, c);
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &[(IndexSet, f64)] {
        &self.terms
    }

    pub fn coeff(&self, idx: IndexSet) -> f64 {
        match self.terms.binary_search_by_key(&idx, |t| t.0) {
            Ok(p) => self.terms[p].1,
            Err(_) => 0.0,
        }
    }

    fn set(&mut self, idx: IndexSet, value: f64) {
        match self.terms.binary_search_by_key(&idx, |t| t.0) {
            Ok(p) => self.terms[p].1 = value,
            Err(p) => self.terms.insert(p, (idx, value)),
        }
    }

    pub(crate) fn add_term(&mut self, idx: IndexSet, value: f64) {
        match self.terms.binary_search_by_key(&idx, |t| t.0) {
            Ok(p) => self.terms[p].1 += value,
            Err(p) => self.terms.insert(p, (idx, value)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.1.abs()))
    }

    /// Largest absolute coefficient of `self - other`.
    pub fn max_abs_diff(&self, other: &AltForm) -> f64 {
        assert_eq!((self.n, self.k), (other.n, other.k), "max_abs_diff: shape mismatch");
        let mut m = 0.0f64;
        for &(idx, c) in &self.terms {
            m = m.max((c - other.coeff(idx)).abs());
        }
        for &(idx, c) in &other.terms {
            m = m.max((c - self.coeff(idx)).abs());
        }
        m
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for t in out.terms.iter_mut() {
            t.1 *= s;
        }
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &AltForm) {
        assert_eq!((self.n, self.k), (other.n, other.k), "axpy: shape mismatch");
        for &(idx, c) in &other.terms {
            self.add_term(idx, s * c);
        }
    }

    /// Exterior product. A result beyond top degree is the zero n-form.
    pub fn wedge(&self, other: &AltForm) -> Result<AltForm> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let n = self.n;
        if self.k + other.k > n {
            return Ok(AltForm::zero(n, n));
        }
        let mut out = AltForm::zero(n, self.k + other.k);
        for &(a, ca) in &self.terms {
            for &(b, cb) in &other.terms {
                let s = wedge_sign(a, b);
                if s != 0.0 {
                    out.add_term(a.union(b), s * ca * cb);
                }
            }
        }
        Ok(out)
    }

    /// Interior product `i_v`.
    pub fn interior(&self, v: &[f64]) -> Result<AltForm> {
        if self.k == 0 {
            return Err(Error::InteriorOfScalar);
        }
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        let mut out = AltForm::zero(self.n, self.k - 1);
        for &(idx, c) in &self.terms {
            for (pos, i) in idx.indices().enumerate() {
                let vi = v[i - 1];
                if vi != 0.0 {
                    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    out.add_term(idx.without(i), sign * c * vi);
                }
            }
        }
        Ok(out)
    }

    /// Value of the form on k vectors.
    pub fn evaluate<V: AsRef<[f64]>>(&self, vs: &[V]) -> Result<f64> {
        if vs.len() != self.k {
            return Err(Error::DegreeMismatch { left: self.k, right: vs.len() });
        }
        for v in vs {
            if v.as_ref().len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: v.as_ref().len() });
            }
        }
        let k = self.k;
        let mut sum = 0.0;
        let mut buf = [0.0; MAX_DIM * MAX_DIM];
        for &(idx, c) in &self.terms {
            if c == 0.0 {
                continue;
            }
            for (a, i) in idx.positions().into_iter().enumerate() {
                for (b, v) in vs.iter().enumerate() {
                    buf[a * k + b] = v.as_ref()[i];
                }
            }
            sum += c * det_small(&mut buf[..k * k], k);
        }
        Ok(sum)
    }

    /// Pullback `T^* a` under a linear map given as a row-major n x n matrix
    /// whose columns are the images of the basis vectors.
    pub fn pullback(&self, map: &[f64]) -> AltForm {
        let n = self.n;
        assert_eq!(map.len(), n * n, "pullback: map must be n x n");
        if self.k == 0 {
            return self.clone();
        }
        let mut out = AltForm::zero(n, self.k);
        for target in IndexSet::all_of_degree(n, self.k) {
            let mut v = 0.0;
            for &(idx, c) in &self.terms {
                if c != 0.0 {
                    v += c * minor(map, n, idx, target);
                }
            }
            if v != 0.0 {
                out.add_term(target, v);
            }
        }
        out
    }

    /// Drops exact zeros.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|t| t.1 != 0.0);
        self
    }
}

impl Add for &AltForm {
    type Output = AltForm;
    fn add(self, rhs: &AltForm) -> AltForm {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &AltForm {
    type Output = AltForm;
    fn sub(self, rhs: &AltForm) -> AltForm {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &AltForm {
    type Output = AltForm;
    fn neg(self) -> AltForm {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &AltForm {
    type Output = AltForm;
    fn mul(self, s: f64) -> AltForm {
        self.scaled(s)
    }
}

/// An inner product on the working frame together with an orientation and a
/// reference volume form `ω = orientation · volume_scale · sqrt(det gram) · e^{1..n}`.
///
/// With `volume_scale = 1` the reference volume is the metric volume `vol(g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricFrame {
    n: usize,
    gram: Vec<f64>,
    inverse: Vec<f64>,
    det: f64,
    orientation: f64,
    volume_scale: f64,
    diagonal: bool,
}

impl MetricFrame {
    /// Builds a metric from a row-major symmetric positive-definite Gram matrix.
    pub fn new(n: usize, gram: Vec<f64>) -> Result<Self> {
        if gram.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: gram.len() });
        }
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidArgument(format!("metric dimension {n} outside 1..={MAX_DIM}")));
        }
        let scale = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (gram[i * n + j] - gram[j * n + i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || gram[i * n + j] == 0.0));
        if diagonal {
            if gram.iter().step_by(n + 1).any(|&d| !(d > 0.0) || !d.is_finite()) {
                return Err(Error::NotPositiveDefinite);
            }
            let inverse = (0..n * n)
                .map(|p| if p % (n + 1) == 0 { 1.0 / gram[p] } else { 0.0 })
                .collect();
            let det = gram.iter().step_by(n + 1).product();
            return Ok(MetricFrame { n, gram, inverse, det, orientation: 1.0, volume_scale: 1.0, diagonal });
        }
        let m = DMatrix::from_row_slice(n, n, &gram);
        let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let det = l.diagonal().iter().map(|d| d * d).product::<f64>();
        if !(det > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let inv = chol.inverse();
        let mut inverse = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                // symmetrize away round-off
                inverse[i * n + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        Ok(MetricFrame { n, gram, inverse, det, orientation: 1.0, volume_scale: 1.0, diagonal })
    }

    pub fn euclidean(n: usize) -> Self {
        Self::diagonal_metric(&vec![1.0; n]).expect("identity is SPD")
    }

    pub fn diagonal_metric(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        let mut gram = vec![0.0; n * n];
        for (i, &d) in entries.iter().enumerate() {
            gram[i * n + i] = d;
        }
        Self::new(n, gram)
    }

    pub fn with_orientation(mut self, sign: f64) -> Self {
        self.orientation = sign.signum();
        self
    }

    /// Rescales the reference volume so that it equals the coordinate volume `e^{1..n}`.
    pub fn with_coordinate_volume(mut self) -> Self {
        self.volume_scale = self.det.powf(-0.5);
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn inverse_gram(&self) -> &[f64] {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn volume_scale(&self) -> f64 {
        self.volume_scale
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// `g(u, v)`.
    pub fn vector_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        if self.diagonal {
            return (0..n).map(|i| self.gram[i * n + i] * u[i] * v[i]).sum();
        }
        let mut s = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.gram[i * n + j] * v[j];
            }
            s += u[i] * row;
        }
        s
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.vector_inner(v, v).max(0.0).sqrt()
    }

    /// The reference volume form.
    pub fn volume_form(&self) -> AltForm {
        AltForm::top(self.n).scaled(self.volume_coefficient())
    }

    fn volume_coefficient(&self) -> f64 {
        self.orientation * self.volume_scale * self.det.sqrt()
    }

    /// `det(G^{-1}[I, J])`, the induced inner product of `e^I` and `e^J`.
    fn induced(&self, a: IndexSet, b: IndexSet) -> f64 {
        if self.diagonal {
            if a != b {
                return 0.0;
            }
            return a.positions().iter().map(|&p| self.inverse[p * self.n + p]).product();
        }
        minor(&self.inverse, self.n, a, b)
    }

    fn check(&self, a: &AltForm) -> Result<()> {
        if a.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: a.n });
        }
        Ok(())
    }

    /// Raises all indices of `a` with the inverse metric.
    fn sharp(&self, a: &AltForm) -> AltForm {
        if self.diagonal {
            let mut out = a.clone();
            for t in out.terms.iter_mut() {
                t.1 *= self.induced(t.0, t.0);
            }
            return out;
        }
        let mut out = AltForm::zero(self.n, a.k);
        for target in IndexSet::all_of_degree(self.n, a.k) {
            let v: f64 = a.terms.iter().map(|&(idx, c)| c * self.induced(target, idx)).sum();
            if v != 0.0 {
                out.add_term(target, v);
            }
        }
        out
    }
}

/// Hodge star: the unique `⋆η` with `ξ ∧ ⋆η = ⟨ξ, η⟩ ω` for every `ξ` of the same degree.
pub fn hodge_star(a: &AltForm, m: &MetricFrame) -> Result<AltForm> {
    m.check(a)?;
    let n = a.n;
    let raised = m.sharp(a);
    let c = m.volume_coefficient();
    let mut out = AltForm::zero(n, n - a.k);
    for &(idx, v) in &raised.terms {
        let comp = idx.complement(n);
        out.add_term(comp, c * wedge_sign(idx, comp) * v);
    }
    Ok(out)
}

/// Induced inner product of two forms of equal degree.
pub fn inner(a: &AltForm, b: &AltForm, m: &MetricFrame) -> Result<f64> {
    m.check(a)?;
    m.check(b)?;
    if a.k != b.k {
        return Err(Error::DegreeMismatch { left: a.k, right: b.k });
    }
    if m.diagonal {
        let mut s = 0.0;
        for &(idx, c) in &a.terms {
            let d = b.coeff(idx);
            if d != 0.0 {
                s += c * d * m.induced(idx, idx);
            }
        }
        return Ok(s);
    }
    let mut s = 0.0;
    for &(ia, ca) in &a.terms {
        for &(ib, cb) in &b.terms {
            s += ca * cb * m.induced(ia, ib);
        }
    }
    Ok(s)
}

/// k-dimensional volume of the parallelepiped spanned by `vs`; 0 when degenerate.
pub fn k_volume<V: AsRef<[f64]>>(vs: &[V], m: &MetricFrame) -> Result<f64> {
    let k = vs.len();
    if k == 0 || k > m.n {
        return Err(Error::InvalidArgument(format!("k_volume needs 1..={} vectors, got {k}", m.n)));
    }
    for v in vs {
        if v.as_ref().len() != m.n {
            return Err(Error::DimensionMismatch { expected: m.n, got: v.as_ref().len() });
        }
    }
    let mut gram = [0.0; MAX_DIM * MAX_DIM];
    for a in 0..k {
        for b in a..k {
            let g = m.vector_inner(vs[a].as_ref(), vs[b].as_ref());
            gram[a * k + b] = g;
            gram[b * k + a] = g;
        }
    }
    let det = det_small(&mut gram[..k * k], k);
    Ok(det.max(0.0).sqrt())
}

/// The metric dual `θ_v = g(v, ·)`.
pub fn dual_one_form(v: &[f64], m: &MetricFrame) -> Result<AltForm> {
    if v.len() != m.n {
        return Err(Error::DimensionMismatch { expected: m.n, got: v.len() });
    }
    let n = m.n;
    let coeffs: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.gram[i * n + j] * v[j]).sum()).collect();
    Ok(AltForm::one_form(&coeffs).pruned())
}

/// Maximum errors of the built-in algebra identities over `trials` random cases.
#[derive(Clone, Debug, Serialize)]
pub struct SelfTestReport {
    pub trials: usize,
    pub star_involution_max_error: f64,
    pub hodge_identity_max_error: f64,
    pub dual_form_identity_max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Randomized check of `⋆⋆ = (-1)^{k(n-k)}`, `ξ ∧ ⋆η = ⟨ξ,η⟩ω` and
/// `⋆(i_v ω) = (-1)^{n-1} θ_v` on random SPD metrics with `n <= 6`.
pub fn self_test(trials: usize, seed: u64) -> SelfTestReport {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut star, mut hodge, mut dual) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let n = rng.random_range(1..=6usize);
        let k = rng.random_range(0..=n);
        let m = random_spd(&mut rng, n);
        let xi = random_form(&mut rng, n, k);
        let eta = random_form(&mut rng, n, k);

        let ss = hodge_star(&hodge_star(&eta, &m).unwrap(), &m).unwrap();
        let sign = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
        star = star.max(ss.max_abs_diff(&eta.scaled(sign)));

        let lhs = xi.wedge(&hodge_star(&eta, &m).unwrap()).unwrap();
        let rhs = m.volume_form().scaled(inner(&xi, &eta, &m).unwrap());
        hodge = hodge.max(lhs.max_abs_diff(&rhs));

        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = hodge_star(&m.volume_form().interior(&v).unwrap(), &m).unwrap();
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = dual_one_form(&v, &m).unwrap().scaled(sign);
        dual = dual.max(lhs.max_abs_diff(&rhs));
    }
    let tol = crate::tolerances::EXACT_ALGEBRA;
    SelfTestReport {
        trials,
        star_involution_max_error: star,
        hodge_identity_max_error: hodge,
        dual_form_identity_max_error: dual,
        tolerance: tol,
        pass: star <= tol && hodge <= tol && dual <= tol,
    }
}

/// Random form with coefficients uniform in [-1, 1].
pub fn random_form<R: rand::Rng>(rng: &mut R, n: usize, k: usize) -> AltForm {
    AltForm::from_terms(
        n,
        k,
        IndexSet::all_of_degree(n, k).into_iter().map(|idx| (idx, rng.random_range(-1.0..1.0))),
    )
    .expect("degrees agree by construction")
}

/// Random well-conditioned SPD metric `B Bᵀ + I/2` with `B` uniform in [-0.5, 0.5].
pub fn random_spd<R: rand::Rng>(rng: &mut R, n: usize) -> MetricFrame {
    let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = if i == j { 0.5 } else { 0.0 };
            for l in 0..n {
                s += b[i * n + l] * b[j * n + l];
            }
            g[i * n + j] = s;
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[j * n + i] = g[i * n + j];
        }
    }
    MetricFrame::new(n, g).expect("B Bᵀ + I/2 is SPD")
}
