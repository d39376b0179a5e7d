//! Suspension flows of hyperbolic toral automorphisms with constant roof 1.
//!
//! The manifold is `T^m × [0,1]` with `(x, 1) ~ (A x, 0)`, the flow moves the
//! roof coordinate `s` at unit speed, and its generator is `X = ∂/∂s`. Tangent
//! vectors are stored in the ambient frame `(∂/∂x¹, ..., ∂/∂x^m, ∂/∂s)`. Most
//! computations happen in the eigen-frame `(e_1, ..., e_m, X)`, in which the
//! tangent map of the flow is block diagonal.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exterior::{IndexSet, MetricFrame, MAX_DIM};
use crate::fit::fit_line;
use crate::snf::{rational_kernel_mod_one, IntMatrix};
use crate::tolerances;

pub(crate) type Coords = SmallVec<[f64; MAX_DIM]>;

/// `v mod 1` in `[0, 1)`.
pub fn wrap_unit(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// A point of the suspension in its fundamental domain: torus position in
/// `[0,1)^m` and roof coordinate `s ∈ [0,1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    x: Coords,
    s: f64,
}

impl Point {
    /// Torus coordinates are wrapped mod 1; `s` must already lie in `[0, 1)`.
    /// Use [`SuspensionFlow::point`] to normalise an arbitrary `s` through the deck map.
    pub fn new(x: &[f64], s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("roof coordinate {s} outside [0, 1)")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite torus coordinate".into()));
        }
        Ok(Point { x: x.iter().map(|&v| wrap_unit(v)).collect(), s })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// A tangent vector attached to a normalised base point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentVector {
    base: Point,
    torus: Coords,
    s_part: f64,
}

impl TangentVector {
    pub fn new(base: Point, torus_part: &[f64], s_part: f64) -> Result<Self> {
        if torus_part.len() != base.x.len() {
            return Err(Error::DimensionMismatch { expected: base.x.len(), got: torus_part.len() });
        }
        Ok(TangentVector { base, torus: torus_part.iter().copied().collect(), s_part })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn torus_part(&self) -> &[f64] {
        &self.torus
    }

    pub fn s_part(&self) -> f64 {
        self.s_part
    }

    /// Ambient components `(torus_part, s_part)`.
    pub fn components(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.torus.to_vec();
        c.push(self.s_part);
        c
    }
}

/// One diagonal block of the real Jordan form of the automorphism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EigenBlock {
    Real { value: f64 },
    /// Acts as `modulus · R(angle)` on two consecutive eigen-coordinates.
    Rotation { modulus: f64, angle: f64 },
}

impl EigenBlock {
    pub fn width(&self) -> usize {
        match self {
            EigenBlock::Real { .. } => 1,
            EigenBlock::Rotation { .. } => 2,
        }
    }

    pub fn modulus(&self) -> f64 {
        match *self {
            EigenBlock::Real { value } => value.abs(),
            EigenBlock::Rotation { modulus, .. } => modulus,
        }
    }
}

/// Integer matrix with `|det| = 1` and no eigenvalue on the unit circle,
/// together with a real block-eigenframe `P` normalised to `det P = 1`.
#[derive(Clone, Debug)]
pub struct HyperbolicAutomorphism {
    m: usize,
    matrix: Vec<i64>,
    inverse: Vec<i64>,
    det: i64,
    blocks: Vec<EigenBlock>,
    frame: Vec<f64>,
    coframe: Vec<f64>,
    log_rates: Vec<f64>,
}

impl HyperbolicAutomorphism {
    pub fn new(m: usize, matrix: Vec<i64>) -> Result<Self> {
        if m < 2 || m + 1 > MAX_DIM {
            return Err(Error::InvalidModel(format!("torus dimension {m} outside 2..={}", MAX_DIM - 1)));
        }
        if matrix.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, got: matrix.len() });
        }
        let int = IntMatrix::new(m, matrix.iter().map(|&v| v as i128).collect());
        let det = int.det()?;
        if det.abs() != 1 {
            return Err(Error::InvalidModel(format!("|det A| must be 1, got {det}")));
        }
        let a: Vec<f64> = matrix.iter().map(|&v| v as f64).collect();
        let dm = DMatrix::from_row_slice(m, m, &a);
        let inv_f = dm.clone().try_inverse().ok_or_else(|| Error::InvalidModel("singular matrix".into()))?;
        let inverse: Vec<i64> = (0..m * m).map(|p| inv_f[(p / m, p % m)].round() as i64).collect();
        let check = int.checked_mul(&IntMatrix::new(m, inverse.iter().map(|&v| v as i128).collect()))?;
        if check != IntMatrix::identity(m) {
            return Err(Error::InvalidModel("integer inverse check failed".into()));
        }
        let (blocks, frame) = real_eigenframe(m, &a)?;
        let coframe_m = DMatrix::from_row_slice(m, m, &frame)
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("eigenframe is singular".into()))?;
        let coframe: Vec<f64> = (0..m * m).map(|p| coframe_m[(p / m, p % m)]).collect();
        let mut log_rates = Vec::with_capacity(m);
        for b in &blocks {
            for _ in 0..b.width() {
                log_rates.push(b.modulus().ln());
            }
        }
        Ok(HyperbolicAutomorphism { m, matrix, inverse, det: det as i64, blocks, frame, coframe, log_rates })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &[i64] {
        &self.matrix
    }

    pub fn inverse(&self) -> &[i64] {
        &self.inverse
    }

    pub fn det(&self) -> i64 {
        self.det
    }

    pub fn int_matrix(&self) -> IntMatrix {
        IntMatrix::new(self.m, self.matrix.iter().map(|&v| v as i128).collect())
    }

    pub fn blocks(&self) -> &[EigenBlock] {
        &self.blocks
    }

    /// Row-major `P`; column `j` is the `j`-th eigen-frame vector.
    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    /// Row-major `P⁻¹`; row `j` is the coframe covector `θ_j` in `dx` coordinates.
    pub fn coframe(&self) -> &[f64] {
        &self.coframe
    }

    /// `ln |λ|` per eigen-coordinate.
    pub fn log_rates(&self) -> &[f64] {
        &self.log_rates
    }

    pub fn unstable_dim(&self) -> usize {
        self.log_rates.iter().filter(|&&l| l > 0.0).count()
    }

    pub fn stable_dim(&self) -> usize {
        self.log_rates.iter().filter(|&&l| l < 0.0).count()
    }

    /// Dominant eigenvalue modulus.
    pub fn expansion(&self) -> f64 {
        self.blocks[0].modulus()
    }

    /// Factor picked up by `θ_I` under the deck map, or `None` when the index
    /// set cuts through a rotation block (the factor is then a matrix).
    /// Index `m + 1` is `ds`, which is deck invariant.
    pub fn deck_factor(&self, idx: IndexSet) -> Option<f64> {
        if (1..=self.m).all(|i| idx.contains(i)) {
            return Some(self.det as f64);
        }
        let mut f = 1.0;
        let mut start = 0;
        for blk in &self.blocks {
            match *blk {
                EigenBlock::Real { value } => {
                    if idx.contains(start + 1) {
                        f *= value;
                    }
                }
                EigenBlock::Rotation { modulus, .. } => {
                    match (idx.contains(start + 1), idx.contains(start + 2)) {
                        (true, true) => f *= modulus * modulus,
                        (false, false) => {}
                        _ => return None,
                    }
                }
            }
            start += blk.width();
        }
        Some(f)
    }
}

fn null_space(mat: &DMatrix<f64>, dim: usize, scale: f64) -> Result<Vec<Vec<f64>>> {
    let m = mat.nrows();
    let svd = mat.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidModel("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let tol = 1e-7 * scale.max(1.0);
    let mut out = Vec::with_capacity(dim);
    for &i in order.iter().take(dim) {
        if svd.singular_values[i] > tol {
            return Err(Error::InvalidModel("automorphism is not diagonalisable over ℂ".into()));
        }
        out.push((0..m).map(|c| v_t[(i, c)]).collect());
    }
    Ok(out)
}

fn normalize_sign(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lead = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-12 { x } else { best });
    let s = if lead < 0.0 { -1.0 / norm } else { 1.0 / norm };
    for x in v.iter_mut() {
        *x *= s;
    }
}

/// Real block-eigenframe ordered by decreasing modulus, scaled so that `det P = 1`.
fn real_eigenframe(m: usize, a: &[f64]) -> Result<(Vec<EigenBlock>, Vec<f64>)> {
    let dm = DMatrix::from_row_slice(m, m, a);
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let eig = dm.clone().complex_eigenvalues();
    let mut reals: Vec<f64> = Vec::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for z in eig.iter() {
        if (z.norm() - 1.0).abs() <= tolerances::HYPERBOLICITY_GAP {
            return Err(Error::NotHyperbolic { modulus: z.norm() });
        }
        if z.im.abs() <= 1e-9 * scale.max(1.0) {
            reals.push(z.re);
        } else if z.im > 0.0 {
            pairs.push((z.re, z.im));
        }
    }
    // cluster numerically repeated real eigenvalues
    reals.sort_by(|x, y| y.abs().partial_cmp(&x.abs()).unwrap().then(y.partial_cmp(x).unwrap()));
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for r in reals {
        match clusters.last_mut() {
            Some((v, c)) if (r - *v / *c as f64).abs() <= tolerances::EIGENVALUE_CLUSTER * r.abs().max(1.0) => {
                *v += r;
                *c += 1;
            }
            _ => clusters.push((r, 1)),
        }
    }
    enum Group {
        Real(f64, usize),
        Pair(f64, f64),
    }
    let mut groups: Vec<Group> = clusters.into_iter().map(|(v, c)| Group::Real(v / c as f64, c)).collect();
    groups.extend(pairs.into_iter().map(|(re, im)| Group::Pair(re, im)));
    let modulus = |g: &Group| match *g {
        Group::Real(v, _) => v.abs(),
        Group::Pair(re, im) => re.hypot(im),
    };
    groups.sort_by(|g, h| modulus(h).partial_cmp(&modulus(g)).unwrap());

    let mut blocks = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for g in &groups {
        match *g {
            Group::Real(v, count) => {
                let shifted = &dm - DMatrix::identity(m, m) * v;
                for mut vec in null_space(&shifted, count, scale)? {
                    normalize_sign(&mut vec);
                    cols.push(vec);
                    blocks.push(EigenBlock::Real { value: v });
                }
            }
            Group::Pair(re, im) => {
                let quad = &dm * &dm - &dm * (2.0 * re) + DMatrix::identity(m, m) * (re * re + im * im);
                let mut ns = null_space(&quad, 2, scale * scale)?;
                let mut w1 = ns.swap_remove(0);
                normalize_sign(&mut w1);
                let aw1: Vec<f64> = (0..m).map(|i| (0..m).map(|j| a[i * m + j] * w1[j]).sum()).collect();
                let w2: Vec<f64> = (0..m).map(|i| (aw1[i] - re * w1[i]) / im).collect();
                cols.push(w1);
                cols.push(w2);
                blocks.push(EigenBlock::Rotation { modulus: re.hypot(im), angle: im.atan2(re) });
            }
        }
    }
    if cols.len() != m {
        return Err(Error::InvalidModel("eigen-decomposition incomplete".into()));
    }
    let mut frame = vec![0.0; m * m];
    let fill = |frame: &mut Vec<f64>, cols: &Vec<Vec<f64>>| {
        for (j, c) in cols.iter().enumerate() {
            for i in 0..m {
                frame[i * m + j] = c[i];
            }
        }
    };
    fill(&mut frame, &cols);
    let mut det = DMatrix::from_row_slice(m, m, &frame).determinant();
    if det < 0.0 {
        // orientation: flip the leading real column, or conjugate a leading rotation block
        match &mut blocks[0] {
            EigenBlock::Real { .. } => cols[0].iter_mut().for_each(|x| *x = -*x),
            EigenBlock::Rotation { angle, .. } => {
                cols[1].iter_mut().for_each(|x| *x = -*x);
                *angle = -*angle;
            }
        }
        fill(&mut frame, &cols);
        det = -det;
    }
    // rescale the stable directions so that det P = 1
    let stable: Vec<usize> = {
        let mut idx = Vec::new();
        let mut start = 0;
        for blk in &blocks {
            if blk.modulus() < 1.0 {
                idx.extend(start..start + blk.width());
            }
            start += blk.width();
        }
        idx
    };
    if stable.is_empty() {
        return Err(Error::InvalidModel("no stable directions".into()));
    }
    let kappa = det.powf(-1.0 / stable.len() as f64);
    for &j in &stable {
        cols[j].iter_mut().for_each(|x| *x *= kappa);
    }
    fill(&mut frame, &cols);
    Ok((blocks, frame))
}

/// The constant invariant splitting, in ambient components `(torus, s)`.
#[derive(Clone, Debug, Serialize)]
pub struct Splitting {
    pub unstable: Vec<Vec<f64>>,
    pub stable: Vec<Vec<f64>>,
    pub center: Vec<f64>,
}

/// `(♠)`-type constants: `‖Tf_t v‖ ≤ c e^{-νt}‖v‖` on `E^ss` and
/// `‖Tf_t w‖ ≥ c⁻¹ e^{λt}‖w‖` on `E^uu`, for `t ≥ 0`.
#[derive(Clone, Debug, Serialize)]
pub struct HyperbolicityConstants {
    pub c: f64,
    pub nu: f64,
    pub lambda: f64,
    pub r2_stable: f64,
    pub r2_unstable: f64,
    pub convention: NormConvention,
}

/// Which norm `measure_constants` uses on transported vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormConvention {
    /// The deck-invariant Anosov metric of [`AnosovMetric`].
    Adapted,
    /// The `s = 0` eigen-orthonormal metric applied at every point; not
    /// continuous across the seam, so `c > 1` in general.
    Frozen,
}

/// The Anosov metric `g_s = diag(|λ_1|^{2s}, ..., |λ_m|^{2s}, 1)` in the eigen-frame.
///
/// It is invariant under the deck map, makes `X` a unit vector orthogonal to
/// `E^ss ⊕ E^uu`, and has `vol(g) = Ω` because `∏|λ_i| = |det A| = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnosovMetric {
    log_rates: Vec<f64>,
}

impl AnosovMetric {
    pub fn dim(&self) -> usize {
        self.log_rates.len()
    }

    /// `ln σ_i(s)` per eigen-frame direction, with `g_s(e_i, e_i) = σ_i(s)²`.
    pub fn log_scales(&self, s: f64) -> Coords {
        self.log_rates.iter().map(|l| l * s).collect()
    }

    pub fn frame_at(&self, s: f64) -> MetricFrame {
        let d: Vec<f64> = self.log_rates.iter().map(|l| (2.0 * l * s).exp()).collect();
        MetricFrame::diagonal_metric(&d).expect("exponentials are positive")
    }

    /// Norm of a vector given in eigen-frame components at roof height `s`.
    pub fn norm(&self, s: f64, eigen: &[f64]) -> f64 {
        eigen.iter().zip(&self.log_rates).map(|(c, l)| (c * (l * s).exp()).powi(2)).sum::<f64>().sqrt()
    }

    pub fn log_rates(&self) -> &[f64] {
        &self.log_rates
    }
}

/// A point of period `p` of the Poincaré map, with its exact rational coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodicPoint {
    pub point: Point,
    pub period: u32,
    pub denominator: i128,
    pub numerators: Vec<i128>,
}

/// Tangent vector after a very long flow time, stored per eigen-block as a
/// log-magnitude and a unit direction so that nothing overflows.
#[derive(Clone, Debug)]
pub struct LogTangent {
    pub base: Point,
    /// `(ln ‖block component‖, unit direction within the block)`; the last entry is the `X` component.
    pub blocks: Vec<(f64, Coords)>,
}

impl LogTangent {
    /// `ln ‖v‖` in the Anosov metric at the base point.
    pub fn log_norm(&self, metric: &AnosovMetric) -> f64 {
        let mut coord = 0;
        let mut terms = Vec::with_capacity(self.blocks.len());
        for (lm, dir) in &self.blocks {
            let rate = metric.log_rates[coord];
            coord += dir.len();
            if lm.is_finite() {
                terms.push(2.0 * (lm + rate * self.base.s));
            }
        }
        0.5 * log_sum_exp(&terms)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Suspension with constant roof 1 of a hyperbolic toral automorphism.
#[derive(Clone, Debug)]
pub struct SuspensionFlow {
    auto: HyperbolicAutomorphism,
}

impl SuspensionFlow {
    /// Builds the flow from integer matrix rows. Only the constant roof `1.0`
    /// and orientation-preserving matrices are accepted.
    pub fn new(rows: &[Vec<i64>], roof: f64) -> Result<Self> {
        if roof != 1.0 {
            return Err(Error::UnsupportedRoof(roof));
        }
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel("matrix rows must form a square matrix".into()));
        }
        let auto = HyperbolicAutomorphism::new(m, rows.concat())?;
        if auto.det() != 1 {
            return Err(Error::InvalidModel("det A = -1 reverses the orientation of the fibre".into()));
        }
        Ok(SuspensionFlow { auto })
    }

    /// The companion matrix of `x³ - x - 1`; a codimension-one flow on a 4-manifold.
    pub fn default_model() -> Self {
        Self::new(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]], 1.0).expect("default model is hyperbolic")
    }

    /// `C ⊕ C⁻¹` with `C` the cat map `[[2,1],[1,1]]`: a 5-manifold whose unstable
    /// and stable spectra are symmetric, used as a negative control for asymmetry.
    pub fn symmetric_control() -> Self {
        Self::new(
            &[vec![2, 1, 0, 0], vec![1, 1, 0, 0], vec![0, 0, 1, -1], vec![0, 0, -1, 2]],
            1.0,
        )
        .expect("control model is hyperbolic")
    }

    pub fn automorphism(&self) -> &HyperbolicAutomorphism {
        &self.auto
    }

    /// Manifold dimension `n = m + 1`.
    pub fn dim(&self) -> usize {
        self.auto.m + 1
    }

    pub fn torus_dim(&self) -> usize {
        self.auto.m
    }

    /// 1-based coframe index of `ds`.
    pub fn ds_index(&self) -> usize {
        self.dim()
    }

    /// `X` in eigen-frame (equivalently ambient) components.
    pub fn generator(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[self.auto.m] = 1.0;
        x
    }

    /// Normalises `(x, s)` for arbitrary real `s` through the deck map.
    pub fn point(&self, x: &[f64], s: f64) -> Point {
        let base = Point { x: x.iter().map(|&v| wrap_unit(v)).collect(), s: 0.0 };
        let (crossings, frac) = split_roof(s);
        let mut p = self.shift_torus(&base, crossings);
        p.s = frac;
        p
    }

    fn shift_torus(&self, p: &Point, crossings: i64) -> Point {
        let m = self.auto.m;
        let mat = if crossings >= 0 { &self.auto.matrix } else { &self.auto.inverse };
        let mut x: Coords = p.x.clone();
        let mut next: Coords = SmallVec::from_elem(0.0, m);
        for _ in 0..crossings.unsigned_abs() {
            for i in 0..m {
                next[i] = wrap_unit((0..m).map(|j| mat[i * m + j] as f64 * x[j]).sum());
            }
            std::mem::swap(&mut x, &mut next);
        }
        Point { x, s: p.s }
    }

    /// Signed number of deck crossings of the orbit segment from `p` over time `t`.
    pub fn crossings(&self, p: &Point, t: f64) -> i64 {
        split_roof(p.s + t).0
    }

    /// `f_t(p)`.
    pub fn flow(&self, p: &Point, t: f64) -> Point {
        let (crossings, frac) = split_roof(p.s + t);
        let mut q = self.shift_torus(p, crossings);
        q.s = frac;
        q
    }

    /// Eigen-frame components of an ambient tangent vector.
    pub fn to_eigen(&self, v: &TangentVector) -> Coords {
        self.ambient_to_eigen(&v.torus, v.s_part)
    }

    pub(crate) fn ambient_to_eigen(&self, torus: &[f64], s_part: f64) -> Coords {
        let m = self.auto.m;
        let mut c: Coords = (0..m).map(|i| (0..m).map(|j| self.auto.coframe[i * m + j] * torus[j]).sum()).collect();
        c.push(s_part);
        c
    }

    pub fn from_eigen(&self, base: Point, eigen: &[f64]) -> TangentVector {
        let m = self.auto.m;
        let torus: Coords = (0..m).map(|i| (0..m).map(|j| self.auto.frame[i * m + j] * eigen[j]).sum()).collect();
        TangentVector { base, torus, s_part: eigen[m] }
    }

    /// Tangent map across `crossings` deck identifications, as a row-major
    /// `n × n` matrix in the eigen-frame. Powers are formed per block in
    /// log-polar form.
    pub fn transport_eigen(&self, crossings: i64) -> Vec<f64> {
        let n = self.dim();
        let mut t = vec![0.0; n * n];
        let k = crossings as f64;
        let mut start = 0;
        for blk in &self.auto.blocks {
            match *blk {
                EigenBlock::Real { value } => {
                    let sign = if value < 0.0 && crossings % 2 != 0 { -1.0 } else { 1.0 };
                    t[start * n + start] = sign * (k * value.abs().ln()).exp();
                }
                EigenBlock::Rotation { modulus, angle } => {
                    let r = (k * modulus.ln()).exp();
                    let (sn, cs) = (k * angle).sin_cos();
                    t[start * n + start] = r * cs;
                    t[start * n + start + 1] = -r * sn;
                    t[(start + 1) * n + start] = r * sn;
                    t[(start + 1) * n + start + 1] = r * cs;
                }
            }
            start += blk.width();
        }
        t[n * n - 1] = 1.0;
        t
    }

    /// `Tf_t(v)`, attached to `f_t(base)`.
    pub fn tangent_flow(&self, v: &TangentVector, t: f64) -> TangentVector {
        let crossings = self.crossings(&v.base, t);
        let c = self.to_eigen(v);
        let tm = self.transport_eigen(crossings);
        let n = self.dim();
        let out: Coords = (0..n).map(|i| (0..n).map(|j| tm[i * n + j] * c[j]).sum()).collect();
        self.from_eigen(self.flow(&v.base, t), &out)
    }

    /// `Tf_t(v)` kept in log-magnitude form; safe for arbitrarily large `|t|`.
    pub fn tangent_flow_log(&self, v: &TangentVector, t: f64) -> LogTangent {
        let crossings = self.crossings(&v.base, t);
        let c = self.to_eigen(v);
        let k = crossings as f64;
        let mut blocks = Vec::new();
        let mut start = 0;
        for blk in &self.auto.blocks {
            let w = blk.width();
            let comp = &c[start..start + w];
            let norm = comp.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut dir: Coords = comp.iter().map(|x| if norm > 0.0 { x / norm } else { 0.0 }).collect();
            let lm = norm.ln() + k * blk.modulus().ln();
            match *blk {
                EigenBlock::Real { value } => {
                    if value < 0.0 && crossings % 2 != 0 {
                        dir[0] = -dir[0];
                    }
                }
                EigenBlock::Rotation { angle, .. } => {
                    // reduce the rotation angle mod 2π before forming cos/sin
                    let phi = (k * angle).rem_euclid(2.0 * PI);
                    let (sn, cs) = phi.sin_cos();
                    let (a, b) = (dir[0], dir[1]);
                    dir[0] = cs * a - sn * b;
                    dir[1] = sn * a + cs * b;
                }
            }
            blocks.push((lm, dir));
            start += w;
        }
        let xc = c[self.auto.m];
        blocks.push((xc.abs().ln(), SmallVec::from_elem(xc.signum(), 1)));
        LogTangent { base: self.flow(&v.base, t), blocks }
    }

    /// The invariant splitting `E^uu ⊕ E^c ⊕ E^ss`; constant in suspension coordinates.
    pub fn splitting(&self) -> Splitting {
        let m = self.auto.m;
        let col = |j: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..m).map(|i| self.auto.frame[i * m + j]).collect();
            v.push(0.0);
            v
        };
        let unstable = (0..m).filter(|&j| self.auto.log_rates[j] > 0.0).map(col).collect();
        let stable = (0..m).filter(|&j| self.auto.log_rates[j] < 0.0).map(col).collect();
        Splitting { unstable, stable, center: self.generator() }
    }

    pub fn anosov_metric(&self) -> AnosovMetric {
        let mut log_rates = self.auto.log_rates.clone();
        log_rates.push(0.0);
        AnosovMetric { log_rates }
    }

    /// Eigen-coordinate indices (0-based) of `E^uu` and of `E^cs = E^c ⊕ E^ss`.
    pub fn unstable_coords(&self) -> Vec<usize> {
        (0..self.auto.m).filter(|&j| self.auto.log_rates[j] > 0.0).collect()
    }

    /// Fits `(c, ν, λ)` from sampled vector growth over `t_grid` under the Anosov metric.
    pub fn measure_constants(&self, t_grid: &[f64]) -> Result<HyperbolicityConstants> {
        self.measure_constants_with(t_grid, NormConvention::Adapted)
    }

    pub fn measure_constants_with(&self, t_grid: &[f64], convention: NormConvention) -> Result<HyperbolicityConstants> {
        if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
            return Err(Error::InvalidArgument("t_grid must be positive and strictly increasing".into()));
        }
        let metric = self.anosov_metric();
        let n = self.dim();
        // eigen components throughout: an ambient round trip would seed the
        // other invariant directions with rounding noise that then grows
        let norm = |s: f64, c: &[f64]| -> f64 {
            match convention {
                NormConvention::Adapted => metric.norm(s, c),
                NormConvention::Frozen => c.iter().map(|x| x * x).sum::<f64>().sqrt(),
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut fit_family = |coords: Vec<usize>| -> Result<(f64, f64, f64)> {
            let mut ts = Vec::new();
            let mut logs = Vec::new();
            let mut samples = Vec::new();
            for trial in 0..8 {
                let x: Vec<f64> = (0..self.auto.m).map(|_| rng.random::<f64>()).collect();
                let base = Point::new(&x, if trial == 0 { 0.0 } else { rng.random::<f64>() })?;
                let mut e = vec![0.0; n];
                for &j in &coords {
                    e[j] = rng.random_range(-1.0..1.0);
                }
                let v0 = norm(base.s, &e);
                let mut row = Vec::new();
                for &t in t_grid {
                    let tm = self.transport_eigen(self.crossings(&base, t));
                    let moved: Vec<f64> = (0..n).map(|i| (0..n).map(|j| tm[i * n + j] * e[j]).sum()).collect();
                    let r = norm(self.flow(&base, t).s, &moved) / v0;
                    ts.push(t);
                    logs.push(r.ln());
                    row.push((t, r));
                }
                samples.push(row);
            }
            let f = fit_line(&ts, &logs);
            // worst deviation from the fitted exponential, including t = 0 where the ratio is 1
            let mut worst = 1.0f64;
            for row in &samples {
                for &(t, r) in row {
                    worst = worst.max((r * (-f.slope * t).exp()).max((f.slope * t).exp() / r));
                }
            }
            Ok((f.slope, f.r2, worst))
        };
        let unstable: Vec<usize> = (0..self.auto.m).filter(|&j| self.auto.log_rates[j] > 0.0).collect();
        let stable: Vec<usize> = (0..self.auto.m).filter(|&j| self.auto.log_rates[j] < 0.0).collect();
        let (s_slope, r2_s, c_s) = fit_family(stable)?;
        let (u_slope, r2_u, c_u) = fit_family(unstable)?;
        let r2 = r2_s.min(r2_u);
        if r2 < tolerances::MIN_RATE_R2 {
            return Err(Error::NotExponential { r2 });
        }
        Ok(HyperbolicityConstants {
            c: c_s.max(c_u).max(1.0),
            nu: -s_slope,
            lambda: u_slope,
            r2_stable: r2_s,
            r2_unstable: r2_u,
            convention,
        })
    }

    /// All points `(x, 0)` with `A^p x ≡ x (mod ℤ^m)`, found exactly by integer
    /// diagonalisation of `A^p - I`.
    pub fn periodic_points(&self, period: u32) -> Result<Vec<PeriodicPoint>> {
        if period == 0 {
            return Err(Error::InvalidArgument("period must be at least 1".into()));
        }
        let mp = self.auto.int_matrix().checked_pow(period)?.minus_identity()?;
        let (den, nums) = rational_kernel_mod_one(&mp)?;
        Ok(nums
            .into_iter()
            .map(|num| {
                let x: Vec<f64> = num.iter().map(|&v| v as f64 / den as f64).collect();
                PeriodicPoint { point: Point::new(&x, 0.0).expect("in [0,1)"), period, denominator: den, numerators: num }
            })
            .collect())
    }

    /// Distance on the manifold between two normalised points: torus distance,
    /// with the seam handled by comparing deck images.
    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        let direct = torus_distance(p, q);
        if (p.s - q.s).abs() <= 0.5 {
            return direct;
        }
        let (lo, hi) = if p.s < q.s { (p, q) } else { (q, p) };
        // hi lies just below the seam: its image under the deck map sits near s = 0
        let img = self.shift_torus(hi, 1);
        let moved = Point { x: img.x, s: hi.s - 1.0 };
        direct.min(torus_distance(lo, &moved))
    }
}

fn torus_distance(p: &Point, q: &Point) -> f64 {
    let mut d2 = (p.s - q.s).powi(2);
    for (a, b) in p.x.iter().zip(&q.x) {
        let d = (a - b).abs();
        let d = d.min(1.0 - d);
        d2 += d * d;
    }
    d2.sqrt()
}

/// `(⌊s⌋, s - ⌊s⌋)` with the fractional part guaranteed in `[0, 1)`.
fn split_roof(s: f64) -> (i64, f64) {
    let mut c = s.floor();
    let mut f = s - c;
    if f >= 1.0 {
        c += 1.0;
        f = 0.0;
    }
    (c as i64, f)
}

/// Serializable summary for reports.
#[derive(Clone, Debug, Serialize)]
pub struct ModelDescription {
    pub matrix: Vec<Vec<i64>>,
    pub det: i64,
    pub manifold_dim: usize,
    pub roof: f64,
    pub blocks: Vec<EigenBlock>,
    pub log_rates: Vec<f64>,
    pub unstable_dim: usize,
    pub stable_dim: usize,
    pub splitting: Splitting,
    pub constants: HyperbolicityConstants,
}

impl SuspensionFlow {
    pub fn describe(&self) -> Result<ModelDescription> {
        let m = self.auto.m;
        let grid: Vec<f64> = (1..=80).map(|i| i as f64 * 0.5).collect();
        Ok(ModelDescription {
            matrix: (0..m).map(|i| self.auto.matrix[i * m..(i + 1) * m].to_vec()).collect(),
            det: self.auto.det,
            manifold_dim: self.dim(),
            roof: 1.0,
            blocks: self.auto.blocks.clone(),
            log_rates: self.auto.log_rates.clone(),
            unstable_dim: self.auto.unstable_dim(),
            stable_dim: self.auto.stable_dim(),
            splitting: self.splitting(),
            constants: self.measure_constants(&grid)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Newton iteration on x³ - x - 1 from x = 1.5.
    fn newton_rho() -> f64 {
        let mut x = 1.5f64;
        for _ in 0..60 {
            x -= (x * x * x - x - 1.0) / (3.0 * x * x - 1.0);
        }
        x
    }

    #[test]
    fn default_model_eigendata() {
        let f = SuspensionFlow::default_model();
        let a = f.automorphism();
        assert_eq!(a.det(), 1);
        let rho = newton_rho();
        assert!((rho - 1.324_717_957_244_746).abs() < 1e-14);
        assert!((a.expansion() - rho).abs() < 1e-12);
        match a.blocks()[1] {
            EigenBlock::Rotation { modulus, .. } => {
                assert!((modulus - rho.powf(-0.5)).abs() < 1e-12);
                assert!((modulus - 0.868_836_961_832_2).abs() < 1e-9);
            }
            other => panic!("expected rotation block, got {other:?}"),
        }
        assert_eq!((a.unstable_dim(), a.stable_dim()), (1, 2));
        // det P = 1
        let p = DMatrix::from_row_slice(3, 3, a.frame());
        assert!((p.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenframe_diagonalises_a() {
        for f in [SuspensionFlow::default_model(), SuspensionFlow::symmetric_control()] {
            let a = f.automorphism();
            let m = a.dim();
            let am = DMatrix::from_row_slice(m, m, &a.matrix().iter().map(|&v| v as f64).collect::<Vec<_>>());
            let p = DMatrix::from_row_slice(m, m, a.frame());
            let pinv = DMatrix::from_row_slice(m, m, a.coframe());
            let block = &pinv * &am * &p;
            let t = f.transport_eigen(1);
            let n = m + 1;
            for i in 0..m {
                for j in 0..m {
                    assert!((block[(i, j)] - t[i * n + j]).abs() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(matches!(SuspensionFlow::new(&[vec![1, 1], vec![0, 1]], 1.0), Err(Error::NotHyperbolic { .. })));
        assert!(matches!(SuspensionFlow::new(&[vec![2, 1], vec![1, 1]], 2.0), Err(Error::UnsupportedRoof(_))));
        assert!(SuspensionFlow::new(&[vec![2, 0], vec![0, 1]], 1.0).is_err());
        assert!(SuspensionFlow::new(&[vec![0, 1], vec![1, 0]], 1.0).is_err());
        // rotation by 90 degrees has |λ| = 1
        assert!(matches!(SuspensionFlow::new(&[vec![0, -1], vec![1, 0]], 1.0), Err(Error::NotHyperbolic { .. })));
    }

    #[test]
    fn flow_examples() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.1, 0.2, 0.3], 0.9).unwrap();
        assert_eq!(f.flow(&p, 0.0), p);
        let q = f.flow(&p, 0.25);
        assert!((q.s() - 0.15).abs() < 1e-15);
        // A x for x = (0.1, 0.2, 0.3): (0.2, 0.3, 0.3)
        for (got, want) in q.x().iter().zip([0.2, 0.3, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
        let origin = Point::new(&[0.0; 3], 0.4).unwrap();
        for t in [-7.3, 0.5, 12.25] {
            assert!(f.flow(&origin, t).x().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn tangent_flow_examples() {
        let f = SuspensionFlow::default_model();
        let rho = newton_rho();
        let base = Point::new(&[0.3, 0.6, 0.1], 0.0).unwrap();
        let x = f.from_eigen(base.clone(), &f.generator());
        let tx = f.tangent_flow(&x, 3.3);
        assert!((f.to_eigen(&tx)[3] - 1.0).abs() < 1e-15);
        let u = f.from_eigen(base.clone(), &[1.0, 0.0, 0.0, 0.0]);
        let tu = f.tangent_flow(&u, 1.0);
        for (a, b) in tu.torus_part().iter().zip(u.torus_part()) {
            assert!((a - rho * b).abs() < 1e-12);
        }
        let w = f.from_eigen(base, &[0.0, 0.6, -0.8, 0.0]);
        let tw = f.tangent_flow(&w, 2.0);
        let c = f.to_eigen(&tw);
        assert!(((c[1] * c[1] + c[2] * c[2]).sqrt() - 1.0 / rho).abs() < 1e-12);
    }

    #[test]
    fn tangent_flow_matches_integer_matrix_power() {
        let f = SuspensionFlow::default_model();
        let a = f.automorphism().int_matrix();
        let base = Point::new(&[0.3, 0.6, 0.1], 0.5).unwrap();
        let v = TangentVector::new(base, &[0.2, -0.7, 1.1], 0.4).unwrap();
        for k in [1u32, 4, 9] {
            let ak = a.checked_pow(k).unwrap();
            let tv = f.tangent_flow(&v, k as f64);
            for i in 0..3 {
                let want: f64 = (0..3).map(|j| ak.get(i, j) as f64 * v.torus_part()[j]).sum();
                assert!((tv.torus_part()[i] - want).abs() < 1e-11 * want.abs().max(1.0));
            }
            assert_eq!(tv.s_part(), 0.4);
        }
    }

    #[test]
    fn splitting_of_default_model() {
        let f = SuspensionFlow::default_model();
        let sp = f.splitting();
        assert_eq!((sp.unstable.len(), sp.stable.len()), (1, 2));
        let base = Point::new(&[0.5, 0.25, 0.75], 0.0).unwrap();
        let u = TangentVector::new(base, &sp.unstable[0][..3], 0.0).unwrap();
        let tu = f.tangent_flow(&u, 5.0);
        let c = f.to_eigen(&tu);
        let off = (c[1].powi(2) + c[2].powi(2) + c[3].powi(2)).sqrt() / c[0].abs();
        assert!(off < 1e-10);
        let metric = f.anosov_metric();
        for v in sp.unstable.iter().chain(&sp.stable) {
            let tv = TangentVector::new(Point::new(&[0.0; 3], 0.0).unwrap(), &v[..3], 0.0).unwrap();
            assert!((metric.norm(0.0, &f.to_eigen(&tv)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn anosov_metric_is_deck_invariant_and_unimodular() {
        let f = SuspensionFlow::default_model();
        let g = f.anosov_metric();
        let frame = g.frame_at(0.37);
        assert!((frame.det() - 1.0).abs() < 1e-12);
        // |v|_{s} at s -> 1 equals |Av|_{0}
        let c = [0.3, -1.2, 0.5, 0.7];
        let tm = f.transport_eigen(1);
        let ac: Vec<f64> = (0..4).map(|i| (0..4).map(|j| tm[i * 4 + j] * c[j]).sum()).collect();
        assert!((g.norm(1.0, &c) - g.norm(0.0, &ac)).abs() < 1e-12);
        let x = f.generator();
        assert_eq!(g.norm(0.4, &x), 1.0);
        assert_eq!(frame.vector_inner(&x, &[1.0, 0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn measured_constants_match_eigenvalues() {
        let f = SuspensionFlow::default_model();
        let rho = newton_rho();
        let grid: Vec<f64> = (1..=80).map(|i| i as f64 * 0.5).collect();
        for conv in [NormConvention::Adapted, NormConvention::Frozen] {
            let c = f.measure_constants_with(&grid, conv).unwrap();
            assert!((c.lambda / rho.ln() - 1.0).abs() < 0.05, "{conv:?} {c:?}");
            assert!((c.nu / (0.5 * rho.ln()) - 1.0).abs() < 0.05, "{conv:?} {c:?}");
            assert!(c.c >= 1.0);
        }
        let adapted = f.measure_constants(&grid).unwrap();
        assert!((adapted.lambda - 0.281_199).abs() < 1e-5 && (adapted.nu - 0.140_600).abs() < 1e-5);
        assert!(f.measure_constants(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn log_tangent_survives_huge_times() {
        let f = SuspensionFlow::default_model();
        let rho = newton_rho();
        let base = Point::new(&[0.1, 0.2, 0.3], 0.0).unwrap();
        let u = f.from_eigen(base, &[1.0, 0.0, 0.0, 0.0]);
        let lt = f.tangent_flow_log(&u, 5000.0);
        let want = 5000.0 * rho.ln();
        assert!((lt.log_norm(&f.anosov_metric()) - want).abs() < 1e-9 * want);
    }

    #[test]
    fn periodic_point_counts() {
        let f = SuspensionFlow::default_model();
        let pts = f.periodic_points(1).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].point.x().iter().all(|&v| v == 0.0));
        assert!(f.periodic_points(0).is_err());
    }

    #[test]
    fn point_normalisation() {
        let f = SuspensionFlow::default_model();
        let p = f.point(&[0.1, 0.2, 0.3], 1.25);
        assert!((p.s() - 0.25).abs() < 1e-15);
        let q = f.point(&[0.1, 0.2, 0.3], -1e-18);
        assert!((0.0..1.0).contains(&q.s()));
        assert!(Point::new(&[0.0; 3], 1.0).is_err());
    }
}
