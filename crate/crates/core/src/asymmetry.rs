//! Exponential contraction of parallelepipeds with one side in `E^uu` under
//! the backward flow, measured and fitted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{det_small, IndexSet};
use crate::fit::fit_line;
use crate::model::{log_sum_exp, EigenBlock, HyperbolicityConstants, Point, SuspensionFlow, TangentVector};
use crate::tolerances;

/// Least-squares exponential fit `v(t) ≈ C_hat e^{-nu_hat t}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub c_hat: f64,
    pub nu_hat: f64,
    pub r2: f64,
    pub t_range: (f64, f64),
    /// `max_t v(t) e^{nu_hat t}`: the smallest `C` for which the fitted rate bounds the series.
    pub c_envelope: f64,
}

/// `default_t_grid()`: 81 points on `[0, 40]`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 * 0.5).collect()
}

/// Fits a series of `(t, volume)` pairs.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<RateFit> {
    if series.iter().any(|&(_, v)| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("volumes must be positive and finite; use fit_log_rate".into()));
    }
    let logs: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, v.ln())).collect();
    fit_log_rate(&logs)
}

/// Fits a series of `(t, ln volume)` pairs.
pub fn fit_log_rate(series: &[(f64, f64)]) -> Result<RateFit> {
    if series.len() < 8 {
        return Err(Error::InvalidArgument(format!("rate fit needs at least 8 points, got {}", series.len())));
    }
    let (ts, ls): (Vec<f64>, Vec<f64>) = series.iter().copied().unzip();
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 10.0 {
        return Err(Error::InvalidArgument(format!("rate fit needs a time spread of at least 10, got {}", hi - lo)));
    }
    if ls.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("non-finite log volume".into()));
    }
    let f = fit_line(&ts, &ls);
    let nu_hat = -f.slope;
    let c_envelope = ts.iter().zip(&ls).map(|(t, l)| l + nu_hat * t).fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(RateFit { c_hat: f.intercept.exp(), nu_hat, r2: f.r2, t_range: (lo, hi), c_envelope })
}

/// Components of tangent vectors at `p` in the orthonormal frame of the Anosov metric.
pub(crate) fn orthonormal_components(flow: &SuspensionFlow, v: &TangentVector) -> Vec<f64> {
    let metric = flow.anosov_metric();
    let c = flow.to_eigen(v);
    c.iter().zip(metric.log_scales(v.base().s())).map(|(ci, l)| ci * l.exp()).collect()
}

/// `ln ‖Tf_τ(w_1 ∧ ... ∧ w_k)‖_g` for sides given in the orthonormal frame at
/// `p`. In that frame the flow acts as `diag(e^{τℓ_i})` composed with the block
/// rotations, so the Plücker coordinates scale exactly and the volume is
/// assembled in the log domain.
pub(crate) fn log_volume_after(flow: &SuspensionFlow, p: &Point, sides: &[Vec<f64>], tau: f64) -> f64 {
    let n = flow.dim();
    let k = sides.len();
    if k == 0 {
        return 0.0;
    }
    let crossings = flow.crossings(p, tau);
    let mut rotated: Vec<Vec<f64>> = sides.to_vec();
    let mut start = 0;
    for blk in flow.automorphism().blocks() {
        match *blk {
            EigenBlock::Real { value } => {
                if value < 0.0 && crossings % 2 != 0 {
                    rotated.iter_mut().for_each(|w| w[start] = -w[start]);
                }
            }
            EigenBlock::Rotation { angle, .. } => {
                let phi = (crossings as f64 * angle).rem_euclid(2.0 * std::f64::consts::PI);
                let (sn, cs) = phi.sin_cos();
                for w in rotated.iter_mut() {
                    let (a, b) = (w[start], w[start + 1]);
                    w[start] = cs * a - sn * b;
                    w[start + 1] = sn * a + cs * b;
                }
            }
        }
        start += blk.width();
    }
    let rates = flow.anosov_metric();
    let mut terms = Vec::new();
    let mut minor = vec![0.0; k * k];
    for idx in IndexSet::all_of_degree(n, k) {
        let cols = idx.positions();
        for (r, w) in rotated.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                minor[r * k + c] = w[j];
            }
        }
        let d = det_small(&mut minor, k);
        if d != 0.0 {
            let growth: f64 = cols.iter().map(|&j| rates.log_rates()[j]).sum::<f64>() * tau;
            terms.push(2.0 * (d.abs().ln() + growth));
        }
    }
    0.5 * log_sum_exp(&terms)
}

/// `(t, ln ‖Tf_{-t}(v_1 ∧ ... ∧ v_k)‖_g)` over `t_grid`; at least one side must lie in `E^uu`.
pub fn contraction_series(flow: &SuspensionFlow, p: &Point, sides: &[TangentVector], t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if sides.is_empty() || sides.len() > flow.dim() {
        return Err(Error::InvalidArgument(format!("{} sides for dimension {}", sides.len(), flow.dim())));
    }
    if sides.iter().any(|v| v.base() != p) {
        return Err(Error::BasePointMismatch);
    }
    let ortho: Vec<Vec<f64>> = sides
        .iter()
        .map(|v| {
            let mut w = orthonormal_components(flow, v);
            // rounding residue in other invariant directions would be amplified exponentially
            let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            w.iter_mut().filter(|x| x.abs() <= tolerances::CASE_SPLIT_DROP * scale).for_each(|x| *x = 0.0);
            w
        })
        .collect();
    let unstable = flow.unstable_coords();
    let in_uu = |w: &Vec<f64>| {
        let total: f64 = w.iter().map(|x| x * x).sum();
        let off: f64 = w.iter().enumerate().filter(|(i, _)| !unstable.contains(i)).map(|(_, x)| x * x).sum();
        total > 0.0 && off <= 1e-18 * total
    };
    if !ortho.iter().any(in_uu) {
        return Err(Error::InvalidArgument("one side must lie in E^uu".into()));
    }
    if log_volume_after(flow, p, &ortho, 0.0) == f64::NEG_INFINITY {
        return Err(Error::DegenerateSides);
    }
    Ok(series_for(flow, p, &ortho, t_grid, -1.0))
}

fn series_for(flow: &SuspensionFlow, p: &Point, ortho: &[Vec<f64>], t_grid: &[f64], direction: f64) -> Vec<(f64, f64)> {
    t_grid.iter().map(|&t| (t, log_volume_after(flow, p, ortho, direction * t))).collect()
}

/// Which side configuration a series was measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfigKind {
    /// `Y` plus stable sides: the extremal configuration.
    WorstCase,
    /// `Y` plus uniformly random unit sides.
    Uniform,
    /// `Y` plus fewer than `n - 3` random sides.
    LowerDim,
    /// Sides in `E^cs` under the forward flow; used only for solver rates.
    ForwardCs,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigSeries {
    pub point: usize,
    pub config: usize,
    pub kind: ConfigKind,
    pub sides: usize,
    /// `ln vol(t) - ln vol(0)` on the verdict's grid.
    pub log_volumes: Vec<f64>,
    pub fit: RateFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymmetryVerdict {
    pub asymmetric: bool,
    pub min_nu: f64,
    pub worst: RateFit,
    /// Bound constant `ĉ^k` from single-vector constants, used for the envelope check.
    pub constants: HyperbolicityConstants,
    pub bound_violations: usize,
    pub lower_dim_ok: bool,
    pub worst_case_r2: f64,
    pub t_grid: Vec<f64>,
    pub series: Vec<ConfigSeries>,
    /// Rate and envelope covering every series, including forward `E^cs` ones.
    pub solver_rates: RateFit,
}

/// Unit vector in the span of the given orthonormal coordinates.
fn random_unit<R: Rng>(rng: &mut R, n: usize, coords: &[usize]) -> Vec<f64> {
    loop {
        let mut w = vec![0.0; n];
        for &c in coords {
            w[c] = rng.sample(StandardNormal);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            w.iter_mut().for_each(|x| *x /= norm);
            return w;
        }
    }
}

/// Samples `samples` base points and several side configurations at each,
/// fits backward contraction rates and checks the asymmetry bound.
pub fn is_asymmetric(flow: &SuspensionFlow, samples: usize, tol: f64, seed: u64) -> Result<AsymmetryVerdict> {
    is_asymmetric_on(flow, samples, tol, seed, &default_t_grid())
}

pub fn is_asymmetric_on(flow: &SuspensionFlow, samples: usize, tol: f64, seed: u64, t_grid: &[f64]) -> Result<AsymmetryVerdict> {
    let n = flow.dim();
    if n < 4 {
        return Err(Error::DimensionTooSmall(n));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let positive: Vec<f64> = t_grid.iter().copied().filter(|&t| t > 0.0).collect();
    let constants = flow.measure_constants(&positive)?;
    let unstable = flow.unstable_coords();
    let stable: Vec<usize> = (0..flow.torus_dim()).filter(|j| !unstable.contains(j)).collect();
    let all: Vec<usize> = (0..n).collect();
    let mut cs = stable.clone();
    cs.push(n - 1);

    let per_point: Vec<Result<Vec<ConfigSeries>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let x: Vec<f64> = (0..flow.torus_dim()).map(|_| rng.random::<f64>()).collect();
            let p = Point::new(&x, rng.random::<f64>())?;
            let y = random_unit(&mut rng, n, &unstable);
            let mut configs: Vec<(ConfigKind, Vec<Vec<f64>>, f64)> = Vec::new();
            // worst case: remaining sides stable, completed by X and random vectors if E^ss is too small
            let mut worst = vec![y.clone()];
            let mut pool = stable.clone();
            while worst.len() < n - 2 {
                if let Some(c) = pool.pop() {
                    let mut e = vec![0.0; n];
                    e[c] = 1.0;
                    worst.push(e);
                } else {
                    worst.push(random_unit(&mut rng, n, &cs));
                }
            }
            configs.push((ConfigKind::WorstCase, worst, -1.0));
            let mut uniform = vec![y.clone()];
            uniform.extend((0..n - 3).map(|_| random_unit(&mut rng, n, &all)));
            configs.push((ConfigKind::Uniform, uniform, -1.0));
            for extra in 0..n - 3 {
                let mut lower = vec![y.clone()];
                lower.extend((0..extra).map(|_| random_unit(&mut rng, n, &all)));
                configs.push((ConfigKind::LowerDim, lower, -1.0));
            }
            for k in 2..=n - 2 {
                let sides: Vec<Vec<f64>> = (0..k).map(|_| random_unit(&mut rng, n, &cs)).collect();
                configs.push((ConfigKind::ForwardCs, sides, 1.0));
            }
            configs
                .into_iter()
                .enumerate()
                .map(|(c, (kind, sides, dir))| {
                    let raw = series_for(flow, &p, &sides, t_grid, dir);
                    let v0 = raw[0].1;
                    if v0 == f64::NEG_INFINITY {
                        return Err(Error::DegenerateSides);
                    }
                    let normalized: Vec<(f64, f64)> = raw.iter().map(|&(t, l)| (t, l - v0)).collect();
                    let fit = fit_log_rate(&normalized)?;
                    Ok(ConfigSeries {
                        point: i,
                        config: c,
                        kind,
                        sides: sides.len(),
                        log_volumes: normalized.iter().map(|&(_, l)| l).collect(),
                        fit,
                    })
                })
                .collect()
        })
        .collect();
    let mut series = Vec::new();
    for r in per_point {
        series.extend(r?);
    }

    let backward: Vec<&ConfigSeries> = series.iter().filter(|s| s.kind != ConfigKind::ForwardCs).collect();
    let worst = backward
        .iter()
        .min_by(|a, b| a.fit.nu_hat.partial_cmp(&b.fit.nu_hat).unwrap())
        .map(|s| s.fit)
        .expect("at least one configuration");
    let min_nu = worst.nu_hat;
    let mut violations = 0;
    for s in &backward {
        let bound = (s.sides as f64) * constants.c.ln() + (1.0 + tol).ln();
        if s.log_volumes.iter().zip(t_grid).any(|(l, t)| l + min_nu * t > bound) {
            violations += 1;
        }
    }
    let lower_dim_ok = backward.iter().filter(|s| s.kind == ConfigKind::LowerDim).all(|s| s.fit.nu_hat > tol);
    let worst_case_r2 =
        backward.iter().filter(|s| s.kind == ConfigKind::WorstCase).map(|s| s.fit.r2).fold(1.0, f64::min);
    let asymmetric = min_nu > tol && violations == 0 && lower_dim_ok;

    let solver_nu = series.iter().map(|s| s.fit.nu_hat).fold(f64::INFINITY, f64::min);
    let solver_env = series
        .iter()
        .flat_map(|s| s.log_volumes.iter().zip(t_grid).map(|(l, t)| l + solver_nu * t))
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    let solver_rates = RateFit {
        c_hat: solver_env,
        nu_hat: solver_nu,
        r2: worst_case_r2,
        t_range: worst.t_range,
        c_envelope: solver_env,
    };
    Ok(AsymmetryVerdict {
        asymmetric,
        min_nu,
        worst,
        constants,
        bound_violations: violations,
        lower_dim_ok,
        worst_case_r2,
        t_grid: t_grid.to_vec(),
        series,
        solver_rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::k_volume;

    fn rho() -> f64 {
        SuspensionFlow::default_model().automorphism().expansion()
    }

    #[test]
    fn synthetic_exact_series() {
        let s: Vec<(f64, f64)> = (0..=20).map(|i| (i as f64, 3.0 * (-0.2 * i as f64).exp())).collect();
        let f = fit_rate(&s).unwrap();
        assert!((f.c_hat - 3.0).abs() < 1e-10 && (f.nu_hat - 0.2).abs() < 1e-10 && (f.r2 - 1.0).abs() < 1e-10);
        let c: Vec<(f64, f64)> = (0..=20).map(|i| (i as f64, 2.0)).collect();
        assert_eq!(fit_rate(&c).unwrap().nu_hat, 0.0);
        assert!(fit_rate(&s[..5]).is_err());
        assert!(fit_rate(&s[..9]).is_err());
        let mut z = s.clone();
        z[3].1 = 0.0;
        assert!(fit_rate(&z).is_err());
    }

    #[test]
    fn eigen_bookkeeping_examples() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.3, 0.1, 0.8], 0.6).unwrap();
        let metric = f.anosov_metric();
        let unit = |c: [f64; 4]| {
            let n = metric.norm(p.s(), &c);
            f.from_eigen(p.clone(), &c.map(|x| x / n))
        };
        let y = unit([1.0, 0.0, 0.0, 0.0]);
        let w = unit([0.0, 1.0, 0.0, 0.0]);
        let x = unit([0.0, 0.0, 0.0, 1.0]);
        let grid = [0.0, 10.0];
        let s1 = contraction_series(&f, &p, &[y.clone(), w], &grid).unwrap();
        assert!((s1[0].1).abs() < 1e-14);
        assert!((s1[1].1 - (-5.0 * rho().ln())).abs() < 1e-12);
        let s2 = contraction_series(&f, &p, &[y, x.clone()], &grid).unwrap();
        assert!((s2[1].1 - (-10.0 * rho().ln())).abs() < 1e-12);
        assert!(contraction_series(&f, &p, &[x.clone(), x], &grid).is_err());
    }

    /// Independent route: transport the sides and measure with the metric frame at the image.
    #[test]
    fn log_volume_matches_frame_route() {
        let f = SuspensionFlow::default_model();
        let metric = f.anosov_metric();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = crate::forms::random_point(&f, &mut rng);
            let sides: Vec<TangentVector> = (0..2)
                .map(|i| {
                    let mut c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                    if i == 0 {
                        c = vec![1.0, 0.0, 0.0, 0.0];
                    }
                    f.from_eigen(p.clone(), &c)
                })
                .collect();
            let t = rng.random_range(0.0..25.0);
            let moved: Vec<Vec<f64>> = sides.iter().map(|v| f.to_eigen(&f.tangent_flow(v, -t)).to_vec()).collect();
            let q = f.flow(&p, -t);
            let direct = k_volume(&moved, &metric.frame_at(q.s())).unwrap().ln();
            let series = contraction_series(&f, &p, &sides, &[t]).unwrap();
            assert!((series[0].1 - direct).abs() < 1e-9, "{} vs {direct}", series[0].1);
        }
    }

    #[test]
    fn log_domain_survives_long_times() {
        let f = SuspensionFlow::default_model();
        let p = Point::new(&[0.3, 0.1, 0.8], 0.0).unwrap();
        let y = f.from_eigen(p.clone(), &[1.0, 0.0, 0.0, 0.0]);
        let x = f.from_eigen(p.clone(), &[0.0, 0.0, 0.0, 1.0]);
        let s = contraction_series(&f, &p, &[y, x], &[5000.0]).unwrap();
        assert!((s[0].1 + 5000.0 * rho().ln()).abs() < 1e-9 * 5000.0);
    }

    #[test]
    fn default_model_is_asymmetric() {
        let f = SuspensionFlow::default_model();
        let v = is_asymmetric(&f, 16, 0.01, 1).unwrap();
        assert!(v.asymmetric, "{v:?}");
        let nu = 0.5 * rho().ln();
        assert!((v.min_nu / nu - 1.0).abs() < 0.05, "{}", v.min_nu);
        assert!(v.worst_case_r2 >= 0.999);
        assert_eq!(v.bound_violations, 0);
        for s in v.series.iter().filter(|s| s.kind == ConfigKind::WorstCase) {
            assert!((s.fit.nu_hat / nu - 1.0).abs() < 0.05);
        }
        assert!(v.solver_rates.nu_hat > 0.0 && v.solver_rates.c_envelope >= 1.0 - 1e-12);
    }

    #[test]
    fn symmetric_control_is_not_asymmetric() {
        let f = SuspensionFlow::symmetric_control();
        let v = is_asymmetric(&f, 8, 0.01, 1).unwrap();
        assert!(!v.asymmetric);
        assert!(v.min_nu <= 0.01);
    }

    #[test]
    fn structural_errors() {
        let f = SuspensionFlow::default_model();
        assert!(matches!(is_asymmetric(&f, 0, 0.01, 1), Err(Error::InvalidArgument(_))));
        let cat = SuspensionFlow::new(&[vec![2, 1], vec![1, 1]], 1.0).unwrap();
        assert!(matches!(is_asymmetric(&cat, 4, 0.01, 1), Err(Error::DimensionTooSmall(3))));
    }

    #[test]
    fn verdict_is_deterministic() {
        let f = SuspensionFlow::default_model();
        let a = is_asymmetric(&f, 6, 0.01, 77).unwrap();
        let b = is_asymmetric(&f, 6, 0.01, 77).unwrap();
        assert_eq!(serde_json_like(&a), serde_json_like(&b));
    }

    fn serde_json_like(v: &AsymmetryVerdict) -> Vec<u64> {
        v.series.iter().flat_map(|s| s.log_volumes.iter().map(|x| x.to_bits())).collect()
    }
}
