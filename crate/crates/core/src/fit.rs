//! Ordinary least squares for straight lines.

use serde::Serialize;

use crate::quadrature::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when the data have no spread to explain.
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst = pairwise_sum(&ys.iter().map(|y| (y - my) * (y - my)).collect::<Vec<_>>());
    let sse = pairwise_sum(
        &xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).collect::<Vec<_>>(),
    );
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1.0);
    let r2 = if sst <= 1e-24 * scale * scale * n { 1.0 } else { (1.0 - sse / sst).clamp(0.0, 1.0) };
    LineFit { slope, intercept, r2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-13);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let f = fit_line(&xs, &[5.0; 4]);
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r2, 1.0);
    }
}
