//! Small least-squares helpers used by the convergence studies.

use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two samples for a line fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    LineFit { slope, intercept: my - slope * mx }
}

/// Slope of `ln|y|` against `ln x`: the observed convergence order.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    fit_line(&lx, &ly).slope
}

/// Small dense least-squares problem solved through the SVD.
/// Returns `None` when the design matrix is rank deficient.
pub fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = rows.first()?.len();
    let a = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let svd = a.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    if svd.rank(eps) < m {
        return None;
    }
    let x = svd.solve(&DVector::from_column_slice(rhs), eps).ok()?;
    Some(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope - 2.5).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs = [1e-3, 1e-2, 1e-1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 7.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_three_parameter_model() {
        let ws: Vec<f64> = (1..10).map(|i| i as f64 * 0.1).collect();
        let rows: Vec<Vec<f64>> = ws.iter().map(|w| vec![1.0 / w, w.ln(), 1.0]).collect();
        let ys: Vec<f64> = ws.iter().map(|w| 3.0 / w - 0.5 * w.ln() + 2.0).collect();
        let c = least_squares(&rows, &ys).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-10);
        assert!((c[1] + 0.5).abs() < 1e-10);
        assert!((c[2] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn singular_system_is_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(least_squares(&rows, &[1.0, 2.0]).is_none());
    }
}
