//! Small numeric helpers shared by the estimators and fits.

use crate::error::{Error, Result};

/// Neumaier-compensated sum, accumulated in slice order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Sample mean and unbiased variance (two-pass, deterministic order).
pub fn mean_and_variance(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    Ok((mean, ss / (n - 1.0)))
}

/// Ordinary least-squares line `y = slope * x + intercept`; returns
/// `(slope, intercept, residuals)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("x and y lengths differ".into()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    Ok((slope, intercept, residuals))
}

/// Slope of `log y` against `log x` over the positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    Ok(least_squares_slope(&lx, &ly)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_of_small_list() {
        let (m, v) = mean_and_variance(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m, v), (2.0, 1.0));
        assert_eq!(mean_and_variance(&[4.0; 7]).unwrap().1, 0.0);
        assert!(mean_and_variance(&[1.0]).is_err());
    }

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let (s, c, r) = least_squares_slope(&xs, &ys).unwrap();
        assert!((s - 3.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
        assert!(r.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((compensated_sum(v) - 4e-16).abs() < 1e-30);
    }
}
