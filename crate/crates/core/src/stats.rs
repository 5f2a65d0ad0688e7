//! Small scalar statistics used by estimators and acceptance checks.

use alloc::vec::Vec;

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng::RngKey;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n - 1` correction (0 for fewer than two values).
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares fit `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("x", "all abscissae are equal"));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("data", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| libm::log(*v)).collect();
    let ly: Vec<f64> = y.iter().map(|v| libm::log(*v)).collect();
    Ok(linear_fit(&lx, &ly)?.1)
}

/// Bootstrap standard error of `stat` over `resamples` resamples drawn from
/// the stream keyed by `key`.
pub fn bootstrap_se(x: &[f64], resamples: usize, key: RngKey, stat: impl Fn(&[f64]) -> f64) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: x.len() });
    }
    if resamples < 2 {
        return Err(Error::invalid("resamples", "need at least 2"));
    }
    let mut rng = key.rng();
    let n = x.len() as u64;
    let mut buf = Vec::with_capacity(x.len());
    let values: Vec<f64> = (0..resamples)
        .map(|_| {
            buf.clear();
            buf.extend((0..x.len()).map(|_| x[(rng.next_u64() % n) as usize]));
            stat(&buf)
        })
        .collect();
    Ok(libm::sqrt(sample_variance(&values)))
}

/// `(mean - truth) / (sd / sqrt(n))`, or 0 when every value equals `truth`.
pub fn z_statistic(x: &[f64], truth: f64) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: x.len() });
    }
    let m = mean(x);
    let sd = libm::sqrt(sample_variance(x));
    if sd == 0.0 {
        return Ok(if m == truth { 0.0 } else { f64::INFINITY.copysign(m - truth) });
    }
    Ok((m - truth) / (sd / libm::sqrt(x.len() as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{draw_xi, Role};

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(sample_variance(&[5.0]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn z_of_constant_sample() {
        assert_eq!(z_statistic(&[2.0; 10], 2.0).unwrap(), 0.0);
        assert!(z_statistic(&[2.0; 10], 1.0).unwrap().is_infinite());
    }

    #[test]
    fn bootstrap_se_of_mean() {
        let x = draw_xi(RngKey::new(3, 0, 0, Role::Auxiliary), 2000);
        let se = bootstrap_se(&x, 400, RngKey::new(3, 0, 1, Role::Auxiliary), mean).unwrap();
        let expect = 1.0 / (2000f64).sqrt();
        assert!((se / expect - 1.0).abs() < 0.15, "{se} {expect}");
    }
}
