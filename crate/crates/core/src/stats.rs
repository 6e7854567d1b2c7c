//! Plug-in moments over the experimental sample.
//!
//! Every variance and covariance here divides by the number of units, so
//! in-sample identities such as `var(a - b) = var(a) + var(b) - 2 cov(a, b)`
//! hold exactly and all modules share one convention.

/// Neumaier-compensated sum; order-dependent only at the last ulp.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            comp += (total - t) + v;
        } else {
            comp += (v - t) + total;
        }
        total = t;
    }
    total + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values.iter().copied()) / values.len() as f64
}

pub fn var(values: &[f64]) -> f64 {
    cov(values, values)
}

pub fn cov(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb))) / a.len() as f64
}

pub fn cor(a: &[f64], b: &[f64]) -> f64 {
    let denom = (var(a) * var(b)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        cov(a, b) / denom
    }
}

/// Unbiased (n - 1) standard deviation, used only for standardized differences.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    (var(values) * n as f64 / (n - 1) as f64).sqrt()
}

/// Linear-interpolation percentile (the common "type 7" definition).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values);
    let s2 = var(values) * n / (n - 1.0).max(1.0);
    (m, (s2 / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(v), 2.0);
    }

    #[test]
    fn plug_in_moments() {
        let w = [0.5, 1.5, 0.5, 1.5];
        assert_eq!(var(&w), 0.25);
        assert_eq!(cov(&[0.5, 1.5], &[1.0, 3.0]), 0.5);
        assert!((sample_sd(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn percentile_endpoints() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 0.0), 1.0);
        assert_eq!(percentile(&s, 1.0), 4.0);
        assert_eq!(percentile(&s, 0.5), 2.5);
    }
}
