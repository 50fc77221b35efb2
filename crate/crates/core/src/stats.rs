//! Small statistics helpers: normal CDF, Kolmogorov–Smirnov distance and
//! p-value, sample moments.

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov statistic `sup |F_n - F|` of `sorted` against `cdf`.
///
/// `sorted` must be in ascending order.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a one-sample KS statistic `d` with sample size `n`
/// (Stephens' small-sample correction of the Kolmogorov distribution).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation; 0 for fewer than two samples.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Composite Simpson rule on a uniform grid with spacing `h`.
///
/// Falls back to the trapezoid rule for the last panel when the sample count
/// is even.
pub fn simpson(ys: &[f64], h: f64) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let odd_end = if n % 2 == 1 { n } else { n - 1 };
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < odd_end {
        acc += ys[i] + 4.0 * ys[i + 1] + ys[i + 2];
        i += 2;
    }
    acc *= h / 3.0;
    if odd_end < n {
        acc += 0.5 * h * (ys[n - 2] + ys[n - 1]);
    }
    acc
}

pub fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ks_pvalue_reference_points() {
        // Q_KS(1.36) ≈ 0.0494, the familiar 5% critical value
        let n = 1_000_000;
        let d = 1.36 / ((n as f64).sqrt() + 0.12);
        assert!((ks_pvalue(d, n) - 0.0494).abs() < 1e-3);
        assert_eq!(ks_pvalue(0.0, 10), 1.0);
        assert!(ks_pvalue(0.9, 100) < 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let h = 0.25;
        let ys: Vec<f64> = (0..9).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&ys, h) - 4.0).abs() < 1e-12);
        let lin: Vec<f64> = (0..4).map(|i| i as f64).collect();
        assert!((simpson(&lin, 1.0) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_dev(&[4.0]), 0.0);
    }
}
