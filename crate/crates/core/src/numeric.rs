//! Small numerical helpers: compensated summation, tanh-sinh quadrature,
//! order statistics.

use std::f64::consts::FRAC_PI_2;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one.
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Result of an adaptive quadrature.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub levels: usize,
}

/// Tanh-sinh (double exponential) quadrature of `f` over `[lo, hi]`.
///
/// The integrand is called as `f(x, x - lo, hi - x)`, with both distances
/// computed without cancellation, so integrable endpoint singularities can be
/// evaluated accurately. Step halving stops once two successive levels agree
/// to `rel_tol`.
pub fn tanh_sinh<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Quadrature
where
    F: Fn(f64, f64, f64) -> f64,
{
    const T_MAX: f64 = 6.0;
    const MAX_LEVELS: usize = 14;

    let half = 0.5 * (hi - lo);
    let mid = lo + half;

    // Contribution of the node pair at +t and -t (or the centre when t == 0).
    let pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let weight = half * FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        if t == 0.0 {
            return weight * f(mid, half, half);
        }
        // distance of the node from the nearer endpoint
        let delta = half * 2.0 / (1.0 + (2.0 * u).exp());
        if delta <= 0.0 || weight == 0.0 {
            return 0.0;
        }
        let far = 2.0 * half - delta;
        weight * (f(hi - delta, far, delta) + f(lo + delta, delta, far))
    };

    let mut h = 1.0;
    let mut sum = pair(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = h * sum;
    let mut error = f64::INFINITY;
    let mut levels = 1;

    while levels < MAX_LEVELS {
        h *= 0.5;
        // new nodes are the odd multiples of the halved step
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let next = h * sum;
        error = (next - estimate).abs();
        estimate = next;
        levels += 1;
        if error <= rel_tol * estimate.abs() {
            break;
        }
    }

    Quadrature {
        value: estimate,
        error_estimate: error,
        levels,
    }
}

/// Kolmogorov-Smirnov statistic of `sample` against the continuous CDF `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let fx = cdf(x);
            let above = (i + 1) as f64 / n - fx;
            let below = fx - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Linearly interpolated quantile (Hyndman-Fan type 7) of a non-empty sample.
pub fn quantile(sample: &[f64], q: f64) -> f64 {
    assert!(!sample.is_empty(), "quantile of empty sample");
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn compensated_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..5000)
            .map(|i| ((i * 7919) % 1013) as f64 * 1e-3 + 1e8 * ((i % 2) as f64))
            .collect();
        let whole: CompensatedSum = xs.iter().copied().collect();
        let mut left: CompensatedSum = xs[..2500].iter().copied().collect();
        let right: CompensatedSum = xs[2500..].iter().copied().collect();
        left.merge(right);
        assert!((whole.value() - left.value()).abs() <= 1e-6);
    }

    #[test]
    fn quadrature_smooth_integrand() {
        let q = tanh_sinh(|x, _, _| x.exp(), 0.0, 1.0, 1e-14);
        assert!((q.value - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn quadrature_arcsine_singularities() {
        // ∫_0^T t^{-1/2}(T-t)^{-1/2} dt = π for every T
        for &t in &[1.0, 5.0, 17.0] {
            let q = tanh_sinh(|_, a, b| 1.0 / (a * b).sqrt(), 0.0, t, 1e-13);
            assert!((q.value - PI).abs() < 1e-10, "T={t}: {}", q.value);
        }
    }

    #[test]
    fn ks_of_perfect_grid_is_half_step() {
        let n = 100;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&sample, |x| x);
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }
}
