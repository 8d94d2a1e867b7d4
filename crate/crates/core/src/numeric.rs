//! Small numerical kernels shared across modules.

use std::f64::consts::{FRAC_PI_4, PI};

/// `ln Σ exp(v_i)`, shifted by the maximum so that no term overflows.
///
/// Returns `-inf` for an empty slice.
#[inline]
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let acc: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + acc.ln()
}

/// Correctly rounded sum of a sequence of finite floats.
///
/// Shewchuk's partials algorithm with the round-half-even fix-up used by
/// CPython's `math.fsum`. The result depends only on the multiset of
/// inputs, not on their order.
#[derive(Debug, Default, Clone)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let mut n = self.partials.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = self.partials[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = self.partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0
            && ((lo < 0.0 && self.partials[n - 1] < 0.0)
                || (lo > 0.0 && self.partials[n - 1] > 0.0))
        {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Bessel function of the first kind, order zero.
///
/// Power series up to |x| = 12 (absolute error below 1e-12), Hankel
/// asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 12.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= -q / (k * k);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > q {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        // a_k = prod_{i=1..k} (-(2i-1)^2) / (k! 8^k)
        let mut p = 0.0;
        let mut qs = 0.0;
        let mut a = 1.0;
        let mut xp = 1.0;
        let mut last = f64::INFINITY;
        for k in 0..40 {
            if k > 0 {
                let odd = (2 * k - 1) as f64;
                a *= -(odd * odd) / (k as f64 * 8.0);
                xp *= x;
            }
            let t = a / xp;
            if t.abs() > last {
                break;
            }
            last = t.abs();
            // P collects even k with sign (-1)^(k/2), Q odd k with sign (-1)^((k-1)/2).
            match k % 4 {
                0 => p += t,
                1 => qs += t,
                2 => p -= t,
                _ => qs -= t,
            }
            if last < 1e-17 {
                break;
            }
        }
        let chi = x - FRAC_PI_4;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - qs * chi.sin())
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mills ratio `Φ(-x) / φ(x)` for `x >= 0`, via its continued fraction
/// for large `x`.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 5.0 {
        return normal_cdf(-x) / normal_pdf(x);
    }
    let mut frac = 0.0;
    for k in (1..=80).rev() {
        frac = k as f64 / (x + frac);
    }
    1.0 / (x + frac)
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -5.0 {
        normal_cdf(x).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(-x).ln()
    }
}

/// Running mean and variance (Welford), mergeable across chunks.
#[derive(Debug, Default, Clone, Copy)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Normal-approximation 95% half-width of a binomial proportion.
pub fn binomial_halfwidth(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let p = successes as f64 / trials as f64;
    Z95 * (p * (1.0 - p) / trials as f64).sqrt()
}
