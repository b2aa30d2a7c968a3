//! Beta-family special functions.

use libm::{exp, fabs, frexp, ldexp, lgamma, log};

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Product of factors with the binary exponent carried separately, so long
/// products neither overflow nor underflow before the final scaling.
#[derive(Debug, Clone, Copy)]
struct ScaledProduct {
    mantissa: f64,
    exponent: i32,
}

impl ScaledProduct {
    fn one() -> Self {
        ScaledProduct {
            mantissa: 1.0,
            exponent: 0,
        }
    }

    fn mul(&mut self, f: f64) {
        let (m, e) = frexp(self.mantissa * f);
        self.mantissa = m;
        self.exponent += e;
    }

    fn value(self) -> f64 {
        ldexp(self.mantissa, self.exponent)
    }
}

/// Beta-binomial mass `C(n, k) B(k + α, n - k + β) / B(α, β)`.
///
/// Evaluated as a product of `O(n)` rational factors with a separate
/// exponent, which keeps the relative error near `n·ε` without the
/// cancellation of differencing large `ln Γ` values.
pub fn beta_binomial_pmf_unchecked(k: u64, n: u64, alpha: f64, beta: f64) -> f64 {
    let j = k.min(n - k);
    let mut p = ScaledProduct::one();
    // C(n, k) = Π_{i=1}^{j} (n - j + i) / i
    let mut i = 1;
    let mut a = 0;
    let mut b = 0;
    let mut s = 0;
    // interleave numerator and denominator factors to keep the mantissa tame
    while s < n {
        if i <= j {
            p.mul((n - j + i) as f64 / i as f64);
            i += 1;
        }
        if a < k {
            p.mul(alpha + a as f64);
            a += 1;
        }
        if b < n - k {
            p.mul(beta + b as f64);
            b += 1;
        }
        p.mul(1.0 / (alpha + beta + s as f64));
        s += 1;
    }
    p.value()
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = exp(a * log(x) + b * log(1.0 - x) - ln_beta(a, b));
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

// Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Beta density.
pub fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    exp((a - 1.0) * log(x) + (b - 1.0) * log(1.0 - x) - ln_beta(a, b))
}

/// Quantile of `Beta(a, b)`: the `x` with `I_x(a, b) = p`.
///
/// Safeguarded Newton on a shrinking bracket.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    beta_quantile_from(p, a, b, a / (a + b))
}

/// [`beta_quantile`] started from `guess`, which pays off when inverting
/// many nearby probabilities.
pub fn beta_quantile_from(p: f64, a: f64, b: f64, guess: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = if guess > 0.0 && guess < 1.0 { guess } else { a / (a + b) };
    for _ in 0..200 {
        let f = inc_beta(x, a, b) - p;
        if fabs(f) < 1e-15 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = beta_pdf(x, a, b);
        let mut next = if dens > 0.0 { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if fabs(next - x) <= 1e-15 * x.max(1e-300) || hi - lo < 1e-16 {
            return next;
        }
        x = next;
    }
    x
}
