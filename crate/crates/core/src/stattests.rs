//! Normal tail probabilities and the one-sided Fisher exact test.

use libm::erfc;
use std::f64::consts::SQRT_2;

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `Φ(-z)`.
pub fn pvalue_one_sided(z: f64) -> f64 {
    normal_cdf(-z).clamp(0.0, 1.0)
}

/// `2 Φ(-|z|)`.
pub fn pvalue_two_sided(z: f64) -> f64 {
    (2.0 * normal_cdf(-z.abs())).clamp(0.0, 1.0)
}

/// Treatment row `(a, b)` and control row `(c, d)` as successes/failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoByTwoTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl TwoByTwoTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        TwoByTwoTable { a, b, c, d }
    }

    /// Build from success counts out of row totals.
    pub fn from_counts(treat_success: u64, treat_n: u64, ctrl_success: u64, ctrl_n: u64) -> Self {
        TwoByTwoTable::new(
            treat_success,
            treat_n - treat_success,
            ctrl_success,
            ctrl_n - ctrl_success,
        )
    }

    pub fn is_degenerate(&self) -> bool {
        let (r1, r2) = (self.a + self.b, self.c + self.d);
        let (c1, c2) = (self.a + self.c, self.b + self.d);
        r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherOutcome {
    pub p_value: f64,
    /// An empty row or column; the p-value is 1 by convention.
    pub degenerate: bool,
}

/// `P(X >= a)` for the treatment-success count under fixed margins.
pub fn fisher_exact_greater(t: TwoByTwoTable) -> FisherOutcome {
    if t.is_degenerate() {
        return FisherOutcome {
            p_value: 1.0,
            degenerate: true,
        };
    }
    let r1 = t.a + t.b;
    let r2 = t.c + t.d;
    let c1 = t.a + t.c;
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    // Terms shared by every table with these margins cancel in the ratio.
    let lf = log_factorials((r1 + r2) as usize);
    let ln_fact = |k: u64| lf[k as usize];
    let log_mass =
        |x: u64| -(ln_fact(x) + ln_fact(r1 - x) + ln_fact(c1 - x) + ln_fact(r2 + x - c1));
    let logs: Vec<f64> = (lo..=hi).map(log_mass).collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut upper = 0.0;
    for (k, l) in logs.iter().enumerate().rev() {
        let x = lo + k as u64;
        let w = (l - peak).exp();
        total += w;
        if x >= t.a {
            upper += w;
        }
    }
    FisherOutcome {
        p_value: (upper / total).clamp(0.0, 1.0),
        degenerate: false,
    }
}

/// `ln k!` for `k = 0..=n`.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(acc);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}
