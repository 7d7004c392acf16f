//! Weighted sums of sequence shapes over infinite index ranges.
//!
//! Terms are summed directly up to `EXPLICIT_LIMIT`; the remainder uses the
//! closed-form integral plus the first Euler-Maclaurin corrections.

use super::SequenceKind;
use crate::sum::Compensated;

const EXPLICIT_LIMIT: usize = 1 << 16;

/// Sum of `shape(j) * (a + c ln j)` for `j >= start`.
pub(super) fn weighted_tail(kind: &SequenceKind, a: f64, c: f64, start: usize) -> f64 {
    let start = start.max(1);
    let cut = start.max(EXPLICIT_LIMIT);
    let f = |x: f64| kind.shape_at(x) * (a + c * x.ln());
    let mut acc = Compensated::default();
    for j in start..cut {
        acc.add(f(j as f64));
    }
    let x = cut as f64;
    let h = x * 1e-3;
    let slope = (f(x + h) - f(x - h)) / (2.0 * h);
    acc.add(integral_from(kind, a, c, x));
    acc.add(f(x) / 2.0);
    acc.add(-slope / 12.0);
    acc.value()
}

/// Integral of `shape(x) * (a + c ln x)` over `[x0, inf)`, for `x0 >= 2`.
fn integral_from(kind: &SequenceKind, a: f64, c: f64, x0: f64) -> f64 {
    let l = x0.ln();
    match *kind {
        SequenceKind::JmOptimal => {
            let s = l.sqrt();
            2.0 * a * upper_gamma_int(4, s) + 2.0 * c * upper_gamma_int(6, s)
        }
        SequenceKind::PowerLaw { m } => power_integral(m, a, c, x0),
        SequenceKind::InverseSquare => power_integral(2.0, a, c, x0),
        SequenceKind::LogPower { nu } => {
            let mut v = a * l.powf(1.0 - nu) / (nu - 1.0);
            if c != 0.0 {
                v += c * l.powf(2.0 - nu) / (nu - 2.0);
            }
            v
        }
        SequenceKind::ConstantBounded | SequenceKind::Uniform => f64::INFINITY,
    }
}

fn power_integral(m: f64, a: f64, c: f64, x0: f64) -> f64 {
    let k = m - 1.0;
    x0.powf(-k) * (a / k + c * (x0.ln() / k + 1.0 / (k * k)))
}

/// Upper incomplete gamma function for a positive integer order.
fn upper_gamma_int(n: u32, s: f64) -> f64 {
    let mut term = 1.0;
    let mut series = 1.0;
    let mut fact = 1.0;
    for k in 1..n {
        term *= s / k as f64;
        series += term;
        fact *= k as f64;
    }
    fact * (-s).exp() * series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_gamma_matches_factorial_at_zero() {
        assert!((upper_gamma_int(4, 0.0) - 6.0).abs() < 1e-15);
        assert!((upper_gamma_int(6, 0.0) - 120.0).abs() < 1e-12);
    }

    #[test]
    fn tail_is_consistent_across_starting_points() {
        // Moving the explicit/analytic split must not change the total.
        let kinds = [
            SequenceKind::JmOptimal,
            SequenceKind::PowerLaw { m: 2.0 },
            SequenceKind::LogPower { nu: 3.0 },
        ];
        for kind in &kinds {
            let full = weighted_tail(kind, 1.0, 1.0, 1);
            let mut head = Compensated::default();
            for j in 1..200_000usize {
                head.add(kind.shape(j) * (1.0 + (j as f64).ln()));
            }
            let split = head.value() + weighted_tail(kind, 1.0, 1.0, 200_000);
            assert!((full - split).abs() < 1e-11, "{kind:?}: {full} vs {split}");
        }
    }

    #[test]
    fn zeta_two() {
        let z = weighted_tail(&SequenceKind::InverseSquare, 1.0, 0.0, 1);
        assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
    }
}
