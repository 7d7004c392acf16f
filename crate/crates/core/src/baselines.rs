//! Offline comparators and error-rate metrics.

use crate::sequences::{Normalization, SequenceSpec, SequenceTable};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// 1-based indices of rejected hypotheses, ascending.
    pub rejected: Vec<usize>,
    /// Effective cutoff.
    pub threshold: f64,
}

impl BatchResult {
    /// Per-hypothesis rejection flags.
    pub fn decisions(&self, n: usize) -> Vec<bool> {
        let mut out = vec![false; n];
        for &i in &self.rejected {
            out[i - 1] = true;
        }
        out
    }

    fn empty() -> Self {
        BatchResult {
            rejected: Vec::new(),
            threshold: 0.0,
        }
    }
}

fn check_pvalues(pvalues: &[f64]) -> Result<()> {
    match pvalues.iter().position(|p| !(0.0..=1.0).contains(p)) {
        Some(k) => Err(Error::Input(format!(
            "p-value {} at position {} is outside [0, 1]",
            pvalues[k],
            k + 1
        ))),
        None => Ok(()),
    }
}

/// Benjamini-Hochberg step-up at level `alpha`.
pub fn bh(pvalues: &[f64], alpha: f64) -> Result<BatchResult> {
    check_pvalues(pvalues)?;
    if pvalues.is_empty() {
        return Ok(BatchResult::empty());
    }
    let n = pvalues.len() as f64;
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = sorted
        .iter()
        .enumerate()
        .rev()
        .find(|&(k, &p)| p <= (k + 1) as f64 * alpha / n)
        .map(|(_, &p)| p);
    Ok(match cutoff {
        None => BatchResult::empty(),
        Some(t) => BatchResult {
            rejected: (1..=pvalues.len())
                .filter(|&i| pvalues[i - 1] <= t)
                .collect(),
            threshold: t,
        },
    })
}

/// BH at `alpha / Σ_{i<=N} 1/i`, valid under arbitrary dependence.
pub fn bh_adjusted(pvalues: &[f64], alpha: f64) -> Result<BatchResult> {
    let h: f64 = (1..=pvalues.len()).map(|i| 1.0 / i as f64).sum();
    bh(pvalues, alpha / h.max(1.0))
}

/// Reject every `p < alpha`.
pub fn uncorrected(pvalues: &[f64], alpha: f64) -> Result<BatchResult> {
    check_pvalues(pvalues)?;
    Ok(BatchResult {
        rejected: (1..=pvalues.len())
            .filter(|&i| pvalues[i - 1] < alpha)
            .collect(),
        threshold: alpha,
    })
}

/// Familywise-error levels: `α γ_i` from a sequence, or `α/N` with only a count.
///
/// A `SumOne` sequence is scaled by `alpha`; a `SumAlpha` one is used as is.
/// For an infinite sequence `n` sets how many levels to return.
pub fn bonferroni_levels(
    spec: Option<&SequenceSpec>,
    alpha: f64,
    n: Option<usize>,
) -> Result<Vec<f64>> {
    match (spec, n) {
        (None, None) => Err(Error::config(
            "bonferroni levels need a sequence or a count",
        )),
        (None, Some(n)) => {
            if n == 0 {
                return Err(Error::config("count must be positive"));
            }
            Ok(vec![alpha / n as f64; n])
        }
        (Some(spec), n) => {
            let len = match (spec.bound, n) {
                (Some(b), Some(n)) => b.min(n),
                (Some(b), None) => b,
                (None, Some(n)) => n,
                (None, None) => {
                    return Err(Error::config("an infinite sequence needs a level count"))
                }
            };
            let t = SequenceTable::build(*spec, len)?;
            let factor = match spec.normalization {
                Normalization::SumOne => alpha,
                Normalization::SumAlpha { .. } => 1.0,
                Normalization::XiWeighted { .. } => {
                    return Err(Error::config("xi weighting is not a level sequence"))
                }
            };
            Ok(t.coefficients()[..len].iter().map(|g| g * factor).collect())
        }
    }
}

/// `α / 2^i` for `i = 1..=n`.
pub fn geometric_levels(alpha: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| alpha / 2f64.powi(i as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub false_rejections: usize,
    pub rejections: usize,
    pub true_rejections: usize,
    pub non_nulls: usize,
}

impl Score {
    /// `V / max(R, 1)`.
    pub fn fdp(&self) -> f64 {
        self.false_rejections as f64 / self.rejections.max(1) as f64
    }

    /// Fraction of non-nulls rejected; `None` without non-nulls.
    pub fn power(&self) -> Option<f64> {
        (self.non_nulls > 0).then(|| self.true_rejections as f64 / self.non_nulls as f64)
    }
}

/// Tally decisions against the truth (`true` = non-null).
pub fn score(decisions: &[bool], truth: &[bool]) -> Result<Score> {
    if decisions.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} decisions but {} truth labels",
            decisions.len(),
            truth.len()
        )));
    }
    let mut s = Score {
        false_rejections: 0,
        rejections: 0,
        true_rejections: 0,
        non_nulls: 0,
    };
    for (&d, &t) in decisions.iter().zip(truth) {
        s.non_nulls += t as usize;
        if d {
            s.rejections += 1;
            if t {
                s.true_rejections += 1;
            } else {
                s.false_rejections += 1;
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn se(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}

/// Running FDP and power means with Monte Carlo standard errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsAccumulator {
    fdp: Moments,
    power: Moments,
}

impl MetricsAccumulator {
    pub fn push(&mut self, s: &Score) {
        self.fdp.push(s.fdp());
        if let Some(p) = s.power() {
            self.power.push(p);
        }
    }

    pub fn replicates(&self) -> usize {
        self.fdp.n
    }

    pub fn fdr(&self) -> f64 {
        self.fdp.mean
    }

    pub fn fdr_se(&self) -> f64 {
        self.fdp.se()
    }

    pub fn power(&self) -> Option<f64> {
        (self.power.n > 0).then_some(self.power.mean)
    }

    pub fn power_se(&self) -> Option<f64> {
        (self.power.n > 0).then(|| self.power.se())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::SequenceKind;

    const P: [f64; 4] = [0.01, 0.02, 0.04, 0.9];

    #[test]
    fn bh_examples() {
        let r = bh(&P, 0.05).unwrap();
        assert_eq!(r.rejected, vec![1, 2]);
        assert_eq!(r.threshold, 0.02);
        assert!(bh(&[1.0; 5], 0.05).unwrap().rejected.is_empty());
        assert_eq!(bh(&[0.04], 0.05).unwrap().rejected, vec![1]);
        assert!(bh(&[], 0.05).unwrap().rejected.is_empty());
    }

    #[test]
    fn bh_adjusted_examples() {
        assert_eq!(
            bh_adjusted(&[0.04], 0.05).unwrap(),
            bh(&[0.04], 0.05).unwrap()
        );
        assert!(bh_adjusted(&P, 0.05).unwrap().rejected.is_empty());
        assert_eq!(
            bh_adjusted(&[0.0; 3], 0.05).unwrap().rejected,
            vec![1, 2, 3]
        );
    }

    #[test]
    fn uncorrected_is_strict() {
        let r = uncorrected(&[0.049, 0.05, 0.051], 0.05).unwrap();
        assert_eq!(r.rejected, vec![1]);
        assert!(uncorrected(&[], 0.05).unwrap().rejected.is_empty());
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(
            bonferroni_levels(None, 0.05, Some(20)).unwrap(),
            vec![0.0025; 20]
        );
        let spec = SequenceSpec::new(SequenceKind::JmOptimal, Normalization::SumOne, None);
        let lv = bonferroni_levels(Some(&spec), 0.05, Some(3)).unwrap();
        // Oracle: raw published-constant sequence divided by its own total,
        // summed directly to 10^6 with an integral tail.
        let cut = 1_000_000usize;
        let head: f64 = crate::sum::compensated_sum((1..cut).map(crate::sequences::gamma_jm));
        let s = (cut as f64).ln().sqrt();
        let gamma4 = 6.0 * (-s).exp() * (1.0 + s + s * s / 2.0 + s * s * s / 6.0);
        let total = head
            + crate::sequences::JM_PUBLISHED_CONSTANT * 2.0 * gamma4
            + crate::sequences::gamma_jm(cut) / 2.0;
        let want = 0.05 * crate::sequences::gamma_jm(1) / total;
        assert!((lv[0] - want).abs() < 1e-9, "{} vs {want}", lv[0]);
        assert!(bonferroni_levels(None, 0.05, None).is_err());
        assert_eq!(geometric_levels(0.05, 3)[2], 0.00625);
    }

    #[test]
    fn score_examples() {
        let s = score(&[false; 3], &[true, false, false]).unwrap();
        assert_eq!(s.fdp(), 0.0);
        assert_eq!(s.power(), Some(0.0));
        let s = score(&[true; 4], &[false, false, true, true]).unwrap();
        assert_eq!((s.fdp(), s.power()), (0.5, Some(1.0)));
        assert_eq!(score(&[true], &[false]).unwrap().power(), None);
        assert!(score(&[true], &[]).is_err());
    }

    #[test]
    fn accumulator_moments() {
        let mut m = MetricsAccumulator::default();
        for d in [[true, false], [false, false]] {
            m.push(&score(&d, &[false, false]).unwrap());
        }
        assert_eq!(m.fdr(), 0.5);
        assert!((m.fdr_se() - 0.5).abs() < 1e-15);
        assert_eq!(m.power(), None);
    }
}
