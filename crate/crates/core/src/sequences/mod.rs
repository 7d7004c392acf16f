//! Coefficient sequences (γ, ξ, β) and their normalization.
//!
//! Every table is `scale * shape(j)` for some shape family, with the scale
//! chosen so that a weighted sum `Σ coeff_j (a + c ln j)` hits a budget.

mod tail;

use crate::sum::{compensated_sum, Compensated};
use crate::{Error, Result};

/// The constant published alongside the JM-type γ sequence.
pub const JM_PUBLISHED_CONSTANT: f64 = 0.07720838;

/// Tolerance for normalization and ξ checks.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceKind {
    /// `log(max(j,2)) / (j e^{sqrt(log j)})`
    JmOptimal,
    /// `j^-m`, `m > 1`
    PowerLaw {
        m: f64,
    },
    /// `1 / (j log^nu(max(j,2)))`, `nu > 2`
    LogPower {
        nu: f64,
    },
    ConstantBounded,
    /// `j^-2`
    InverseSquare,
    Uniform,
}

impl SequenceKind {
    pub fn shape(&self, j: usize) -> f64 {
        self.shape_at(j as f64)
    }

    pub(crate) fn shape_at(&self, x: f64) -> f64 {
        match *self {
            SequenceKind::JmOptimal => {
                let l = x.ln();
                x.max(2.0).ln() / (x * l.sqrt().exp())
            }
            SequenceKind::PowerLaw { m } => x.powf(-m),
            SequenceKind::LogPower { nu } => 1.0 / (x * x.max(2.0).ln().powf(nu)),
            SequenceKind::InverseSquare => 1.0 / (x * x),
            SequenceKind::ConstantBounded | SequenceKind::Uniform => 1.0,
        }
    }

    fn needs_bound(&self) -> bool {
        matches!(self, SequenceKind::ConstantBounded | SequenceKind::Uniform)
    }

    /// Whether coefficients are non-increasing (from index 2 for JM).
    pub fn is_decreasing(&self) -> bool {
        !self.needs_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Coefficients sum to one.
    SumOne,
    /// Coefficients sum to `alpha`.
    SumAlpha { alpha: f64 },
    /// `Σ ξ_j (1 + ln j) = α/b0` when `w0 <= b0`, else `Σ ξ_j (w0 + b0 ln j) = α`.
    XiWeighted { w0: f64, b0: f64, alpha: f64 },
}

impl Normalization {
    pub fn budget(&self) -> f64 {
        match *self {
            Normalization::SumOne => 1.0,
            Normalization::SumAlpha { alpha } => alpha,
            Normalization::XiWeighted { w0, b0, alpha } => {
                if w0 <= b0 {
                    alpha / b0
                } else {
                    alpha
                }
            }
        }
    }

    /// `(a, c)` such that the constraint weight at `j` is `a + c ln j`.
    fn weight_terms(&self) -> (f64, f64) {
        match *self {
            Normalization::SumOne | Normalization::SumAlpha { .. } => (1.0, 0.0),
            Normalization::XiWeighted { w0, b0, .. } => {
                if w0 <= b0 {
                    (1.0, 1.0)
                } else {
                    (w0, b0)
                }
            }
        }
    }

    pub fn weight(&self, j: usize) -> f64 {
        let (a, c) = self.weight_terms();
        if c == 0.0 {
            a
        } else {
            a + c * (j as f64).ln()
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Normalization::SumOne => Ok(()),
            Normalization::SumAlpha { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "sum-alpha budget must lie in (0,1], got {alpha}"
                    )))
                }
            }
            Normalization::XiWeighted { w0, b0, alpha } => {
                if !(w0 >= 0.0 && w0.is_finite()) {
                    Err(Error::config(format!(
                        "xi weighting requires w0 >= 0, got {w0}"
                    )))
                } else if !(b0 > 0.0 && b0.is_finite()) {
                    Err(Error::config(format!(
                        "xi weighting requires b0 > 0, got {b0}"
                    )))
                } else if !(alpha > 0.0 && alpha < 1.0) {
                    Err(Error::config(format!(
                        "xi weighting requires 0 < alpha < 1, got {alpha}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    pub normalization: Normalization,
    /// Horizon `N`; `None` is an infinite horizon.
    pub bound: Option<usize>,
}

impl SequenceSpec {
    pub fn new(kind: SequenceKind, normalization: Normalization, bound: Option<usize>) -> Self {
        SequenceSpec {
            kind,
            normalization,
            bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SequenceKind::PowerLaw { m } if !(m > 1.0 && m.is_finite()) => {
                return Err(Error::config(format!(
                    "power-law exponent must exceed 1, got {m}"
                )));
            }
            SequenceKind::LogPower { nu } if !(nu > 2.0 && nu.is_finite()) => {
                return Err(Error::config(format!(
                    "log-power exponent must exceed 2, got {nu}"
                )));
            }
            _ => {}
        }
        if self.kind.needs_bound() && self.bound.is_none() {
            return Err(Error::config(format!(
                "{:?} sequences need a bound",
                self.kind
            )));
        }
        if self.bound == Some(0) {
            return Err(Error::config("bound must be a positive integer"));
        }
        self.normalization.validate()
    }
}

/// Gamma sequence with the published constant, without renormalization.
pub fn gamma_jm(i: usize) -> f64 {
    JM_PUBLISHED_CONSTANT * SequenceKind::JmOptimal.shape(i)
}

/// Constant ξ over a horizon of `n` under the weighted constraint.
pub fn xi_constant_bounded(n: usize, w0: f64, b0: f64, alpha: f64) -> f64 {
    let norm = Normalization::XiWeighted { w0, b0, alpha };
    let total = compensated_sum((1..=n).map(|j| norm.weight(j)));
    norm.budget() / total
}

#[derive(Debug, Clone)]
pub struct SequenceTable {
    spec: SequenceSpec,
    scale: f64,
    coefficients: Vec<f64>,
    cumulative: Vec<f64>,
    running: Compensated,
}

impl SequenceTable {
    pub fn build(spec: SequenceSpec, length_hint: usize) -> Result<Self> {
        spec.validate()?;
        let norm = spec.normalization;
        let (a, c) = norm.weight_terms();
        let mass = match spec.bound {
            Some(n) => compensated_sum((1..=n).map(|j| spec.kind.shape(j) * norm.weight(j))),
            None => tail::weighted_tail(&spec.kind, a, c, 1),
        };
        let mut table = SequenceTable {
            spec,
            scale: norm.budget() / mass,
            coefficients: Vec::new(),
            cumulative: Vec::new(),
            running: Compensated::default(),
        };
        let target = spec.bound.unwrap_or(length_hint.max(1));
        table.materialize(target);
        Ok(table)
    }

    fn materialize(&mut self, upto: usize) {
        let upto = match self.spec.bound {
            Some(n) => upto.min(n),
            None => upto,
        };
        self.coefficients
            .reserve(upto.saturating_sub(self.coefficients.len()));
        for j in self.coefficients.len() + 1..=upto {
            let v = self.scale * self.spec.kind.shape(j);
            self.push(v);
        }
    }

    fn push(&mut self, v: f64) {
        self.coefficients.push(v);
        self.running.add(v);
        self.cumulative.push(self.running.value());
    }

    /// Materialize at least `n` coefficients (infinite horizons grow geometrically).
    pub fn extend_to(&mut self, n: usize) {
        if n > self.coefficients.len() {
            let grown = n.max(2 * self.coefficients.len());
            self.materialize(grown);
        }
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn scale_constant(&self) -> f64 {
        self.scale
    }

    pub fn horizon(&self) -> Option<usize> {
        self.spec.bound
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Coefficient at 1-based index `i`; `None` past a finite horizon.
    pub fn get(&self, i: usize) -> Option<f64> {
        debug_assert!(i >= 1, "sequence indices start at 1");
        if i == 0 {
            return None;
        }
        if let Some(&v) = self.coefficients.get(i - 1) {
            return Some(v);
        }
        match self.spec.bound {
            Some(_) => None,
            None => Some(self.scale * self.spec.kind.shape(i)),
        }
    }

    /// Sum of the first `n` coefficients.
    pub fn partial_sum(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else if n <= self.cumulative.len() {
            self.cumulative[n - 1]
        } else {
            let mut acc = Compensated::default();
            for i in 1..=n {
                acc.add(self.get(i).unwrap_or(0.0));
            }
            acc.value()
        }
    }

    /// `Σ_{j<=n} coeff_j w_j` under an arbitrary normalization's weights.
    pub fn partial_constraint_sum(&self, norm: &Normalization, n: usize) -> f64 {
        let mut acc = Compensated::default();
        for j in 1..=n {
            acc.add(self.get(j).unwrap_or(0.0) * norm.weight(j));
        }
        acc.value()
    }

    /// Full constraint sum over the horizon (with an analytic tail when infinite).
    pub fn constraint_sum(&self, norm: &Normalization) -> f64 {
        match self.spec.bound {
            Some(n) => self.partial_constraint_sum(norm, n),
            None => {
                let m = self.coefficients.len();
                let (a, c) = norm.weight_terms();
                self.partial_constraint_sum(norm, m)
                    + self.scale * tail::weighted_tail(&self.spec.kind, a, c, m + 1)
            }
        }
    }

    /// Copy with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SequenceTable {
        let mut out = SequenceTable {
            spec: self.spec,
            scale: self.scale * factor,
            coefficients: Vec::with_capacity(self.len()),
            cumulative: Vec::with_capacity(self.len()),
            running: Compensated::default(),
        };
        for &v in &self.coefficients {
            out.push(v * factor);
        }
        out
    }

    /// Keep the first `n` coefficients and respread the unspent budget over
    /// indices `n+1..=n_prime` in the same shape family.
    pub fn rebound(&self, n: usize, n_prime: usize) -> Result<SequenceTable> {
        if n >= n_prime {
            return Err(Error::Horizon(format!(
                "new horizon {n_prime} must exceed the {n} hypotheses already tested"
            )));
        }
        let norm = self.spec.normalization;
        let budget = norm.budget();
        let spent = self.partial_constraint_sum(&norm, n);
        let mut remaining = budget - spent;
        if remaining < 0.0 {
            if remaining < -NORMALIZATION_TOL {
                return Err(Error::Input(format!(
                    "spent mass {spent} already exceeds the budget {budget}"
                )));
            }
            remaining = 0.0;
        }
        let kind = self.spec.kind;
        let tail_mass = compensated_sum((n + 1..=n_prime).map(|j| kind.shape(j) * norm.weight(j)));
        let scale = remaining / tail_mass;
        let mut spec = self.spec;
        spec.bound = Some(n_prime);
        let mut out = SequenceTable {
            spec,
            scale,
            coefficients: Vec::with_capacity(n_prime),
            cumulative: Vec::with_capacity(n_prime),
            running: Compensated::default(),
        };
        for j in 1..=n {
            out.push(self.get(j).unwrap_or(0.0));
        }
        for j in n + 1..=n_prime {
            out.push(scale * kind.shape(j));
        }
        Ok(out)
    }
}

/// Whether `table` satisfies the ξ constraint for `(w0, b0, alpha)`.
pub fn validate_xi(table: &SequenceTable, w0: f64, b0: f64, alpha: f64) -> bool {
    let norm = Normalization::XiWeighted { w0, b0, alpha };
    if norm.validate().is_err() {
        return false;
    }
    table.constraint_sum(&norm) <= norm.budget() + NORMALIZATION_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi(kind: SequenceKind, bound: Option<usize>) -> SequenceTable {
        let norm = Normalization::XiWeighted {
            w0: 0.025,
            b0: 0.025,
            alpha: 0.05,
        };
        SequenceTable::build(SequenceSpec::new(kind, norm, bound), 16).unwrap()
    }

    #[test]
    fn gamma_jm_values() {
        // C ln 2 and C ln 2 / (2 e^{sqrt(ln 2)})
        assert!((gamma_jm(1) - 0.05351677091260086).abs() < 1e-16);
        assert!((gamma_jm(2) - 0.011638205782941741).abs() < 1e-16);
    }

    #[test]
    fn uniform_sum_alpha() {
        let spec = SequenceSpec::new(
            SequenceKind::Uniform,
            Normalization::SumAlpha { alpha: 0.05 },
            Some(10),
        );
        let t = SequenceTable::build(spec, 1).unwrap();
        assert_eq!(t.len(), 10);
        for &c in t.coefficients() {
            assert!((c - 0.005).abs() < 1e-15);
        }
        assert_eq!(t.get(11), None);
    }

    #[test]
    fn xi_constants() {
        let ratio = 0.025 / 0.05;
        let c2 = xi(SequenceKind::PowerLaw { m: 2.0 }, None).scale_constant() * ratio;
        let c3 = xi(SequenceKind::LogPower { nu: 3.0 }, None).scale_constant() * ratio;
        assert!((c2 - 0.387224).abs() < 1e-5, "{c2}");
        assert!((c3 - 0.139307).abs() < 1e-5, "{c3}");
        let b2 = xi(SequenceKind::PowerLaw { m: 2.0 }, Some(100)).scale_constant() * ratio;
        let b3 = xi(SequenceKind::LogPower { nu: 3.0 }, Some(100)).scale_constant() * ratio;
        assert!((b2 - 0.397344).abs() < 1e-5, "{b2}");
        assert!((b3 - 0.144134).abs() < 1e-5, "{b3}");
    }

    #[test]
    fn constant_bounded_matches_direct_formula() {
        for (n, want) in [(100, 0.00215638), (1000, 1.44673e-4), (10_000, 1.08567e-5)] {
            let got = xi_constant_bounded(n, 0.025, 0.025, 0.05) * 0.025 / 0.05;
            // Published values carry six significant figures.
            assert!((got - want).abs() < 5e-6 * want, "{n}: {got}");
            let t = xi(SequenceKind::ConstantBounded, Some(n));
            assert!((t.scale_constant() * 0.5 - got).abs() < 1e-15);
        }
        assert!((xi_constant_bounded(1, 0.01, 0.04, 0.05) - 0.05 / 0.04).abs() < 1e-15);
    }

    #[test]
    fn validate_xi_examples() {
        let t = xi(SequenceKind::PowerLaw { m: 2.0 }, None);
        assert!(validate_xi(&t, 0.025, 0.025, 0.05));
        assert!(!validate_xi(&t.scaled(2.0), 0.025, 0.025, 0.05));
        let c = xi(SequenceKind::ConstantBounded, Some(100));
        assert!(validate_xi(&c, 0.025, 0.025, 0.05));
    }

    #[test]
    fn jm_unbounded_sums_to_one() {
        let spec = SequenceSpec::new(SequenceKind::JmOptimal, Normalization::SumOne, None);
        let t = SequenceTable::build(spec, 100).unwrap();
        let total = t.constraint_sum(&Normalization::SumOne);
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        // Renormalized constant differs from the published one.
        assert!((t.scale_constant() - 0.0790820).abs() < 1e-6);
    }

    #[test]
    fn inverse_square_first_coefficient() {
        let spec = SequenceSpec::new(SequenceKind::InverseSquare, Normalization::SumOne, None);
        let t = SequenceTable::build(spec, 4).unwrap();
        let g1 = 6.0 / std::f64::consts::PI.powi(2);
        assert!((t.get(1).unwrap() - g1).abs() < 1e-12);
    }

    #[test]
    fn rebound_examples() {
        let uni = |alpha: Option<f64>| {
            let norm = alpha.map_or(Normalization::SumOne, |a| Normalization::SumAlpha {
                alpha: a,
            });
            SequenceTable::build(SequenceSpec::new(SequenceKind::Uniform, norm, Some(10)), 1)
                .unwrap()
        };
        let r = uni(None).rebound(5, 10).unwrap();
        let tail: f64 = r.coefficients()[5..].iter().sum();
        assert!((tail - 0.5).abs() < 1e-12);

        let r = uni(Some(0.05)).rebound(5, 20).unwrap();
        assert_eq!(r.len(), 20);
        let tail: f64 = r.coefficients()[5..].iter().sum();
        assert!((tail - 0.025).abs() < 1e-12);
        assert!((r.get(6).unwrap() - 0.025 / 15.0).abs() < 1e-15);

        let jm = SequenceTable::build(
            SequenceSpec::new(SequenceKind::JmOptimal, Normalization::SumOne, Some(100)),
            1,
        )
        .unwrap();
        let r = jm.rebound(10, 200).unwrap();
        let spent: f64 = jm.coefficients()[..10].iter().sum();
        let tail: f64 = r.coefficients()[10..].iter().sum();
        assert!((tail - (1.0 - spent)).abs() < 1e-12);
        assert!(uni(None).rebound(10, 10).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad = [
            SequenceSpec::new(SequenceKind::Uniform, Normalization::SumOne, None),
            SequenceSpec::new(
                SequenceKind::PowerLaw { m: 1.0 },
                Normalization::SumOne,
                None,
            ),
            SequenceSpec::new(
                SequenceKind::LogPower { nu: 2.0 },
                Normalization::SumOne,
                None,
            ),
            SequenceSpec::new(
                SequenceKind::JmOptimal,
                Normalization::XiWeighted {
                    w0: 0.01,
                    b0: 0.0,
                    alpha: 0.05,
                },
                None,
            ),
            SequenceSpec::new(SequenceKind::JmOptimal, Normalization::SumOne, Some(0)),
        ];
        for s in bad {
            assert!(SequenceTable::build(s, 1).is_err(), "{s:?}");
        }
    }

    #[test]
    fn lazy_extension_matches_direct_evaluation() {
        let spec = SequenceSpec::new(SequenceKind::JmOptimal, Normalization::SumOne, None);
        let mut t = SequenceTable::build(spec, 4).unwrap();
        let far = t.get(50).unwrap();
        t.extend_to(50);
        assert!(t.len() >= 50);
        assert_eq!(t.get(50).unwrap(), far);
        assert!((t.partial_sum(50) - t.cumulative()[49]).abs() < 1e-15);
    }
}
