//! Online testing procedures as incremental state machines.
//!
//! A [`StreamState`] answers "what level does the next hypothesis get?" and
//! then absorbs the p-value, updating its discovery history.

use std::sync::Arc;

use crate::sequences::{validate_xi, Normalization, SequenceKind, SequenceSpec, SequenceTable};
use crate::sum::Compensated;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcedureKind {
    Lord2,
    Lord3,
    LordPlusPlus,
    Saffron,
    LordDep,
    LondIndep,
    LondDep,
    Bonferroni,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 8] = [
        ProcedureKind::Lord2,
        ProcedureKind::Lord3,
        ProcedureKind::LordPlusPlus,
        ProcedureKind::Saffron,
        ProcedureKind::LordDep,
        ProcedureKind::LondIndep,
        ProcedureKind::LondDep,
        ProcedureKind::Bonferroni,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProcedureKind::Lord2 => "lord2",
            ProcedureKind::Lord3 => "lord3",
            ProcedureKind::LordPlusPlus => "lordpp",
            ProcedureKind::Saffron => "saffron",
            ProcedureKind::LordDep => "lord-dep",
            ProcedureKind::LondIndep => "lond",
            ProcedureKind::LondDep => "lond-dep",
            ProcedureKind::Bonferroni => "bonferroni",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        ProcedureKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds whose table is read as per-test levels β rather than γ/ξ.
    fn uses_beta(&self) -> bool {
        matches!(
            self,
            ProcedureKind::LondIndep | ProcedureKind::LondDep | ProcedureKind::Bonferroni
        )
    }

    fn tracks_wealth(&self) -> bool {
        matches!(self, ProcedureKind::Lord3 | ProcedureKind::LordDep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureConfig {
    pub kind: ProcedureKind,
    pub alpha: f64,
    pub w0: f64,
    pub b0: f64,
    pub lambda: f64,
    pub sequence: SequenceSpec,
}

impl ProcedureConfig {
    /// Standard parameters: `w0 = α/2`, `b0 = α - w0` for the LORD family;
    /// `λ = 1/2`, `w0 = (1-λ)α/2` for SAFFRON; β summing to α for LOND and
    /// Bonferroni. With a bound, sequences are normalized over that horizon.
    pub fn standard(kind: ProcedureKind, alpha: f64, bound: Option<usize>) -> Self {
        let lambda = 0.5;
        let (w0, b0) = match kind {
            ProcedureKind::Saffron => ((1.0 - lambda) * alpha / 2.0, alpha / 2.0),
            _ => (alpha / 2.0, alpha / 2.0),
        };
        let (kind_seq, norm) = match kind {
            ProcedureKind::Lord2 | ProcedureKind::Lord3 | ProcedureKind::LordPlusPlus => {
                (SequenceKind::JmOptimal, Normalization::SumOne)
            }
            ProcedureKind::Saffron => (SequenceKind::InverseSquare, Normalization::SumOne),
            ProcedureKind::LordDep => {
                let k = if bound.is_some() {
                    SequenceKind::ConstantBounded
                } else {
                    SequenceKind::LogPower { nu: 3.0 }
                };
                (k, Normalization::XiWeighted { w0, b0, alpha })
            }
            ProcedureKind::LondIndep | ProcedureKind::LondDep | ProcedureKind::Bonferroni => {
                let k = if bound.is_some() {
                    SequenceKind::Uniform
                } else {
                    SequenceKind::JmOptimal
                };
                (k, Normalization::SumAlpha { alpha })
            }
        };
        ProcedureConfig {
            kind,
            alpha,
            w0,
            b0,
            lambda,
            sequence: SequenceSpec::new(kind_seq, norm, bound),
        }
    }

    pub fn with_sequence(mut self, sequence: SequenceSpec) -> Self {
        self.sequence = sequence;
        self
    }

    /// Check parameter constraints. Does not check the ξ condition, which
    /// needs a built table (see [`Procedure::new`]).
    pub fn validate(&self) -> Result<()> {
        let ProcedureConfig {
            kind,
            alpha,
            w0,
            b0,
            lambda,
            sequence,
        } = *self;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        if !(w0 >= 0.0 && w0.is_finite()) {
            return Err(Error::config(format!("w0 must be >= 0, got {w0}")));
        }
        sequence.validate()?;
        let norm = sequence.normalization;
        match kind {
            ProcedureKind::Lord2 | ProcedureKind::Lord3 => {
                if !(b0 > 0.0) {
                    return Err(Error::config(format!("b0 must be > 0, got {b0}")));
                }
                if w0 + b0 > alpha * (1.0 + 1e-12) {
                    return Err(Error::config(format!(
                        "w0 + b0 <= alpha violated: {w0} + {b0} > {alpha}"
                    )));
                }
            }
            ProcedureKind::LordPlusPlus => {
                if w0 > alpha {
                    return Err(Error::config(format!(
                        "w0 <= alpha violated: {w0} > {alpha}"
                    )));
                }
            }
            ProcedureKind::Saffron => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::config(format!(
                        "lambda must lie in (0,1), got {lambda}"
                    )));
                }
                if w0 >= (1.0 - lambda) * alpha {
                    return Err(Error::config(format!(
                        "w0 < (1 - lambda) * alpha violated: {w0} >= {}",
                        (1.0 - lambda) * alpha
                    )));
                }
            }
            ProcedureKind::LordDep => {
                if !(b0 > 0.0) {
                    return Err(Error::config(format!("b0 must be > 0, got {b0}")));
                }
            }
            _ => {}
        }
        if kind.uses_beta() {
            match norm {
                Normalization::SumAlpha { alpha: a } if a > alpha * (1.0 + 1e-12) => {
                    return Err(Error::config(format!(
                        "level sequence sums to {a}, above alpha = {alpha}"
                    )));
                }
                Normalization::XiWeighted { .. } => {
                    return Err(Error::config("xi weighting is not a level sequence"));
                }
                _ => {}
            }
        } else if kind != ProcedureKind::LordDep {
            if let Normalization::XiWeighted { .. } = norm {
                return Err(Error::config("gamma sequences must sum to at most one"));
            }
        }
        Ok(())
    }
}

/// A validated configuration with its coefficient table; cheap to clone and
/// share across threads.
#[derive(Debug, Clone)]
pub struct Procedure {
    config: ProcedureConfig,
    table: Arc<SequenceTable>,
}

impl Procedure {
    pub fn new(config: ProcedureConfig, length_hint: usize) -> Result<Self> {
        config.validate()?;
        let table = SequenceTable::build(config.sequence, length_hint)?;
        if config.kind == ProcedureKind::LordDep
            && !validate_xi(&table, config.w0, config.b0, config.alpha)
        {
            return Err(Error::config(format!(
                "xi sequence violates the dependence constraint for w0={}, b0={}, alpha={}",
                config.w0, config.b0, config.alpha
            )));
        }
        Ok(Procedure {
            config,
            table: Arc::new(table),
        })
    }

    pub fn config(&self) -> &ProcedureConfig {
        &self.config
    }

    pub fn table(&self) -> &SequenceTable {
        &self.table
    }

    pub fn stream(&self) -> StreamState {
        StreamState {
            config: self.config,
            table: Arc::clone(&self.table),
            i: 0,
            rejection_times: Vec::new(),
            wealth: self.config.w0,
            wealth_at_last_rejection: self.config.w0,
            harmonic: 0.0,
            candidates: 0,
            candidates_at_rejection: Vec::new(),
        }
    }

    pub fn run(&self, pvalues: &[f64]) -> Result<Vec<DecisionRecord>> {
        let mut s = self.stream();
        pvalues.iter().map(|&p| s.observe(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub index: usize,
    pub p: f64,
    pub level: f64,
    pub rejected: bool,
    /// Post-step wealth for the wealth-tracking procedures.
    pub wealth_after: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StreamState {
    config: ProcedureConfig,
    table: Arc<SequenceTable>,
    i: usize,
    rejection_times: Vec<usize>,
    wealth: f64,
    wealth_at_last_rejection: f64,
    harmonic: f64,
    candidates: usize,
    /// Candidate count among indices `1..=τ_k`, per rejection.
    candidates_at_rejection: Vec<usize>,
}

/// Validate `config`, build its table and start a fresh stream.
pub fn make_stream(config: ProcedureConfig) -> Result<StreamState> {
    Ok(Procedure::new(config, 64)?.stream())
}

/// Fold [`StreamState::observe`] over `pvalues`.
pub fn run_stream(config: ProcedureConfig, pvalues: &[f64]) -> Result<Vec<DecisionRecord>> {
    let proc_ = Procedure::new(config, pvalues.len().max(1))?;
    let mut s = proc_.stream();
    let mut out = Vec::with_capacity(pvalues.len());
    for (k, &p) in pvalues.iter().enumerate() {
        match s.observe(p) {
            Ok(r) => out.push(r),
            Err(Error::Input(msg)) => {
                return Err(Error::Input(format!("hypothesis {}: {msg}", k + 1)));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

impl StreamState {
    pub fn config(&self) -> &ProcedureConfig {
        &self.config
    }

    pub fn table(&self) -> &SequenceTable {
        &self.table
    }

    /// Number of hypotheses tested so far.
    pub fn tested(&self) -> usize {
        self.i
    }

    pub fn rejection_times(&self) -> &[usize] {
        &self.rejection_times
    }

    pub fn discoveries(&self) -> usize {
        self.rejection_times.len()
    }

    /// Current alpha-wealth; meaningful for the wealth-tracking procedures.
    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    pub fn bound(&self) -> Option<usize> {
        self.table.horizon()
    }

    fn coef(&self, j: usize) -> Result<f64> {
        debug_assert!(j >= 1, "sequence index must be positive");
        self.table.get(j).ok_or(Error::HorizonExhausted {
            index: self.i + 1,
            horizon: self.table.horizon().unwrap_or(0),
        })
    }

    fn beta(&self, j: usize) -> Result<f64> {
        let c = self.coef(j)?;
        Ok(match self.config.sequence.normalization {
            Normalization::SumOne => self.config.alpha * c,
            _ => c,
        })
    }

    /// Level for hypothesis `i + 1`, without changing the state.
    pub fn next_level(&self) -> Result<f64> {
        let i = self.i + 1;
        if let Some(n) = self.table.horizon() {
            if i > n {
                return Err(Error::HorizonExhausted {
                    index: i,
                    horizon: n,
                });
            }
        }
        let ProcedureConfig {
            alpha,
            w0,
            b0,
            lambda,
            ..
        } = self.config;
        let taus = &self.rejection_times;
        Ok(match self.config.kind {
            ProcedureKind::Lord2 => {
                let mut acc = Compensated::default();
                for &t in taus {
                    acc.add(self.coef(i - t)?);
                }
                self.coef(i)? * w0 + b0 * acc.value()
            }
            ProcedureKind::Lord3 => {
                let last = taus.last().copied().unwrap_or(0);
                self.coef(i - last)? * self.wealth_at_last_rejection
            }
            ProcedureKind::LordPlusPlus => {
                let mut level = self.coef(i)? * w0;
                if let Some((&first, rest)) = taus.split_first() {
                    level += (alpha - w0) * self.coef(i - first)?;
                    let mut acc = Compensated::default();
                    for &t in rest {
                        acc.add(self.coef(i - t)?);
                    }
                    level += alpha * acc.value();
                }
                level
            }
            ProcedureKind::Saffron => {
                let share = (1.0 - lambda) * alpha;
                let mut level = w0 * self.coef(i - self.candidates)?;
                for (k, &t) in taus.iter().enumerate() {
                    let since = self.candidates - self.candidates_at_rejection[k];
                    let g = self.coef(i - t - since)?;
                    level += if k == 0 { (share - w0) * g } else { share * g };
                }
                level.min(lambda)
            }
            ProcedureKind::LordDep => self.coef(i)? * self.wealth_at_last_rejection,
            ProcedureKind::LondIndep => self.beta(i)? * (taus.len() + 1) as f64,
            ProcedureKind::LondDep => {
                let h = self.harmonic + 1.0 / i as f64;
                self.beta(i)? / h * (taus.len() + 1) as f64
            }
            ProcedureKind::Bonferroni => self.beta(i)?,
        })
    }

    /// Test the next hypothesis with p-value `p`.
    pub fn observe(&mut self, p: f64) -> Result<DecisionRecord> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Input(format!("p-value {p} is outside [0, 1]")));
        }
        let level = self.next_level()?;
        let rejected = p <= level;
        self.i += 1;
        let i = self.i;
        self.harmonic += 1.0 / i as f64;
        if self.config.kind == ProcedureKind::Saffron && p <= self.config.lambda {
            self.candidates += 1;
        }
        let wealth_after = if self.config.kind.tracks_wealth() {
            self.wealth -= level;
            if rejected {
                self.wealth += self.config.b0;
            }
            Some(self.wealth)
        } else {
            None
        };
        if rejected {
            self.rejection_times.push(i);
            self.candidates_at_rejection.push(self.candidates);
            self.wealth_at_last_rejection = self.wealth;
        }
        Ok(DecisionRecord {
            index: i,
            p,
            level,
            rejected,
            wealth_after,
        })
    }

    /// Replace the table with one rebounded to horizon `n_prime`; the spent
    /// prefix is the hypotheses already tested.
    pub fn rebound(&mut self, n_prime: usize) -> Result<()> {
        if self.table.horizon().is_none() {
            return Err(Error::Horizon("stream has no bound to revise".into()));
        }
        if n_prime <= self.i {
            return Err(Error::Horizon(format!(
                "new horizon {n_prime} must exceed the {} hypotheses already tested",
                self.i
            )));
        }
        self.table = Arc::new(self.table.rebound(self.i, n_prime)?);
        Ok(())
    }
}

/// Level at index `i` when every earlier hypothesis was rejected (and, for
/// SAFFRON, every earlier p-value was a candidate), in closed form.
pub fn limit_level(config: &ProcedureConfig, i: usize) -> Result<f64> {
    if i == 0 {
        return Err(Error::Input("indices start at 1".into()));
    }
    closed_form(config, Procedure::new(*config, i)?.table(), i)
}

/// [`limit_level`] for indices `1..=n`, sharing one table.
pub fn limit_levels(config: &ProcedureConfig, n: usize) -> Result<Vec<f64>> {
    let proc_ = Procedure::new(*config, n.max(1))?;
    (1..=n)
        .map(|i| closed_form(config, proc_.table(), i))
        .collect()
}

fn closed_form(config: &ProcedureConfig, t: &SequenceTable, i: usize) -> Result<f64> {
    let g = |j: usize| {
        t.get(j).ok_or(Error::HorizonExhausted {
            index: i,
            horizon: t.horizon().unwrap_or(0),
        })
    };
    let ProcedureConfig {
        alpha,
        w0,
        b0,
        lambda,
        ..
    } = *config;
    Ok(match config.kind {
        ProcedureKind::Lord2 => g(i)? * w0 + b0 * t.partial_sum(i - 1),
        ProcedureKind::Lord3 => {
            let g1 = g(1)?;
            let decay = (1.0 - g1).powi((i - 1) as i32);
            g1 * decay * w0 + b0 * (1.0 - decay)
        }
        ProcedureKind::LordPlusPlus => {
            if i == 1 {
                g(1)? * w0
            } else {
                g(i)? * w0 + (alpha - w0) * g(i - 1)? + alpha * t.partial_sum(i - 2)
            }
        }
        ProcedureKind::Saffron => {
            let g1 = g(1)?;
            if i == 1 {
                (g1 * w0).min(lambda)
            } else {
                ((i - 1) as f64 * (1.0 - lambda) * alpha * g1).min(lambda)
            }
        }
        ProcedureKind::LordDep => {
            // W(i-1) = w0 Π_{j<i}(1-ξ_j) + b0 [1 + Σ_{j=2}^{i-1} Π_{k=j}^{i-1}(1-ξ_k)]
            let mut prod = 1.0;
            let mut acc = Compensated::default();
            for j in (1..i).rev() {
                prod *= 1.0 - g(j)?;
                if j >= 2 {
                    acc.add(prod);
                }
            }
            let wealth = if i == 1 {
                w0
            } else {
                w0 * prod + b0 * (1.0 + acc.value())
            };
            g(i)? * wealth
        }
        other => {
            return Err(Error::Unsupported(format!(
                "no all-rejection closed form for {}",
                other.name()
            )))
        }
    })
}
