//! Synthetic experiments and replicate-level estimation.
//!
//! Each replicate draws from its own ChaCha stream keyed by `(seed, replicate)`,
//! so estimates are bit-identical regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use std::fmt;

use crate::baselines::{self, score, MetricsAccumulator, Score};
use crate::procedures::{DecisionRecord, Procedure, ProcedureConfig, ProcedureKind};
use crate::stattests::{fisher_exact_greater, pvalue_one_sided, pvalue_two_sided, TwoByTwoTable};
use crate::{Error, Result};

/// RNG for replicate `rep` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One replicate's p-values with their truth labels (`true` = non-null).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub pvalues: Vec<f64>,
    pub truth: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// Non-null means drawn from `N(0, 2 ln N)`; two-sided tests.
    Gaussian,
    /// Non-null means exponential with mean `sqrt(2 ln N)`; one-sided tests.
    Exponential,
    /// Non-null means fixed at `sqrt(k ln N)`, `k = 2` for `N <= 100` else 1; one-sided.
    Constant,
}

impl Alternative {
    pub fn name(&self) -> &'static str {
        match self {
            Alternative::Gaussian => "gaussian",
            Alternative::Exponential => "exponential",
            Alternative::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureScenario {
    pub n: usize,
    pub pi1: f64,
    pub rho: f64,
    pub alternative: Alternative,
}

impl MixtureScenario {
    pub fn new(n: usize, pi1: f64, rho: f64, alternative: Alternative) -> Self {
        MixtureScenario {
            n,
            pi1,
            rho,
            alternative,
        }
    }

    pub fn two_sided(&self) -> bool {
        self.alternative == Alternative::Gaussian
    }

    /// Non-null mean under the constant alternative.
    pub fn constant_effect(&self) -> f64 {
        let k = if self.n <= 100 { 2.0 } else { 1.0 };
        (k * (self.n as f64).ln()).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("mixture needs at least one hypothesis"));
        }
        if !(0.0..=1.0).contains(&self.pi1) {
            return Err(Error::config(format!(
                "pi1 must lie in [0,1], got {}",
                self.pi1
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config(format!(
                "rho must lie in [0,1), got {}",
                self.rho
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        let n = self.n;
        let scale = (2.0 * (n as f64).ln()).sqrt();
        let exp = Exp::new(1.0 / scale.max(f64::MIN_POSITIVE)).expect("positive rate");
        let (a, b) = (self.rho.sqrt(), (1.0 - self.rho).sqrt());
        let shared: f64 = rng.sample(StandardNormal);
        let mut pvalues = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for _ in 0..n {
            let non_null = rng.gen_bool(self.pi1);
            let theta = if !non_null {
                0.0
            } else {
                match self.alternative {
                    Alternative::Gaussian => scale * rng.sample::<f64, _>(StandardNormal),
                    Alternative::Exponential => exp.sample(rng),
                    Alternative::Constant => self.constant_effect(),
                }
            };
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let eps: f64 = rng.sample(StandardNormal);
            let z = theta + sign * (a * shared + b * eps);
            pvalues.push(if self.two_sided() {
                pvalue_two_sided(z)
            } else {
                pvalue_one_sided(z)
            });
            truth.push(theta != 0.0);
        }
        Sample { pvalues, truth }
    }
}

/// Draw one mixture replicate.
pub fn gen_mixture(scenario: &MixtureScenario, seed: u64) -> Result<Sample> {
    scenario.validate()?;
    Ok(scenario.sample(&mut replicate_rng(seed, 0)))
}

/// Sign-stripped latent noise `X` of the equicorrelated factor model.
pub fn gen_factor_noise(n: usize, rho: f64, rng: &mut impl Rng) -> Vec<f64> {
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let shared: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| a * shared + b * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Independent one-sided stream: each mean is `effect` with probability
/// `prob`, else zero, with unit-variance noise.
pub fn gen_independent_stream(n: usize, effect: f64, prob: f64, seed: u64) -> Sample {
    let mut rng = replicate_rng(seed, 0);
    let mut pvalues = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let non_null = rng.gen_bool(prob);
        let z = if non_null { effect } else { 0.0 } + rng.sample::<f64, _>(StandardNormal);
        pvalues.push(pvalue_one_sided(z));
        truth.push(non_null);
    }
    Sample { pvalues, truth }
}

/// Procedures compared in level traces.
pub const TRACE_PROCEDURES: [ProcedureKind; 6] = [
    ProcedureKind::Lord2,
    ProcedureKind::Lord3,
    ProcedureKind::LordPlusPlus,
    ProcedureKind::Saffron,
    ProcedureKind::LondIndep,
    ProcedureKind::Bonferroni,
];

/// Run each trace procedure over one independent stream, optionally bounded
/// at the stream length.
pub fn level_traces(
    n: usize,
    effect: f64,
    prob: f64,
    alpha: f64,
    seed: u64,
    bounded: bool,
) -> Result<Vec<(String, Vec<DecisionRecord>)>> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::config(format!(
            "probability must lie in [0,1], got {prob}"
        )));
    }
    let sample = gen_independent_stream(n, effect, prob, seed);
    TRACE_PROCEDURES
        .iter()
        .map(|&k| {
            let cfg = ProcedureConfig::standard(k, alpha, bounded.then_some(n));
            let label = Method::Online(cfg).label();
            Ok((label, Procedure::new(cfg, n)?.run(&sample.pvalues)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformTrialScenario {
    /// Experimental arms.
    pub k: usize,
    pub n_target: u64,
    pub sigma: f64,
    /// Probability an arm is effective.
    pub pi: f64,
    pub theta0: f64,
}

impl PlatformTrialScenario {
    pub fn new(k: usize, n_target: u64, sigma: f64, pi: f64) -> Self {
        PlatformTrialScenario {
            k,
            n_target,
            sigma,
            pi,
            theta0: 0.0,
        }
    }

    /// Control-arm size over the whole trial.
    pub fn n0(&self) -> u64 {
        (self.n_target as f64 * (self.k as f64).sqrt()).round() as u64
    }

    /// Shift of an effective arm's mean.
    pub fn effect(&self) -> f64 {
        (2.0 * (self.k as f64).ln()).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_target == 0 {
            return Err(Error::config(
                "platform trial needs arms and a positive target size",
            ));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::config(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::config(format!(
                "pi must lie in [0,1], got {}",
                self.pi
            )));
        }
        if (0.2 * self.n0() as f64).floor() < 1.0 {
            return Err(Error::config(
                "control arm too small: the earliest arm would have no controls",
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        let n0 = self.n0() as usize;
        let binom = Binomial::new(self.n_target, 0.9).expect("valid binomial");
        let mut arms: Vec<(f64, bool, f64, u64)> = (0..self.k)
            .map(|_| {
                let effective = rng.gen_bool(self.pi);
                let theta = self.theta0 + if effective { self.effect() } else { 0.0 };
                let tau: f64 = rng.gen_range(0.2..=1.0);
                let mut nj = binom.sample(rng);
                while nj == 0 {
                    nj = binom.sample(rng);
                }
                (tau, effective, theta, nj)
            })
            .collect();
        // Controls in recruitment order; an arm added at τ sees the first ⌊τ N0⌋.
        let mut control_prefix = Vec::with_capacity(n0 + 1);
        control_prefix.push(0.0);
        let mut acc = 0.0;
        for _ in 0..n0 {
            acc += self.theta0 + self.sigma * rng.sample::<f64, _>(StandardNormal);
            control_prefix.push(acc);
        }
        let mut rows: Vec<(f64, usize, f64, bool)> = arms
            .drain(..)
            .enumerate()
            .map(|(idx, (tau, effective, theta, nj))| {
                let mut s = 0.0;
                for _ in 0..nj {
                    s += theta + self.sigma * rng.sample::<f64, _>(StandardNormal);
                }
                let m0 = ((tau * n0 as f64).floor() as usize).max(1);
                let mean0 = control_prefix[m0] / m0 as f64;
                let mean1 = s / nj as f64;
                let z = (mean1 - mean0) / (self.sigma * (1.0 / m0 as f64 + 1.0 / nj as f64).sqrt());
                (tau, idx, pvalue_one_sided(z), effective)
            })
            .collect();
        rows.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        Sample {
            pvalues: rows.iter().map(|r| r.2).collect(),
            truth: rows.iter().map(|r| r.3).collect(),
        }
    }
}

/// Draw one platform trial; hypotheses come out in order of arm entry time.
pub fn gen_platform(scenario: &PlatformTrialScenario, seed: u64) -> Result<Sample> {
    scenario.validate()?;
    Ok(scenario.sample(&mut replicate_rng(seed, 0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Mixture(MixtureScenario),
    Platform(PlatformTrialScenario),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Mixture(m) => m.alternative.name(),
            Scenario::Platform(_) => "platform",
        }
    }

    /// Hypotheses per replicate.
    pub fn len(&self) -> usize {
        match self {
            Scenario::Mixture(m) => m.n,
            Scenario::Platform(p) => p.k,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn non_null_rate(&self) -> f64 {
        match self {
            Scenario::Mixture(m) => m.pi1,
            Scenario::Platform(p) => p.pi,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Scenario::Mixture(m) => m.validate(),
            Scenario::Platform(p) => p.validate(),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        match self {
            Scenario::Mixture(m) => m.sample(rng),
            Scenario::Platform(p) => p.sample(rng),
        }
    }
}

/// A testing rule applied to a whole replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Online(ProcedureConfig),
    Bh { alpha: f64 },
    BhAdjusted { alpha: f64 },
    Uncorrected { alpha: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Online(c) => match c.sequence.bound {
                Some(_) => format!("{}-bounded", c.kind.name()),
                None => c.kind.name().to_string(),
            },
            Method::Bh { .. } => "bh".into(),
            Method::BhAdjusted { .. } => "bh-adjusted".into(),
            Method::Uncorrected { .. } => "uncorrected".into(),
        }
    }

    fn prepare(&self, n: usize) -> Result<Prepared> {
        Ok(match *self {
            Method::Online(c) => {
                if let Some(b) = c.sequence.bound {
                    if b < n {
                        return Err(Error::config(format!(
                            "{}: horizon {b} is shorter than the {n} hypotheses per replicate",
                            self.label()
                        )));
                    }
                }
                Prepared::Online(Procedure::new(c, n)?)
            }
            other => Prepared::Batch(other),
        })
    }
}

enum Prepared {
    Online(Procedure),
    Batch(Method),
}

impl Prepared {
    fn decide(&self, pvalues: &[f64]) -> Result<Vec<bool>> {
        let n = pvalues.len();
        Ok(match self {
            Prepared::Online(p) => {
                let mut s = p.stream();
                let mut out = Vec::with_capacity(n);
                for &pv in pvalues {
                    out.push(s.observe(pv)?.rejected);
                }
                out
            }
            Prepared::Batch(m) => match *m {
                Method::Bh { alpha } => baselines::bh(pvalues, alpha)?.decisions(n),
                Method::BhAdjusted { alpha } => {
                    baselines::bh_adjusted(pvalues, alpha)?.decisions(n)
                }
                Method::Uncorrected { alpha } => {
                    baselines::uncorrected(pvalues, alpha)?.decisions(n)
                }
                Method::Online(_) => unreachable!("online methods are prepared separately"),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub fdr: f64,
    pub fdr_se: f64,
    pub power: Option<f64>,
    pub power_se: Option<f64>,
    pub reps: usize,
}

impl From<&MetricsAccumulator> for Estimate {
    fn from(m: &MetricsAccumulator) -> Self {
        Estimate {
            fdr: m.fdr(),
            fdr_se: m.fdr_se(),
            power: m.power(),
            power_se: m.power_se(),
            reps: m.replicates(),
        }
    }
}

/// Per-replicate scores for several methods on shared data.
pub fn replicate_scores(
    methods: &[Method],
    scenario: &Scenario,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<Score>>> {
    scenario.validate()?;
    let n = scenario.len();
    let prepared = methods
        .iter()
        .map(|m| m.prepare(n))
        .collect::<Result<Vec<_>>>()?;
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let sample = scenario.sample(&mut replicate_rng(seed, r));
            prepared
                .iter()
                .map(|p| score(&p.decide(&sample.pvalues)?, &sample.truth))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// FDR and power of each method over `reps` replicates; all methods see the
/// same replicate data.
pub fn estimate_many(
    methods: &[Method],
    scenario: &Scenario,
    reps: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if reps == 0 {
        return Err(Error::config("reps must be positive"));
    }
    let scores = replicate_scores(methods, scenario, reps, seed)?;
    let mut acc = vec![MetricsAccumulator::default(); methods.len()];
    for row in &scores {
        for (a, s) in acc.iter_mut().zip(row) {
            a.push(s);
        }
    }
    Ok(acc.iter().map(Estimate::from).collect())
}

pub fn estimate(method: &Method, scenario: &Scenario, reps: usize, seed: u64) -> Result<Estimate> {
    Ok(estimate_many(std::slice::from_ref(method), scenario, reps, seed)?[0])
}

/// Exact fraction as reported per trial realisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: usize,
    pub den: usize,
}

impl Fraction {
    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Binary-response platform trial with a shared control arm.
#[derive(Debug, Clone, PartialEq)]
pub struct KidneyTrialScenario {
    pub n0: u64,
    pub n_arm: u64,
    /// Control response rate.
    pub p0: f64,
    /// True response-rate differences per arm; positive means effective.
    pub delta: Vec<f64>,
    pub alpha: f64,
}

impl Default for KidneyTrialScenario {
    fn default() -> Self {
        KidneyTrialScenario {
            n0: 32,
            n_arm: 20,
            p0: 0.3,
            delta: vec![
                -0.01, -0.02, 0.23, 0.52, -0.04, 0.38, -0.03, 0.22, -0.02, -0.05,
            ],
            alpha: 0.10,
        }
    }
}

/// The five published realisations: control responders and arm responders.
pub const KIDNEY_REALISATIONS: [(u64, [u64; 10]); 5] = [
    (19, [5, 5, 9, 19, 4, 15, 4, 10, 5, 6]),
    (16, [7, 6, 13, 14, 8, 16, 7, 11, 6, 5]),
    (13, [5, 13, 10, 15, 10, 15, 5, 11, 5, 3]),
    (14, [10, 5, 9, 17, 10, 12, 10, 15, 7, 8]),
    (14, [4, 10, 14, 17, 4, 16, 9, 9, 3, 3]),
];

impl KidneyTrialScenario {
    pub fn truth(&self) -> Vec<bool> {
        self.delta.iter().map(|&d| d > 0.0).collect()
    }

    /// One-sided Fisher p-values per arm, in arm order.
    pub fn pvalues(&self, y0: u64, y: &[u64]) -> Result<Vec<f64>> {
        if y.len() != self.delta.len() {
            return Err(Error::Input(format!(
                "{} arm counts for {} arms",
                y.len(),
                self.delta.len()
            )));
        }
        if y0 > self.n0 {
            return Err(Error::Input(format!(
                "{y0} control responders out of {}",
                self.n0
            )));
        }
        y.iter()
            .enumerate()
            .map(|(j, &yj)| {
                if yj > self.n_arm {
                    return Err(Error::Input(format!(
                        "arm {}: {yj} responders out of {}",
                        j + 1,
                        self.n_arm
                    )));
                }
                let t = TwoByTwoTable::from_counts(yj, self.n_arm, y0, self.n0);
                Ok(fisher_exact_greater(t).p_value)
            })
            .collect()
    }

    /// Table columns: uncorrected, Bonferroni, LORD 2, LORD 3, LORD++,
    /// SAFFRON, LOND (all bounded at the number of arms), then BH.
    pub fn methods(&self) -> Vec<Method> {
        let (a, k) = (self.alpha, self.delta.len());
        let online = |kind| Method::Online(ProcedureConfig::standard(kind, a, Some(k)));
        vec![
            Method::Uncorrected { alpha: a },
            online(ProcedureKind::Bonferroni),
            online(ProcedureKind::Lord2),
            online(ProcedureKind::Lord3),
            online(ProcedureKind::LordPlusPlus),
            online(ProcedureKind::Saffron),
            online(ProcedureKind::LondIndep),
            Method::Bh { alpha: a },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KidneyCell {
    pub method: String,
    /// False rejections over rejections.
    pub fdr: Fraction,
    /// True rejections over effective arms.
    pub power: Fraction,
}

/// Test each arm, in arm order, with each method and report exact fractions.
pub fn eval_kidney(
    scenario: &KidneyTrialScenario,
    y0: u64,
    y: &[u64],
    methods: &[Method],
) -> Result<Vec<KidneyCell>> {
    let p = scenario.pvalues(y0, y)?;
    let truth = scenario.truth();
    methods
        .iter()
        .map(|m| {
            let s = score(&m.prepare(p.len())?.decide(&p)?, &truth)?;
            Ok(KidneyCell {
                method: m.label(),
                fdr: Fraction {
                    num: s.false_rejections,
                    den: s.rejections,
                },
                power: Fraction {
                    num: s.true_rejections,
                    den: s.non_nulls,
                },
            })
        })
        .collect()
}
