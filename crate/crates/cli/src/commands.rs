use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use onfdr::io::{
    write_estimates, write_sequence, write_traces, DecisionWriter, EstimateRow, PvalueReader,
};
use onfdr::procedures::{Procedure, ProcedureConfig, ProcedureKind};
use onfdr::scenarios::{
    estimate_many, eval_kidney, level_traces, Alternative, KidneyTrialScenario, Method,
    MixtureScenario, PlatformTrialScenario, Scenario, KIDNEY_REALISATIONS,
};
use onfdr::sequences::{Normalization, SequenceKind, SequenceSpec, SequenceTable};
use onfdr::Error;

use crate::args::*;

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sequence(a) => cmd_sequence(a),
        Command::Kidney(a) => cmd_kidney(a),
        Command::Trace(a) => cmd_trace(a),
    }
}

fn parse_kind(s: &str) -> Result<SequenceKind> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let num = |what: &str| -> Result<f64> {
        arg.ok_or_else(|| config_err(format!("`{name}` needs a parameter, e.g. {name}:{what}")))?
            .parse::<f64>()
            .map_err(|_| config_err(format!("bad parameter in sequence `{s}`")))
    };
    Ok(match name {
        "jm" => SequenceKind::JmOptimal,
        "power" => SequenceKind::PowerLaw { m: num("2")? },
        "logpower" => SequenceKind::LogPower { nu: num("3")? },
        "constant" => SequenceKind::ConstantBounded,
        "inverse-square" => SequenceKind::InverseSquare,
        "uniform" => SequenceKind::Uniform,
        _ => return Err(config_err(format!("unknown sequence kind `{s}`"))),
    })
}

fn normalization(arg: NormArg, alpha: f64, w0: f64, b0: f64) -> Normalization {
    match arg {
        NormArg::SumOne => Normalization::SumOne,
        NormArg::SumAlpha => Normalization::SumAlpha { alpha },
        NormArg::Xi => Normalization::XiWeighted { w0, b0, alpha },
    }
}

fn norm_arg(n: &Normalization) -> NormArg {
    match n {
        Normalization::SumOne => NormArg::SumOne,
        Normalization::SumAlpha { .. } => NormArg::SumAlpha,
        Normalization::XiWeighted { .. } => NormArg::Xi,
    }
}

fn procedure_kind(name: &str) -> Result<ProcedureKind> {
    ProcedureKind::from_name(name).ok_or_else(|| config_err(format!("unknown procedure `{name}`")))
}

pub fn build_config(a: &ProcedureArgs) -> Result<ProcedureConfig> {
    let kind = procedure_kind(&a.procedure)?;
    let alpha = a.alpha;
    let mut cfg = ProcedureConfig::standard(kind, alpha, a.bound);
    if let Some(l) = a.lambda {
        cfg.lambda = l;
        if kind == ProcedureKind::Saffron {
            cfg.w0 = (1.0 - l) * alpha / 2.0;
        }
    }
    if let Some(w0) = a.w0 {
        cfg.w0 = w0;
        if kind != ProcedureKind::Saffron {
            cfg.b0 = alpha - w0;
        }
    }
    if let Some(b0) = a.b0 {
        cfg.b0 = b0;
    }
    if let Some(s) = &a.sequence {
        cfg.sequence.kind = parse_kind(s)?;
    }
    let norm = a
        .normalization
        .unwrap_or_else(|| norm_arg(&cfg.sequence.normalization));
    cfg.sequence.normalization = normalization(norm, alpha, cfg.w0, cfg.b0);
    cfg.validate()?;
    Ok(cfg)
}

fn open_input(path: &Path) -> Result<Box<dyn Read>> {
    Ok(if path.as_os_str() == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(BufReader::new(
            File::open(path)
                .map_err(Error::Io)
                .with_context(|| format!("opening {}", path.display()))?,
        ))
    })
}

fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    Ok(if path.as_os_str() == "-" {
        Box::new(BufWriter::new(io::stdout().lock()))
    } else {
        Box::new(BufWriter::new(
            File::create(path)
                .map_err(Error::Io)
                .with_context(|| format!("creating {}", path.display()))?,
        ))
    })
}

fn parse_rebound(s: &str) -> Result<(usize, usize)> {
    let (n, np) = s
        .split_once(':')
        .ok_or_else(|| config_err(format!("--rebound expects n:Nprime, got `{s}`")))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|_| config_err(format!("bad --rebound value `{s}`")))
    };
    Ok((parse(n)?, parse(np)?))
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = build_config(&a.procedure)?;
    let rebound = a.rebound.as_deref().map(parse_rebound).transpose()?;
    if let Some((n, np)) = rebound {
        if cfg.sequence.bound.is_none() {
            return Err(config_err("--rebound requires --bound"));
        }
        if n >= np {
            return Err(config_err(format!(
                "--rebound {n}:{np}: new horizon must exceed {n}"
            )));
        }
    }
    let proc_ = Procedure::new(cfg, cfg.sequence.bound.unwrap_or(1024))?;
    let mut state = proc_.stream();
    let rows = PvalueReader::new(open_input(&a.input)?)?;
    let mut out = DecisionWriter::new(open_output(&a.output)?)?;
    let result = (|| -> Result<()> {
        for row in rows {
            let (_, id, p) = row?;
            if let Some((n, np)) = rebound {
                if state.tested() == n {
                    state.rebound(np)?;
                }
            }
            out.write(&id, &state.observe(p)?)?;
        }
        Ok(())
    })();
    out.flush()?;
    result
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid = s
        .split(',')
        .map(|x| {
            let v = x
                .trim()
                .parse::<f64>()
                .map_err(|_| config_err(format!("bad grid value `{x}`")))?;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(config_err(format!("grid value {v} outside [0, 1]")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(grid)
}

pub fn parse_method(name: &str, alpha: f64, n: usize) -> Result<Method> {
    let name = name.trim();
    Ok(match name {
        "bh" => Method::Bh { alpha },
        "bh-adjusted" => Method::BhAdjusted { alpha },
        "uncorrected" => Method::Uncorrected { alpha },
        _ => {
            let (base, bound) = match name.strip_suffix("-bounded") {
                Some(b) => (b, Some(n)),
                None => (name, None),
            };
            let cfg = ProcedureConfig::standard(procedure_kind(base)?, alpha, bound);
            cfg.validate()?;
            Method::Online(cfg)
        }
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ONFDR_THREADS") {
        let t = v
            .trim()
            .parse::<usize>()
            .map_err(|_| config_err(format!("bad ONFDR_THREADS `{v}`")))?;
        // Ignored if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    configure_threads()?;
    let grid = parse_grid(&a.pi1_grid)?;
    if a.reps == 0 {
        return Err(config_err("--reps must be positive"));
    }
    let n = if a.scenario == ScenarioArg::Platform {
        a.k
    } else {
        a.n
    };
    let methods = a
        .procedures
        .split(',')
        .map(|m| parse_method(m, a.alpha, n))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &pi1 in &grid {
        let scenario = match a.scenario {
            ScenarioArg::Platform => {
                Scenario::Platform(PlatformTrialScenario::new(a.k, a.n_target, a.sigma, pi1))
            }
            s => {
                let alt = match s {
                    ScenarioArg::Gaussian => Alternative::Gaussian,
                    ScenarioArg::Exponential => Alternative::Exponential,
                    _ => Alternative::Constant,
                };
                Scenario::Mixture(MixtureScenario::new(a.n, pi1, a.rho, alt))
            }
        };
        let est = estimate_many(&methods, &scenario, a.reps, a.seed)?;
        for (m, e) in methods.iter().zip(est) {
            rows.push(EstimateRow {
                scenario: scenario.name().to_string(),
                procedure: m.label(),
                pi1,
                n,
                seed: a.seed,
                estimate: e,
            });
        }
    }
    write_estimates(open_output(Path::new("-"))?, &rows)?;
    Ok(())
}

fn cmd_sequence(a: SequenceArgs) -> Result<()> {
    if a.n == 0 {
        return Err(config_err("--n must be positive"));
    }
    let w0 = a.w0.unwrap_or(a.alpha / 2.0);
    let b0 = a.b0.unwrap_or(a.alpha - w0);
    let spec = SequenceSpec::new(
        parse_kind(&a.kind)?,
        normalization(a.normalization, a.alpha, w0, b0),
        (!a.unbounded).then_some(a.n),
    );
    let table = SequenceTable::build(spec, a.n)?;
    write_sequence(open_output(Path::new("-"))?, &table, a.n)?;
    Ok(())
}

fn cmd_kidney(a: KidneyArgs) -> Result<()> {
    let mut scenario = KidneyTrialScenario {
        alpha: a.alpha,
        n0: a.n0,
        n_arm: a.n_arm,
        ..Default::default()
    };
    let cases: Vec<(String, u64, Vec<u64>)> = match (a.scenario, a.y0, &a.y) {
        (Some(s), _, _) => {
            if !(1..=5).contains(&s) {
                return Err(config_err(format!("--scenario must be 1..5, got {s}")));
            }
            let (y0, y) = KIDNEY_REALISATIONS[s - 1];
            vec![(s.to_string(), y0, y.to_vec())]
        }
        (None, Some(y0), Some(y)) => {
            let y = y
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| config_err(format!("bad count `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if y.len() != scenario.delta.len() {
                // Custom arm counts: treat arms with unknown effect as null.
                scenario.delta.resize(y.len(), 0.0);
            }
            vec![("custom".to_string(), y0, y)]
        }
        _ => KIDNEY_REALISATIONS
            .iter()
            .enumerate()
            .map(|(i, (y0, y))| ((i + 1).to_string(), *y0, y.to_vec()))
            .collect(),
    };
    let methods = scenario.methods();
    let results = cases
        .into_iter()
        .map(|(label, y0, y)| Ok((label, eval_kidney(&scenario, y0, &y, &methods)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = open_output(Path::new("-"))?;
    writeln!(out, "scenario,procedure,fdr,power").map_err(Error::Io)?;
    for (label, cells) in results {
        for cell in cells {
            writeln!(out, "{label},{},{},{}", cell.method, cell.fdr, cell.power)
                .map_err(Error::Io)?;
        }
    }
    out.flush().map_err(Error::Io)?;
    Ok(())
}

fn cmd_trace(a: TraceArgs) -> Result<()> {
    if a.n == 0 {
        return Err(config_err("--n must be positive"));
    }
    let effect = a.effect.unwrap_or_else(|| (a.n as f64).ln().sqrt());
    let traces = level_traces(a.n, effect, a.prob, a.alpha, a.seed, a.bounded)?;
    write_traces(open_output(Path::new("-"))?, &traces)?;
    Ok(())
}
