//! Flag-value parsing for priors, losses, and chain strategies.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use riskcal_core::loss::{LossMatrix, LossSpec};
use riskcal_core::model::{ChainStrategy, SpaceKind};
use riskcal_core::prior::{CalibrationFamily, KDistribution, PriorSpec, TablePrior};

/// Parse a prior from JSON (`{"family":"crp","params":{"theta":1}}`) or
/// shorthand (`crp:1`, `crp2:0.3,0.25`, `beta-binomial:1,1`,
/// `trunc-exp-decay:2,3`, `dir-mult:1,geometric:0.4`,
/// `balance-neutral:shifted-poisson:2.5569`, `uniform-gamma`,
/// `uniform-partition`, `table:<csv>:<gamma|partition>`).
pub fn parse_prior(text: &str) -> Result<PriorSpec> {
    let text = text.trim();
    if text.starts_with('{') {
        let spec: PriorSpec = serde_json::from_str(text).context("parsing prior JSON")?;
        spec.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        return Ok(spec);
    }
    let (family, rest) = match text.split_once(':') {
        Some((f, r)) => (f, Some(r)),
        None => (text, None),
    };
    let spec = match family {
        "uniform-gamma" => PriorSpec::UniformGamma,
        "uniform-partition" => PriorSpec::UniformPartition,
        "crp" => PriorSpec::Crp { theta: one_number(rest, "crp:<theta>")? },
        "crp2" => {
            let [sigma, theta] = two_numbers(rest, "crp2:<sigma>,<theta>")?;
            PriorSpec::Crp2 { sigma, theta }
        }
        "beta-binomial" => {
            let [a_omega, b_omega] = two_numbers(rest, "beta-binomial:<a>,<b>")?;
            PriorSpec::BetaBinomial { a_omega, b_omega }
        }
        "trunc-exp-decay" => {
            let [kappa, s_max] = two_numbers(rest, "trunc-exp-decay:<kappa>,<s_max>")?;
            PriorSpec::TruncExpDecay { kappa, s_max: s_max as usize }
        }
        "dir-mult" => {
            let rest = rest.context("expected dir-mult:<alpha>,<k-dist>")?;
            let (alpha, kdist) =
                rest.split_once(',').context("expected dir-mult:<alpha>,<k-dist>")?;
            PriorSpec::DirMult {
                alpha: alpha.parse().context("parsing alpha")?,
                k: parse_kdist(kdist)?,
            }
        }
        "balance-neutral" => {
            PriorSpec::BalanceNeutral { k: parse_kdist(rest.context("expected a K distribution")?)? }
        }
        "table" => {
            let rest = rest.context("expected table:<csv>:<gamma|partition>")?;
            let (path, space) =
                rest.rsplit_once(':').context("expected table:<csv>:<gamma|partition>")?;
            let space = parse_space(space)?;
            PriorSpec::Table(
                TablePrior::from_csv(Path::new(path), space)
                    .map_err(|e| anyhow::anyhow!("{e}"))?,
            )
        }
        other => bail!("unknown prior family {other:?}"),
    };
    spec.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(spec)
}

pub fn parse_kdist(text: &str) -> Result<KDistribution> {
    let (kind, value) = text
        .split_once(':')
        .context("expected <shifted-poisson|geometric>:<value>")?;
    Ok(match kind {
        "shifted-poisson" | "sp" => {
            KDistribution::ShiftedPoisson { lambda: value.parse().context("parsing lambda")? }
        }
        "geometric" | "geom" => {
            KDistribution::Geometric { s: value.parse().context("parsing s")? }
        }
        other => bail!("unknown K distribution {other:?}"),
    })
}

pub fn parse_space(text: &str) -> Result<SpaceKind> {
    match text {
        "gamma" | "hypercube" => Ok(SpaceKind::Hypercube),
        "partition" | "partitions" => Ok(SpaceKind::Partitions),
        other => bail!("unknown space {other:?} (expected gamma or partition)"),
    }
}

/// Parse a loss name, optionally carrying its weight (`GH:0.7`), with a
/// separate `--a` flag as fallback; paths load explicit matrices.
pub fn parse_loss(text: &str, a: Option<f64>) -> Result<LossSpec> {
    let text = text.trim();
    if text.contains('/') || text.ends_with(".csv") {
        let matrix =
            LossMatrix::from_csv(&PathBuf::from(text)).map_err(|e| anyhow::anyhow!("{e}"))?;
        return Ok(LossSpec::Matrix(matrix));
    }
    let (name, inline_a) = match text.split_once(':') {
        Some((n, v)) => (n, Some(v.parse::<f64>().context("parsing loss weight")?)),
        None => (text, None),
    };
    let weight = |default: f64| inline_a.or(a).unwrap_or(default);
    Ok(match name {
        "01" | "zero-one" | "ZO" => LossSpec::ZeroOne,
        "GH" | "gh" => LossSpec::gh(weight(1.0)).map_err(|e| anyhow::anyhow!("{e}"))?,
        "GB" | "gb" => LossSpec::gb(weight(1.0)).map_err(|e| anyhow::anyhow!("{e}"))?,
        "VI" | "vi" => LossSpec::Vi,
        "VI-LB" | "vi-lb" | "VILB" => LossSpec::ViLb,
        other => bail!("unknown loss {other:?}"),
    })
}

/// Parse a comma-separated loss list such as `GB:1,VI,VI-LB`.
pub fn parse_losses(text: &str) -> Result<Vec<LossSpec>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_loss(t, None))
        .collect()
}

pub fn parse_strategy(text: &str, seed: u64) -> Result<ChainStrategy> {
    Ok(match text {
        "balanced-split" => ChainStrategy::BalancedSplit,
        "singleton-peel" => ChainStrategy::SingletonPeel,
        "random" => ChainStrategy::Random { seed },
        other => bail!("unknown chain strategy {other:?}"),
    })
}

pub fn parse_calibration_family(text: &str) -> Result<CalibrationFamily> {
    let (family, rest) = match text.split_once(':') {
        Some((f, r)) => (f, Some(r)),
        None => (text, None),
    };
    Ok(match family {
        "crp" => CalibrationFamily::Crp,
        "crp2" => CalibrationFamily::Crp2 { sigma: one_number(rest, "crp2:<sigma>")? },
        "beta-binomial" => CalibrationFamily::BetaBinomial,
        "dir-mult" => {
            CalibrationFamily::DirMultShiftedPoisson { alpha: one_number(rest, "dir-mult:<alpha>")? }
        }
        "balance-neutral" => CalibrationFamily::BalanceNeutralGeometric,
        "hierarchical-uniform" => CalibrationFamily::HierarchicalUniformGeometric {
            p: one_number(rest, "hierarchical-uniform:<p>")? as usize,
        },
        other => bail!("unknown calibration family {other:?}"),
    })
}

fn one_number(rest: Option<&str>, usage: &str) -> Result<f64> {
    rest.with_context(|| format!("expected {usage}"))?
        .parse()
        .with_context(|| format!("expected {usage}"))
}

fn two_numbers(rest: Option<&str>, usage: &str) -> Result<[f64; 2]> {
    let rest = rest.with_context(|| format!("expected {usage}"))?;
    let (a, b) = rest.split_once(',').with_context(|| format!("expected {usage}"))?;
    Ok([
        a.parse().with_context(|| format!("expected {usage}"))?,
        b.parse().with_context(|| format!("expected {usage}"))?,
    ])
}

/// Parse a comma-separated list of f64 values.
pub fn parse_number_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("parsing number {t:?}")))
        .collect()
}
