use std::path::Path;

use anyhow::{bail, Context, Result};
use ntk_sketch::ntk_sketch::{SketchConfig, SketchDims, SketchMode};

/// Sketch options shared by `features` and `validate sketch`.
#[derive(Debug, Clone, clap::Args)]
pub struct SketchArgs {
    /// Network depth L.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Target relative error ε in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Failure probability δ in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// `taylor` or `fitted:<degree>`.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<SketchMode>,
    /// Taylor degrees as `p,p'`; implies `--mode taylor`.
    #[arg(long, value_parser = parse_degrees)]
    pub degrees: Option<(usize, usize)>,
    /// Dimension overrides, e.g. `s=512,r=1024,s_star=256` (also `all=N`).
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<DimOverrides>,
    /// Nonzeros per OSNAP column.
    #[arg(long)]
    pub osnap_sparsity: Option<usize>,
}

pub fn parse_mode(s: &str) -> Result<SketchMode, String> {
    match s {
        "taylor" => Ok(SketchMode::Taylor),
        _ => match s.strip_prefix("fitted:") {
            Some(d) => d
                .parse()
                .map(|degree| SketchMode::Fitted { degree })
                .map_err(|e| format!("bad fitted degree {d:?}: {e}")),
            None if s == "fitted" => Ok(SketchMode::Fitted { degree: 8 }),
            None => Err(format!("unknown mode {s:?}, expected taylor or fitted:<degree>")),
        },
    }
}

fn parse_degrees(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected p,p'")?;
    let p = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let q = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((p, q))
}

#[derive(Debug, Clone)]
pub struct DimOverrides(Vec<(String, usize)>);

fn parse_dims(s: &str) -> Result<DimOverrides, String> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let v = v.trim().parse().map_err(|e| format!("{v:?}: {e}"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect::<Result<_, String>>()
        .map(DimOverrides)
}

fn apply_dims(dims: &mut SketchDims, overrides: &DimOverrides) -> Result<()> {
    for (key, v) in &overrides.0 {
        let v = *v;
        match key.as_str() {
            "all" => *dims = SketchDims::uniform(v),
            "s" => dims.s = v,
            "n" => dims.n = v,
            "n1" => dims.n1 = v,
            "r" => dims.r = v,
            "m" => dims.m = v,
            "m2" => dims.m2 = v,
            "s_star" | "s*" => dims.s_star = v,
            other => bail!("unknown dimension {other:?}"),
        }
    }
    Ok(())
}

pub enum Target {
    Ntk,
    Cntk { d1: usize, d2: usize },
}

/// Config from `--config` if given, otherwise from the accuracy flags; the
/// explicit overrides and the seed are applied on top.
pub fn build_config(args: &SketchArgs, file: Option<&Path>, seed: Option<u64>, target: Target) -> Result<SketchConfig> {
    let mut cfg = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => match target {
            Target::Ntk => SketchConfig::new(args.depth, args.eps, args.delta, seed.unwrap_or(0))?,
            Target::Cntk { d1, d2 } => {
                SketchConfig::for_cntk(args.depth, args.eps, args.delta, seed.unwrap_or(0), d1, d2, 32)?
            }
        },
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some((p, q)) = args.degrees {
        cfg = cfg.with_degrees(p, q);
    }
    if let Some(over) = &args.dims {
        apply_dims(&mut cfg.dims, over)?;
    }
    if let Some(s) = args.osnap_sparsity {
        cfg.osnap_sparsity = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
