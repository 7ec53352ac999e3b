//! Flat key=value experiment configuration files.
//!
//! Every key has a CLI-flag equivalent and flags win. Unknown keys are
//! rejected so typos do not silently fall back to defaults.

use std::collections::BTreeMap;

use treeroute::forest::{Preference, RootPolicy};
use treeroute::metrics::{ExperimentConfig, StretchAveraging};
use treeroute::router::DownRule;
use treeroute::topology::{FaultGranularity, NodeId};

pub struct FileConfig {
    pub experiment: ExperimentConfig,
    pub out: Option<String>,
    pub format: Option<String>,
}

pub fn parse_mesh(s: &str) -> Result<(u16, u16), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("bad mesh size `{s}`, expected WxH"))?;
    let w = w.trim().parse().map_err(|_| format!("bad mesh width `{w}`"))?;
    let h = h.trim().parse().map_err(|_| format!("bad mesh height `{h}`"))?;
    Ok((w, h))
}

pub fn parse_mesh_list(s: &str) -> Result<Vec<(u16, u16)>, String> {
    s.split(',').map(|m| parse_mesh(m.trim())).collect()
}

pub fn parse_root(s: &str, mesh_hint: Option<(u16, u16)>) -> Result<RootPolicy, String> {
    match s {
        "central" => Ok(RootPolicy::Central),
        "highest-id" | "highest_id" => Ok(RootPolicy::HighestId),
        "corner-se" | "corner-sw" | "corner-ne" | "corner-nw" => {
            let (w, h) = mesh_hint.ok_or_else(|| {
                format!("root `{s}` needs a mesh topology with known dimensions")
            })?;
            let (w, h) = (w as u32, h as u32);
            let id = match s {
                "corner-nw" => 0,
                "corner-ne" => w - 1,
                "corner-sw" => (h - 1) * w,
                _ => h * w - 1,
            };
            Ok(RootPolicy::Explicit(NodeId(id)))
        }
        other => other
            .parse::<u32>()
            .map(|id| RootPolicy::Explicit(NodeId(id)))
            .map_err(|_| format!("bad root `{other}`")),
    }
}

pub fn parse_granularity(s: &str) -> Result<FaultGranularity, String> {
    match s {
        "link" => Ok(FaultGranularity::Link),
        "arc" => Ok(FaultGranularity::Arc),
        other => Err(format!("bad granularity `{other}` (link|arc)")),
    }
}

pub fn parse_averaging(s: &str) -> Result<StretchAveraging, String> {
    match s {
        "expectation" => Ok(StretchAveraging::Expectation),
        "distinct-mean" | "distinct_mean" => Ok(StretchAveraging::DistinctMean),
        other => Err(format!("bad averaging `{other}` (expectation|distinct-mean)")),
    }
}

pub fn parse_down_rule(s: &str) -> Result<DownRule, String> {
    match s {
        "cone" => Ok(DownRule::DeliverableCone),
        "strict-ancestor" | "ancestor" => Ok(DownRule::StrictAncestor),
        other => Err(format!("bad down rule `{other}` (cone|strict-ancestor)")),
    }
}

pub fn parse_prefs(s: &str) -> Result<Vec<Preference>, String> {
    s.split(',')
        .map(|p| Preference::parse_compass(p.trim()).map_err(|e| e.to_string()))
        .collect()
}

/// Parse a config file into an `ExperimentConfig` plus output options.
pub fn parse_config_file(text: &str) -> Result<FileConfig, String> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }

    let mut cfg = ExperimentConfig::default();
    let mut out = None;
    let mut format = None;
    for (key, value) in map {
        match key.as_str() {
            "meshes" | "mesh" => cfg.mesh_sizes = parse_mesh_list(&value)?,
            "trees" => {
                cfg.tree_counts = value
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| format!("bad tree count `{t}`")))
                    .collect::<Result<_, _>>()?
            }
            "fail_probs" => {
                cfg.fail_probs = value
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|_| format!("bad probability `{p}`")))
                    .collect::<Result<_, _>>()?
            }
            "seed" => cfg.master_seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?,
            "min_pairs" => {
                cfg.min_pairs = value.parse().map_err(|_| format!("bad min_pairs `{value}`"))?
            }
            "root" => cfg.root_policy = parse_root(&value, None)?,
            "prefs" => cfg.preferences = parse_prefs(&value)?,
            "averaging" => cfg.averaging = parse_averaging(&value)?,
            "granularity" => cfg.granularity = parse_granularity(&value)?,
            "down_rule" => cfg.down_rule = parse_down_rule(&value)?,
            "manhattan" => {
                cfg.manhattan = value
                    .parse()
                    .map_err(|_| format!("bad manhattan flag `{value}` (true|false)"))?
            }
            "workers" => {
                cfg.workers = Some(value.parse().map_err(|_| format!("bad workers `{value}`"))?)
            }
            "out" => out = Some(value),
            "format" => format = Some(value),
            other => return Err(format!("unknown config key `{other}`")),
        }
    }
    Ok(FileConfig {
        experiment: cfg,
        out,
        format,
    })
}
