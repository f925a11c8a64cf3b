//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments run to end of line
//! grid.rows = 20
//! demand.schedule = 480:0, 480:1, 480:0
//! rl.beta = [10, 1, 5, 12, 8]
//! ```
//!
//! Every key is optional; unknown and repeated keys are errors.

use std::path::Path;
use std::str::FromStr;

use crate::citygrid::TravelModel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::qdispatch::RewardWeights;
use crate::simcore::{PatternPreset, SimConfig};

pub const KEYS: &[&str] = &[
    "grid.rows",
    "grid.cols",
    "grid.cell_length_km",
    "grid.minutes_per_cell",
    "match.radius_cells",
    "demand.k_true",
    "demand.schedule",
    "demand.patterns",
    "demand.rate",
    "demand.seed",
    "demand.forecast_window",
    "fare.base",
    "fare.per_km",
    "routing.max_detour_ratio",
    "fleet.size",
    "fleet.capacity",
    "fleet.mileage",
    "fleet.entry_ticks",
    "fleet.max_working_minutes",
    "fleet.idle_redispatch",
    "rl.beta",
    "rl.eta",
    "rl.k",
    "rl.eps_steps",
    "rl.sigma_steps",
    "rl.gas_price",
    "cpd.enabled",
    "cpd.threshold",
    "cpd.window_ticks",
    "cpd.min_segment",
    "cpd.epsilon",
    "cpd.min_in_service",
    "sim.ticks",
    "sim.warmup_ticks",
    "sim.request_ttl",
    "sim.day_minutes",
    "sim.parallel",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn real(key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => num(key, v),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
    }
}

fn schedule(key: &str, v: &str) -> Result<Vec<(u64, usize)>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|seg| {
            let (dur, pat) = seg
                .split_once(':')
                .ok_or_else(|| Error::config(key, format!("segment `{seg}` is not duration:pattern")))?;
            Ok((num(key, dur.trim())?, num(key, pat.trim())?))
        })
        .collect()
}

fn beta(key: &str, v: &str) -> Result<[f64; 5]> {
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::config(key, "expected a bracketed list of five numbers"))?;
    let vals: Vec<f64> = inner
        .split(',')
        .map(|s| num(key, s.trim()))
        .collect::<Result<_>>()?;
    vals.try_into()
        .map_err(|_| Error::config(key, "expected exactly five weights"))
}

fn apply(cfg: &mut SimConfig, key: &str, v: &str) -> Result<()> {
    let g = &mut cfg.grid;
    match key {
        "grid.rows" => g.grid_rows = num(key, v)?,
        "grid.cols" => g.grid_cols = num(key, v)?,
        "grid.cell_length_km" => g.cell_length = real(key, v)?,
        "grid.minutes_per_cell" => g.minutes_per_cell = real(key, v)?,
        "match.radius_cells" => cfg.match_radius = num(key, v)?,
        "demand.k_true" => cfg.demand.k_true = num(key, v)?,
        "demand.schedule" => cfg.demand.schedule = schedule(key, v)?,
        "demand.patterns" => cfg.demand.preset = PatternPreset::parse(v)?,
        "demand.rate" => cfg.demand.rate = real(key, v)?,
        "demand.seed" => cfg.demand.seed = Some(num(key, v)?),
        "demand.forecast_window" => cfg.demand.forecast_window = num(key, v)?,
        "fare.base" => cfg.demand.fares.base = real(key, v)?,
        "fare.per_km" => cfg.demand.fares.per_km = real(key, v)?,
        "routing.max_detour_ratio" => cfg.max_detour_ratio = real(key, v)?,
        "fleet.size" => cfg.fleet.size = num(key, v)?,
        "fleet.capacity" => cfg.fleet.capacity = num(key, v)?,
        "fleet.mileage" => cfg.fleet.mileage = real(key, v)?,
        "fleet.entry_ticks" => cfg.fleet.entry_ticks = num(key, v)?,
        "fleet.max_working_minutes" => cfg.fleet.max_working_minutes = num(key, v)?,
        "fleet.idle_redispatch" => cfg.fleet.idle_redispatch = num(key, v)?,
        "rl.beta" => cfg.rl.weights = RewardWeights::new(beta(key, v)?)?,
        "rl.eta" => cfg.rl.eta = real(key, v)?,
        "rl.k" => cfg.rl.k = num(key, v)?,
        "rl.eps_steps" => cfg.rl.decay.eps_steps = num(key, v)?,
        "rl.sigma_steps" => cfg.rl.decay.sigma_steps = num(key, v)?,
        "rl.gas_price" => cfg.rl.gas_price = real(key, v)?,
        "cpd.enabled" => cfg.cpd.enabled = boolean(key, v)?,
        "cpd.threshold" => cfg.cpd.threshold = real(key, v)?,
        "cpd.window_ticks" => cfg.cpd.window_ticks = num(key, v)?,
        "cpd.min_segment" => cfg.cpd.min_segment = Some(num(key, v)?),
        "cpd.epsilon" => cfg.cpd.epsilon = real(key, v)?,
        "cpd.min_in_service" => cfg.cpd.min_in_service = real(key, v)?,
        "sim.ticks" => cfg.ticks = num(key, v)?,
        "sim.warmup_ticks" => cfg.warmup_ticks = num(key, v)?,
        "sim.request_ttl" => cfg.request_ttl = num(key, v)?,
        "sim.day_minutes" => cfg.day_minutes = num(key, v)?,
        "sim.parallel" => {
            cfg.exec = if boolean(key, v)? {
                Exec::Parallel
            } else {
                Exec::Sequential
            }
        }
        _ => return Err(Error::config(key, "unknown key")),
    }
    Ok(())
}

/// Parse a config text on top of the defaults and validate the result.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}", lineno + 1), format!("expected key = value, got `{line}`"))
        })?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::config(key, "given more than once"));
        }
        apply(&mut cfg, key, value.trim())?;
    }
    cfg.grid = TravelModel::new(
        cfg.grid.grid_rows,
        cfg.grid.grid_cols,
        cfg.grid.cell_length,
        cfg.grid.minutes_per_cell,
    )?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn fmt_real(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:?}")
    }
}

/// Every key with its effective value, in [`KEYS`] order. Parsing the
/// output reproduces `cfg`.
pub fn render_config(cfg: &SimConfig) -> String {
    let sched: Vec<String> = cfg.demand.schedule.iter().map(|(d, p)| format!("{d}:{p}")).collect();
    let beta: Vec<String> = cfg.rl.weights.beta.iter().map(|b| fmt_real(*b)).collect();
    let mut lines = vec![
        format!("grid.rows = {}", cfg.grid.grid_rows),
        format!("grid.cols = {}", cfg.grid.grid_cols),
        format!("grid.cell_length_km = {}", fmt_real(cfg.grid.cell_length)),
        format!("grid.minutes_per_cell = {}", fmt_real(cfg.grid.minutes_per_cell)),
        format!("match.radius_cells = {}", cfg.match_radius),
        format!("demand.k_true = {}", cfg.demand.k_true),
        format!("demand.schedule = {}", sched.join(", ")),
        format!("demand.patterns = {}", cfg.demand.preset.name()),
        format!("demand.rate = {}", fmt_real(cfg.demand.rate)),
    ];
    if let Some(s) = cfg.demand.seed {
        lines.push(format!("demand.seed = {s}"));
    }
    lines.extend([
        format!("demand.forecast_window = {}", cfg.demand.forecast_window),
        format!("fare.base = {}", fmt_real(cfg.demand.fares.base)),
        format!("fare.per_km = {}", fmt_real(cfg.demand.fares.per_km)),
        format!("routing.max_detour_ratio = {}", fmt_real(cfg.max_detour_ratio)),
        format!("fleet.size = {}", cfg.fleet.size),
        format!("fleet.capacity = {}", cfg.fleet.capacity),
        format!("fleet.mileage = {}", fmt_real(cfg.fleet.mileage)),
        format!("fleet.entry_ticks = {}", cfg.fleet.entry_ticks),
        format!("fleet.max_working_minutes = {}", cfg.fleet.max_working_minutes),
        format!("fleet.idle_redispatch = {}", cfg.fleet.idle_redispatch),
        format!("rl.beta = [{}]", beta.join(", ")),
        format!("rl.eta = {}", fmt_real(cfg.rl.eta)),
        format!("rl.k = {}", cfg.rl.k),
        format!("rl.eps_steps = {}", cfg.rl.decay.eps_steps),
        format!("rl.sigma_steps = {}", cfg.rl.decay.sigma_steps),
        format!("rl.gas_price = {}", fmt_real(cfg.rl.gas_price)),
        format!("cpd.enabled = {}", cfg.cpd.enabled),
        format!("cpd.threshold = {}", fmt_real(cfg.cpd.threshold)),
        format!("cpd.window_ticks = {}", cfg.cpd.window_ticks),
    ]);
    if let Some(m) = cfg.cpd.min_segment {
        lines.push(format!("cpd.min_segment = {m}"));
    }
    lines.extend([
        format!("cpd.epsilon = {}", fmt_real(cfg.cpd.epsilon)),
        format!("cpd.min_in_service = {}", fmt_real(cfg.cpd.min_in_service)),
        format!("sim.ticks = {}", cfg.ticks),
        format!("sim.warmup_ticks = {}", cfg.warmup_ticks),
        format!("sim.request_ttl = {}", cfg.request_ttl),
        format!("sim.day_minutes = {}", cfg.day_minutes),
        format!("sim.parallel = {}", cfg.exec == Exec::Parallel),
    ]);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
