//! Tabular adaptive dispatch: rewards, a bank of per-context Q-tables,
//! epsilon-greedy selection, the convex Q update and cyclic context switching.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::citygrid::{GridCoord, TravelModel};
use crate::error::{Error, Result};

/// Largest move along either axis.
pub const MAX_STEP: i32 = 7;
const SIDE: i32 = 2 * MAX_STEP + 1;
pub const ACTION_COUNT: usize = (SIDE * SIDE) as usize;

/// Relocation offset. `dx` moves along columns, `dy` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub dx: i32,
    pub dy: i32,
}

impl Action {
    pub const STAY: Action = Action { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Result<Self> {
        if dx.abs() > MAX_STEP || dy.abs() > MAX_STEP {
            return Err(Error::Domain(format!("action ({dx},{dy}) exceeds ±{MAX_STEP}")));
        }
        Ok(Action { dx, dy })
    }

    /// Index 0 is staying in place; the rest follow row-major order over
    /// (dx, dy) with (0, 0) skipped.
    pub fn index(self) -> usize {
        if self == Action::STAY {
            return 0;
        }
        let raw = ((self.dx + MAX_STEP) * SIDE + (self.dy + MAX_STEP)) as usize;
        let stay_raw = (MAX_STEP * SIDE + MAX_STEP) as usize;
        if raw < stay_raw {
            raw + 1
        } else {
            raw
        }
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < ACTION_COUNT, "action index {i} out of range");
        if i == 0 {
            return Action::STAY;
        }
        let stay_raw = (MAX_STEP * SIDE + MAX_STEP) as usize;
        let raw = if i <= stay_raw { i - 1 } else { i } as i32;
        Action {
            dx: raw / SIDE - MAX_STEP,
            dy: raw % SIDE - MAX_STEP,
        }
    }

    /// Destination zone, clamped to the grid.
    pub fn target(self, model: &TravelModel, from: GridCoord) -> GridCoord {
        model.clamp(
            from.row as i64 + self.dy as i64,
            from.col as i64 + self.dx as i64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub beta: [f64; 5],
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            beta: [10.0, 1.0, 5.0, 12.0, 8.0],
        }
    }
}

impl RewardWeights {
    pub fn new(beta: [f64; 5]) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::config("rl.beta", "weights must be finite and nonnegative"));
        }
        Ok(RewardWeights { beta })
    }

    pub fn scaled(self, lambda: f64) -> Self {
        RewardWeights {
            beta: self.beta.map(|b| b * lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    /// Passengers picked up.
    pub served: u32,
    /// Minutes spent driving to the dispatch target.
    pub dispatch_minutes: f64,
    /// Extra riding minutes summed over on-board riders.
    pub extra_minutes: f64,
    pub profit: f64,
    /// Went from empty to occupied.
    pub activated: bool,
}

pub fn reward(c: &RewardComponents, w: &RewardWeights) -> f64 {
    let [b1, b2, b3, b4, b5] = w.beta;
    b1 * c.served as f64 - b2 * c.dispatch_minutes - b3 * c.extra_minutes + b4 * c.profit
        - b5 * if c.activated { 1.0 } else { 0.0 }
}

/// Timing of one on-board rider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiderTiming {
    /// Minutes since the request was made.
    pub elapsed: f64,
    /// Minutes until the rider's drop-off along the current route.
    pub remaining_eta: f64,
    /// Direct origin-to-destination minutes.
    pub solo_eta: f64,
}

impl RiderTiming {
    pub fn extra(&self) -> f64 {
        (self.elapsed + self.remaining_eta - self.solo_eta).max(0.0)
    }
}

/// Everything a vehicle accumulated over one reward window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowLedger {
    pub picked_up: u32,
    pub decision_zone: Option<GridCoord>,
    pub dispatch_target: Option<GridCoord>,
    pub riders: Vec<RiderTiming>,
    pub fares: f64,
    pub distance_km: f64,
    pub was_occupied: bool,
    pub is_occupied: bool,
}

/// Fuel economy and price used for profit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// km per fuel unit.
    pub mileage: f64,
    /// Money per fuel unit.
    pub gas_price: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            mileage: 10.0,
            gas_price: 3.0,
        }
    }
}

impl CostModel {
    pub fn profit(&self, fares: f64, distance_km: f64) -> f64 {
        fares - distance_km / self.mileage * self.gas_price
    }
}

pub fn compute_components(ledger: &WindowLedger, model: &TravelModel, cost: &CostModel) -> RewardComponents {
    let dispatch_minutes = match (ledger.decision_zone, ledger.dispatch_target) {
        (Some(a), Some(b)) => model.travel_time(a, b),
        _ => 0.0,
    };
    RewardComponents {
        served: ledger.picked_up,
        dispatch_minutes,
        extra_minutes: ledger.riders.iter().map(RiderTiming::extra).sum(),
        profit: cost.profit(ledger.fares, ledger.distance_km),
        activated: !ledger.was_occupied && ledger.is_occupied,
    }
}

/// One learning transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: GridCoord,
    pub action: Action,
    pub reward: f64,
    pub next_state: GridCoord,
}

type Table = BTreeMap<GridCoord, Vec<f64>>;

/// `k` Q-tables and the active context `c ∈ 1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    tables: Vec<Table>,
    context: usize,
    last_change: u64,
}

impl ModelBank {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rl.k", "need at least one model"));
        }
        Ok(ModelBank {
            tables: vec![Table::new(); k],
            context: 1,
            last_change: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.tables.len()
    }

    /// Active context, 1-based.
    pub fn context(&self) -> usize {
        self.context
    }

    pub fn last_change(&self) -> u64 {
        self.last_change
    }

    pub fn set_last_change(&mut self, tick: u64) {
        self.last_change = tick;
    }

    fn table(&self, context: usize) -> &Table {
        &self.tables[context - 1]
    }

    pub fn q_in(&self, context: usize, zone: GridCoord, action: Action) -> f64 {
        self.table(context)
            .get(&zone)
            .map_or(0.0, |row| row[action.index()])
    }

    pub fn q(&self, zone: GridCoord, action: Action) -> f64 {
        self.q_in(self.context, zone, action)
    }

    /// Highest Q in the active table at `zone`, with its action index.
    /// Ties go to the smallest index.
    pub fn argmax(&self, zone: GridCoord) -> (usize, f64) {
        match self.table(self.context).get(&zone) {
            None => (0, 0.0),
            Some(row) => row
                .iter()
                .enumerate()
                .fold((0, row[0]), |best, (i, &v)| if v > best.1 { (i, v) } else { best }),
        }
    }

    pub fn max_q(&self, zone: GridCoord) -> f64 {
        self.argmax(zone).1
    }

    /// Number of tables holding at least one entry.
    pub fn touched_tables(&self) -> usize {
        self.tables.iter().filter(|t| !t.is_empty()).count()
    }

    pub fn entries(&self, context: usize) -> usize {
        self.table(context).len()
    }

    /// Largest |Q| across all tables.
    pub fn max_abs(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.values())
            .flat_map(|row| row.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Write every stored value as `context,row,col,action,value`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(["context", "row", "col", "action", "value"])?;
        for (c, t) in self.tables.iter().enumerate() {
            for (zone, row) in t {
                for (a, v) in row.iter().enumerate() {
                    if *v != 0.0 {
                        w.serialize((c + 1, zone.row, zone.col, a, *v))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, k: usize) -> Result<Self> {
        let mut bank = ModelBank::new(k)?;
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.deserialize() {
            let (c, row, col, a, v): (usize, u32, u32, usize, f64) = rec?;
            if c == 0 || c > k || a >= ACTION_COUNT {
                return Err(Error::Domain(format!("bad Q entry (context {c}, action {a})")));
            }
            bank.tables[c - 1]
                .entry(GridCoord::new(row, col))
                .or_insert_with(|| vec![0.0; ACTION_COUNT])[a] = v;
        }
        Ok(bank)
    }
}

/// Epsilon-greedy choice in the active table; the random draw is always
/// consumed so the stream position does not depend on Q values.
pub fn best_action<R: Rng + ?Sized>(bank: &ModelBank, zone: GridCoord, eps: f64, rng: &mut R) -> Action {
    let u: f64 = rng.random();
    if u < eps {
        Action::from_index(rng.random_range(0..ACTION_COUNT))
    } else {
        Action::from_index(bank.argmax(zone).0)
    }
}

/// `Q(s,a) ← (1−σ)·Q(s,a) + σ·(r + η·max_a' Q(s',a'))` in the active table.
pub fn q_update(
    bank: &mut ModelBank,
    zone: GridCoord,
    action: Action,
    r: f64,
    next_zone: GridCoord,
    sigma: f64,
    eta: f64,
) {
    let target = r + eta * bank.max_q(next_zone);
    let c = bank.context;
    let q = &mut bank.tables[c - 1]
        .entry(zone)
        .or_insert_with(|| vec![0.0; ACTION_COUNT])[action.index()];
    *q = (1.0 - sigma) * *q + sigma * target;
}

/// Move to the next context (k wraps to 1) and record the change tick.
pub fn switch_context(bank: &mut ModelBank, detected_tick: u64) -> usize {
    bank.context = bank.context % bank.k() + 1;
    bank.last_change = detected_tick;
    bank.context
}

/// Linear decay of the exploration rate and the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_steps: u64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub sigma_steps: u64,
}

impl Default for DecaySchedule {
    fn default() -> Self {
        DecaySchedule {
            eps_start: 1.0,
            eps_end: 0.1,
            eps_steps: 1440,
            sigma_start: 0.1,
            sigma_end: 0.001,
            sigma_steps: 10_000,
        }
    }
}

impl DecaySchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64, e: f64| s.is_finite() && e > 0.0 && s >= e;
        if !ok(self.eps_start, self.eps_end) || self.eps_start > 1.0 {
            return Err(Error::config("rl.eps_steps", "epsilon schedule needs 1 ≥ start ≥ end > 0"));
        }
        if !ok(self.sigma_start, self.sigma_end) || self.sigma_start > 1.0 {
            return Err(Error::config("rl.sigma", "learning-rate schedule needs 1 ≥ start ≥ end > 0"));
        }
        Ok(())
    }
}

fn lerp(start: f64, end: f64, step: u64, steps: u64) -> f64 {
    if steps == 0 || step >= steps {
        return end;
    }
    start + (end - start) * (step as f64 / steps as f64)
}

/// (epsilon, sigma) at `step`.
pub fn schedule_at(step: u64, s: &DecaySchedule) -> (f64, f64) {
    (
        lerp(s.eps_start, s.eps_end, step, s.eps_steps),
        lerp(s.sigma_start, s.sigma_end, step, s.sigma_steps),
    )
}
