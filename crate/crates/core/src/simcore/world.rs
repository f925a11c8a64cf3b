use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpd::{compose_window, detect_change, DetectorSettings};
use crate::citygrid::GridCoord;
use crate::demand::{
    generate_requests, DemandHistory, DemandPattern, DiurnalSchedule, Forecast, Request, RequestId,
    RequestStatus,
};
use crate::error::{Error, Result};
use crate::harness::metrics::{ChangeEvent, MetricsRow};
use crate::matching::potential_assignments;
use crate::qdispatch::{
    best_action, compute_components, q_update, reward, schedule_at, switch_context, CostModel, ModelBank,
    WindowLedger,
};
use crate::routing::{capacity_profile, greedy_insertion, StopKind};

use super::config::SimConfig;
use super::vehicle::{OpenWindow, Rider, Vehicle, VehicleStatus};

const DEMAND_STREAM: u64 = u64::MAX;
const FEATURES: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Sweep conservation, capacity and accounting invariants every tick.
    pub check_invariants: bool,
    /// Fix exploration at its floor.
    pub exploit_only: bool,
    /// Start from previously learned tables instead of zeros.
    pub initial_bank: Option<ModelBank>,
    /// Ticks at which to switch context as if a change had been detected
    /// there, independently of the detector.
    pub forced_changes: Vec<u64>,
}

impl RunOptions {
    pub fn checked() -> Self {
        RunOptions {
            check_invariants: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    generated: u64,
    accepted: u64,
    rejected: u64,
    cells: u64,
    fares: f64,
    rewards: Vec<f64>,
    change: bool,
}

/// Whole-run totals.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub ticks: u64,
    pub generated: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub completed: u64,
    pub accept_rate: f64,
    pub total_profit: f64,
    pub fleet_distance_km: f64,
    pub mean_utilization: f64,
    pub mean_idle_minutes: f64,
    pub change_points: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRow>,
    pub changes: Vec<ChangeEvent>,
    pub violations: Vec<String>,
    pub summary: RunSummary,
    pub bank: ModelBank,
    /// Detector passes skipped because the window could not be fitted.
    pub cpd_skipped: u64,
    /// Per-tick detector inputs (requests, accepted, mean reward, idle
    /// share) from the first detector tick on.
    pub features: Vec<(u64, [f64; 4])>,
}

pub struct World {
    cfg: SimConfig,
    seed: u64,
    tick: u64,
    vehicles: Vec<Vehicle>,
    requests: Vec<Request>,
    pending: Vec<RequestId>,
    completed: u64,
    rejected: u64,
    accepted: u64,
    history: DemandHistory,
    bank: ModelBank,
    patterns: Vec<DemandPattern>,
    schedule: DiurnalSchedule,
    demand_rng: ChaCha8Rng,
    cost: CostModel,
    detector: DetectorSettings,
    cpd_buffer: Vec<[f64; FEATURES]>,
    cpd_ticks: Vec<u64>,
    metrics: Vec<MetricsRow>,
    changes: Vec<ChangeEvent>,
    violations: Vec<String>,
    cells_moved: u64,
    prev_working: Vec<u64>,
    cpd_skipped: u64,
    features: Vec<(u64, [f64; FEATURES])>,
    submitted: Vec<(GridCoord, GridCoord, u32)>,
    opts: RunOptions,
}

impl World {
    pub fn new(cfg: &SimConfig, seed: u64, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let patterns = cfg.patterns()?;
        let schedule = cfg.schedule()?;
        let mut bank = match &opts.initial_bank {
            Some(b) if b.k() == cfg.rl.k => b.clone(),
            Some(b) => {
                return Err(Error::config(
                    "rl.k",
                    format!("loaded tables hold {} contexts but rl.k is {}", b.k(), cfg.rl.k),
                ))
            }
            None => ModelBank::new(cfg.rl.k)?,
        };
        bank.set_last_change(cfg.cpd_start());

        let mut fleet_rng = ChaCha8Rng::seed_from_u64(seed);
        let zones = cfg.grid.zone_count();
        let vehicles: Vec<Vehicle> = (0..cfg.fleet.size)
            .map(|id| {
                let loc = cfg.grid.zone_at(fleet_rng.random_range(0..zones));
                let offset = if cfg.fleet.entry_ticks == 0 {
                    0
                } else {
                    fleet_rng.random_range(0..cfg.fleet.entry_ticks)
                };
                Vehicle::new(id, loc, cfg.fleet.capacity, offset, seed)
            })
            .collect();

        let mut demand_rng = ChaCha8Rng::seed_from_u64(cfg.demand.seed.unwrap_or(seed));
        demand_rng.set_stream(DEMAND_STREAM);

        Ok(World {
            seed,
            tick: 0,
            prev_working: vec![0; vehicles.len()],
            vehicles,
            requests: Vec::new(),
            pending: Vec::new(),
            completed: 0,
            rejected: 0,
            accepted: 0,
            history: DemandHistory::new(zones, cfg.demand.forecast_window),
            bank,
            patterns,
            schedule,
            demand_rng,
            cost: cfg.cost_model(),
            detector: DetectorSettings {
                threshold: cfg.cpd.threshold,
                min_segment: cfg.cpd.min_segment,
                exec: cfg.exec,
            },
            cpd_buffer: Vec::new(),
            cpd_ticks: Vec::new(),
            metrics: Vec::new(),
            changes: Vec::new(),
            violations: Vec::new(),
            cells_moved: 0,
            cpd_skipped: 0,
            features: Vec::new(),
            submitted: Vec::new(),
            cfg: cfg.clone(),
            opts,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn bank(&self) -> &ModelBank {
        &self.bank
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn changes(&self) -> &[ChangeEvent] {
        &self.changes
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn request(&self, id: RequestId) -> Option<&Request> {
        self.requests.get(id as usize)
    }

    pub fn pending(&self) -> &[RequestId] {
        &self.pending
    }

    /// Queue a request to appear at the start of the next step, after the
    /// generated ones. Coordinates are clamped to the grid.
    pub fn submit(&mut self, origin: GridCoord, destination: GridCoord, passengers: u32) {
        let g = &self.cfg.grid;
        let clamp = |c: GridCoord| g.clamp(c.row as i64, c.col as i64);
        self.submitted.push((clamp(origin), clamp(destination), passengers.max(1)));
    }

    /// Requests per zone over the forecast window and projected supply.
    pub fn forecast(&self, horizon: u64, bucket_ticks: u64) -> Forecast {
        Forecast::build(
            &self.history,
            self.cfg.demand.forecast_window,
            &self.vehicles,
            &self.cfg.grid,
            horizon,
            bucket_ticks,
        )
    }

    fn set_status(&mut self, id: RequestId, status: RequestStatus) {
        self.requests[id as usize].status = status;
    }

    /// Score and learn from a finished dispatch window.
    fn close_window(&mut self, idx: usize, tally: &mut Tally) {
        let now = self.tick + 1;
        let v = &mut self.vehicles[idx];
        let Some(mut w) = v.window.take() else { return };
        w.ledger.riders.extend(v.rider_timings(&self.cfg.grid, now));
        let comps = compute_components(&w.ledger, &self.cfg.grid, &self.cost);
        let r = reward(&comps, &self.cfg.rl.weights);
        let next = v.location;
        let (_, sigma) = schedule_at(self.learning_step(), &self.cfg.rl.decay);
        q_update(&mut self.bank, w.zone, w.action, r, next, sigma, self.cfg.rl.eta);
        tally.rewards.push(r);
    }

    fn learning_step(&self) -> u64 {
        self.tick.saturating_sub(self.cfg.warmup_ticks)
    }

    /// Close any open windows, then pick new relocation targets for the
    /// given vehicles. Selection reads one snapshot of the tables and each
    /// vehicle draws from its own stream, so the fan-out is order-free.
    fn dispatch(&mut self, mut idxs: Vec<usize>, tally: &mut Tally) {
        if idxs.is_empty() {
            return;
        }
        idxs.sort_unstable();
        for &i in &idxs {
            self.close_window(i, tally);
        }
        let eps = if self.opts.exploit_only {
            self.cfg.rl.decay.eps_end
        } else {
            schedule_at(self.learning_step(), &self.cfg.rl.decay).0
        };
        let mut chosen = vec![false; self.vehicles.len()];
        for &i in &idxs {
            chosen[i] = true;
        }
        let bank = &self.bank;
        let grid = &self.cfg.grid;
        let tick = self.tick;
        let mut picks: Vec<(usize, &mut Vehicle)> = self
            .vehicles
            .iter_mut()
            .enumerate()
            .filter(|(i, _)| chosen[*i])
            .collect();
        self.cfg.exec.for_each_mut(&mut picks, |(_, v)| {
            let action = best_action(bank, v.location, eps, &mut v.rng);
            let target = action.target(grid, v.location);
            v.window = Some(OpenWindow {
                decision_tick: tick,
                zone: v.location,
                action,
                ledger: WindowLedger {
                    decision_zone: Some(v.location),
                    dispatch_target: Some(target),
                    was_occupied: v.occupied(),
                    is_occupied: v.occupied(),
                    ..Default::default()
                },
            });
            if target == v.location {
                v.relocation = None;
                v.idle_since = tick;
            } else {
                v.relocation = Some(target);
                v.status = VehicleStatus::Relocating;
            }
        });
    }

    fn admit(&mut self, tally: &mut Tally) {
        let t = self.tick;
        let day = self.cfg.day_minutes;
        let mut entered = Vec::new();
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            if t % day != v.entry_offset {
                continue;
            }
            if v.in_service() {
                // still finishing yesterday's route: the new shift starts now
                v.shift_minutes = 0;
                v.retiring = false;
            } else {
                v.enter(t);
                entered.push(i);
            }
        }
        if t >= self.cfg.warmup_ticks {
            self.dispatch(entered, tally);
        }
    }

    fn generate(&mut self, tally: &mut Tally) {
        let t = self.tick;
        let pattern = &self.patterns[self.schedule.active_true_model(t)];
        let mut next_id = self.requests.len() as RequestId;
        let mut fresh = generate_requests(
            t,
            pattern,
            &self.cfg.grid,
            &self.cfg.demand.fares,
            &mut next_id,
            &mut self.demand_rng,
        );
        for (origin, destination, passengers) in self.submitted.drain(..) {
            fresh.push(Request {
                id: next_id,
                origin,
                destination,
                passengers,
                request_tick: t,
                fare: self.cfg.demand.fares.fare(&self.cfg.grid, origin, destination),
                status: RequestStatus::Pending,
            });
            next_id += 1;
        }
        self.history.record(&self.cfg.grid, &fresh);
        tally.generated = fresh.len() as u64;
        self.pending.extend(fresh.iter().map(|r| r.id));
        self.requests.extend(fresh);
    }

    fn match_and_insert(&mut self, tally: &mut Tally) {
        let t = self.tick;
        let pending: Vec<Request> = self.pending.iter().map(|&id| self.requests[id as usize].clone()).collect();
        let candidates: Vec<_> = self.vehicles.iter().map(Vehicle::candidate).collect();
        let assignments = potential_assignments(&pending, &candidates, self.cfg.match_radius);
        for &id in &assignments.rejected {
            self.set_status(id, RequestStatus::Rejected);
            self.rejected += 1;
            tally.rejected += 1;
        }

        let by_id = |id: RequestId| &self.requests[id as usize];
        let jobs: Vec<(usize, Vec<Request>)> = assignments
            .lists
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.requests.is_empty())
            .map(|(slot, l)| (slot, l.requests.iter().map(|&id| by_id(id).clone()).collect()))
            .collect();
        let vehicles = &self.vehicles;
        let ratio = self.cfg.max_detour_ratio;
        let outcomes = self.cfg.exec.map(&jobs, |(slot, reqs)| {
            let v = &vehicles[*slot];
            greedy_insertion(&v.route, v.load(), reqs, ratio)
        });

        let mut matched = vec![false; self.requests.len()];
        for ((slot, _), outcome) in jobs.iter().zip(outcomes) {
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    self.violations.push(format!("tick {t}: vehicle {slot}: {e}"));
                    continue;
                }
            };
            if outcome.matched.is_empty() {
                continue;
            }
            let grid = self.cfg.grid;
            let v = &mut self.vehicles[*slot];
            for &id in &outcome.matched {
                let r = &self.requests[id as usize];
                v.assigned.push(Rider {
                    request: id,
                    passengers: r.passengers,
                    request_tick: r.request_tick,
                    solo_eta: grid.travel_time(v.location, r.origin) + grid.travel_time(r.origin, r.destination),
                    fare: r.fare,
                });
                matched[id as usize] = true;
            }
            v.route = outcome.route;
            v.relocation = None;
            v.status = VehicleStatus::Serving;
            for &id in &outcome.matched {
                self.set_status(id, RequestStatus::Assigned);
            }
            tally.accepted += outcome.matched.len() as u64;
            self.accepted += outcome.matched.len() as u64;
        }

        let ttl = self.cfg.request_ttl;
        let mut still = Vec::with_capacity(self.pending.len());
        for &id in &self.pending {
            let r = &self.requests[id as usize];
            if r.status != RequestStatus::Pending || matched[id as usize] {
                continue;
            }
            if t + 1 - r.request_tick >= ttl {
                still.push((id, true));
            } else {
                still.push((id, false));
            }
        }
        self.pending.clear();
        for (id, expire) in still {
            if expire {
                self.set_status(id, RequestStatus::Rejected);
                self.rejected += 1;
                tally.rejected += 1;
            } else {
                self.pending.push(id);
            }
        }
    }

    fn move_fleet(&mut self, tally: &mut Tally) {
        let t = self.tick;
        let grid = self.cfg.grid;
        for i in 0..self.vehicles.len() {
            let report = self.vehicles[i].advance(&grid, t);
            tally.cells += report.cells;
            for &id in &report.picked_up {
                self.set_status(id, RequestStatus::Onboard);
            }
            for rider in &report.dropped_off {
                self.set_status(rider.request, RequestStatus::Completed);
                self.completed += 1;
                tally.fares += rider.fare;
            }
            let v = &mut self.vehicles[i];
            if v.in_service() {
                v.refresh_status(t + 1);
                v.working_minutes += 1;
                if !v.retiring {
                    v.shift_minutes += 1;
                }
                if v.status == VehicleStatus::Idle {
                    v.idle_minutes += 1;
                }
            }
            v.occupied_prev = v.occupied();
        }
        self.cells_moved += tally.cells;
    }

    fn learn_from_served(&mut self, tally: &mut Tally) {
        for i in 0..self.vehicles.len() {
            let v = &self.vehicles[i];
            let done = v.status == VehicleStatus::Idle
                && v.window.as_ref().is_some_and(|w| w.ledger.picked_up > 0);
            if done {
                self.close_window(i, tally);
            }
        }
    }

    fn redispatch_idle(&mut self, tally: &mut Tally) {
        if self.tick < self.cfg.warmup_ticks {
            return;
        }
        let t = self.tick;
        let limit = self.cfg.fleet.idle_redispatch;
        let idle: Vec<usize> = self
            .vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| {
                v.status == VehicleStatus::Idle && !v.retiring && t.saturating_sub(v.idle_since) > limit
            })
            .map(|(i, _)| i)
            .collect();
        self.dispatch(idle, tally);
    }

    fn features(&self, tally: &Tally) -> [f64; FEATURES] {
        let in_service = self.vehicles.iter().filter(|v| v.in_service()).count();
        let idle = self
            .vehicles
            .iter()
            .filter(|v| v.status == VehicleStatus::Idle)
            .count();
        // vehicles without a closing window this tick contribute zero
        let mean_reward = if in_service == 0 {
            0.0
        } else {
            tally.rewards.iter().sum::<f64>() / in_service as f64
        };
        [
            tally.generated as f64,
            tally.accepted as f64,
            mean_reward,
            if in_service == 0 { 0.0 } else { idle as f64 / in_service as f64 },
        ]
    }

    fn detect(&mut self, tally: &mut Tally) {
        let t = self.tick;
        if self.opts.forced_changes.contains(&t) {
            let old = self.bank.context();
            let new = switch_context(&mut self.bank, t);
            self.changes.push(ChangeEvent {
                tick: t,
                old_context: old,
                new_context: new,
                z_score: f64::INFINITY,
            });
            self.cpd_buffer.clear();
            self.cpd_ticks.clear();
            tally.change = true;
        }
        let start = self.cfg.cpd_start();
        if !self.cfg.cpd.enabled || t < start {
            return;
        }
        // shift changeovers are not demand changes
        let in_service = self.vehicles.iter().filter(|v| v.in_service()).count();
        if in_service == 0 || (in_service as f64) < self.cfg.cpd.min_in_service * self.vehicles.len() as f64 {
            return;
        }
        let f = self.features(tally);
        self.features.push((t, f));
        self.cpd_buffer.push(f);
        self.cpd_ticks.push(t);
        if !(t + 1 - start).is_multiple_of(self.cfg.cpd.window_ticks) {
            return;
        }
        let m = self.detector.min_segment_for(FEATURES);
        if self.cpd_buffer.len() < 2 * m {
            return;
        }
        let report = compose_window(&self.cpd_buffer, self.cfg.cpd.epsilon)
            .and_then(|samples| detect_change(&samples, &self.detector));
        let report = match report {
            Ok(r) => r,
            Err(_) => {
                self.cpd_skipped += 1;
                return;
            }
        };
        if !report.detected {
            return;
        }
        let change_tick = self.cpd_ticks[report.change_index];
        let old = self.bank.context();
        let new = switch_context(&mut self.bank, change_tick);
        self.changes.push(ChangeEvent {
            tick: change_tick,
            old_context: old,
            new_context: new,
            z_score: report.score,
        });
        self.cpd_buffer.drain(..report.change_index);
        self.cpd_ticks.drain(..report.change_index);
        tally.change = true;
    }

    fn retire(&mut self, tally: &mut Tally) {
        let cap = self.cfg.fleet.max_working_minutes;
        for i in 0..self.vehicles.len() {
            let v = &mut self.vehicles[i];
            if !v.in_service() {
                continue;
            }
            if v.shift_minutes >= cap && !v.retiring {
                v.retiring = true;
                v.relocation = None;
            }
            if v.retiring && v.route.is_empty() {
                self.close_window(i, tally);
                self.vehicles[i].go_off_duty();
            }
        }
    }

    fn record(&mut self, tally: &Tally) {
        let in_service = self.vehicles.iter().filter(|v| v.in_service()).count();
        let occupied = self.vehicles.iter().filter(|v| v.occupied()).count() as u32;
        let entered: Vec<&Vehicle> = self.vehicles.iter().filter(|v| v.entered_at.is_some()).collect();
        let mean_idle = if entered.is_empty() {
            0.0
        } else {
            entered.iter().map(|v| v.idle_minutes as f64).sum::<f64>() / entered.len() as f64
        };
        let km = tally.cells as f64 * self.cfg.grid.cell_length;
        self.metrics.push(MetricsRow {
            tick: self.tick,
            requests_generated: tally.generated,
            requests_accepted: tally.accepted,
            requests_rejected: tally.rejected,
            fleet_distance_km: km,
            occupied_vehicles: occupied,
            utilized_fraction: if in_service == 0 { 0.0 } else { occupied as f64 / in_service as f64 },
            total_profit: self.cost.profit(tally.fares, km),
            mean_idle_minutes: mean_idle,
            active_context: self.bank.context(),
            change_detected: tally.change,
        });
    }

    /// Advance one tick.
    pub fn step(&mut self) {
        let mut tally = Tally::default();
        self.admit(&mut tally);
        self.generate(&mut tally);
        self.match_and_insert(&mut tally);
        self.move_fleet(&mut tally);
        self.learn_from_served(&mut tally);
        self.redispatch_idle(&mut tally);
        self.detect(&mut tally);
        self.retire(&mut tally);
        self.record(&tally);
        if self.opts.check_invariants {
            let found = self.check_invariants();
            self.violations.extend(found);
        }
        self.tick += 1;
    }

    /// Every violated invariant, one message each.
    pub fn check_invariants(&mut self) -> Vec<String> {
        let t = self.tick;
        let mut out = Vec::new();
        let generated = self.requests.len() as u64;
        let assigned: u64 = self.vehicles.iter().map(|v| v.assigned.len() as u64).sum();
        let onboard: u64 = self.vehicles.iter().map(|v| v.onboard.len() as u64).sum();
        let pooled = self.pending.len() as u64 + assigned + onboard + self.completed + self.rejected;
        if pooled != generated {
            out.push(format!("tick {t}: {pooled} requests in pools but {generated} generated"));
        }
        for &id in &self.pending {
            if self.requests[id as usize].status != RequestStatus::Pending {
                out.push(format!("tick {t}: request {id} pooled as pending with another status"));
            }
        }
        let mut cells = 0u64;
        for v in &self.vehicles {
            cells += v.distance_cells;
            for r in &v.assigned {
                if self.requests[r.request as usize].status != RequestStatus::Assigned {
                    out.push(format!("tick {t}: request {} assigned to {} with wrong status", r.request, v.id));
                }
                let stops = v.route.stops.iter().filter(|s| s.request == r.request).count();
                if stops != 2 {
                    out.push(format!("tick {t}: assigned request {} has {stops} stops", r.request));
                }
            }
            for r in &v.onboard {
                if self.requests[r.request as usize].status != RequestStatus::Onboard {
                    out.push(format!("tick {t}: request {} on board {} with wrong status", r.request, v.id));
                }
                let drop = v
                    .route
                    .stops
                    .iter()
                    .any(|s| s.request == r.request && s.kind == StopKind::Dropoff);
                if !drop {
                    out.push(format!("tick {t}: rider {} on vehicle {} has no drop-off", r.request, v.id));
                }
            }
            let used = v.capacity_used();
            if used > v.capacity_max || v.committed() > v.capacity_max {
                out.push(format!("tick {t}: vehicle {} holds {used} of {}", v.id, v.capacity_max));
            }
            match capacity_profile(&v.route, used) {
                Ok(p) if p.iter().any(|&x| x > v.capacity_max) => {
                    out.push(format!("tick {t}: vehicle {} route exceeds capacity", v.id));
                }
                Ok(_) => {}
                Err(e) => out.push(format!("tick {t}: vehicle {}: {e}", v.id)),
            }
            if v.route.anchor != v.location {
                out.push(format!("tick {t}: vehicle {} route anchor drifted", v.id));
            }
        }
        if cells != self.cells_moved {
            out.push(format!("tick {t}: vehicles report {cells} cells, ticks summed {}", self.cells_moved));
        }
        for (v, prev) in self.vehicles.iter().zip(self.prev_working.iter_mut()) {
            if v.working_minutes < *prev {
                out.push(format!("tick {t}: vehicle {} working clock went backwards", v.id));
            }
            *prev = v.working_minutes;
        }
        let summed: u64 = self.metrics.iter().map(|m| m.requests_generated).sum();
        if summed != generated {
            out.push(format!("tick {t}: metrics count {summed} generated, store holds {generated}"));
        }
        if self.accepted + self.rejected > generated {
            out.push(format!("tick {t}: accepted plus rejected exceeds generated"));
        }
        if let Some(m) = self.metrics.last() {
            if m.tick != t || !(0.0..=1.0).contains(&m.utilized_fraction) {
                out.push(format!("tick {t}: malformed metrics row"));
            }
        }
        out
    }

    pub fn summary(&self) -> RunSummary {
        let generated = self.requests.len() as u64;
        let n = self.metrics.len().max(1) as f64;
        RunSummary {
            seed: self.seed,
            ticks: self.tick,
            generated,
            accepted: self.accepted,
            rejected: self.rejected,
            completed: self.completed,
            accept_rate: if generated == 0 { 0.0 } else { self.accepted as f64 / generated as f64 },
            total_profit: self.metrics.iter().map(|m| m.total_profit).sum(),
            fleet_distance_km: self.metrics.iter().map(|m| m.fleet_distance_km).sum(),
            mean_utilization: self.metrics.iter().map(|m| m.utilized_fraction).sum::<f64>() / n,
            mean_idle_minutes: self.metrics.last().map_or(0.0, |m| m.mean_idle_minutes),
            change_points: self.changes.len(),
        }
    }

    pub fn finish(self) -> RunOutput {
        let summary = self.summary();
        RunOutput {
            metrics: self.metrics,
            changes: self.changes,
            violations: self.violations,
            summary,
            bank: self.bank,
            cpd_skipped: self.cpd_skipped,
            features: self.features,
        }
    }
}

/// Execute `cfg.ticks` ticks from a fresh world.
pub fn run(cfg: &SimConfig, seed: u64) -> Result<RunOutput> {
    run_with(cfg, seed, RunOptions::checked())
}

pub fn run_with(cfg: &SimConfig, seed: u64, opts: RunOptions) -> Result<RunOutput> {
    let mut world = World::new(cfg, seed, opts)?;
    for _ in 0..cfg.ticks {
        world.step();
    }
    Ok(world.finish())
}
