use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::citygrid::{GridCoord, TravelModel};
use crate::demand::{RequestId, SupplyView};
use crate::matching::{Candidate, VehicleId};
use crate::qdispatch::{Action, RiderTiming, WindowLedger};
use crate::routing::{Route, StopKind, VehicleLoad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VehicleStatus {
    Idle,
    Relocating,
    Serving,
    OffDuty,
}

/// A rider assigned to or carried by a vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rider {
    pub request: RequestId,
    pub passengers: u32,
    pub request_tick: u64,
    /// Minutes a dedicated trip would have taken from the assignment point.
    pub solo_eta: f64,
    pub fare: f64,
}

/// A dispatch decision awaiting its reward.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenWindow {
    pub decision_tick: u64,
    pub zone: GridCoord,
    pub action: Action,
    pub ledger: WindowLedger,
}

/// What happened to one vehicle during one tick of movement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoveReport {
    pub cells: u64,
    pub picked_up: Vec<RequestId>,
    pub dropped_off: Vec<Rider>,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub location: GridCoord,
    /// Anchored at `location`.
    pub route: Route,
    pub capacity_max: u32,
    pub status: VehicleStatus,
    pub earnings: f64,
    pub distance_cells: u64,
    pub idle_since: u64,
    pub idle_minutes: u64,
    /// Tick offset within each day at which the vehicle starts its shift.
    pub entry_offset: u64,
    pub entered_at: Option<u64>,
    /// Total minutes worked; never decreases.
    pub working_minutes: u64,
    /// Minutes worked in the current shift.
    pub shift_minutes: u64,
    /// Shift cap reached; finishing the current route.
    pub retiring: bool,
    pub occupied_prev: bool,
    pub onboard: Vec<Rider>,
    pub assigned: Vec<Rider>,
    pub relocation: Option<GridCoord>,
    pub window: Option<OpenWindow>,
    pub(crate) rng: ChaCha8Rng,
    budget: f64,
}

impl Vehicle {
    pub fn new(id: VehicleId, location: GridCoord, capacity_max: u32, entry_offset: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64 + 1);
        Vehicle {
            id,
            location,
            route: Route::new(location),
            capacity_max,
            status: VehicleStatus::OffDuty,
            earnings: 0.0,
            distance_cells: 0,
            idle_since: 0,
            idle_minutes: 0,
            entry_offset,
            entered_at: None,
            working_minutes: 0,
            shift_minutes: 0,
            retiring: false,
            occupied_prev: false,
            onboard: Vec::new(),
            assigned: Vec::new(),
            relocation: None,
            window: None,
            rng,
            budget: 0.0,
        }
    }

    pub fn in_service(&self) -> bool {
        self.status != VehicleStatus::OffDuty
    }

    pub fn capacity_used(&self) -> u32 {
        self.onboard.iter().map(|r| r.passengers).sum()
    }

    /// Seats taken by riders on board or on their way.
    pub fn committed(&self) -> u32 {
        self.capacity_used() + self.assigned.iter().map(|r| r.passengers).sum::<u32>()
    }

    pub fn occupied(&self) -> bool {
        !self.onboard.is_empty()
    }

    pub fn available(&self) -> bool {
        self.in_service() && !self.retiring && self.committed() < self.capacity_max
    }

    pub fn candidate(&self) -> Candidate {
        Candidate {
            id: self.id,
            location: self.location,
            available: self.available(),
        }
    }

    pub fn load(&self) -> VehicleLoad {
        VehicleLoad {
            onboard: self.capacity_used(),
            committed: self.committed(),
            capacity_max: self.capacity_max,
        }
    }

    pub(crate) fn enter(&mut self, tick: u64) {
        self.status = VehicleStatus::Idle;
        self.entered_at.get_or_insert(tick);
        self.idle_since = tick;
        self.shift_minutes = 0;
        self.retiring = false;
        self.budget = 0.0;
    }

    pub(crate) fn go_off_duty(&mut self) {
        self.status = VehicleStatus::OffDuty;
        self.relocation = None;
        self.budget = 0.0;
    }

    pub(crate) fn refresh_status(&mut self, tick: u64) {
        if self.status == VehicleStatus::OffDuty {
            return;
        }
        let next = if !self.route.is_empty() {
            VehicleStatus::Serving
        } else if self.relocation.is_some() {
            VehicleStatus::Relocating
        } else {
            VehicleStatus::Idle
        };
        if next == VehicleStatus::Idle && self.status != VehicleStatus::Idle {
            self.idle_since = tick;
        }
        self.status = next;
    }

    /// Time left until each on-board rider's drop-off along the route.
    pub fn rider_timings(&self, model: &TravelModel, now: u64) -> Vec<RiderTiming> {
        let mut out = Vec::with_capacity(self.onboard.len());
        let mut cells = 0u64;
        let mut prev = self.location;
        for s in &self.route.stops {
            cells += crate::citygrid::manhattan_cells(prev, s.coord) as u64;
            prev = s.coord;
            if s.kind == StopKind::Dropoff {
                if let Some(r) = self.onboard.iter().find(|r| r.request == s.request) {
                    out.push(RiderTiming {
                        elapsed: (now - r.request_tick) as f64,
                        remaining_eta: cells as f64 * model.minutes_per_cell,
                        solo_eta: r.solo_eta,
                    });
                }
            }
        }
        out
    }

    fn process_stops_here(&mut self, end_time: u64, report: &mut MoveReport) {
        while let Some(stop) = self.route.stops.first().copied() {
            if stop.coord != self.location {
                break;
            }
            self.route.stops.remove(0);
            match stop.kind {
                StopKind::Pickup => {
                    let k = self
                        .assigned
                        .iter()
                        .position(|r| r.request == stop.request)
                        .expect("pickup stop without an assigned rider");
                    let rider = self.assigned.remove(k);
                    self.onboard.push(rider);
                    report.picked_up.push(rider.request);
                    if let Some(w) = self.window.as_mut() {
                        w.ledger.picked_up += rider.passengers;
                        w.ledger.is_occupied = true;
                    }
                }
                StopKind::Dropoff => {
                    let k = self
                        .onboard
                        .iter()
                        .position(|r| r.request == stop.request)
                        .expect("drop-off stop without an on-board rider");
                    let rider = self.onboard.remove(k);
                    self.earnings += rider.fare;
                    if let Some(w) = self.window.as_mut() {
                        w.ledger.fares += rider.fare;
                        w.ledger.riders.push(RiderTiming {
                            elapsed: (end_time - rider.request_tick) as f64,
                            remaining_eta: 0.0,
                            solo_eta: rider.solo_eta,
                        });
                    }
                    report.dropped_off.push(rider);
                }
            }
        }
    }

    /// Spend one minute of travel along the route, or toward the relocation
    /// target when there is no route. Tick `tick` ends at time `tick + 1`.
    pub(crate) fn advance(&mut self, model: &TravelModel, tick: u64) -> MoveReport {
        let mut report = MoveReport::default();
        if !self.in_service() {
            return report;
        }
        let end_time = tick + 1;
        self.process_stops_here(end_time, &mut report);
        self.budget += 1.0;
        loop {
            let target = match self.route.stops.first() {
                Some(s) => s.coord,
                None => match self.relocation {
                    Some(t) if t != self.location => t,
                    _ => {
                        self.relocation = None;
                        self.budget = 0.0;
                        break;
                    }
                },
            };
            if self.budget + 1e-9 < model.minutes_per_cell {
                break;
            }
            self.budget -= model.minutes_per_cell;
            self.location = model.step_toward(self.location, target);
            report.cells += 1;
            self.process_stops_here(end_time, &mut report);
        }
        if self.relocation == Some(self.location) {
            self.relocation = None;
        }
        self.route.anchor = self.location;
        self.distance_cells += report.cells;
        if let Some(w) = self.window.as_mut() {
            w.ledger.distance_km += report.cells as f64 * model.cell_length;
        }
        report
    }
}

impl SupplyView for Vehicle {
    fn location(&self) -> GridCoord {
        self.location
    }

    fn remaining_stops(&self) -> Vec<GridCoord> {
        self.route.stops.iter().map(|s| s.coord).collect()
    }

    fn in_service(&self) -> bool {
        Vehicle::in_service(self)
    }
}
