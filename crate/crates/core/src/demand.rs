//! Synthetic ride demand: hidden diurnal patterns, request generation,
//! and the demand/supply forecast that feeds the agent state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::citygrid::{GridCoord, TravelModel};
use crate::error::{Error, Result};

pub type RequestId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestStatus {
    Pending,
    Assigned,
    Onboard,
    Completed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub origin: GridCoord,
    pub destination: GridCoord,
    pub passengers: u32,
    pub request_tick: u64,
    pub fare: f64,
    pub status: RequestStatus,
}

/// Linear fare: `base + per_km × trip distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FareModel {
    pub base: f64,
    pub per_km: f64,
}

impl Default for FareModel {
    fn default() -> Self {
        FareModel { base: 2.0, per_km: 1.5 }
    }
}

impl FareModel {
    pub fn fare(&self, model: &TravelModel, origin: GridCoord, destination: GridCoord) -> f64 {
        self.base + self.per_km * model.distance(origin, destination)
    }
}

/// Sampling table over `0..n` built from nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
struct Categorical {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Categorical {
    fn new(weights: &[f64]) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return None;
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Zero-mass cells share their predecessor's cumulative value, so
        // they can never be the first entry above `u`.
        let last = weights.iter().rposition(|w| *w > 0.0)?;
        cumulative[last..].iter_mut().for_each(|c| *c = 1.0);
        Some(Categorical { probs, cumulative })
    }

    fn probability(&self, i: usize) -> f64 {
        self.probs[i]
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|c| *c <= u).min(self.cumulative.len() - 1)
    }
}

/// One hidden demand regime.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPattern {
    rates: Vec<f64>,
    destinations: Vec<Categorical>,
    passengers: Categorical,
}

pub const DEFAULT_PASSENGER_MIX: [f64; 4] = [0.70, 0.20, 0.07, 0.03];

impl DemandPattern {
    /// `destination_weights[z]` is a weight vector over zones for trips
    /// starting in zone `z`. The self-zone weight is dropped so origin and
    /// destination always differ; each row is then normalised.
    pub fn new(
        model: &TravelModel,
        rates: Vec<f64>,
        destination_weights: Vec<Vec<f64>>,
        passenger_mix: [f64; 4],
    ) -> Result<Self> {
        let zones = model.zone_count();
        if rates.len() != zones || destination_weights.len() != zones {
            return Err(Error::config("demand.patterns", "rate and destination tables must cover every zone"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::config("demand.patterns", "rates must be finite and nonnegative"));
        }
        let mut destinations = Vec::with_capacity(zones);
        for (z, mut row) in destination_weights.into_iter().enumerate() {
            if row.len() != zones {
                return Err(Error::config("demand.patterns", "destination row has the wrong length"));
            }
            row[z] = 0.0;
            let cat = Categorical::new(&row).ok_or_else(|| {
                Error::config("demand.patterns", format!("zone {z} has no valid destination mass"))
            })?;
            destinations.push(cat);
        }
        let passengers = Categorical::new(&passenger_mix)
            .ok_or_else(|| Error::config("demand.patterns", "invalid passenger mix"))?;
        Ok(DemandPattern {
            rates,
            destinations,
            passengers,
        })
    }

    /// Same rate everywhere, destinations uniform over the other zones.
    pub fn uniform(model: &TravelModel, total_rate: f64) -> Result<Self> {
        let zones = model.zone_count();
        let rates = vec![total_rate / zones as f64; zones];
        let dest = vec![vec![1.0; zones]; zones];
        DemandPattern::new(model, rates, dest, DEFAULT_PASSENGER_MIX)
    }

    /// Origins concentrated around `origin_hub` and destinations around
    /// `destination_hub`, each a Gaussian bump over a uniform floor holding
    /// `background` of the mass.
    pub fn hub_to_hub(
        model: &TravelModel,
        total_rate: f64,
        origin_hub: GridCoord,
        destination_hub: GridCoord,
        spread_cells: f64,
        background: f64,
    ) -> Result<Self> {
        let zones = model.zone_count();
        let bump = |hub: GridCoord| -> Vec<f64> {
            let raw: Vec<f64> = (0..zones)
                .map(|i| {
                    let z = model.zone_at(i);
                    let dr = z.row as f64 - hub.row as f64;
                    let dc = z.col as f64 - hub.col as f64;
                    (-(dr * dr + dc * dc) / (2.0 * spread_cells * spread_cells)).exp()
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.iter()
                .map(|v| (1.0 - background) * v / s + background / zones as f64)
                .collect()
        };
        let origin_w = bump(origin_hub);
        let dest_w = bump(destination_hub);
        let rates = origin_w.iter().map(|w| w * total_rate).collect();
        DemandPattern::new(model, rates, vec![dest_w; zones], DEFAULT_PASSENGER_MIX)
    }

    pub fn rate(&self, zone: usize) -> f64 {
        self.rates[zone]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn destination_probability(&self, from: usize, to: usize) -> f64 {
        self.destinations[from].probability(to)
    }
}

/// Two-regime commuter preset: a morning peak flowing from the north-west
/// hub to the south-east hub, and a reverse evening flow at a quarter of
/// the peak rate.
pub fn two_peak_patterns(model: &TravelModel, peak_rate: f64) -> Result<Vec<DemandPattern>> {
    let nw = GridCoord::new(model.grid_rows / 4, model.grid_cols / 4);
    let se = GridCoord::new(3 * model.grid_rows / 4, 3 * model.grid_cols / 4);
    let spread = (model.grid_rows.min(model.grid_cols) as f64 / 8.0).max(1.0);
    Ok(vec![
        DemandPattern::hub_to_hub(model, peak_rate, nw, se, spread, 0.15)?,
        DemandPattern::hub_to_hub(model, 0.25 * peak_rate, se, nw, spread, 0.15)?,
    ])
}

/// Cyclic sequence of `(duration, pattern)` segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiurnalSchedule {
    segments: Vec<(u64, usize)>,
    cyclic: bool,
}

impl DiurnalSchedule {
    pub fn new(segments: Vec<(u64, usize)>, k_true: usize, cyclic: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::config("demand.schedule", "needs at least one segment"));
        }
        for &(dur, pat) in &segments {
            if dur == 0 {
                return Err(Error::config("demand.schedule", "segment durations must be positive"));
            }
            if pat >= k_true {
                return Err(Error::config(
                    "demand.schedule",
                    format!("pattern index {pat} out of range for k_true = {k_true}"),
                ));
            }
        }
        Ok(DiurnalSchedule { segments, cyclic })
    }

    pub fn segments(&self) -> &[(u64, usize)] {
        &self.segments
    }

    pub fn period(&self) -> u64 {
        self.segments.iter().map(|s| s.0).sum()
    }

    /// Pattern in force at tick `t`.
    pub fn active_true_model(&self, t: u64) -> usize {
        let period = self.period();
        let mut t = if self.cyclic { t % period } else { t.min(period - 1) };
        for &(dur, pat) in &self.segments {
            if t < dur {
                return pat;
            }
            t -= dur;
        }
        unreachable!("t reduced below the period")
    }

    /// Ticks in `1..horizon` at which the active pattern differs from the
    /// previous tick's.
    pub fn change_ticks(&self, horizon: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut t = 0u64;
        let mut prev = self.active_true_model(0);
        'outer: loop {
            for &(dur, pat) in &self.segments {
                if t >= horizon {
                    break 'outer;
                }
                if t > 0 && pat != prev {
                    out.push(t);
                }
                prev = pat;
                t += dur;
            }
            if !self.cyclic {
                break;
            }
        }
        out
    }
}

/// Poisson draw by sequential inversion of the CDF.
pub fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let cap = (10.0 * lambda + 100.0) as u32;
    while u > cdf && k < cap {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

/// Draw this tick's requests from the active pattern. Zones are visited in
/// row-major order and ids are assigned sequentially from `next_id`.
pub fn generate_requests<R: Rng + ?Sized>(
    t: u64,
    pattern: &DemandPattern,
    model: &TravelModel,
    fares: &FareModel,
    next_id: &mut RequestId,
    rng: &mut R,
) -> Vec<Request> {
    let mut out = Vec::new();
    for zone in 0..model.zone_count() {
        let count = poisson_inversion(pattern.rates[zone], rng);
        for _ in 0..count {
            let origin = model.zone_at(zone);
            let destination = model.zone_at(pattern.destinations[zone].sample(rng));
            let passengers = pattern.passengers.sample(rng) as u32 + 1;
            out.push(Request {
                id: *next_id,
                origin,
                destination,
                passengers,
                request_tick: t,
                fare: fares.fare(model, origin, destination),
                status: RequestStatus::Pending,
            });
            *next_id += 1;
        }
    }
    out
}

/// Rolling per-zone request counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandHistory {
    zones: usize,
    capacity: usize,
    ticks: std::collections::VecDeque<Vec<u32>>,
}

impl DemandHistory {
    pub fn new(zones: usize, capacity: usize) -> Self {
        DemandHistory {
            zones,
            capacity: capacity.max(1),
            ticks: Default::default(),
        }
    }

    pub fn record(&mut self, model: &TravelModel, requests: &[Request]) {
        let mut counts = vec![0u32; self.zones];
        for r in requests {
            counts[model.zone_index(r.origin)] += 1;
        }
        self.push(counts);
    }

    pub fn push(&mut self, counts: Vec<u32>) {
        if self.ticks.len() == self.capacity {
            self.ticks.pop_front();
        }
        self.ticks.push_back(counts);
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.ticks.iter()
    }
}

/// Per-zone mean of the last `window` ticks of history.
pub fn forecast_demand<H: AsRef<[u32]>>(history: &[H], window: usize) -> Vec<f64> {
    let Some(first) = history.first() else {
        return Vec::new();
    };
    let zones = first.as_ref().len();
    let take = window.max(1).min(history.len());
    let mut out = vec![0.0; zones];
    for row in &history[history.len() - take..] {
        for (o, &c) in out.iter_mut().zip(row.as_ref()) {
            *o += c as f64;
        }
    }
    out.iter_mut().for_each(|v| *v /= take as f64);
    out
}

/// Anything that can report where it is and which stops it still has to
/// visit.
pub trait SupplyView {
    fn location(&self) -> GridCoord;
    fn remaining_stops(&self) -> Vec<GridCoord>;
    fn in_service(&self) -> bool;
}

/// Vehicles becoming available per zone, bucketed over `0..=horizon` ticks.
/// Returns `buckets × zones` counts, row-major by bucket.
pub fn project_supply<V: SupplyView>(
    vehicles: &[V],
    model: &TravelModel,
    horizon: u64,
    bucket_ticks: u64,
) -> Vec<Vec<u32>> {
    let bucket_ticks = bucket_ticks.max(1);
    let buckets = (horizon / bucket_ticks + 1) as usize;
    let mut out = vec![vec![0u32; model.zone_count()]; buckets];
    for v in vehicles.iter().filter(|v| v.in_service()) {
        let stops = v.remaining_stops();
        let (zone, eta) = match stops.last() {
            None => (v.location(), 0.0),
            Some(&last) => {
                let mut path = Vec::with_capacity(stops.len() + 1);
                path.push(v.location());
                path.extend(stops.iter().copied());
                let cells = crate::citygrid::path_cells(&path);
                (last, cells as f64 * model.minutes_per_cell)
            }
        };
        if eta > horizon as f64 {
            continue;
        }
        let bucket = (eta / bucket_ticks as f64).floor() as usize;
        out[bucket][model.zone_index(zone)] += 1;
    }
    out
}

/// Demand and supply outlook over a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub horizon: u64,
    pub bucket_ticks: u64,
    /// `buckets × zones`, the demand forecast broadcast over buckets.
    pub demand: Vec<Vec<f64>>,
    /// `buckets × zones`.
    pub supply: Vec<Vec<u32>>,
}

impl Forecast {
    pub fn build<V: SupplyView>(
        history: &DemandHistory,
        window: usize,
        vehicles: &[V],
        model: &TravelModel,
        horizon: u64,
        bucket_ticks: u64,
    ) -> Self {
        let rows: Vec<&Vec<u32>> = history.rows().collect();
        let per_zone = if rows.is_empty() {
            vec![0.0; model.zone_count()]
        } else {
            forecast_demand(&rows, window)
        };
        let supply = project_supply(vehicles, model, horizon, bucket_ticks);
        let demand = vec![per_zone; supply.len()];
        Forecast {
            horizon,
            bucket_ticks,
            demand,
            supply,
        }
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.first().map(|r| r.iter().sum()).unwrap_or(0.0)
    }

    pub fn total_supply(&self) -> u32 {
        self.supply.iter().flatten().sum()
    }
}
