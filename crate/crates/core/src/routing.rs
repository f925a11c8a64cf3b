//! Insertion-based route planning with capacity checks.
//!
//! Costs are kept as integer cell counts internally so that comparisons
//! between candidate insertions are exact; [`InsertionResult::cost`]
//! converts to kilometres.

use serde::{Deserialize, Serialize};

use crate::citygrid::{manhattan_cells, path_cells, GridCoord, TravelModel};
use crate::demand::{Request, RequestId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stop {
    pub coord: GridCoord,
    pub kind: StopKind,
    pub request: RequestId,
    pub passengers: u32,
}

impl Stop {
    pub fn pickup(r: &Request) -> Self {
        Stop {
            coord: r.origin,
            kind: StopKind::Pickup,
            request: r.id,
            passengers: r.passengers,
        }
    }

    pub fn dropoff(r: &Request) -> Self {
        Stop {
            coord: r.destination,
            kind: StopKind::Dropoff,
            request: r.id,
            passengers: r.passengers,
        }
    }
}

/// Ordered stops starting from the vehicle's position (`anchor`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub anchor: GridCoord,
    pub stops: Vec<Stop>,
}

impl Route {
    pub fn new(anchor: GridCoord) -> Self {
        Route {
            anchor,
            stops: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.stops.len()
    }

    pub fn contains(&self, id: RequestId) -> bool {
        self.stops.iter().any(|s| s.request == id)
    }

    /// Anchor followed by every stop coordinate.
    pub fn points(&self) -> Vec<GridCoord> {
        std::iter::once(self.anchor)
            .chain(self.stops.iter().map(|s| s.coord))
            .collect()
    }

    pub fn cost_cells(&self) -> u64 {
        path_cells(&self.points())
    }

    pub fn cost(&self, model: &TravelModel) -> f64 {
        self.cost_cells() as f64 * model.cell_length
    }

    fn coord_at(&self, i: usize) -> GridCoord {
        self.stops[i].coord
    }

    /// Every request that has both stops in the route has its pickup first,
    /// and no request has duplicate stops of one kind.
    pub fn check_precedence(&self) -> Result<()> {
        for (i, s) in self.stops.iter().enumerate() {
            let dup = self.stops[i + 1..]
                .iter()
                .any(|t| t.request == s.request && t.kind == s.kind);
            if dup {
                return Err(Error::MalformedRoute(format!(
                    "request {} has two {:?} stops",
                    s.request, s.kind
                )));
            }
            if s.kind == StopKind::Dropoff
                && self.stops[i + 1..]
                    .iter()
                    .any(|t| t.request == s.request && t.kind == StopKind::Pickup)
            {
                return Err(Error::MalformedRoute(format!(
                    "drop-off of request {} precedes its pickup",
                    s.request
                )));
            }
        }
        Ok(())
    }
}

/// Occupancy after each stop, starting from `onboard` passengers. A
/// drop-off with no pickup in the route belongs to a rider already on board.
pub fn capacity_profile(route: &Route, onboard: u32) -> Result<Vec<u32>> {
    route.check_precedence()?;
    let mut load = onboard as i64;
    let mut out = Vec::with_capacity(route.len());
    for s in &route.stops {
        match s.kind {
            StopKind::Pickup => load += s.passengers as i64,
            StopKind::Dropoff => load -= s.passengers as i64,
        }
        if load < 0 {
            return Err(Error::MalformedRoute(format!(
                "occupancy goes negative at drop-off of request {}",
                s.request
            )));
        }
        out.push(load as u32);
    }
    Ok(out)
}

/// Range-maximum table over an occupancy sequence: `O(n log n)` build,
/// `O(1)` query.
#[derive(Debug, Clone)]
pub struct CapacityIndex {
    levels: Vec<Vec<u32>>,
}

impl CapacityIndex {
    pub fn new(values: &[u32]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<u32> = (0..=values.len() - 2 * width)
                .map(|i| prev[i].max(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        CapacityIndex { levels }
    }

    /// Occupancy sequence seen while inserting into `route`: the starting
    /// load followed by the load after each existing stop.
    pub fn for_route(route: &Route, onboard: u32) -> Result<Self> {
        let mut ext = Vec::with_capacity(route.len() + 1);
        ext.push(onboard);
        ext.extend(capacity_profile(route, onboard)?);
        Ok(CapacityIndex::new(&ext))
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Maximum over `lo..hi`; `None` for an empty range.
    pub fn max_in(&self, lo: usize, hi: usize) -> Option<u32> {
        if lo >= hi || hi > self.len() {
            return None;
        }
        let span = hi - lo;
        let k = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let row = &self.levels[k];
        Some(row[lo].max(row[hi - (1 << k)]))
    }
}

/// Whether adding `passengers` to every occupancy entry in
/// `pos_pickup..pos_dropoff` stays within `capacity_max`.
pub fn feasible_capacity_fast(
    index: &CapacityIndex,
    pos_pickup: usize,
    pos_dropoff: usize,
    passengers: u32,
    capacity_max: u32,
) -> bool {
    if passengers == 0 {
        return true;
    }
    match index.max_in(pos_pickup, pos_dropoff.min(index.len())) {
        None => passengers <= capacity_max,
        Some(m) => m + passengers <= capacity_max,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertionResult {
    pub route: Route,
    pub cost_cells: u64,
    /// Position of the new pickup in `route.stops`.
    pub pickup_index: usize,
    /// Position of the new drop-off in `route.stops`.
    pub dropoff_index: usize,
}

impl InsertionResult {
    pub fn cost(&self, model: &TravelModel) -> f64 {
        self.cost_cells as f64 * model.cell_length
    }
}

/// Extra cells incurred by placing `p` between `prev` and `next`.
fn detour(prev: GridCoord, p: GridCoord, next: Option<GridCoord>) -> i64 {
    let a = manhattan_cells(prev, p) as i64;
    match next {
        None => a,
        Some(n) => a + manhattan_cells(p, n) as i64 - manhattan_cells(prev, n) as i64,
    }
}

/// Insert `request` into `route` with the two-pass search: the pickup goes
/// where it alone is cheapest, then the drop-off goes at the cheapest
/// later position. Existing stops keep their order; ties take the earliest
/// position.
pub fn route_planning(route: &Route, request: &Request) -> InsertionResult {
    let pickup = Stop::pickup(request);
    let dropoff = Stop::dropoff(request);
    if route.is_empty() {
        let r = Route {
            anchor: route.anchor,
            stops: vec![pickup, dropoff],
        };
        let cost_cells = r.cost_cells();
        return InsertionResult {
            route: r,
            cost_cells,
            pickup_index: 0,
            dropoff_index: 1,
        };
    }

    let base = route.cost_cells() as i64;
    let n = route.len();
    let mut best_x = 0;
    let mut best_cost = i64::MAX;
    for x in 0..=n {
        let prev = if x == 0 { route.anchor } else { route.coord_at(x - 1) };
        let next = route.stops.get(x).map(|s| s.coord);
        let cost = base + detour(prev, request.origin, next);
        if cost < best_cost {
            best_cost = cost;
            best_x = x;
        }
    }
    let mut with_pickup = route.clone();
    with_pickup.stops.insert(best_x, pickup);
    debug_assert_eq!(with_pickup.cost_cells() as i64, best_cost);

    let base = best_cost;
    let mut best_y = best_x + 1;
    let mut best_cost = i64::MAX;
    for y in best_x + 1..=n + 1 {
        let prev = with_pickup.coord_at(y - 1);
        let next = with_pickup.stops.get(y).map(|s| s.coord);
        let cost = base + detour(prev, request.destination, next);
        if cost < best_cost {
            best_cost = cost;
            best_y = y;
        }
    }
    let mut out = with_pickup;
    out.stops.insert(best_y, dropoff);
    debug_assert_eq!(out.cost_cells() as i64, best_cost);
    InsertionResult {
        route: out,
        cost_cells: best_cost as u64,
        pickup_index: best_x,
        dropoff_index: best_y,
    }
}

/// Every request with both stops in the route rides at most
/// `ratio × direct` cells between them.
pub fn within_detour(route: &Route, ratio: f64) -> bool {
    if !ratio.is_finite() {
        return true;
    }
    let pts = route.points();
    for (i, s) in route.stops.iter().enumerate() {
        if s.kind != StopKind::Pickup {
            continue;
        }
        let Some(j) = route.stops[i + 1..]
            .iter()
            .position(|t| t.request == s.request && t.kind == StopKind::Dropoff)
        else {
            continue;
        };
        let j = i + 1 + j;
        // points[] is offset by one for the anchor
        let ride = path_cells(&pts[i + 1..=j + 1]) as f64;
        let direct = manhattan_cells(s.coord, route.stops[j].coord) as f64;
        if ride > ratio * direct {
            return false;
        }
    }
    true
}

/// Seat bookkeeping for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VehicleLoad {
    /// Passengers currently on board.
    pub onboard: u32,
    /// On-board plus assigned-but-not-yet-picked-up passengers.
    pub committed: u32,
    pub capacity_max: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyOutcome {
    pub route: Route,
    pub matched: Vec<RequestId>,
    /// Route cost in cells after each commit.
    pub cost_trace: Vec<u64>,
    pub committed: u32,
}

/// Repeatedly commit the cheapest-to-insert request until the vehicle is
/// full, nothing fits, or the candidates run out.
pub fn greedy_insertion(
    route: &Route,
    load: VehicleLoad,
    candidates: &[Request],
    max_detour_ratio: f64,
) -> Result<GreedyOutcome> {
    let mut order: Vec<&Request> = candidates.iter().collect();
    order.sort_by_key(|r| r.id);
    let mut remaining = order;
    let mut route = route.clone();
    let mut committed = load.committed;
    let mut matched = Vec::new();
    let mut cost_trace = Vec::new();

    while committed < load.capacity_max && !remaining.is_empty() {
        let index = CapacityIndex::for_route(&route, load.onboard)?;
        let mut best: Option<(usize, InsertionResult)> = None;
        for (k, r) in remaining.iter().enumerate() {
            if committed + r.passengers > load.capacity_max {
                continue;
            }
            let plan = route_planning(&route, r);
            if !feasible_capacity_fast(
                &index,
                plan.pickup_index,
                plan.dropoff_index,
                r.passengers,
                load.capacity_max,
            ) {
                continue;
            }
            if !within_detour(&plan.route, max_detour_ratio) {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| plan.cost_cells < b.cost_cells) {
                best = Some((k, plan));
            }
        }
        let Some((k, plan)) = best else { break };
        let r = remaining.remove(k);
        committed += r.passengers;
        matched.push(r.id);
        cost_trace.push(plan.cost_cells);
        route = plan.route;
    }
    Ok(GreedyOutcome {
        route,
        matched,
        cost_trace,
        committed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::RequestStatus;
    use proptest::prelude::*;

    fn c(r: u32, k: u32) -> GridCoord {
        GridCoord::new(r, k)
    }

    fn req(id: RequestId, o: GridCoord, d: GridCoord, pax: u32) -> Request {
        Request {
            id,
            origin: o,
            destination: d,
            passengers: pax,
            request_tick: 0,
            fare: 0.0,
            status: RequestStatus::Pending,
        }
    }

    fn stop(coord: GridCoord, kind: StopKind, request: RequestId, passengers: u32) -> Stop {
        Stop {
            coord,
            kind,
            request,
            passengers,
        }
    }

    #[test]
    fn profile_examples() {
        let empty = Route::new(c(0, 0));
        assert_eq!(capacity_profile(&empty, 2).unwrap(), Vec::<u32>::new());
        let r = Route {
            anchor: c(0, 0),
            stops: vec![
                stop(c(0, 1), StopKind::Pickup, 1, 2),
                stop(c(0, 2), StopKind::Pickup, 2, 1),
                stop(c(0, 3), StopKind::Dropoff, 1, 2),
                stop(c(0, 4), StopKind::Dropoff, 2, 1),
            ],
        };
        assert_eq!(capacity_profile(&r, 0).unwrap(), vec![2, 3, 1, 0]);
    }

    #[test]
    fn onboard_dropoff_and_malformed_routes() {
        let onboard = Route {
            anchor: c(0, 0),
            stops: vec![stop(c(1, 1), StopKind::Dropoff, 9, 2)],
        };
        assert_eq!(capacity_profile(&onboard, 2).unwrap(), vec![0]);
        assert!(matches!(capacity_profile(&onboard, 1), Err(Error::MalformedRoute(_))));
        let bad = Route {
            anchor: c(0, 0),
            stops: vec![
                stop(c(1, 1), StopKind::Dropoff, 3, 1),
                stop(c(2, 2), StopKind::Pickup, 3, 1),
            ],
        };
        assert!(matches!(capacity_profile(&bad, 0), Err(Error::MalformedRoute(_))));
    }

    #[test]
    fn feasibility_examples() {
        let idx = CapacityIndex::new(&[2, 3, 1]);
        assert!(!feasible_capacity_fast(&idx, 1, 2, 2, 4));
        assert!(feasible_capacity_fast(&idx, 2, 3, 2, 4));
        assert!(feasible_capacity_fast(&idx, 0, 3, 0, 4));
        assert!(feasible_capacity_fast(&idx, 0, 3, 1, 4));
        assert!(!feasible_capacity_fast(&idx, 0, 3, 2, 4));
    }

    #[test]
    fn empty_route_insertion() {
        let r = route_planning(&Route::new(c(0, 0)), &req(1, c(0, 2), c(3, 2), 1));
        let m = TravelModel::new(12, 12, 1.0, 1.0).unwrap();
        assert_eq!(r.route.stops.len(), 2);
        assert_eq!(r.route.stops[0].kind, StopKind::Pickup);
        assert_eq!(r.cost(&m), 5.0);
    }

    #[test]
    fn zero_detour_insertion() {
        let base = Route {
            anchor: c(0, 0),
            stops: vec![stop(c(0, 8), StopKind::Dropoff, 1, 1)],
        };
        let r = route_planning(&base, &req(2, c(0, 2), c(0, 5), 1));
        assert_eq!(r.cost_cells, base.cost_cells());
        assert_eq!(r.pickup_index, 0);
        assert_eq!(r.dropoff_index, 1);
    }

    #[test]
    fn greedy_examples() {
        let empty = Route::new(c(5, 5));
        let load = VehicleLoad { onboard: 0, committed: 0, capacity_max: 4 };
        let out = greedy_insertion(&empty, load, &[], f64::INFINITY).unwrap();
        assert_eq!(out.route, empty);
        assert!(out.matched.is_empty());

        let reqs = vec![
            req(1, c(5, 6), c(5, 9), 2),
            req(2, c(6, 5), c(9, 5), 2),
            req(3, c(4, 5), c(1, 5), 2),
        ];
        let out = greedy_insertion(&empty, load, &reqs, f64::INFINITY).unwrap();
        assert_eq!(out.matched.len(), 2);
        let prof = capacity_profile(&out.route, 0).unwrap();
        assert!(prof.iter().all(|&p| p <= 4));
        assert!(out.cost_trace.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn greedy_first_pick_is_cheapest() {
        let empty = Route::new(c(0, 0));
        let load = VehicleLoad { onboard: 0, committed: 0, capacity_max: 4 };
        let reqs = vec![
            req(4, c(3, 3), c(9, 9), 1),
            req(5, c(0, 1), c(0, 2), 1),
            req(6, c(0, 1), c(0, 2), 1),
        ];
        let out = greedy_insertion(&empty, load, &reqs, f64::INFINITY).unwrap();
        // 5 and 6 tie on cost; lower id wins
        assert_eq!(out.matched[0], 5);
        for r in &reqs {
            assert!(out.cost_trace[0] <= route_planning(&empty, r).cost_cells);
        }
    }

    #[test]
    fn detour_filter_blocks_long_rides() {
        let base = Route {
            anchor: c(0, 0),
            stops: vec![
                stop(c(0, 1), StopKind::Pickup, 1, 1),
                stop(c(0, 2), StopKind::Dropoff, 1, 1),
            ],
        };
        let load = VehicleLoad { onboard: 0, committed: 1, capacity_max: 4 };
        let far = req(2, c(0, 1), c(9, 0), 1);
        let open = greedy_insertion(&base, load, std::slice::from_ref(&far), f64::INFINITY).unwrap();
        assert_eq!(open.matched, vec![2]);
        let tight = greedy_insertion(&base, load, &[far], 1.0).unwrap();
        assert!(tight.matched.is_empty() || within_detour(&tight.route, 1.0));
    }

    fn coord() -> impl Strategy<Value = GridCoord> {
        (0u32..12, 0u32..12).prop_map(|(r, k)| GridCoord::new(r, k))
    }

    fn random_route() -> impl Strategy<Value = (Route, u32)> {
        (coord(), prop::collection::vec((coord(), coord(), 1u32..3, any::<bool>()), 0..3)).prop_map(
            |(anchor, reqs)| {
                let mut route = Route::new(anchor);
                let mut onboard = 0;
                for (i, (o, d, pax, on)) in reqs.into_iter().enumerate() {
                    let r = req(i as u64 + 100, o, d, pax);
                    if on {
                        onboard += pax;
                        let pos = route.stops.len();
                        route.stops.insert(pos, Stop::dropoff(&r));
                    } else {
                        route = route_planning(&route, &r).route;
                    }
                }
                (route, onboard)
            },
        )
    }

    proptest! {
        #[test]
        fn planning_preserves_order_and_precedence(
            (route, _) in random_route(), o in coord(), d in coord()
        ) {
            prop_assume!(o != d);
            let out = route_planning(&route, &req(1, o, d, 1));
            // existing stops form a subsequence in their original order
            let kept: Vec<_> = out.route.stops.iter().filter(|s| s.request != 1).copied().collect();
            prop_assert_eq!(kept, route.stops.clone());
            prop_assert!(out.pickup_index < out.dropoff_index);
            prop_assert!(out.route.check_precedence().is_ok());
            prop_assert_eq!(out.cost_cells, out.route.cost_cells());
        }

        #[test]
        fn two_pass_matches_brute_force(
            (route, _) in random_route(), o in coord(), d in coord()
        ) {
            prop_assume!(o != d);
            let r = req(1, o, d, 1);
            let out = route_planning(&route, &r);
            let n = route.len();
            // pass one by full recomputation
            let mut best_x = (u64::MAX, 0);
            for x in 0..=n {
                let mut t = route.clone();
                t.stops.insert(x, Stop::pickup(&r));
                if t.cost_cells() < best_x.0 { best_x = (t.cost_cells(), x); }
            }
            let mut with_p = route.clone();
            with_p.stops.insert(best_x.1, Stop::pickup(&r));
            let mut best_y = (u64::MAX, 0);
            for y in best_x.1 + 1..=n + 1 {
                let mut t = with_p.clone();
                t.stops.insert(y, Stop::dropoff(&r));
                if t.cost_cells() < best_y.0 { best_y = (t.cost_cells(), y); }
            }
            prop_assert_eq!(out.pickup_index, best_x.1);
            prop_assert_eq!(out.dropoff_index, best_y.1);
            prop_assert_eq!(out.cost_cells, best_y.0);
            // joint search over all pairs is a lower bound
            let mut joint = u64::MAX;
            for x in 0..=n {
                for y in x + 1..=n + 1 {
                    let mut t = route.clone();
                    t.stops.insert(x, Stop::pickup(&r));
                    t.stops.insert(y, Stop::dropoff(&r));
                    joint = joint.min(t.cost_cells());
                }
            }
            prop_assert!(joint <= out.cost_cells);
        }

        #[test]
        fn fast_feasibility_matches_scan(values in prop::collection::vec(0u32..5, 1..10), a in 0usize..10, b in 0usize..11, pax in 0u32..4) {
            let lo = a.min(values.len());
            let hi = b.min(values.len()).max(lo);
            let idx = CapacityIndex::new(&values);
            let naive = values[lo..hi].iter().all(|v| v + pax <= 4) && pax <= 4;
            prop_assert_eq!(feasible_capacity_fast(&idx, lo, hi, pax, 4), naive || pax == 0);
        }

        #[test]
        fn greedy_never_overfills(
            (route, onboard) in random_route(),
            reqs in prop::collection::vec((coord(), coord(), 1u32..4), 0..8)
        ) {
            let cands: Vec<Request> = reqs
                .into_iter()
                .enumerate()
                .filter(|(_, (o, d, _))| o != d)
                .map(|(i, (o, d, p))| req(i as u64 + 1, o, d, p))
                .collect();
            let committed = capacity_profile(&route, onboard).unwrap()
                .iter().copied().chain(std::iter::once(onboard)).max().unwrap();
            prop_assume!(committed <= 4);
            let pending: u32 = route.stops.iter().filter(|s| s.kind == StopKind::Pickup).map(|s| s.passengers).sum();
            let load = VehicleLoad { onboard, committed: onboard + pending, capacity_max: 4 };
            prop_assume!(load.committed <= 4);
            let out = greedy_insertion(&route, load, &cands, f64::INFINITY).unwrap();
            let prof = capacity_profile(&out.route, onboard).unwrap();
            prop_assert!(prof.iter().all(|&p| p <= 4));
            prop_assert!(out.cost_trace.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(out.committed <= 4);
        }
    }
}
