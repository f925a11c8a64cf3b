//! Phase-one potential assignment of pending requests to nearby vehicles.

use crate::citygrid::{manhattan_cells, GridCoord};
use crate::demand::{Request, RequestId};

pub type VehicleId = u32;

/// Per-vehicle cap on potential assignments in one tick.
pub const MAX_ASSIGNMENTS: usize = 50;

/// What matching needs to know about a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub id: VehicleId,
    pub location: GridCoord,
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentList {
    pub vehicle: VehicleId,
    pub requests: Vec<RequestId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignments {
    /// One list per input vehicle, in input order.
    pub lists: Vec<AssignmentList>,
    pub rejected: Vec<RequestId>,
}

impl Assignments {
    pub fn assigned_count(&self) -> usize {
        self.lists.iter().map(|l| l.requests.len()).sum()
    }
}

/// Assign each request (in id order) to the nearest available vehicle within
/// `radius_cells`, falling back to the next nearest when a list is full.
/// Requests with no such vehicle are rejected. Travel time is proportional
/// to cell distance, so ranking by cells equals ranking by ETA.
pub fn potential_assignments(
    requests: &[Request],
    vehicles: &[Candidate],
    radius_cells: u32,
) -> Assignments {
    let mut lists: Vec<AssignmentList> = vehicles
        .iter()
        .map(|v| AssignmentList {
            vehicle: v.id,
            requests: Vec::new(),
        })
        .collect();
    let mut rejected = Vec::new();

    let mut order: Vec<&Request> = requests.iter().collect();
    order.sort_by_key(|r| r.id);

    let mut near: Vec<(u32, VehicleId, usize)> = Vec::new();
    for r in order {
        near.clear();
        near.extend(vehicles.iter().enumerate().filter_map(|(slot, v)| {
            let d = manhattan_cells(v.location, r.origin);
            (v.available && d <= radius_cells).then_some((d, v.id, slot))
        }));
        near.sort_unstable();
        let pick = near
            .iter()
            .find(|&&(_, _, slot)| lists[slot].requests.len() < MAX_ASSIGNMENTS);
        match pick {
            Some(&(_, _, slot)) => lists[slot].requests.push(r.id),
            None => rejected.push(r.id),
        }
    }
    Assignments { lists, rejected }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::RequestStatus;
    use proptest::prelude::*;

    fn req(id: RequestId, o: GridCoord) -> Request {
        Request {
            id,
            origin: o,
            destination: GridCoord::new(0, 0),
            passengers: 1,
            request_tick: 0,
            fare: 0.0,
            status: RequestStatus::Pending,
        }
    }

    fn veh(id: VehicleId, r: u32, c: u32) -> Candidate {
        Candidate {
            id,
            location: GridCoord::new(r, c),
            available: true,
        }
    }

    #[test]
    fn no_vehicles_rejects_all() {
        let reqs = vec![req(1, GridCoord::new(1, 1)), req(2, GridCoord::new(2, 2))];
        let out = potential_assignments(&reqs, &[], 6);
        assert_eq!(out.rejected, vec![1, 2]);
    }

    #[test]
    fn nearer_vehicle_wins() {
        let reqs = vec![req(1, GridCoord::new(5, 5))];
        let out = potential_assignments(&reqs, &[veh(0, 5, 10), veh(1, 5, 7)], 6);
        assert_eq!(out.lists[1].requests, vec![1]);
        assert!(out.lists[0].requests.is_empty());
    }

    #[test]
    fn equal_distance_goes_to_lower_id() {
        let reqs = vec![req(1, GridCoord::new(5, 5))];
        let out = potential_assignments(&reqs, &[veh(7, 5, 7), veh(3, 7, 5)], 6);
        assert_eq!(out.lists[1].requests, vec![1]);
    }

    #[test]
    fn cap_of_fifty() {
        let reqs: Vec<_> = (0..60).map(|i| req(i, GridCoord::new(3, 3))).collect();
        let out = potential_assignments(&reqs, &[veh(0, 3, 3)], 6);
        assert_eq!(out.lists[0].requests.len(), 50);
        assert_eq!(out.rejected.len(), 10);
        assert_eq!(out.rejected, (50..60).collect::<Vec<_>>());
    }

    #[test]
    fn full_vehicle_falls_back() {
        let reqs: Vec<_> = (0..55).map(|i| req(i, GridCoord::new(3, 3))).collect();
        let out = potential_assignments(&reqs, &[veh(0, 3, 3), veh(1, 3, 5)], 6);
        assert_eq!(out.lists[0].requests.len(), 50);
        assert_eq!(out.lists[1].requests.len(), 5);
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn unavailable_and_out_of_radius_are_skipped() {
        let mut busy = veh(0, 0, 0);
        busy.available = false;
        let reqs = vec![req(1, GridCoord::new(0, 0))];
        let out = potential_assignments(&reqs, &[busy, veh(1, 9, 9)], 6);
        assert_eq!(out.rejected, vec![1]);
    }

    fn coord() -> impl Strategy<Value = GridCoord> {
        (0u32..15, 0u32..15).prop_map(|(r, c)| GridCoord::new(r, c))
    }

    proptest! {
        #[test]
        fn partition_and_radius(
            origins in prop::collection::vec(coord(), 0..120),
            vlocs in prop::collection::vec((coord(), any::<bool>()), 0..6),
            radius in 0u32..8,
        ) {
            let reqs: Vec<_> = origins.iter().enumerate().map(|(i, &o)| req(i as u64, o)).collect();
            let vs: Vec<_> = vlocs.iter().enumerate()
                .map(|(i, &(l, a))| Candidate { id: i as u32, location: l, available: a })
                .collect();
            let out = potential_assignments(&reqs, &vs, radius);
            prop_assert_eq!(out.assigned_count() + out.rejected.len(), reqs.len());
            let mut seen = std::collections::HashSet::new();
            for (l, v) in out.lists.iter().zip(&vs) {
                prop_assert!(l.requests.len() <= MAX_ASSIGNMENTS);
                for &id in &l.requests {
                    prop_assert!(seen.insert(id));
                    prop_assert!(v.available);
                    prop_assert!(manhattan_cells(v.location, reqs[id as usize].origin) <= radius);
                }
            }
            for &id in &out.rejected { prop_assert!(seen.insert(id)); }
            prop_assert_eq!(potential_assignments(&reqs, &vs, radius), out);
        }
    }
}
