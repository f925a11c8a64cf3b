//! Rectangular zone grid with a Manhattan travel metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCoord {
    pub row: u32,
    pub col: u32,
}

impl GridCoord {
    pub const fn new(row: u32, col: u32) -> Self {
        GridCoord { row, col }
    }
}

impl std::fmt::Display for GridCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Number of cell steps between two zones.
pub fn manhattan_cells(a: GridCoord, b: GridCoord) -> u32 {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

/// Grid geometry plus travel pacing. Travel is distance-proportional, with
/// no congestion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelModel {
    pub grid_rows: u32,
    pub grid_cols: u32,
    /// km per cell step.
    pub cell_length: f64,
    /// minutes per cell step.
    pub minutes_per_cell: f64,
}

impl Default for TravelModel {
    fn default() -> Self {
        TravelModel {
            grid_rows: 20,
            grid_cols: 20,
            cell_length: 0.8,
            minutes_per_cell: 1.0,
        }
    }
}

impl TravelModel {
    pub fn new(grid_rows: u32, grid_cols: u32, cell_length: f64, minutes_per_cell: f64) -> Result<Self> {
        let m = TravelModel {
            grid_rows,
            grid_cols,
            cell_length,
            minutes_per_cell,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 {
            return Err(Error::config("grid.rows", "must be positive"));
        }
        if self.grid_cols == 0 {
            return Err(Error::config("grid.cols", "must be positive"));
        }
        if !(self.cell_length > 0.0 && self.cell_length.is_finite()) {
            return Err(Error::config("grid.cell_length_km", "must be positive and finite"));
        }
        if !(self.minutes_per_cell > 0.0 && self.minutes_per_cell.is_finite()) {
            return Err(Error::config("grid.minutes_per_cell", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn zone_count(&self) -> usize {
        self.grid_rows as usize * self.grid_cols as usize
    }

    pub fn contains(&self, c: GridCoord) -> bool {
        c.row < self.grid_rows && c.col < self.grid_cols
    }

    /// Row-major zone index.
    pub fn zone_index(&self, c: GridCoord) -> usize {
        c.row as usize * self.grid_cols as usize + c.col as usize
    }

    pub fn zone_at(&self, index: usize) -> GridCoord {
        let cols = self.grid_cols as usize;
        GridCoord::new((index / cols) as u32, (index % cols) as u32)
    }

    /// Clamp a signed position onto the grid.
    pub fn clamp(&self, row: i64, col: i64) -> GridCoord {
        GridCoord::new(
            row.clamp(0, self.grid_rows as i64 - 1) as u32,
            col.clamp(0, self.grid_cols as i64 - 1) as u32,
        )
    }

    pub fn travel_time(&self, a: GridCoord, b: GridCoord) -> f64 {
        manhattan_cells(a, b) as f64 * self.minutes_per_cell
    }

    pub fn distance(&self, a: GridCoord, b: GridCoord) -> f64 {
        manhattan_cells(a, b) as f64 * self.cell_length
    }

    /// Sum of consecutive leg distances. A single stop has weight zero.
    pub fn path_weight(&self, stops: &[GridCoord]) -> f64 {
        self.cell_length * path_cells(stops) as f64
    }

    /// All zones within `radius_cells` of `center`, in row-major order.
    pub fn zones_within_radius(&self, center: GridCoord, radius_cells: u32) -> Vec<GridCoord> {
        let r = radius_cells as i64;
        let r0 = (center.row as i64 - r).max(0);
        let r1 = (center.row as i64 + r).min(self.grid_rows as i64 - 1);
        let mut out = Vec::new();
        for row in r0..=r1 {
            let rem = r - (row - center.row as i64).abs();
            let c0 = (center.col as i64 - rem).max(0);
            let c1 = (center.col as i64 + rem).min(self.grid_cols as i64 - 1);
            for col in c0..=c1 {
                out.push(GridCoord::new(row as u32, col as u32));
            }
        }
        out
    }

    /// Next cell on the deterministic row-first Manhattan path toward `to`.
    pub fn step_toward(&self, from: GridCoord, to: GridCoord) -> GridCoord {
        use std::cmp::Ordering::*;
        match from.row.cmp(&to.row) {
            Less => GridCoord::new(from.row + 1, from.col),
            Greater => GridCoord::new(from.row - 1, from.col),
            Equal => match from.col.cmp(&to.col) {
                Less => GridCoord::new(from.row, from.col + 1),
                Greater => GridCoord::new(from.row, from.col - 1),
                Equal => from,
            },
        }
    }
}

/// Integer path length in cells. Kept exact so insertion costs compare
/// without rounding noise.
pub fn path_cells(stops: &[GridCoord]) -> u64 {
    stops
        .windows(2)
        .map(|w| manhattan_cells(w[0], w[1]) as u64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(r: u32, k: u32) -> GridCoord {
        GridCoord::new(r, k)
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan_cells(c(0, 0), c(0, 0)), 0);
        assert_eq!(manhattan_cells(c(1, 2), c(4, 2)), 3);
        assert_eq!(manhattan_cells(c(0, 0), c(3, 4)), 7);
    }

    #[test]
    fn travel_time_examples() {
        let m = TravelModel::new(10, 10, 1.0, 2.0).unwrap();
        assert_eq!(m.travel_time(c(4, 4), c(4, 4)), 0.0);
        assert_eq!(m.travel_time(c(0, 0), c(0, 3)), 6.0);
        let m = TravelModel::new(10, 10, 1.0, 1.5).unwrap();
        assert_eq!(m.travel_time(c(0, 0), c(3, 4)), 10.5);
    }

    #[test]
    fn path_weight_examples() {
        let m = TravelModel::new(10, 10, 1.0, 1.0).unwrap();
        assert_eq!(m.path_weight(&[c(0, 0)]), 0.0);
        assert_eq!(m.path_weight(&[c(0, 0), c(0, 3), c(2, 3)]), 5.0);
        // interior permutation changes the weight
        assert_eq!(m.path_weight(&[c(0, 0), c(2, 3), c(0, 3)]), 7.0);
    }

    #[test]
    fn radius_examples() {
        let m = TravelModel::new(10, 10, 1.0, 1.0).unwrap();
        assert_eq!(m.zones_within_radius(c(5, 5), 0), vec![c(5, 5)]);
        assert_eq!(
            m.zones_within_radius(c(5, 5), 1),
            vec![c(4, 5), c(5, 4), c(5, 5), c(5, 6), c(6, 5)]
        );
        assert_eq!(m.zones_within_radius(c(0, 0), 1), vec![c(0, 0), c(0, 1), c(1, 0)]);
    }

    #[test]
    fn radius_matches_brute_force() {
        let m = TravelModel::new(7, 9, 1.0, 1.0).unwrap();
        for idx in 0..m.zone_count() {
            let center = m.zone_at(idx);
            for r in 0..6 {
                let brute: Vec<_> = (0..m.zone_count())
                    .map(|i| m.zone_at(i))
                    .filter(|z| manhattan_cells(*z, center) <= r)
                    .collect();
                assert_eq!(m.zones_within_radius(center, r), brute);
            }
        }
    }

    #[test]
    fn triangle_inequality_exhaustive() {
        let m = TravelModel::new(4, 4, 1.0, 1.0).unwrap();
        let zones: Vec<_> = (0..m.zone_count()).map(|i| m.zone_at(i)).collect();
        for &a in &zones {
            for &b in &zones {
                for &k in &zones {
                    assert!(manhattan_cells(a, b) <= manhattan_cells(a, k) + manhattan_cells(k, b));
                }
            }
        }
    }

    #[test]
    fn step_toward_reaches_target() {
        let m = TravelModel::default();
        let mut p = c(0, 0);
        let t = c(5, 7);
        let mut steps = 0;
        while p != t {
            p = m.step_toward(p, t);
            steps += 1;
        }
        assert_eq!(steps, manhattan_cells(c(0, 0), t));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(TravelModel::new(0, 5, 1.0, 1.0).is_err());
        assert!(TravelModel::new(5, 5, 0.0, 1.0).is_err());
        assert!(TravelModel::new(5, 5, 1.0, -1.0).is_err());
    }

    fn coord() -> impl Strategy<Value = GridCoord> {
        (0u32..30, 0u32..30).prop_map(|(r, k)| GridCoord::new(r, k))
    }

    proptest! {
        #[test]
        fn travel_time_symmetric(a in coord(), b in coord()) {
            let m = TravelModel::new(30, 30, 0.8, 1.5).unwrap();
            prop_assert_eq!(m.travel_time(a, b), m.travel_time(b, a));
        }

        #[test]
        fn path_weight_is_pairwise_sum_and_reversible(stops in prop::collection::vec(coord(), 1..10)) {
            let m = TravelModel::new(30, 30, 1.0, 1.0).unwrap();
            let mut oracle = 0.0;
            for i in 1..stops.len() {
                let a = stops[i - 1];
                let b = stops[i];
                oracle += (a.row as f64 - b.row as f64).abs() + (a.col as f64 - b.col as f64).abs();
            }
            prop_assert_eq!(m.path_weight(&stops), oracle);
            let mut rev = stops.clone();
            rev.reverse();
            prop_assert_eq!(m.path_weight(&rev), m.path_weight(&stops));
        }
    }
}
