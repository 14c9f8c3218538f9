//! Square service cells, their letter+number names and the 3×3 neighborhood.
//!
//! Cell `A0` has its lower-left corner at the projection origin. Letters grow
//! east, numbers grow north. `cell_of` partitions the plane with half-open
//! cells; the placement predicates use closed bounds, so a point on a shared
//! edge satisfies both adjacent cells.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geo::{CartPoint, GeoPoint};

pub const DEFAULT_CELL_SIZE_M: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("point ({x}, {y}) lies outside the grid (negative coordinate)")]
    OutOfGrid { x: f64, y: f64 },
    #[error("cell size must be positive and finite, got {0}")]
    CellSize(f64),
    #[error("malformed cell name {0:?}")]
    BadName(String),
    #[error("cells come from grids with different sizes ({0} m vs {1} m)")]
    SizeMismatch(f64, f64),
}

/// Deployment grid: anchor of cell A0 and the cell edge length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub origin: GeoPoint,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_M
}

impl GridConfig {
    pub fn new(origin: GeoPoint, cell_size_m: f64) -> Result<Self, GridError> {
        let g = Self {
            origin,
            cell_size_m,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        check_size(self.cell_size_m)
    }

    pub fn cell_of(&self, p: CartPoint) -> Result<Cell, GridError> {
        cell_of(p, self.cell_size_m)
    }

    pub fn cell_by_name(&self, name: &CellName) -> Cell {
        Cell::new(name.col, name.row, self.cell_size_m)
    }
}

fn check_size(d: f64) -> Result<(), GridError> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(GridError::CellSize(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub col: u32,
    pub row: u32,
    pub size: f64,
}

impl Cell {
    pub fn new(col: u32, row: u32, size: f64) -> Self {
        Self { col, row, size }
    }

    pub fn x_min(&self) -> f64 {
        f64::from(self.col) * self.size
    }

    pub fn y_min(&self) -> f64 {
        f64::from(self.row) * self.size
    }

    pub fn center(&self) -> CartPoint {
        CartPoint::new(
            self.x_min() + self.size / 2.0,
            self.y_min() + self.size / 2.0,
        )
    }

    pub fn name(&self) -> CellName {
        CellName {
            col: self.col,
            row: self.row,
        }
    }

    pub fn same_index(&self, other: &Cell) -> bool {
        self.col == other.col && self.row == other.row
    }

    /// Closed-bound containment: `x_min <= x <= x_min + d`, same for y.
    pub fn contains_closed(&self, p: CartPoint) -> bool {
        let (x0, y0) = (self.x_min(), self.y_min());
        x0 <= p.x && p.x <= x0 + self.size && y0 <= p.y && p.y <= y0 + self.size
    }

    /// Chebyshev distance 1 in index space.
    pub fn is_neighbor_of(&self, other: &Cell) -> bool {
        let dc = (i64::from(self.col) - i64::from(other.col)).abs();
        let dr = (i64::from(self.row) - i64::from(other.row)).abs();
        dc <= 1 && dr <= 1 && (dc, dr) != (0, 0)
    }

    pub fn neighborhood(&self) -> Neighborhood {
        Neighborhood::of(*self)
    }
}

/// Half-open cell lookup: `[x_min, x_min + d)` on each axis.
pub fn cell_of(p: CartPoint, d: f64) -> Result<Cell, GridError> {
    check_size(d)?;
    if !(p.x >= 0.0 && p.y >= 0.0) || !p.is_finite() {
        return Err(GridError::OutOfGrid { x: p.x, y: p.y });
    }
    let col = (p.x / d).floor();
    let row = (p.y / d).floor();
    if col > f64::from(u32::MAX) || row > f64::from(u32::MAX) {
        return Err(GridError::OutOfGrid { x: p.x, y: p.y });
    }
    Ok(Cell::new(col as u32, row as u32, d))
}

/// Offsets of the eight surrounding cells, row-major from the lower left.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// The eight cells around a center. Positions off the grid edge are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: Cell,
    pub members: [Option<Cell>; 8],
}

impl Neighborhood {
    pub fn of(center: Cell) -> Self {
        let members = NEIGHBOR_OFFSETS.map(|(dx, dy)| {
            let col = i64::from(center.col) + i64::from(dx);
            let row = i64::from(center.row) + i64::from(dy);
            let valid = (0..=i64::from(u32::MAX)).contains(&col)
                && (0..=i64::from(u32::MAX)).contains(&row);
            valid.then(|| Cell::new(col as u32, row as u32, center.size))
        });
        Self { center, members }
    }

    pub fn contains(&self, c: &Cell) -> bool {
        self.members.iter().flatten().any(|m| m.same_index(c))
    }

    pub fn present(&self) -> impl Iterator<Item = &Cell> {
        self.members.iter().flatten()
    }
}

/// Intersection point inside the user's cell (closed bounds).
pub fn intra(i: CartPoint, user_cell: &Cell) -> bool {
    user_cell.contains_closed(i)
}

/// Sensor in one of the eight neighbors and intersection inside the user's cell.
pub fn inter(i: CartPoint, user_cell: &Cell, sensor_cell: &Cell) -> bool {
    user_cell.neighborhood().contains(sensor_cell) && user_cell.contains_closed(i)
}

/// Sensor position inside the user's cell (closed bounds).
pub fn coexist(sensor_pos: CartPoint, user_cell: &Cell) -> bool {
    user_cell.contains_closed(sensor_pos)
}

/// Letter+number cell label, e.g. `B3` or `AA12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellName {
    pub col: u32,
    pub row: u32,
}

impl CellName {
    pub fn new(col: u32, row: u32) -> Self {
        Self { col, row }
    }

    pub fn parse(s: &str) -> Result<Self, GridError> {
        s.parse()
    }

    pub fn to_cell(self, size: f64) -> Cell {
        Cell::new(self.col, self.row, size)
    }

    /// Neighborhood test on indices only (no cell size needed).
    pub fn within_3x3(&self, other: &CellName) -> bool {
        let dc = (i64::from(self.col) - i64::from(other.col)).abs();
        let dr = (i64::from(self.row) - i64::from(other.row)).abs();
        dc <= 1 && dr <= 1
    }
}

/// Spreadsheet-style bijective base-26: 0 → A, 25 → Z, 26 → AA.
fn col_letters(col: u32) -> String {
    let mut buf = Vec::new();
    let mut n = u64::from(col) + 1;
    while n > 0 {
        let rem = ((n - 1) % 26) as u8;
        buf.push(b'A' + rem);
        n = (n - 1) / 26;
    }
    buf.reverse();
    String::from_utf8(buf).expect("ascii")
}

fn letters_col(letters: &str) -> Option<u32> {
    let mut n: u64 = 0;
    for b in letters.bytes() {
        let v = u64::from(b.to_ascii_uppercase().checked_sub(b'A')?) + 1;
        if v > 26 {
            return None;
        }
        n = n.checked_mul(26)?.checked_add(v)?;
    }
    u32::try_from(n.checked_sub(1)?).ok()
}

impl fmt::Display for CellName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", col_letters(self.col), self.row)
    }
}

impl FromStr for CellName {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GridError::BadName(s.to_string());
        let split = s.find(|c: char| !c.is_ascii_alphabetic()).ok_or_else(bad)?;
        let (letters, digits) = s.split_at(split);
        if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let col = letters_col(letters).ok_or_else(bad)?;
        let row = digits.parse::<u32>().map_err(|_| bad())?;
        Ok(Self { col, row })
    }
}

impl Serialize for CellName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const D: f64 = 1000.0;

    fn cell(name: &str) -> Cell {
        CellName::parse(name).unwrap().to_cell(D)
    }

    #[test]
    fn cell_lookup_examples() {
        assert_eq!(cell_of(CartPoint::new(0.0, 0.0), D).unwrap().name().to_string(), "A0");
        assert_eq!(cell_of(CartPoint::new(1500.0, 3200.0), D).unwrap().name().to_string(), "B3");
        // shared edge belongs to the higher index
        assert_eq!(cell_of(CartPoint::new(1000.0, 0.0), D).unwrap().name().to_string(), "B0");
        assert!(matches!(
            cell_of(CartPoint::new(-0.1, 5.0), D),
            Err(GridError::OutOfGrid { .. })
        ));
        assert!(matches!(cell_of(CartPoint::new(1.0, 1.0), 0.0), Err(GridError::CellSize(_))));
    }

    #[test]
    fn cell_bounds_follow_indices() {
        let c = cell("G17");
        assert_eq!((c.col, c.row), (6, 17));
        assert_eq!(c.x_min(), 6000.0);
        assert_eq!(c.y_min(), 17000.0);
    }

    #[test]
    fn names() {
        assert_eq!(CellName::new(6, 17).to_string(), "G17");
        assert_eq!(CellName::new(0, 0).to_string(), "A0");
        assert_eq!(CellName::new(25, 1).to_string(), "Z1");
        assert_eq!(CellName::new(26, 2).to_string(), "AA2");
        assert_eq!(CellName::parse("AA2").unwrap(), CellName::new(26, 2));
        assert_eq!(CellName::parse("b3").unwrap(), CellName::new(1, 3));
        for bad in ["", "3B", "B", "17", "B-3", "B3x", "Ä1"] {
            assert!(CellName::parse(bad).is_err(), "{bad:?} should not parse");
        }
    }

    /// Independent base-26 decoder: count up through labels by incrementing
    /// like an odometer and compare with the encoder.
    #[test]
    fn exhaustive_column_labels() {
        let mut label = vec![b'A'];
        for col in 0..=1000u32 {
            let s = String::from_utf8(label.clone()).unwrap();
            assert_eq!(CellName::new(col, 0).to_string(), format!("{s}0"));
            assert_eq!(CellName::parse(&format!("{s}7")).unwrap(), CellName::new(col, 7));
            // increment
            let mut i = label.len();
            loop {
                if i == 0 {
                    label.insert(0, b'A');
                    break;
                }
                i -= 1;
                if label[i] == b'Z' {
                    label[i] = b'A';
                } else {
                    label[i] += 1;
                    break;
                }
            }
        }
    }

    #[test]
    fn intra_uses_closed_bounds() {
        let a0 = cell("A0");
        assert!(intra(CartPoint::new(500.0, 500.0), &a0));
        assert!(intra(CartPoint::new(1000.0, 500.0), &a0));
        assert!(!intra(CartPoint::new(1500.0, 500.0), &a0));
    }

    #[test]
    fn inter_requires_neighbor_sensor_and_crossing_in_user_cell() {
        let a0 = cell("A0");
        assert!(inter(CartPoint::new(400.0, 900.0), &a0, &cell("B1")));
        assert!(!inter(CartPoint::new(400.0, 900.0), &a0, &cell("C2")));
        assert!(!inter(CartPoint::new(1700.0, 200.0), &a0, &cell("B0")));
        // the user's own cell is not part of G
        assert!(!inter(CartPoint::new(400.0, 900.0), &a0, &a0));
    }

    #[test]
    fn coexist_examples() {
        let a0 = cell("A0");
        assert!(coexist(CartPoint::new(200.0, 700.0), &a0));
        assert!(!coexist(CartPoint::new(1200.0, 700.0), &a0));
        assert!(coexist(CartPoint::new(1000.0, 500.0), &a0));
    }

    #[test]
    fn neighborhood_at_grid_corner_is_clipped() {
        let n = cell("A0").neighborhood();
        assert_eq!(n.members.len(), 8);
        assert_eq!(n.present().count(), 3);
        let n = cell("C5").neighborhood();
        assert_eq!(n.present().count(), 8);
        let mut offsets: Vec<_> = n
            .present()
            .map(|m| (m.col as i64 - 2, m.row as i64 - 5))
            .collect();
        offsets.sort();
        offsets.dedup();
        assert_eq!(offsets.len(), 8);
        assert!(!offsets.contains(&(0, 0)));
    }

    proptest! {
        #[test]
        fn every_point_lands_in_exactly_one_cell(x in 0.0..50_000.0f64, y in 0.0..50_000.0f64) {
            let c = cell_of(CartPoint::new(x, y), D).unwrap();
            prop_assert!(c.x_min() <= x && x < c.x_min() + D);
            prop_assert!(c.y_min() <= y && y < c.y_min() + D);
        }

        #[test]
        fn names_round_trip(col in 0u32..10_000, row in 0u32..10_000) {
            let n = CellName::new(col, row);
            prop_assert_eq!(CellName::parse(&n.to_string()).unwrap(), n);
        }

        #[test]
        fn neighborhood_is_symmetric(c1 in 1u32..500, r1 in 1u32..500, dc in -2i32..=2, dr in -2i32..=2) {
            let a = Cell::new(c1, r1, D);
            let b = Cell::new((c1 as i32 + dc) as u32, (r1 as i32 + dr) as u32, D);
            prop_assert_eq!(a.neighborhood().contains(&b), b.neighborhood().contains(&a));
            prop_assert_eq!(a.neighborhood().contains(&b), a.is_neighbor_of(&b));
        }
    }
}
