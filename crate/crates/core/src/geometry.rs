//! Office floor plan: rooms, walls, gNB sites, line-of-sight queries and the
//! exposure evaluation grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_ROOMS: usize = 8;
pub const NUM_GNBS: usize = 6;

/// Tolerance used by the segment intersection predicates (meters).
const GEOM_EPS: f64 = 1e-12;

/// A point in the floor plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    fn sub(&self, other: &Point) -> (f64, f64) {
        (self.x - other.x, self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle, `min` is the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Point::new(x0, y0),
            max: Point::new(x1, y1),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    fn overlap_area(&self, other: &Rect) -> f64 {
        let w = self.max.x.min(other.max.x) - self.min.x.max(other.min.x);
        let h = self.max.y.min(other.max.y) - self.min.y.max(other.min.y);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    fn edges(&self) -> [Segment; 4] {
        let (a, b) = (self.min, self.max);
        [
            Segment::new(a, Point::new(b.x, a.y)),
            Segment::new(Point::new(b.x, a.y), b),
            Segment::new(Point::new(a.x, b.y), b),
            Segment::new(a, Point::new(a.x, b.y)),
        ]
    }
}

/// A wall, modelled as a closed line segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub u8);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// gNB identifier; `GnbId(1)` is `g1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GnbId(pub u8);

impl GnbId {
    pub fn index(&self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for GnbId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

impl std::str::FromStr for GnbId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('g')
            .and_then(|n| n.parse::<u8>().ok())
            .filter(|n| *n >= 1)
            .map(GnbId)
            .ok_or_else(|| Error::config(format!("invalid gNB id `{s}`")))
    }
}

impl Serialize for GnbId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GnbId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    #[serde(flatten)]
    pub rect: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gnb {
    pub id: GnbId,
    pub pos: Point,
}

/// The simulated office. Construct through [`OfficeLayout::new`], which
/// enforces the room/gNB invariants; rooms and gNBs are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct OfficeLayout {
    bounds: Rect,
    rooms: Vec<Room>,
    walls: Vec<Segment>,
    gnbs: Vec<Gnb>,
}

impl OfficeLayout {
    pub fn new(bounds: Rect, mut rooms: Vec<Room>, walls: Vec<Segment>, mut gnbs: Vec<Gnb>) -> Result<Self> {
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(Error::config("layout bounds must have positive area"));
        }
        rooms.sort_by_key(|r| r.id);
        gnbs.sort_by_key(|g| g.id);

        let room_ids: Vec<u8> = rooms.iter().map(|r| r.id.0).collect();
        if room_ids != (1..=NUM_ROOMS as u8).collect::<Vec<_>>() {
            return Err(Error::config(format!(
                "room ids must be exactly 1..{NUM_ROOMS}, got {room_ids:?}"
            )));
        }
        let gnb_ids: Vec<u8> = gnbs.iter().map(|g| g.id.0).collect();
        if gnb_ids != (1..=NUM_GNBS as u8).collect::<Vec<_>>() {
            return Err(Error::config(format!(
                "gNB ids must be exactly g1..g{NUM_GNBS}, got {gnb_ids:?}"
            )));
        }
        for room in &rooms {
            if !(room.rect.width() > 0.0 && room.rect.height() > 0.0) {
                return Err(Error::config(format!("room {} has no area", room.id)));
            }
            if !bounds.contains_rect(&room.rect) {
                return Err(Error::config(format!("room {} extends outside bounds", room.id)));
            }
        }
        for (i, a) in rooms.iter().enumerate() {
            for b in &rooms[i + 1..] {
                if a.rect.overlap_area(&b.rect) > 0.0 {
                    return Err(Error::config(format!("rooms {} and {} overlap", a.id, b.id)));
                }
            }
        }
        for g in &gnbs {
            if !bounds.contains(&g.pos) {
                return Err(Error::config(format!("{} lies outside bounds", g.id)));
            }
            let hosts = rooms.iter().filter(|r| r.rect.contains(&g.pos)).count();
            if hosts != 1 {
                return Err(Error::config(format!(
                    "{} must lie inside exactly one room (found {hosts})",
                    g.id
                )));
            }
        }
        for w in &walls {
            if !(w.a.x.is_finite() && w.a.y.is_finite() && w.b.x.is_finite() && w.b.y.is_finite()) {
                return Err(Error::config("wall coordinates must be finite"));
            }
        }
        Ok(Self {
            bounds,
            rooms,
            walls,
            gnbs,
        })
    }

    /// Default office: 40 m x 20 m, rooms 1-4 on the upper row and 5-8 on the
    /// lower row, every room boundary a wall, gNBs just either side of y = 10.
    pub fn default_office() -> Self {
        let mut rooms = Vec::with_capacity(NUM_ROOMS);
        for (row, y0) in [(0u8, 10.0), (1u8, 0.0)] {
            for col in 0..4u8 {
                let x0 = 10.0 * col as f64;
                rooms.push(Room {
                    id: RoomId(row * 4 + col + 1),
                    rect: Rect::new(x0, y0, x0 + 10.0, y0 + 10.0),
                });
            }
        }
        let sites = [
            (5.0, 10.5),
            (15.0, 10.5),
            (25.0, 10.5),
            (15.0, 9.5),
            (25.0, 9.5),
            (35.0, 9.5),
        ];
        let gnbs = sites
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Gnb {
                id: GnbId(i as u8 + 1),
                pos: Point::new(x, y),
            })
            .collect();
        let walls = room_boundary_walls(&rooms);
        Self::new(Rect::new(0.0, 0.0, 40.0, 20.0), rooms, walls, gnbs)
            .expect("default office layout is valid")
    }

    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn gnbs(&self) -> &[Gnb] {
        &self.gnbs
    }

    pub fn room(&self, id: RoomId) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    /// Copy of this layout with a different wall set.
    pub fn with_walls(&self, walls: Vec<Segment>) -> Self {
        Self {
            walls,
            ..self.clone()
        }
    }

    /// Line-of-sight between two points inside the bounds.
    pub fn line_of_sight(&self, a: &Point, b: &Point) -> Result<bool> {
        line_of_sight(self, a, b)
    }
}

/// Every room edge as a wall, with shared edges emitted once.
pub fn room_boundary_walls(rooms: &[Room]) -> Vec<Segment> {
    let mut walls: Vec<Segment> = Vec::new();
    for room in rooms {
        for e in room.rect.edges() {
            let dup = walls.iter().any(|w| {
                (w.a == e.a && w.b == e.b) || (w.a == e.b && w.b == e.a)
            });
            if !dup {
                walls.push(e);
            }
        }
    }
    walls
}

fn cross(u: (f64, f64), v: (f64, f64)) -> f64 {
    u.0 * v.1 - u.1 * v.0
}

/// True iff the open segment (p0, p1) touches the closed segment `wall`.
fn open_segment_hits(p0: &Point, p1: &Point, wall: &Segment) -> bool {
    let r = p1.sub(p0);
    let s = wall.b.sub(&wall.a);
    let qp = wall.a.sub(p0);
    let denom = cross(r, s);
    let len_r = r.0.hypot(r.1);
    let len_s = s.0.hypot(s.1);
    let scale = len_r * len_s;

    if denom.abs() > GEOM_EPS * scale.max(1.0) {
        let t = cross(qp, s) / denom;
        let u = cross(qp, r) / denom;
        return t > GEOM_EPS && t < 1.0 - GEOM_EPS && u >= -GEOM_EPS && u <= 1.0 + GEOM_EPS;
    }
    // Parallel: only collinear overlap counts.
    if cross(qp, r).abs() > GEOM_EPS * len_r.max(1.0) * qp.0.hypot(qp.1).max(1.0) {
        return false;
    }
    let rr = r.0 * r.0 + r.1 * r.1;
    let t0 = (qp.0 * r.0 + qp.1 * r.1) / rr;
    let t1 = t0 + (s.0 * r.0 + s.1 * r.1) / rr;
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    hi > GEOM_EPS && lo < 1.0 - GEOM_EPS
}

/// True iff the open segment between `a` and `b` crosses no wall. Grazing a
/// wall endpoint counts as a crossing.
pub fn line_of_sight(layout: &OfficeLayout, a: &Point, b: &Point) -> Result<bool> {
    for p in [a, b] {
        if !layout.bounds.contains(p) {
            return Err(Error::domain(format!(
                "point ({}, {}) lies outside the layout bounds",
                p.x, p.y
            )));
        }
    }
    if a == b {
        return Ok(true);
    }
    // Canonical order makes the predicate exactly symmetric.
    let (p0, p1) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
    Ok(!layout.walls.iter().any(|w| open_segment_hits(p0, p1, w)))
}

/// Regular grid of cell-centre evaluation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Lower-left corner of the gridded area (not itself a grid point).
    pub origin: Point,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `(ix, iy)`; row-major index is `iy * nx + ix`.
    pub fn point(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin.x + 0.5 * self.spacing + ix as f64 * self.spacing,
            self.origin.y + 0.5 * self.spacing + iy as f64 * self.spacing,
        )
    }

    pub fn point_at(&self, index: usize) -> Point {
        self.point(index % self.nx, index / self.nx)
    }

    /// All points in row-major order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| self.point(ix, iy)))
    }
}

fn cell_count(length: f64, spacing: f64) -> Result<usize> {
    let n = (length / spacing).round();
    if n < 1.0 || (n * spacing - length).abs() > 1e-9 * length.max(1.0) {
        return Err(Error::config(format!(
            "grid spacing {spacing} m does not divide extent {length} m"
        )));
    }
    Ok(n as usize)
}

/// Cell-centre grid over `bounds`.
pub fn build_grid(bounds: &Rect, spacing: f64) -> Result<GridSpec> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::config(format!("grid spacing must be positive, got {spacing}")));
    }
    Ok(GridSpec {
        origin: bounds.min,
        spacing,
        nx: cell_count(bounds.width(), spacing)?,
        ny: cell_count(bounds.height(), spacing)?,
    })
}

impl OfficeLayout {
    pub fn build_grid(&self, spacing: f64) -> Result<GridSpec> {
        build_grid(&self.bounds, spacing)
    }
}
