//! Seeded Latin-hypercube user placements.
//!
//! Random numbers come from ChaCha8 (`rand_chacha` 0.3) seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. For each of the 20 coordinates in user
//! order (x then y per user) the generator first shuffles the stratum indices
//! `0..count`, then draws one uniform offset per sample inside its stratum.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{OfficeLayout, Point, Rect, RoomId};
use crate::table;

pub const NUM_USERS: usize = 10;

/// Room of each user slot: one per room in order, then the second occupants
/// of rooms 4 and 8.
pub const USER_ROOMS: [RoomId; NUM_USERS] = [
    RoomId(1),
    RoomId(2),
    RoomId(3),
    RoomId(4),
    RoomId(5),
    RoomId(6),
    RoomId(7),
    RoomId(8),
    RoomId(4),
    RoomId(8),
];

/// Number of scalar inputs describing one scenario.
pub const NUM_COORDS: usize = 2 * NUM_USERS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct User {
    /// 1-based user index.
    pub id: usize,
    pub room: RoomId,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    users: Vec<User>,
}

impl Scenario {
    /// Places users at `positions` (in the fixed user order), checking each
    /// lies inside its room.
    pub fn new(layout: &OfficeLayout, positions: [Point; NUM_USERS]) -> Result<Self> {
        let users = positions
            .iter()
            .enumerate()
            .map(|(i, &pos)| User {
                id: i + 1,
                room: USER_ROOMS[i],
                pos,
            })
            .collect();
        let s = Self { users };
        s.validate(layout)?;
        Ok(s)
    }

    pub fn validate(&self, layout: &OfficeLayout) -> Result<()> {
        if self.users.len() != NUM_USERS {
            return Err(Error::domain(format!("scenario must hold {NUM_USERS} users")));
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.room != USER_ROOMS[i] || u.id != i + 1 {
                return Err(Error::domain(format!("user {} is out of the fixed ordering", u.id)));
            }
            let room = layout
                .room(u.room)
                .ok_or_else(|| Error::domain(format!("unknown room {}", u.room)))?;
            if !room.rect.contains(&u.pos) {
                return Err(Error::domain(format!(
                    "user {} at ({}, {}) lies outside room {}",
                    u.id, u.pos.x, u.pos.y, u.room
                )));
            }
        }
        Ok(())
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn users_in(&self, room: RoomId) -> impl Iterator<Item = &User> {
        self.users.iter().filter(move |u| u.room == room)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Writes the `scenario,user,room,x,y` table (1-based scenario index).
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &str) -> std::io::Result<()> {
        writeln!(w, "{provenance}")?;
        writeln!(w, "scenario,user,room,x,y")?;
        for (s, scenario) in self.scenarios.iter().enumerate() {
            for u in scenario.users() {
                writeln!(w, "{},{},{},{},{}", s + 1, u.id, u.room, u.pos.x, u.pos.y)?;
            }
        }
        w.flush()
    }

    pub fn read_csv(path: &Path, layout: &OfficeLayout, seed: u64) -> Result<Self> {
        let rows = table::read_rows(path, &["scenario", "user", "room", "x", "y"])?;
        if rows.len() % NUM_USERS != 0 {
            return Err(Error::config(format!(
                "{}: row count {} is not a multiple of {NUM_USERS}",
                path.display(),
                rows.len()
            )));
        }
        let mut scenarios = Vec::with_capacity(rows.len() / NUM_USERS);
        for (s, chunk) in rows.chunks(NUM_USERS).enumerate() {
            let mut positions = [Point::new(0.0, 0.0); NUM_USERS];
            for (i, row) in chunk.iter().enumerate() {
                let scenario: usize = table::parse(path, &row[0])?;
                let user: usize = table::parse(path, &row[1])?;
                let room: u8 = table::parse(path, &row[2])?;
                if scenario != s + 1 || user != i + 1 || RoomId(room) != USER_ROOMS[i] {
                    return Err(Error::config(format!(
                        "{}: unexpected row order at scenario {scenario} user {user}",
                        path.display()
                    )));
                }
                positions[i] = Point::new(table::parse(path, &row[3])?, table::parse(path, &row[4])?);
            }
            scenarios.push(Scenario::new(layout, positions)?);
        }
        Ok(Self { seed, scenarios })
    }
}

/// Latin hypercube over `[0,1)^dims`: `count` rows of `dims` values.
pub fn latin_hypercube(count: usize, dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dims]; count];
    let n = count as f64;
    let mut strata: Vec<usize> = (0..count).collect();
    for d in 0..dims {
        for (i, s) in strata.iter_mut().enumerate() {
            *s = i;
        }
        strata.shuffle(rng);
        for (row, &k) in out.iter_mut().zip(&strata) {
            let u = (k as f64 + rng.gen::<f64>()) / n;
            // rounding must never push a sample into the next stratum
            let upper = (k + 1) as f64 / n;
            row[d] = if u >= upper { upper.next_down() } else { u };
        }
    }
    out
}

/// Per-coordinate ranges (room extents) in the fixed user order.
pub fn coordinate_ranges(layout: &OfficeLayout) -> Vec<(f64, f64)> {
    USER_ROOMS
        .iter()
        .flat_map(|id| {
            let r: Rect = layout.room(*id).expect("layout has all rooms").rect;
            [(r.min.x, r.max.x), (r.min.y, r.max.y)]
        })
        .collect()
}

pub fn sample_scenarios(layout: &OfficeLayout, count: usize, seed: u64) -> Result<ScenarioSet> {
    if count == 0 {
        return Err(Error::domain("scenario count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = latin_hypercube(count, NUM_COORDS, &mut rng);
    let ranges = coordinate_ranges(layout);
    let scenarios = unit
        .iter()
        .map(|row| {
            let mut positions = [Point::new(0.0, 0.0); NUM_USERS];
            for (u, p) in positions.iter_mut().enumerate() {
                let (x0, x1) = ranges[2 * u];
                let (y0, y1) = ranges[2 * u + 1];
                *p = Point::new(x0 + row[2 * u] * (x1 - x0), y0 + row[2 * u + 1] * (y1 - y0));
            }
            Scenario::new(layout, positions)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioSet { seed, scenarios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strata_of(set: &ScenarioSet, layout: &OfficeLayout) -> Vec<Vec<usize>> {
        let ranges = coordinate_ranges(layout);
        let n = set.len();
        (0..NUM_COORDS)
            .map(|d| {
                let mut s: Vec<usize> = set
                    .scenarios
                    .iter()
                    .map(|sc| {
                        let u = &sc.users()[d / 2];
                        let v = if d % 2 == 0 { u.pos.x } else { u.pos.y };
                        let (lo, hi) = ranges[d];
                        (((v - lo) / (hi - lo)) * n as f64).floor() as usize
                    })
                    .collect();
                s.sort_unstable();
                s
            })
            .collect()
    }

    #[test]
    fn four_samples_hit_every_stratum() {
        let layout = OfficeLayout::default_office();
        let set = sample_scenarios(&layout, 4, 11).unwrap();
        for strata in strata_of(&set, &layout) {
            assert_eq!(strata, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn same_seed_same_set() {
        let layout = OfficeLayout::default_office();
        assert_eq!(
            sample_scenarios(&layout, 50, 3).unwrap(),
            sample_scenarios(&layout, 50, 3).unwrap()
        );
        assert_ne!(
            sample_scenarios(&layout, 50, 3).unwrap(),
            sample_scenarios(&layout, 50, 4).unwrap()
        );
    }

    #[test]
    fn zero_count_rejected() {
        let layout = OfficeLayout::default_office();
        assert!(matches!(sample_scenarios(&layout, 0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn room_occupancy() {
        let layout = OfficeLayout::default_office();
        let set = sample_scenarios(&layout, 5, 1).unwrap();
        for sc in &set.scenarios {
            for room in 1..=8u8 {
                let expected = if room == 4 || room == 8 { 2 } else { 1 };
                assert_eq!(sc.users_in(RoomId(room)).count(), expected);
            }
        }
    }

    #[test]
    fn marginal_means_near_room_midpoints() {
        let layout = OfficeLayout::default_office();
        let set = sample_scenarios(&layout, 1000, 42).unwrap();
        let ranges = coordinate_ranges(&layout);
        for d in 0..NUM_COORDS {
            let mean: f64 = set
                .scenarios
                .iter()
                .map(|sc| {
                    let u = &sc.users()[d / 2];
                    if d % 2 == 0 {
                        u.pos.x
                    } else {
                        u.pos.y
                    }
                })
                .sum::<f64>()
                / 1000.0;
            let (lo, hi) = ranges[d];
            let mid = 0.5 * (lo + hi);
            assert!((mean - mid).abs() <= 0.02 * mid, "dim {d}: {mean} vs {mid}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let layout = OfficeLayout::default_office();
        let set = sample_scenarios(&layout, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        set.write_csv(std::fs::File::create(&path).unwrap(), "# test").unwrap();
        let back = ScenarioSet::read_csv(&path, &layout, 9).unwrap();
        assert_eq!(back, set);
    }

    proptest! {
        #[test]
        fn stratification_holds(seed in any::<u64>(), count in 1usize..60) {
            let layout = OfficeLayout::default_office();
            let set = sample_scenarios(&layout, count, seed).unwrap();
            let expected: Vec<usize> = (0..count).collect();
            for strata in strata_of(&set, &layout) {
                prop_assert_eq!(&strata, &expected);
            }
            for sc in &set.scenarios {
                prop_assert!(sc.validate(&layout).is_ok());
            }
        }
    }
}
