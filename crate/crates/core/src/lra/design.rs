use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::ExposureMetrics;
use crate::geometry::OfficeLayout;
use crate::scenario::{coordinate_ranges, Scenario, NUM_COORDS};

/// Exposure statistic a surrogate predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    S95,
    Smean,
}

impl Metric {
    pub fn of(&self, m: &ExposureMetrics) -> f64 {
        match self {
            Metric::S95 => m.s95,
            Metric::Smean => m.smean,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::S95 => "s95",
            Metric::Smean => "smean",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s95" => Ok(Metric::S95),
            "smean" => Ok(Metric::Smean),
            other => Err(Error::config(format!("unknown metric `{other}` (expected s95 or smean)"))),
        }
    }
}

/// Maps `x` from `[lo, hi]` to `[-1, 1]`.
pub(crate) fn to_unit(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}

/// User coordinates mapped affinely from their room ranges to `[-1, 1]`.
pub fn normalize_inputs(layout: &OfficeLayout, scenario: &Scenario) -> Result<Vec<f64>> {
    scenario.validate(layout)?;
    let ranges = coordinate_ranges(layout);
    Ok(scenario
        .users()
        .iter()
        .enumerate()
        .flat_map(|(u, user)| [to_unit(user.pos.x, ranges[2 * u]), to_unit(user.pos.y, ranges[2 * u + 1])])
        .collect())
}

/// Observations of one metric over a set of scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDesign {
    /// One row of normalized coordinates per observation.
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub metric: Metric,
    /// Physical range of each input coordinate.
    pub normalization: Vec<(f64, f64)>,
}

impl ExperimentalDesign {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>, metric: Metric, normalization: Vec<(f64, f64)>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::domain("design inputs and outputs differ in length"));
        }
        if inputs.is_empty() {
            return Err(Error::domain("experimental design is empty"));
        }
        let m = normalization.len();
        for row in &inputs {
            if row.len() != m {
                return Err(Error::domain(format!("design row has {} inputs, expected {m}", row.len())));
            }
            if row.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                return Err(Error::domain("design inputs must lie in [-1, 1]"));
            }
        }
        if outputs.iter().any(|y| !y.is_finite()) {
            return Err(Error::domain("design outputs must be finite"));
        }
        if normalization.iter().any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::domain("normalization ranges must be increasing"));
        }
        Ok(Self {
            inputs,
            outputs,
            metric,
            normalization,
        })
    }

    /// Design built from simulated scenarios and their exposure metrics.
    pub fn from_scenarios(
        layout: &OfficeLayout,
        scenarios: &[Scenario],
        metrics: &[ExposureMetrics],
        metric: Metric,
    ) -> Result<Self> {
        if scenarios.len() != metrics.len() {
            return Err(Error::domain("one metric value per scenario is required"));
        }
        let inputs = scenarios
            .iter()
            .map(|s| normalize_inputs(layout, s))
            .collect::<Result<Vec<_>>>()?;
        let outputs = metrics.iter().map(|m| metric.of(m)).collect();
        let normalization = coordinate_ranges(layout);
        debug_assert_eq!(normalization.len(), NUM_COORDS);
        Self::new(inputs, outputs, metric, normalization)
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.normalization.len()
    }

    /// Rows `idx` of the design.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: idx.iter().map(|&i| self.outputs[i]).collect(),
            metric: self.metric,
            normalization: self.normalization.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::scenario::NUM_USERS;

    fn scenario_with_first(layout: &OfficeLayout, first: Point) -> Scenario {
        let mut pos = [Point::new(0.0, 0.0); NUM_USERS];
        for (u, p) in pos.iter_mut().enumerate() {
            *p = layout.room(crate::scenario::USER_ROOMS[u]).unwrap().rect.center();
        }
        pos[0] = first;
        Scenario::new(layout, pos).unwrap()
    }

    #[test]
    fn room_center_maps_to_origin() {
        let layout = OfficeLayout::default_office();
        let c = layout.room(crate::geometry::RoomId(1)).unwrap().rect.center();
        let x = normalize_inputs(&layout, &scenario_with_first(&layout, c)).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn corner_and_quarter() {
        let layout = OfficeLayout::default_office();
        let r = layout.room(crate::geometry::RoomId(1)).unwrap().rect;
        let x = normalize_inputs(&layout, &scenario_with_first(&layout, r.max)).unwrap();
        assert_eq!((x[0], x[1]), (1.0, 1.0));
        let quarter = Point::new(r.min.x + 0.25 * r.width(), r.center().y);
        let x = normalize_inputs(&layout, &scenario_with_first(&layout, quarter)).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_user_outside_room() {
        let layout = OfficeLayout::default_office();
        let sc = scenario_with_first(&layout, Point::new(5.0, 15.0));
        let mut rooms = layout.rooms().to_vec();
        rooms[0].rect.max.x = 4.0;
        let mut gnbs = layout.gnbs().to_vec();
        gnbs[0].pos.x = 3.0;
        let shrunk = OfficeLayout::new(*layout.bounds(), rooms, layout.walls().to_vec(), gnbs).unwrap();
        assert!(matches!(normalize_inputs(&shrunk, &sc), Err(Error::Domain(_))));
    }

    #[test]
    fn metric_round_trip() {
        for m in [Metric::S95, Metric::Smean] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("s50".parse::<Metric>().is_err());
    }
}
