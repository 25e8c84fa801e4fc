//! Close-in path loss, flat-top beams, max-power association, SINR and
//! Shannon rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GnbId, OfficeLayout, Point, RoomId, NUM_GNBS};
use crate::scenario::Scenario;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise power spectral density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Slack on the main-lobe boundary test so a target placed exactly at the
/// half-beamwidth is inside.
const BEAM_EDGE_SLACK: f64 = 1e-12;

/// Radio parameters shared by every gNB. Fields missing from a serialized
/// form take their default values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub freq_hz: f64,
    pub tx_power_dbm: f64,
    pub beamwidth_deg: f64,
    pub n_los: f64,
    pub n_nlos: f64,
    pub d0_m: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub mainlobe_gain_dbi: f64,
    pub sidelobe_gain_dbi: f64,
    /// Exposure reference level used for reporting only.
    pub icnirp_ref_wm2: f64,
}

impl Default for RfParams {
    /// 28 GHz, 23.9 dBm, 15 degree beams, n = 1.7 / 4.6, d0 = 1 m, 500 MHz.
    fn default() -> Self {
        Self {
            freq_hz: 28e9,
            tx_power_dbm: 23.9,
            beamwidth_deg: 15.0,
            n_los: 1.7,
            n_nlos: 4.6,
            d0_m: 1.0,
            bandwidth_hz: 500e6,
            noise_figure_db: 7.0,
            mainlobe_gain_dbi: 23.7,
            sidelobe_gain_dbi: -10.0,
            icnirp_ref_wm2: 10.0,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.freq_hz > 0.0, "freq_hz must be > 0"),
            (self.d0_m > 0.0, "d0_m must be > 0"),
            (self.bandwidth_hz > 0.0, "bandwidth_hz must be > 0"),
            (
                self.beamwidth_deg > 0.0 && self.beamwidth_deg < 360.0,
                "beamwidth_deg must lie in (0, 360)",
            ),
            (self.n_los > 0.0, "n_los must be > 0"),
            (self.n_nlos >= self.n_los, "n_nlos must be >= n_los"),
            (!self.tx_power_dbm.is_nan(), "tx_power_dbm must be a number"),
            (
                self.noise_figure_db.is_finite()
                    && self.mainlobe_gain_dbi.is_finite()
                    && self.sidelobe_gain_dbi.is_finite(),
                "gains and noise figure must be finite",
            ),
            (self.icnirp_ref_wm2 > 0.0, "icnirp_ref_wm2 must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::config(msg));
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.freq_hz
    }

    /// Cosine of the half beamwidth.
    pub fn cos_half_beam(&self) -> f64 {
        (0.5 * self.beamwidth_deg).to_radians().cos()
    }

    /// Receiver noise floor in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_w(THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db)
    }

    /// Free-space intercept of the close-in model at `d0`.
    pub fn intercept_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI * self.d0_m * self.freq_hz / SPEED_OF_LIGHT).log10()
    }
}

/// Directivity of an ideal cone of full angle `beamwidth_deg`, in dBi.
pub fn cone_directivity_dbi(beamwidth_deg: f64) -> f64 {
    let half = (0.5 * beamwidth_deg).to_radians();
    10.0 * (2.0 / (1.0 - half.cos())).log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Close-in path loss in dB. Distances below `d0` are clamped to `d0`.
pub fn path_loss_db(params: &RfParams, d: f64, los: bool) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("path loss needs a positive distance, got {d}")));
    }
    let n = if los { params.n_los } else { params.n_nlos };
    let d = d.max(params.d0_m);
    Ok(params.intercept_db() + 10.0 * n * (d / params.d0_m).log10())
}

/// gNB-to-room assignment, indexed by gNB (`g1` first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Strategy {
    pub assignment: [RoomId; NUM_GNBS],
}

impl Strategy {
    pub fn new(rooms: [u8; NUM_GNBS]) -> Self {
        Self {
            assignment: rooms.map(RoomId),
        }
    }

    pub fn target_room(&self, gnb: GnbId) -> RoomId {
        self.assignment[gnb.index()]
    }

    pub fn validate(&self, layout: &OfficeLayout) -> Result<()> {
        for (i, room) in self.assignment.iter().enumerate() {
            if layout.room(*room).is_none() {
                return Err(Error::config(format!("g{} assigned to unknown room {room}", i + 1)));
            }
        }
        Ok(())
    }
}

/// Rendered as room numbers joined by `-`, e.g. `1-8-8-4-8-5`.
impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.assignment.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rooms: Vec<u8> = s
            .split('-')
            .map(|t| t.trim().parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("invalid strategy `{s}`")))?;
        let rooms: [u8; NUM_GNBS] = rooms
            .try_into()
            .map_err(|_| Error::config(format!("strategy `{s}` must list {NUM_GNBS} rooms")))?;
        Ok(Strategy::new(rooms))
    }
}

/// A radiating gNB: where it is, where it points, how loud it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub position: Point,
    pub azimuth: f64,
    pub tx_power_dbm: f64,
}

/// Unit direction from `from` to `to` and the distance between them.
pub(crate) fn unit_direction(from: &Point, to: &Point) -> Result<((f64, f64), f64)> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let d = dx.hypot(dy);
    if !(d > 0.0) {
        return Err(Error::domain("transmitter and receiver coincide"));
    }
    Ok(((dx / d, dy / d), d))
}

pub(crate) fn beam_axis(azimuth: f64) -> (f64, f64) {
    (azimuth.cos(), azimuth.sin())
}

pub(crate) fn in_main_lobe(cos_half: f64, axis: (f64, f64), unit: (f64, f64)) -> bool {
    unit.0 * axis.0 + unit.1 * axis.1 >= cos_half - BEAM_EDGE_SLACK
}

/// Flat-top cone pattern: main-lobe gain within half the beamwidth of the
/// beam axis (boundary included), side-lobe gain elsewhere.
pub fn beam_gain_db(params: &RfParams, azimuth: f64, gnb_pos: &Point, target: &Point) -> Result<f64> {
    let (unit, _) = unit_direction(gnb_pos, target)?;
    Ok(if in_main_lobe(params.cos_half_beam(), beam_axis(azimuth), unit) {
        params.mainlobe_gain_dbi
    } else {
        params.sidelobe_gain_dbi
    })
}

/// Received power for a link of length `distance`; receive antenna is 0 dBi.
pub(crate) fn link_power_w(params: &RfParams, tx_power_dbm: f64, distance: f64, los: bool, gain_db: f64) -> Result<f64> {
    let pl = path_loss_db(params, distance, los)?;
    Ok(dbm_to_w(tx_power_dbm + gain_db - pl))
}

pub fn received_power_w(
    params: &RfParams,
    layout: &OfficeLayout,
    gnb_pos: &Point,
    azimuth: f64,
    point: &Point,
) -> Result<f64> {
    transmitter_power_w(
        params,
        layout,
        &Transmitter {
            position: *gnb_pos,
            azimuth,
            tx_power_dbm: params.tx_power_dbm,
        },
        point,
    )
}

pub fn transmitter_power_w(params: &RfParams, layout: &OfficeLayout, tx: &Transmitter, point: &Point) -> Result<f64> {
    let (unit, d) = unit_direction(&tx.position, point)?;
    let gain = if in_main_lobe(params.cos_half_beam(), beam_axis(tx.azimuth), unit) {
        params.mainlobe_gain_dbi
    } else {
        params.sidelobe_gain_dbi
    };
    let los = layout.line_of_sight(&tx.position, point)?;
    link_power_w(params, tx.tx_power_dbm, d, los, gain)
}

/// Beam azimuth (radians) of every gNB: each aims at the user of its
/// assigned room nearest to it, ties going to the lower user index.
pub fn compute_pointings(layout: &OfficeLayout, strategy: &Strategy, scenario: &Scenario) -> [f64; NUM_GNBS] {
    let mut out = [0.0; NUM_GNBS];
    for (slot, gnb) in out.iter_mut().zip(layout.gnbs()) {
        let room = strategy.target_room(gnb.id);
        let mut best: Option<(f64, Point)> = None;
        for u in scenario.users_in(room) {
            let d = gnb.pos.distance(&u.pos);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, u.pos));
            }
        }
        // Empty rooms cannot occur for valid scenarios; fall back to the room centre.
        let target = best
            .map(|(_, p)| p)
            .unwrap_or_else(|| layout.room(room).map(|r| r.rect.center()).unwrap_or(gnb.pos));
        *slot = (target.y - gnb.pos.y).atan2(target.x - gnb.pos.x);
    }
    out
}

pub fn transmitters(params: &RfParams, layout: &OfficeLayout, strategy: &Strategy, scenario: &Scenario) -> Vec<Transmitter> {
    let az = compute_pointings(layout, strategy, scenario);
    layout
        .gnbs()
        .iter()
        .zip(az)
        .map(|(g, azimuth)| Transmitter {
            position: g.pos,
            azimuth,
            tx_power_dbm: params.tx_power_dbm,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRate {
    pub user: usize,
    pub serving: GnbId,
    /// Linear SINR.
    pub sinr: f64,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub users: Vec<UserRate>,
    pub mean_rate_bps: f64,
}

pub fn shannon_rate_bps(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Rates at `receivers` for an arbitrary transmitter set (ids follow slice
/// order, `g1` first).
pub fn rate_report_for(
    params: &RfParams,
    layout: &OfficeLayout,
    txs: &[Transmitter],
    receivers: &[Point],
) -> Result<RateReport> {
    let noise = params.noise_power_w();
    let mut users = Vec::with_capacity(receivers.len());
    for (i, rx) in receivers.iter().enumerate() {
        let powers = txs
            .iter()
            .map(|tx| transmitter_power_w(params, layout, tx, rx))
            .collect::<Result<Vec<f64>>>()?;
        let mut serving = 0;
        for (g, p) in powers.iter().enumerate() {
            if *p > powers[serving] {
                serving = g;
            }
        }
        let interference: f64 = powers
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != serving)
            .map(|(_, p)| p)
            .sum();
        let signal = powers.get(serving).copied().unwrap_or(0.0);
        let sinr = signal / (noise + interference);
        users.push(UserRate {
            user: i + 1,
            serving: GnbId(serving as u8 + 1),
            sinr,
            rate_bps: shannon_rate_bps(params.bandwidth_hz, sinr),
        });
    }
    let mean_rate_bps = if users.is_empty() {
        0.0
    } else {
        users.iter().map(|u| u.rate_bps).sum::<f64>() / users.len() as f64
    };
    Ok(RateReport { users, mean_rate_bps })
}

pub fn rate_report(params: &RfParams, layout: &OfficeLayout, strategy: &Strategy, scenario: &Scenario) -> Result<RateReport> {
    let txs = transmitters(params, layout, strategy, scenario);
    let rx: Vec<Point> = scenario.users().iter().map(|u| u.pos).collect();
    rate_report_for(params, layout, &txs, &rx)
}
