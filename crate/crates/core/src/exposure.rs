//! Power-density fields over the evaluation grid and their summaries.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, OfficeLayout, Point};
use crate::propagation::{
    beam_axis, compute_pointings, in_main_lobe, link_power_w, unit_direction, RfParams, Strategy, Transmitter,
};
use crate::scenario::Scenario;

/// Effective aperture of an isotropic receiver, `lambda^2 / (4 pi)`.
pub fn isotropic_aperture_m2(freq_hz: f64) -> f64 {
    let lambda = crate::propagation::SPEED_OF_LIGHT / freq_hz;
    lambda * lambda / (4.0 * std::f64::consts::PI)
}

/// Power density (W/m^2) seen by an isotropic receiver collecting `p_rx_w`.
pub fn power_density(p_rx_w: f64, freq_hz: f64) -> Result<f64> {
    if p_rx_w < 0.0 || p_rx_w.is_nan() {
        return Err(Error::domain(format!("received power must be >= 0, got {p_rx_w}")));
    }
    Ok(p_rx_w / isotropic_aperture_m2(freq_hz))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureField {
    pub grid: GridSpec,
    /// Row-major from the grid origin.
    pub values: Vec<f64>,
}

impl ExposureField {
    /// Writes `x,y,s_wm2` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &str) -> std::io::Result<()> {
        writeln!(w, "{provenance}")?;
        writeln!(w, "x,y,s_wm2")?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point_at(i);
            writeln!(w, "{},{},{:e}", p.x, p.y, v)?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureMetrics {
    pub s95: f64,
    pub smean: f64,
}

/// Per-site, per-grid-point quantities that do not depend on where beams
/// point: direction to the point and received power in and out of the main
/// lobe. Built once per (params, layout, grid, site set).
#[derive(Debug, Clone)]
pub struct FieldKernel {
    grid: GridSpec,
    freq_hz: f64,
    cos_half: f64,
    sites: Vec<SiteTable>,
}

#[derive(Debug, Clone)]
struct SiteTable {
    unit: Vec<(f64, f64)>,
    main_w: Vec<f64>,
    side_w: Vec<f64>,
}

impl FieldKernel {
    /// Kernel for the given transmitter sites, each at `tx_power_dbm`.
    pub fn new(params: &RfParams, layout: &OfficeLayout, grid: &GridSpec, sites: &[(Point, f64)]) -> Result<Self> {
        let points: Vec<Point> = grid.points().collect();
        let sites = sites
            .iter()
            .map(|(pos, tx_dbm)| {
                let mut t = SiteTable {
                    unit: Vec::with_capacity(points.len()),
                    main_w: Vec::with_capacity(points.len()),
                    side_w: Vec::with_capacity(points.len()),
                };
                for p in &points {
                    let (unit, d) = unit_direction(pos, p)?;
                    let los = layout.line_of_sight(pos, p)?;
                    t.unit.push(unit);
                    t.main_w.push(link_power_w(params, *tx_dbm, d, los, params.mainlobe_gain_dbi)?);
                    t.side_w.push(link_power_w(params, *tx_dbm, d, los, params.sidelobe_gain_dbi)?);
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: *grid,
            freq_hz: params.freq_hz,
            cos_half: params.cos_half_beam(),
            sites,
        })
    }

    /// Kernel over the layout's gNBs at the configured transmit power.
    pub fn for_layout(params: &RfParams, layout: &OfficeLayout, grid: &GridSpec) -> Result<Self> {
        let sites: Vec<(Point, f64)> = layout.gnbs().iter().map(|g| (g.pos, params.tx_power_dbm)).collect();
        Self::new(params, layout, grid, &sites)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Field for one azimuth per site, summed over sites in site order.
    pub fn field(&self, azimuths: &[f64]) -> Result<ExposureField> {
        if azimuths.len() != self.sites.len() {
            return Err(Error::domain(format!(
                "expected {} azimuths, got {}",
                self.sites.len(),
                azimuths.len()
            )));
        }
        let mut total = vec![0.0f64; self.grid.len()];
        for (site, &az) in self.sites.iter().zip(azimuths) {
            let axis = beam_axis(az);
            for (i, acc) in total.iter_mut().enumerate() {
                *acc += if in_main_lobe(self.cos_half, axis, site.unit[i]) {
                    site.main_w[i]
                } else {
                    site.side_w[i]
                };
            }
        }
        let values = total
            .into_iter()
            .map(|p| power_density(p, self.freq_hz))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExposureField {
            grid: self.grid,
            values,
        })
    }
}

/// Field from an explicit transmitter list.
pub fn exposure_field_for(
    params: &RfParams,
    layout: &OfficeLayout,
    grid: &GridSpec,
    txs: &[Transmitter],
) -> Result<ExposureField> {
    let sites: Vec<(Point, f64)> = txs.iter().map(|t| (t.position, t.tx_power_dbm)).collect();
    let az: Vec<f64> = txs.iter().map(|t| t.azimuth).collect();
    FieldKernel::new(params, layout, grid, &sites)?.field(&az)
}

pub fn exposure_field(
    params: &RfParams,
    layout: &OfficeLayout,
    grid: &GridSpec,
    strategy: &Strategy,
    scenario: &Scenario,
) -> Result<ExposureField> {
    let kernel = FieldKernel::for_layout(params, layout, grid)?;
    kernel.field(&compute_pointings(layout, strategy, scenario))
}

/// 1-based nearest-rank position of the 95th percentile among `n` values.
fn rank95(n: usize) -> usize {
    (95 * n).div_ceil(100).max(1)
}

/// Mean and nearest-rank 95th percentile of a field.
pub fn exposure_metrics(field: &ExposureField) -> Result<ExposureMetrics> {
    metrics_of(&field.values)
}

pub fn metrics_of(values: &[f64]) -> Result<ExposureMetrics> {
    if values.is_empty() {
        return Err(Error::domain("exposure field is empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("exposure field holds non-finite values".into()));
    }
    let smean = values.iter().sum::<f64>() / values.len() as f64;
    let mut scratch = values.to_vec();
    let k = rank95(values.len()) - 1;
    let (_, s95, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
    Ok(ExposureMetrics { s95: *s95, smean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` equally spaced edges from min to max.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    /// `m3 / m2^1.5` with population central moments.
    pub skewness: f64,
    pub histogram: Histogram,
}

impl DistributionStats {
    /// Writes `bin_lo,bin_hi,count` rows after a comment line carrying the
    /// mean and skewness.
    pub fn write_histogram_csv<W: Write>(&self, mut w: W, provenance: &str) -> std::io::Result<()> {
        writeln!(w, "{provenance}")?;
        writeln!(
            w,
            "# samples={} mean={:e} std_dev={:e} skewness={}",
            self.count, self.mean, self.std_dev, self.skewness
        )?;
        writeln!(w, "bin_lo,bin_hi,count")?;
        let h = &self.histogram;
        for (i, c) in h.counts.iter().enumerate() {
            writeln!(w, "{:e},{:e},{}", h.edges[i], h.edges[i + 1], c)?;
        }
        w.flush()
    }
}

pub fn distribution_stats(samples: &[f64], bins: usize) -> Result<DistributionStats> {
    if samples.len() < 2 {
        return Err(Error::domain("distribution statistics need at least 2 samples"));
    }
    if bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("samples hold non-finite values".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0usize; bins];
    for x in samples {
        let idx = if width > 0.0 {
            (((x - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(DistributionStats {
        count: samples.len(),
        mean,
        std_dev: m2.sqrt(),
        skewness,
        histogram: Histogram { edges, counts },
    })
}
