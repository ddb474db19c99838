//! Link budget: path loss, sector antenna pattern, shadowing, Rayleigh
//! fading, RSRP, per-RB SINR and Shannon rate.
//!
//! All BSs share every RB (co-channel) and transmit on all RBs every TTI.
//! RSRP deliberately excludes fast fading; fading only enters SINR.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scenario::{angle_diff, Cell, Point};
use crate::Tier;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub rb_count: usize,
    pub rb_bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub macro_tx_power_dbm: f64,
    pub pico_tx_power_dbm: f64,
    pub macro_max_tx_power_dbm: f64,
    pub pico_max_tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub macro_antenna_gain_dbi: f64,
    pub pico_antenna_gain_dbi: f64,
    pub macro_beamwidth_deg: f64,
    pub macro_max_attenuation_db: f64,
    pub macro_pathloss: PathLossModel,
    pub pico_pathloss: PathLossModel,
    pub min_distance_m: f64,
    pub macro_shadowing_std_db: f64,
    pub pico_shadowing_std_db: f64,
    pub fading: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            rb_count: 50,
            rb_bandwidth_hz: 180e3,
            carrier_hz: 2e9,
            macro_tx_power_dbm: 46.0,
            pico_tx_power_dbm: 30.0,
            macro_max_tx_power_dbm: 46.0,
            pico_max_tx_power_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            macro_antenna_gain_dbi: 14.0,
            pico_antenna_gain_dbi: 5.0,
            macro_beamwidth_deg: 70.0,
            macro_max_attenuation_db: 25.0,
            macro_pathloss: PathLossModel::MACRO,
            pico_pathloss: PathLossModel::PICO,
            min_distance_m: 10.0,
            macro_shadowing_std_db: 8.0,
            pico_shadowing_std_db: 10.0,
            fading: true,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rb_count == 0 {
            return Err(ConfigError::invalid("radio.rb_count", "must be > 0"));
        }
        if !(self.rb_bandwidth_hz > 0.0) || !(self.bandwidth_hz > 0.0) {
            return Err(ConfigError::invalid("radio.rb_bandwidth_hz", "bandwidths must be > 0"));
        }
        if self.rb_count as f64 * self.rb_bandwidth_hz > self.bandwidth_hz * (1.0 + 1e-12) {
            return Err(ConfigError::invalid(
                "radio.rb_count",
                format!(
                    "{} RBs x {} Hz exceeds the {} Hz system bandwidth",
                    self.rb_count, self.rb_bandwidth_hz, self.bandwidth_hz
                ),
            ));
        }
        if self.macro_tx_power_dbm > self.macro_max_tx_power_dbm {
            return Err(ConfigError::invalid(
                "radio.macro_tx_power_dbm",
                "exceeds radio.macro_max_tx_power_dbm",
            ));
        }
        if self.pico_tx_power_dbm > self.pico_max_tx_power_dbm {
            return Err(ConfigError::invalid(
                "radio.pico_tx_power_dbm",
                "exceeds radio.pico_max_tx_power_dbm",
            ));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(ConfigError::invalid("radio.min_distance_m", "must be > 0"));
        }
        if !(self.macro_beamwidth_deg > 0.0) {
            return Err(ConfigError::invalid("radio.macro_beamwidth_deg", "must be > 0"));
        }
        if !(self.macro_shadowing_std_db >= 0.0) || !(self.pico_shadowing_std_db >= 0.0) {
            return Err(ConfigError::invalid("radio.macro_shadowing_std_db", "must be >= 0"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(ConfigError::invalid("radio.carrier_hz", "must be > 0"));
        }
        Ok(())
    }

    pub fn tx_power_dbm(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.macro_tx_power_dbm,
            Tier::Pico => self.pico_tx_power_dbm,
        }
    }

    /// Transmit power per RB: total power split evenly over all RBs.
    pub fn tx_power_per_rb_dbm(&self, tier: Tier) -> f64 {
        self.tx_power_dbm(tier) - 10.0 * (self.rb_count as f64).log10()
    }

    pub fn pathloss(&self, tier: Tier) -> &PathLossModel {
        match tier {
            Tier::Macro => &self.macro_pathloss,
            Tier::Pico => &self.pico_pathloss,
        }
    }

    pub fn path_loss_db(&self, tier: Tier, distance_m: f64) -> f64 {
        self.pathloss(tier).loss_db(distance_m, self.min_distance_m)
    }

    pub fn shadowing_std_db(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.macro_shadowing_std_db,
            Tier::Pico => self.pico_shadowing_std_db,
        }
    }

    /// Thermal noise per RB in mW.
    pub fn noise_per_rb_mw(&self) -> f64 {
        dbm_to_mw(self.noise_psd_dbm_hz + self.noise_figure_db + 10.0 * self.rb_bandwidth_hz.log10())
    }

    /// Antenna gain (dBi) of `cell` towards `ue`.
    pub fn antenna_gain_db(&self, cell: &Cell, ue: &Point) -> f64 {
        match (cell.tier, cell.boresight) {
            (Tier::Macro, Some(boresight)) => {
                let off = angle_diff(cell.position.bearing_to(ue), boresight).to_degrees();
                self.macro_antenna_gain_dbi
                    + sector_pattern_db(off, self.macro_beamwidth_deg, self.macro_max_attenuation_db)
            }
            (Tier::Macro, None) => self.macro_antenna_gain_dbi,
            (Tier::Pico, _) => self.pico_antenna_gain_dbi,
        }
    }
}

/// Log-distance model `intercept + slope·log10(d_km)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl PathLossModel {
    pub const MACRO: PathLossModel = PathLossModel {
        intercept_db: 128.1,
        slope_db: 37.6,
    };
    pub const PICO: PathLossModel = PathLossModel {
        intercept_db: 140.7,
        slope_db: 36.7,
    };

    /// Loss in dB; distances below `min_distance_m` are clamped up to it.
    pub fn loss_db(&self, distance_m: f64, min_distance_m: f64) -> f64 {
        let d_km = distance_m.max(min_distance_m) * 1e-3;
        self.intercept_db + self.slope_db * d_km.log10()
    }
}

/// Horizontal 3-sector pattern, `-min(12(θ/θ3dB)², A_max)` in dB.
pub fn sector_pattern_db(off_boresight_deg: f64, beamwidth_deg: f64, max_attenuation_db: f64) -> f64 {
    let r = off_boresight_deg / beamwidth_deg;
    -(12.0 * r * r).min(max_attenuation_db)
}

/// Per-RB RSRP (dBm). Fast fading is excluded.
pub fn rsrp_dbm(tx_power_per_rb_dbm: f64, antenna_gain_db: f64, path_loss_db: f64, shadowing_db: f64) -> f64 {
    tx_power_per_rb_dbm + antenna_gain_db - path_loss_db - shadowing_db
}

/// Linear SINR `S / (I + N)`.
pub fn sinr_linear(signal_mw: f64, interference_mw: f64, noise_mw: f64) -> f64 {
    signal_mw / (interference_mw + noise_mw)
}

/// Shannon rate `B_rb·log2(1 + γ)` in bit/s.
pub fn rb_rate_bps(rb_bandwidth_hz: f64, sinr_linear: f64) -> f64 {
    rb_bandwidth_hz * (1.0 + sinr_linear).log2()
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[inline]
pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Bessel function of the first kind, order zero (power series).
///
/// Accurate to ~1e-15 for |x| < 8, which covers every Doppler/TTI product
/// the simulator generates.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// AR(1) coefficient `J0(2π f_d Δt)` for Rayleigh fading, clamped to [0, 1].
pub fn fading_correlation(speed_kmh: f64, carrier_hz: f64, dt_ms: f64) -> f64 {
    let doppler = speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT;
    bessel_j0(TAU * doppler * dt_ms * 1e-3).clamp(0.0, 1.0)
}

/// Shadowing and fading state for every (UE, cell[, RB]) link, plus cached
/// per-link mean received power.
#[derive(Debug, Clone)]
pub struct ChannelState {
    ue_count: usize,
    cell_count: usize,
    rb_count: usize,
    shadowing_db: Vec<f64>,
    rsrp_dbm: Vec<f64>,
    mean_rx_mw: Vec<f64>,
    fading: Vec<[f32; 2]>,
    pub last_update_ms: u64,
}

impl ChannelState {
    /// Draws per-link lognormal shadowing and an initial CN(0,1) fading draw
    /// on every RB. With fading disabled the gain is pinned to 1.
    pub fn new<R: Rng + ?Sized, F: Rng + ?Sized>(
        ue_count: usize,
        cells: &[Cell],
        cfg: &RadioConfig,
        shadow_rng: &mut R,
        fading_rng: &mut F,
    ) -> Self {
        let cell_count = cells.len();
        let rb_count = cfg.rb_count;
        let mut shadowing_db = Vec::with_capacity(ue_count * cell_count);
        for _ in 0..ue_count {
            for c in cells {
                let std = cfg.shadowing_std_db(c.tier);
                let s = if std > 0.0 {
                    Normal::new(0.0, std).expect("finite std").sample(shadow_rng)
                } else {
                    0.0
                };
                shadowing_db.push(s);
            }
        }
        let links = ue_count * cell_count * rb_count;
        let fading = if cfg.fading {
            (0..links)
                .map(|_| {
                    let re: f32 = StandardNormal.sample(fading_rng);
                    let im: f32 = StandardNormal.sample(fading_rng);
                    [re * std::f32::consts::FRAC_1_SQRT_2, im * std::f32::consts::FRAC_1_SQRT_2]
                })
                .collect()
        } else {
            vec![[1.0, 0.0]; links]
        };
        Self {
            ue_count,
            cell_count,
            rb_count,
            shadowing_db,
            rsrp_dbm: vec![f64::NEG_INFINITY; ue_count * cell_count],
            mean_rx_mw: vec![0.0; ue_count * cell_count],
            fading,
            last_update_ms: 0,
        }
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn rb_count(&self) -> usize {
        self.rb_count
    }

    pub fn shadowing_db(&self, ue: usize, cell: usize) -> f64 {
        self.shadowing_db[ue * self.cell_count + cell]
    }

    pub fn set_shadowing_db(&mut self, ue: usize, cell: usize, value: f64) {
        self.shadowing_db[ue * self.cell_count + cell] = value;
    }

    pub fn rsrp(&self, ue: usize, cell: usize) -> f64 {
        self.rsrp_dbm[ue * self.cell_count + cell]
    }

    pub fn rsrp_row(&self, ue: usize) -> &[f64] {
        &self.rsrp_dbm[ue * self.cell_count..(ue + 1) * self.cell_count]
    }

    /// Recomputes RSRP and mean per-RB received power of `ue` from every cell.
    pub fn update_geometry(&mut self, ue: usize, position: &Point, cells: &[Cell], cfg: &RadioConfig) {
        for c in cells {
            let idx = ue * self.cell_count + c.id.0;
            let d = c.position.distance(position);
            let r = rsrp_dbm(
                cfg.tx_power_per_rb_dbm(c.tier),
                cfg.antenna_gain_db(c, position),
                cfg.path_loss_db(c.tier, d),
                self.shadowing_db[idx],
            );
            self.rsrp_dbm[idx] = r;
            self.mean_rx_mw[idx] = dbm_to_mw(r);
        }
    }

    /// One AR(1) step `h ← ρh + sqrt(1-ρ²)w` on all of `ue`'s links.
    pub fn advance_fading<R: Rng + ?Sized>(&mut self, ue: usize, rho: f64, rng: &mut R) {
        if rho >= 1.0 {
            return;
        }
        let rho = rho as f32;
        let innov = (1.0 - rho * rho).sqrt() * std::f32::consts::FRAC_1_SQRT_2;
        let start = ue * self.cell_count * self.rb_count;
        for h in &mut self.fading[start..start + self.cell_count * self.rb_count] {
            let re: f32 = StandardNormal.sample(rng);
            let im: f32 = StandardNormal.sample(rng);
            h[0] = rho * h[0] + innov * re;
            h[1] = rho * h[1] + innov * im;
        }
    }

    /// Small-scale power gain |h|² (mean 1).
    pub fn fading_gain(&self, ue: usize, cell: usize, rb: usize) -> f64 {
        let h = self.fading[(ue * self.cell_count + cell) * self.rb_count + rb];
        (h[0] as f64).mul_add(h[0] as f64, h[1] as f64 * h[1] as f64)
    }

    /// Received power on `rb` from `cell` including fading, mW.
    pub fn rx_mw(&self, ue: usize, cell: usize, rb: usize) -> f64 {
        self.mean_rx_mw[ue * self.cell_count + cell] * self.fading_gain(ue, cell, rb)
    }

    /// Per-RB linear SINR of `ue` towards `serving`, written into `out`.
    pub fn rb_sinrs(&self, ue: usize, serving: usize, noise_mw: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.rb_count);
        let base = ue * self.cell_count;
        for (rb, slot) in out.iter_mut().enumerate() {
            let mut total = 0.0;
            let mut signal = 0.0;
            for c in 0..self.cell_count {
                let h = self.fading[(base + c) * self.rb_count + rb];
                let g = (h[0] * h[0] + h[1] * h[1]) as f64;
                let p = self.mean_rx_mw[base + c] * g;
                total += p;
                if c == serving {
                    signal = p;
                }
            }
            *slot = sinr_linear(signal, (total - signal).max(0.0), noise_mw);
        }
    }
}

/// Wideband SINR in dB: linear mean over RBs.
pub fn wideband_sinr_db(rb_sinrs: &[f64]) -> f64 {
    lin_to_db(rb_sinrs.iter().sum::<f64>() / rb_sinrs.len() as f64)
}
