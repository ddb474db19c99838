//! Deployment geometry and UE mobility.
//!
//! Macro sites carry three sectors (boresights 30°, 150°, 270°). Picos are
//! rejection-sampled inside each sector wedge and double as hotspot centres;
//! UEs are dropped uniformly in the hotspot discs and then move in straight
//! lines, reflecting off the edges of the simulation box.

use std::f64::consts::{FRAC_PI_3, PI, TAU};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::handover::{HandoverFsm, MeasurementPipeline, PendingHandover, SinrHistory};
use crate::{CellId, Tier, UeId};

pub const SECTORS_PER_SITE: usize = 3;

/// Sector boresights in radians, measured counter-clockwise from +x.
pub const SECTOR_BORESIGHTS: [f64; SECTORS_PER_SITE] =
    [PI / 6.0, 5.0 * PI / 6.0, 3.0 * PI / 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub site_count: usize,
    pub picos_per_sector: usize,
    pub ues_per_sector: usize,
    pub hotspot_radius_m: f64,
    pub isd_m: f64,
    pub velocity_set_kmh: Vec<f64>,
    pub fixed_velocity_kmh: Option<f64>,
    pub region_margin_m: f64,
    pub min_macro_pico_distance_m: f64,
    pub min_pico_pico_distance_m: f64,
    pub max_placement_attempts: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            site_count: 1,
            picos_per_sector: 1,
            ues_per_sector: 30,
            hotspot_radius_m: 60.0,
            isd_m: 500.0,
            velocity_set_kmh: vec![3.0, 30.0, 60.0, 120.0],
            fixed_velocity_kmh: None,
            region_margin_m: 0.0,
            min_macro_pico_distance_m: 75.0,
            min_pico_pico_distance_m: 40.0,
            max_placement_attempts: 10_000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.site_count == 0 || self.site_count > HEX_OFFSETS.len() {
            return Err(ConfigError::invalid(
                "scenario.site_count",
                format!("must be in 1..={}", HEX_OFFSETS.len()),
            ));
        }
        if !(self.isd_m > 0.0) {
            return Err(ConfigError::invalid("scenario.isd_m", "must be > 0"));
        }
        if !(self.hotspot_radius_m > 0.0) {
            return Err(ConfigError::invalid("scenario.hotspot_radius_m", "must be > 0"));
        }
        if self.velocity_set_kmh.is_empty() {
            return Err(ConfigError::invalid("scenario.velocity_set_kmh", "must not be empty"));
        }
        if let Some(v) = self.velocity_set_kmh.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(ConfigError::invalid(
                "scenario.velocity_set_kmh",
                format!("speed {v} is not a finite non-negative value"),
            ));
        }
        if let Some(v) = self.fixed_velocity_kmh {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::invalid(
                    "scenario.fixed_velocity_kmh",
                    "must be finite and non-negative",
                ));
            }
        }
        if !(self.region_margin_m >= 0.0) {
            return Err(ConfigError::invalid("scenario.region_margin_m", "must be >= 0"));
        }
        if !(self.min_macro_pico_distance_m >= 0.0) || !(self.min_pico_pico_distance_m >= 0.0) {
            return Err(ConfigError::invalid(
                "scenario.min_macro_pico_distance_m",
                "separation distances must be >= 0",
            ));
        }
        if self.max_placement_attempts == 0 {
            return Err(ConfigError::invalid("scenario.max_placement_attempts", "must be > 0"));
        }
        Ok(())
    }

    /// Velocity set actually in force: the fixed velocity when set.
    pub fn effective_velocity_set(&self) -> Vec<f64> {
        match self.fixed_velocity_kmh {
            Some(v) => vec![v],
            None => self.velocity_set_kmh.clone(),
        }
    }
}

// Site 0 plus the first hexagonal ring, in units of ISD.
const HEX_OFFSETS: [(f64, f64); 7] = [
    (0.0, 0.0),
    (1.0, 0.0),
    (0.5, 0.866_025_403_784_438_6),
    (-0.5, 0.866_025_403_784_438_6),
    (-1.0, 0.0),
    (-0.5, -0.866_025_403_784_438_6),
    (0.5, -0.866_025_403_784_438_6),
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` to `other`, radians in (-π, π].
    pub fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Axis-aligned simulation box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSite {
    pub position: Point,
    pub sector_boresights: [f64; SECTORS_PER_SITE],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicoSite {
    pub position: Point,
    pub site: usize,
    pub sector: usize,
}

/// A transmitting cell: one per macro sector plus one per pico.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub tier: Tier,
    pub position: Point,
    /// Antenna boresight for sectorised macros; `None` for omni picos.
    pub boresight: Option<f64>,
    pub site: usize,
    pub sector: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub macro_sites: Vec<MacroSite>,
    pub picos: Vec<PicoSite>,
    pub hotspot_radius_m: f64,
    pub inter_site_distance_m: f64,
    pub sector_count_per_site: usize,
    pub region: Region,
    cells: Vec<Cell>,
}

impl Topology {
    /// Numbers macro sectors `site*3 + sector` and picos after them. The
    /// simulation box is the sites' bounding box grown by `pad_m`.
    pub fn new(macro_sites: Vec<MacroSite>, picos: Vec<PicoSite>, hotspot_radius_m: f64, isd_m: f64, pad_m: f64) -> Self {
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for s in &macro_sites {
            lo.x = lo.x.min(s.position.x);
            lo.y = lo.y.min(s.position.y);
            hi.x = hi.x.max(s.position.x);
            hi.y = hi.y.max(s.position.y);
        }
        let region = Region {
            min: Point::new(lo.x - pad_m, lo.y - pad_m),
            max: Point::new(hi.x + pad_m, hi.y + pad_m),
        };

        let mut cells = Vec::with_capacity(macro_sites.len() * SECTORS_PER_SITE + picos.len());
        for (site_idx, site) in macro_sites.iter().enumerate() {
            for (sector, &b) in site.sector_boresights.iter().enumerate() {
                cells.push(Cell {
                    id: CellId(cells.len()),
                    tier: Tier::Macro,
                    position: site.position,
                    boresight: Some(b),
                    site: site_idx,
                    sector,
                });
            }
        }
        for p in &picos {
            cells.push(Cell {
                id: CellId(cells.len()),
                tier: Tier::Pico,
                position: p.position,
                boresight: None,
                site: p.site,
                sector: p.sector,
            });
        }

        Self {
            macro_sites,
            picos,
            hotspot_radius_m,
            inter_site_distance_m: isd_m,
            sector_count_per_site: SECTORS_PER_SITE,
            region,
            cells,
        }
    }

    /// Hexagonal cell radius (corner distance) for the configured ISD.
    pub fn cell_radius_m(&self) -> f64 {
        self.inter_site_distance_m / 3f64.sqrt()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.0]
    }

    pub fn macro_cell_count(&self) -> usize {
        self.macro_sites.len() * self.sector_count_per_site
    }

    /// Hotspot centres coincide with pico positions.
    pub fn hotspot_centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.picos.iter().map(|p| p.position)
    }

    /// Whether `p` lies in the wedge of `sector` at `site`.
    pub fn sector_contains(&self, site: usize, sector: usize, p: &Point) -> bool {
        let s = &self.macro_sites[site];
        let d = s.position.distance(p);
        if d > self.cell_radius_m() {
            return false;
        }
        d == 0.0 || angle_diff(s.position.bearing_to(p), s.sector_boresights[sector]).abs() <= FRAC_PI_3
    }
}

/// Signed angular difference `a - b` wrapped to [-π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % TAU;
    if d > PI {
        d -= TAU;
    } else if d < -PI {
        d += TAU;
    }
    d
}

fn sample_in_wedge<R: Rng + ?Sized>(rng: &mut R, centre: Point, boresight: f64, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = boresight + rng.random_range(-FRAC_PI_3..=FRAC_PI_3);
    Point::new(centre.x + r * theta.cos(), centre.y + r * theta.sin())
}

fn sample_in_disc<R: Rng + ?Sized>(rng: &mut R, centre: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..TAU);
    Point::new(centre.x + r * theta.cos(), centre.y + r * theta.sin())
}

/// Places macro sites on a hex grid and rejection-samples the picos.
pub fn build_topology<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Topology, ConfigError> {
    config.validate()?;
    let isd = config.isd_m;
    let radius = isd / 3f64.sqrt();

    let macro_sites: Vec<MacroSite> = HEX_OFFSETS[..config.site_count]
        .iter()
        .map(|(ox, oy)| MacroSite {
            position: Point::new(ox * isd, oy * isd),
            sector_boresights: SECTOR_BORESIGHTS,
        })
        .collect();

    let mut picos: Vec<PicoSite> = Vec::new();
    for (site_idx, site) in macro_sites.iter().enumerate() {
        for (sector, &boresight) in site.sector_boresights.iter().enumerate() {
            for _ in 0..config.picos_per_sector {
                let mut macro_rejects = 0usize;
                let mut pico_rejects = 0usize;
                let mut placed = None;
                for _ in 0..config.max_placement_attempts {
                    let p = sample_in_wedge(rng, site.position, boresight, radius);
                    if macro_sites
                        .iter()
                        .any(|m| m.position.distance(&p) < config.min_macro_pico_distance_m)
                    {
                        macro_rejects += 1;
                        continue;
                    }
                    if picos
                        .iter()
                        .any(|q| q.position.distance(&p) < config.min_pico_pico_distance_m)
                    {
                        pico_rejects += 1;
                        continue;
                    }
                    placed = Some(p);
                    break;
                }
                match placed {
                    Some(position) => picos.push(PicoSite {
                        position,
                        site: site_idx,
                        sector,
                    }),
                    None => {
                        let constraint = if pico_rejects >= macro_rejects {
                            "scenario.min_pico_pico_distance_m"
                        } else {
                            "scenario.min_macro_pico_distance_m"
                        };
                        return Err(ConfigError::Placement {
                            constraint: constraint.to_string(),
                            attempts: config.max_placement_attempts,
                        });
                    }
                }
            }
        }
    }

    let pad = radius + config.region_margin_m;
    Ok(Topology::new(macro_sites, picos, config.hotspot_radius_m, isd, pad))
}

/// Record of the UE's last completed handover, used for ping-pong detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverRecord {
    pub time_ms: u64,
    pub source: CellId,
}

#[derive(Debug, Clone)]
pub struct UeState {
    pub id: UeId,
    pub position: Point,
    pub speed_kmh: f64,
    /// Heading in radians, [0, 2π).
    pub direction: f64,
    pub serving_cell: CellId,
    /// Smoothed served rate, bit/s.
    pub avg_rate_bps: f64,
    /// Rate served in the last TTI, bit/s.
    pub inst_rate_bps: f64,
    /// One filter chain per cell.
    pub measurement: Vec<MeasurementPipeline>,
    pub ttt: HandoverFsm,
    pub last_handover: Option<HandoverRecord>,
    pub pending_handover: Option<PendingHandover>,
    pub sinr_history: SinrHistory,
    /// Set on a history-preserving handover; the next rate update blends the
    /// carried average with the first target-cell rate.
    pub history_transfer_pending: bool,
}

impl UeState {
    pub fn new(id: UeId, position: Point, speed_kmh: f64, direction: f64, cell_count: usize, history_len: usize) -> Self {
        Self {
            id,
            position,
            speed_kmh,
            direction,
            serving_cell: CellId(0),
            avg_rate_bps: 0.0,
            inst_rate_bps: 0.0,
            measurement: vec![MeasurementPipeline::default(); cell_count],
            ttt: HandoverFsm::new(cell_count),
            last_handover: None,
            pending_handover: None,
            sinr_history: SinrHistory::new(history_len),
            history_transfer_pending: false,
        }
    }

    pub fn step(&mut self, dt_ms: f64, region: &Region) {
        let (p, dir) = step_mobility(self.position, self.speed_kmh, self.direction, dt_ms, region);
        self.position = p;
        self.direction = dir;
    }
}

/// Drops `ues_per_sector` UEs in every sector.
///
/// With picos, each UE picks one of its sector's hotspots uniformly and lands
/// uniformly in that disc (resampled until inside the simulation box).
/// Macro-only topologies drop uniformly over the sector wedge. The serving
/// cell is left at cell 0; the engine associates by biased RSRP once the
/// channel exists.
pub fn drop_ues<R: Rng + ?Sized>(
    topology: &Topology,
    config: &ScenarioConfig,
    cell_count: usize,
    history_len: usize,
    rng: &mut R,
) -> Vec<UeState> {
    let velocities = config.effective_velocity_set();
    let mut ues = Vec::new();
    for (site_idx, site) in topology.macro_sites.iter().enumerate() {
        for (sector, &boresight) in site.sector_boresights.iter().enumerate() {
            let hotspots: Vec<Point> = topology
                .picos
                .iter()
                .filter(|p| p.site == site_idx && p.sector == sector)
                .map(|p| p.position)
                .collect();
            for _ in 0..config.ues_per_sector {
                let position = match hotspots.choose(rng) {
                    Some(&centre) => loop {
                        let p = sample_in_disc(rng, centre, topology.hotspot_radius_m);
                        if topology.region.contains(&p) {
                            break p;
                        }
                    },
                    None => sample_in_wedge(rng, site.position, boresight, topology.cell_radius_m()),
                };
                let speed_kmh = *velocities.choose(rng).expect("velocity set validated non-empty");
                let direction = rng.random_range(0.0..TAU);
                ues.push(UeState::new(UeId(ues.len()), position, speed_kmh, direction, cell_count, history_len));
            }
        }
    }
    ues
}

/// Straight-line move by `speed·dt` with specular reflection at the box.
///
/// Returns the new position and heading. The heading is returned untouched
/// (bit-identical) when no wall is hit.
pub fn step_mobility(position: Point, speed_kmh: f64, direction: f64, dt_ms: f64, region: &Region) -> (Point, f64) {
    debug_assert!(dt_ms > 0.0);
    let dist = speed_kmh / 3.6 * dt_ms * 1e-3;
    let mut x = position.x + dist * direction.cos();
    let mut y = position.y + dist * direction.sin();

    let mut flip_x = false;
    let mut flip_y = false;
    while x < region.min.x || x > region.max.x {
        x = if x < region.min.x { 2.0 * region.min.x - x } else { 2.0 * region.max.x - x };
        flip_x = !flip_x;
    }
    while y < region.min.y || y > region.max.y {
        y = if y < region.min.y { 2.0 * region.min.y - y } else { 2.0 * region.max.y - y };
        flip_y = !flip_y;
    }
    if !flip_x && !flip_y {
        return (Point::new(x, y), direction);
    }
    let mut dir = direction;
    if flip_x {
        dir = PI - dir;
    }
    if flip_y {
        dir = -dir;
    }
    dir = dir.rem_euclid(TAU);
    if dir >= TAU {
        dir = 0.0;
    }
    (Point::new(x, y), dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use approx::assert_relative_eq;

    fn unit_box() -> Region {
        Region {
            min: Point::new(-100.0, -100.0),
            max: Point::new(100.0, 100.0),
        }
    }

    #[test]
    fn one_pico_per_sector_respects_macro_distance() {
        let cfg = ScenarioConfig::default();
        let topo = build_topology(&cfg, &mut stream(1, Stream::Topology)).unwrap();
        assert_eq!(topo.picos.len(), 3);
        assert_eq!(topo.cells().len(), 6);
        for p in &topo.picos {
            assert!(p.position.distance(&topo.macro_sites[0].position) >= 75.0);
            assert!(topo.sector_contains(p.site, p.sector, &p.position));
        }
    }

    #[test]
    fn macro_only_topology_is_valid() {
        let cfg = ScenarioConfig {
            picos_per_sector: 0,
            ..Default::default()
        };
        let topo = build_topology(&cfg, &mut stream(1, Stream::Topology)).unwrap();
        assert!(topo.picos.is_empty());
        assert_eq!(topo.cells().len(), 3);
        let ues = drop_ues(&topo, &cfg, 3, 1, &mut stream(1, Stream::Drop));
        assert_eq!(ues.len(), 90);
        for u in &ues {
            assert!(topo.region.contains(&u.position));
        }
    }

    #[test]
    fn impossible_separation_names_constraint() {
        let cfg = ScenarioConfig {
            picos_per_sector: 3,
            min_pico_pico_distance_m: 400.0,
            max_placement_attempts: 200,
            ..Default::default()
        };
        match build_topology(&cfg, &mut stream(1, Stream::Topology)) {
            Err(ConfigError::Placement { constraint, .. }) => {
                assert_eq!(constraint, "scenario.min_pico_pico_distance_m")
            }
            other => panic!("expected placement error, got {other:?}"),
        }
        let cfg = ScenarioConfig {
            min_macro_pico_distance_m: 1000.0,
            max_placement_attempts: 200,
            ..Default::default()
        };
        match build_topology(&cfg, &mut stream(1, Stream::Topology)) {
            Err(ConfigError::Placement { constraint, .. }) => {
                assert_eq!(constraint, "scenario.min_macro_pico_distance_m")
            }
            other => panic!("expected placement error, got {other:?}"),
        }
    }

    #[test]
    fn ues_land_in_hotspots_with_allowed_speeds() {
        let cfg = ScenarioConfig::default();
        let topo = build_topology(&cfg, &mut stream(3, Stream::Topology)).unwrap();
        let ues = drop_ues(&topo, &cfg, topo.cells().len(), 1, &mut stream(3, Stream::Drop));
        assert_eq!(ues.len(), 90);
        for u in &ues {
            let near = topo.hotspot_centers().any(|c| c.distance(&u.position) <= 60.0 + 1e-9);
            assert!(near, "{:?} outside every hotspot", u.position);
            assert!([3.0, 30.0, 60.0, 120.0].contains(&u.speed_kmh));
            assert!((0.0..TAU).contains(&u.direction));
        }
    }

    #[test]
    fn fixed_velocity_overrides_set() {
        let cfg = ScenarioConfig {
            fixed_velocity_kmh: Some(60.0),
            ues_per_sector: 1,
            ..Default::default()
        };
        let topo = build_topology(&cfg, &mut stream(3, Stream::Topology)).unwrap();
        let ues = drop_ues(&topo, &cfg, topo.cells().len(), 1, &mut stream(3, Stream::Drop));
        assert_eq!(ues.len(), 3);
        assert!(ues.iter().all(|u| u.speed_kmh == 60.0));
    }

    #[test]
    fn same_seed_same_drop() {
        let cfg = ScenarioConfig::default();
        let t1 = build_topology(&cfg, &mut stream(9, Stream::Topology)).unwrap();
        let t2 = build_topology(&cfg, &mut stream(9, Stream::Topology)).unwrap();
        assert_eq!(t1, t2);
        let a = drop_ues(&t1, &cfg, 6, 1, &mut stream(9, Stream::Drop));
        let b = drop_ues(&t2, &cfg, 6, 1, &mut stream(9, Stream::Drop));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.position.x.to_bits(), y.position.x.to_bits());
            assert_eq!(x.position.y.to_bits(), y.position.y.to_bits());
            assert_eq!(x.direction.to_bits(), y.direction.to_bits());
        }
    }

    #[test]
    fn displacement_matches_speed() {
        let r = unit_box();
        let (p, d) = step_mobility(Point::default(), 3.0, 0.0, 1.0, &r);
        assert_relative_eq!(p.x, 3.0 / 3.6 * 1e-3, max_relative = 1e-12);
        assert_eq!(d, 0.0);
        let (p, _) = step_mobility(Point::default(), 120.0, 0.0, 1000.0, &r);
        assert_relative_eq!(p.x, 33.333_333_333_333_336, max_relative = 1e-12);
    }

    #[test]
    fn reflects_off_walls() {
        let r = unit_box();
        let (p, d) = step_mobility(Point::new(99.0, 0.0), 36.0, 0.0, 300.0, &r);
        // 3 m travel, 1 m to the wall: bounce back 2 m.
        assert_relative_eq!(p.x, 98.0, epsilon = 1e-9);
        assert_relative_eq!(d, PI, epsilon = 1e-12);
        let (p, d) = step_mobility(Point::new(0.0, -99.5), 36.0, 3.0 * PI / 2.0, 100.0, &r);
        assert_relative_eq!(p.y, -99.5, epsilon = 1e-9);
        assert_relative_eq!(d, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn direction_untouched_without_wall_hit() {
        let r = unit_box();
        let dir = 1.234_567;
        let (_, d) = step_mobility(Point::default(), 60.0, dir, 1.0, &r);
        assert_eq!(d.to_bits(), dir.to_bits());
    }

    proptest::proptest! {
        #[test]
        fn positions_stay_inside_and_speed_unchanged(
            x in -100.0f64..100.0, y in -100.0f64..100.0,
            dir in 0.0f64..TAU, speed in proptest::sample::select(vec![3.0, 30.0, 60.0, 120.0, 2000.0]),
            dt in 1.0f64..5000.0,
        ) {
            let r = unit_box();
            let mut ue_pos = Point::new(x, y);
            let mut heading = dir;
            for _ in 0..20 {
                let (p, d) = step_mobility(ue_pos, speed, heading, dt, &r);
                proptest::prop_assert!(r.contains(&p));
                proptest::prop_assert!((0.0..TAU).contains(&d));
                ue_pos = p;
                heading = d;
            }
        }
    }
}
