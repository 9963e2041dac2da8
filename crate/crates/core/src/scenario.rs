//! Network geometry, cell placement, user population and the
//! straight-line mobility model.
//!
//! A scenario consists of `M` macrocells (band F1) each hosting `N`
//! phantom cells (band F2). Phantom placement is deterministic: an
//! apartment grid of square rooms for the indoor case (one phantom per
//! room, walls on the grid lines) and two concentric rings for the
//! outdoor case. Users move on straight lines at constant speed and are
//! specularly reflected at the region boundary.
//!
//! Indoor users live inside the apartment blocks (that is the zone the
//! indoor case models); outdoor users roam the union of the macro discs.

use crate::error::Error;
use crate::geom::{reflect, segments_properly_intersect, Disc, Point, Rect, Region, Segment};
use crate::numfmt::sig9;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// ChaCha stream ids giving each generation phase its own substream of
/// the scenario seed.
const STREAM_TOPOLOGY: u64 = 1;
const STREAM_USERS: u64 = 2;
/// Stream used by the engine for per-step shadowing; reserved here so all
/// stream ids live in one place.
pub const STREAM_SHADOWING: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Indoor,
    Outdoor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Macro,
    Phantom,
}

/// Frequency band: macros transmit on F1, phantoms on F2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    F1,
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Open,
    Closed,
}

/// Static description of one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub id: u32,
    pub kind: CellKind,
    /// Id of the covering macrocell; `None` for macros themselves.
    pub parent_macro: Option<u32>,
    pub center: Point,
    pub radius_m: f64,
    pub tx_power_dbm: f64,
    pub band: Band,
    /// Maximum number of simultaneously served users.
    pub capacity: u32,
    pub access_mode: AccessMode,
    /// Sorted user ids allowed on a closed phantom; empty otherwise.
    pub subscribers: Vec<u32>,
}

impl CellSpec {
    pub fn is_macro(&self) -> bool {
        self.kind == CellKind::Macro
    }

    pub fn is_phantom(&self) -> bool {
        self.kind == CellKind::Phantom
    }

    /// Access indicator a(i,j): open cells admit everyone, closed cells
    /// admit subscribers only. Macros are always open.
    pub fn access_allowed(&self, user: u32) -> bool {
        match self.access_mode {
            AccessMode::Open => true,
            AccessMode::Closed => self.subscribers.binary_search(&user).is_ok(),
        }
    }

    pub fn disc(&self) -> Disc {
        Disc::new(self.center, self.radius_m)
    }
}

/// One mobile user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    pub id: u32,
    pub position: Point,
    /// Heading in radians, kept in `[0, 2π)`.
    pub heading: f64,
    /// Constant for the user's lifetime, m/s.
    pub speed: f64,
    pub macro_link: Option<u32>,
    pub phantom_link: Option<u32>,
}

/// Scenario parameters. Case-specific constructors fill in the standard
/// indoor/outdoor defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub case: Case,
    pub num_macros: u32,
    pub phantoms_per_macro: u32,
    pub num_users: u32,
    /// (min, max) user speed in m/s; each user draws uniformly.
    pub speed_range_mps: (f64, f64),
    pub macro_radius_m: f64,
    pub phantom_radius_m: f64,
    /// Distance between neighbouring macro centers; defaults to tangent
    /// discs (2R).
    pub macro_spacing_m: f64,
    pub macro_tx_dbm: f64,
    pub phantom_tx_dbm: f64,
    pub macro_capacity: u32,
    pub phantom_capacity: u32,
    /// Probability that a given user subscribes to a given closed
    /// phantom.
    pub subscriber_fraction: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn outdoor() -> Self {
        ScenarioConfig {
            case: Case::Outdoor,
            num_macros: 2,
            phantoms_per_macro: 8,
            num_users: 200,
            speed_range_mps: (0.0, 8.3),
            macro_radius_m: 1000.0,
            phantom_radius_m: 250.0,
            macro_spacing_m: 2000.0,
            macro_tx_dbm: 43.0,
            phantom_tx_dbm: 31.5,
            macro_capacity: 1000,
            phantom_capacity: 10,
            subscriber_fraction: 0.10,
            seed: 42,
        }
    }

    pub fn indoor() -> Self {
        ScenarioConfig {
            case: Case::Indoor,
            phantoms_per_macro: 12,
            phantom_radius_m: 50.0,
            speed_range_mps: (0.0, 4.1),
            phantom_tx_dbm: 23.0,
            ..ScenarioConfig::outdoor()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_macros < 1 {
            return Err(Error::config("num_macros must be at least 1"));
        }
        if self.macro_radius_m <= 0.0 || self.phantom_radius_m <= 0.0 {
            return Err(Error::config("cell radii must be positive"));
        }
        if self.macro_spacing_m < 0.0 {
            return Err(Error::config("macro_spacing_m must be non-negative"));
        }
        if self.macro_capacity < 1 || self.phantom_capacity < 1 {
            return Err(Error::config("cell capacities must be at least 1"));
        }
        let (lo, hi) = self.speed_range_mps;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::config("speed range must satisfy 0 <= min <= max"));
        }
        if !(0.0..=1.0).contains(&self.subscriber_fraction) {
            return Err(Error::config("subscriber_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn total_cells(&self) -> u32 {
        self.num_macros * (self.phantoms_per_macro + 1)
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::outdoor()
    }
}

fn macro_centers(config: &ScenarioConfig) -> Vec<Point> {
    (0..config.num_macros)
        .map(|m| Point::new(m as f64 * config.macro_spacing_m, 0.0))
        .collect()
}

/// Deterministic phantom layout for one macro plus, for the indoor case,
/// the wall segments and the apartment-block rectangle.
struct MacroLayout {
    phantom_centers: Vec<Point>,
    walls: Vec<Segment>,
    block: Option<Rect>,
}

fn layout_for_macro(config: &ScenarioConfig, center: Point) -> Result<MacroLayout> {
    let n = config.phantoms_per_macro as usize;
    let r = config.phantom_radius_m;
    let big_r = config.macro_radius_m;
    if n == 0 {
        return Ok(MacroLayout {
            phantom_centers: Vec::new(),
            walls: Vec::new(),
            block: None,
        });
    }
    match config.case {
        Case::Indoor => {
            // Apartment grid of square rooms with 2r pitch, one phantom at
            // each room center, walls on the grid lines.
            let cols = (n as f64).sqrt().ceil() as usize;
            let rows = n.div_ceil(cols);
            let half_w = cols as f64 * r;
            let half_h = rows as f64 * r;
            if half_w.hypot(half_h) > big_r {
                return Err(Error::config(
                    "indoor apartment grid does not fit inside the macro disc",
                ));
            }
            let mut centers = Vec::with_capacity(n);
            'outer: for row in 0..rows {
                for col in 0..cols {
                    if centers.len() == n {
                        break 'outer;
                    }
                    centers.push(Point::new(
                        center.x - half_w + (2 * col + 1) as f64 * r,
                        center.y - half_h + (2 * row + 1) as f64 * r,
                    ));
                }
            }
            let mut walls = Vec::with_capacity(cols + rows + 2);
            for k in 0..=cols {
                let x = center.x - half_w + (2 * k) as f64 * r;
                walls.push(Segment::new(
                    Point::new(x, center.y - half_h),
                    Point::new(x, center.y + half_h),
                ));
            }
            for k in 0..=rows {
                let y = center.y - half_h + (2 * k) as f64 * r;
                walls.push(Segment::new(
                    Point::new(center.x - half_w, y),
                    Point::new(center.x + half_w, y),
                ));
            }
            let block = Rect::new(
                Point::new(center.x - half_w, center.y - half_h),
                Point::new(center.x + half_w, center.y + half_h),
            );
            Ok(MacroLayout {
                phantom_centers: centers,
                walls,
                block: Some(block),
            })
        }
        Case::Outdoor => {
            // Two concentric rings at 0.35R and 0.70R, roughly 3:5 split.
            let inner = ((3 * n + 4) / 8).clamp(1, n);
            let outer = n - inner;
            let mut centers = Vec::with_capacity(n);
            for k in 0..inner {
                let a = TAU * k as f64 / inner as f64;
                centers.push(center.add(Point::from_heading(a).scale(0.35 * big_r)));
            }
            for k in 0..outer {
                let a = TAU * (k as f64 + 0.5) / outer as f64;
                centers.push(center.add(Point::from_heading(a).scale(0.70 * big_r)));
            }
            for c in &centers {
                if c.distance(center) + r > big_r {
                    return Err(Error::config(
                        "outdoor phantom ring does not fit inside the macro disc",
                    ));
                }
            }
            Ok(MacroLayout {
                phantom_centers: centers,
                walls: Vec::new(),
                block: None,
            })
        }
    }
}

/// Build the full cell list: macros first (ids `0..M`), then phantoms in
/// macro-major order (ids `M..M(N+1)`). Each phantom draws its access
/// mode open/closed with probability 1/2 from the scenario seed; closed
/// phantoms draw a subscriber sample of the user population.
pub fn build_topology(config: &ScenarioConfig) -> Result<Vec<CellSpec>> {
    config.validate()?;
    let centers = macro_centers(config);
    let mut cells: Vec<CellSpec> = Vec::with_capacity(config.total_cells() as usize);
    for (m, &center) in centers.iter().enumerate() {
        cells.push(CellSpec {
            id: m as u32,
            kind: CellKind::Macro,
            parent_macro: None,
            center,
            radius_m: config.macro_radius_m,
            tx_power_dbm: config.macro_tx_dbm,
            band: Band::F1,
            capacity: config.macro_capacity,
            access_mode: AccessMode::Open,
            subscribers: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(STREAM_TOPOLOGY);
    let mut next_id = config.num_macros;
    for (m, &center) in centers.iter().enumerate() {
        let layout = layout_for_macro(config, center)?;
        for pc in layout.phantom_centers {
            let open: bool = rng.random();
            let subscribers = if open {
                Vec::new()
            } else {
                (0..config.num_users)
                    .filter(|_| rng.random::<f64>() < config.subscriber_fraction)
                    .collect()
            };
            cells.push(CellSpec {
                id: next_id,
                kind: CellKind::Phantom,
                parent_macro: Some(m as u32),
                center: pc,
                radius_m: config.phantom_radius_m,
                tx_power_dbm: config.phantom_tx_dbm,
                band: Band::F2,
                capacity: config.phantom_capacity,
                access_mode: if open {
                    AccessMode::Open
                } else {
                    AccessMode::Closed
                },
                subscribers,
            });
            next_id += 1;
        }
    }
    Ok(cells)
}

/// Wall segments of the scenario (indoor apartment grids; empty outdoors).
pub fn wall_segments(config: &ScenarioConfig) -> Result<Vec<Segment>> {
    config.validate()?;
    let mut walls = Vec::new();
    for center in macro_centers(config) {
        walls.extend(layout_for_macro(config, center)?.walls);
    }
    Ok(walls)
}

/// The zone users inhabit: the union of the macro discs outdoors, the
/// union of the apartment blocks indoors (falling back to the discs when
/// an indoor scenario has no phantoms and hence no building).
pub fn region_for(config: &ScenarioConfig) -> Result<Region> {
    config.validate()?;
    let discs = || {
        Region::Discs(
            macro_centers(config)
                .into_iter()
                .map(|c| Disc::new(c, config.macro_radius_m))
                .collect(),
        )
    };
    match config.case {
        Case::Outdoor => Ok(discs()),
        Case::Indoor => {
            let mut blocks = Vec::new();
            for center in macro_centers(config) {
                if let Some(b) = layout_for_macro(config, center)?.block {
                    blocks.push(b);
                }
            }
            if blocks.is_empty() {
                Ok(discs())
            } else {
                Ok(Region::Rects(blocks))
            }
        }
    }
}

/// Spawn `num_users` users uniformly over the scenario region with
/// uniform headings and speeds, reproducibly under the scenario seed.
/// No links are established yet.
pub fn spawn_users(config: &ScenarioConfig, _topology: &[CellSpec]) -> Result<Vec<UserState>> {
    config.validate()?;
    let region = region_for(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(STREAM_USERS);
    let mut users = Vec::with_capacity(config.num_users as usize);
    for id in 0..config.num_users {
        let position = sample_uniform(&region, &mut rng);
        let heading = rng.random::<f64>() * TAU;
        let (lo, hi) = config.speed_range_mps;
        let speed = lo + rng.random::<f64>() * (hi - lo);
        users.push(UserState {
            id,
            position,
            heading,
            speed,
            macro_link: None,
            phantom_link: None,
        });
    }
    Ok(users)
}

/// Uniform sample over a union of shapes: pick a member by area, sample
/// inside it, then accept with probability 1/(#members containing the
/// point) so overlap regions are not over-weighted.
fn sample_uniform(region: &Region, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let p = match region {
            Region::Discs(ds) => {
                let d = &ds[pick_by_area(ds.iter().map(Disc::area), rng)];
                let rr = d.radius * rng.random::<f64>().sqrt();
                let a = TAU * rng.random::<f64>();
                d.center.add(Point::from_heading(a).scale(rr))
            }
            Region::Rects(rs) => {
                let r = &rs[pick_by_area(rs.iter().map(Rect::area), rng)];
                Point::new(
                    r.min.x + rng.random::<f64>() * (r.max.x - r.min.x),
                    r.min.y + rng.random::<f64>() * (r.max.y - r.min.y),
                )
            }
        };
        let count = match region {
            Region::Discs(ds) => ds.iter().filter(|d| d.contains(p)).count(),
            Region::Rects(rs) => rs.iter().filter(|r| r.contains(p)).count(),
        };
        if count <= 1 || rng.random::<f64>() < 1.0 / count as f64 {
            return p;
        }
    }
}

fn pick_by_area(areas: impl Iterator<Item = f64>, rng: &mut ChaCha8Rng) -> usize {
    let areas: Vec<f64> = areas.collect();
    let total: f64 = areas.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, a) in areas.iter().enumerate() {
        if u < *a {
            return i;
        }
        u -= a;
    }
    areas.len() - 1
}

const MAX_REFLECTIONS: usize = 16;

/// Advance a user by `dt` seconds along its heading, specularly
/// reflecting at the region boundary. Speed is preserved exactly.
pub fn advance_user(user: &UserState, dt: f64, region: &Region) -> UserState {
    debug_assert!(dt > 0.0);
    let mut out = *user;
    let mut remaining = user.speed * dt;
    if remaining == 0.0 {
        return out;
    }
    let mut pos = region.clamp_inside(user.position);
    let mut dir = Point::from_heading(user.heading);
    for _ in 0..MAX_REFLECTIONS {
        let (t_exit, who) = region.exit_along(pos, dir);
        if remaining < t_exit {
            pos = pos.add(dir.scale(remaining));
            remaining = 0.0;
            break;
        }
        pos = pos.add(dir.scale(t_exit));
        remaining -= t_exit;
        dir = match region.outward_normal(who, pos) {
            Some(n) if dir.dot(n) > 0.0 => reflect(dir, n),
            Some(_) => dir,
            None => dir.scale(-1.0), // rectangle corner: reverse
        };
        // Step a hair off the boundary so the next exit query sees an
        // interior point.
        pos = region.clamp_inside(pos.add(dir.scale(1e-9)));
    }
    out.position = region.clamp_inside(pos);
    out.heading = dir.heading();
    out
}

/// Number of wall segments strictly crossed by the open segment p1–p2.
/// Endpoint touching and running along a wall count as no crossing.
pub fn count_walls(p1: Point, p2: Point, walls: &[Segment]) -> u32 {
    let link = Segment::new(p1, p2);
    walls
        .iter()
        .filter(|w| segments_properly_intersect(link, **w))
        .count() as u32
}

/// Wall list preprocessed for fast strict-crossing counts. Axis-aligned
/// walls (the apartment grids are entirely axis-aligned) take a cheap
/// coordinate test; anything else falls back to the generic predicate.
#[derive(Debug, Clone, Default)]
pub struct WallSet {
    /// (x, y_min, y_max)
    vertical: Vec<(f64, f64, f64)>,
    /// (y, x_min, x_max)
    horizontal: Vec<(f64, f64, f64)>,
    general: Vec<Segment>,
    segments: Vec<Segment>,
}

impl WallSet {
    pub fn new(segments: Vec<Segment>) -> Self {
        let mut set = WallSet {
            segments: segments.clone(),
            ..WallSet::default()
        };
        for s in segments {
            if s.a.x == s.b.x {
                let (lo, hi) = minmax(s.a.y, s.b.y);
                set.vertical.push((s.a.x, lo, hi));
            } else if s.a.y == s.b.y {
                let (lo, hi) = minmax(s.a.x, s.b.x);
                set.horizontal.push((s.a.y, lo, hi));
            } else {
                set.general.push(s);
            }
        }
        set
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn count(&self, p1: Point, p2: Point) -> u32 {
        let mut n = 0u32;
        for &(x, lo, hi) in &self.vertical {
            if (p1.x - x) * (p2.x - x) < 0.0 {
                let t = (x - p1.x) / (p2.x - p1.x);
                let y = p1.y + t * (p2.y - p1.y);
                if y > lo && y < hi {
                    n += 1;
                }
            }
        }
        for &(y, lo, hi) in &self.horizontal {
            if (p1.y - y) * (p2.y - y) < 0.0 {
                let t = (y - p1.y) / (p2.y - p1.y);
                let x = p1.x + t * (p2.x - p1.x);
                if x > lo && x < hi {
                    n += 1;
                }
            }
        }
        if !self.general.is_empty() {
            n += count_walls(p1, p2, &self.general);
        }
        n
    }
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Scenario world: config plus everything derived from it once.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub cells: Vec<CellSpec>,
    pub walls: WallSet,
    pub region: Region,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Scenario> {
        let cells = build_topology(&config)?;
        let walls = WallSet::new(wall_segments(&config)?);
        let region = region_for(&config)?;
        Ok(Scenario {
            config,
            cells,
            walls,
            region,
        })
    }

    pub fn num_macros(&self) -> u32 {
        self.config.num_macros
    }
}

/// Topology dump: `cell_id,kind,parent,x,y,radius,power_dbm,capacity,access_mode`.
pub fn topology_csv(cells: &[CellSpec]) -> String {
    let mut out = String::from("cell_id,kind,parent,x,y,radius,power_dbm,capacity,access_mode\n");
    for c in cells {
        let kind = match c.kind {
            CellKind::Macro => "macro",
            CellKind::Phantom => "phantom",
        };
        let parent = c.parent_macro.map(|p| p.to_string()).unwrap_or_default();
        let access = match c.access_mode {
            AccessMode::Open => "open",
            AccessMode::Closed => "closed",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.id,
            kind,
            parent,
            sig9(c.center.x),
            sig9(c.center.y),
            sig9(c.radius_m),
            sig9(c.tx_power_dbm),
            c.capacity,
            access
        ));
    }
    out
}
