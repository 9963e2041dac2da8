//! Propagation, shadowing and SINR.
//!
//! Path loss follows the standard dual-tier models: `15.3 + 37.6·log10(d)`
//! for macros, `max(15.3 + 37.6·log10(d), 3 + 20·log10(d)) + L_ow` for
//! outdoor phantoms and `37 + 20·log10(d)` for indoor phantoms, with
//! `q·w` wall loss and `L_ow` penetration loss added per case. Shadowing
//! is zero-mean log-normal (a Gaussian in dB), sampled independently per
//! link and step. SINR is `h·p / (I + σ²)` with everything in linear mW.
//!
//! Two interference models are provided. `CoTier` (the default) sums
//! interference over same-band cells only, reflecting the two-band
//! architecture where F1 and F2 do not interfere. `PaperLiteral` sums
//! over every other cell of the serving cell's macro region regardless of
//! band.

use crate::error::Error;
use crate::geom::Point;
use crate::scenario::{Case, CellKind, CellSpec, UserState, WallSet};
use crate::Result;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceModel {
    /// Same-band interference only: macros interfere with macros,
    /// phantoms with phantoms.
    CoTier,
    /// Every other cell of the serving cell's macro region interferes,
    /// both bands mixed.
    PaperLiteral,
}

/// Propagation model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationParams {
    /// Outdoor-to-indoor penetration loss, dB.
    pub l_ow_db: f64,
    /// Per-wall partition loss, dB.
    pub wall_loss_db: f64,
    /// Standard deviation of the shadowing term, dB.
    pub shadow_sigma_db: f64,
    /// Additive noise power, dBm.
    pub noise_power_dbm: f64,
    pub interference_model: InterferenceModel,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            l_ow_db: 10.0,
            wall_loss_db: 5.0,
            shadow_sigma_db: 6.0,
            noise_power_dbm: -170.0,
            interference_model: InterferenceModel::CoTier,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if self.shadow_sigma_db < 0.0 {
            return Err(Error::config("shadow_sigma_db must be non-negative"));
        }
        if self.l_ow_db < 0.0 || self.wall_loss_db < 0.0 {
            return Err(Error::config("loss terms must be non-negative"));
        }
        Ok(())
    }
}

/// One user-cell link realization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkSample {
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    /// `10^(-(path_loss_db + shadowing_db)/10)`
    pub gain_linear: f64,
    /// `gain_linear` times the transmit power in mW.
    pub received_power_mw: f64,
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    exp10(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[inline]
fn exp10(x: f64) -> f64 {
    (x * LN_10).exp()
}

/// Distances below 1 m are clamped so a user standing at a BTS does not
/// hit the log singularity.
const MIN_DISTANCE_M: f64 = 1.0;

/// Deterministic path loss in dB; shadowing is not included here.
/// `walls` is the wall count q, used by the indoor rows only.
pub fn path_loss_db(
    kind: CellKind,
    case: Case,
    distance_m: f64,
    walls: u32,
    params: &PropagationParams,
) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    let log_d = d.log10();
    match (kind, case) {
        (CellKind::Macro, Case::Outdoor) => 15.3 + 37.6 * log_d,
        (CellKind::Phantom, Case::Outdoor) => {
            (15.3 + 37.6 * log_d).max(3.0 + 20.0 * log_d) + params.l_ow_db
        }
        (CellKind::Macro, Case::Indoor) => {
            15.3 + 37.6 * log_d + walls as f64 * params.wall_loss_db + params.l_ow_db
        }
        (CellKind::Phantom, Case::Indoor) => {
            37.0 + 20.0 * log_d + walls as f64 * params.wall_loss_db
        }
    }
}

/// One shadowing draw in dB: `N(0, sigma_db)`.
pub fn sample_shadowing(sigma_db: f64, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sigma_db
}

/// Dense (user, cell) matrix of link samples.
#[derive(Debug, Clone)]
pub struct LinkMatrix {
    pub num_users: usize,
    pub num_cells: usize,
    samples: Vec<LinkSample>,
}

impl LinkMatrix {
    pub fn new(num_users: usize, num_cells: usize) -> Self {
        LinkMatrix {
            num_users,
            num_cells,
            samples: vec![LinkSample::default(); num_users * num_cells],
        }
    }

    /// Test/debug constructor from raw received powers (mW); loss fields
    /// are back-filled assuming 0 dBm transmit power.
    pub fn from_received_powers(num_users: usize, num_cells: usize, rx_mw: &[f64]) -> Self {
        assert_eq!(rx_mw.len(), num_users * num_cells);
        let samples = rx_mw
            .iter()
            .map(|&p| LinkSample {
                path_loss_db: -mw_to_dbm(p),
                shadowing_db: 0.0,
                gain_linear: p,
                received_power_mw: p,
            })
            .collect();
        LinkMatrix {
            num_users,
            num_cells,
            samples,
        }
    }

    #[inline]
    pub fn get(&self, user: usize, cell: usize) -> &LinkSample {
        &self.samples[user * self.num_cells + cell]
    }

    #[inline]
    fn get_mut(&mut self, user: usize, cell: usize) -> &mut LinkSample {
        &mut self.samples[user * self.num_cells + cell]
    }

    /// Recompute every link for the current user positions, drawing fresh
    /// shadowing per link in (user-major, cell-minor) order. The draw
    /// count per call is fixed by the matrix shape, so replaying a seeded
    /// RNG reproduces the exact same fading trace regardless of any
    /// policy decisions taken in between.
    #[allow(clippy::too_many_arguments)]
    pub fn fill(
        &mut self,
        cells: &[CellSpec],
        tx_mw: &[f64],
        users: &[UserState],
        walls: &WallSet,
        case: Case,
        params: &PropagationParams,
        rng: &mut ChaCha8Rng,
    ) {
        debug_assert_eq!(self.num_users, users.len());
        debug_assert_eq!(self.num_cells, cells.len());
        let count_walls = case == Case::Indoor && !walls.is_empty();
        for (i, user) in users.iter().enumerate() {
            for (j, cell) in cells.iter().enumerate() {
                let d = user.position.distance(cell.center);
                let q = if count_walls {
                    walls.count(user.position, cell.center)
                } else {
                    0
                };
                let pl = path_loss_db(cell.kind, case, d, q, params);
                let sh = sample_shadowing(params.shadow_sigma_db, rng);
                let gain = exp10(-(pl + sh) / 10.0);
                *self.get_mut(i, j) = LinkSample {
                    path_loss_db: pl,
                    shadowing_db: sh,
                    gain_linear: gain,
                    received_power_mw: tx_mw[j] * gain,
                };
            }
        }
    }
}

/// Per-topology constants shared by the SINR routines.
#[derive(Debug, Clone)]
pub struct RadioContext {
    pub tx_mw: Vec<f64>,
    /// Macro region id of each cell: the cell itself for macros, the
    /// parent macro for phantoms.
    pub region_of: Vec<u32>,
    pub num_macros: usize,
    pub noise_mw: f64,
}

impl RadioContext {
    pub fn new(cells: &[CellSpec], params: &PropagationParams) -> Self {
        let tx_mw = cells.iter().map(|c| dbm_to_mw(c.tx_power_dbm)).collect();
        let region_of = cells
            .iter()
            .map(|c| c.parent_macro.unwrap_or(c.id))
            .collect();
        let num_macros = cells.iter().filter(|c| c.is_macro()).count();
        RadioContext {
            tx_mw,
            region_of,
            num_macros,
            noise_mw: dbm_to_mw(params.noise_power_dbm),
        }
    }
}

/// Linear SINR of `user` served by `serving`, per the configured
/// interference model.
pub fn sinr(
    user: u32,
    serving: u32,
    cells: &[CellSpec],
    links: &LinkMatrix,
    params: &PropagationParams,
) -> Result<f64> {
    let j = serving as usize;
    if j >= cells.len() {
        return Err(Error::UnknownCell(serving));
    }
    let i = user as usize;
    if i >= links.num_users {
        return Err(Error::Data(format!("user {user} out of range")));
    }
    let noise = dbm_to_mw(params.noise_power_dbm);
    let own = links.get(i, j).received_power_mw;
    let interference: f64 = match params.interference_model {
        InterferenceModel::CoTier => cells
            .iter()
            .enumerate()
            .filter(|(k, c)| *k != j && c.band == cells[j].band)
            .map(|(k, _)| links.get(i, k).received_power_mw)
            .sum(),
        InterferenceModel::PaperLiteral => {
            let region = cells[j].parent_macro.unwrap_or(cells[j].id);
            cells
                .iter()
                .enumerate()
                .filter(|(k, c)| *k != j && c.parent_macro.unwrap_or(c.id) == region)
                .map(|(k, _)| links.get(i, k).received_power_mw)
                .sum()
        }
    };
    Ok(own / (interference + noise))
}

/// Full SINR matrix for one step, plus per-user phantom-disc membership
/// (used for connection-state labelling).
#[derive(Debug, Clone)]
pub struct SinrSnapshot {
    pub num_users: usize,
    pub num_cells: usize,
    eta: Vec<f64>,
    in_phantom_disc: Vec<bool>,
}

impl SinrSnapshot {
    pub fn new(num_users: usize, num_cells: usize) -> Self {
        SinrSnapshot {
            num_users,
            num_cells,
            eta: vec![0.0; num_users * num_cells],
            in_phantom_disc: vec![false; num_users],
        }
    }

    #[inline]
    pub fn eta(&self, user: u32, cell: u32) -> f64 {
        self.eta[user as usize * self.num_cells + cell as usize]
    }

    pub fn in_phantom_coverage(&self, user: u32) -> bool {
        self.in_phantom_disc[user as usize]
    }

    /// Compute η for every pair from the link matrix using running band
    /// and region sums, and refresh disc membership from user positions.
    /// Algebraically identical to calling [`sinr`] per pair.
    pub fn compute(
        &mut self,
        cells: &[CellSpec],
        ctx: &RadioContext,
        links: &LinkMatrix,
        users: &[UserState],
        model: InterferenceModel,
    ) {
        debug_assert_eq!(self.num_users, links.num_users);
        debug_assert_eq!(self.num_cells, cells.len());
        let noise = ctx.noise_mw;
        let mut region_sum = vec![0.0f64; ctx.num_macros.max(1)];
        for i in 0..self.num_users {
            match model {
                InterferenceModel::CoTier => {
                    let mut sum_f1 = 0.0;
                    let mut sum_f2 = 0.0;
                    for (j, cell) in cells.iter().enumerate() {
                        let p = links.get(i, j).received_power_mw;
                        if cell.is_macro() {
                            sum_f1 += p;
                        } else {
                            sum_f2 += p;
                        }
                    }
                    for (j, cell) in cells.iter().enumerate() {
                        let p = links.get(i, j).received_power_mw;
                        let band_sum = if cell.is_macro() { sum_f1 } else { sum_f2 };
                        self.eta[i * self.num_cells + j] = p / (band_sum - p + noise);
                    }
                }
                InterferenceModel::PaperLiteral => {
                    region_sum.fill(0.0);
                    for (j, _) in cells.iter().enumerate() {
                        region_sum[ctx.region_of[j] as usize] +=
                            links.get(i, j).received_power_mw;
                    }
                    for j in 0..cells.len() {
                        let p = links.get(i, j).received_power_mw;
                        let s = region_sum[ctx.region_of[j] as usize];
                        self.eta[i * self.num_cells + j] = p / (s - p + noise);
                    }
                }
            }
            self.in_phantom_disc[i] = cells
                .iter()
                .any(|c| c.is_phantom() && c.disc().contains(users[i].position));
        }
    }
}

/// Link-budget debug dump:
/// `user,cell,d_m,pl_db,shadow_db,rx_dbm,sinr_linear`.
pub fn link_trace_csv(
    cells: &[CellSpec],
    users: &[UserState],
    links: &LinkMatrix,
    snapshot: &SinrSnapshot,
) -> String {
    use crate::numfmt::sig9;
    let mut out = String::from("user,cell,d_m,pl_db,shadow_db,rx_dbm,sinr_linear\n");
    for user in users {
        for cell in cells {
            let s = links.get(user.id as usize, cell.id as usize);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                user.id,
                cell.id,
                sig9(user.position.distance(cell.center)),
                sig9(s.path_loss_db),
                sig9(s.shadowing_db),
                sig9(mw_to_dbm(s.received_power_mw)),
                sig9(snapshot.eta(user.id, cell.id)),
            ));
        }
    }
    out
}

/// Helper for tests: links plus snapshot computed in one go.
pub fn compute_links_and_snapshot(
    cells: &[CellSpec],
    users: &[UserState],
    walls: &WallSet,
    case: Case,
    params: &PropagationParams,
    rng: &mut ChaCha8Rng,
) -> (LinkMatrix, SinrSnapshot) {
    let ctx = RadioContext::new(cells, params);
    let mut links = LinkMatrix::new(users.len(), cells.len());
    links.fill(cells, &ctx.tx_mw, users, walls, case, params, rng);
    let mut snap = SinrSnapshot::new(users.len(), cells.len());
    snap.compute(cells, &ctx, &links, users, params.interference_model);
    (links, snap)
}
