//! Pre-estimates and the per-target alternating maximization over a
//! position grid.

use serde::{Deserialize, Serialize};

use super::assign::Association;
use super::covariance::CovarianceSet;
use super::likelihood::{loglik_client, RadarLikelihood};
use super::music::MusicPeaks;
use crate::channel::joint_steering;
use crate::linalg::CVector;
use crate::scene::{Geometry, Point, Rect, FIELD_LIMIT_DEG};
use crate::{Error, Result};

/// What the PWR knows about one target before localization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPreEstimate {
    /// Radar AoD at the AP.
    pub aod: f64,
    /// Radar AoA at the PWR.
    pub aoa: f64,
    /// MUSIC peak height; sets the processing order.
    pub peak_height: f64,
    /// Associated client index and its LoS AoD from the feedback.
    pub client: Option<usize>,
    pub client_aod: Option<f64>,
}

impl TargetPreEstimate {
    pub fn associated(&self) -> bool {
        self.client.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreEstimate {
    pub targets: Vec<TargetPreEstimate>,
    pub music_degenerate: bool,
    pub music_fallback: bool,
}

impl PreEstimate {
    /// Combines MUSIC peaks with the gated client association.
    pub fn from_music(peaks: &MusicPeaks, client_aods: &[f64], association: &Association) -> Self {
        let targets = peaks
            .peaks
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let client = association.target_client(k);
                TargetPreEstimate {
                    aod: p.aod,
                    aoa: p.aoa,
                    peak_height: p.height,
                    client,
                    client_aod: client.map(|u| client_aods[u]),
                }
            })
            .collect();
        PreEstimate { targets, music_degenerate: peaks.degenerate, music_fallback: peaks.fallback }
    }

    /// Pre-estimates from known angles, all with equal peak height.
    pub fn from_angles(angles: &[(f64, f64)]) -> Self {
        let targets = angles
            .iter()
            .map(|&(aod, aoa)| TargetPreEstimate { aod, aoa, peak_height: 1.0, client: None, client_aod: None })
            .collect();
        PreEstimate { targets, music_degenerate: false, music_fallback: false }
    }

    pub fn with_association(mut self, k: usize, client: usize, client_aod: f64) -> Self {
        self.targets[k].client = Some(client);
        self.targets[k].client_aod = Some(client_aod);
        self
    }

    pub fn without_association(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.targets {
            t.client = None;
            t.client_aod = None;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn angles(&self) -> Vec<(f64, f64)> {
        self.targets.iter().map(|t| (t.aod, t.aoa)).collect()
    }

    /// Processing order: descending peak height, ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.targets.len()).collect();
        idx.sort_by(|&a, &b| self.targets[b].peak_height.total_cmp(&self.targets[a].peak_height).then(a.cmp(&b)));
        idx
    }
}

/// Position search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub region: Rect,
    pub coarse_step: f64,
    /// Local refinement step; `None` keeps the coarse argmax.
    pub fine_step: Option<f64>,
    /// Half width of the refinement window.
    pub fine_half_width: f64,
    /// Passes stop once every target moved less than this.
    pub tolerance: f64,
    pub max_passes: usize,
    /// Exactly one pass over the targets.
    pub single_pass: bool,
    /// Continuous pattern search in (AoD, AoA) after the grid stages.
    #[serde(default)]
    pub polish: bool,
}

impl SearchConfig {
    pub fn for_region(region: Rect) -> Self {
        SearchConfig {
            region,
            coarse_step: 0.25,
            fine_step: Some(0.05),
            fine_half_width: 0.5,
            tolerance: 0.05,
            max_passes: 5,
            single_pass: false,
            polish: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.coarse_step) {
            return Err(Error::config(format!("coarse step must be positive, got {}", self.coarse_step)));
        }
        if let Some(f) = self.fine_step {
            if !positive(f) || !(self.fine_half_width >= 0.0) {
                return Err(Error::config("fine step and window must be positive"));
            }
        }
        if self.max_passes == 0 {
            return Err(Error::config("max_passes must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance must be non-negative"));
        }
        Ok(())
    }

    /// Coarse grid points, row-major from the lower-left corner.
    pub fn coarse_points(&self) -> Vec<Point> {
        let r = &self.region;
        let nx = axis_count(r.width(), self.coarse_step);
        let ny = axis_count(r.height(), self.coarse_step);
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(Point::new(r.x_min + ix as f64 * self.coarse_step, r.y_min + iy as f64 * self.coarse_step));
            }
        }
        out
    }

    fn fine_points(&self, center: &Point) -> Vec<Point> {
        let Some(step) = self.fine_step else {
            return Vec::new();
        };
        let n = (self.fine_half_width / step + 1e-9).floor() as i64;
        let mut out = Vec::new();
        for iy in -n..=n {
            for ix in -n..=n {
                let p = Point::new(center.x + ix as f64 * step, center.y + iy as f64 * step);
                if (ix != 0 || iy != 0) && self.region.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

const POLISH_START_STEP: f64 = 0.02;
const POLISH_MIN_STEP: f64 = 1e-6;

fn axis_count(len: f64, step: f64) -> usize {
    (len / step + 1e-9).floor() as usize + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub positions: Vec<Point>,
    /// Per-target objective at its last maximization.
    pub objectives: Vec<f64>,
    pub degenerate: bool,
    pub passes: usize,
    pub converged: bool,
}

struct Candidate {
    position: Point,
    aod: f64,
    aoa: f64,
    column: CVector,
}

/// Per-target decoupled maximization. Each target in turn is swept over the
/// grid with the others held at their current angles, and its angles are
/// replaced by those of the winning position before the next target.
/// With `use_clients` the associated client term is added.
pub fn alternating_summation(
    pre: &PreEstimate,
    covs: &CovarianceSet,
    geometry: &Geometry,
    config: &SearchConfig,
    use_clients: bool,
) -> Result<SearchOutcome> {
    config.validate()?;
    let k_total = pre.len();
    if k_total == 0 {
        return Ok(SearchOutcome { positions: vec![], objectives: vec![], degenerate: false, passes: 0, converged: true });
    }
    let (n_a, n_p, spacing) = (covs.n_tx, covs.n_rx, covs.spacing);
    let lik = RadarLikelihood::new(
        &covs.radar,
        covs.radar_noise_variance,
        covs.num_subcarriers,
        n_a,
        n_p,
        spacing,
    );
    let candidate = |p: Point| -> Option<Candidate> {
        let (aod, aoa) = geometry.angles_to(&p).ok()?;
        Some(Candidate { position: p, aod, aoa, column: joint_steering(aod, aoa, n_a, n_p, spacing) })
    };
    let coarse: Vec<Candidate> = config.coarse_points().into_iter().filter_map(candidate).collect();
    if coarse.is_empty() {
        return Err(Error::config("search region has no point in view of both arrays"));
    }

    let client_term = |k: usize, aod: f64| -> f64 {
        if !use_clients {
            return 0.0;
        }
        match pre.targets[k].client.and_then(|u| covs.client(u)) {
            Some(c) => loglik_client(aod, &c.matrix, covs.client_noise_variance, covs.num_subcarriers, c.n_rx, spacing),
            None => 0.0,
        }
    };

    let limit = FIELD_LIMIT_DEG.to_radians();
    let mut angles = pre.angles();
    let mut positions: Vec<Option<Point>> = angles.iter().map(|&(d, a)| geometry.triangulate(d, a).ok()).collect();
    let mut objectives = vec![f64::NEG_INFINITY; k_total];
    let mut degenerate = false;
    let order = pre.order();
    let max_passes = if config.single_pass { 1 } else { config.max_passes };
    let mut passes = 0;
    let mut converged = false;

    while passes < max_passes {
        passes += 1;
        let mut max_move: f64 = 0.0;
        for &k in &order {
            let fixed: Vec<(f64, f64)> = (0..k_total).filter(|&j| j != k).map(|j| angles[j]).collect();
            let prepared = lik.fix(&fixed);
            let score = |c: &Candidate| -> (f64, bool) {
                let (v, deg) = lik.evaluate_column(&prepared, &c.column);
                (v + client_term(k, c.aod), deg)
            };

            let mut best: Option<(f64, Point, f64, f64)> = None;
            for c in &coarse {
                let (v, deg) = score(c);
                degenerate |= deg;
                if best.map_or(true, |b| v > b.0) {
                    best = Some((v, c.position, c.aod, c.aoa));
                }
            }
            let (mut bv, mut bp, mut bd, mut ba) = best.expect("coarse grid is non-empty");
            for p in config.fine_points(&bp) {
                if let Some(c) = candidate(p) {
                    let (v, deg) = score(&c);
                    degenerate |= deg;
                    if v > bv {
                        (bv, bp, bd, ba) = (v, c.position, c.aod, c.aoa);
                    }
                }
            }

            if config.polish {
                let eval = |d: f64, a: f64| -> Option<(f64, Point, bool)> {
                    if d.abs() >= limit || a.abs() >= limit {
                        return None;
                    }
                    let p = geometry.triangulate(d, a).ok()?;
                    if !config.region.contains(&p) {
                        return None;
                    }
                    let (v, deg) = lik.evaluate_column(&prepared, &joint_steering(d, a, n_a, n_p, spacing));
                    Some((v + client_term(k, d), p, deg))
                };
                let mut step = POLISH_START_STEP;
                while step >= POLISH_MIN_STEP {
                    let mut improved = false;
                    for (dd, da) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                        if let Some((v, p, deg)) = eval(bd + dd, ba + da) {
                            if v > bv {
                                degenerate |= deg;
                                (bv, bp, bd, ba) = (v, p, bd + dd, ba + da);
                                improved = true;
                            }
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                }
            }

            let moved = positions[k].map_or(f64::INFINITY, |old| old.distance(&bp));
            max_move = max_move.max(moved);
            positions[k] = Some(bp);
            angles[k] = (bd, ba);
            objectives[k] = bv;
        }
        if max_move < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(SearchOutcome {
        positions: positions.into_iter().map(|p| p.expect("every target is visited in the first pass")).collect(),
        objectives,
        degenerate,
        passes,
        converged,
    })
}
