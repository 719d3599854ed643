//! Scene geometry: node placement, array orientation, angle conventions and
//! steering vectors.
//!
//! Angles are measured from the array normal (boresight). A positive angle
//! opens toward the clockwise side of the boresight, i.e. toward +x for a
//! boresight of (0, 1). Every module uses this convention.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{CVector, C64};
use crate::{Error, Result};

/// Usable half field of view; targets and angle grids stay within ±80°.
pub const FIELD_LIMIT_DEG: f64 = 80.0;

/// Rejection budget of [`sample_scenario`].
pub const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

/// 802.11ax HE subcarrier spacing.
pub const HE_SUBCARRIER_SPACING_HZ: f64 = 78_125.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    fn sub(&self, other: &Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }
}

/// Axis-aligned coverage rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Rect { x_min, x_max, y_min, y_max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(Error::config(format!("empty or non-finite rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Uniform linear array description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub num_elements: usize,
    /// Element spacing as a fraction of the wavelength.
    pub spacing: f64,
    /// Unit normal of the array in the plane.
    pub boresight: Point,
}

impl ArrayConfig {
    /// Builds an array, normalizing `boresight` to unit length.
    pub fn new(num_elements: usize, spacing: f64, boresight: Point) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::config("array needs at least one element"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::config(format!("element spacing must be positive, got {spacing}")));
        }
        let n = boresight.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::config("boresight must be a non-zero finite vector"));
        }
        Ok(ArrayConfig {
            num_elements,
            spacing,
            boresight: Point::new(boresight.x / n, boresight.y / n),
        })
    }

    /// Half-wavelength array facing `boresight`.
    pub fn half_wavelength(num_elements: usize, boresight: Point) -> Result<Self> {
        Self::new(num_elements, 0.5, boresight)
    }

    pub fn steering(&self, angle: f64) -> Result<CVector> {
        steering_vector(angle, self.num_elements, self.spacing)
    }
}

/// ULA steering vector: element `m` is `exp(j·2π·spacing·m·sin(angle))`.
pub fn steering_vector(angle: f64, n: usize, spacing: f64) -> Result<CVector> {
    if !angle.is_finite() {
        return Err(Error::invalid(format!("non-finite angle {angle}")));
    }
    if n == 0 {
        return Err(Error::invalid("steering vector needs n >= 1"));
    }
    Ok(steering_unchecked(angle, n, spacing))
}

pub(crate) fn steering_unchecked(angle: f64, n: usize, spacing: f64) -> CVector {
    let phase = 2.0 * std::f64::consts::PI * spacing * angle.sin();
    CVector::from_iterator(n, (0..n).map(|m| C64::from_polar(1.0, phase * m as f64)))
}

/// Signed angle of `target` seen from `observer` relative to `boresight`.
pub fn angle_of(observer: &Point, boresight: &Point, target: &Point) -> Result<f64> {
    let d = target.sub(observer);
    if d.norm() == 0.0 {
        return Err(Error::invalid("target coincides with observer"));
    }
    // cross(d, b) is positive on the clockwise side of b.
    let cross = d.x * boresight.y - d.y * boresight.x;
    let dot = d.x * boresight.x + d.y * boresight.y;
    let angle = cross.atan2(dot);
    if angle.abs() >= FRAC_PI_2 {
        return Err(Error::OutOfField { angle });
    }
    Ok(angle)
}

/// Unit direction obtained by rotating `boresight` clockwise by `angle`.
pub fn direction(boresight: &Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(boresight.x * c + boresight.y * s, boresight.y * c - boresight.x * s)
}

/// Intersection of the AP ray at `aod` with the PWR ray at `aoa`.
pub fn triangulate(
    aod: f64,
    ap: &Point,
    aoa: f64,
    pwr: &Point,
    boresights: (&Point, &Point),
) -> Result<Point> {
    if !aod.is_finite() || !aoa.is_finite() {
        return Err(Error::invalid("non-finite angle"));
    }
    let d1 = direction(boresights.0, aod);
    let d2 = direction(boresights.1, aoa);
    // ap + s d1 = pwr + t d2
    let det = d2.x * d1.y - d1.x * d2.y;
    if det.abs() < 1e-12 {
        return Err(Error::NoIntersection);
    }
    let rhs = pwr.sub(ap);
    let s = (d2.x * rhs.y - d2.y * rhs.x) / det;
    let t = (d1.x * rhs.y - d1.y * rhs.x) / det;
    if s <= 0.0 || t <= 0.0 {
        return Err(Error::NoIntersection);
    }
    Ok(Point::new(ap.x + s * d1.x, ap.y + s * d1.y))
}

/// The fixed AP/PWR pair used by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub ap: Point,
    pub ap_boresight: Point,
    pub pwr: Point,
    pub pwr_boresight: Point,
}

impl Geometry {
    /// (AoD at the AP, AoA at the PWR) for a point.
    pub fn angles_to(&self, p: &Point) -> Result<(f64, f64)> {
        Ok((angle_of(&self.ap, &self.ap_boresight, p)?, angle_of(&self.pwr, &self.pwr_boresight, p)?))
    }

    pub fn triangulate(&self, aod: f64, aoa: f64) -> Result<Point> {
        triangulate(aod, &self.ap, aoa, &self.pwr, (&self.ap_boresight, &self.pwr_boresight))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Client,
    NonClient,
}

impl TargetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::Client => "client",
            TargetKind::NonClient => "non-client",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: Point,
    pub kind: TargetKind,
}

/// A client UE. Each client is also a radar target at the same position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientNode {
    pub position: Point,
    pub array: ArrayConfig,
    /// Number of non-LoS paths, `K_u - 1`.
    pub num_multipath: usize,
    /// LoS to total multipath power ratio in dB; `+inf` disables multipath.
    pub ricean_k_factor_db: f64,
}

/// Ground-truth angles of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    /// AoD at the AP per target.
    pub aod: Vec<f64>,
    /// AoA at the PWR per target.
    pub aoa: Vec<f64>,
    /// LoS AoD at the AP per client.
    pub client_los_aod: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ap_position: Point,
    pub pwr_position: Point,
    pub ap_array: ArrayConfig,
    pub pwr_array: ArrayConfig,
    pub clients: Vec<ClientNode>,
    /// Clients first, then non-clients.
    pub targets: Vec<Target>,
    pub coverage: Rect,
    pub num_subcarriers: usize,
    pub subcarrier_spacing: f64,
}

impl Scenario {
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            ap: self.ap_position,
            ap_boresight: self.ap_array.boresight,
            pwr: self.pwr_position,
            pwr_boresight: self.pwr_array.boresight,
        }
    }

    pub fn angles(&self) -> Result<AngleSet> {
        let g = self.geometry();
        let mut aod = Vec::with_capacity(self.targets.len());
        let mut aoa = Vec::with_capacity(self.targets.len());
        for t in &self.targets {
            let (d, a) = g.angles_to(&t.position)?;
            aod.push(d);
            aoa.push(a);
        }
        let client_los_aod = self
            .clients
            .iter()
            .map(|c| angle_of(&self.ap_position, &self.ap_array.boresight, &c.position))
            .collect::<Result<_>>()?;
        Ok(AngleSet { aod, aoa, client_los_aod })
    }

    /// Checks the ordering, containment and separation invariants.
    pub fn validate(&self, min_separation: f64) -> Result<()> {
        let c = self.clients.len();
        if c > self.targets.len() {
            return Err(Error::invalid("more clients than targets"));
        }
        for (i, t) in self.targets.iter().enumerate() {
            let expect = if i < c { TargetKind::Client } else { TargetKind::NonClient };
            if t.kind != expect {
                return Err(Error::invalid("client targets must precede non-client targets"));
            }
            if !self.coverage.contains(&t.position) {
                return Err(Error::invalid(format!("target {i} outside coverage")));
            }
        }
        for (i, cl) in self.clients.iter().enumerate() {
            if cl.position != self.targets[i].position {
                return Err(Error::invalid(format!("client {i} does not sit on target {i}")));
            }
        }
        for i in 0..self.targets.len() {
            for j in (i + 1)..self.targets.len() {
                if self.targets[i].position.distance(&self.targets[j].position) < min_separation {
                    return Err(Error::invalid(format!("targets {i} and {j} closer than {min_separation} m")));
                }
            }
        }
        self.angles().map(|_| ())
    }

    /// Plain-text dump for reproducibility logs.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ap_position = [{}, {}]", self.ap_position.x, self.ap_position.y);
        let _ = writeln!(s, "pwr_position = [{}, {}]", self.pwr_position.x, self.pwr_position.y);
        let _ = writeln!(s, "n_ap = {}", self.ap_array.num_elements);
        let _ = writeln!(s, "n_pwr = {}", self.pwr_array.num_elements);
        let _ = writeln!(s, "q = {}", self.num_subcarriers);
        let _ = writeln!(s, "subcarrier_spacing = {}", self.subcarrier_spacing);
        for (i, t) in self.targets.iter().enumerate() {
            let _ = writeln!(s, "target.{i} = [{}, {}] {}", t.position.x, t.position.y, t.kind.as_str());
        }
        for (i, c) in self.clients.iter().enumerate() {
            let _ = writeln!(
                s,
                "client.{i} = n_ue {} multipath {} k_factor_db {}",
                c.array.num_elements, c.num_multipath, c.ricean_k_factor_db
            );
        }
        s
    }
}

fn default_spacing() -> f64 {
    HE_SUBCARRIER_SPACING_HZ
}
fn default_multipath() -> usize {
    3
}
fn default_k_factor() -> f64 {
    15.0
}
fn default_boresight() -> [f64; 2] {
    [0.0, 1.0]
}

/// Scenario sampling parameters, loadable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ap_position: [f64; 2],
    pub pwr_position: [f64; 2],
    pub n_ap: usize,
    pub n_pwr: usize,
    pub n_ue: usize,
    pub q: usize,
    /// `[x_min, x_max, y_min, y_max]` in meters.
    pub coverage: [f64; 4],
    pub k_targets: usize,
    pub c_clients: usize,
    pub min_separation: f64,
    pub seed: u64,
    #[serde(default = "default_spacing")]
    pub subcarrier_spacing: f64,
    #[serde(default = "default_multipath")]
    pub num_multipath: usize,
    #[serde(default = "default_k_factor")]
    pub ricean_k_factor_db: f64,
    #[serde(default = "default_boresight")]
    pub ap_boresight: [f64; 2],
    #[serde(default = "default_boresight")]
    pub pwr_boresight: [f64; 2],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            ap_position: [0.0, 0.0],
            pwr_position: [10.0, 0.0],
            n_ap: 4,
            n_pwr: 4,
            n_ue: 4,
            q: 512,
            coverage: [0.0, 10.0, 5.0, 15.0],
            k_targets: 3,
            c_clients: 2,
            min_separation: 1.0,
            seed: 1,
            subcarrier_spacing: HE_SUBCARRIER_SPACING_HZ,
            num_multipath: default_multipath(),
            ricean_k_factor_db: default_k_factor(),
            ap_boresight: default_boresight(),
            pwr_boresight: default_boresight(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn coverage_rect(&self) -> Result<Rect> {
        let [a, b, c, d] = self.coverage;
        Rect::new(a, b, c, d)
    }

    pub fn validate(&self) -> Result<()> {
        self.coverage_rect()?;
        if self.c_clients > self.k_targets {
            return Err(Error::config("c_clients must not exceed k_targets"));
        }
        if self.q == 0 {
            return Err(Error::config("q must be positive"));
        }
        if self.n_ap == 0 || self.n_pwr == 0 || self.n_ue == 0 {
            return Err(Error::config("array sizes must be positive"));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::config("min_separation must be finite and non-negative"));
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return Err(Error::config("subcarrier_spacing must be positive"));
        }
        if self.ricean_k_factor_db.is_nan() || self.ricean_k_factor_db < 0.0 {
            return Err(Error::config("ricean_k_factor_db must be >= 0 dB"));
        }
        Ok(())
    }

    fn ap_array(&self) -> Result<ArrayConfig> {
        ArrayConfig::half_wavelength(self.n_ap, Point::new(self.ap_boresight[0], self.ap_boresight[1]))
    }

    fn pwr_array(&self) -> Result<ArrayConfig> {
        ArrayConfig::half_wavelength(self.n_pwr, Point::new(self.pwr_boresight[0], self.pwr_boresight[1]))
    }
}

/// Draws target positions uniformly over the coverage rectangle with
/// rejection on separation and field of view.
pub fn sample_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    config.validate()?;
    let coverage = config.coverage_rect()?;
    let ap = Point::new(config.ap_position[0], config.ap_position[1]);
    let pwr = Point::new(config.pwr_position[0], config.pwr_position[1]);
    let ap_array = config.ap_array()?;
    let pwr_array = config.pwr_array()?;
    let geometry = Geometry { ap, ap_boresight: ap_array.boresight, pwr, pwr_boresight: pwr_array.boresight };
    let limit = FIELD_LIMIT_DEG.to_radians();

    let in_field = |p: &Point| match geometry.angles_to(p) {
        Ok((d, a)) => d.abs() < limit && a.abs() < limit,
        Err(_) => false,
    };

    let mut positions: Vec<Point> = Vec::with_capacity(config.k_targets);
    let mut attempts = 0usize;
    while positions.len() < config.k_targets {
        if attempts >= MAX_SAMPLING_ATTEMPTS {
            return Err(Error::InfeasibleGeometry { attempts });
        }
        attempts += 1;
        let p = Point::new(
            coverage.x_min + coverage.width() * rng.random::<f64>(),
            coverage.y_min + coverage.height() * rng.random::<f64>(),
        );
        if !in_field(&p) {
            continue;
        }
        if positions.iter().all(|q| q.distance(&p) >= config.min_separation.max(f64::MIN_POSITIVE)) {
            positions.push(p);
        }
    }

    let targets = positions
        .iter()
        .enumerate()
        .map(|(i, &position)| Target {
            position,
            kind: if i < config.c_clients { TargetKind::Client } else { TargetKind::NonClient },
        })
        .collect();

    let clients = positions[..config.c_clients]
        .iter()
        .map(|&position| {
            // Client arrays face the AP.
            let facing = Point::new(ap.x - position.x, ap.y - position.y);
            Ok(ClientNode {
                position,
                array: ArrayConfig::half_wavelength(config.n_ue, facing)?,
                num_multipath: config.num_multipath,
                ricean_k_factor_db: config.ricean_k_factor_db,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scenario {
        ap_position: ap,
        pwr_position: pwr,
        ap_array,
        pwr_array,
        clients,
        targets,
        coverage,
        num_subcarriers: config.q,
        subcarrier_spacing: config.subcarrier_spacing,
    })
}
