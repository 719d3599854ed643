//! Localization strategies behind a common trait, selectable by name.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::covariance::CovarianceSet;
use super::search::{alternating_summation, PreEstimate, SearchConfig};
use crate::scene::{Geometry, Point};
use crate::{Error, Result};

/// Inputs shared by every method of a trial.
#[derive(Debug, Clone, Copy)]
pub struct LocalizationInput<'a> {
    pub pre: &'a PreEstimate,
    pub covs: &'a CovarianceSet,
    pub geometry: &'a Geometry,
    pub search: &'a SearchConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    /// `None` when the rays did not intersect.
    pub position: Option<Point>,
    pub associated: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub method: String,
    pub targets: Vec<TargetEstimate>,
    pub degenerate: bool,
    pub elapsed: Duration,
}

impl LocalizationResult {
    pub fn positions(&self) -> Vec<Option<Point>> {
        self.targets.iter().map(|t| t.position).collect()
    }
}

pub trait Localizer: Send + Sync {
    fn name(&self) -> &str;
    fn localize(&self, input: &LocalizationInput<'_>) -> Result<LocalizationResult>;
}

fn searched(name: &str, input: &LocalizationInput<'_>, use_clients: bool) -> Result<LocalizationResult> {
    let start = Instant::now();
    let out = alternating_summation(input.pre, input.covs, input.geometry, input.search, use_clients)?;
    let targets = out
        .positions
        .iter()
        .zip(&out.objectives)
        .zip(&input.pre.targets)
        .map(|((p, &objective), t)| TargetEstimate {
            position: Some(*p),
            associated: use_clients && t.associated(),
            objective,
        })
        .collect();
    Ok(LocalizationResult {
        method: name.to_string(),
        targets,
        degenerate: out.degenerate || input.pre.music_degenerate,
        elapsed: start.elapsed(),
    })
}

fn triangulated(name: &str, input: &LocalizationInput<'_>, use_clients: bool) -> LocalizationResult {
    let start = Instant::now();
    let targets = input
        .pre
        .targets
        .iter()
        .map(|t| {
            let substitute = if use_clients { t.client_aod } else { None };
            let aod = substitute.unwrap_or(t.aod);
            TargetEstimate {
                position: input.geometry.triangulate(aod, t.aoa).ok(),
                associated: substitute.is_some(),
                objective: t.peak_height,
            }
        })
        .collect();
    LocalizationResult {
        method: name.to_string(),
        targets,
        degenerate: input.pre.music_degenerate,
        elapsed: start.elapsed(),
    }
}

/// Associative alternating summation: radar term plus, for associated
/// targets, the client term.
#[derive(Debug, Default, Clone, Copy)]
pub struct HybridAlternatingSummation;

impl Localizer for HybridAlternatingSummation {
    fn name(&self) -> &str {
        "hybrid_as"
    }

    fn localize(&self, input: &LocalizationInput<'_>) -> Result<LocalizationResult> {
        searched(self.name(), input, true)
    }
}

/// Alternating summation on the radar term only.
#[derive(Debug, Default, Clone, Copy)]
pub struct NdpAlternatingSummation;

impl Localizer for NdpAlternatingSummation {
    fn name(&self) -> &str {
        "ndp_as"
    }

    fn localize(&self, input: &LocalizationInput<'_>) -> Result<LocalizationResult> {
        searched(self.name(), input, false)
    }
}

/// Triangulates the MUSIC (AoD, AoA) pre-estimates directly.
#[derive(Debug, Default, Clone, Copy)]
pub struct MusicNdp;

impl Localizer for MusicNdp {
    fn name(&self) -> &str {
        "music_ndp"
    }

    fn localize(&self, input: &LocalizationInput<'_>) -> Result<LocalizationResult> {
        Ok(triangulated(self.name(), input, false))
    }
}

/// Triangulates with the radar AoD replaced by the associated client's
/// feedback AoD.
#[derive(Debug, Default, Clone, Copy)]
pub struct MusicBff;

impl Localizer for MusicBff {
    fn name(&self) -> &str {
        "music_bff"
    }

    fn localize(&self, input: &LocalizationInput<'_>) -> Result<LocalizationResult> {
        Ok(triangulated(self.name(), input, true))
    }
}

/// Name-indexed set of localization strategies.
#[derive(Clone, Default)]
pub struct MethodRegistry {
    methods: BTreeMap<String, Arc<dyn Localizer>>,
}

impl std::fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four built-in methods.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(HybridAlternatingSummation));
        r.register(Arc::new(NdpAlternatingSummation));
        r.register(Arc::new(MusicNdp));
        r.register(Arc::new(MusicBff));
        r
    }

    /// Adds or replaces a method under its own name.
    pub fn register(&mut self, method: Arc<dyn Localizer>) {
        self.methods.insert(method.name().to_string(), method);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Localizer>> {
        self.methods.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.methods.keys().map(String::as_str).collect()
    }

    /// Resolves `names` in order; unknown or repeated names are errors.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Arc<dyn Localizer>>> {
        let mut out: Vec<Arc<dyn Localizer>> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if out.iter().any(|m| m.name() == n) {
                return Err(Error::config(format!("method {n:?} listed twice")));
            }
            let m = self
                .get(n)
                .ok_or_else(|| Error::config(format!("unknown method {n:?}; known: {}", self.names().join(", "))))?;
            out.push(m);
        }
        if out.is_empty() {
            return Err(Error::config("no methods selected"));
        }
        Ok(out)
    }
}
