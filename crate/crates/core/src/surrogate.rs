//! Surrogate null distributions for the sliding-window indicators: tau
//! under constant conditions, from communities simulated with no
//! perturbed species.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{DetectionResult, EvidenceKind};
use crate::error::{EwsError, Result};
use crate::indicators::{indicator_trajectories, IndicatorName, WindowSpec};
use crate::rng::RngStream;
use crate::simulator::{simulate_viable, SamplingKnobs, SimConfig};

pub const DEFAULT_REPLICATES: usize = 500;
/// Fewer null samples than this give P-values too coarse to use.
pub const MIN_REPLICATES: usize = 100;
/// Stream id reserved for surrogate ensembles built from a bare seed.
const NULL_STREAM: u64 = 0x5u64 << 32;
/// Redraws allowed per replicate when a surrogate collapses or its
/// indicator cannot be computed.
const MAX_REDRAWS: u64 = 100;

/// Everything that determines the null distribution of tau.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullScenario {
    pub n_pollinators: usize,
    pub n_plants: usize,
    /// Length of each surrogate series, matched to the observed series.
    pub length: usize,
    pub window: WindowSpec,
    pub bandwidth_frac: f64,
    pub knobs: SamplingKnobs,
    pub sim: SimConfig,
}

impl NullScenario {
    /// Scenario for an observed series of `length` points with `n_species`
    /// features, split as evenly as possible (pollinators get the smaller
    /// half when odd).
    pub fn new(n_species: usize, length: usize) -> Self {
        Self {
            n_pollinators: n_species / 2,
            n_plants: n_species - n_species / 2,
            length,
            window: WindowSpec::default(),
            bandwidth_frac: 0.1,
            knobs: SamplingKnobs::default(),
            sim: SimConfig::default(),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(&self.resolved()).expect("scenario serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The scenario with the simulation length tied to `length`.
    fn resolved(&self) -> Self {
        let mut s = self.clone();
        s.sim.length = s.length;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pollinators == 0 || self.n_plants == 0 {
            return Err(EwsError::invalid("surrogate community needs at least one pollinator and one plant"));
        }
        self.resolved().sim.validate()?;
        self.window.length(self.length)?;
        if !(self.bandwidth_frac > 0.0 && self.bandwidth_frac <= 1.0) {
            return Err(EwsError::invalid("bandwidth fraction must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub fingerprint: String,
    pub indicator: IndicatorName,
    #[serde(rename = "R")]
    pub replicates: usize,
    pub tau_samples: Vec<f64>,
    pub seed: u64,
}

impl NullDistribution {
    pub fn validate(&self) -> Result<()> {
        if self.tau_samples.is_empty() {
            return Err(EwsError::invalid("null distribution is empty"));
        }
        if self.tau_samples.len() != self.replicates {
            return Err(EwsError::invalid("null distribution sample count does not match R"));
        }
        if self.tau_samples.iter().any(|t| !(-1.0..=1.0).contains(t)) {
            return Err(EwsError::invalid("null tau sample outside [-1, 1]"));
        }
        Ok(())
    }

    pub fn mean_tau(&self) -> f64 {
        crate::stats::mean(&self.tau_samples)
    }
}

/// Simulates one constant-condition surrogate and returns the tau of each
/// requested indicator. Collapsed runs and indicator failures are redrawn.
fn replicate_taus(scenario: &NullScenario, names: &[IndicatorName], rng: &RngStream) -> Result<Vec<f64>> {
    let sim = scenario.resolved().sim;
    let mut last_error = None;
    for redraw in 0..MAX_REDRAWS {
        let stream = rng.derive("redraw", redraw);
        let outcome = simulate_viable(scenario.n_pollinators, scenario.n_plants, 0, &scenario.knobs, &sim, &stream)?;
        if outcome.collapsed {
            last_error = Some(EwsError::Degenerate("constant-condition surrogate collapsed".into()));
            continue;
        }
        match indicator_trajectories(&outcome.series, names, &scenario.window, scenario.bandwidth_frac) {
            Ok(trajs) => return Ok(trajs.iter().map(|t| t.tau.tau).collect()),
            Err(e) => last_error = Some(e),
        }
    }
    Err(last_error.unwrap_or(EwsError::ViabilityFailure { attempts: MAX_REDRAWS as usize }))
}

/// Builds the null distributions of several indicators from one surrogate
/// ensemble of `replicates` communities. Replicate `i` uses its own stream,
/// so the result does not depend on the thread count.
pub fn build_nulls(
    scenario: &NullScenario,
    names: &[IndicatorName],
    replicates: usize,
    seed: u64,
) -> Result<Vec<NullDistribution>> {
    scenario.validate()?;
    if replicates == 0 || names.is_empty() {
        return Err(EwsError::invalid("need at least one replicate and one indicator"));
    }
    let root = RngStream::new(seed, NULL_STREAM);
    let per_replicate: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            replicate_taus(scenario, names, &root.derive("surrogate", i as u64)).map_err(|e| EwsError::Replicate {
                replicate: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let fingerprint = scenario.fingerprint();
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, &indicator)| NullDistribution {
            fingerprint: fingerprint.clone(),
            indicator,
            replicates,
            tau_samples: per_replicate.iter().map(|taus| taus[k]).collect(),
            seed,
        })
        .collect())
}

pub fn build_null(
    scenario: &NullScenario,
    name: IndicatorName,
    replicates: usize,
    seed: u64,
) -> Result<NullDistribution> {
    build_nulls(scenario, &[name], replicates, seed).map(|mut v| v.remove(0))
}

fn exceedances(observed_tau: f64, null: &NullDistribution) -> Result<usize> {
    if null.tau_samples.is_empty() {
        return Err(EwsError::invalid("null distribution is empty"));
    }
    if !observed_tau.is_finite() {
        return Err(EwsError::invalid("observed tau is not finite"));
    }
    Ok(null.tau_samples.iter().filter(|&&t| t >= observed_tau).count())
}

/// Fraction of null taus at or above the observed tau.
pub fn surrogate_p(observed_tau: f64, null: &NullDistribution, threshold: f64) -> Result<DetectionResult> {
    let k = exceedances(observed_tau, null)?;
    let p = k as f64 / null.tau_samples.len() as f64;
    Ok(DetectionResult::new(null.indicator.as_str(), p, EvidenceKind::Surrogate, threshold).with_tau(observed_tau))
}

/// `(k + 1) / (R + 1)`: never zero, exactly uniform under the null.
pub fn surrogate_p_add_one(observed_tau: f64, null: &NullDistribution) -> Result<f64> {
    let k = exceedances(observed_tau, null)?;
    Ok((k + 1) as f64 / (null.tau_samples.len() + 1) as f64)
}

/// On-disk cache of null distributions, one JSON file per scenario
/// fingerprint and indicator.
#[derive(Clone, Debug)]
pub struct NullCache {
    dir: PathBuf,
}

impl NullCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: &str, indicator: IndicatorName) -> PathBuf {
        self.dir.join(format!("{fingerprint}-{indicator}.json"))
    }

    /// A cached null for this scenario, if one exists with the same
    /// replicate count and seed. Unreadable files count as misses.
    pub fn load(&self, fingerprint: &str, indicator: IndicatorName, replicates: usize, seed: u64) -> Option<NullDistribution> {
        let text = fs::read_to_string(self.path_for(fingerprint, indicator)).ok()?;
        let null: NullDistribution = serde_json::from_str(&text).ok()?;
        let matches = null.fingerprint == fingerprint
            && null.indicator == indicator
            && null.replicates == replicates
            && null.seed == seed
            && null.validate().is_ok();
        matches.then_some(null)
    }

    pub fn store(&self, null: &NullDistribution) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| EwsError::io(&self.dir, e))?;
        let path = self.path_for(&null.fingerprint, null.indicator);
        let text = serde_json::to_string_pretty(null)?;
        fs::write(&path, text).map_err(|e| EwsError::io(&path, e))?;
        Ok(path)
    }

    /// Cached nulls where available; the missing indicators are built from
    /// one shared ensemble and stored.
    pub fn get_or_build(
        &self,
        scenario: &NullScenario,
        names: &[IndicatorName],
        replicates: usize,
        seed: u64,
    ) -> Result<Vec<NullDistribution>> {
        let fingerprint = scenario.fingerprint();
        let cached: Vec<Option<NullDistribution>> = names
            .iter()
            .map(|&n| self.load(&fingerprint, n, replicates, seed))
            .collect();
        let missing: Vec<IndicatorName> = names
            .iter()
            .zip(&cached)
            .filter(|(_, c)| c.is_none())
            .map(|(&n, _)| n)
            .collect();
        let mut built = if missing.is_empty() {
            Vec::new()
        } else {
            // build every requested indicator so the ensemble, and hence
            // each null, is the same whatever was cached before
            let all = build_nulls(scenario, names, replicates, seed)?;
            for null in all.iter().filter(|n| missing.contains(&n.indicator)) {
                self.store(null)?;
            }
            all
        };
        Ok(names
            .iter()
            .zip(cached)
            .enumerate()
            .map(|(k, (_, c))| c.unwrap_or_else(|| std::mem::take(&mut built[k])))
            .collect())
    }
}

impl Default for NullDistribution {
    fn default() -> Self {
        Self {
            fingerprint: String::new(),
            indicator: IndicatorName::AcMean,
            replicates: 0,
            tau_samples: Vec::new(),
            seed: 0,
        }
    }
}
