//! Three-branch hypothesis testing on low-confidence windows.
//!
//! H1 masks suspect channels (cyberattack), H2 removes the suspects' zone
//! (fault), H3 removes both. Branches run in that order and the first one
//! that restores the confidence above `c_min` sets the verdict.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{normalized_residuals, wls_solve, EstimationResult, SolverOptions};
use crate::measurement::MeasurementModel;
use crate::model::NetworkModel;

pub const DEFAULT_C_MIN: f64 = 0.80;
pub const DEFAULT_K_MAX: usize = 4;
pub const DEFAULT_SUSPECT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub c_min: f64,
    pub k_max: usize,
    /// Cap on estimation passes per window (base pass included).
    pub max_passes: usize,
    pub suspect_threshold: f64,
    pub solver: SolverOptions,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            c_min: DEFAULT_C_MIN,
            k_max: DEFAULT_K_MAX,
            max_passes: 1 + DEFAULT_K_MAX + 2,
            suspect_threshold: DEFAULT_SUSPECT_THRESHOLD,
            solver: SolverOptions::default(),
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_min > 0.0 && self.c_min < 1.0) {
            return Err(Error::Config(format!("c_min must be in (0, 1), got {}", self.c_min)));
        }
        if self.k_max == 0 || self.max_passes == 0 {
            return Err(Error::Config("k_max and max_passes must be >= 1".into()));
        }
        if !(self.suspect_threshold > 0.0) {
            return Err(Error::Config("suspect threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Normal,
    CyberAttack,
    Fault,
    Combined,
    Unresolved,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Normal => "NORMAL",
            Verdict::CyberAttack => "CYBER_ATTACK",
            Verdict::Fault => "FAULT",
            Verdict::Combined => "COMBINED",
            Verdict::Unresolved => "UNRESOLVED",
        }
    }

    pub fn is_anomaly(self) -> bool {
        self != Verdict::Normal
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "NORMAL" => Verdict::Normal,
            "CYBER_ATTACK" => Verdict::CyberAttack,
            "FAULT" => Verdict::Fault,
            "COMBINED" => Verdict::Combined,
            "UNRESOLVED" => Verdict::Unresolved,
            other => return Err(Error::Config(format!("unknown verdict {other}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Passed,
    Failed,
    Untestable,
}

/// One tested hypothesis, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub hypothesis: Hypothesis,
    pub masked_channels: Vec<String>,
    pub zone: Option<String>,
    pub confidence: Option<f64>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub time_s: f64,
    pub verdict: Verdict,
    pub suspects: Vec<String>,
    pub zone: Option<String>,
    pub pre_confidence: f64,
    pub post_confidence: Option<f64>,
    pub trail: Vec<TrailEntry>,
    /// Zone inferred from the base residuals and from the H1-masked residuals.
    pub zone_candidates: (Option<String>, Option<String>),
}

impl Diagnosis {
    fn normal(time_s: f64, c: f64) -> Self {
        Self::bare(time_s, Verdict::Normal, c)
    }

    /// Diagnosis with a verdict and nothing else; for replaying traces.
    pub fn bare(time_s: f64, verdict: Verdict, c: f64) -> Self {
        Diagnosis {
            time_s,
            verdict,
            suspects: Vec::new(),
            zone: None,
            pre_confidence: c,
            post_confidence: None,
            trail: Vec::new(),
            zone_candidates: (None, None),
        }
    }

    /// Estimation passes spent on this window, base pass included.
    pub fn passes(&self) -> usize {
        1 + self.trail.iter().filter(|t| t.confidence.is_some()).count()
    }
}

type MaskKey = (BTreeSet<String>, Option<String>);

/// Per-run hypothesis tester; caches the masked model views it builds.
pub struct Classifier<'a> {
    base: &'a MeasurementModel,
    network: &'a NetworkModel,
    config: ThresholdConfig,
    cache: HashMap<MaskKey, std::result::Result<MeasurementModel, Error>>,
}

impl<'a> Classifier<'a> {
    pub fn new(base: &'a MeasurementModel, network: &'a NetworkModel, config: ThresholdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Classifier {
            base,
            network,
            config,
            cache: HashMap::new(),
        })
    }

    pub fn config(&self) -> &ThresholdConfig {
        &self.config
    }

    fn masked(&mut self, channels: &[String], zone: Option<&str>) -> std::result::Result<MeasurementModel, Error> {
        let key: MaskKey = (channels.iter().cloned().collect(), zone.map(str::to_string));
        if let Some(m) = self.cache.get(&key) {
            return m.clone();
        }
        let built = (|| {
            let mut m = self.base.mask_channels(channels.iter().map(String::as_str))?;
            if let Some(z) = zone {
                m = m.mask_zone(self.network, z)?;
            }
            if m.nu() == 0 {
                return Err(Error::NoRedundancy);
            }
            Ok(m)
        })();
        self.cache.insert(key, built.clone());
        built
    }

    fn run(
        &mut self,
        hypothesis: Hypothesis,
        channels: &[String],
        zone: Option<&str>,
        z_full: &DVector<f64>,
        x0: &DVector<f64>,
    ) -> Result<(TrailEntry, Option<EstimationResult>)> {
        let mut entry = TrailEntry {
            hypothesis,
            masked_channels: channels.to_vec(),
            zone: zone.map(str::to_string),
            confidence: None,
            outcome: Outcome::Untestable,
            note: None,
        };
        match self.masked(channels, zone) {
            Err(e @ (Error::Unobservable { .. } | Error::NoRedundancy)) => {
                entry.note = Some(e.to_string());
                Ok((entry, None))
            }
            Err(e) => Err(e),
            Ok(m) => {
                let res = wls_solve(&m, &m.select(z_full), x0, self.config.solver)?;
                entry.confidence = Some(res.confidence);
                entry.outcome = if res.converged && res.confidence >= self.config.c_min {
                    Outcome::Passed
                } else {
                    Outcome::Failed
                };
                if !res.converged {
                    entry.note = res.diagnostic.clone();
                }
                Ok((entry, Some(res)))
            }
        }
    }

    /// Metered channels whose normalized residual exceeds the threshold,
    /// largest first, excluding `skip` and channels of masked zones.
    fn suspects(&self, res: &EstimationResult, skip: &BTreeSet<String>) -> Vec<(String, f64)> {
        normalized_residuals(res)
            .into_iter()
            .filter(|(id, v)| {
                *v > self.config.suspect_threshold
                    && !skip.contains(id)
                    && self.base.channel(id).is_some_and(|c| !c.kind.is_virtual())
            })
            .collect()
    }

    /// Plurality zone of the suspects; ties go to the lowest zone id.
    /// Returns every candidate zone in preference order.
    fn zone_ranking(&self, suspects: &[(String, f64)]) -> Vec<String> {
        let mut votes: BTreeMap<String, usize> = BTreeMap::new();
        for (id, _) in suspects {
            if let Some(z) = self.base.channel(id).and_then(|c| c.zone) {
                if let Some(zid) = self.base.zone_id(z) {
                    *votes.entry(zid.to_string()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = votes.into_iter().collect();
        ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
        ranked.into_iter().map(|(z, _)| z).collect()
    }

    /// H1 mask sets: the top suspect, then further channels of its merging
    /// unit in residual order, up to `k_max` channels.
    fn escalation(&self, suspects: &[(String, f64)], res: &EstimationResult) -> Vec<Vec<String>> {
        let Some((top, _)) = suspects.first() else {
            return Vec::new();
        };
        let mu = self.base.channel(top).and_then(|c| c.merging_unit.clone());
        let mut order = vec![top.clone()];
        for (id, _) in normalized_residuals(res) {
            if order.len() >= self.config.k_max {
                break;
            }
            let same_mu = self
                .base
                .channel(&id)
                .is_some_and(|c| c.merging_unit.is_some() && c.merging_unit == mu);
            if same_mu && !order.contains(&id) && !self.base.masked_channels().contains(&id) {
                order.push(id);
            }
        }
        (1..=order.len()).map(|k| order[..k].to_vec()).collect()
    }

    /// Fig. 1 flow for one window: base estimate, then H1, H2, H3.
    pub fn classify(
        &mut self,
        z_full: &DVector<f64>,
        x0: &DVector<f64>,
        time_s: f64,
    ) -> Result<(EstimationResult, Diagnosis)> {
        let base = wls_solve(self.base, &self.base.select(z_full), x0, self.config.solver)?;
        let c_min = self.config.c_min;
        if base.converged && base.confidence >= c_min {
            let d = Diagnosis::normal(time_s, base.confidence);
            return Ok((base, d));
        }
        let mut diag = Diagnosis::normal(time_s, base.confidence);
        diag.verdict = Verdict::Unresolved;
        let budget = self.config.max_passes.saturating_sub(1);
        let spent = |d: &Diagnosis| d.passes() - 1;

        let suspects = self.suspects(&base, &BTreeSet::new());
        let zones = self.zone_ranking(&suspects);
        diag.zone_candidates.0 = zones.first().cloned();

        // H1: growing channel masks within the top suspect's merging unit
        let mut h1_best: Option<EstimationResult> = None;
        for mask in self.escalation(&suspects, &base) {
            if spent(&diag) >= budget.min(self.config.k_max) {
                break;
            }
            let (entry, res) = self.run(Hypothesis::H1, &mask, None, z_full, x0)?;
            let passed = entry.outcome == Outcome::Passed;
            diag.trail.push(entry);
            if passed {
                let res = res.expect("passed hypotheses carry a result");
                diag.verdict = Verdict::CyberAttack;
                diag.suspects = mask;
                diag.post_confidence = Some(res.confidence);
                return Ok((base, diag));
            }
            if res.is_some() {
                h1_best = res;
            }
        }
        if let Some(r) = &h1_best {
            let masked: BTreeSet<String> = diag
                .trail
                .last()
                .map(|t| t.masked_channels.iter().cloned().collect())
                .unwrap_or_default();
            diag.zone_candidates.1 = self.zone_ranking(&self.suspects(r, &masked)).first().cloned();
        }

        // H2: remove the first testable candidate zone
        let mut h2: Option<(String, EstimationResult)> = None;
        for zone in &zones {
            if spent(&diag) >= budget {
                break;
            }
            let (entry, res) = self.run(Hypothesis::H2, &[], Some(zone), z_full, x0)?;
            let outcome = entry.outcome;
            diag.trail.push(entry);
            if outcome == Outcome::Untestable {
                continue;
            }
            let res = res.expect("tested hypotheses carry a result");
            if outcome == Outcome::Passed {
                diag.verdict = Verdict::Fault;
                diag.zone = Some(zone.clone());
                diag.post_confidence = Some(res.confidence);
                return Ok((base, diag));
            }
            h2 = Some((zone.clone(), res));
            break;
        }

        // H3: zone removed plus the top unit's channels still flagged after H2
        if let Some((zone, h2_res)) = h2 {
            if spent(&diag) < budget {
                let in_zone = |id: &str| {
                    self.base
                        .channel(id)
                        .and_then(|c| c.zone)
                        .and_then(|z| self.base.zone_id(z))
                        == Some(zone.as_str())
                };
                let mut rest: Vec<(String, f64)> = self.suspects(&h2_res, &BTreeSet::new());
                rest.retain(|(id, _)| !in_zone(id));
                if rest.is_empty() {
                    rest = suspects.iter().filter(|(id, _)| !in_zone(id)).cloned().collect();
                }
                let mu = rest
                    .first()
                    .and_then(|(id, _)| self.base.channel(id))
                    .and_then(|c| c.merging_unit.clone());
                let mask: Vec<String> = rest
                    .iter()
                    .filter(|(id, _)| self.base.channel(id).is_some_and(|c| c.merging_unit == mu))
                    .take(self.config.k_max)
                    .map(|(id, _)| id.clone())
                    .collect();
                if !mask.is_empty() {
                    let (entry, res) = self.run(Hypothesis::H3, &mask, Some(&zone), z_full, x0)?;
                    let passed = entry.outcome == Outcome::Passed;
                    diag.trail.push(entry);
                    if passed {
                        diag.verdict = Verdict::Combined;
                        diag.suspects = mask;
                        diag.zone = Some(zone);
                        diag.post_confidence = res.map(|r| r.confidence);
                        return Ok((base, diag));
                    }
                }
            }
        }
        Ok((base, diag))
    }
}

/// One-shot classification of a window (no mask cache reuse).
pub fn classify_window(
    model: &MeasurementModel,
    network: &NetworkModel,
    z_full: &DVector<f64>,
    x0: &DVector<f64>,
    config: ThresholdConfig,
    time_s: f64,
) -> Result<(EstimationResult, Diagnosis)> {
    Classifier::new(model, network, config)?.classify(z_full, x0, time_s)
}

fn masked_confidence(
    model: &MeasurementModel,
    z_full: &DVector<f64>,
    x0: &DVector<f64>,
    opts: SolverOptions,
) -> Result<(f64, EstimationResult)> {
    if model.nu() == 0 {
        return Err(Error::NoRedundancy);
    }
    let res = wls_solve(model, &model.select(z_full), x0, opts)?;
    Ok((res.confidence, res))
}

/// H1 on its own: mask `suspects` and re-estimate.
pub fn test_cyberattack(
    model: &MeasurementModel,
    z_full: &DVector<f64>,
    suspects: &[&str],
    x0: &DVector<f64>,
    opts: SolverOptions,
) -> Result<(f64, EstimationResult)> {
    if suspects.is_empty() {
        return Err(Error::Config("H1 needs at least one suspect channel".into()));
    }
    masked_confidence(&model.mask_channels(suspects.iter().copied())?, z_full, x0, opts)
}

/// H2 on its own: remove `zone` and re-estimate.
pub fn test_fault(
    model: &MeasurementModel,
    network: &NetworkModel,
    z_full: &DVector<f64>,
    zone: &str,
    x0: &DVector<f64>,
    opts: SolverOptions,
) -> Result<(f64, EstimationResult)> {
    masked_confidence(&model.mask_zone(network, zone)?, z_full, x0, opts)
}

/// H3 on its own: remove `zone` and `suspects` together.
pub fn test_combined(
    model: &MeasurementModel,
    network: &NetworkModel,
    z_full: &DVector<f64>,
    suspects: &[&str],
    zone: &str,
    x0: &DVector<f64>,
    opts: SolverOptions,
) -> Result<(f64, EstimationResult)> {
    let m = model
        .mask_channels(suspects.iter().copied())?
        .mask_zone(network, zone)?;
    masked_confidence(&m, z_full, x0, opts)
}
