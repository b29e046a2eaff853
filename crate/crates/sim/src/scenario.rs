//! Scenario files: JSON description of one experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use diffperf_core::{ClassId, ControllerConfig, EstimatorConfig, FlowId, ServiceClassSpec};
use serde::{Deserialize, Serialize};

use crate::dash::{AbrConfig, ArrivalSpec, Assignment, QoeParams, RttMixture, VideoSpec};
use crate::error::{Result, SimError};
use crate::netsim::{CcModel, CcParams, LinkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub class_id: ClassId,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffPerfParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Control period in seconds.
    pub epoch: f64,
    pub burst_bytes: u64,
}

/// `"baseline:<cc model>"`: no differentiation, one unmetered group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Baseline(pub CcModel);

impl FromStr for Baseline {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let cc = s.strip_prefix("baseline:").ok_or_else(|| {
            SimError::field(
                "controller",
                format!("expected an object or \"baseline:<cc>\", got {s:?}"),
            )
        })?;
        Ok(Baseline(cc.parse()?))
    }
}

impl TryFrom<String> for Baseline {
    type Error = SimError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Baseline> for String {
    fn from(b: Baseline) -> String {
        b.to_string()
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "baseline:{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControllerSpec {
    DiffPerf(DiffPerfParams),
    Baseline(Baseline),
}

impl ControllerSpec {
    pub fn is_baseline(&self) -> bool {
        matches!(self, ControllerSpec::Baseline(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub delta: f64,
    pub sample_period: f64,
    /// Defaults to two sample periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle_timeout: Option<f64>,
    /// Estimation period when no controller sets one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseSpec {
    pub flow: FlowId,
    pub start: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    #[serde(default)]
    pub video: VideoSpec,
    pub cc_model: CcModel,
    #[serde(default)]
    pub abr: AbrConfig,
    #[serde(default)]
    pub qoe: QoeParams,
    pub arrivals: ArrivalSpec,
    /// Relative class mix; every class gets 1 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_ratio: Option<BTreeMap<ClassId, f64>>,
    pub rtt: RttMixture,
    #[serde(default)]
    pub assignment: Assignment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pauses: Vec<PauseSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureWindow {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub link: LinkConfig,
    pub classes: Vec<ClassSpec>,
    pub controller: ControllerSpec,
    pub estimator: EstimatorSpec,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub cc: CcParams,
    /// Throughput statistics window; the whole run when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureWindow>,
    pub seed: u64,
    pub duration: f64,
}

fn multiple_of(x: f64, unit: f64) -> Option<u64> {
    let k = (x / unit).round();
    ((x / unit - k).abs() < 1e-6 && k >= 1.0).then_some(k as u64)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let s: Scenario = serde_json::from_str(&text).map_err(|source| SimError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn epoch(&self) -> f64 {
        match &self.controller {
            ControllerSpec::DiffPerf(p) => p.epoch,
            ControllerSpec::Baseline(_) => self.estimator.epoch.unwrap_or(self.estimator.sample_period),
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig<f64> {
        let cfg = EstimatorConfig::new(self.estimator.delta, self.estimator.sample_period, self.epoch());
        match self.estimator.idle_timeout {
            Some(t) => cfg.with_idle_timeout(t),
            None => cfg,
        }
    }

    pub fn controller_config(&self) -> Option<ControllerConfig<f64>> {
        match &self.controller {
            ControllerSpec::DiffPerf(p) => Some(ControllerConfig {
                alpha: p.alpha,
                beta: p.beta,
                gamma: p.gamma,
                epoch: p.epoch,
                capacity: self.link.capacity_bps,
                classes: self
                    .classes
                    .iter()
                    .map(|c| ServiceClassSpec::new(c.class_id.clone(), c.weight))
                    .collect(),
                burst_bytes: p.burst_bytes,
            }),
            ControllerSpec::Baseline(_) => None,
        }
    }

    /// Class mix in declaration order.
    pub fn class_ratio(&self) -> Vec<(ClassId, f64)> {
        self.classes
            .iter()
            .map(|c| {
                let r = self
                    .workload
                    .class_ratio
                    .as_ref()
                    .map_or(1.0, |m| m.get(&c.class_id).copied().unwrap_or(0.0));
                (c.class_id.clone(), r)
            })
            .filter(|(_, r)| *r > 0.0)
            .collect()
    }

    /// RTT draws are floored so the tick resolves every path.
    pub fn rtt_floor(&self) -> f64 {
        self.workload.rtt.floor.max(self.link.min_rtt())
    }

    pub fn ticks(&self) -> u64 {
        (self.duration / self.link.tick + 1e-9).floor() as u64
    }

    pub fn sample_every(&self) -> u64 {
        multiple_of(self.estimator.sample_period, self.link.tick).unwrap_or(1)
    }

    pub fn epoch_every(&self) -> u64 {
        multiple_of(self.epoch(), self.link.tick).unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(SimError::field("duration", "must be finite and non-negative"));
        }
        if self.classes.is_empty() {
            return Err(SimError::field("classes", "at least one class is required"));
        }
        let mut ids = BTreeSet::new();
        for c in &self.classes {
            if !ids.insert(&c.class_id) {
                return Err(SimError::field("classes", format!("duplicate class id {}", c.class_id)));
            }
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(SimError::field(
                    "classes.weight",
                    format!("class {} needs a positive weight", c.class_id),
                ));
            }
        }
        if let Some(ratio) = &self.workload.class_ratio {
            for (id, r) in ratio {
                if !ids.contains(id) {
                    return Err(SimError::field("workload.class_ratio", format!("unknown class {id}")));
                }
                if !(*r >= 0.0) || !r.is_finite() {
                    return Err(SimError::field(
                        "workload.class_ratio",
                        format!("class {id} has ratio {r}"),
                    ));
                }
            }
        }
        if self.class_ratio().is_empty() {
            return Err(SimError::field("workload.class_ratio", "no class receives clients"));
        }
        match &self.controller {
            ControllerSpec::DiffPerf(p) => {
                self.controller_config().expect("diffperf").validate()?;
                if multiple_of(p.epoch, self.link.tick).is_none() {
                    return Err(SimError::field("controller.epoch", "must be a whole number of ticks"));
                }
            }
            ControllerSpec::Baseline(Baseline(cc)) => {
                if *cc != self.workload.cc_model {
                    return Err(SimError::field(
                        "controller",
                        format!(
                            "baseline {cc} does not match workload.cc_model {}",
                            self.workload.cc_model
                        ),
                    ));
                }
            }
        }
        self.estimator_config().validate()?;
        if multiple_of(self.estimator.sample_period, self.link.tick).is_none() {
            return Err(SimError::field(
                "estimator.sample_period",
                "must be a whole number of ticks",
            ));
        }
        if multiple_of(self.epoch(), self.link.tick).is_none() {
            return Err(SimError::field("estimator.epoch", "must be a whole number of ticks"));
        }
        let w = &self.workload;
        w.video.validate()?;
        w.abr.validate()?;
        w.qoe.validate()?;
        w.arrivals.validate()?;
        w.rtt.validate()?;
        for p in &w.pauses {
            if p.flow.0 >= w.arrivals.count() as u64 {
                return Err(SimError::field("workload.pauses.flow", format!("no client {}", p.flow)));
            }
            if !(p.duration > 0.0) || !(p.start >= 0.0) {
                return Err(SimError::field(
                    "workload.pauses",
                    "start must be non-negative and duration positive",
                ));
            }
        }
        let cc = &self.cc;
        if !(cc.md_cubic > 0.0 && cc.md_cubic < 1.0) || !(cc.md_bbr > 0.0 && cc.md_bbr < 1.0) {
            return Err(SimError::field("cc", "backoff factors must lie in (0, 1)"));
        }
        if !(cc.initial_window_packets > 0.0) {
            return Err(SimError::field("cc.initial_window_packets", "must be positive"));
        }
        if let Some(m) = &self.measure {
            if !(m.start >= 0.0 && m.end > m.start) {
                return Err(SimError::field("measure", "needs 0 <= start < end"));
            }
        }
        Ok(())
    }
}

/// Axes a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Beta,
    Gamma,
    Buffer,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
            SweepParam::Buffer => "buffer",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            "gamma" => Ok(SweepParam::Gamma),
            "buffer" => Ok(SweepParam::Buffer),
            other => Err(SimError::field(
                "param",
                format!("{other:?} is not one of alpha, beta, gamma, buffer"),
            )),
        }
    }
}

impl Scenario {
    /// Copy with one parameter replaced. Controller parameters require a
    /// DiffPerf controller; buffer applies to any scenario.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        match (param, &mut s.controller) {
            (SweepParam::Buffer, _) => {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(SimError::field(
                        "values",
                        format!("buffer {value} must be non-negative"),
                    ));
                }
                s.link.buffer_bytes = value.round() as u64;
            }
            (SweepParam::Alpha, ControllerSpec::DiffPerf(p)) => p.alpha = value,
            (SweepParam::Beta, ControllerSpec::DiffPerf(p)) => p.beta = value,
            (SweepParam::Gamma, ControllerSpec::DiffPerf(p)) => p.gamma = value,
            (_, ControllerSpec::Baseline(_)) => {
                return Err(SimError::field("param", format!("{param} needs a DiffPerf controller")));
            }
        }
        s.validate()?;
        Ok(s)
    }
}
