//! Per-epoch control loop: active counts and throughput estimates in,
//! metered enforcement groups out.
//!
//! Each nonempty class gets its alpha-fair share `X_s`. Flows with at least
//! one epoch of measurement are split into lower/upper sub-classes; flows
//! still waiting for their first estimate ride in the upper group with an
//! equal share each. Rates leave this module as integral bits/second,
//! floored to whole kbps with the residue given to the largest group so a
//! plan always sums to the link capacity exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::inter_class::{allocate_closed_form, InterClassInput, ServiceClassSpec, ALPHA_MIN};
use crate::intra_class::{allocate_subclasses, compute_stats, partition, FlowThroughputSample};
use crate::scalar::Scalar;
use crate::{ClassId, FlowId};

pub const MIN_BURST_BYTES: u64 = 1500;
/// Smallest rate handed to a nonempty group.
pub const MIN_GROUP_RATE_BPS: u64 = 8_000;
const KBPS: u64 = 1_000;
/// Classes whose spread is below this fraction of the mean are not split.
const DEGENERATE_REL_SIGMA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    /// Control period in seconds.
    pub epoch: T,
    /// Link capacity in bits/second.
    pub capacity: T,
    pub classes: Vec<ServiceClassSpec<T>>,
    pub burst_bytes: u64,
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::lit(ALPHA_MIN)) || !self.alpha.is_finite() {
            return Err(param(
                "alpha",
                format!("{:?} is below the minimum {ALPHA_MIN}", self.alpha),
            ));
        }
        if !self.beta.is_finite() {
            return Err(param("beta", "must be finite"));
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(param("gamma", format!("{:?} is outside [0, 1]", self.gamma)));
        }
        if !(self.epoch > T::zero()) || !self.epoch.is_finite() {
            return Err(param("epoch", format!("{:?} must be positive", self.epoch)));
        }
        if !(self.capacity >= T::lit(MIN_GROUP_RATE_BPS as f64)) || !self.capacity.is_finite() {
            return Err(param(
                "capacity",
                format!("{:?} is below {MIN_GROUP_RATE_BPS} bps", self.capacity),
            ));
        }
        if self.burst_bytes < MIN_BURST_BYTES {
            return Err(param(
                "burst_bytes",
                format!("{} is below one MTU ({MIN_BURST_BYTES})", self.burst_bytes),
            ));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("no service classes configured".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.classes {
            if !seen.insert(&c.class_id) {
                return Err(Error::Config(format!("duplicate class id {}", c.class_id)));
            }
            if !(c.weight > T::zero()) || !c.weight.is_finite() {
                return Err(param(
                    "weight",
                    format!("class {} has weight {:?}", c.class_id, c.weight),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Lower,
    Upper,
    Whole,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Lower => "lower",
            Tier::Upper => "upper",
            Tier::Whole => "whole",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn group_id(class_id: &ClassId, tier: Tier) -> String {
    format!("{class_id}:{tier}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforcementGroup {
    pub group_id: String,
    pub class_id: ClassId,
    pub tier: Tier,
    pub members: BTreeSet<FlowId>,
    pub rate_limit_bps: u64,
    pub burst_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforcementPlan {
    pub epoch_index: u64,
    pub groups: Vec<EnforcementGroup>,
    /// False for the unmanaged baseline: the single group is not rate limited.
    pub metered: bool,
}

impl EnforcementPlan {
    pub fn empty(epoch_index: u64) -> Self {
        Self {
            epoch_index,
            groups: Vec::new(),
            metered: true,
        }
    }

    /// One unmetered group holding every flow at link capacity.
    pub fn null(epoch_index: u64, capacity_bps: u64, flows: impl IntoIterator<Item = FlowId>) -> Self {
        let class_id = ClassId::from("*");
        Self {
            epoch_index,
            groups: vec![EnforcementGroup {
                group_id: group_id(&class_id, Tier::Whole),
                class_id,
                tier: Tier::Whole,
                members: flows.into_iter().collect(),
                rate_limit_bps: capacity_bps,
                burst_bytes: 0,
            }],
            metered: false,
        }
    }

    pub fn total_rate_bps(&self) -> u64 {
        self.groups.iter().map(|g| g.rate_limit_bps).sum()
    }

    pub fn class_rate_bps(&self, class_id: &ClassId) -> u64 {
        self.groups
            .iter()
            .filter(|g| &g.class_id == class_id)
            .map(|g| g.rate_limit_bps)
            .sum()
    }

    pub fn group(&self, group_id: &str) -> Option<&EnforcementGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn group_of(&self, flow: FlowId) -> Option<&EnforcementGroup> {
        self.groups.iter().find(|g| g.members.contains(&flow))
    }

    pub fn group_mut(&mut self, group_id: &str) -> Option<&mut EnforcementGroup> {
        self.groups.iter_mut().find(|g| g.group_id == group_id)
    }

    pub fn flow_count(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }
}

/// What the controller sees at an epoch boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSnapshot<T> {
    /// Active flows per class.
    pub active: BTreeMap<ClassId, BTreeSet<FlowId>>,
    /// Smoothed throughput of flows with at least one full measurement
    /// window. Active flows missing here are treated as newcomers.
    pub estimates: BTreeMap<FlowId, T>,
}

impl<T> Default for EpochSnapshot<T> {
    fn default() -> Self {
        Self {
            active: BTreeMap::new(),
            estimates: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> EpochSnapshot<T> {
    pub fn with_flow(mut self, class_id: impl Into<ClassId>, flow: impl Into<FlowId>, estimate: Option<T>) -> Self {
        let flow = flow.into();
        self.active.entry(class_id.into()).or_default().insert(flow);
        if let Some(x) = estimate {
            self.estimates.insert(flow, x);
        }
        self
    }
}

struct DraftGroup {
    class_id: ClassId,
    tier: Tier,
    members: BTreeSet<FlowId>,
    rate: f64,
}

pub fn control_epoch<T: Scalar>(
    config: &ControllerConfig<T>,
    snapshot: &EpochSnapshot<T>,
    epoch_index: u64,
) -> Result<EnforcementPlan> {
    config.validate()?;
    for class_id in snapshot.active.keys() {
        if !config.classes.iter().any(|c| &c.class_id == class_id) {
            return Err(Error::Config(format!("snapshot references unknown class {class_id}")));
        }
    }

    let mut input = InterClassInput::new(config.capacity.clone(), config.alpha.clone());
    for spec in &config.classes {
        let n = snapshot.active.get(&spec.class_id).map_or(0, BTreeSet::len);
        if n > 0 {
            input = input.with_class(spec.class_id.clone(), spec.weight.clone(), n);
        }
    }
    if input.classes.is_empty() {
        return Ok(EnforcementPlan::empty(epoch_index));
    }
    let inter = allocate_closed_form(&input)?;

    let mut drafts = Vec::new();
    for load in &input.classes {
        let class_id = &load.spec.class_id;
        let flows = &snapshot.active[class_id];
        let x_s = inter.shares[class_id].clone();
        split_class(config, snapshot, class_id, flows, x_s, &mut drafts)?;
    }

    let capacity_bps = config.capacity.to_f64_lossy().round().max(0.0) as u64;
    let rates = round_rates(&drafts.iter().map(|d| d.rate).collect::<Vec<_>>(), capacity_bps);
    let groups = drafts
        .into_iter()
        .zip(rates)
        .map(|(d, rate)| EnforcementGroup {
            group_id: group_id(&d.class_id, d.tier),
            class_id: d.class_id,
            tier: d.tier,
            members: d.members,
            rate_limit_bps: rate,
            burst_bytes: config.burst_bytes,
        })
        .collect();
    Ok(EnforcementPlan {
        epoch_index,
        groups,
        metered: true,
    })
}

fn split_class<T: Scalar>(
    config: &ControllerConfig<T>,
    snapshot: &EpochSnapshot<T>,
    class_id: &ClassId,
    flows: &BTreeSet<FlowId>,
    x_s: T,
    out: &mut Vec<DraftGroup>,
) -> Result<()> {
    let whole = |out: &mut Vec<DraftGroup>| {
        out.push(DraftGroup {
            class_id: class_id.clone(),
            tier: Tier::Whole,
            members: flows.clone(),
            rate: x_s.to_f64_lossy(),
        })
    };
    let samples: Vec<FlowThroughputSample<T>> = flows
        .iter()
        .filter_map(|f| {
            snapshot
                .estimates
                .get(f)
                .map(|x| FlowThroughputSample::new(*f, x.clone()))
        })
        .collect();
    if samples.len() < 2 {
        whole(out);
        return Ok(());
    }
    let stats = compute_stats(&samples)?;
    if stats.sigma <= T::lit(DEGENERATE_REL_SIGMA) * stats.mean.clone().abs() || stats.variance.is_zero() {
        whole(out);
        return Ok(());
    }

    let n = T::from_count(flows.len());
    let measured_capacity = x_s.clone() * T::from_count(samples.len()) / n;
    let part = partition(&samples, &stats, config.beta.clone())?;
    let alloc = allocate_subclasses(&part, &samples, &stats, measured_capacity.clone(), config.gamma.clone())?;
    if !alloc.split {
        whole(out);
        return Ok(());
    }
    let newcomers: BTreeSet<FlowId> = flows
        .iter()
        .filter(|f| !snapshot.estimates.contains_key(f))
        .copied()
        .collect();
    let upper_rate = x_s - measured_capacity + alloc.capacity_upper;
    let mut upper = part.upper;
    upper.extend(newcomers);
    out.push(DraftGroup {
        class_id: class_id.clone(),
        tier: Tier::Lower,
        members: part.lower,
        rate: alloc.capacity_lower.to_f64_lossy(),
    });
    out.push(DraftGroup {
        class_id: class_id.clone(),
        tier: Tier::Upper,
        members: upper,
        rate: upper_rate.to_f64_lossy(),
    });
    Ok(())
}

/// Applies the per-group floor, then floors to kbps and hands the residue
/// to the largest group, so the result sums to `capacity_bps`.
fn round_rates(rates: &[f64], capacity_bps: u64) -> Vec<u64> {
    if rates.is_empty() {
        return Vec::new();
    }
    let floor = MIN_GROUP_RATE_BPS as f64;
    let mut r: Vec<f64> = rates.iter().map(|x| x.max(0.0)).collect();
    let mut pinned = vec![false; r.len()];
    loop {
        let deficit: f64 = r
            .iter()
            .zip(&pinned)
            .filter(|(x, p)| !**p && **x < floor)
            .map(|(x, _)| floor - x)
            .sum();
        if deficit <= 0.0 {
            break;
        }
        for (x, p) in r.iter_mut().zip(pinned.iter_mut()) {
            if *x < floor {
                *x = floor;
                *p = true;
            }
        }
        let donors: f64 = r.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(x, _)| x).sum();
        if donors <= 0.0 {
            break;
        }
        for (x, p) in r.iter_mut().zip(&pinned) {
            if !*p {
                *x -= deficit * *x / donors;
            }
        }
    }

    let mut out: Vec<u64> = r
        .iter()
        .map(|x| ((x / KBPS as f64).floor().max(0.0) as u64) * KBPS)
        .collect();
    let largest = (0..r.len())
        .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
        .expect("nonempty");
    let assigned: u64 = out.iter().sum();
    if assigned <= capacity_bps {
        out[largest] += capacity_bps - assigned;
    } else {
        out[largest] = out[largest].saturating_sub(assigned - capacity_bps);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateChange {
    pub group_id: String,
    pub from_bps: u64,
    pub to_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMove {
    pub flow: FlowId,
    /// `None` when the flow was not in the previous plan.
    pub from: Option<String>,
    /// `None` when the flow left.
    pub to: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub rate_changes: Vec<RateChange>,
    pub moves: Vec<FlowMove>,
}

impl PlanDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.rate_changes.is_empty() && self.moves.is_empty()
    }
}

pub fn plan_diff(previous: &EnforcementPlan, next: &EnforcementPlan) -> PlanDiff {
    let prev: BTreeMap<&str, &EnforcementGroup> = previous.groups.iter().map(|g| (g.group_id.as_str(), g)).collect();
    let nxt: BTreeMap<&str, &EnforcementGroup> = next.groups.iter().map(|g| (g.group_id.as_str(), g)).collect();
    let mut diff = PlanDiff::default();
    for (id, g) in &nxt {
        match prev.get(id) {
            None => diff.added.push(id.to_string()),
            Some(p) if p.rate_limit_bps != g.rate_limit_bps => diff.rate_changes.push(RateChange {
                group_id: id.to_string(),
                from_bps: p.rate_limit_bps,
                to_bps: g.rate_limit_bps,
            }),
            Some(_) => {}
        }
    }
    diff.removed = prev
        .keys()
        .filter(|id| !nxt.contains_key(*id))
        .map(|id| id.to_string())
        .collect();

    let owner = |plan: &BTreeMap<&str, &EnforcementGroup>| -> BTreeMap<FlowId, String> {
        plan.iter()
            .flat_map(|(id, g)| g.members.iter().map(move |f| (*f, id.to_string())))
            .collect()
    };
    let before = owner(&prev);
    let after = owner(&nxt);
    let flows: BTreeSet<FlowId> = before.keys().chain(after.keys()).copied().collect();
    for f in flows {
        let from = before.get(&f).cloned();
        let to = after.get(&f).cloned();
        if from != to {
            diff.moves.push(FlowMove { flow: f, from, to });
        }
    }
    diff
}

/// Stateful wrapper numbering epochs and remembering the last plan.
#[derive(Debug, Clone)]
pub struct Controller<T> {
    config: ControllerConfig<T>,
    next_epoch: u64,
    last: Option<EnforcementPlan>,
}

impl<T: Scalar> Controller<T> {
    pub fn new(config: ControllerConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            next_epoch: 0,
            last: None,
        })
    }

    pub fn config(&self) -> &ControllerConfig<T> {
        &self.config
    }

    pub fn last_plan(&self) -> Option<&EnforcementPlan> {
        self.last.as_ref()
    }

    /// Runs one epoch and returns the new plan with its change set relative
    /// to the previous one.
    pub fn epoch(&mut self, snapshot: &EpochSnapshot<T>) -> Result<(EnforcementPlan, PlanDiff)> {
        let plan = control_epoch(&self.config, snapshot, self.next_epoch)?;
        self.next_epoch += 1;
        let diff = match &self.last {
            Some(prev) => plan_diff(prev, &plan),
            None => plan_diff(&EnforcementPlan::empty(0), &plan),
        };
        self.last = Some(plan.clone());
        Ok((plan, diff))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(weights: &[(&str, f64)], capacity: f64, beta: f64, gamma: f64) -> ControllerConfig<f64> {
        ControllerConfig {
            alpha: 1.0,
            beta,
            gamma,
            epoch: 5.0,
            capacity,
            classes: weights.iter().map(|(c, w)| ServiceClassSpec::new(*c, *w)).collect(),
            burst_bytes: 15_000,
        }
    }

    fn scenario1_snapshot() -> EpochSnapshot<f64> {
        let mut s = EpochSnapshot::default();
        for (k, class) in ["G", "S", "B"].iter().enumerate() {
            for i in 0..13u64 {
                s = s.with_flow(*class, k as u64 * 100 + i, Some(1e6));
            }
        }
        s
    }

    #[test]
    fn homogeneous_classes_become_whole_groups() {
        let cfg = config(&[("G", 3.0), ("S", 2.0), ("B", 1.0)], 50e6, -0.25, 0.5);
        let plan = control_epoch(&cfg, &scenario1_snapshot(), 0).unwrap();
        assert_eq!(plan.groups.len(), 3);
        assert!(plan
            .groups
            .iter()
            .all(|g| g.tier == Tier::Whole && g.members.len() == 13));
        let rate = |c: &str| plan.class_rate_bps(&ClassId::from(c)) as f64;
        assert!((rate("G") - 25e6).abs() <= 2e3);
        assert!((rate("S") - 50e6 / 3.0).abs() <= 2e3);
        assert!((rate("B") - 25e6 / 3.0).abs() <= 2e3);
        assert_eq!(plan.total_rate_bps(), 50_000_000);
    }

    #[test]
    fn worked_split() {
        let cfg = config(&[("G", 1.0)], 20e6, -0.25, 0.5);
        let mut s = EpochSnapshot::default();
        for (i, x) in [2.0, 4.0, 6.0, 8.0].iter().enumerate() {
            s = s.with_flow("G", i as u64, Some(x * 1e6));
        }
        let plan = control_epoch(&cfg, &s, 3).unwrap();
        assert_eq!(plan.epoch_index, 3);
        let lower = plan.group("G:lower").unwrap();
        let upper = plan.group("G:upper").unwrap();
        assert_eq!(lower.members, [FlowId(0), FlowId(1)].into());
        assert_eq!(upper.members, [FlowId(2), FlowId(3)].into());
        assert_eq!(lower.rate_limit_bps, 8_000_000);
        assert_eq!(upper.rate_limit_bps, 12_000_000);
    }

    #[test]
    fn single_flow_gets_everything() {
        let cfg = config(&[("G", 3.0), ("B", 1.0)], 10e6, -0.25, 0.5);
        let s = EpochSnapshot::default().with_flow("B", 7u64, Some(2e6));
        let plan = control_epoch(&cfg, &s, 0).unwrap();
        assert_eq!(plan.groups.len(), 1);
        assert_eq!(plan.groups[0].rate_limit_bps, 10_000_000);
        assert_eq!(plan.groups[0].group_id, "B:whole");
    }

    #[test]
    fn empty_snapshot_gives_empty_plan() {
        let cfg = config(&[("G", 1.0)], 10e6, 0.0, 0.0);
        let plan = control_epoch(&cfg, &EpochSnapshot::default(), 4).unwrap();
        assert!(plan.groups.is_empty());
    }

    #[test]
    fn unknown_class_is_rejected() {
        let cfg = config(&[("G", 1.0)], 10e6, 0.0, 0.0);
        let s = EpochSnapshot::default().with_flow("Z", 1u64, None);
        assert!(matches!(control_epoch(&cfg, &s, 0), Err(Error::Config(_))));
    }

    #[test]
    fn newcomers_ride_in_upper_group() {
        let cfg = config(&[("G", 1.0)], 30e6, -0.25, 0.0);
        let mut s = EpochSnapshot::default();
        for (i, x) in [2.0, 4.0, 6.0, 8.0].iter().enumerate() {
            s = s.with_flow("G", i as u64, Some(x * 1e6));
        }
        s = s.with_flow("G", 10u64, None).with_flow("G", 11u64, None);
        let plan = control_epoch(&cfg, &s, 0).unwrap();
        let lower = plan.group("G:lower").unwrap();
        let upper = plan.group("G:upper").unwrap();
        assert!(upper.members.contains(&FlowId(10)) && upper.members.contains(&FlowId(11)));
        // measured portion 20 Mbps; gamma 0 → lower gets 5 Mbps per flow
        assert_eq!(lower.rate_limit_bps, 10_000_000);
        assert_eq!(upper.rate_limit_bps, 20_000_000);
        assert_eq!(plan.flow_count(), 6);
    }

    #[test]
    fn rate_floor_borrows_proportionally() {
        let r = round_rates(&[1_000.0, 3_000_000.0, 1_000_000.0], 4_001_000);
        assert_eq!(r[0], MIN_GROUP_RATE_BPS);
        assert_eq!(r.iter().sum::<u64>(), 4_001_000);
        assert!(r[1] < 3_000_000 + 1_000 && r[2] < 1_000_000);
    }

    #[test]
    fn rounding_residue_goes_to_largest() {
        let r = round_rates(&[1_500.4e3, 2_499.6e3], 4_000_000);
        assert_eq!(r, vec![1_500_000, 2_500_000]);
    }

    #[test]
    fn diff_of_identical_plans_is_empty() {
        let cfg = config(&[("G", 3.0), ("S", 2.0), ("B", 1.0)], 50e6, -0.25, 0.5);
        let a = control_epoch(&cfg, &scenario1_snapshot(), 0).unwrap();
        assert!(plan_diff(&a, &a.clone()).is_empty());
    }

    #[test]
    fn diff_tracks_departures_and_removals() {
        let cfg = config(&[("G", 3.0), ("B", 1.0)], 40e6, -0.25, 0.5);
        let s0 = EpochSnapshot::default()
            .with_flow("G", 1u64, Some(1e6))
            .with_flow("G", 2u64, Some(1e6))
            .with_flow("B", 3u64, Some(1e6));
        let s1 = EpochSnapshot::default()
            .with_flow("G", 1u64, Some(1e6))
            .with_flow("B", 3u64, Some(1e6));
        let s2 = EpochSnapshot::default().with_flow("G", 1u64, Some(1e6));
        let p0 = control_epoch(&cfg, &s0, 0).unwrap();
        let p1 = control_epoch(&cfg, &s1, 1).unwrap();
        let p2 = control_epoch(&cfg, &s2, 2).unwrap();

        let d = plan_diff(&p0, &p1);
        assert_eq!(
            d.moves,
            vec![FlowMove {
                flow: FlowId(2),
                from: Some("G:whole".into()),
                to: None
            }]
        );
        assert_eq!(d.rate_changes.len(), 2);
        assert_eq!(p1.total_rate_bps(), 40_000_000);

        let d = plan_diff(&p1, &p2);
        assert_eq!(d.removed, vec!["B:whole".to_string()]);
        assert_eq!(p2.total_rate_bps(), 40_000_000);
    }

    #[test]
    fn controller_numbers_epochs() {
        let cfg = config(&[("G", 1.0)], 10e6, 0.0, 0.0);
        let mut c = Controller::new(cfg).unwrap();
        let s = EpochSnapshot::default().with_flow("G", 1u64, None);
        let (p0, d0) = c.epoch(&s).unwrap();
        let (p1, d1) = c.epoch(&s).unwrap();
        assert_eq!((p0.epoch_index, p1.epoch_index), (0, 1));
        assert_eq!(d0.added, vec!["G:whole".to_string()]);
        assert!(d1.is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(&[("G", 1.0)], 10e6, 0.0, 0.0);
        cfg.burst_bytes = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = config(&[("G", 1.0)], 10e6, 0.0, 1.5);
        assert!(cfg.validate().is_err());
        cfg.gamma = 1.0;
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        assert!(config(&[("G", 1.0), ("G", 2.0)], 10e6, 0.0, 0.0).validate().is_err());
    }
}
