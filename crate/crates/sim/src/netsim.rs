//! Fluid model of one bottleneck link.
//!
//! Flows are grouped as in the current [`EnforcementPlan`]. Each group has
//! an aggregate sending envelope that grows additively (per-flow
//! `MSS / rtt` per RTT) and backs off multiplicatively on loss, at most once
//! per RTT. The envelope is split among the group's members by weighted
//! max-min filling with weight `base_rtt^-kappa`, which is where RTT
//! unfairness comes from. Queuing delay enters only through the control
//! loop (growth rate, loss-response period). Metered groups then pass through a token bucket
//! and everything lands in one shared FIFO drained at link rate.
//!
//! Byte accounting is integral: fractional per-tick amounts are carried
//! between ticks and every split uses largest-remainder rounding, so
//! conservation can be asserted exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use diffperf_core::{EnforcementPlan, FlowId};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const MSS_BYTES: u64 = 1500;
/// Buffer allocation granularity.
pub const CELL_BYTES: u64 = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcModel {
    CubicLike,
    BbrLike,
}

impl CcModel {
    pub fn as_str(self) -> &'static str {
        match self {
            CcModel::CubicLike => "cubic-like",
            CcModel::BbrLike => "bbr-like",
        }
    }
}

impl fmt::Display for CcModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CcModel {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic-like" => Ok(CcModel::CubicLike),
            "bbr-like" => Ok(CcModel::BbrLike),
            other => Err(SimError::Config(format!("unknown congestion control model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub capacity_bps: f64,
    pub buffer_bytes: u64,
    /// Simulation step in seconds.
    pub tick: f64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_bps > 0.0) || !self.capacity_bps.is_finite() {
            return Err(SimError::field("link.capacity_bps", "must be positive and finite"));
        }
        if !(self.tick > 0.0) || !self.tick.is_finite() {
            return Err(SimError::field("link.tick", "must be positive and finite"));
        }
        Ok(())
    }

    /// Usable buffer after rounding down to whole cells.
    pub fn buffer_cells_bytes(&self) -> u64 {
        self.buffer_bytes / CELL_BYTES * CELL_BYTES
    }

    /// Smallest base RTT this tick can resolve.
    pub fn min_rtt(&self) -> f64 {
        4.0 * self.tick
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPathConfig {
    pub flow_id: FlowId,
    pub base_rtt: f64,
    pub cc_model: CcModel,
    /// Application ceiling in bits/second; infinite when unlimited.
    pub demand_cap_bps: f64,
}

/// Congestion-response constants. These are calibration knobs, not
/// measurements of any real stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcParams {
    /// Envelope factor kept after a loss event that hits every flow.
    pub md_cubic: f64,
    pub md_bbr: f64,
    pub initial_window_packets: f64,
}

impl Default for CcParams {
    fn default() -> Self {
        Self {
            md_cubic: 0.7,
            md_bbr: 0.85,
            initial_window_packets: 10.0,
        }
    }
}

/// Weighted max-min split of `capacity` among `(flow, weight, cap)` entries.
///
/// Flows are filled in proportion to their weight; a flow whose cap binds is
/// frozen at the cap and the remainder is refilled among the others.
pub fn equilibrium_shares(flows: &[(FlowId, f64, f64)], capacity: f64) -> BTreeMap<FlowId, f64> {
    let mut out: BTreeMap<FlowId, f64> = flows.iter().map(|(f, _, _)| (*f, 0.0)).collect();
    if !(capacity > 0.0) || flows.is_empty() {
        return out;
    }
    // Ascending cap per unit weight is exactly the freezing order.
    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = flows[a].2 / flows[a].1;
        let kb = flows[b].2 / flows[b].1;
        ka.total_cmp(&kb).then(flows[a].0.cmp(&flows[b].0))
    });
    let mut remaining = capacity;
    let mut weight: f64 = flows.iter().map(|f| f.1).sum();
    for (i, &k) in order.iter().enumerate() {
        let (id, phi, cap) = flows[k];
        let fair = remaining * phi / weight;
        if cap <= fair {
            out.insert(id, cap);
            remaining -= cap;
            weight -= phi;
        } else {
            for &j in &order[i..] {
                let (id, phi, _) = flows[j];
                out.insert(id, remaining * phi / weight);
            }
            break;
        }
    }
    out
}

/// RTT-bias exponent. Loss-based control is biased in proportion to RTT;
/// the model-based one is mildly biased in shallow buffers and increasingly
/// so once the buffer holds a couple of BDPs.
pub fn kappa_of(cc: CcModel, buffer_bytes: u64, capacity_bps: f64, mean_rtt: f64) -> f64 {
    match cc {
        CcModel::CubicLike => 1.0,
        CcModel::BbrLike => {
            let bdp = capacity_bps * mean_rtt / 8.0;
            let b = buffer_bytes as f64 / bdp;
            if b <= 0.5 {
                0.3
            } else if b >= 2.0 {
                0.8
            } else {
                0.3 + (b - 0.5) / 1.5 * 0.5
            }
        }
    }
}

/// Splits `total` in proportion to `weights` with largest-remainder
/// rounding. Requires `total <= sum(weights)`; each part stays within its
/// weight.
pub(crate) fn split_proportional(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|w| *w as u128).sum();
    if total == 0 || sum == 0 {
        return vec![0; weights.len()];
    }
    debug_assert!(total as u128 <= sum);
    let mut parts = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    let mut assigned: u128 = 0;
    for (i, w) in weights.iter().enumerate() {
        let num = total as u128 * *w as u128;
        parts.push((num / sum) as u64);
        rems.push((num % sum, i));
        assigned += num / sum;
    }
    let mut left = total as u128 - assigned;
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (r, i) in rems {
        if left == 0 {
            break;
        }
        if r > 0 {
            parts[i] += 1;
            left -= 1;
        }
    }
    parts
}

#[derive(Debug, Clone)]
struct FlowState {
    cfg: FlowPathConfig,
    demand_bps: f64,
    offered_bps: f64,
    carry: f64,
    backlog: u64,
    delivered: u64,
    group: Option<String>,
}

#[derive(Debug, Clone)]
struct GroupState {
    rate_bps: Option<f64>,
    burst_bytes: f64,
    tokens: f64,
    members: BTreeSet<FlowId>,
    envelope: f64,
    slow_start: bool,
    loss_window_end: Option<f64>,
    window_drops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickRecord {
    /// Time at the end of the tick.
    pub t: f64,
    pub queue_bytes: u64,
    /// FIFO overflow plus meter discards.
    pub drops_bytes: u64,
    pub policed_bytes: u64,
    pub offered_bytes: u64,
    pub arrivals_bytes: u64,
    pub delivered_bytes: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    link: LinkConfig,
    params: CcParams,
    buffer: u64,
    flows: BTreeMap<FlowId, FlowState>,
    groups: BTreeMap<String, GroupState>,
    queue: u64,
    now: f64,
    ticks: u64,
    drain_carry: f64,
    discarded: u64,
}

impl World {
    pub fn new(link: LinkConfig, params: CcParams) -> Result<Self> {
        link.validate()?;
        Ok(Self {
            buffer: link.buffer_cells_bytes(),
            link,
            params,
            flows: BTreeMap::new(),
            groups: BTreeMap::new(),
            queue: 0,
            now: 0.0,
            ticks: 0,
            drain_carry: 0.0,
            discarded: 0,
        })
    }

    pub fn link(&self) -> &LinkConfig {
        &self.link
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn queue_bytes(&self) -> u64 {
        self.queue
    }

    pub fn buffer_limit(&self) -> u64 {
        self.buffer
    }

    pub fn queuing_delay(&self) -> f64 {
        self.queue as f64 * 8.0 / self.link.capacity_bps
    }

    /// Bytes thrown away when flows left with data still queued.
    pub fn discarded_bytes(&self) -> u64 {
        self.discarded
    }

    pub fn add_flow(&mut self, cfg: FlowPathConfig) -> Result<()> {
        if self.flows.contains_key(&cfg.flow_id) {
            return Err(SimError::Config(format!("flow {} added twice", cfg.flow_id)));
        }
        if !(cfg.base_rtt >= self.link.min_rtt()) || !cfg.base_rtt.is_finite() {
            return Err(SimError::Config(format!(
                "flow {} base RTT {} s is below four ticks ({} s)",
                cfg.flow_id,
                cfg.base_rtt,
                self.link.min_rtt()
            )));
        }
        if !(cfg.demand_cap_bps > 0.0) {
            return Err(SimError::Config(format!(
                "flow {} demand cap must be positive",
                cfg.flow_id
            )));
        }
        self.flows.insert(
            cfg.flow_id,
            FlowState {
                cfg,
                demand_bps: cfg.demand_cap_bps,
                offered_bps: 0.0,
                carry: 0.0,
                backlog: 0,
                delivered: 0,
                group: None,
            },
        );
        Ok(())
    }

    /// Removes a flow, discarding anything it still has queued.
    pub fn remove_flow(&mut self, flow: FlowId) -> u64 {
        let Some(state) = self.flows.remove(&flow) else {
            return 0;
        };
        if let Some(g) = state.group.and_then(|g| self.groups.get_mut(&g)) {
            g.members.remove(&flow);
            g.envelope = (g.envelope - state.offered_bps).max(0.0);
        }
        self.queue -= state.backlog;
        self.discarded += state.backlog;
        state.backlog
    }

    pub fn has_flow(&self, flow: FlowId) -> bool {
        self.flows.contains_key(&flow)
    }

    /// Sets the application-limited rate for the next tick; 0 means idle.
    pub fn set_demand(&mut self, flow: FlowId, bps: f64) {
        if let Some(f) = self.flows.get_mut(&flow) {
            f.demand_bps = bps.clamp(0.0, f.cfg.demand_cap_bps);
        }
    }

    pub fn group_of(&self, flow: FlowId) -> Option<&str> {
        self.flows.get(&flow).and_then(|f| f.group.as_deref())
    }

    /// Bytes of this flow sitting in the FIFO.
    pub fn backlog(&self, flow: FlowId) -> u64 {
        self.flows.get(&flow).map_or(0, |f| f.backlog)
    }

    pub fn counter(&self, flow: FlowId) -> Option<u64> {
        self.flows.get(&flow).map(|f| f.delivered)
    }

    pub fn counters(&self) -> BTreeMap<FlowId, u64> {
        self.flows.iter().map(|(id, f)| (*id, f.delivered)).collect()
    }

    /// Rate each flow offered during the last tick.
    pub fn offered_rate(&self, flow: FlowId) -> Option<f64> {
        self.flows.get(&flow).map(|f| f.offered_bps)
    }

    pub fn group_envelope(&self, group_id: &str) -> Option<f64> {
        self.groups.get(group_id).map(|g| g.envelope)
    }

    fn initial_rate(&self, flow: &FlowState) -> f64 {
        self.params.initial_window_packets * (MSS_BYTES * 8) as f64 / flow.cfg.base_rtt
    }

    /// Installs a plan. Group envelopes start from what their new members
    /// were sending, so re-grouping does not restart congestion control;
    /// groups keep their token state across plans.
    pub fn apply_plan(&mut self, plan: &EnforcementPlan) {
        let mut groups = BTreeMap::new();
        for f in self.flows.values_mut() {
            f.group = None;
        }
        for g in &plan.groups {
            let members: BTreeSet<FlowId> = g
                .members
                .iter()
                .filter(|f| self.flows.contains_key(f))
                .copied()
                .collect();
            let carried: f64 = members.iter().map(|f| self.flows[f].offered_bps).sum();
            let fresh = members.iter().all(|f| self.flows[f].delivered == 0);
            let envelope = if carried > 0.0 {
                carried
            } else {
                members.iter().map(|f| self.initial_rate(&self.flows[f])).sum()
            };
            let (rate_bps, burst) = if plan.metered {
                (Some(g.rate_limit_bps as f64), g.burst_bytes as f64)
            } else {
                (None, 0.0)
            };
            let old = self.groups.get(&g.group_id);
            let tokens = old.map_or(burst, |o| o.tokens.min(burst));
            let slow_start = old.map_or(fresh, |o| o.slow_start && fresh);
            for f in &members {
                self.flows.get_mut(f).expect("member exists").group = Some(g.group_id.clone());
            }
            groups.insert(
                g.group_id.clone(),
                GroupState {
                    rate_bps,
                    burst_bytes: burst,
                    tokens,
                    members,
                    envelope,
                    slow_start,
                    loss_window_end: None,
                    window_drops: 0,
                },
            );
        }
        self.groups = groups;
    }

    /// Adds a flow to an installed group between plans.
    pub fn join_group(&mut self, flow: FlowId, group_id: &str) -> Result<()> {
        let f = self
            .flows
            .get(&flow)
            .ok_or_else(|| SimError::Config(format!("unknown flow {flow}")))?;
        let rate = self.initial_rate(f);
        let old = f.group.clone();
        if old.as_deref() == Some(group_id) {
            return Ok(());
        }
        let g = self
            .groups
            .get_mut(group_id)
            .ok_or_else(|| SimError::Config(format!("no installed group {group_id}")))?;
        g.members.insert(flow);
        g.envelope += rate;
        if let Some(o) = old.and_then(|o| self.groups.get_mut(&o)) {
            o.members.remove(&flow);
        }
        self.flows.get_mut(&flow).expect("checked").group = Some(group_id.to_string());
        Ok(())
    }

    fn kappa(&self, cc: CcModel) -> f64 {
        let n = self.flows.len().max(1) as f64;
        let mean_rtt = self.flows.values().map(|f| f.cfg.base_rtt).sum::<f64>() / n;
        kappa_of(
            cc,
            self.buffer,
            self.link.capacity_bps,
            mean_rtt.max(self.link.min_rtt()),
        )
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<TickRecord> {
        let dt = self.link.tick;
        let cap = self.link.capacity_bps;
        let kappa_cubic = self.kappa(CcModel::CubicLike);
        let kappa_bbr = self.kappa(CcModel::BbrLike);
        let kappa = |cc| match cc {
            CcModel::CubicLike => kappa_cubic,
            CcModel::BbrLike => kappa_bbr,
        };

        // Offered load per flow, then meter.
        let mut offered: BTreeMap<FlowId, u64> = BTreeMap::new();
        let mut arrivals: BTreeMap<FlowId, u64> = BTreeMap::new();
        let mut policed_by_group: BTreeMap<String, u64> = BTreeMap::new();
        for (gid, g) in self.groups.iter_mut() {
            let active: Vec<(FlowId, f64, f64)> = g
                .members
                .iter()
                .filter_map(|id| {
                    let f = &self.flows[id];
                    (f.demand_bps > 0.0).then(|| (*id, f.cfg.base_rtt.powf(-kappa(f.cfg.cc_model)), f.demand_bps))
                })
                .collect();
            let shares = equilibrium_shares(&active, g.envelope);
            let mut ids = Vec::with_capacity(g.members.len());
            let mut want = Vec::with_capacity(g.members.len());
            for id in &g.members {
                let f = self.flows.get_mut(id).expect("member exists");
                let rate = shares.get(id).copied().unwrap_or(0.0);
                f.offered_bps = rate;
                let exact = f.carry + rate * dt / 8.0;
                let bytes = exact.floor().max(0.0);
                f.carry = exact - bytes;
                if rate == 0.0 {
                    f.carry = 0.0;
                }
                ids.push(*id);
                want.push(bytes as u64);
            }
            let total: u64 = want.iter().sum();
            let pass = match g.rate_bps {
                Some(rate) => {
                    g.tokens = (g.tokens + rate * dt / 8.0).min(g.burst_bytes.max(rate * dt / 8.0));
                    let allowed = g.tokens.floor() as u64;
                    let pass_total = total.min(allowed);
                    g.tokens -= pass_total as f64;
                    split_proportional(pass_total, &want)
                }
                None => want.clone(),
            };
            let mut policed = 0;
            for ((id, w), p) in ids.iter().zip(&want).zip(&pass) {
                offered.insert(*id, *w);
                arrivals.insert(*id, *p);
                policed += w - p;
            }
            policed_by_group.insert(gid.clone(), policed);
        }

        // Shared FIFO.
        let q_before = self.queue;
        let ids: Vec<FlowId> = self.flows.keys().copied().collect();
        let holding: Vec<u64> = ids
            .iter()
            .map(|id| self.flows[id].backlog + arrivals.get(id).copied().unwrap_or(0))
            .collect();
        let present: u64 = holding.iter().sum();
        let exact_drain = self.drain_carry + cap * dt / 8.0;
        let drain_budget = exact_drain.floor() as u64;
        self.drain_carry = exact_drain - drain_budget as f64;
        let drained = present.min(drain_budget);
        let delivered = split_proportional(drained, &holding);
        let left: Vec<u64> = holding.iter().zip(&delivered).map(|(h, d)| h - d).collect();
        let left_total: u64 = left.iter().sum();
        let overflow = left_total.saturating_sub(self.buffer);
        let dropped = split_proportional(overflow, &left);

        let arrivals_total: u64 = arrivals.values().sum();
        let mut drops_by_group: BTreeMap<String, u64> = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            let f = self.flows.get_mut(id).expect("listed");
            f.backlog = left[i] - dropped[i];
            f.delivered += delivered[i];
            if let Some(g) = &f.group {
                *drops_by_group.entry(g.clone()).or_default() += dropped[i];
            }
        }
        self.queue = left_total - overflow;

        let dropped_total: u64 = dropped.iter().sum();
        // arrivals = delivered + queued delta + dropped
        if arrivals_total + q_before != drained + self.queue + dropped_total {
            return Err(SimError::Invariant {
                tick: self.ticks,
                detail: format!(
                    "byte conservation: in {arrivals_total} + q {q_before} != out {drained} + q {} + drop {dropped_total}",
                    self.queue
                ),
            });
        }
        if self.queue > self.buffer {
            return Err(SimError::Invariant {
                tick: self.ticks,
                detail: format!("queue {} above buffer {}", self.queue, self.buffer),
            });
        }

        // Congestion response.
        let now_end = self.now + dt;
        let qd_after = self.queuing_delay();
        for (gid, g) in self.groups.iter_mut() {
            let active: Vec<&FlowState> = g
                .members
                .iter()
                .map(|id| &self.flows[id])
                .filter(|f| f.demand_bps > 0.0)
                .collect();
            if active.is_empty() {
                continue;
            }
            let n = active.len() as f64;
            let mean_rtt = active.iter().map(|f| f.cfg.base_rtt).sum::<f64>() / n + qd_after;
            let cc = active[0].cfg.cc_model;
            let losses =
                policed_by_group.get(gid).copied().unwrap_or(0) + drops_by_group.get(gid).copied().unwrap_or(0);
            if losses > 0 {
                g.slow_start = false;
                if g.loss_window_end.is_none() {
                    g.loss_window_end = Some(self.now + mean_rtt);
                    g.window_drops = 0;
                }
            }
            if g.loss_window_end.is_some() {
                g.window_drops += losses;
            }
            if let Some(end) = g.loss_window_end {
                if now_end >= end {
                    let packets = g.window_drops.div_ceil(MSS_BYTES) as f64;
                    let hit = (packets / n).min(1.0);
                    let b = match cc {
                        CcModel::CubicLike => self.params.md_cubic,
                        CcModel::BbrLike => self.params.md_bbr,
                    };
                    g.envelope *= 1.0 - (1.0 - b) * hit;
                    g.loss_window_end = None;
                }
            }
            let cap_sum: f64 = active.iter().map(|f| f.demand_bps).sum();
            // bbr-like senders cap in-flight data near one BDP: a standing queue
            // beyond the mean base RTT is drained by pacing below the envelope
            let base_mean = mean_rtt - qd_after;
            if cc == CcModel::BbrLike && qd_after > base_mean {
                // startup also ends once the queue builds
                g.slow_start = false;
                g.envelope *= (base_mean / qd_after).powf(dt / mean_rtt);
                continue;
            }
            if g.envelope >= cap_sum {
                continue;
            }
            let before = g.envelope;
            if g.slow_start {
                g.envelope *= 2f64.powf(dt / mean_rtt);
            } else {
                let base_mean = mean_rtt - qd_after;
                let gated = cc == CcModel::BbrLike && qd_after > base_mean;
                if !gated {
                    let ai: f64 = active
                        .iter()
                        .map(|f| {
                            let r = f.cfg.base_rtt + qd_after;
                            (MSS_BYTES * 8) as f64 / (r * r)
                        })
                        .sum();
                    g.envelope += ai * dt;
                }
            }
            // growth stops at the application ceiling; idle members do not shrink it
            g.envelope = g.envelope.min(cap_sum.max(before));
        }

        let policed_total: u64 = policed_by_group.values().sum();
        let offered_total: u64 = offered.values().sum();
        self.now = now_end;
        self.ticks += 1;
        Ok(TickRecord {
            t: self.now,
            queue_bytes: self.queue,
            drops_bytes: dropped_total + policed_total,
            policed_bytes: policed_total,
            offered_bytes: offered_total,
            arrivals_bytes: arrivals_total,
            delivered_bytes: drained,
            utilization: drained as f64 * 8.0 / (cap * dt),
        })
    }
}
