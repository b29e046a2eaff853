//! Coupled simulation loop: arrivals, DASH demand, the fluid link, counter
//! sampling, and the control epoch.
//!
//! Per tick, in order: admit arrivals; at epoch boundaries fold the closed
//! window into the estimator and install a fresh plan; set demands; step the
//! link; feed delivered bytes to the clients; sample counters on sample
//! boundaries; retire finished clients.

use std::collections::{BTreeMap, BTreeSet};

use diffperf_core::{ClassId, Controller, EnforcementPlan, EpochSnapshot, FlowId, ThroughputEstimator, Tier};
use log::{debug, info};
use serde::Serialize;

use crate::dash::{spawn_arrivals, Arrival, ClientSummary, DashClient, Pause};
use crate::error::{Result, SimError};
use crate::netsim::World;
use crate::scenario::{ControllerSpec, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub class_id: ClassId,
    pub group_id: String,
    pub tier: Tier,
    pub n_flows: usize,
    pub rate_bps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkRow {
    pub t: f64,
    pub queue_bytes: u64,
    pub drops_bytes: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMeta {
    pub epoch: u64,
    pub t: f64,
    /// Active flows per class as seen by the estimator.
    pub active: BTreeMap<ClassId, usize>,
    /// Flows in the installed plan.
    pub planned: BTreeSet<FlowId>,
    pub total_rate_bps: u64,
    /// Clients that finished since the previous epoch.
    pub departures: Vec<FlowId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub flow_id: FlowId,
    pub class_id: ClassId,
    pub arrival: f64,
    pub departure: Option<f64>,
    pub base_rtt: f64,
    pub rtt_component: usize,
    pub bytes_delivered: u64,
    /// Mean rate over the part of the measurement window the flow was present.
    pub mean_throughput_bps: f64,
    pub epochs_planned: u32,
    pub epochs_lower: u32,
    /// Share of planned epochs spent in a lower sub-class.
    pub lower_fraction: f64,
    pub client: ClientSummary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupStats {
    pub clients: usize,
    pub scored: usize,
    pub mean_qoe: f64,
    pub mean_stall_s: f64,
    pub mean_throughput_bps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregates {
    pub overall: GroupStats,
    pub per_class: BTreeMap<ClassId, GroupStats>,
    /// Flows that spent at least half of their planned epochs in a lower sub-class.
    pub lower: GroupStats,
    pub upper: GroupStats,
    /// Delivered rate during the ticks of the measurement window in which
    /// application demand met or exceeded link capacity.
    pub aggregate_throughput_bps: f64,
    pub jain_index: f64,
    pub mean_utilization: f64,
    pub drops_bytes: u64,
    pub truncated_clients: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub scenario: String,
    pub ticks: u64,
    pub epochs: Vec<EpochRow>,
    pub epoch_meta: Vec<EpochMeta>,
    pub link: Vec<LinkRow>,
    pub flows: Vec<FlowReport>,
    pub aggregates: Aggregates,
    /// Plan-level invariant failures; empty on a clean run.
    pub violations: Vec<String>,
}

impl RunOutput {
    pub fn clients(&self) -> impl Iterator<Item = &ClientSummary> {
        self.flows.iter().map(|f| &f.client)
    }
}

pub fn jain_index(xs: &[f64]) -> f64 {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if xs.is_empty() || sq == 0.0 {
        return 1.0;
    }
    sum * sum / (xs.len() as f64 * sq)
}

fn stats<'a>(flows: impl Iterator<Item = &'a FlowReport>) -> GroupStats {
    let mut g = GroupStats::default();
    let (mut qoe, mut stall, mut thr) = (0.0, 0.0, 0.0);
    for f in flows {
        g.clients += 1;
        stall += f.client.t_stall_s;
        thr += f.mean_throughput_bps;
        if let Some(q) = f.client.qoe {
            g.scored += 1;
            qoe += q;
        }
    }
    if g.clients > 0 {
        g.mean_stall_s = stall / g.clients as f64;
        g.mean_throughput_bps = thr / g.clients as f64;
    }
    if g.scored > 0 {
        g.mean_qoe = qoe / g.scored as f64;
    }
    g
}

struct FlowAcc {
    class_id: ClassId,
    arrival: f64,
    departure: Option<f64>,
    base_rtt: f64,
    rtt_component: usize,
    last_counter: u64,
    bytes: u64,
    window_bytes: u64,
    window_time: f64,
    epochs_planned: u32,
    epochs_lower: u32,
    summary: Option<ClientSummary>,
}

struct Sim<'a> {
    sc: &'a Scenario,
    world: World,
    estimator: ThroughputEstimator<f64>,
    controller: Option<Controller<f64>>,
    plan: EnforcementPlan,
    estimates: BTreeMap<FlowId, f64>,
    clients: BTreeMap<FlowId, DashClient>,
    acc: BTreeMap<FlowId, FlowAcc>,
    epoch_index: u64,
    departed: Vec<FlowId>,
    out: RunOutput,
}

impl Sim<'_> {
    fn snapshot(&self, now: f64, estimates: &BTreeMap<FlowId, f64>) -> EpochSnapshot<f64> {
        let mut snap = EpochSnapshot::default();
        for r in self.estimator.active_flows(&now) {
            let est = (r.full_windows >= 1)
                .then(|| estimates.get(&r.flow_id).copied())
                .flatten();
            snap = snap.with_flow(r.class_id.clone(), r.flow_id, est);
        }
        snap
    }

    fn epoch(&mut self, now: f64, first: bool) -> Result<()> {
        let estimates = if first {
            BTreeMap::new()
        } else {
            self.estimator.update_epoch(now)
        };
        let snap = self.snapshot(now, &estimates);
        self.estimates = estimates;
        let capacity = self.sc.link.capacity_bps.round() as u64;
        let plan = match &mut self.controller {
            Some(c) => c.epoch(&snap)?.0,
            None => EnforcementPlan::null(self.epoch_index, capacity, snap.active.values().flatten().copied()),
        };
        let planned: BTreeSet<FlowId> = plan.groups.iter().flat_map(|g| g.members.iter().copied()).collect();
        let active: BTreeSet<FlowId> = snap.active.values().flatten().copied().collect();
        if planned != active || plan.flow_count() != active.len() {
            self.out.violations.push(format!(
                "epoch {}: plan does not cover the active flows exactly once",
                self.epoch_index
            ));
        }
        if plan.metered && !plan.groups.is_empty() && plan.total_rate_bps() != capacity {
            self.out.violations.push(format!(
                "epoch {}: plan rates sum to {} instead of {capacity}",
                self.epoch_index,
                plan.total_rate_bps()
            ));
        }
        for g in &plan.groups {
            if !g.members.is_empty() && g.rate_limit_bps == 0 {
                self.out
                    .violations
                    .push(format!("epoch {}: group {} has no rate", self.epoch_index, g.group_id));
            }
            for f in &g.members {
                if let Some(a) = self.acc.get_mut(f) {
                    a.epochs_planned += 1;
                    if g.tier == Tier::Lower {
                        a.epochs_lower += 1;
                    }
                }
            }
            self.out.epochs.push(EpochRow {
                epoch: self.epoch_index,
                class_id: g.class_id.clone(),
                group_id: g.group_id.clone(),
                tier: g.tier,
                n_flows: g.members.len(),
                rate_bps: g.rate_limit_bps,
            });
        }
        self.out.epoch_meta.push(EpochMeta {
            epoch: self.epoch_index,
            t: now,
            active: self.estimator.active_counts(&now),
            planned,
            total_rate_bps: plan.total_rate_bps(),
            departures: std::mem::take(&mut self.departed),
        });
        debug!(
            "epoch {} at {now:.1}s: {} groups, {} flows",
            self.epoch_index,
            plan.groups.len(),
            plan.flow_count()
        );
        self.world.apply_plan(&plan);
        self.plan = plan;
        self.epoch_index += 1;
        Ok(())
    }

    /// Puts a flow that started sending outside the plan into its class's
    /// upper (or whole) group; with no group for the class, replans off-cycle.
    fn admit(&mut self, flow: FlowId, class_id: &ClassId, now: f64) -> Result<()> {
        if self.world.group_of(flow).is_some() {
            return Ok(());
        }
        if self.controller.is_none() {
            if let Some(g) = self.plan.groups.first_mut() {
                g.members.insert(flow);
                let id = g.group_id.clone();
                return self.world.join_group(flow, &id);
            }
            let capacity = self.sc.link.capacity_bps.round() as u64;
            self.plan = EnforcementPlan::null(self.epoch_index, capacity, [flow]);
            self.world.apply_plan(&self.plan);
            return Ok(());
        }
        let target = [Tier::Upper, Tier::Whole].iter().find_map(|tier| {
            self.plan
                .groups
                .iter()
                .find(|g| &g.class_id == class_id && g.tier == *tier)
                .map(|g| g.group_id.clone())
        });
        match target {
            Some(id) => {
                self.plan.group_mut(&id).expect("found").members.insert(flow);
                self.world.join_group(flow, &id)
            }
            None => {
                let snap = self
                    .snapshot(now, &self.estimates)
                    .with_flow(class_id.clone(), flow, None);
                let cfg = self.controller.as_ref().expect("diffperf").config();
                self.plan = diffperf_core::control_epoch(cfg, &snap, self.epoch_index.saturating_sub(1))?;
                debug!("off-cycle replan at {now:.3}s for flow {flow}");
                self.world.apply_plan(&self.plan);
                Ok(())
            }
        }
    }
}

pub fn run(sc: &Scenario) -> Result<RunOutput> {
    sc.validate()?;
    let mut rtt = sc.workload.rtt.clone();
    rtt.floor = sc.rtt_floor();
    let arrivals: Vec<Arrival> = spawn_arrivals(
        &sc.workload.arrivals,
        &sc.class_ratio(),
        &rtt,
        sc.workload.assignment,
        sc.workload.cc_model,
        0,
        sc.seed,
    )?;
    let mut pauses: BTreeMap<FlowId, Vec<Pause>> = BTreeMap::new();
    for p in &sc.workload.pauses {
        pauses.entry(p.flow).or_default().push(Pause {
            start: p.start,
            duration: p.duration,
        });
    }
    let controller = match &sc.controller {
        ControllerSpec::DiffPerf(_) => Some(Controller::new(sc.controller_config().expect("diffperf"))?),
        ControllerSpec::Baseline(_) => None,
    };
    let mut sim = Sim {
        sc,
        world: World::new(sc.link, sc.cc)?,
        estimator: ThroughputEstimator::new(sc.estimator_config(), 0.0)?,
        controller,
        plan: EnforcementPlan::empty(0),
        estimates: BTreeMap::new(),
        clients: BTreeMap::new(),
        acc: BTreeMap::new(),
        epoch_index: 0,
        departed: Vec::new(),
        out: RunOutput {
            scenario: sc.name.clone(),
            ticks: 0,
            epochs: Vec::new(),
            epoch_meta: Vec::new(),
            link: Vec::new(),
            flows: Vec::new(),
            aggregates: Aggregates::default(),
            violations: Vec::new(),
        },
    };

    let tick = sc.link.tick;
    let ticks = sc.ticks();
    let sample_every = sc.sample_every();
    let epoch_every = sc.epoch_every();
    let (w_start, w_end) = sc.measure.map_or((0.0, f64::INFINITY), |m| (m.start, m.end));
    let mut next = 0;
    let mut window_bits = 0.0;
    let mut busy = 0.0;
    let mut util_sum = 0.0;
    let mut drops = 0u64;
    info!("running {} for {ticks} ticks, {} clients", sc.name, arrivals.len());

    for k in 0..ticks {
        let t = k as f64 * tick;
        while next < arrivals.len() && arrivals[next].time <= t + 1e-9 {
            let a = &arrivals[next];
            let id = a.path.flow_id;
            sim.world.add_flow(a.path)?;
            sim.estimator.register_flow(id, a.class_id.clone(), t)?;
            let client = DashClient::new(
                id,
                a.class_id.clone(),
                a.path.base_rtt,
                sc.workload.video.clone(),
                sc.workload.abr,
                t,
            )
            .with_pauses(pauses.remove(&id).unwrap_or_default());
            sim.clients.insert(id, client);
            sim.acc.insert(
                id,
                FlowAcc {
                    class_id: a.class_id.clone(),
                    arrival: t,
                    departure: None,
                    base_rtt: a.path.base_rtt,
                    rtt_component: a.rtt_component,
                    last_counter: 0,
                    bytes: 0,
                    window_bytes: 0,
                    window_time: 0.0,
                    epochs_planned: 0,
                    epochs_lower: 0,
                    summary: None,
                },
            );
            next += 1;
        }

        if k % epoch_every == 0 {
            sim.epoch(t, k == 0)?;
        }

        let mut admit = Vec::new();
        let mut demand_total = 0.0;
        for (id, c) in &sim.clients {
            let in_flight = sim.world.backlog(*id);
            let room = c.bytes_remaining().saturating_sub(in_flight) as f64 * 8.0 / tick;
            let demand = c.demand_cap_bps().min(room);
            sim.world.set_demand(*id, demand);
            demand_total += demand;
            if demand > 0.0 && sim.world.group_of(*id).is_none() {
                admit.push((*id, c.class_id.clone()));
            }
        }
        for (id, class) in admit {
            sim.admit(id, &class, t)?;
        }

        let rec = sim.world.step()?;
        if !rec.utilization.is_finite() {
            return Err(SimError::NonFinite {
                tick: k,
                detail: "link utilization".into(),
            });
        }
        let t_end = (k + 1) as f64 * tick;
        let in_window = t >= w_start && t_end <= w_end + 1e-9;
        sim.out.link.push(LinkRow {
            t: t_end,
            queue_bytes: rec.queue_bytes,
            drops_bytes: rec.drops_bytes,
            utilization: rec.utilization,
        });
        util_sum += rec.utilization;
        drops += rec.drops_bytes;
        if in_window && demand_total >= sc.link.capacity_bps {
            window_bits += rec.delivered_bytes as f64 * 8.0;
            busy += tick;
        }

        let mut finished = Vec::new();
        for (id, c) in sim.clients.iter_mut() {
            let counter = sim.world.counter(*id).expect("client flow exists");
            let acc = sim.acc.get_mut(id).expect("tracked");
            let delta = counter - acc.last_counter;
            acc.last_counter = counter;
            acc.bytes += delta;
            if in_window {
                acc.window_bytes += delta;
                acc.window_time += tick;
            }
            c.advance(delta, tick).map_err(|e| match e {
                SimError::Accounting(d) => SimError::Invariant { tick: k, detail: d },
                other => other,
            })?;
            if c.is_done() {
                finished.push(*id);
            }
        }

        if (k + 1) % sample_every == 0 {
            for id in sim.clients.keys() {
                let counter = sim.world.counter(*id).expect("client flow exists");
                sim.estimator.ingest_counter(*id, counter, t_end)?;
            }
        }

        for id in finished {
            let c = sim.clients.remove(&id).expect("finished client");
            let dropped = sim.world.remove_flow(id);
            if dropped > 0 {
                sim.out
                    .violations
                    .push(format!("flow {id} left {dropped} bytes queued"));
            }
            sim.estimator.deregister_flow(id);
            let acc = sim.acc.get_mut(&id).expect("tracked");
            acc.departure = Some(t_end);
            acc.summary = Some(c.summary(&sc.workload.qoe));
            sim.departed.push(id);
        }
    }

    for (id, c) in &sim.clients {
        sim.acc.get_mut(id).expect("tracked").summary = Some(c.summary(&sc.workload.qoe));
    }
    let mut out = sim.out;
    out.ticks = ticks;
    for (id, a) in sim.acc {
        let summary = a.summary.expect("every admitted client is summarized");
        out.flows.push(FlowReport {
            flow_id: id,
            class_id: a.class_id,
            arrival: a.arrival,
            departure: a.departure,
            base_rtt: a.base_rtt,
            rtt_component: a.rtt_component,
            bytes_delivered: a.bytes,
            mean_throughput_bps: if a.window_time > 0.0 {
                a.window_bytes as f64 * 8.0 / a.window_time
            } else {
                0.0
            },
            epochs_planned: a.epochs_planned,
            epochs_lower: a.epochs_lower,
            lower_fraction: if a.epochs_planned > 0 {
                a.epochs_lower as f64 / a.epochs_planned as f64
            } else {
                0.0
            },
            client: summary,
        });
    }

    let flows = &out.flows;
    let mut agg = Aggregates {
        overall: stats(flows.iter()),
        lower: stats(flows.iter().filter(|f| f.lower_fraction >= 0.5)),
        upper: stats(flows.iter().filter(|f| f.lower_fraction < 0.5)),
        aggregate_throughput_bps: if busy > 0.0 { window_bits / busy } else { 0.0 },
        jain_index: jain_index(
            &flows
                .iter()
                .filter(|f| f.mean_throughput_bps > 0.0)
                .map(|f| f.mean_throughput_bps)
                .collect::<Vec<_>>(),
        ),
        mean_utilization: if ticks > 0 { util_sum / ticks as f64 } else { 0.0 },
        drops_bytes: drops,
        truncated_clients: flows.iter().filter(|f| f.client.truncated).count(),
        ..Aggregates::default()
    };
    for c in &sc.classes {
        agg.per_class.insert(
            c.class_id.clone(),
            stats(flows.iter().filter(|f| f.class_id == c.class_id)),
        );
    }
    out.aggregates = agg;
    info!(
        "{}: mean QoE {:.1}, mean stall {:.1}s, utilization {:.3}",
        sc.name, out.aggregates.overall.mean_qoe, out.aggregates.overall.mean_stall_s, out.aggregates.mean_utilization
    );
    Ok(out)
}
