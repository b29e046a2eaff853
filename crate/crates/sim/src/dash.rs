//! DASH clients: segment downloads, throughput-rule ABR, playout buffer,
//! stalls, QoE, and client arrivals.

use diffperf_core::{ClassId, FlowId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::netsim::{CcModel, FlowPathConfig};

/// Segments that must complete before rendering starts.
pub const STARTUP_SEGMENTS: usize = 1;

const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub duration: f64,
    pub segment_len: f64,
    /// Ascending bitrates in bits/second.
    pub ladder: Vec<f64>,
}

impl Default for VideoSpec {
    fn default() -> Self {
        Self {
            duration: 600.0,
            segment_len: 2.0,
            ladder: vec![1.2e6, 2.2e6, 4.1e6],
        }
    }
}

impl VideoSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_len > 0.0) || !(self.duration > 0.0) {
            return Err(SimError::field(
                "workload.video",
                "duration and segment_len must be positive",
            ));
        }
        let n = self.duration / self.segment_len;
        if (n - n.round()).abs() > 1e-9 {
            return Err(SimError::field(
                "workload.video.duration",
                "must be a multiple of segment_len",
            ));
        }
        if self.ladder.is_empty() || self.ladder.windows(2).any(|w| !(w[0] < w[1])) || !(self.ladder[0] > 0.0) {
            return Err(SimError::field(
                "workload.video.ladder",
                "must be nonempty, positive and strictly ascending",
            ));
        }
        Ok(())
    }

    pub fn segments(&self) -> usize {
        (self.duration / self.segment_len).round() as usize
    }

    pub fn segment_bytes(&self, bitrate: f64) -> u64 {
        (bitrate * self.segment_len / 8.0).round() as u64
    }

    pub fn max_bitrate(&self) -> f64 {
        *self.ladder.last().expect("validated ladder")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbrConfig {
    pub safety: f64,
    /// Weight on the previous estimate when folding in a new segment rate.
    pub smoothing: f64,
    /// Download ceiling as a multiple of the segment bitrate.
    pub demand_factor: f64,
    /// Idle time between a segment completing and the next request, in base RTTs.
    pub request_gap_rtts: f64,
}

impl Default for AbrConfig {
    fn default() -> Self {
        Self {
            safety: 0.8,
            smoothing: 0.5,
            demand_factor: 2.0,
            request_gap_rtts: 1.0,
        }
    }
}

impl AbrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(SimError::field("workload.abr.safety", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(SimError::field("workload.abr.smoothing", "must lie in [0, 1)"));
        }
        if !(self.demand_factor >= 1.0) || !self.demand_factor.is_finite() {
            return Err(SimError::field(
                "workload.abr.demand_factor",
                "must be finite and at least 1",
            ));
        }
        if !(self.request_gap_rtts >= 0.0) || !self.request_gap_rtts.is_finite() {
            return Err(SimError::field(
                "workload.abr.request_gap_rtts",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Quality is bitrate in Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QoeParams {
    pub lambda: f64,
    pub mu: f64,
    pub mu_s: f64,
}

impl Default for QoeParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 4.1,
            mu_s: 4.1,
        }
    }
}

impl QoeParams {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda, self.mu, self.mu_s]
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(SimError::field(
                "workload.qoe",
                "lambda, mu and mu_s must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn quality(&self, bitrate: f64) -> f64 {
        bitrate / 1e6
    }
}

/// Highest rung at or below `safety * estimate`, else the lowest rung.
pub fn abr_select(estimate: f64, ladder: &[f64], safety: f64) -> f64 {
    let budget = safety * estimate;
    ladder
        .iter()
        .rev()
        .find(|r| **r <= budget)
        .copied()
        .unwrap_or(ladder[0])
}

pub fn qoe(bitrates: &[f64], t_stall: f64, t_startup: f64, params: &QoeParams) -> Result<f64> {
    if bitrates.is_empty() {
        return Err(SimError::Accounting("QoE of a trace with no segments".into()));
    }
    let q: Vec<f64> = bitrates.iter().map(|r| params.quality(*r)).collect();
    let quality: f64 = q.iter().sum();
    let variation: f64 = q.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(quality - params.lambda * variation - params.mu * t_stall - params.mu_s * t_startup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Startup,
    Playing,
    Stalled,
    Done,
}

/// Download suspension in absolute simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pause {
    pub start: f64,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct DashClient {
    pub flow_id: FlowId,
    pub class_id: ClassId,
    pub base_rtt: f64,
    video: VideoSpec,
    abr: AbrConfig,
    pub started_at: f64,
    now: f64,
    pub phase: Phase,
    /// Bitrates of the segments requested so far, in order.
    pub chosen: Vec<f64>,
    completed: usize,
    /// Bytes left of the in-flight segment; `None` between requests.
    bytes_remaining: Option<u64>,
    requested_at: f64,
    gap_left: f64,
    pub playout_buffer: f64,
    pub played: f64,
    pub t_startup: f64,
    pub t_stall: f64,
    pub estimate: Option<f64>,
    pauses: Vec<Pause>,
    pub finished_at: Option<f64>,
}

impl DashClient {
    pub fn new(flow_id: FlowId, class_id: ClassId, base_rtt: f64, video: VideoSpec, abr: AbrConfig, now: f64) -> Self {
        let mut c = Self {
            flow_id,
            class_id,
            base_rtt,
            video,
            abr,
            started_at: now,
            now,
            phase: Phase::Startup,
            chosen: Vec::new(),
            completed: 0,
            bytes_remaining: None,
            requested_at: now,
            gap_left: 0.0,
            playout_buffer: 0.0,
            played: 0.0,
            t_startup: 0.0,
            t_stall: 0.0,
            estimate: None,
            pauses: Vec::new(),
            finished_at: None,
        };
        c.request_next();
        c
    }

    pub fn with_pauses(mut self, pauses: Vec<Pause>) -> Self {
        self.pauses = pauses;
        self
    }

    pub fn video(&self) -> &VideoSpec {
        &self.video
    }

    pub fn completed_segments(&self) -> usize {
        self.completed
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn is_paused(&self, t: f64) -> bool {
        self.pauses.iter().any(|p| t >= p.start && t < p.start + p.duration)
    }

    pub fn bytes_remaining(&self) -> u64 {
        self.bytes_remaining.unwrap_or(0)
    }

    pub fn current_bitrate(&self) -> Option<f64> {
        self.bytes_remaining.and(self.chosen.last().copied())
    }

    /// Ceiling on the download rate for the tick starting now.
    pub fn demand_cap_bps(&self) -> f64 {
        match self.current_bitrate() {
            Some(r) if !self.is_paused(self.now) => self.abr.demand_factor * r,
            _ => 0.0,
        }
    }

    fn request_next(&mut self) {
        if self.chosen.len() >= self.video.segments() {
            return;
        }
        let rate = abr_select(self.estimate.unwrap_or(0.0), &self.video.ladder, self.abr.safety);
        self.chosen.push(rate);
        self.bytes_remaining = Some(self.video.segment_bytes(rate));
        self.requested_at = self.now;
    }

    fn complete_segment(&mut self) {
        let rate = *self.chosen.last().expect("segment in flight");
        let elapsed = (self.now - self.requested_at).max(TIME_EPS);
        let sample = self.video.segment_bytes(rate) as f64 * 8.0 / elapsed;
        self.estimate = Some(match self.estimate {
            None => sample,
            Some(e) => self.abr.smoothing * e + (1.0 - self.abr.smoothing) * sample,
        });
        self.bytes_remaining = None;
        self.completed += 1;
        self.playout_buffer += self.video.segment_len;
        match self.phase {
            Phase::Startup if self.completed >= STARTUP_SEGMENTS => self.phase = Phase::Playing,
            Phase::Stalled => self.phase = Phase::Playing,
            _ => {}
        }
        self.gap_left = self.abr.request_gap_rtts * self.base_rtt;
        if self.gap_left <= TIME_EPS {
            self.gap_left = 0.0;
            self.request_next();
        }
    }

    /// Consumes `delivered` bytes spread uniformly over a tick of length `dt`.
    pub fn advance(&mut self, delivered: u64, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(SimError::Accounting("advance with non-positive dt".into()));
        }
        if self.phase == Phase::Done {
            if delivered > 0 {
                return Err(SimError::Accounting(format!(
                    "{delivered} bytes delivered to finished client {}",
                    self.flow_id
                )));
            }
            return Ok(());
        }
        let rate = delivered as f64 / dt;
        let mut left = delivered;
        let mut t = 0.0;
        while t < dt - TIME_EPS && self.phase != Phase::Done {
            let span = dt - t;
            let mut h = span;
            let mut completes = false;
            if let Some(rem) = self.bytes_remaining {
                if left >= rem && rate > 0.0 {
                    let need = rem as f64 / rate;
                    if need <= h {
                        h = need;
                        completes = true;
                    }
                }
            } else if self.gap_left > 0.0 && self.gap_left < h {
                h = self.gap_left;
            }
            let empties = self.phase == Phase::Playing && self.playout_buffer < h;
            if empties {
                h = self.playout_buffer;
                completes = false;
            }

            match self.phase {
                Phase::Startup => self.t_startup += h,
                Phase::Stalled => self.t_stall += h,
                Phase::Playing => {
                    self.playout_buffer -= h;
                    self.played += h;
                }
                Phase::Done => unreachable!(),
            }
            self.now += h;
            t += h;
            if empties {
                self.playout_buffer = 0.0;
                if self.completed == self.video.segments() {
                    self.phase = Phase::Done;
                    self.finished_at = Some(self.now);
                } else {
                    self.phase = Phase::Stalled;
                }
            }

            if let Some(rem) = self.bytes_remaining {
                let got = if completes {
                    rem
                } else if t >= dt - TIME_EPS {
                    left.min(rem)
                } else {
                    ((rate * h).floor() as u64).min(left).min(rem)
                };
                left -= got;
                self.bytes_remaining = Some(rem - got);
                if rem == got {
                    self.complete_segment();
                }
            } else if self.gap_left > 0.0 {
                self.gap_left -= h;
                if self.gap_left <= TIME_EPS {
                    self.gap_left = 0.0;
                    self.request_next();
                }
            }
        }
        // Anything left over belongs to no segment: the sender overshot.
        if left > 0 {
            return Err(SimError::Accounting(format!(
                "{left} bytes delivered to client {} beyond its request",
                self.flow_id
            )));
        }
        self.now += (dt - t).max(0.0);
        Ok(())
    }

    pub fn summary(&self, params: &QoeParams) -> ClientSummary {
        let played = self.completed;
        let bitrates = &self.chosen[..played];
        ClientSummary {
            flow_id: self.flow_id,
            class_id: self.class_id.clone(),
            qoe: qoe(bitrates, self.t_stall, self.t_startup, params).ok(),
            t_stall_s: self.t_stall,
            t_startup_s: self.t_startup,
            mean_bitrate_bps: if played > 0 {
                bitrates.iter().sum::<f64>() / played as f64
            } else {
                0.0
            },
            switches: bitrates.windows(2).filter(|w| w[0] != w[1]).count(),
            segments: played,
            truncated: !self.is_done(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientSummary {
    pub flow_id: FlowId,
    pub class_id: ClassId,
    /// Empty when no segment completed.
    pub qoe: Option<f64>,
    pub t_stall_s: f64,
    pub t_startup_s: f64,
    pub mean_bitrate_bps: f64,
    pub switches: usize,
    pub segments: usize,
    /// Cut off by the end of the run before playing the whole video.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArrivalSpec {
    /// All clients start at `start`.
    Static {
        count: usize,
        #[serde(default)]
        start: f64,
    },
    Poisson {
        /// Clients per second.
        rate: f64,
        count: usize,
        #[serde(default)]
        start: f64,
    },
}

impl ArrivalSpec {
    pub fn count(&self) -> usize {
        match self {
            ArrivalSpec::Static { count, .. } | ArrivalSpec::Poisson { count, .. } => *count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ArrivalSpec::Poisson { rate, .. } = self {
            if !(*rate > 0.0) || !rate.is_finite() {
                return Err(SimError::field("workload.arrivals.rate", "must be positive"));
            }
        }
        let start = match self {
            ArrivalSpec::Static { start, .. } | ArrivalSpec::Poisson { start, .. } => *start,
        };
        if !(start >= 0.0) {
            return Err(SimError::field("workload.arrivals.start", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RttComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttMixture {
    pub components: Vec<RttComponent>,
    /// Draws below this are raised to it.
    #[serde(default = "default_rtt_floor")]
    pub floor: f64,
}

fn default_rtt_floor() -> f64 {
    0.001
}

impl RttMixture {
    pub fn homogeneous(rtt: f64) -> Self {
        Self {
            components: vec![RttComponent {
                weight: 1.0,
                mean: rtt,
                sd: 0.0,
            }],
            floor: default_rtt_floor(),
        }
    }

    /// Short/long split used throughout the evaluation.
    pub fn split_70_30() -> Self {
        Self {
            components: vec![
                RttComponent {
                    weight: 0.7,
                    mean: 0.064,
                    sd: 0.016,
                },
                RttComponent {
                    weight: 0.3,
                    mean: 0.224,
                    sd: 0.032,
                },
            ],
            floor: default_rtt_floor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(SimError::field("workload.rtt.components", "must be nonempty"));
        }
        for c in &self.components {
            if !(c.weight > 0.0) || !(c.mean > 0.0) || !(c.sd >= 0.0) || !c.mean.is_finite() || !c.sd.is_finite() {
                return Err(SimError::field(
                    "workload.rtt.components",
                    "weights and means must be positive, sd non-negative",
                ));
            }
        }
        if !(self.floor > 0.0) {
            return Err(SimError::field("workload.rtt.floor", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assignment {
    /// Independent draws by ratio.
    #[default]
    Random,
    /// Smooth weighted round-robin: exact counts whenever they are integral.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrival {
    pub time: f64,
    pub class_id: ClassId,
    /// Mixture component the RTT was drawn from.
    pub rtt_component: usize,
    pub path: FlowPathConfig,
}

/// Smooth weighted round-robin picker.
struct Rotor {
    weights: Vec<f64>,
    current: Vec<f64>,
}

impl Rotor {
    fn new(weights: Vec<f64>) -> Self {
        let current = vec![0.0; weights.len()];
        Self { weights, current }
    }

    fn next(&mut self) -> usize {
        let total: f64 = self.weights.iter().sum();
        for (c, w) in self.current.iter_mut().zip(&self.weights) {
            *c += w;
        }
        let mut best = 0;
        for i in 1..self.current.len() {
            if self.current[i] > self.current[best] + 1e-12 {
                best = i;
            }
        }
        self.current[best] -= total;
        best
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Draws client arrivals. Class and RTT-set assignment are independent;
/// with [`Assignment::RoundRobin`] both follow their ratios exactly.
pub fn spawn_arrivals(
    spec: &ArrivalSpec,
    class_ratio: &[(ClassId, f64)],
    rtt: &RttMixture,
    assignment: Assignment,
    cc_model: CcModel,
    first_flow_id: u64,
    seed: u64,
) -> Result<Vec<Arrival>> {
    spec.validate()?;
    rtt.validate()?;
    if class_ratio.is_empty() || class_ratio.iter().any(|(_, r)| !(*r > 0.0)) {
        return Err(SimError::field("workload.class_ratio", "needs positive ratios"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_w: Vec<f64> = class_ratio.iter().map(|c| c.1).collect();
    let rtt_w: Vec<f64> = rtt.components.iter().map(|c| c.weight).collect();
    let mut class_rotor = Rotor::new(class_w.clone());
    let mut rtt_rotor = Rotor::new(rtt_w.clone());
    let mut out = Vec::with_capacity(spec.count());
    let mut t = match spec {
        ArrivalSpec::Static { start, .. } | ArrivalSpec::Poisson { start, .. } => *start,
    };
    let gap = match spec {
        ArrivalSpec::Poisson { rate, .. } => {
            Some(Exp::new(*rate).map_err(|e| SimError::field("workload.arrivals.rate", e.to_string()))?)
        }
        ArrivalSpec::Static { .. } => None,
    };
    for i in 0..spec.count() {
        if let Some(g) = &gap {
            if i > 0 {
                t += g.sample(&mut rng);
            }
        }
        let (class_idx, comp_idx) = match assignment {
            Assignment::Random => (pick_weighted(&mut rng, &class_w), pick_weighted(&mut rng, &rtt_w)),
            Assignment::RoundRobin => (class_rotor.next(), rtt_rotor.next()),
        };
        let comp = rtt.components[comp_idx];
        let draw = if comp.sd > 0.0 {
            Normal::new(comp.mean, comp.sd)
                .map_err(|e| SimError::field("workload.rtt", e.to_string()))?
                .sample(&mut rng)
        } else {
            comp.mean
        };
        out.push(Arrival {
            time: t,
            class_id: class_ratio[class_idx].0.clone(),
            rtt_component: comp_idx,
            path: FlowPathConfig {
                flow_id: FlowId(first_flow_id + i as u64),
                base_rtt: draw.max(rtt.floor),
                cc_model,
                demand_cap_bps: f64::INFINITY,
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: [f64; 3] = [1.2e6, 2.2e6, 4.1e6];

    #[test]
    fn abr_examples() {
        assert_eq!(abr_select(5e6, &LADDER, 0.8), 2.2e6);
        assert_eq!(abr_select(0.0, &LADDER, 0.8), 1.2e6);
        assert_eq!(abr_select(10e6, &LADDER, 0.8), 4.1e6);
    }

    #[test]
    fn qoe_examples() {
        let p = QoeParams::default();
        assert!((qoe(&[2.2e6, 2.2e6], 0.0, 0.0, &p).unwrap() - 4.4).abs() < 1e-12);
        assert!((qoe(&[1.2e6, 2.2e6], 0.0, 0.0, &p).unwrap() - 2.4).abs() < 1e-12);
        assert!(qoe(&[4.1e6], 1.0, 0.0, &p).unwrap().abs() < 1e-12);
        assert!(qoe(&[], 0.0, 0.0, &p).is_err());
        assert!(qoe(&[4.1e6], 2.0, 0.0, &p).unwrap() < qoe(&[4.1e6], 1.0, 0.0, &p).unwrap());
    }

    fn client(video: VideoSpec) -> DashClient {
        let abr = AbrConfig {
            request_gap_rtts: 0.0,
            ..AbrConfig::default()
        };
        DashClient::new(FlowId(1), ClassId::from("G"), 0.05, video, abr, 0.0)
    }

    #[test]
    fn knife_edge_rate_never_stalls() {
        let mut c = client(VideoSpec {
            duration: 20.0,
            segment_len: 2.0,
            ladder: vec![1.2e6],
        });
        assert_eq!(c.video().segment_bytes(1.2e6), 300_000);
        let dt = 0.01;
        let per_tick = (1.2e6 * dt / 8.0) as u64;
        let mut ticks = 0;
        while !c.is_done() {
            let want = c.bytes_remaining().min(per_tick);
            c.advance(want, dt).unwrap();
            ticks += 1;
            let acct = c.played + c.playout_buffer;
            assert!(
                (acct - c.completed_segments() as f64 * 2.0).abs() < 1e-9,
                "{ticks} {acct} {} {:?} {}",
                c.completed_segments(),
                c.phase,
                c.playout_buffer
            );
        }
        assert!((c.t_startup - 2.0).abs() < 1e-9);
        assert_eq!(c.t_stall, 0.0);
        assert!((ticks as f64 * dt - 22.0).abs() < 1e-6);
        let wall = c.finished_at.unwrap() - c.started_at;
        assert!((wall - (c.t_startup + c.played + c.t_stall)).abs() < 1e-9);
    }

    #[test]
    fn zero_delivery_stalls_after_buffer_drains() {
        let mut c = client(VideoSpec::default());
        let seg = c.bytes_remaining();
        c.advance(seg, 0.1).unwrap();
        assert_eq!(c.phase, Phase::Playing);
        // second segment already requested, buffer holds 2 s
        c.advance(0, 1.0).unwrap();
        assert_eq!(c.phase, Phase::Playing);
        c.advance(0, 1.5).unwrap();
        assert_eq!(c.phase, Phase::Stalled);
        assert!((c.t_stall - 0.5).abs() < 1e-9);
    }

    #[test]
    fn finished_client_rejects_bytes() {
        let mut c = client(VideoSpec {
            duration: 2.0,
            segment_len: 2.0,
            ladder: vec![1.2e6],
        });
        c.advance(300_000, 0.5).unwrap();
        c.advance(0, 3.0).unwrap();
        assert!(c.is_done());
        assert!(c.advance(1, 0.1).is_err());
        let s = c.summary(&QoeParams::default());
        assert!(!s.truncated);
        assert!((s.qoe.unwrap() - (1.2 - 4.1 * 0.5)).abs() < 1e-9);
    }

    #[test]
    fn abr_follows_segment_rate() {
        let mut c = client(VideoSpec::default());
        // first segment (1.2 Mbps rung) in 0.1 s: 24 Mbps sample
        c.advance(300_000, 0.1).unwrap();
        assert_eq!(c.current_bitrate(), Some(4.1e6));
        assert_eq!(c.demand_cap_bps(), 8.2e6);
    }

    #[test]
    fn paused_client_has_no_demand() {
        let c = client(VideoSpec::default()).with_pauses(vec![Pause {
            start: 0.0,
            duration: 5.0,
        }]);
        assert_eq!(c.demand_cap_bps(), 0.0);
    }

    #[test]
    fn arrivals_are_deterministic_and_exact_under_round_robin() {
        let classes: Vec<(ClassId, f64)> = vec![("G".into(), 1.0), ("S".into(), 2.0), ("B".into(), 3.0)];
        let spec = ArrivalSpec::Poisson {
            rate: 1.0,
            count: 150,
            start: 0.0,
        };
        let mix = RttMixture::split_70_30();
        let a = spawn_arrivals(&spec, &classes, &mix, Assignment::RoundRobin, CcModel::CubicLike, 0, 7).unwrap();
        let b = spawn_arrivals(&spec, &classes, &mix, Assignment::RoundRobin, CcModel::CubicLike, 0, 7).unwrap();
        assert_eq!(a, b);
        let count = |c: &str| a.iter().filter(|x| x.class_id.as_str() == c).count();
        assert_eq!((count("G"), count("S"), count("B")), (25, 50, 75));
        assert_eq!(a.iter().filter(|x| x.rtt_component == 0).count(), 105);
        let makespan = a.last().unwrap().time;
        assert!((120.0..=180.0).contains(&makespan), "{makespan}");
        assert!(a.iter().all(|x| x.path.base_rtt >= 0.001));
    }
}
