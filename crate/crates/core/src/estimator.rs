//! Flow registry and per-flow throughput estimation.
//!
//! Counters arrive as cumulative byte totals. Bytes are accumulated per
//! epoch window; at each epoch boundary the window rate `x~` (total window
//! bytes over window length) is folded into the estimate with
//! `x <- delta * x + (1 - delta) * x~`.

use std::collections::BTreeMap;

use log::warn;

use crate::error::{param, Error, Result};
use crate::scalar::Scalar;
use crate::{ClassId, FlowId};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig<T> {
    /// EWMA weight on the previous estimate.
    pub delta: T,
    pub sample_period: T,
    pub idle_timeout: T,
    pub epoch: T,
}

impl<T: Scalar> EstimatorConfig<T> {
    /// Idle timeout defaults to two sample periods.
    pub fn new(delta: T, sample_period: T, epoch: T) -> Self {
        let idle_timeout = sample_period.clone() + sample_period.clone();
        Self {
            delta,
            sample_period,
            idle_timeout,
            epoch,
        }
    }

    pub fn with_idle_timeout(mut self, idle_timeout: T) -> Self {
        self.idle_timeout = idle_timeout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= T::zero() && self.delta <= T::one()) {
            return Err(param("delta", format!("{:?} is outside [0, 1]", self.delta)));
        }
        if !(self.sample_period > T::zero()) || self.sample_period > self.epoch {
            return Err(param(
                "sample_period",
                format!(
                    "{:?} must be positive and at most the epoch {:?}",
                    self.sample_period, self.epoch
                ),
            ));
        }
        if !(self.idle_timeout > T::zero()) {
            return Err(param(
                "idle_timeout",
                format!("{:?} must be positive", self.idle_timeout),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord<T> {
    pub flow_id: FlowId,
    pub class_id: ClassId,
    /// Smoothed throughput `x_f` in bits/second.
    pub ewma_throughput: T,
    pub cumulative_bytes: u64,
    pub last_counter_time: T,
    pub last_activity_time: T,
    pub registered_at: T,
    /// Epoch updates this flow has been through with a full window.
    pub full_windows: u32,
    window_bytes: u64,
}

impl<T: Scalar> FlowRecord<T> {
    pub fn is_active(&self, now: &T, idle_timeout: &T) -> bool {
        now.clone() - self.last_activity_time.clone() <= *idle_timeout
    }
}

/// Result of one counter sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterSample<T> {
    /// Rate since the previous sample, bits/second.
    pub instantaneous: T,
    /// The counter went backwards and was treated as restarted from zero.
    pub reset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deregistration {
    Removed,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct ThroughputEstimator<T> {
    config: EstimatorConfig<T>,
    flows: BTreeMap<FlowId, FlowRecord<T>>,
    last_epoch: T,
}

impl<T: Scalar> ThroughputEstimator<T> {
    /// `start` is the time of the implicit epoch boundary preceding the first update.
    pub fn new(config: EstimatorConfig<T>, start: T) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            flows: BTreeMap::new(),
            last_epoch: start,
        })
    }

    pub fn config(&self) -> &EstimatorConfig<T> {
        &self.config
    }

    pub fn record(&self, flow_id: FlowId) -> Option<&FlowRecord<T>> {
        self.flows.get(&flow_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &FlowRecord<T>> {
        self.flows.values()
    }

    pub fn is_registered(&self, flow_id: FlowId) -> bool {
        self.flows.contains_key(&flow_id)
    }

    pub fn register_flow(&mut self, flow_id: FlowId, class_id: ClassId, now: T) -> Result<&FlowRecord<T>> {
        if self.flows.contains_key(&flow_id) {
            return Err(Error::DuplicateFlow(flow_id));
        }
        let record = FlowRecord {
            flow_id,
            class_id,
            ewma_throughput: T::zero(),
            cumulative_bytes: 0,
            last_counter_time: now.clone(),
            last_activity_time: now.clone(),
            registered_at: now,
            full_windows: 0,
            window_bytes: 0,
        };
        Ok(self.flows.entry(flow_id).or_insert(record))
    }

    pub fn ingest_counter(&mut self, flow_id: FlowId, cumulative_bytes: u64, now: T) -> Result<CounterSample<T>> {
        let record = self.flows.get_mut(&flow_id).ok_or(Error::UnknownFlow(flow_id))?;
        if !(now > record.last_counter_time) {
            return Err(Error::Measurement {
                flow: flow_id,
                detail: format!(
                    "sample time {:?} does not advance past {:?}",
                    now, record.last_counter_time
                ),
            });
        }
        let reset = cumulative_bytes < record.cumulative_bytes;
        let delta_bytes = if reset {
            warn!(
                "flow {flow_id}: counter went from {} to {cumulative_bytes}; assuming reset",
                record.cumulative_bytes
            );
            cumulative_bytes
        } else {
            cumulative_bytes - record.cumulative_bytes
        };
        let elapsed = now.clone() - record.last_counter_time.clone();
        let instantaneous = T::lit(8.0) * T::from_bytes(delta_bytes) / elapsed;
        record.cumulative_bytes = cumulative_bytes;
        record.window_bytes += delta_bytes;
        record.last_counter_time = now.clone();
        if delta_bytes > 0 {
            record.last_activity_time = now;
        }
        Ok(CounterSample { instantaneous, reset })
    }

    /// Folds the window just closed into each active flow's estimate and
    /// returns the estimates of all active flows.
    pub fn update_epoch(&mut self, now: T) -> BTreeMap<FlowId, T> {
        let delta = self.config.delta.clone();
        let idle = self.config.idle_timeout.clone();
        let epoch_start = self.last_epoch.clone();
        let mut out = BTreeMap::new();
        for record in self.flows.values_mut() {
            let window_start = record.registered_at.clone().max_of(epoch_start.clone());
            let window = now.clone() - window_start;
            let bytes = std::mem::take(&mut record.window_bytes);
            if !record.is_active(&now, &idle) || !(window > T::zero()) {
                continue;
            }
            let sample = T::lit(8.0) * T::from_bytes(bytes) / window;
            record.ewma_throughput =
                delta.clone() * record.ewma_throughput.clone() + (T::one() - delta.clone()) * sample;
            if record.registered_at <= epoch_start {
                record.full_windows += 1;
            }
            out.insert(record.flow_id, record.ewma_throughput.clone());
        }
        self.last_epoch = now;
        out
    }

    /// Active flows per class. Classes with registered but idle flows map to zero.
    pub fn active_counts(&self, now: &T) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for r in self.flows.values() {
            let n = counts.entry(r.class_id.clone()).or_insert(0);
            if r.is_active(now, &self.config.idle_timeout) {
                *n += 1;
            }
        }
        counts
    }

    pub fn active_flows(&self, now: &T) -> impl Iterator<Item = &FlowRecord<T>> {
        let now = now.clone();
        self.flows
            .values()
            .filter(move |r| r.is_active(&now, &self.config.idle_timeout))
    }

    pub fn deregister_flow(&mut self, flow_id: FlowId) -> Deregistration {
        match self.flows.remove(&flow_id) {
            Some(_) => Deregistration::Removed,
            None => {
                warn!("deregistering unknown flow {flow_id}");
                Deregistration::Unknown
            }
        }
    }
}
