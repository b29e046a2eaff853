//! Statistical splitting of one service class into lower and upper
//! sub-classes, and the (beta, gamma) capacity split between them.
//!
//! Flows whose throughput z-score falls strictly below `beta` form the
//! lower sub-class. The lower sub-class receives, per flow,
//! `gamma * mean(below-mean flows) + (1 - gamma) * X_s / n_s`; the upper
//! sub-class gets the remainder of `X_s`.
//!
//! Partitioning never divides by sigma: `z < beta` is decided by comparing
//! `(x - mean)^2` with `beta^2 * variance` under the appropriate signs, so
//! the result is exact for rational scalars and never depends on rounding
//! of a square root.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scalar::Scalar;
use crate::FlowId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowThroughputSample<T> {
    pub flow_id: FlowId,
    /// Achieved throughput `x_f` in bits/second.
    pub throughput: T,
}

impl<T> FlowThroughputSample<T> {
    pub fn new(flow_id: impl Into<FlowId>, throughput: T) -> Self {
        Self {
            flow_id: flow_id.into(),
            throughput,
        }
    }
}

/// Population statistics of a class snapshot (divisor `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassThroughputStats<T> {
    pub mean: T,
    pub variance: T,
    pub sigma: T,
    pub count: usize,
}

impl<T: Scalar> ClassThroughputStats<T> {
    pub fn is_degenerate(&self) -> bool {
        self.variance.is_zero() || self.count < 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubClassPartition<T> {
    pub lower: BTreeSet<FlowId>,
    pub upper: BTreeSet<FlowId>,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraClassAllocation<T> {
    pub capacity_lower: T,
    pub capacity_upper: T,
    /// Zero when the lower sub-class is empty.
    pub per_flow_lower: T,
    /// Zero when the upper sub-class is empty.
    pub per_flow_upper: T,
    /// False when the class is carried as a single group.
    pub split: bool,
}

pub fn compute_stats<T: Scalar>(samples: &[FlowThroughputSample<T>]) -> Result<ClassThroughputStats<T>> {
    if samples.is_empty() {
        return Err(Error::Domain("statistics of an empty class".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.throughput < T::zero()) {
        return Err(Error::Domain(format!(
            "negative throughput {:?} for flow {}",
            s.throughput, s.flow_id
        )));
    }
    let n = T::from_count(samples.len());
    let mean = samples.iter().fold(T::zero(), |acc, s| acc + s.throughput.clone()) / n.clone();
    let variance = samples.iter().fold(T::zero(), |acc, s| {
        let d = s.throughput.clone() - mean.clone();
        acc + d.clone() * d
    }) / n;
    let sigma = variance.sqrt();
    Ok(ClassThroughputStats {
        mean,
        variance,
        sigma,
        count: samples.len(),
    })
}

fn degenerate_error<T: Scalar>(stats: &ClassThroughputStats<T>) -> Result<()> {
    if stats.variance.is_zero() {
        return Err(Error::DegenerateClass);
    }
    Ok(())
}

pub fn z_scores<T: Scalar>(
    samples: &[FlowThroughputSample<T>],
    stats: &ClassThroughputStats<T>,
) -> Result<BTreeMap<FlowId, T>> {
    degenerate_error(stats)?;
    Ok(samples
        .iter()
        .map(|s| {
            (
                s.flow_id,
                (s.throughput.clone() - stats.mean.clone()) / stats.sigma.clone(),
            )
        })
        .collect())
}

/// Exact evaluation of `(x - mean) / sigma < beta` for `sigma > 0`.
fn z_below<T: Scalar>(x: &T, stats: &ClassThroughputStats<T>, beta: &T) -> bool {
    let d = x.clone() - stats.mean.clone();
    let lhs = d.clone() * d.clone();
    let rhs = beta.clone() * beta.clone() * stats.variance.clone();
    if *beta >= T::zero() {
        d < T::zero() || lhs < rhs
    } else {
        d < T::zero() && lhs > rhs
    }
}

pub fn partition<T: Scalar>(
    samples: &[FlowThroughputSample<T>],
    stats: &ClassThroughputStats<T>,
    beta: T,
) -> Result<SubClassPartition<T>> {
    degenerate_error(stats)?;
    let mut lower = BTreeSet::new();
    let mut upper = BTreeSet::new();
    for s in samples {
        if lower.contains(&s.flow_id) || upper.contains(&s.flow_id) {
            return Err(Error::Domain(format!(
                "flow {} appears twice in the snapshot",
                s.flow_id
            )));
        }
        if z_below(&s.throughput, stats, &beta) {
            lower.insert(s.flow_id);
        } else {
            upper.insert(s.flow_id);
        }
    }
    Ok(SubClassPartition { lower, upper, beta })
}

/// Flows strictly below the class mean.
pub fn below_mean_set<T: Scalar>(
    samples: &[FlowThroughputSample<T>],
    stats: &ClassThroughputStats<T>,
) -> BTreeSet<FlowId> {
    samples
        .iter()
        .filter(|s| s.throughput < stats.mean)
        .map(|s| s.flow_id)
        .collect()
}

pub fn allocate_subclasses<T: Scalar>(
    partition: &SubClassPartition<T>,
    samples: &[FlowThroughputSample<T>],
    stats: &ClassThroughputStats<T>,
    class_capacity: T,
    gamma: T,
) -> Result<IntraClassAllocation<T>> {
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(param("gamma", format!("{gamma:?} is outside [0, 1]")));
    }
    if !(class_capacity > T::zero()) {
        return Err(param("class_capacity", format!("{class_capacity:?} must be positive")));
    }
    let n = T::from_count(stats.count);
    let fair = class_capacity.clone() / n.clone();
    let whole = IntraClassAllocation {
        capacity_lower: T::zero(),
        capacity_upper: class_capacity.clone(),
        per_flow_lower: T::zero(),
        per_flow_upper: fair.clone(),
        split: false,
    };
    if stats.is_degenerate() || partition.lower.is_empty() || partition.upper.is_empty() {
        return Ok(whole);
    }

    let below: Vec<&T> = samples
        .iter()
        .filter(|s| s.throughput < stats.mean)
        .map(|s| &s.throughput)
        .collect();
    // Positive variance guarantees a below-mean flow in exact arithmetic;
    // a float mean can round onto the minimum, in which case nothing is split.
    if below.is_empty() {
        return Ok(whole);
    }
    let below_mean = below.iter().fold(T::zero(), |acc, x| acc + (*x).clone()) / T::from_count(below.len());

    let n_lower = T::from_count(partition.lower.len());
    let n_upper = T::from_count(partition.upper.len());
    let target = gamma.clone() * below_mean + (T::one() - gamma) * fair;
    let capacity_lower = (target * n_lower.clone()).clamp_to(T::zero(), class_capacity.clone());
    let capacity_upper = class_capacity - capacity_lower.clone();
    Ok(IntraClassAllocation {
        per_flow_lower: capacity_lower.clone() / n_lower,
        per_flow_upper: capacity_upper.clone() / n_upper,
        capacity_lower,
        capacity_upper,
        split: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn mbps(values: &[f64]) -> Vec<FlowThroughputSample<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| FlowThroughputSample::new(i as u64, v * 1e6))
            .collect()
    }

    fn exact(values: &[i64]) -> Vec<FlowThroughputSample<BigRational>> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| FlowThroughputSample::new(i as u64, ratio(*v, 1)))
            .collect()
    }

    fn ids(v: &[u64]) -> BTreeSet<FlowId> {
        v.iter().map(|i| FlowId(*i)).collect()
    }

    #[test]
    fn stats_examples() {
        let s = compute_stats(&mbps(&[2.0, 4.0, 6.0, 8.0])).unwrap();
        assert_eq!(s.mean, 5e6);
        assert!((s.sigma - 5f64.sqrt() * 1e6).abs() < 1e-6);

        let s = compute_stats(&mbps(&[7.0, 7.0, 7.0])).unwrap();
        assert_eq!((s.mean, s.sigma), (7e6, 0.0));

        let s = compute_stats(&mbps(&[3.5])).unwrap();
        assert_eq!((s.mean, s.sigma), (3.5e6, 0.0));

        assert!(compute_stats::<f64>(&[]).is_err());
    }

    #[test]
    fn stats_exact_variance() {
        let s = compute_stats(&exact(&[2, 4, 6, 8])).unwrap();
        assert_eq!(s.mean, ratio(5, 1));
        assert_eq!(s.variance, ratio(5, 1));
    }

    #[test]
    fn z_score_examples() {
        let samples = mbps(&[2.0, 4.0, 6.0, 8.0]);
        let stats = compute_stats(&samples).unwrap();
        let z = z_scores(&samples, &stats).unwrap();
        let expected = [-1.341_640_786, -0.447_213_595, 0.447_213_595, 1.341_640_786];
        for (i, e) in expected.iter().enumerate() {
            assert!((z[&FlowId(i as u64)] - e).abs() < 1e-9);
        }

        let samples = mbps(&[1.0, 5.0, 9.0]);
        let stats = compute_stats(&samples).unwrap();
        assert_eq!(z_scores(&samples, &stats).unwrap()[&FlowId(1)], 0.0);

        let flat = mbps(&[7.0, 7.0, 7.0]);
        let stats = compute_stats(&flat).unwrap();
        assert!(matches!(z_scores(&flat, &stats), Err(Error::DegenerateClass)));
        assert!(matches!(partition(&flat, &stats, -0.25), Err(Error::DegenerateClass)));
    }

    #[test]
    fn partition_examples() {
        let samples = mbps(&[2.0, 4.0, 6.0, 8.0]);
        let stats = compute_stats(&samples).unwrap();
        let p = partition(&samples, &stats, -0.25).unwrap();
        assert_eq!(p.lower, ids(&[0, 1]));
        assert_eq!(p.upper, ids(&[2, 3]));

        let p = partition(&samples, &stats, -10.0).unwrap();
        assert!(p.lower.is_empty());

        let p = partition(&samples, &stats, 0.0).unwrap();
        assert_eq!(p.lower, below_mean_set(&samples, &stats));
    }

    #[test]
    fn tie_on_beta_goes_upper() {
        // mean 1, sigma 1: z = (-1, +1)
        let samples = exact(&[0, 2]);
        let stats = compute_stats(&samples).unwrap();
        let p = partition(&samples, &stats, ratio(-1, 1)).unwrap();
        assert!(p.lower.is_empty());
        let p = partition(&samples, &stats, ratio(1, 1)).unwrap();
        assert_eq!(p.lower, ids(&[0]));
        assert_eq!(p.upper, ids(&[1]));
    }

    #[test]
    fn duplicate_flow_ids_rejected() {
        let mut samples = mbps(&[1.0, 2.0, 3.0]);
        samples[2].flow_id = FlowId(0);
        let stats = compute_stats(&samples).unwrap();
        assert!(partition(&samples, &stats, 0.0).is_err());
    }

    #[test]
    fn below_mean_examples() {
        let s = mbps(&[2.0, 4.0, 6.0, 8.0]);
        assert_eq!(below_mean_set(&s, &compute_stats(&s).unwrap()), ids(&[0, 1]));
        let s = mbps(&[7.0, 7.0, 7.0]);
        assert!(below_mean_set(&s, &compute_stats(&s).unwrap()).is_empty());
        let s = mbps(&[1.0, 9.0]);
        assert_eq!(below_mean_set(&s, &compute_stats(&s).unwrap()), ids(&[0]));
    }

    fn worked(gamma: BigRational) -> IntraClassAllocation<BigRational> {
        let samples = exact(&[2, 4, 6, 8]);
        let stats = compute_stats(&samples).unwrap();
        let p = partition(&samples, &stats, ratio(-1, 4)).unwrap();
        allocate_subclasses(&p, &samples, &stats, ratio(20, 1), gamma).unwrap()
    }

    #[test]
    fn worked_allocation_examples() {
        let a = worked(ratio(1, 2));
        assert_eq!(a.per_flow_lower, ratio(4, 1));
        assert_eq!(a.capacity_lower, ratio(8, 1));
        assert_eq!(a.capacity_upper, ratio(12, 1));
        assert_eq!(a.per_flow_upper, ratio(6, 1));
        assert!(a.per_flow_upper >= ratio(5, 1));

        assert_eq!(worked(ratio(0, 1)).per_flow_lower, ratio(5, 1));
        assert_eq!(worked(ratio(1, 1)).per_flow_lower, ratio(3, 1));
    }

    #[test]
    fn gamma_out_of_range() {
        let samples = mbps(&[2.0, 4.0, 6.0, 8.0]);
        let stats = compute_stats(&samples).unwrap();
        let p = partition(&samples, &stats, -0.25).unwrap();
        for g in [-0.1, 1.1, f64::NAN] {
            assert!(matches!(
                allocate_subclasses(&p, &samples, &stats, 20e6, g),
                Err(Error::Parameter { name: "gamma", .. })
            ));
        }
    }

    #[test]
    fn one_sided_partition_is_not_split() {
        let samples = mbps(&[2.0, 4.0, 6.0, 8.0]);
        let stats = compute_stats(&samples).unwrap();
        let p = partition(&samples, &stats, -10.0).unwrap();
        let a = allocate_subclasses(&p, &samples, &stats, 20e6, 0.5).unwrap();
        assert!(!a.split);
        assert_eq!((a.capacity_lower, a.capacity_upper), (0.0, 20e6));
        assert_eq!(a.per_flow_upper, 5e6);
    }

    #[test]
    fn overshooting_measurements_are_clamped() {
        // achieved throughput far above the allocated share
        let samples = mbps(&[10.0, 90.0, 100.0, 100.0]);
        let stats = compute_stats(&samples).unwrap();
        let p = partition(&samples, &stats, 0.0).unwrap();
        let a = allocate_subclasses(&p, &samples, &stats, 8e6, 1.0).unwrap();
        assert!(a.capacity_lower >= 0.0 && a.capacity_lower <= 8e6);
        assert_eq!(a.capacity_lower + a.capacity_upper, 8e6);
    }
}
