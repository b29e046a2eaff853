//! Weighted alpha-fair capacity split across service classes.
//!
//! Each class `s` with `n_s` active flows and weight `w_s` receives
//!
//! ```text
//! X_s = n_s * w_s^(1/alpha) / sum_s' n_s' * w_s'^(1/alpha) * C
//! ```
//!
//! which maximizes `sum_s n_s * U_s(X_s / n_s)` subject to `sum_s X_s <= C`
//! for the weighted alpha-fair utility family. [`allocate_numeric_oracle`]
//! solves the same program without using the closed form and
//! [`verify_kkt`] checks optimality conditions directly; both exist to
//! cross-check [`allocate_closed_form`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scalar::Scalar;
use crate::ClassId;

/// Smallest accepted fairness parameter. `w^(1/alpha)` is unusable below it.
pub const ALPHA_MIN: f64 = 1e-3;

/// `|alpha - 1|` below this selects the logarithmic utility.
pub const ALPHA_ONE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceClassSpec<T> {
    pub class_id: ClassId,
    pub weight: T,
}

impl<T: Scalar> ServiceClassSpec<T> {
    pub fn new(class_id: impl Into<ClassId>, weight: T) -> Self {
        Self {
            class_id: class_id.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassLoad<T> {
    pub spec: ServiceClassSpec<T>,
    pub flows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterClassInput<T> {
    pub classes: Vec<ClassLoad<T>>,
    /// Link capacity `C` in bits/second.
    pub capacity: T,
    pub alpha: T,
}

impl<T: Scalar> InterClassInput<T> {
    pub fn new(capacity: T, alpha: T) -> Self {
        Self {
            classes: Vec::new(),
            capacity,
            alpha,
        }
    }

    pub fn with_class(mut self, class_id: impl Into<ClassId>, weight: T, flows: usize) -> Self {
        self.classes.push(ClassLoad {
            spec: ServiceClassSpec::new(class_id, weight),
            flows,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > T::zero()) || !self.capacity.is_finite() {
            return Err(param("capacity", format!("{:?} must be positive", self.capacity)));
        }
        check_alpha(&self.alpha)?;
        let mut seen = BTreeSet::new();
        for c in &self.classes {
            if !seen.insert(&c.spec.class_id) {
                return Err(Error::Config(format!("duplicate class id {}", c.spec.class_id)));
            }
            if !(c.spec.weight > T::zero()) || !c.spec.weight.is_finite() {
                return Err(param(
                    "weight",
                    format!("class {} has non-positive weight {:?}", c.spec.class_id, c.spec.weight),
                ));
            }
        }
        if self.classes.iter().all(|c| c.flows == 0) {
            return Err(Error::Config("every service class is empty".into()));
        }
        Ok(())
    }

    fn load(&self, class_id: &ClassId) -> Result<&ClassLoad<T>> {
        self.classes
            .iter()
            .find(|c| &c.spec.class_id == class_id)
            .ok_or_else(|| Error::Domain(format!("unknown class {class_id}")))
    }
}

fn check_alpha<T: Scalar>(alpha: &T) -> Result<()> {
    if !(*alpha >= T::lit(ALPHA_MIN)) || !alpha.is_finite() {
        return Err(param("alpha", format!("{alpha:?} is below the minimum {ALPHA_MIN}")));
    }
    Ok(())
}

fn is_log_branch<T: Scalar>(alpha: &T) -> bool {
    (alpha.clone() - T::one()).abs() < T::lit(ALPHA_ONE_EPS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterClassAllocation<T> {
    /// Capacity `X_s` per class in bits/second.
    pub shares: BTreeMap<ClassId, T>,
}

impl<T: Scalar> InterClassAllocation<T> {
    pub fn share(&self, class_id: &ClassId) -> Option<&T> {
        self.shares.get(class_id)
    }

    pub fn total(&self) -> T {
        self.shares.values().cloned().fold(T::zero(), |a, b| a + b)
    }
}

/// Weighted alpha-fair utility `w log x` (alpha = 1) or `w x^(1-alpha) / (1-alpha)`.
pub fn utility<T: Scalar>(x: &T, weight: &T, alpha: &T) -> Result<T> {
    if !(*x > T::zero()) {
        return Err(Error::Domain(format!("utility undefined at rate {x:?}")));
    }
    if !(*weight > T::zero()) {
        return Err(param("weight", format!("{weight:?} must be positive")));
    }
    check_alpha(alpha)?;
    if is_log_branch(alpha) {
        Ok(weight.clone() * x.ln())
    } else {
        let e = T::one() - alpha.clone();
        Ok(weight.clone() * x.powf(&e) / e)
    }
}

/// Closed-form optimum of the inter-class utility maximization.
///
/// Roots are taken of `w_s / w_max` so the largest-weight class always
/// contributes exactly `1`; tiny roots underflow to zero, which is the
/// correct `alpha -> 0` limit.
pub fn allocate_closed_form<T: Scalar>(input: &InterClassInput<T>) -> Result<InterClassAllocation<T>> {
    input.validate()?;
    let w_max = input
        .classes
        .iter()
        .filter(|c| c.flows > 0)
        .map(|c| c.spec.weight.clone())
        .fold(T::zero(), T::max_of);

    let terms: Vec<(ClassId, T)> = input
        .classes
        .iter()
        .map(|c| {
            let term = if c.flows == 0 {
                T::zero()
            } else {
                T::from_count(c.flows) * (c.spec.weight.clone() / w_max.clone()).alpha_root(&input.alpha)
            };
            (c.spec.class_id.clone(), term)
        })
        .collect();
    let denom = terms.iter().fold(T::zero(), |acc, (_, t)| acc + t.clone());

    let shares = terms
        .into_iter()
        .map(|(id, t)| {
            let x = if t.is_zero() {
                T::zero()
            } else {
                t / denom.clone() * input.capacity.clone()
            };
            (id, x)
        })
        .collect();
    Ok(InterClassAllocation { shares })
}

/// Ratio of average per-flow capacity between two classes.
pub fn per_flow_ratio<T: Scalar>(
    alloc: &InterClassAllocation<T>,
    input: &InterClassInput<T>,
    s: &ClassId,
    s2: &ClassId,
) -> Result<T> {
    let (a, b) = (input.load(s)?, input.load(s2)?);
    if a.flows == 0 || b.flows == 0 {
        return Err(Error::Domain("per-flow ratio needs non-empty classes".into()));
    }
    let xa = alloc
        .share(s)
        .ok_or_else(|| Error::Domain(format!("no share for {s}")))?;
    let xb = alloc
        .share(s2)
        .ok_or_else(|| Error::Domain(format!("no share for {s2}")))?;
    if xb.is_zero() {
        return Err(Error::Domain(format!("class {s2} has zero capacity")));
    }
    Ok((xa.clone() / T::from_count(a.flows)) / (xb.clone() / T::from_count(b.flows)))
}

/// Checks optimality: the capacity is used up and the marginal utilities
/// `w_s (X_s/n_s)^-alpha` coincide across non-empty classes.
///
/// Marginals are compared in log space, so the check is meaningful at any
/// `alpha` without overflow.
pub fn verify_kkt<T: Scalar>(input: &InterClassInput<T>, alloc: &InterClassAllocation<T>, tol: f64) -> bool {
    if input.validate().is_err() {
        return false;
    }
    let cap = input.capacity.to_f64_lossy();
    let total = alloc.total().to_f64_lossy();
    if (total - cap).abs() > tol * cap {
        return false;
    }
    let alpha = input.alpha.to_f64_lossy();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in &input.classes {
        let x = match alloc.share(&c.spec.class_id) {
            Some(x) => x.to_f64_lossy(),
            None => return false,
        };
        if x < 0.0 || !x.is_finite() {
            return false;
        }
        if c.flows == 0 {
            if x != 0.0 {
                return false;
            }
            continue;
        }
        if x == 0.0 {
            // infinite marginal utility; capacity could be moved here profitably
            return false;
        }
        let ln_marginal = c.spec.weight.to_f64_lossy().ln() - alpha * (x / c.flows as f64).ln();
        lo = lo.min(ln_marginal);
        hi = hi.max(ln_marginal);
    }
    hi - lo <= tol.ln_1p()
}

const ORACLE_BISECTIONS: usize = 200;
const ORACLE_GOLDEN_STEPS: usize = 200;
/// Search window for a class share, in natural-log units below `C`.
const ORACLE_LOG_SPAN: f64 = 80.0;
/// Room above `ln C` so a class that takes nearly everything is not clipped
/// by the search window.
const ORACLE_HEADROOM: f64 = 1.0;

/// Independent maximizer of the inter-class program.
///
/// For a trial price `u` every class maximizes `n U(X/n) - u X` on its own
/// by golden-section search over `ln X` (only [`utility`] is evaluated);
/// the price is then bisected in log space until the shares fill `C`.
/// `tol` bounds the final relative bracket on the price and on each
/// per-class search.
pub fn allocate_numeric_oracle(input: &InterClassInput<f64>, tol: f64) -> Result<InterClassAllocation<f64>> {
    input.validate()?;
    if !(tol > 0.0) {
        return Err(param("tol", "must be positive"));
    }
    let cap = input.capacity;
    let alpha = input.alpha;
    let active: Vec<&ClassLoad<f64>> = input.classes.iter().filter(|c| c.flows > 0).collect();

    // Price bracket from marginal utilities at the edges of the search window.
    let ln_cap = cap.ln();
    let ln_marginal = |c: &ClassLoad<f64>, ln_x: f64| c.spec.weight.ln() - alpha * (ln_x - (c.flows as f64).ln());
    let mut ln_u_lo = f64::INFINITY;
    let mut ln_u_hi = f64::NEG_INFINITY;
    for c in &active {
        ln_u_lo = ln_u_lo.min(ln_marginal(c, ln_cap + ORACLE_HEADROOM));
        ln_u_hi = ln_u_hi.max(ln_marginal(c, ln_cap - ORACLE_LOG_SPAN));
    }
    ln_u_lo -= 1.0;
    ln_u_hi += 1.0;

    let shares_at = |ln_u: f64| -> Result<Vec<f64>> {
        let u = ln_u.exp();
        active.iter().map(|c| best_response(c, u, alpha, ln_cap, tol)).collect()
    };

    let mut iterations = 0;
    while ln_u_hi - ln_u_lo > tol.min(1e-12) * ln_u_hi.abs().max(1.0) {
        if iterations == ORACLE_BISECTIONS {
            return Err(Error::NonConvergence { iterations });
        }
        iterations += 1;
        let mid = 0.5 * (ln_u_lo + ln_u_hi);
        let total: f64 = shares_at(mid)?.iter().sum();
        if total > cap {
            ln_u_lo = mid;
        } else {
            ln_u_hi = mid;
        }
    }
    let raw = shares_at(0.5 * (ln_u_lo + ln_u_hi))?;
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonConvergence { iterations });
    }
    // The remaining bracket error is a common scale factor; spend it so the
    // result is feasible with equality.
    let mut shares: BTreeMap<ClassId, f64> = input.classes.iter().map(|c| (c.spec.class_id.clone(), 0.0)).collect();
    for (c, x) in active.iter().zip(raw) {
        shares.insert(c.spec.class_id.clone(), x * cap / total);
    }
    Ok(InterClassAllocation { shares })
}

/// Maximizes `n U(X/n) - u X` over `ln X` in `[ln C - span, ln C + headroom]`.
fn best_response(c: &ClassLoad<f64>, u: f64, alpha: f64, ln_cap: f64, tol: f64) -> Result<f64> {
    let n = c.flows as f64;
    let objective = |ln_x: f64| -> Result<f64> {
        let x = ln_x.exp();
        Ok(n * utility(&(x / n), &c.spec.weight, &alpha)? - u * x)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (ln_cap - ORACLE_LOG_SPAN, ln_cap + ORACLE_HEADROOM);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    let mut steps = 0;
    while b - a > tol.min(1e-10) {
        if steps == ORACLE_GOLDEN_STEPS {
            return Err(Error::NonConvergence { iterations: steps });
        }
        steps += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1)?;
        }
    }
    Ok((0.5 * (a + b)).exp())
}
