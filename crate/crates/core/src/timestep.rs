//! Multi-term coefficient algebra for the implicit time stepper.
//!
//! With `P = sum_i d_i D^{alpha_i}` every step solves
//! `u^k - kappa u^k_xx = rhs^k`, where `kappa = 1 / eta_{k,k}` is the same on
//! every step of a uniform grid. The right-hand side is available in two
//! algebraically equal forms: the fast form built from per-term recurrence
//! states, and the history form weighting all earlier iterates by differences
//! of `zeta_{j,k} = eta_{j,k} / eta_{k,k}`.

use crate::cf::{b_coeff, FractionalOrder};
use crate::error::{Error, Result};

/// `P = sum_i d_i D^{alpha_i}` with terms sorted by order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTermOperator {
    terms: Vec<(f64, FractionalOrder)>,
}

impl MultiTermOperator {
    /// Builds the operator from parallel weight and order lists.
    ///
    /// Terms are sorted by order; equal orders are kept as separate terms.
    pub fn new(weights: &[f64], alphas: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("multi-term operator needs at least one term"));
        }
        if weights.len() != alphas.len() {
            return Err(Error::domain(format!(
                "{} weights given for {} orders",
                weights.len(),
                alphas.len()
            )));
        }
        if let Some(d) = weights.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::domain(format!("term weights must be non-negative, got {d}")));
        }
        if !weights.iter().any(|&d| d > 0.0) {
            return Err(Error::domain("at least one term weight must be positive"));
        }
        let mut terms = weights
            .iter()
            .zip(alphas)
            .map(|(&d, &a)| Ok((d, FractionalOrder::new(a)?)))
            .collect::<Result<Vec<_>>>()?;
        terms.sort_by(|a, b| a.1.alpha().total_cmp(&b.1.alpha()));
        Ok(Self { terms })
    }

    pub fn single(weight: f64, alpha: f64) -> Result<Self> {
        Self::new(&[weight], &[alpha])
    }

    pub fn terms(&self) -> &[(f64, FractionalOrder)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.0).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.1.alpha()).collect()
    }

    /// Largest order `alpha_n`.
    pub fn max_alpha(&self) -> f64 {
        self.terms.last().map(|t| t.1.alpha()).unwrap_or(0.0)
    }

    /// `sum_i d_i / (1 - alpha_i)`, the limit of `eta_{k,k}` as `dt -> 0`.
    pub fn eta_limit(&self) -> f64 {
        self.terms.iter().map(|(d, o)| d / (1.0 - o.alpha())).sum()
    }
}

/// Quantities shared by every step of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoefficients {
    pub dt: f64,
    /// `eta_{k,k} = sum_i d_i local_i`.
    pub eta_diag: f64,
    /// `1 / eta_{k,k}`.
    pub kappa: f64,
    /// `exp(-beta_i dt)` per term.
    pub decays: Vec<f64>,
    /// `b_{k,k}^{(alpha_i)} / (alpha_i dt)` per term.
    pub locals: Vec<f64>,
}

pub fn step_coefficients(mt: &MultiTermOperator, dt: f64) -> Result<StepCoefficients> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let decays: Vec<f64> = mt.terms().iter().map(|(_, o)| o.decay(dt)).collect();
    let locals: Vec<f64> = mt.terms().iter().map(|(_, o)| o.local_weight(dt)).collect();
    let eta_diag: f64 = mt.terms().iter().zip(&locals).map(|((d, _), l)| d * l).sum();
    Ok(StepCoefficients {
        dt,
        eta_diag,
        kappa: 1.0 / eta_diag,
        decays,
        locals,
    })
}

/// `eta_{j,k} = sum_i d_i / (alpha_i dt) * b_{j,k}^{(alpha_i)}`.
pub fn eta(mt: &MultiTermOperator, j: usize, k: usize, dt: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (d, o) in mt.terms() {
        acc += d / (o.alpha() * dt) * b_coeff(*o, j, k, dt)?;
    }
    Ok(acc)
}

/// `zeta_{j,k} = eta_{j,k} / eta_{k,k}`.
pub fn zeta(mt: &MultiTermOperator, j: usize, k: usize, dt: f64) -> Result<f64> {
    if j == k {
        // ratio of identical sums
        eta(mt, j, k, dt)?;
        return Ok(1.0);
    }
    Ok(eta(mt, j, k, dt)? / eta(mt, k, k, dt)?)
}

/// Weights applied to `u^0 .. u^{k-1}` by the history form at step `k`:
/// `[zeta_{1,k}, zeta_{2,k} - zeta_{1,k}, ..., zeta_{k,k} - zeta_{k-1,k}]`.
///
/// Recomputed from scratch on every call.
pub fn history_weights(mt: &MultiTermOperator, k: usize, dt: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::domain("history weights are defined from k = 1"));
    }
    let zetas = (1..=k).map(|j| zeta(mt, j, k, dt)).collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::with_capacity(k);
    weights.push(zetas[0]);
    weights.extend(zetas.windows(2).map(|z| z[1] - z[0]));
    Ok(weights)
}

/// Fast-operator state of one term, held for every node of a field.
///
/// Equivalent to one [`crate::cf::FastCfState`] per node; the previous field
/// is owned by the caller and shared across terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FastField {
    order: FractionalOrder,
    decay: f64,
    local_weight: f64,
    step_index: usize,
    values: Vec<f64>,
}

impl FastField {
    /// `F^1 = local (u^1 - u^0)` pointwise.
    pub fn init(order: FractionalOrder, dt: f64, prev: &[f64], next: &[f64]) -> Result<Self> {
        if prev.len() != next.len() {
            return Err(Error::domain("fields of different length"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        let local_weight = order.local_weight(dt);
        Ok(Self {
            order,
            decay: order.decay(dt),
            local_weight,
            step_index: 1,
            values: prev.iter().zip(next).map(|(a, b)| local_weight * (b - a)).collect(),
        })
    }

    /// `F^k = decay F^{k-1} + local (u^k - u^{k-1})` pointwise.
    pub fn step(&mut self, prev: &[f64], next: &[f64]) {
        debug_assert_eq!(prev.len(), self.values.len());
        debug_assert_eq!(next.len(), self.values.len());
        for ((f, a), b) in self.values.iter_mut().zip(prev).zip(next) {
            *f = self.decay * *f + self.local_weight * (b - a);
        }
        self.step_index += 1;
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `kappa * sum_i d_i decay_i F^{alpha_i} u^{k-1}`, pointwise over the field.
pub fn multiterm_fast_combination(states: &[FastField], mt: &MultiTermOperator, kappa: f64) -> Result<Vec<f64>> {
    if states.len() != mt.len() {
        return Err(Error::domain(format!(
            "{} fast states for {} terms",
            states.len(),
            mt.len()
        )));
    }
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let step = first.step_index();
    let len = first.values().len();
    let mut out = vec![0.0; len];
    for (state, (d, _)) in states.iter().zip(mt.terms()) {
        if state.step_index() != step {
            return Err(Error::Desync {
                expected: step,
                found: state.step_index(),
            });
        }
        if state.values().len() != len {
            return Err(Error::domain("fast states over fields of different length"));
        }
        let w = kappa * d * state.decay();
        for (o, f) in out.iter_mut().zip(state.values()) {
            *o += w * f;
        }
    }
    Ok(out)
}
