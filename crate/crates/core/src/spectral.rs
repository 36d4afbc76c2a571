//! Legendre-Gauss-Lobatto machinery on `[-1, 1]` and on a physical interval `[0, S]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Newton budget per LGL node.
pub const NEWTON_MAX_ITERATIONS: usize = 100;
/// Newton stops once the update falls below this.
pub const NEWTON_TOLERANCE: f64 = 1e-14;
/// Uniform points used for the sup-norm, in addition to the nodes.
pub const SUP_SAMPLES: usize = 1000;

/// `(L_N(x), L_N'(x))` by the three-term recurrence.
pub fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    match n {
        0 => (1.0, 0.0),
        1 => (x, 1.0),
        _ => {
            let (mut p_prev, mut p) = (1.0, x);
            let (mut dp_prev, mut dp) = (0.0, 1.0);
            for k in 2..=n {
                let kf = k as f64;
                let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
                // L_k' = L_{k-2}' + (2k - 1) L_{k-1}
                let dp_next = dp_prev + (2.0 * kf - 1.0) * p;
                p_prev = p;
                p = p_next;
                dp_prev = dp;
                dp = dp_next;
            }
            (p, dp)
        }
    }
}

/// LGL nodes and weights of degree `N` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreBasis {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    legendre_at_nodes: Vec<f64>,
}

impl LegendreBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `L_N(xi_p)` for every node.
    pub fn legendre_at_nodes(&self) -> &[f64] {
        &self.legendre_at_nodes
    }
}

/// Computes the `N + 1` LGL nodes (endpoints plus the roots of `L_N'`) and weights.
pub fn lgl_basis(n: usize) -> Result<LegendreBasis> {
    if n == 0 {
        return Err(Error::domain("LGL basis needs degree N >= 1"));
    }
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    // Only the lower half is iterated; the rest follows by symmetry.
    for p in 1..=n / 2 {
        let mut x = -(std::f64::consts::PI * p as f64 / nf).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (l, dl) = legendre_eval(n, x);
            // L_N'' from the Legendre equation, valid away from +-1
            let d2l = (2.0 * x * dl - nf * (nf + 1.0) * l) / (1.0 - x * x);
            let dx = dl / d2l;
            x -= dx;
            if dx.abs() <= NEWTON_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonNotConverged {
                degree: n,
                node: p,
                iterations: NEWTON_MAX_ITERATIONS,
            });
        }
        nodes[p] = x;
        nodes[n - p] = -x;
    }
    if n.is_multiple_of(2) {
        nodes[n / 2] = 0.0;
    }
    let legendre_at_nodes: Vec<f64> = nodes.iter().map(|&x| legendre_eval(n, x).0).collect();
    let scale = 2.0 / (nf * (nf + 1.0));
    let weights = legendre_at_nodes.iter().map(|l| scale / (l * l)).collect();
    Ok(LegendreBasis {
        degree: n,
        nodes,
        weights,
        legendre_at_nodes,
    })
}

/// LGL basis mapped to `[0, S]` with its nodal differentiation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedBasis {
    base: LegendreBasis,
    length: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff: DMatrix<f64>,
    barycentric: Vec<f64>,
}

impl ShiftedBasis {
    pub fn new(degree: usize, length: f64) -> Result<Self> {
        shift_basis(lgl_basis(degree)?, length)
    }

    pub fn base(&self) -> &LegendreBasis {
        &self.base
    }

    pub fn degree(&self) -> usize {
        self.base.degree
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `D[p][i] = h_i'(x_p)`.
    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Evaluates the interpolant of nodal `values` at `x` (barycentric form).
    pub fn eval(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xi, &wi), &vi) in self.nodes.iter().zip(&self.barycentric).zip(values) {
            let d = x - xi;
            if d == 0.0 {
                return vi;
            }
            let t = wi / d;
            num += t * vi;
            den += t;
        }
        num / den
    }

    /// Nodal values of the derivative of the interpolant of `values`.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.diff * v).iter().copied().collect()
    }

    fn same_as(&self, other: &ShiftedBasis) -> bool {
        std::ptr::eq(self, other) || (self.degree() == other.degree() && self.length == other.length)
    }
}

/// Maps `base` onto `[0, S]`: `x = S (xi + 1) / 2`, `w = S omega / 2`.
pub fn shift_basis(base: LegendreBasis, length: f64) -> Result<ShiftedBasis> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::domain(format!("domain length must be positive, got {length}")));
    }
    let half = 0.5 * length;
    let nodes = base.nodes.iter().map(|xi| half * (xi + 1.0)).collect();
    let weights = base.weights.iter().map(|w| half * w).collect();
    let diff = reference_diff_matrix(&base) * (1.0 / half);
    let barycentric = barycentric_weights(&base.nodes);
    Ok(ShiftedBasis {
        base,
        length,
        nodes,
        weights,
        diff,
        barycentric,
    })
}

fn reference_diff_matrix(base: &LegendreBasis) -> DMatrix<f64> {
    let n = base.degree;
    let x = &base.nodes;
    let l = &base.legendre_at_nodes;
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for p in 0..=n {
        let mut row_sum = 0.0;
        for i in 0..=n {
            if i != p {
                let v = l[p] / l[i] / (x[p] - x[i]);
                d[(p, i)] = v;
                row_sum += v;
            }
        }
        // negative-sum diagonal; analytically -N(N+1)/4, 0, ..., 0, N(N+1)/4
        d[(p, p)] = -row_sum;
    }
    d
}

/// `1 / prod_{j != i} 2 (x_i - x_j)`, normalised to unit maximum.
fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = (0..x.len())
        .map(|i| {
            let prod: f64 = (0..x.len()).filter(|&j| j != i).map(|j| 2.0 * (x[i] - x[j])).product();
            1.0 / prod
        })
        .collect();
    let max = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= max);
    w
}

/// Nodal values on a shared [`ShiftedBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    basis: Arc<ShiftedBasis>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(basis: Arc<ShiftedBasis>, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::domain(format!(
                "{} values for a basis with {} nodes",
                values.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, values })
    }

    pub fn zeros(basis: Arc<ShiftedBasis>) -> Self {
        let values = vec![0.0; basis.len()];
        Self { basis, values }
    }

    pub fn basis(&self) -> &Arc<ShiftedBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value of the interpolating polynomial at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.basis.eval(&self.values, x)
    }

    pub fn derivative(&self) -> GridFunction {
        GridFunction {
            basis: Arc::clone(&self.basis),
            values: self.basis.differentiate(&self.values),
        }
    }

    /// `||u||_N` in the discrete norm.
    pub fn discrete_norm(&self) -> f64 {
        discrete_inner(self, self).map(f64::sqrt).unwrap_or(f64::NAN)
    }
}

/// `(u, v)_N = sum_p u(x_p) v(x_p) w_p`.
pub fn discrete_inner(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    if !u.basis.same_as(&v.basis) {
        return Err(Error::BasisMismatch);
    }
    Ok(u.values
        .iter()
        .zip(&v.values)
        .zip(u.basis.weights())
        .map(|((a, b), w)| a * b * w)
        .sum())
}

/// Nodal interpolation `I_N f`.
pub fn interpolate(f: impl Fn(f64) -> f64, basis: &Arc<ShiftedBasis>) -> GridFunction {
    GridFunction {
        basis: Arc::clone(basis),
        values: basis.nodes().iter().map(|&x| f(x)).collect(),
    }
}

/// Errors of an approximation against an exact profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub sup: f64,
    pub l2: f64,
    /// `sqrt(l2^2 + kappa ||e'||^2)`.
    pub h1: f64,
}

/// Sup, L2 and weighted H1 errors of `approx` against `exact`.
///
/// The sup is taken over [`SUP_SAMPLES`] uniform points and the nodes. The
/// integral norms use the LGL rule of degree `2N`, which is not exact for a
/// non-polynomial integrand but far finer than the approximation.
pub fn error_norms(
    exact: impl Fn(f64) -> f64,
    exact_dx: impl Fn(f64) -> f64,
    approx: &GridFunction,
    kappa: f64,
) -> Result<ErrorNorms> {
    let basis = approx.basis();
    let s = basis.length();
    let values = approx.values();

    let uniform = (0..SUP_SAMPLES).map(|i| s * i as f64 / (SUP_SAMPLES - 1) as f64);
    let sup = uniform
        .chain(basis.nodes().iter().copied())
        .map(|x| (exact(x) - basis.eval(values, x)).abs())
        .fold(0.0_f64, f64::max);

    let fine = ShiftedBasis::new(2 * basis.degree(), s)?;
    let dvalues = basis.differentiate(values);
    let mut l2_sq = 0.0;
    let mut dx_sq = 0.0;
    for (&x, &w) in fine.nodes().iter().zip(fine.weights()) {
        let e = exact(x) - basis.eval(values, x);
        let de = exact_dx(x) - basis.eval(&dvalues, x);
        l2_sq += w * e * e;
        dx_sq += w * de * de;
    }
    Ok(ErrorNorms {
        sup,
        l2: l2_sq.sqrt(),
        h1: (l2_sq + kappa * dx_sq).sqrt(),
    })
}
