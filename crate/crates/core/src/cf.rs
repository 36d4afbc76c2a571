//! Caputo-Fabrizio derivative of scalar signals.
//!
//! The CF derivative of order `alpha` has the exponential kernel
//! `exp(-beta (t - s))` with `beta = alpha / (1 - alpha)`:
//!
//! ```text
//! D^alpha h(t) = 1/(1-alpha) * int_0^t h'(s) exp(-beta (t - s)) ds
//! ```
//!
//! Two discrete approximations are provided. [`l1_direct`] inserts the
//! piecewise-linear interpolant of the samples into the integral and sums
//! over the whole history. [`FastCfState`] evaluates the same quantity with a
//! one-step recurrence, because the kernel factorises across a time step.
//! Both agree to round-off; the recurrence needs O(1) storage per signal.
//!
//! Closed forms for `t^m`, `cos(wt)` and `exp(wt)` and an adaptive quadrature
//! of the defining integral serve as reference values.

use crate::error::{Error, Result};

/// Order `alpha` in (0, 1) together with its decay rate `beta = alpha/(1-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    alpha: f64,
    beta: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!(
                "fractional order must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            beta: alpha / (1.0 - alpha),
        })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `exp(-beta * dt)`, the factor by which the kernel decays over one step.
    #[inline]
    pub fn decay(&self, dt: f64) -> f64 {
        (-self.beta * dt).exp()
    }

    /// `b_{k,k} = 1 - exp(-beta dt)`, the same for every k on a uniform grid.
    #[inline]
    /// Evaluated as written, `1 - decay`, so that it matches the sigma
    /// differences it stands for.
    pub fn b_diag(&self, dt: f64) -> f64 {
        1.0 - self.decay(dt)
    }

    /// `b_{k,k} / (alpha dt)`: the weight of the newest increment.
    #[inline]
    pub fn local_weight(&self, dt: f64) -> f64 {
        self.b_diag(dt) / (self.alpha * dt)
    }
}

/// Uniform grid `t_k = k dt` on `[0, T]` with `dt = T / N_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("time horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k`. The last node is returned as `T` exactly.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
}

/// Samples `h^0 .. h^k` of a signal on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() > grid.steps() + 1 {
            return Err(Error::domain(format!(
                "signal has {} samples, grid admits 1..={}",
                values.len(),
                grid.steps() + 1
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `h` at every node of `grid`.
    pub fn from_fn(grid: TimeGrid, h: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.steps()).map(|k| h(grid.node(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the last sample.
    pub fn last_index(&self) -> usize {
        self.values.len() - 1
    }
}

/// `sigma_{j,k} = exp(-beta (t_k - t_j))`.
pub fn sigma(order: FractionalOrder, j: usize, k: usize, dt: f64) -> Result<f64> {
    if j > k {
        return Err(Error::domain(format!("sigma needs j <= k, got j={j}, k={k}")));
    }
    check_dt(dt)?;
    Ok((-order.beta() * (k - j) as f64 * dt).exp())
}

/// `b_{j,k} = sigma_{j,k} - sigma_{j-1,k}` for `1 <= j <= k`.
pub fn b_coeff(order: FractionalOrder, j: usize, k: usize, dt: f64) -> Result<f64> {
    if j == 0 || j > k {
        return Err(Error::domain(format!("b_coeff needs 1 <= j <= k, got j={j}, k={k}")));
    }
    // sigma_{j,k} - sigma_{j-1,k} = sigma_{j,k} (1 - exp(-beta dt))
    Ok(sigma(order, j, k, dt)? * order.b_diag(dt))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time step must be positive, got {dt}")))
    }
}

/// L1 approximation `L_t^alpha h^k`, summing over the full history.
///
/// Every `b_{j,k}` is evaluated from its exponential, so one call costs O(k)
/// transcendental evaluations. See [`l1_sweep`] for the tabulated form.
pub fn l1_direct(signal: &SampledSignal, order: FractionalOrder, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("the L1 operator is defined from k = 1"));
    }
    if k > signal.last_index() {
        return Err(Error::domain(format!(
            "k = {k} exceeds the {} available samples",
            signal.values().len()
        )));
    }
    let dt = signal.grid().dt();
    let h = signal.values();
    let mut acc = 0.0;
    for j in 1..=k {
        acc += b_coeff(order, j, k, dt)? * (h[j] - h[j - 1]);
    }
    Ok(acc / (order.alpha() * dt))
}

/// `L_t^alpha h^k` for every `k = 1..=K` with the coefficients tabulated once.
///
/// Uses `b_{j,k} = b_{k,k} exp(-beta (k-j) dt)`, so the sweep does O(K^2)
/// multiply-adds and only O(K) exponentials. Entry `i` of the result is the
/// value at `k = i + 1`.
pub fn l1_sweep(signal: &SampledSignal, order: FractionalOrder) -> Vec<f64> {
    let dt = signal.grid().dt();
    let h = signal.values();
    let n = signal.last_index();
    let decay = order.decay(dt);
    // b_{j,k} depends on k - j only: b_{j,k+1} = b_{j,k} exp(-beta dt)
    let mut weights = Vec::with_capacity(n);
    let mut w = order.local_weight(dt);
    for _ in 0..n {
        weights.push(w);
        w *= decay;
    }
    let increments: Vec<f64> = h.windows(2).map(|p| p[1] - p[0]).collect();

    (1..=n)
        .map(|k| {
            // sum_{j=1..k} w[k-j] dh[j-1]
            increments[..k]
                .iter()
                .zip(weights[..k].iter().rev())
                .map(|(dh, w)| dh * w)
                .sum()
        })
        .collect()
}

/// Running state of the fast operator `F_t^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastCfState {
    order: FractionalOrder,
    dt: f64,
    decay: f64,
    local_weight: f64,
    current: f64,
    step_index: usize,
    prev_sample: f64,
}

impl FastCfState {
    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn local_weight(&self) -> f64 {
        self.local_weight
    }

    /// `F_t^alpha h^k` at the current step.
    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn prev_sample(&self) -> f64 {
        self.prev_sample
    }

    /// Advances by one sample and returns the new value.
    #[inline]
    pub fn step(&mut self, h_next: f64) -> f64 {
        self.current = self.decay * self.current + self.local_weight * (h_next - self.prev_sample);
        self.prev_sample = h_next;
        self.step_index += 1;
        self.current
    }
}

/// Starts the recurrence at `k = 1` from the first two samples.
pub fn fast_init(order: FractionalOrder, dt: f64, h0: f64, h1: f64) -> Result<FastCfState> {
    check_dt(dt)?;
    let local_weight = order.local_weight(dt);
    Ok(FastCfState {
        order,
        dt,
        decay: order.decay(dt),
        local_weight,
        current: local_weight * (h1 - h0),
        step_index: 1,
        prev_sample: h1,
    })
}

pub fn fast_step(mut state: FastCfState, h_next: f64) -> FastCfState {
    state.step(h_next);
    state
}

/// `F_t^alpha h^k` for every `k = 1..=K`; entry `i` holds the value at `k = i + 1`.
pub fn fast_sweep(signal: &SampledSignal, order: FractionalOrder) -> Result<Vec<f64>> {
    let h = signal.values();
    if h.len() < 2 {
        return Ok(Vec::new());
    }
    let mut state = fast_init(order, signal.grid().dt(), h[0], h[1])?;
    let mut out = Vec::with_capacity(h.len() - 1);
    out.push(state.current());
    for &x in &h[2..] {
        out.push(state.step(x));
    }
    Ok(out)
}

/// Smallest `|omega + beta|` accepted by [`cf_exact_exp`].
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

/// Exact CF derivative of `t^m` at `t`.
///
/// For `beta t <= m` the series `m! t^m sum_i (-beta t)^i / (m + i)!` is used;
/// its terms shrink from the first one, so nothing cancels. Beyond that the
/// closed-form alternating sum is accumulated with Neumaier summation.
pub fn cf_exact_power(m: u32, order: FractionalOrder, t: f64) -> f64 {
    assert!(m >= 1, "power must be at least 1");
    let beta = order.beta();
    let x = beta * t;
    if x <= f64::from(m) {
        let mut sum = NeumaierSum::default();
        let mut term = 1.0_f64;
        let mut i = 0;
        while term.abs() > 1e-18 * sum.total().abs() || i == 0 {
            sum.add(term);
            term *= -x / f64::from(m + i + 1);
            i += 1;
        }
        return t.powi(m as i32) * sum.total() / (1.0 - order.alpha());
    }
    let mut sum = NeumaierSum::default();
    // m!/(m-i-1)! built up as m (m-1) ... (m-i)
    let mut falling = 1.0;
    let mut beta_pow = 1.0;
    for i in 0..m {
        falling *= f64::from(m - i);
        beta_pow *= beta;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum.add(sign * falling / beta_pow * t.powi((m - i - 1) as i32));
    }
    // falling == m!, beta_pow == beta^m
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sum.add(sign * (-x).exp() * falling / beta_pow);
    sum.total() / (1.0 - order.alpha())
}

/// Exact CF derivative of `cos(omega t)` at `t`.
pub fn cf_exact_cos(omega: f64, order: FractionalOrder, t: f64) -> f64 {
    let beta = order.beta();
    let b2 = beta * beta;
    let bracket = (omega * t).sin() / beta - omega * (omega * t).cos() / b2 + (-beta * t).exp() * omega / b2;
    -(b2 * omega / (b2 + omega * omega)) * bracket / (1.0 - order.alpha())
}

/// Exact CF derivative of `exp(omega t)` at `t`.
pub fn cf_exact_exp(omega: f64, order: FractionalOrder, t: f64) -> Result<f64> {
    let beta = order.beta();
    let denom = omega + beta;
    if denom.abs() < SINGULAR_THRESHOLD {
        return Err(Error::SingularParameter(format!(
            "omega + beta = {denom:e} for omega = {omega}, beta = {beta}"
        )));
    }
    Ok(omega * ((omega * t).exp() - (-beta * t).exp()) / denom / (1.0 - order.alpha()))
}

/// Subdivision budget of [`cf_quadrature_oracle`].
pub const QUADRATURE_MAX_SUBDIVISIONS: usize = 20_000;

/// Evaluates the defining CF integral by adaptive Gauss-Kronrod quadrature.
///
/// `tol` is an absolute error target for the returned value.
pub fn cf_quadrature_oracle(h_prime: impl Fn(f64) -> f64, order: FractionalOrder, t: f64, tol: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::domain(format!("oracle needs t >= 0, got {t}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain(format!("oracle tolerance must be positive, got {tol}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let scale = 1.0 / (1.0 - order.alpha());
    let beta = order.beta();
    let integrand = |s: f64| h_prime(s) * (-beta * (t - s)).exp();
    let value = adaptive_gk15(integrand, 0.0, t, tol / scale, QUADRATURE_MAX_SUBDIVISIONS)?;
    Ok(scale * value)
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive bisection driven by the Kronrod-minus-Gauss error estimate.
///
/// An interval is accepted once its local estimate falls below its share of
/// `tol`, proportional to its length.
pub fn adaptive_gk15(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_subdivisions: usize) -> Result<f64> {
    let length = b - a;
    let mut total = NeumaierSum::default();
    let mut pending = vec![(a, b)];
    let mut subdivisions = 0;
    let mut worst = 0.0_f64;
    while let Some((lo, hi)) = pending.pop() {
        let (value, err) = gk15(&f, lo, hi);
        let share = tol * (hi - lo) / length;
        if err <= share {
            total.add(value);
            continue;
        }
        subdivisions += 1;
        // an interval at floating-point resolution cannot be refined further
        if subdivisions > max_subdivisions || (hi - lo) <= f64::EPSILON * length.abs() {
            worst = worst.max(err);
            return Err(Error::QuadratureNotConverged {
                subdivisions,
                estimate: worst,
                tol,
            });
        }
        worst = worst.max(err);
        let mid = 0.5 * (lo + hi);
        pending.push((mid, hi));
        pending.push((lo, mid));
    }
    Ok(total.total())
}

/// Neumaier's variant of Kahan compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
