//! The fifteen loss terms, their plain and scaled totals, causal temporal
//! weighting and the split adaptive weighting.
//!
//! Everything here is the value path: direct evaluation through a
//! [`FieldModel`]. The trainer computes the same quantities on the gradient
//! tape; a consistency test pins the two routes together.

use thiserror::Error;

use crate::analytic::MeasurementSet;
use crate::physics::{
    residual_heat_liquid, residual_heat_solid, residual_solute_flux, residual_species,
    residual_stefan, FieldModel, ProblemConfig,
};

/// Fixed scale factors of the scaled total: each loss group is weighted in
/// inverse proportion to the number of points behind it at the reference
/// grid sizes (p = 1000, n_x = 256, n_t = 100, n_c = 25600). They are part
/// of the method, not derived from runtime grid sizes.
pub const SCALE_M: f64 = 25.6;
pub const SCALE_I2: f64 = 25600.0;
pub const SCALE_I13: f64 = 100.0;
pub const SCALE_B: f64 = 256.0;

/// Running-average coefficient for the adaptive weights.
pub const ADAPTIVE_ALPHA: f64 = 0.1;
/// Initial adaptive weights.
pub const LAMBDA_INIT: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("measurement set is empty")]
    EmptyData,
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Physics(#[from] crate::physics::PhysicsError),
}

/// All fifteen loss components. Aggregates are derived, never stored.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl LossBreakdown {
    /// Plain sum of the fifteen terms; the error measure of the run.
    pub fn total_eq20(&self) -> f64 {
        self.m1 + self.m2 + self.m3 + self.i1 + self.i2 + self.i3 + self.b1 + self.b2 + self.b3
            + self.b4
            + self.c_sum()
    }

    pub fn c_sum(&self) -> f64 {
        self.c1 + self.c2 + self.c3 + self.c4 + self.c5
    }

    pub fn b_sum(&self) -> f64 {
        self.b1 + self.b2 + self.b3 + self.b4
    }

    /// Scaled total: 25.6·L_m + 25600·L_i2 + 100·(L_i1+L_i3) + 256·L_b + L_c.
    pub fn total_scaled_eq28(&self) -> f64 {
        SCALE_M * (self.m1 + self.m2 + self.m3)
            + SCALE_I2 * self.i2
            + SCALE_I13 * (self.i1 + self.i3)
            + SCALE_B * self.b_sum()
            + self.c_sum()
    }

    /// Everything of the scaled total except the two adaptive data-fit terms.
    pub fn others_eq29(&self) -> f64 {
        SCALE_M * self.m3
            + SCALE_I2 * self.i2
            + SCALE_I13 * (self.i1 + self.i3)
            + SCALE_B * self.b_sum()
            + self.c_sum()
    }

    /// Adaptive total: λ₁·25.6·m1 + λ₂·25.6·m2 + the fixed-scale rest.
    pub fn total_adaptive_eq29(&self, lambda1: f64, lambda2: f64) -> f64 {
        lambda1 * SCALE_M * self.m1 + lambda2 * SCALE_M * self.m2 + self.others_eq29()
    }

    /// Column names for the loss-history CSV, in file order.
    pub fn csv_header() -> &'static str {
        "m1,m2,m3,i1,i2,i3,b1,b2,b3,b4,c1,c2,c3,c4,c5"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.m1, self.m2, self.m3, self.i1, self.i2, self.i3, self.b1, self.b2, self.b3,
            self.b4, self.c1, self.c2, self.c3, self.c4, self.c5
        )
    }
}

/// Mean squared errors of the composed fields against the labels:
/// (θ composed, C composed, ε*).
pub fn measurement_losses<M: FieldModel>(
    model: &M,
    data: &MeasurementSet,
) -> Result<(f64, f64, f64), LossError> {
    if data.is_empty() {
        return Err(LossError::EmptyData);
    }
    let p = data.len() as f64;
    let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
    for pt in &data.points {
        let dt = model.composed_theta(pt.eps, pt.tau) - pt.theta;
        let dc = model.composed_c(pt.eps, pt.tau) - pt.c;
        let ds = model.interface(pt.tau) - pt.eps_star;
        m1 += dt * dt;
        m2 += dc * dc;
        m3 += ds * ds;
    }
    Ok((m1 / p, m2 / p, m3 / p))
}

/// Initial-condition losses on an ε grid at τ = 0:
/// i1 on θ_l = 1, i2 on ε*(0) = 0, i3 on C_l = C₀.
pub fn initial_losses<M: FieldModel>(
    model: &M,
    cfg: &ProblemConfig,
    eps_grid: &[f64],
) -> Result<(f64, f64, f64), LossError> {
    if eps_grid.is_empty() {
        return Err(LossError::EmptyGrid);
    }
    let n = eps_grid.len() as f64;
    let (mut i1, mut i3) = (0.0, 0.0);
    for &eps in eps_grid {
        let (_, tl) = model.theta(eps, 0.0);
        let cl = model.c_l(eps, 0.0);
        i1 += (tl - 1.0) * (tl - 1.0);
        i3 += (cl - cfg.c0) * (cl - cfg.c0);
    }
    let e0 = model.interface(0.0);
    Ok((i1 / n, e0 * e0, i3 / n))
}

/// Boundary/interface constraint losses over a τ grid, evaluating interface
/// quantities at the model's own predicted ε*(τ).
pub fn boundary_losses<M: FieldModel>(
    model: &M,
    cfg: &ProblemConfig,
    tau_grid: &[f64],
) -> Result<(f64, f64, f64, f64), LossError> {
    if tau_grid.is_empty() {
        return Err(LossError::EmptyGrid);
    }
    let n = tau_grid.len() as f64;
    let (mut b1, mut b2, mut b3, mut b4) = (0.0, 0.0, 0.0, 0.0);
    for &tau in tau_grid {
        let es = model.interface(tau);
        let (ts0, _) = model.theta(0.0, tau);
        let (ts, tl) = model.theta(es, tau);
        let cl = model.c_l(es, tau);
        // the composed theta at the interface is the liquid branch (tie-break)
        let liquidus = (cfg.t0 - cfg.t_inf) * (cfg.theta_f - tl) / cfg.m_l;
        let r1 = model.c_s() - cfg.k0 * cl;
        let r3 = ts - tl;
        let r4 = cl - liquidus;
        b1 += r1 * r1;
        b2 += ts0 * ts0;
        b3 += r3 * r3;
        b4 += r4 * r4;
    }
    Ok((b1 / n, b2 / n, b3 / n, b4 / n))
}

/// Per-row collocation losses for one τ row: interior residual means (side
/// assignment by the model's current ε*) plus the two interface residuals.
#[derive(Clone, Copy, Debug, Default)]
pub struct RowResiduals {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub n_solid: usize,
    pub n_liquid: usize,
}

impl RowResiduals {
    pub fn c_sum(&self) -> f64 {
        self.c1 + self.c2 + self.c3 + self.c4 + self.c5
    }
}

/// Residual losses for one τ row of the collocation grid.
pub fn collocation_row<M: FieldModel>(
    model: &M,
    cfg: &ProblemConfig,
    eps_grid: &[f64],
    tau: f64,
) -> Result<RowResiduals, LossError> {
    let es = model.interface(tau);
    let mut row = RowResiduals::default();
    for &eps in eps_grid {
        let s = model.sample(eps, tau);
        if eps < es {
            let r = residual_heat_solid(&s)?;
            row.c1 += r * r;
            row.n_solid += 1;
        } else {
            let r2 = residual_heat_liquid(&s)?;
            let r3 = residual_species(&s, cfg)?;
            row.c2 += r2 * r2;
            row.c3 += r3 * r3;
            row.n_liquid += 1;
        }
    }
    if row.n_solid > 0 {
        row.c1 /= row.n_solid as f64;
    }
    if row.n_liquid > 0 {
        row.c2 /= row.n_liquid as f64;
        row.c3 /= row.n_liquid as f64;
    }
    let si = model.sample(es, tau);
    let r4 = residual_stefan(&si, cfg)?;
    let r5 = residual_solute_flux(&si, cfg)?;
    row.c4 = r4 * r4;
    row.c5 = r5 * r5;
    Ok(row)
}

/// Collocation losses over an n_x × n_t grid: per-row means averaged over
/// rows; rows with an empty side contribute zero for that side.
pub fn collocation_losses<M: FieldModel>(
    model: &M,
    cfg: &ProblemConfig,
    eps_grid: &[f64],
    tau_grid: &[f64],
) -> Result<(f64, f64, f64, f64, f64), LossError> {
    if eps_grid.is_empty() || tau_grid.is_empty() {
        return Err(LossError::EmptyGrid);
    }
    let n_t = tau_grid.len() as f64;
    let (mut c1, mut c2, mut c3, mut c4, mut c5) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &tau in tau_grid {
        let row = collocation_row(model, cfg, eps_grid, tau)?;
        c1 += row.c1;
        c2 += row.c2;
        c3 += row.c3;
        c4 += row.c4;
        c5 += row.c5;
    }
    Ok((c1 / n_t, c2 / n_t, c3 / n_t, c4 / n_t, c5 / n_t))
}

/// Full value-path breakdown over explicit grids.
pub fn full_breakdown<M: FieldModel>(
    model: &M,
    cfg: &ProblemConfig,
    data: &MeasurementSet,
    eps_grid: &[f64],
    tau_grid: &[f64],
) -> Result<LossBreakdown, LossError> {
    let (m1, m2, m3) = measurement_losses(model, data)?;
    let (i1, i2, i3) = initial_losses(model, cfg, eps_grid)?;
    let (b1, b2, b3, b4) = boundary_losses(model, cfg, tau_grid)?;
    let (c1, c2, c3, c4, c5) = collocation_losses(model, cfg, eps_grid, tau_grid)?;
    Ok(LossBreakdown { m1, m2, m3, i1, i2, i3, b1, b2, b3, b4, c1, c2, c3, c4, c5 })
}

/// Causal temporal weights: w₁ = 1 and wᵢ = exp(−e·Σ_{k<i} ℓ_k). The weights
/// are constants for gradient purposes; they are computed from detached
/// per-row losses.
pub fn causal_weights(per_time_losses: &[f64], e: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(per_time_losses.len());
    let mut prefix = 0.0;
    for &l in per_time_losses {
        w.push((-e * prefix).exp());
        prefix += l;
    }
    w
}

/// Weighted time-average total: the scaled global (measurement + initial)
/// block plus (1/n_t)·Σ wᵢ·ℓᵢ where ℓᵢ = 256·L_b(τᵢ) + L_c(τᵢ).
pub fn causal_total(scaled_global_block: f64, per_time_losses: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(per_time_losses.len(), weights.len());
    let n_t = per_time_losses.len() as f64;
    let weighted: f64 = per_time_losses.iter().zip(weights).map(|(l, w)| w * l).sum();
    scaled_global_block + weighted / n_t
}

/// Temporal-weighting state for one causal phase.
#[derive(Clone, Debug)]
pub struct CausalState {
    pub e: f64,
    pub tau_grid: Vec<f64>,
    pub w: Vec<f64>,
}

/// Adaptive-weighting state: λ₁ weights the temperature data fit, λ₂ the
/// composition data fit.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveState {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
}

impl Default for AdaptiveState {
    fn default() -> Self {
        AdaptiveState { lambda1: LAMBDA_INIT, lambda2: LAMBDA_INIT, alpha: ADAPTIVE_ALPHA }
    }
}

impl AdaptiveState {
    /// Running-average update; `hat` of `None` (degenerate data-fit gradient)
    /// keeps the previous value.
    pub fn update(&mut self, hat1: Option<f64>, hat2: Option<f64>) {
        if let Some(h) = hat1 {
            self.lambda1 = (1.0 - self.alpha) * self.lambda1 + self.alpha * h;
        }
        if let Some(h) = hat2 {
            self.lambda2 = (1.0 - self.alpha) * self.lambda2 + self.alpha * h;
        }
    }
}

/// Instantaneous adaptive weight: max-abs of the residual gradient over
/// mean-abs of the data-fit gradient, over one network's parameters.
/// Returns `None` when the data-fit gradient is identically zero.
pub fn adaptive_lambda_hat(grad_residual: &[f64], grad_datafit: &[f64]) -> Option<f64> {
    assert_eq!(grad_residual.len(), grad_datafit.len());
    let max_r = grad_residual.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mean_d = grad_datafit.iter().map(|g| g.abs()).sum::<f64>() / grad_datafit.len() as f64;
    if mean_d == 0.0 {
        return None;
    }
    Some(max_r / mean_d)
}
