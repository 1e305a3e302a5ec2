//! Per-epoch loss/gradient engine.
//!
//! One epoch builds a small "base" tape (interface, boundary, initial and
//! measurement passes, which are a few thousand points) plus a sequence of
//! chunked collocation tapes (the bulk of the work). Collocation chunks walk
//! the τ rows in order so causal prefix weights are available before each
//! chunk's backward sweep; chunk tapes are dropped as soon as their gradients
//! are accumulated, which keeps peak memory flat in the grid size.

use ndarray::Array2;
use thiserror::Error;

use crate::analytic::MeasurementSet;
use crate::diffcore::batch::{stream_forward, JetBatch, JetLayout};
use crate::diffcore::tape::{DiffError, Grads, NodeRef, Tape};
use crate::loss::{self, AdaptiveState, LossBreakdown, SCALE_B, SCALE_I13, SCALE_I2, SCALE_M};
use crate::net::ParamSet;
use crate::physics::ProblemConfig;

/// Net indices inside every tape built here.
const NET_THETA: usize = 0;
const NET_C: usize = 1;
const NET_S: usize = 2;
/// Scalar slot for C_s.
const SLOT_CS: usize = 0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("loss evaluation produced a non-finite total")]
    NonFiniteLoss,
}

/// Values reported out of one epoch alongside the gradients.
#[derive(Clone, Debug)]
pub struct EpochStats {
    pub breakdown: LossBreakdown,
    /// The minimized objective: the causal weighted total or the adaptive
    /// Eq.-29 total, depending on the phase.
    pub weighted_total: f64,
    /// Per-row causal losses (empty for adaptive epochs).
    pub row_losses: Vec<f64>,
}

/// Gradients and statistics from a causal epoch.
pub struct CausalEpochOut {
    pub stats: EpochStats,
    pub grads: Grads,
}

/// Components from an adaptive epoch; the trainer updates λ and assembles
/// the total gradient as g_others + λ₁·25.6·g_m1 + λ₂·25.6·g_m2.
pub struct AdaptiveEpochOut {
    pub stats_without_total: EpochStats,
    pub g_others: Grads,
    pub g_m1: Grads,
    pub g_m2: Grads,
    pub lambda_hat1: Option<f64>,
    pub lambda_hat2: Option<f64>,
}

/// Shared, immutable-for-the-epoch inputs.
pub struct Engine<'a> {
    pub cfg: &'a ProblemConfig,
    pub data: &'a MeasurementSet,
}

/// Node handles and cached values of the base tape.
struct Base {
    m1: NodeRef,
    m2: NodeRef,
    m3: NodeRef,
    i1: NodeRef,
    i2: NodeRef,
    i3: NodeRef,
    /// Residual rows over the constraint τ grid (not yet squared).
    rb: [NodeRef; 4],
    rc4: NodeRef,
    rc5: NodeRef,
    /// Current interface positions on the constraint grid.
    eps_star: Vec<f64>,
    /// Per-row squared residuals.
    b_rows: [Vec<f64>; 4],
    c4_rows: Vec<f64>,
    c5_rows: Vec<f64>,
}

impl<'a> Engine<'a> {
    /// Uniform constraint grid on (0, tau_max]: the τ = 0 row is covered by
    /// the initial-condition terms, and the closed-form comparison fields
    /// are singular there.
    pub fn tau_grid(&self, n_t: usize) -> Vec<f64> {
        (1..=n_t).map(|i| self.cfg.tau_max * i as f64 / n_t as f64).collect()
    }

    fn tape_for<'p>(&self, params: &'p ParamSet) -> Tape<'p> {
        Tape::new(
            vec![&params.theta.net, &params.cnet.net, &params.snet.net],
            vec![params.c_s.value],
        )
    }

    /// Build every non-collocation pass and its loss nodes on `tape`.
    fn build_base(
        &self,
        tape: &mut Tape,
        tau_grid: &[f64],
        eps_init: &[f64],
    ) -> Result<Base, EngineError> {
        let cfg = self.cfg;
        let n_t = tau_grid.len();
        let p = self.data.len();

        // interface network over the constraint grid, with d/dtau
        let ones = vec![1.0; n_t];
        let s_in = tape.constant(JetBatch::from_comps(
            JetLayout::FIRST,
            vec![row_mat(tau_grid), row_mat(&ones)],
        ))?;
        let s_out = tape.mlp(NET_S, s_in)?;
        let es_v = tape.extract(s_out, 0, 0)?;
        let es_dt = tape.extract(s_out, 0, 1)?;
        let eps_star: Vec<f64> = tape.value(es_v).comps[0].row(0).to_vec();

        // theta and composition at the moving interface, with d/deps; the
        // eps row is the interface network's output, so gradients chain back
        // into it
        let es_seeded = tape.with_seeds(es_v, JetLayout::FIRST, &[1.0])?;
        let zeros_t = vec![0.0; n_t];
        let tau_const = tape.constant(JetBatch::from_comps(
            JetLayout::FIRST,
            vec![row_mat(tau_grid), row_mat(&zeros_t)],
        ))?;
        let if_in = tape.stack(&[es_seeded, tau_const])?;
        let th_if = tape.mlp(NET_THETA, if_in)?;
        let c_if = tape.mlp(NET_C, if_in)?;
        let ts_if = tape.extract(th_if, 0, 0)?;
        let tl_if = tape.extract(th_if, 1, 0)?;
        let dts_if = tape.extract(th_if, 0, 1)?;
        let dtl_if = tape.extract(th_if, 1, 1)?;
        let cl_if = tape.extract(c_if, 0, 0)?;
        let dcl_if = tape.extract(c_if, 0, 1)?;

        // cold boundary theta_s(0, tau)
        let b_in = tape.constant(JetBatch::from_comps(
            JetLayout::VALUE,
            vec![two_row_mat(&zeros_t, tau_grid)],
        ))?;
        let th_b = tape.mlp(NET_THETA, b_in)?;
        let ts0 = tape.extract(th_b, 0, 0)?;

        // initial conditions at tau = 0 on the fresh eps set
        let zeros_x = vec![0.0; eps_init.len()];
        let init_in = tape.constant(JetBatch::from_comps(
            JetLayout::VALUE,
            vec![two_row_mat(eps_init, &zeros_x)],
        ))?;
        let th_init = tape.mlp(NET_THETA, init_in)?;
        let tl_init = tape.extract(th_init, 1, 0)?;
        let c_init = tape.mlp(NET_C, init_in)?;
        let cl_init = tape.extract(c_init, 0, 0)?;
        let s0_in = tape.constant(JetBatch::from_comps(JetLayout::VALUE, vec![row_mat(&[0.0])]))?;
        let s0 = tape.mlp(NET_S, s0_in)?;
        let s0v = tape.extract(s0, 0, 0)?;

        // measurement passes
        let meas_eps: Vec<f64> = self.data.points.iter().map(|q| q.eps).collect();
        let meas_tau: Vec<f64> = self.data.points.iter().map(|q| q.tau).collect();
        let m_in = tape.constant(JetBatch::from_comps(
            JetLayout::VALUE,
            vec![two_row_mat(&meas_eps, &meas_tau)],
        ))?;
        let th_m = tape.mlp(NET_THETA, m_in)?;
        let ts_m = tape.extract(th_m, 0, 0)?;
        let tl_m = tape.extract(th_m, 1, 0)?;
        let c_m = tape.mlp(NET_C, m_in)?;
        let cl_m = tape.extract(c_m, 0, 0)?;
        let sm_in = tape.constant(JetBatch::from_comps(JetLayout::VALUE, vec![row_mat(&meas_tau)]))?;
        let s_m = tape.mlp(NET_S, sm_in)?;
        let es_m = tape.extract(s_m, 0, 0)?;

        // composed fields pick a branch by the current predicted interface;
        // the indicator is constant for gradients
        let es_m_vals = tape.value(es_m).comps[0].row(0).to_vec();
        let solid_mask: Vec<bool> =
            meas_eps.iter().zip(&es_m_vals).map(|(&e, &s)| e < s).collect();
        let cs_p = tape.broadcast_scalar(SLOT_CS, p)?;
        let theta_sel = tape.select(ts_m, tl_m, solid_mask.clone())?;
        let c_sel = tape.select(cs_p, cl_m, solid_mask)?;

        let lab_theta = tape.const_row(&self.data.points.iter().map(|q| q.theta).collect::<Vec<_>>())?;
        let lab_c = tape.const_row(&self.data.points.iter().map(|q| q.c).collect::<Vec<_>>())?;
        let lab_es = tape.const_row(&self.data.points.iter().map(|q| q.eps_star).collect::<Vec<_>>())?;
        let inv_p = vec![1.0 / p as f64; p];
        let d_m1 = tape.lin(&[(theta_sel, 1.0), (lab_theta, -1.0)], 0.0)?;
        let m1 = tape.sum_sq(d_m1, inv_p.clone())?;
        let d_m2 = tape.lin(&[(c_sel, 1.0), (lab_c, -1.0)], 0.0)?;
        let m2 = tape.sum_sq(d_m2, inv_p.clone())?;
        let d_m3 = tape.lin(&[(es_m, 1.0), (lab_es, -1.0)], 0.0)?;
        let m3 = tape.sum_sq(d_m3, inv_p)?;

        let inv_x = vec![1.0 / eps_init.len() as f64; eps_init.len()];
        let d_i1 = tape.lin(&[(tl_init, 1.0)], -1.0)?;
        let i1 = tape.sum_sq(d_i1, inv_x.clone())?;
        let d_i3 = tape.lin(&[(cl_init, 1.0)], -cfg.c0)?;
        let i3 = tape.sum_sq(d_i3, inv_x)?;
        let i2 = tape.sum_sq(s0v, vec![1.0])?;

        // constraint residual rows
        let cs_t = tape.broadcast_scalar(SLOT_CS, n_t)?;
        let rb1 = tape.lin(&[(cs_t, 1.0), (cl_if, -cfg.k0)], 0.0)?;
        let rb2 = ts0;
        let rb3 = tape.lin(&[(ts_if, 1.0), (tl_if, -1.0)], 0.0)?;
        // liquidus: C_l - (T0-Tinf)(theta_f - theta_l)/m_l, liquid branch at
        // the interface by the tie-break
        let coef = (cfg.t0 - cfg.t_inf) / cfg.m_l;
        let rb4 = tape.lin(&[(cl_if, 1.0), (tl_if, coef)], -coef * cfg.theta_f)?;
        let rc4 = tape.lin(&[(es_dt, 1.0 / cfg.ste), (dts_if, -1.0), (dtl_if, 1.0)], 0.0)?;
        let cl_dedt = tape.mul(cl_if, es_dt)?;
        let rc5 = tape.lin(&[(dcl_if, 1.0 / cfg.le), (cl_dedt, 1.0 - cfg.k0)], 0.0)?;

        let sq = |t: &Tape, n: NodeRef| -> Vec<f64> {
            t.value(n).comps[0].row(0).iter().map(|r| r * r).collect()
        };
        let b_rows = [sq(tape, rb1), sq(tape, rb2), sq(tape, rb3), sq(tape, rb4)];
        let c4_rows = sq(tape, rc4);
        let c5_rows = sq(tape, rc5);

        Ok(Base {
            m1,
            m2,
            m3,
            i1,
            i2,
            i3,
            rb: [rb1, rb2, rb3, rb4],
            rc4,
            rc5,
            eps_star,
            b_rows,
            c4_rows,
            c5_rows,
        })
    }

    fn base_means(&self, base: &Base, tape: &Tape) -> (f64, f64, f64, f64, f64, f64) {
        let n_t = base.c4_rows.len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n_t;
        let _ = tape;
        (
            mean(&base.b_rows[0]),
            mean(&base.b_rows[1]),
            mean(&base.b_rows[2]),
            mean(&base.b_rows[3]),
            mean(&base.c4_rows),
            mean(&base.c5_rows),
        )
    }

    /// One causal epoch: fresh ε points crossed with the fixed τ grid,
    /// per-row temporal weights from detached prefix losses, one combined
    /// backward pass. Returns the full gradient over all four targets.
    pub fn causal_epoch(
        &self,
        params: &ParamSet,
        tau_grid: &[f64],
        eps_points: &[f64],
        e: f64,
    ) -> Result<CausalEpochOut, EngineError> {
        let n_t = tau_grid.len();
        let n_x = eps_points.len();
        let mut tape = self.tape_for(params);
        let base = self.build_base(&mut tape, tau_grid, eps_points)?;

        // per-row constraint part of the temporal loss
        let row_bc: Vec<f64> = (0..n_t)
            .map(|i| {
                SCALE_B
                    * (base.b_rows[0][i] + base.b_rows[1][i] + base.b_rows[2][i]
                        + base.b_rows[3][i])
                    + base.c4_rows[i]
                    + base.c5_rows[i]
            })
            .collect();

        // walk τ rows in chunks, accumulating causal weights as rows complete
        let rows_per_chunk = (2048 / n_x.max(1)).max(1);
        let mut grads: Option<Grads> = None;
        let mut row_losses = vec![0.0; n_t];
        let mut weights = vec![0.0; n_t];
        let mut prefix = 0.0;
        let (mut c1_sum, mut c2_sum, mut c3_sum) = (0.0, 0.0, 0.0);

        let mut r0 = 0;
        while r0 < n_t {
            let r1 = (r0 + rows_per_chunk).min(n_t);
            let rows = r0..r1;
            let m = rows.len() * n_x;

            let mut chunk_tape = self.tape_for(params);
            let mut v = Array2::zeros((2, m));
            for (k, i) in rows.clone().enumerate() {
                rows_fill(&mut v, k * n_x, eps_points, tau_grid[i]);
            }
            let mut d_eps = Array2::zeros((2, m));
            d_eps.row_mut(0).fill(1.0);
            let mut d_tau = Array2::zeros((2, m));
            d_tau.row_mut(1).fill(1.0);
            let cin = chunk_tape.constant(JetBatch::from_comps(
                JetLayout::COLLOCATION,
                vec![v, d_eps, Array2::zeros((2, m)), d_tau],
            ))?;
            let th = chunk_tape.mlp(NET_THETA, cin)?;
            let cl = chunk_tape.mlp(NET_C, cin)?;
            let (rn1, rn2, rn3) = residual_rows(&mut chunk_tape, th, cl, self.cfg)?;

            let r1v = chunk_tape.value(rn1).comps[0].row(0).to_vec();
            let r2v = chunk_tape.value(rn2).comps[0].row(0).to_vec();
            let r3v = chunk_tape.value(rn3).comps[0].row(0).to_vec();

            let mut w1 = vec![0.0; m];
            let mut w2 = vec![0.0; m];
            let mut w3 = vec![0.0; m];
            for (k, i) in rows.clone().enumerate() {
                let es = base.eps_star[i];
                let off = k * n_x;
                let n_solid = eps_points.iter().filter(|&&x| x < es).count();
                let n_liquid = n_x - n_solid;
                let (mut c1r, mut c2r, mut c3r) = (0.0, 0.0, 0.0);
                for (j, &x) in eps_points.iter().enumerate() {
                    let idx = off + j;
                    if x < es {
                        c1r += r1v[idx] * r1v[idx];
                    } else {
                        c2r += r2v[idx] * r2v[idx];
                        c3r += r3v[idx] * r3v[idx];
                    }
                }
                if n_solid > 0 {
                    c1r /= n_solid as f64;
                }
                if n_liquid > 0 {
                    c2r /= n_liquid as f64;
                    c3r /= n_liquid as f64;
                }
                c1_sum += c1r;
                c2_sum += c2r;
                c3_sum += c3r;
                let loss_i = row_bc[i] + c1r + c2r + c3r;
                row_losses[i] = loss_i;
                let w = (-e * prefix).exp();
                weights[i] = w;
                prefix += loss_i;
                // per-point head weights realize w_i/(n_t·n_side)
                for (j, &x) in eps_points.iter().enumerate() {
                    let idx = off + j;
                    if x < es {
                        if n_solid > 0 {
                            w1[idx] = w / (n_t as f64 * n_solid as f64);
                        }
                    } else if n_liquid > 0 {
                        w2[idx] = w / (n_t as f64 * n_liquid as f64);
                        w3[idx] = w / (n_t as f64 * n_liquid as f64);
                    }
                }
            }

            let h1 = chunk_tape.sum_sq(rn1, w1)?;
            let h2 = chunk_tape.sum_sq(rn2, w2)?;
            let h3 = chunk_tape.sum_sq(rn3, w3)?;
            let head = chunk_tape.combine(&[(h1, 1.0), (h2, 1.0), (h3, 1.0)])?;
            let g = chunk_tape.grad(head)?;
            match &mut grads {
                Some(acc) => acc.axpy(1.0, &g),
                None => grads = Some(g),
            }
            r0 = r1;
        }

        // base-tape heads with the now-known row weights
        let mut tape = tape;
        let wb: Vec<f64> = weights.iter().map(|w| w * SCALE_B / n_t as f64).collect();
        let wc: Vec<f64> = weights.iter().map(|w| w / n_t as f64).collect();
        let mut terms = vec![
            (base.m1, SCALE_M),
            (base.m2, SCALE_M),
            (base.m3, SCALE_M),
            (base.i2, SCALE_I2),
            (base.i1, SCALE_I13),
            (base.i3, SCALE_I13),
        ];
        for rb in base.rb {
            let h = tape.sum_sq(rb, wb.clone())?;
            terms.push((h, 1.0));
        }
        let h4 = tape.sum_sq(base.rc4, wc.clone())?;
        let h5 = tape.sum_sq(base.rc5, wc)?;
        terms.push((h4, 1.0));
        terms.push((h5, 1.0));
        let base_total = tape.combine(&terms)?;
        let g_base = tape.grad(base_total)?;
        let mut grads = grads.expect("at least one collocation chunk");
        grads.axpy(1.0, &g_base);

        let sc = |n: NodeRef| tape.scalar(n);
        let (b1, b2, b3, b4, c4, c5) = self.base_means(&base, &tape);
        let breakdown = LossBreakdown {
            m1: sc(base.m1),
            m2: sc(base.m2),
            m3: sc(base.m3),
            i1: sc(base.i1),
            i2: sc(base.i2),
            i3: sc(base.i3),
            b1,
            b2,
            b3,
            b4,
            c1: c1_sum / n_t as f64,
            c2: c2_sum / n_t as f64,
            c3: c3_sum / n_t as f64,
            c4,
            c5,
        };
        let global_block = SCALE_M * (breakdown.m1 + breakdown.m2 + breakdown.m3)
            + SCALE_I2 * breakdown.i2
            + SCALE_I13 * (breakdown.i1 + breakdown.i3);
        let weighted_total = loss::causal_total(global_block, &row_losses, &weights);
        if !weighted_total.is_finite() {
            return Err(EngineError::NonFiniteLoss);
        }

        Ok(CausalEpochOut {
            stats: EpochStats { breakdown, weighted_total, row_losses },
            grads,
        })
    }

    /// One adaptive epoch over a random collocation batch. Returns gradient
    /// components; λ̂ statistics are computed on the current gradients.
    pub fn adaptive_epoch(
        &self,
        params: &ParamSet,
        tau_grid: &[f64],
        eps_init: &[f64],
        colloc: &[(f64, f64)],
    ) -> Result<AdaptiveEpochOut, EngineError> {
        let n_t = tau_grid.len();
        let mut tape = self.tape_for(params);
        let base = self.build_base(&mut tape, tau_grid, eps_init)?;

        // side assignment from the current interface, evaluated off-tape
        // (the split carries no gradient)
        let taus: Vec<f64> = colloc.iter().map(|&(_, t)| t).collect();
        let s_in = JetBatch::from_comps(JetLayout::VALUE, vec![row_mat(&taus)]);
        let es_at = stream_forward(&params.snet.net, &s_in);
        let solid: Vec<bool> =
            colloc.iter().zip(es_at.comps[0].row(0)).map(|(&(x, _), &s)| x < s).collect();
        let n_solid = solid.iter().filter(|&&b| b).count();
        let n_liquid = colloc.len() - n_solid;

        let chunk_size = 2048usize;
        let mut g_c12: Option<Grads> = None;
        let mut g_c3: Option<Grads> = None;
        let (mut c1_sum, mut c2_sum, mut c3_sum) = (0.0, 0.0, 0.0);

        let mut at = 0;
        while at < colloc.len() {
            let end = (at + chunk_size).min(colloc.len());
            let pts = &colloc[at..end];
            let m = pts.len();
            let mut chunk_tape = self.tape_for(params);
            let mut v = Array2::zeros((2, m));
            for (k, &(x, t)) in pts.iter().enumerate() {
                v[[0, k]] = x;
                v[[1, k]] = t;
            }
            let mut d_eps = Array2::zeros((2, m));
            d_eps.row_mut(0).fill(1.0);
            let mut d_tau = Array2::zeros((2, m));
            d_tau.row_mut(1).fill(1.0);
            let cin = chunk_tape.constant(JetBatch::from_comps(
                JetLayout::COLLOCATION,
                vec![v, d_eps, Array2::zeros((2, m)), d_tau],
            ))?;
            let th = chunk_tape.mlp(NET_THETA, cin)?;
            let cl = chunk_tape.mlp(NET_C, cin)?;
            let (rn1, rn2, rn3) = residual_rows(&mut chunk_tape, th, cl, self.cfg)?;

            let mut w1 = vec![0.0; m];
            let mut w23 = vec![0.0; m];
            for k in 0..m {
                if solid[at + k] {
                    if n_solid > 0 {
                        w1[k] = 1.0 / n_solid as f64;
                    }
                } else if n_liquid > 0 {
                    w23[k] = 1.0 / n_liquid as f64;
                }
            }
            let h1 = chunk_tape.sum_sq(rn1, w1)?;
            let h2 = chunk_tape.sum_sq(rn2, w23.clone())?;
            let h3 = chunk_tape.sum_sq(rn3, w23)?;
            c1_sum += chunk_tape.scalar(h1);
            c2_sum += chunk_tape.scalar(h2);
            c3_sum += chunk_tape.scalar(h3);
            let h12 = chunk_tape.combine(&[(h1, 1.0), (h2, 1.0)])?;
            let g12 = chunk_tape.grad(h12)?;
            let g3 = chunk_tape.grad(h3)?;
            match &mut g_c12 {
                Some(acc) => acc.axpy(1.0, &g12),
                None => g_c12 = Some(g12),
            }
            match &mut g_c3 {
                Some(acc) => acc.axpy(1.0, &g3),
                None => g_c3 = Some(g3),
            }
            at = end;
        }
        let g_c12 = g_c12.expect("nonempty collocation batch");
        let g_c3 = g_c3.expect("nonempty collocation batch");

        // base heads: plain means over the constraint grid
        let mut tape = tape;
        let mean_w = vec![1.0 / n_t as f64; n_t];
        let hb: Vec<NodeRef> = {
            let mut v = Vec::with_capacity(4);
            for rb in base.rb {
                v.push(tape.sum_sq(rb, mean_w.clone())?);
            }
            v
        };
        let hc4 = tape.sum_sq(base.rc4, mean_w.clone())?;
        let hc5 = tape.sum_sq(base.rc5, mean_w)?;
        let others_terms = vec![
            (base.m3, SCALE_M),
            (base.i2, SCALE_I2),
            (base.i1, SCALE_I13),
            (base.i3, SCALE_I13),
            (hb[0], SCALE_B),
            (hb[1], SCALE_B),
            (hb[2], SCALE_B),
            (hb[3], SCALE_B),
            (hc4, 1.0),
            (hc5, 1.0),
        ];
        let others_node = tape.combine(&others_terms)?;
        let g_others_base = tape.grad(others_node)?;
        let g_m1 = tape.grad(base.m1)?;
        let g_m2 = tape.grad(base.m2)?;
        let g_b1 = tape.grad(hb[0])?;

        // λ̂ statistics per Eq. 30: residual vs data-fit gradients over the
        // owning network's parameters
        let theta_res = g_c12.flatten_net(NET_THETA);
        let theta_data: Vec<f64> =
            g_m1.flatten_net(NET_THETA).iter().map(|g| g * SCALE_M).collect();
        let lambda_hat1 = loss::adaptive_lambda_hat(&theta_res, &theta_data);
        let c_res: Vec<f64> = {
            let a = g_b1.flatten_net(NET_C);
            let b = g_c3.flatten_net(NET_C);
            a.iter().zip(&b).map(|(x, y)| SCALE_B * x + y).collect()
        };
        let c_data: Vec<f64> = g_m2.flatten_net(NET_C).iter().map(|g| g * SCALE_M).collect();
        let lambda_hat2 = loss::adaptive_lambda_hat(&c_res, &c_data);

        let mut g_others = g_others_base;
        g_others.axpy(1.0, &g_c12);
        g_others.axpy(1.0, &g_c3);

        let sc = |n: NodeRef| tape.scalar(n);
        let (b1, b2, b3, b4, c4, c5) = self.base_means(&base, &tape);
        let breakdown = LossBreakdown {
            m1: sc(base.m1),
            m2: sc(base.m2),
            m3: sc(base.m3),
            i1: sc(base.i1),
            i2: sc(base.i2),
            i3: sc(base.i3),
            b1,
            b2,
            b3,
            b4,
            c1: c1_sum,
            c2: c2_sum,
            c3: c3_sum,
            c4,
            c5,
        };

        Ok(AdaptiveEpochOut {
            stats_without_total: EpochStats {
                breakdown,
                weighted_total: f64::NAN, // assembled by the trainer once λ is updated
                row_losses: Vec::new(),
            },
            g_others,
            g_m1,
            g_m2,
            lambda_hat1,
            lambda_hat2,
        })
    }

    /// Assemble the adaptive total gradient for the current λ values.
    pub fn adaptive_total_grads(out: &AdaptiveEpochOut, lam: &AdaptiveState) -> Grads {
        let mut g = out.g_others.clone();
        g.axpy(lam.lambda1 * SCALE_M, &out.g_m1);
        g.axpy(lam.lambda2 * SCALE_M, &out.g_m2);
        g
    }
}

/// Interior residual rows from the two collocation passes:
/// r1 = ∂θ_s/∂τ − ∂²θ_s/∂ε², r2 likewise for θ_l,
/// r3 = ∂C_l/∂τ − (1/Le)·∂²C_l/∂ε².
fn residual_rows(
    tape: &mut Tape,
    th: NodeRef,
    cl: NodeRef,
    cfg: &ProblemConfig,
) -> Result<(NodeRef, NodeRef, NodeRef), DiffError> {
    let l = JetLayout::COLLOCATION;
    let (d2, dt) = (l.d2_idx(0).unwrap(), l.d1_idx(1));
    let ts_dt = tape.extract(th, 0, dt)?;
    let ts_d2 = tape.extract(th, 0, d2)?;
    let tl_dt = tape.extract(th, 1, dt)?;
    let tl_d2 = tape.extract(th, 1, d2)?;
    let cl_dt = tape.extract(cl, 0, dt)?;
    let cl_d2 = tape.extract(cl, 0, d2)?;
    let r1 = tape.lin(&[(ts_dt, 1.0), (ts_d2, -1.0)], 0.0)?;
    let r2 = tape.lin(&[(tl_dt, 1.0), (tl_d2, -1.0)], 0.0)?;
    let r3 = tape.lin(&[(cl_dt, 1.0), (cl_d2, -1.0 / cfg.le)], 0.0)?;
    Ok((r1, r2, r3))
}

fn row_mat(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap()
}

fn two_row_mat(top: &[f64], bottom: &[f64]) -> Array2<f64> {
    assert_eq!(top.len(), bottom.len());
    let mut m = Array2::zeros((2, top.len()));
    for (j, (&a, &b)) in top.iter().zip(bottom).enumerate() {
        m[[0, j]] = a;
        m[[1, j]] = b;
    }
    m
}

/// Fill columns [off, off + eps.len()) of a 2×m value matrix with (eps_j, tau).
fn rows_fill(v: &mut Array2<f64>, off: usize, eps: &[f64], tau: f64) {
    for (j, &x) in eps.iter().enumerate() {
        v[[0, off + j]] = x;
        v[[1, off + j]] = tau;
    }
}
