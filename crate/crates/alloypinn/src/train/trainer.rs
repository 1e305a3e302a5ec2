//! The end-to-end training driver: phase sequencing, freezing, best-epoch
//! restores, early stopping for the solid-composition scalar, and recovery
//! from non-finite epochs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analytic::{sample_measurements, solve_phi, AnalyticError, AnalyticalSolution, MeasurementSet};
use crate::loss::AdaptiveState;
use crate::net::ParamSet;
use crate::optim::{BestTracker, Optimizer, StepOutcome, Target};
use crate::physics::ProblemConfig;

use super::engine::Engine;
use super::runlog::{RunLog, RunRecord};
use super::schedule::{CollocationSpec, CsStopRule, PhaseKind, PhaseSpec, TrainingSchedule};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("training aborted: {0} consecutive non-finite epochs")]
    Aborted(usize),
}

/// How many failed epochs in a row before giving up on a run.
const MAX_CONSECUTIVE_FAILURES: usize = 5;

/// Everything that mutates while a run progresses.
pub struct TrainState {
    pub params: ParamSet,
    pub opt: Optimizer,
    pub tracker: BestTracker,
    pub lambda: AdaptiveState,
    pub log: RunLog,
    pub rng: ChaCha8Rng,
    pub global_epoch: usize,
    last_good: ParamSet,
    consecutive_failures: usize,
    cs_drift_run: usize,
    cs_prev: f64,
}

pub struct TrainOutcome {
    pub params: ParamSet,
    pub log: RunLog,
    pub sol: AnalyticalSolution,
    pub data: MeasurementSet,
    pub rng_state: crate::net::RngState,
}

pub struct Trainer<'a> {
    pub cfg: &'a ProblemConfig,
    pub schedule: &'a TrainingSchedule,
    pub hidden: Vec<usize>,
    /// Measurement counts: (domain, interface, initial).
    pub sampling: (usize, usize, usize),
    pub seed: u64,
}

/// Convenience wrapper: solve, sample, train the full schedule.
pub fn train_full(
    cfg: &ProblemConfig,
    schedule: &TrainingSchedule,
    hidden: &[usize],
    sampling: (usize, usize, usize),
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    Trainer { cfg, schedule, hidden: hidden.to_vec(), sampling, seed }.run()
}

impl<'a> Trainer<'a> {
    /// Execute every phase in order: restore the phase-local best at each
    /// boundary, honor the freeze markers, stop early once the best error
    /// drops below the configured threshold.
    pub fn run(&self) -> Result<TrainOutcome, TrainError> {
        let sol = solve_phi(self.cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let data =
            sample_measurements(&sol, &mut rng, self.sampling.0, self.sampling.1, self.sampling.2);
        let params = ParamSet::init(&self.hidden, &mut rng);

        let first_lr = self.schedule.phases.first().map(|p| p.lr).unwrap_or(1e-3);
        let opt = Optimizer::new(&params, first_lr);
        let mut st = TrainState {
            last_good: params.clone(),
            params,
            opt,
            tracker: BestTracker::default(),
            lambda: AdaptiveState::default(),
            log: RunLog { seed: self.seed, ..Default::default() },
            rng,
            global_epoch: 0,
            consecutive_failures: 0,
            cs_drift_run: 0,
            cs_prev: 0.2,
        };

        let engine = Engine { cfg: self.cfg, data: &data };
        for (phase_idx, phase) in self.schedule.phases.iter().enumerate() {
            if phase.freeze_interface_first && !st.params.snet_frozen {
                st.opt.freeze(Target::SNet);
                st.params.snet_frozen = true;
                st.log.event(st.global_epoch, "interface network frozen");
            }
            st.opt.set_lr(phase.lr);
            st.tracker.reset();
            match phase.kind {
                PhaseKind::Causal => {
                    self.run_causal_phase(&engine, &sol, &mut st, phase, phase_idx)?
                }
                PhaseKind::Adaptive => {
                    self.run_adaptive_phase(&engine, &sol, &mut st, phase, phase_idx)?
                }
            }
            if let Some(epoch) = st.tracker.restore_into(&mut st.params) {
                st.log.event(
                    st.global_epoch,
                    format!("phase {phase_idx}: restored best epoch {epoch}"),
                );
                st.last_good = st.params.clone();
            }
            if let Some(best) = st.tracker.best() {
                if best.error < self.schedule.stop_error {
                    st.log.event(
                        st.global_epoch,
                        format!("stopping: best error {} below threshold", best.error),
                    );
                    break;
                }
            }
        }

        let mut rng_state = crate::net::RngState::default();
        rng_state.seed = st.rng.get_seed();
        rng_state.word_pos = st.rng.get_word_pos();
        Ok(TrainOutcome { params: st.params, log: st.log, sol, data, rng_state })
    }

    /// Causal phase: fresh ε set each epoch over the fixed τ grid, causal
    /// weighting with the phase's e-ladder, C_s early stop, Adam on all
    /// unfrozen targets.
    pub fn run_causal_phase(
        &self,
        engine: &Engine,
        sol: &AnalyticalSolution,
        st: &mut TrainState,
        phase: &PhaseSpec,
        phase_idx: usize,
    ) -> Result<(), TrainError> {
        let (n_x, n_t) = match phase.collocation {
            CollocationSpec::Grid { n_x, n_t } => (n_x, n_t),
            CollocationSpec::Random { count } => (count / self.schedule.n_t_constraint, self.schedule.n_t_constraint),
        };
        let tau_grid = engine.tau_grid(n_t);
        for k in 0..phase.epochs {
            let clock = std::time::Instant::now();
            st.global_epoch += 1;
            let epoch = st.global_epoch;
            let e = ladder_value(&phase.e_values, k, phase.epochs);
            let eps_points: Vec<f64> = (0..n_x).map(|_| st.rng.gen::<f64>()).collect();

            let out = match engine.causal_epoch(&st.params, &tau_grid, &eps_points, e) {
                Ok(o) => o,
                Err(err) => {
                    self.recover(st, epoch, &err.to_string())?;
                    continue;
                }
            };
            let error = out.stats.breakdown.total_eq20();
            if !error.is_finite() {
                self.recover(st, epoch, "non-finite total error")?;
                continue;
            }
            st.consecutive_failures = 0;
            let best = st.tracker.observe(epoch, error, &st.params);

            // C_s stopping test sits between the gradient computation and the
            // update, so a triggering epoch no longer moves the scalar
            self.check_cs_stop(sol, st, epoch);

            let g_theta = out.grads.flatten_net(0);
            let g_c = out.grads.flatten_net(1);
            let g_s = out.grads.flatten_net(2);
            let applied =
                st.opt.step(&mut st.params, &g_theta, &g_c, &g_s, out.grads.scalars[0]);
            if applied == StepOutcome::SkippedNonFinite {
                st.log.event(epoch, "adam step skipped: non-finite gradient");
            } else {
                st.last_good = st.params.clone();
            }

            st.log.push(RunRecord {
                epoch,
                phase: phase_idx,
                kind: PhaseKind::Causal,
                e: Some(e),
                lambda1: None,
                lambda2: None,
                breakdown: out.stats.breakdown,
                total_eq20: error,
                total_weighted: out.stats.weighted_total,
                c_s: st.params.c_s.value,
                best,
                wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            });
        }
        Ok(())
    }

    /// Adaptive phase: random collocation batch, λ updates from gradient
    /// statistics, Adam on the unfrozen networks. λ restarts at 1000 each
    /// phase.
    pub fn run_adaptive_phase(
        &self,
        engine: &Engine,
        sol: &AnalyticalSolution,
        st: &mut TrainState,
        phase: &PhaseSpec,
        phase_idx: usize,
    ) -> Result<(), TrainError> {
        let _ = sol;
        let count = match phase.collocation {
            CollocationSpec::Random { count } => count,
            CollocationSpec::Grid { n_x, n_t } => n_x * n_t,
        };
        let tau_grid = engine.tau_grid(self.schedule.n_t_constraint);
        st.lambda = AdaptiveState::default();
        for _ in 0..phase.epochs {
            let clock = std::time::Instant::now();
            st.global_epoch += 1;
            let epoch = st.global_epoch;
            let eps_init: Vec<f64> =
                (0..self.schedule.n_x_initial).map(|_| st.rng.gen::<f64>()).collect();
            let colloc: Vec<(f64, f64)> = (0..count)
                .map(|_| (st.rng.gen::<f64>(), st.rng.gen::<f64>() * self.cfg.tau_max))
                .collect();

            let out = match engine.adaptive_epoch(&st.params, &tau_grid, &eps_init, &colloc) {
                Ok(o) => o,
                Err(err) => {
                    self.recover(st, epoch, &err.to_string())?;
                    continue;
                }
            };
            let error = out.stats_without_total.breakdown.total_eq20();
            if !error.is_finite() {
                self.recover(st, epoch, "non-finite total error")?;
                continue;
            }
            st.consecutive_failures = 0;
            let best = st.tracker.observe(epoch, error, &st.params);

            if out.lambda_hat1.is_none() || out.lambda_hat2.is_none() {
                st.log.event(epoch, "degenerate data-fit gradient; lambda kept");
            }
            st.lambda.update(out.lambda_hat1, out.lambda_hat2);
            let grads = Engine::adaptive_total_grads(&out, &st.lambda);

            let g_theta = grads.flatten_net(0);
            let g_c = grads.flatten_net(1);
            let g_s = grads.flatten_net(2);
            let applied = st.opt.step(&mut st.params, &g_theta, &g_c, &g_s, grads.scalars[0]);
            if applied == StepOutcome::SkippedNonFinite {
                st.log.event(epoch, "adam step skipped: non-finite gradient");
            } else {
                st.last_good = st.params.clone();
            }

            let weighted = out
                .stats_without_total
                .breakdown
                .total_adaptive_eq29(st.lambda.lambda1, st.lambda.lambda2);
            st.log.push(RunRecord {
                epoch,
                phase: phase_idx,
                kind: PhaseKind::Adaptive,
                e: None,
                lambda1: Some(st.lambda.lambda1),
                lambda2: Some(st.lambda.lambda2),
                breakdown: out.stats_without_total.breakdown,
                total_eq20: error,
                total_weighted: weighted,
                c_s: st.params.c_s.value,
                best,
                wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            });
        }
        Ok(())
    }

    /// The solid-composition early stop: oracle band by default, drift-based
    /// fallback when no reference value is trusted.
    fn check_cs_stop(&self, sol: &AnalyticalSolution, st: &mut TrainState, epoch: usize) {
        if st.params.c_s.frozen {
            return;
        }
        let trigger = match self.schedule.cs_stop {
            CsStopRule::Oracle => {
                (st.params.c_s.value - sol.c_s_star).abs() <= CsStopRule::ORACLE_BAND
            }
            CsStopRule::Drift => {
                if (st.params.c_s.value - st.cs_prev).abs() < CsStopRule::DRIFT_BAND {
                    st.cs_drift_run += 1;
                } else {
                    st.cs_drift_run = 0;
                }
                st.cs_prev = st.params.c_s.value;
                st.cs_drift_run >= CsStopRule::DRIFT_EPOCHS
            }
        };
        if trigger {
            st.opt.freeze(Target::Cs);
            st.params.c_s.frozen = true;
            st.log.event(
                epoch,
                format!(
                    "C_s frozen at {} (|C_s - C_s_anal| = {:.3e})",
                    st.params.c_s.value,
                    (st.params.c_s.value - sol.c_s_star).abs()
                ),
            );
        }
    }

    /// Non-finite epoch: roll back to the last good parameters and keep
    /// going, aborting only after several consecutive failures.
    fn recover(&self, st: &mut TrainState, epoch: usize, why: &str) -> Result<(), TrainError> {
        st.consecutive_failures += 1;
        st.log.event(epoch, format!("epoch aborted ({why}); rolled back"));
        st.params = st.last_good.clone();
        if st.consecutive_failures >= MAX_CONSECUTIVE_FAILURES {
            return Err(TrainError::Aborted(st.consecutive_failures));
        }
        Ok(())
    }
}

/// The e-ladder: value k of the list, switching every epochs/len epochs.
fn ladder_value(e_values: &[f64], epoch_in_phase: usize, total_epochs: usize) -> f64 {
    if e_values.is_empty() {
        return 0.01;
    }
    let idx = (epoch_in_phase * e_values.len() / total_epochs.max(1)).min(e_values.len() - 1);
    e_values[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::schedule::TrainingSchedule;

    fn smoke_schedule() -> TrainingSchedule {
        let mut s = TrainingSchedule::rounds(2, 12, 6, 80);
        for p in &mut s.phases {
            p.epochs = if p.kind == PhaseKind::Causal { 8 } else { 6 };
        }
        s.n_t_constraint = 6;
        s.n_x_initial = 12;
        s.stop_error = 0.0;
        s
    }

    #[test]
    fn ladder_schedule() {
        let e = [0.01, 0.1, 1.0, 10.0, 100.0];
        assert_eq!(ladder_value(&e, 0, 1000), 0.01);
        assert_eq!(ladder_value(&e, 199, 1000), 0.01);
        assert_eq!(ladder_value(&e, 200, 1000), 0.1);
        assert_eq!(ladder_value(&e, 999, 1000), 100.0);
        assert_eq!(ladder_value(&[0.01], 149, 150), 0.01);
    }

    #[test]
    fn smoke_run_completes_and_is_deterministic() {
        let cfg = ProblemConfig::default();
        let schedule = smoke_schedule();
        let run = || {
            train_full(&cfg, &schedule, &[8, 8], (40, 8, 8), 7).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.log.records.len(), b.log.records.len());
        assert_eq!(a.log.records.len(), schedule.total_epochs());
        for (ra, rb) in a.log.records.iter().zip(&b.log.records) {
            assert_eq!(ra.total_eq20.to_bits(), rb.total_eq20.to_bits(), "epoch {}", ra.epoch);
            assert_eq!(ra.c_s.to_bits(), rb.c_s.to_bits());
        }
        assert_eq!(a.params, b.params);
        // interface frozen from phase 1 onwards
        assert!(a.params.snet_frozen);
        // phase-local best markers exist
        assert!(a.log.records.iter().any(|r| r.best));
    }

    #[test]
    fn interface_is_bitwise_frozen_after_first_adaptive_phase() {
        let cfg = ProblemConfig::default();
        let schedule = smoke_schedule();
        let out = train_full(&cfg, &schedule, &[8, 8], (40, 8, 8), 3).unwrap();
        // replay: capture snet at the freeze event by rerunning phase 1 only
        let mut first_phase_only = schedule.clone();
        first_phase_only.phases.truncate(1);
        let head = train_full(&cfg, &first_phase_only, &[8, 8], (40, 8, 8), 3).unwrap();
        // the final snet equals the phase-1 best snet: later phases never move it
        assert_eq!(out.params.snet, head.params.snet);
    }
}
