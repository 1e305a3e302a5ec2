//! The phase schedule: which algorithm runs when, with which learning rate,
//! causality parameters and collocation sampling.

use serde::{Deserialize, Serialize};

/// How collocation points are drawn each epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CollocationSpec {
    /// Fixed uniform τ grid of `n_t` rows crossed with `n_x` fresh uniform ε
    /// points per epoch (causal training needs a stable time ordering).
    Grid { n_x: usize, n_t: usize },
    /// `count` points uniform over the whole domain each epoch.
    Random { count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    Causal,
    Adaptive,
}

/// One training phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub kind: PhaseKind,
    pub epochs: usize,
    pub lr: f64,
    /// Causal phases only: the causality parameter ladder, each value held
    /// for epochs/len(e_values) epochs.
    pub e_values: Vec<f64>,
    pub collocation: CollocationSpec,
    /// Freeze the interface network before this phase starts.
    pub freeze_interface_first: bool,
}

/// When to stop training the solid-composition scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsStopRule {
    /// |C_s − C_s_analytic| ≤ 1e-4 (the reference comparison).
    Oracle,
    /// No-oracle fallback: freeze once the per-epoch drift stays below 1e-7
    /// for 50 consecutive epochs.
    Drift,
}

impl CsStopRule {
    pub const ORACLE_BAND: f64 = 1e-4;
    pub const DRIFT_BAND: f64 = 1e-7;
    pub const DRIFT_EPOCHS: usize = 50;
}

/// Full schedule plus the stopping knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub phases: Vec<PhaseSpec>,
    pub cs_stop: CsStopRule,
    /// Stop at a phase boundary once the best total error drops below this.
    pub stop_error: f64,
    /// Fixed point counts for the boundary (τ) and initial (ε) constraint
    /// grids; these match the scale factors of the weighted total.
    pub n_t_constraint: usize,
    pub n_x_initial: usize,
}

impl TrainingSchedule {
    /// The reference schedule: causal 1000 epochs at lr 5e-3 with
    /// e ∈ {0.01, 0.1, 1, 10, 100} for 200 epochs each on a 256×100 grid;
    /// freeze the interface network; adaptive 1000 epochs at lr 1e-4 on
    /// 10000 random points; causal refresh 150 epochs at lr 5e-4 with
    /// e = 0.01; adaptive 1000 epochs at lr 1e-4. Two rounds, 3150 epochs.
    pub fn paper_default() -> Self {
        Self::rounds(2, 256, 100, 10_000)
    }

    /// `rounds` alternations with configurable collocation sizes. Round one
    /// is the full causal phase; later rounds use the short refresh.
    pub fn rounds(rounds: usize, n_x: usize, n_t: usize, adaptive_batch: usize) -> Self {
        assert!(rounds >= 1);
        let grid = CollocationSpec::Grid { n_x, n_t };
        let random = CollocationSpec::Random { count: adaptive_batch };
        let mut phases = vec![PhaseSpec {
            kind: PhaseKind::Causal,
            epochs: 1000,
            lr: 5e-3,
            e_values: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            collocation: grid,
            freeze_interface_first: false,
        }];
        for round in 0..rounds - 1 {
            phases.push(PhaseSpec {
                kind: PhaseKind::Adaptive,
                epochs: 1000,
                lr: 1e-4,
                e_values: vec![],
                collocation: random,
                freeze_interface_first: round == 0,
            });
            phases.push(PhaseSpec {
                kind: PhaseKind::Causal,
                epochs: 150,
                lr: 5e-4,
                e_values: vec![0.01],
                collocation: grid,
                freeze_interface_first: false,
            });
        }
        phases.push(PhaseSpec {
            kind: PhaseKind::Adaptive,
            epochs: 1000,
            lr: 1e-4,
            e_values: vec![],
            collocation: random,
            freeze_interface_first: rounds == 1,
        });
        TrainingSchedule {
            phases,
            cs_stop: CsStopRule::Oracle,
            stop_error: 1e-4,
            n_t_constraint: n_t,
            n_x_initial: n_x,
        }
    }

    /// Causal-only ablation: 1000 causal epochs at lr 0.01, no freeze, no
    /// adaptive phase.
    pub fn causal_only(n_x: usize, n_t: usize) -> Self {
        TrainingSchedule {
            phases: vec![PhaseSpec {
                kind: PhaseKind::Causal,
                epochs: 1000,
                lr: 0.01,
                e_values: vec![0.01, 0.1, 1.0, 10.0, 100.0],
                collocation: CollocationSpec::Grid { n_x, n_t },
                freeze_interface_first: false,
            }],
            cs_stop: CsStopRule::Oracle,
            stop_error: 0.0,
            n_t_constraint: n_t,
            n_x_initial: n_x,
        }
    }

    /// Adaptive-only ablation: 5000 adaptive epochs with every network left
    /// trainable (there is no causal phase to learn the interface first).
    pub fn adaptive_only(n_x: usize, n_t: usize, adaptive_batch: usize) -> Self {
        TrainingSchedule {
            phases: vec![PhaseSpec {
                kind: PhaseKind::Adaptive,
                epochs: 5000,
                lr: 1e-4,
                e_values: vec![],
                collocation: CollocationSpec::Random { count: adaptive_batch },
                freeze_interface_first: false,
            }],
            cs_stop: CsStopRule::Oracle,
            stop_error: 0.0,
            n_t_constraint: n_t,
            n_x_initial: n_x,
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_default_structure() {
        let s = TrainingSchedule::paper_default();
        assert_eq!(s.total_epochs(), 3150);
        assert_eq!(s.phases.len(), 4);
        let p = &s.phases;
        assert_eq!(p[0].kind, PhaseKind::Causal);
        assert_eq!(p[0].epochs, 1000);
        assert_eq!(p[0].lr, 5e-3);
        assert_eq!(p[0].e_values, vec![0.01, 0.1, 1.0, 10.0, 100.0]);
        assert_eq!(p[0].collocation, CollocationSpec::Grid { n_x: 256, n_t: 100 });
        assert!(!p[0].freeze_interface_first);
        assert_eq!(p[1].kind, PhaseKind::Adaptive);
        assert_eq!(p[1].epochs, 1000);
        assert_eq!(p[1].lr, 1e-4);
        assert!(p[1].freeze_interface_first, "interface freezes before the first adaptive phase");
        assert_eq!(p[1].collocation, CollocationSpec::Random { count: 10_000 });
        assert_eq!(p[2].kind, PhaseKind::Causal);
        assert_eq!(p[2].epochs, 150);
        assert_eq!(p[2].lr, 5e-4);
        assert_eq!(p[2].e_values, vec![0.01]);
        assert_eq!(p[3].kind, PhaseKind::Adaptive);
        assert_eq!(p[3].epochs, 1000);
        assert_eq!(p[3].lr, 1e-4);
    }

    #[test]
    fn ablation_schedules() {
        let c = TrainingSchedule::causal_only(256, 100);
        assert_eq!(c.total_epochs(), 1000);
        assert_eq!(c.phases[0].lr, 0.01);
        let a = TrainingSchedule::adaptive_only(256, 100, 10_000);
        assert_eq!(a.total_epochs(), 5000);
        assert!(!a.phases[0].freeze_interface_first);
    }
}
