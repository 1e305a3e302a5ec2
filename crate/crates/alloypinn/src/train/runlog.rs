//! Append-only per-epoch record of a training run, replayable to reproduce
//! the reported metrics, plus its CSV serialization.

use std::io::Write;
use std::path::Path;

use crate::loss::LossBreakdown;

use super::schedule::PhaseKind;

#[derive(Clone, Debug)]
pub struct RunRecord {
    /// 1-based global epoch index.
    pub epoch: usize,
    pub phase: usize,
    pub kind: PhaseKind,
    /// Causality parameter (causal epochs only).
    pub e: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub breakdown: LossBreakdown,
    pub total_eq20: f64,
    /// The weighted training objective of this epoch (scaled causal total or
    /// adaptive total).
    pub total_weighted: f64,
    pub c_s: f64,
    /// This epoch became the phase-local best.
    pub best: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    /// Irregular events: freezes, restores, rollbacks. (epoch, message)
    pub events: Vec<(usize, String)>,
}

impl RunLog {
    pub fn push(&mut self, r: RunRecord) {
        self.records.push(r);
    }

    pub fn event(&mut self, epoch: usize, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("epoch {epoch}: {msg}");
        self.events.push((epoch, msg));
    }

    /// Loss-history CSV: epoch, the fifteen components, the plain and
    /// weighted totals, the weighting state and the phase tag.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(
            f,
            "epoch,{},total_eq20,total_weighted,lambda1,lambda2,e,phase,c_s,best,wall_ms",
            LossBreakdown::csv_header()
        )?;
        for r in &self.records {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.epoch,
                r.breakdown.csv_row(),
                r.total_eq20,
                r.total_weighted,
                opt(r.lambda1),
                opt(r.lambda2),
                opt(r.e),
                match r.kind {
                    PhaseKind::Causal => "causal",
                    PhaseKind::Adaptive => "adaptive",
                },
                r.c_s,
                u8::from(r.best),
                r.wall_ms,
            )?;
        }
        Ok(())
    }

    pub fn write_events(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "epoch,event")?;
        for (epoch, msg) in &self.events {
            writeln!(f, "{epoch},{msg}")?;
        }
        Ok(())
    }
}
