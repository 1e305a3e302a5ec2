//! Adam optimizer with per-network state, parameter freezing and best-epoch
//! snapshot/restore.

use crate::net::ParamSet;

/// Bias-corrected Adam over one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            lr,
        }
    }

    /// One update step. A non-finite gradient skips the step entirely: the
    /// parameters, moments and step counter stay untouched and the caller is
    /// told via the return value.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> StepOutcome {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return StepOutcome::SkippedNonFinite;
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        StepOutcome::Applied
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    SkippedNonFinite,
}

/// The four independently optimized targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Theta,
    CNet,
    SNet,
    Cs,
}

/// Optimizer bundle: one Adam state per network plus one for the scalar, and
/// the freeze set. Freezing a target keeps its state but excludes it from
/// future steps; freezing twice is a no-op.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub theta: AdamState,
    pub cnet: AdamState,
    pub snet: AdamState,
    pub c_s: AdamState,
    frozen: [bool; 4],
}

impl Optimizer {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Optimizer {
            theta: AdamState::new(params.theta.n_params(), lr),
            cnet: AdamState::new(params.cnet.n_params(), lr),
            snet: AdamState::new(params.snet.n_params(), lr),
            c_s: AdamState::new(1, lr),
            frozen: [false; 4],
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.theta.lr = lr;
        self.cnet.lr = lr;
        self.snet.lr = lr;
        self.c_s.lr = lr;
    }

    pub fn freeze(&mut self, target: Target) {
        self.frozen[target as usize] = true;
    }

    pub fn is_frozen(&self, target: Target) -> bool {
        self.frozen[target as usize]
    }

    /// Apply one step to every unfrozen target. Gradients are flat vectors in
    /// the network's canonical order; `g_cs` is the scalar gradient.
    pub fn step(
        &mut self,
        params: &mut ParamSet,
        g_theta: &[f64],
        g_cnet: &[f64],
        g_snet: &[f64],
        g_cs: f64,
    ) -> StepOutcome {
        let mut outcome = StepOutcome::Applied;
        if !self.frozen[Target::Theta as usize] {
            let mut flat = params.theta.flat();
            if self.theta.step(&mut flat, g_theta) == StepOutcome::Applied {
                params.theta.set_flat(&flat);
            } else {
                outcome = StepOutcome::SkippedNonFinite;
            }
        }
        if !self.frozen[Target::CNet as usize] {
            let mut flat = params.cnet.flat();
            if self.cnet.step(&mut flat, g_cnet) == StepOutcome::Applied {
                params.cnet.set_flat(&flat);
            } else {
                outcome = StepOutcome::SkippedNonFinite;
            }
        }
        if !self.frozen[Target::SNet as usize] {
            let mut flat = params.snet.flat();
            if self.snet.step(&mut flat, g_snet) == StepOutcome::Applied {
                params.snet.set_flat(&flat);
            } else {
                outcome = StepOutcome::SkippedNonFinite;
            }
        }
        if !self.frozen[Target::Cs as usize] {
            let mut v = [params.c_s.value];
            if self.c_s.step(&mut v, &[g_cs]) == StepOutcome::Applied {
                params.c_s.value = v[0];
            } else {
                outcome = StepOutcome::SkippedNonFinite;
            }
        }
        outcome
    }
}

/// Parameter copy taken at the epoch with the lowest recorded error.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub epoch: usize,
    pub params: ParamSet,
    pub error: f64,
}

/// Argmin-by-error tracker for one training phase.
#[derive(Clone, Debug, Default)]
pub struct BestTracker {
    best: Option<Snapshot>,
}

impl BestTracker {
    /// Reset at a phase boundary: best-epoch selection is phase-local.
    pub fn reset(&mut self) {
        self.best = None;
    }

    /// Record `params` if `error` beats the current best. Returns true when a
    /// new snapshot was taken.
    pub fn observe(&mut self, epoch: usize, error: f64, params: &ParamSet) -> bool {
        let better = match &self.best {
            Some(s) => error < s.error,
            None => true,
        };
        if better && error.is_finite() {
            self.best = Some(Snapshot { epoch, params: params.clone(), error });
            return true;
        }
        false
    }

    pub fn best(&self) -> Option<&Snapshot> {
        self.best.as_ref()
    }

    /// Load the best snapshot back into the live parameters.
    pub fn restore_into(&self, params: &mut ParamSet) -> Option<usize> {
        let s = self.best.as_ref()?;
        *params = s.params.clone();
        Some(s.epoch)
    }
}
