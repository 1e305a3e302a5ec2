//! Dimensionless problem definition: configuration, PDE residual operators,
//! interface constraint evaluators and indicator-composed outputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::JetValue;

fn default_tau_max() -> f64 {
    10.0
}

/// Dimensionless physical parameters of the solidification problem.
///
/// The default set is calibrated so that the similarity solve lands on the
/// reference analytic solid composition C_s* = 0.03387 (see `analytic`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Lewis number: thermal to solutal diffusivity ratio.
    pub le: f64,
    /// Stefan number: c_p(T_inf - T_0)/L_f.
    pub ste: f64,
    /// Partition coefficient C_s*/C_l*.
    pub k0: f64,
    /// Initial alloy composition (all liquid at tau = 0).
    pub c0: f64,
    /// Scaled freezing temperature of the pure solvent.
    pub theta_f: f64,
    /// Liquidus slope (negative).
    pub m_l: f64,
    /// Cold-boundary temperature.
    pub t0: f64,
    /// Initial melt temperature.
    pub t_inf: f64,
    /// End of the simulated time window; space is always [0, 1].
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            le: 10.0,
            ste: 0.1,
            k0: 0.2,
            c0: 0.097694251,
            theta_f: 1.3948147,
            m_l: -150.0,
            t0: 300.0,
            t_inf: 330.0,
            tau_max: 10.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("invalid problem config: {0}")]
    InvalidConfig(String),
    #[error("field sample is missing the {coord} jet of {field}")]
    MissingDerivative { field: &'static str, coord: &'static str },
}

impl ProblemConfig {
    /// Structural validation. Existence of the similarity root is checked
    /// separately at load time by the analytic module.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let bad = |m: String| Err(PhysicsError::InvalidConfig(m));
        if !(self.le > 0.0) {
            return bad(format!("le must be positive, got {}", self.le));
        }
        if !(self.ste > 0.0) {
            return bad(format!("ste must be positive, got {}", self.ste));
        }
        if !(self.k0 > 0.0 && self.k0 <= 1.0) {
            return bad(format!("k0 must lie in (0, 1], got {}", self.k0));
        }
        if !(self.c0 > 0.0) {
            return bad(format!("c0 must be positive, got {}", self.c0));
        }
        if self.m_l >= 0.0 {
            return bad(format!("m_l must be negative, got {}", self.m_l));
        }
        if !(self.t_inf > self.t0) {
            return bad(format!("t_inf ({}) must exceed t0 ({})", self.t_inf, self.t0));
        }
        if !(self.tau_max > 0.0) {
            return bad(format!("tau_max must be positive, got {}", self.tau_max));
        }
        Ok(())
    }
}

/// Jets of one field with respect to each input coordinate. A slot is only
/// populated when the residual being evaluated needs it.
#[derive(Clone, Copy, Debug, Default)]
pub struct FieldJets {
    pub wrt_eps: Option<JetValue>,
    pub wrt_tau: Option<JetValue>,
}

impl FieldJets {
    pub fn new(wrt_eps: JetValue, wrt_tau: JetValue) -> Self {
        FieldJets { wrt_eps: Some(wrt_eps), wrt_tau: Some(wrt_tau) }
    }

    fn eps(&self, field: &'static str) -> Result<JetValue, PhysicsError> {
        self.wrt_eps.ok_or(PhysicsError::MissingDerivative { field, coord: "eps" })
    }

    fn tau(&self, field: &'static str) -> Result<JetValue, PhysicsError> {
        self.wrt_tau.ok_or(PhysicsError::MissingDerivative { field, coord: "tau" })
    }
}

/// Field evaluations (with the jets each residual requires) at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct FieldSample {
    pub eps: f64,
    pub tau: f64,
    pub theta_s: FieldJets,
    pub theta_l: FieldJets,
    pub c_l: FieldJets,
    /// Interface position depends on tau alone; only `wrt_tau` is meaningful.
    pub eps_star: FieldJets,
}

/// Heat residual in the solid: dtheta_s/dtau - d2theta_s/deps2.
pub fn residual_heat_solid(s: &FieldSample) -> Result<f64, PhysicsError> {
    Ok(s.theta_s.tau("theta_s")?.d1 - s.theta_s.eps("theta_s")?.d2)
}

/// Heat residual in the liquid: dtheta_l/dtau - d2theta_l/deps2.
pub fn residual_heat_liquid(s: &FieldSample) -> Result<f64, PhysicsError> {
    Ok(s.theta_l.tau("theta_l")?.d1 - s.theta_l.eps("theta_l")?.d2)
}

/// Species residual in the liquid: dC_l/dtau - (1/Le)·d2C_l/deps2.
pub fn residual_species(s: &FieldSample, cfg: &ProblemConfig) -> Result<f64, PhysicsError> {
    Ok(s.c_l.tau("c_l")?.d1 - s.c_l.eps("c_l")?.d2 / cfg.le)
}

/// Interface heat balance at eps = eps*(tau):
/// (1/Ste)·deps*/dtau - dtheta_s/deps + dtheta_l/deps.
pub fn residual_stefan(s: &FieldSample, cfg: &ProblemConfig) -> Result<f64, PhysicsError> {
    Ok(s.eps_star.tau("eps_star")?.d1 / cfg.ste - s.theta_s.eps("theta_s")?.d1
        + s.theta_l.eps("theta_l")?.d1)
}

/// Interface solute balance at eps = eps*(tau):
/// (1/Le)·dC_l/deps + C_l*·(1-k0)·deps*/dtau, with the flux term moved left.
pub fn residual_solute_flux(s: &FieldSample, cfg: &ProblemConfig) -> Result<f64, PhysicsError> {
    Ok(s.c_l.eps("c_l")?.d1 / cfg.le
        + s.c_l.eps("c_l")?.v * (1.0 - cfg.k0) * s.eps_star.tau("eps_star")?.d1)
}

/// Liquidus coupling: interface liquid composition from interface temperature,
/// C_l* = (T_0 - T_inf)(theta_f - theta*)/m_l.
pub fn phase_diagram_clstar(theta_star: f64, cfg: &ProblemConfig) -> Result<f64, PhysicsError> {
    if cfg.m_l == 0.0 {
        return Err(PhysicsError::InvalidConfig("m_l must be nonzero".into()));
    }
    Ok((cfg.t0 - cfg.t_inf) * (cfg.theta_f - theta_star) / cfg.m_l)
}

/// Indicator-composed temperature: solid branch strictly left of the
/// interface, liquid branch at and right of it.
#[inline]
pub fn compose_theta(eps: f64, eps_star: f64, theta_s: f64, theta_l: f64) -> f64 {
    if eps < eps_star {
        theta_s
    } else {
        theta_l
    }
}

/// Indicator-composed composition; the solid side is the uniform C_s.
#[inline]
pub fn compose_c(eps: f64, eps_star: f64, c_s: f64, c_l: f64) -> f64 {
    if eps < eps_star {
        c_s
    } else {
        c_l
    }
}

/// Anything that can evaluate the five unknown fields and their jets: the
/// trained networks, or the closed-form solution when the losses and metrics
/// are exercised against ground truth.
pub trait FieldModel {
    /// (theta_s, theta_l) values.
    fn theta(&self, eps: f64, tau: f64) -> (f64, f64);
    /// theta jets with respect to eps and tau: ((s_eps, s_tau), (l_eps, l_tau)).
    fn theta_jets(&self, eps: f64, tau: f64) -> (FieldJets, FieldJets);
    fn c_l(&self, eps: f64, tau: f64) -> f64;
    fn c_l_jets(&self, eps: f64, tau: f64) -> FieldJets;
    fn interface(&self, tau: f64) -> f64;
    /// Interface jet with respect to tau.
    fn interface_jet(&self, tau: f64) -> JetValue;
    fn c_s(&self) -> f64;

    /// Full jet bundle at one point (interface jets taken at this tau).
    fn sample(&self, eps: f64, tau: f64) -> FieldSample {
        let (theta_s, theta_l) = self.theta_jets(eps, tau);
        FieldSample {
            eps,
            tau,
            theta_s,
            theta_l,
            c_l: self.c_l_jets(eps, tau),
            eps_star: FieldJets { wrt_eps: None, wrt_tau: Some(self.interface_jet(tau)) },
        }
    }

    /// Composed temperature via the interface indicator.
    fn composed_theta(&self, eps: f64, tau: f64) -> f64 {
        let (s, l) = self.theta(eps, tau);
        compose_theta(eps, self.interface(tau), s, l)
    }

    /// Composed composition via the interface indicator.
    fn composed_c(&self, eps: f64, tau: f64) -> f64 {
        compose_c(eps, self.interface(tau), self.c_s(), self.c_l(eps, tau))
    }

    /// Composed θ and C on the outer product of the two grids, plus ε* on the
    /// τ grid. Matrices are flattened row-major as [i_eps * n_tau + j_tau].
    /// The default walks point by point; network-backed models override this
    /// with a batched pass.
    fn composed_grid(&self, eps: &[f64], tau: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let eps_star: Vec<f64> = tau.iter().map(|&t| self.interface(t)).collect();
        let mut theta = Vec::with_capacity(eps.len() * tau.len());
        let mut c = Vec::with_capacity(eps.len() * tau.len());
        for &e in eps {
            for (j, &t) in tau.iter().enumerate() {
                let (ts, tl) = self.theta(e, t);
                theta.push(compose_theta(e, eps_star[j], ts, tl));
                c.push(compose_c(e, eps_star[j], self.c_s(), self.c_l(e, t)));
            }
        }
        (theta, c, eps_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(v: f64, d1: f64, d2: f64) -> JetValue {
        JetValue { v, d1, d2 }
    }

    #[test]
    fn steady_linear_profile_has_zero_heat_residual() {
        // theta(eps, tau) = eps: d/dtau = 0, curvature = 0
        let s = FieldSample {
            theta_s: FieldJets::new(jet(0.3, 1.0, 0.0), jet(0.3, 0.0, 0.0)),
            ..Default::default()
        };
        assert_eq!(residual_heat_solid(&s).unwrap(), 0.0);
    }

    #[test]
    fn pure_time_ramp_has_unit_heat_residual() {
        // theta = tau: d/dtau = 1, curvature 0
        let s = FieldSample {
            theta_s: FieldJets::new(jet(2.0, 0.0, 0.0), jet(2.0, 1.0, 0.0)),
            ..Default::default()
        };
        assert_eq!(residual_heat_solid(&s).unwrap(), 1.0);
    }

    #[test]
    fn species_residual_examples() {
        let cfg = ProblemConfig { le: 1.0, ..Default::default() };
        // constant C_l
        let flat = FieldSample {
            c_l: FieldJets::new(jet(0.1, 0.0, 0.0), jet(0.1, 0.0, 0.0)),
            ..Default::default()
        };
        assert_eq!(residual_species(&flat, &cfg).unwrap(), 0.0);
        // C_l = eps^2/2 with Le = 1: curvature 1, no time term -> residual -1
        let parab = FieldSample {
            c_l: FieldJets::new(jet(0.125, 0.5, 1.0), jet(0.125, 0.0, 0.0)),
            ..Default::default()
        };
        assert_eq!(residual_species(&parab, &cfg).unwrap(), -1.0);
    }

    #[test]
    fn stefan_residual_examples() {
        let cfg = ProblemConfig::default(); // ste = 0.1
        // frozen interface, equal one-sided gradients
        let s = FieldSample {
            theta_s: FieldJets::new(jet(0.5, 0.7, 0.0), jet(0.5, 0.0, 0.0)),
            theta_l: FieldJets::new(jet(0.5, 0.7, 0.0), jet(0.5, 0.0, 0.0)),
            eps_star: FieldJets { wrt_eps: None, wrt_tau: Some(jet(0.4, 0.0, 0.0)) },
            ..Default::default()
        };
        assert_eq!(residual_stefan(&s, &cfg).unwrap(), 0.0);
        // theta_s = 2 eps, theta_l = eps, deps*/dtau = Ste: jump 1 balances motion
        let s2 = FieldSample {
            theta_s: FieldJets::new(jet(0.8, 2.0, 0.0), jet(0.8, 0.0, 0.0)),
            theta_l: FieldJets::new(jet(0.4, 1.0, 0.0), jet(0.4, 0.0, 0.0)),
            eps_star: FieldJets { wrt_eps: None, wrt_tau: Some(jet(0.4, cfg.ste, 0.0)) },
            ..Default::default()
        };
        assert!(residual_stefan(&s2, &cfg).unwrap().abs() < 1e-15);
    }

    #[test]
    fn solute_flux_residual_examples() {
        let cfg = ProblemConfig::default();
        // stationary interface, flat C_l
        let s = FieldSample {
            c_l: FieldJets::new(jet(0.1, 0.0, 0.0), jet(0.1, 0.0, 0.0)),
            eps_star: FieldJets { wrt_eps: None, wrt_tau: Some(jet(0.2, 0.0, 0.0)) },
            ..Default::default()
        };
        assert_eq!(residual_solute_flux(&s, &cfg).unwrap(), 0.0);
        // k0 = 1: no partitioning, flat C_l stays exact regardless of motion
        let cfg1 = ProblemConfig { k0: 1.0, ..Default::default() };
        let s2 = FieldSample {
            c_l: FieldJets::new(jet(0.1, 0.0, 0.0), jet(0.1, 0.0, 0.0)),
            eps_star: FieldJets { wrt_eps: None, wrt_tau: Some(jet(0.2, 3.0, 0.0)) },
            ..Default::default()
        };
        assert_eq!(residual_solute_flux(&s2, &cfg1).unwrap(), 0.0);
    }

    #[test]
    fn missing_jet_is_a_usage_error() {
        let s = FieldSample::default();
        assert!(matches!(
            residual_heat_solid(&s),
            Err(PhysicsError::MissingDerivative { field: "theta_s", .. })
        ));
    }

    #[test]
    fn clstar_is_linear_and_vanishes_at_theta_f() {
        let cfg = ProblemConfig::default();
        assert_eq!(phase_diagram_clstar(cfg.theta_f, &cfg).unwrap(), 0.0);
        let base = phase_diagram_clstar(0.5, &cfg).unwrap();
        let doubled_dt = ProblemConfig { t_inf: cfg.t0 + 2.0 * (cfg.t_inf - cfg.t0), ..cfg.clone() };
        let v2 = phase_diagram_clstar(0.5, &doubled_dt).unwrap();
        assert!((v2 - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn composition_tie_break_is_liquid() {
        assert_eq!(compose_theta(0.0, 0.0, 1.0, 2.0), 2.0); // eps* = 0: liquid everywhere
        assert_eq!(compose_theta(0.3, 0.5, 1.0, 2.0), 1.0); // strictly inside solid
        assert_eq!(compose_c(0.5, 0.5, 9.0, 3.0), 3.0); // exact equality: liquid
    }

    #[test]
    fn residuals_are_linear_in_second_and_time_derivatives() {
        // superposition on random jets
        let cfg = ProblemConfig::default();
        let mk = |a: f64| FieldSample {
            theta_s: FieldJets::new(jet(0.1, 0.2 * a, 0.7 * a), jet(0.1, -0.3 * a, 0.0)),
            theta_l: FieldJets::new(jet(0.1, 0.0, 1.3 * a), jet(0.1, 0.9 * a, 0.0)),
            c_l: FieldJets::new(jet(0.1, 0.4 * a, -0.2 * a), jet(0.1, 0.6 * a, 0.0)),
            eps_star: FieldJets { wrt_eps: None, wrt_tau: Some(jet(0.2, 1.1 * a, 0.0)) },
            ..Default::default()
        };
        for f in [residual_heat_solid, residual_heat_liquid] {
            let r1 = f(&mk(1.0)).unwrap();
            let r3 = f(&mk(3.0)).unwrap();
            assert!((r3 - 3.0 * r1).abs() < 1e-12);
        }
        let r1 = residual_species(&mk(1.0), &cfg).unwrap();
        let r3 = residual_species(&mk(3.0), &cfg).unwrap();
        assert!((r3 - 3.0 * r1).abs() < 1e-12);
        let r1 = residual_stefan(&mk(1.0), &cfg).unwrap();
        let r3 = residual_stefan(&mk(3.0), &cfg).unwrap();
        assert!((r3 - 3.0 * r1).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(ProblemConfig::default().validate().is_ok());
        assert!(ProblemConfig { le: -1.0, ..Default::default() }.validate().is_err());
        assert!(ProblemConfig { k0: 0.0, ..Default::default() }.validate().is_err());
        assert!(ProblemConfig { m_l: 1.0, ..Default::default() }.validate().is_err());
        assert!(ProblemConfig { t_inf: 299.0, ..Default::default() }.validate().is_err());
        // k0 = 1 is allowed: the no-partitioning limit used by oracle checks
        assert!(ProblemConfig { k0: 1.0, ..Default::default() }.validate().is_ok());
    }
}
