//! Transient versus strongly recurrent: the process is transient exactly
//! when `m* ≤ 1/ρ`.

use std::fmt;

use serde::Serialize;

use crate::environment::ValidatedSpec;
use crate::error::SpectralError;
use crate::spectral::{env_rho, nearest_neighbor_rho};

/// Relative slack on `m* · ρ = 1` treated as equality, so that a spec built
/// exactly on the boundary is not pushed to the recurrent side by rounding.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    Transient,
    StronglyRecurrent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RhoMethod {
    ClosedForm,
    Minimax,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub m_star: f64,
    pub rho: f64,
    pub critical_m: f64,
    /// `m* − 1/ρ`.
    pub margin: f64,
    pub method: RhoMethod,
    /// `|margin|` is below the warning tolerance.
    pub near_critical: bool,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            VerdictKind::Transient => "transient",
            VerdictKind::StronglyRecurrent => "strongly recurrent",
        };
        write!(f, "{kind}: m* = {:.6}, rho = {:.9}, 1/rho = {:.6}, margin = {:+.6}", self.m_star, self.rho, self.critical_m, self.margin)?;
        if self.near_critical {
            write!(f, " (near critical: verdict sensitive to numerical error in rho)")?;
        }
        Ok(())
    }
}

/// Classifies with spectral tolerance `tol`; the near-critical warning
/// fires when `|margin| < 10 · tol`.
pub fn classify(spec: &ValidatedSpec, tol: f64) -> Result<Verdict, SpectralError> {
    let m_star = spec.m_star();
    let support = spec.step_support();
    let (rho, method) = if support.len() == 1 && spec.generators().is_nearest_neighbor() {
        (nearest_neighbor_rho(&support[0].0)?, RhoMethod::ClosedForm)
    } else {
        (env_rho(spec, tol)?.rho, RhoMethod::Minimax)
    };
    let critical_m = 1.0 / rho;
    let kind = if m_star * rho <= 1.0 + TIE_TOL { VerdictKind::Transient } else { VerdictKind::StronglyRecurrent };
    let margin = m_star - critical_m;
    Ok(Verdict { kind, m_star, rho, critical_m, margin, method, near_critical: margin.abs() < 10.0 * tol })
}
