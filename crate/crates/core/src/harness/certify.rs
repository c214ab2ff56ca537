//! Transition solve, admissibility and cost reconciliation for one jump.

use serde::Serialize;

use crate::error::Result;
use crate::jumps::{
    certify_admissibility, reconcile_jump, solve_transition, AdmissibilityReport, CostEstimate, JumpRecord, JumpVerdict, TransitionPath,
    TransitionSettings,
};
use crate::stepper::Problem;

#[derive(Debug, Clone, Serialize)]
pub struct JumpCertificate {
    /// The jump as detected, with u⁺ read at the window edge.
    pub detected: JumpRecord,
    /// Same jump with u⁺ replaced by the transition's landing point.
    pub landed: JumpRecord,
    pub cost: CostEstimate,
    pub admissibility: AdmissibilityReport,
    pub verdict: JumpVerdict,
    #[serde(skip)]
    pub path: Option<TransitionPath>,
}

impl JumpCertificate {
    pub fn certified(&self) -> bool {
        self.verdict.pass && self.admissibility.pass
    }
}

/// `bound_const` is the z-variation bound (iv′) of the parent run, which
/// caps the transition's own variation in the first admissibility condition.
pub fn certify_jump(p: &Problem, jump: &JumpRecord, settings: &TransitionSettings, tol_rel: f64, bound_const: f64, keep_path: bool) -> Result<JumpCertificate> {
    let (path, cost) = solve_transition(p, jump, settings)?;
    let landed = jump.landed(p, &cost.u_end)?;
    let verdict = reconcile_jump(&landed, &cost, tol_rel);
    let admissibility = certify_admissibility(p, &path, &landed, settings.alpha, settings.beta, bound_const)?;
    Ok(JumpCertificate {
        detected: jump.clone(),
        landed,
        cost,
        admissibility,
        verdict,
        path: keep_path.then_some(path),
    })
}
