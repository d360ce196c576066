use crate::LtlError;

/// Outcome of a single progression step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    SatisfiedNow,
    ViolatedNow,
    Ongoing,
}

/// Task-shaped reward: `r_env ± r_phi` when progression reaches
/// true/false, `r_env` otherwise.
pub fn shaped_reward(r_env: f64, verdict: Verdict, r_phi: f64) -> Result<f64, LtlError> {
    if r_phi.is_nan() || r_phi <= 0.0 {
        return Err(LtlError::NonPositiveTaskReward(r_phi));
    }
    Ok(match verdict {
        Verdict::SatisfiedNow => r_env + r_phi,
        Verdict::ViolatedNow => r_env - r_phi,
        Verdict::Ongoing => r_env,
    })
}
