//! One-hop MAC delay approximations, from hand-off to the MAC until delivery.

use serde::{Deserialize, Serialize};

use crate::category::CategoryId;
use crate::context::NetworkContext;
use crate::energy::{csma_collision_probability, expected_attempts_psa, psa_offered_load, CollisionSolution};
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub seconds: f64,
    pub category: CategoryId,
}

/// Half a superframe of waiting for the owned cell, plus the cell itself.
pub fn scheduled_delay(ctx: &NetworkContext) -> DelayEstimate {
    DelayEstimate {
        seconds: ctx.sched.frame_len / 2.0 + ctx.sched.slot_len,
        category: CategoryId::scheduled(),
    }
}

/// Common-active-period delay for an already solved collision probability.
///
/// The sleep wait is measured in one-second duty-cycle periods.
pub fn cap_delay_with(ctx: &NetworkContext, sol: &CollisionSolution) -> DelayEstimate {
    let dc = ctx.cap.duty_cycle;
    let sleep = (1.0 - dc) * ((1.0 - dc) / 2.0);
    let airtime = (ctx.cap.rts_len / (1.0 - sol.p) + ctx.msg_len) / ctx.bandwidth;
    DelayEstimate {
        seconds: sleep + airtime,
        category: CategoryId::common_active(),
    }
}

pub fn cap_delay(ctx: &NetworkContext) -> Result<DelayEstimate, ModelError> {
    let sol = csma_collision_probability(ctx)?;
    Ok(cap_delay_with(ctx, &sol))
}

pub fn psp_delay(ctx: &NetworkContext) -> DelayEstimate {
    let attempts = expected_attempts_psa(psa_offered_load(ctx));
    DelayEstimate {
        seconds: attempts * (ctx.psp.preamble_len + ctx.msg_len) / ctx.bandwidth,
        category: CategoryId::preamble_sampling(),
    }
}
