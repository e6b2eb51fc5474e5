//! Analytical energy models for the scheduled, common-active-period and
//! preamble-sampling categories.
//!
//! Every figure is a network-wide rate in joules/second (watts).

use serde::{Deserialize, Serialize};

use crate::context::{NetworkContext, ServiceRateMode};
use crate::error::ModelError;
use crate::radio::{rx_energy_per_bit, tx_energy_per_bit, RadioProfile};

/// Per-cause energy rates, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub collision: f64,
    pub overhearing: f64,
    pub idle_listening: f64,
    pub overhead: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(collision: f64, overhearing: f64, idle_listening: f64, overhead: f64) -> Self {
        EnergyBreakdown {
            collision,
            overhearing,
            idle_listening,
            overhead,
            total: collision + overhearing + idle_listening + overhead,
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.collision, self.overhearing, self.idle_listening, self.overhead]
    }
}

/// Converged collision probability of the CSMA/CA fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionSolution {
    pub p: f64,
    pub residual: f64,
    pub iterations: u32,
}

pub const SOLVER_TOLERANCE: f64 = 1e-9;
const DAMPING: f64 = 0.5;
const MAX_ITERATIONS: u32 = 10_000;
const BRACKET_TOP: f64 = 0.999_999;
const DENOMINATOR_GUARD: f64 = 1e-12;
const SCAN_POINTS: usize = 2000;

/// Inputs of the fixed-point equation, stripped of the context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsmaProblem {
    /// lambda / mu
    pub load: f64,
    pub cw_min: f64,
    pub stages: i32,
    pub n_nodes: u32,
}

impl CsmaProblem {
    pub fn from_context(ctx: &NetworkContext) -> Self {
        let lambda = ctx.pkt_rate * ctx.cap.duty_cycle;
        let mu = match ctx.cap.service_rate_mode {
            ServiceRateMode::Bandwidth => ctx.bandwidth,
            ServiceRateMode::Packet => ctx.bandwidth / (ctx.msg_len + ctx.cap.control_bits()),
        };
        CsmaProblem {
            load: lambda / mu,
            cw_min: f64::from(ctx.cap.cw_min),
            stages: ctx.cap.backoff_stages as i32,
            n_nodes: ctx.n_nodes,
        }
    }

    fn window_denominator(&self, p: f64) -> f64 {
        1.0 - p - p * (2.0 * p).powi(self.stages)
    }

    /// Right-hand side of the fixed point, `None` where the window
    /// denominator is too close to zero.
    pub fn rhs(&self, p: f64) -> Option<f64> {
        let g = self.window_denominator(p);
        if g < DENOMINATOR_GUARD {
            return None;
        }
        let tau = self.load * ((1.0 - 2.0 * p) / g) * (2.0 / self.cw_min);
        let base = (1.0 - tau).max(0.0);
        Some(1.0 - base.powi(self.n_nodes as i32 - 1))
    }

    fn residual(&self, p: f64) -> Option<f64> {
        self.rhs(p).map(|r| p - r)
    }

    fn trivial(&self) -> bool {
        self.n_nodes <= 1 || self.load == 0.0
    }

    /// Largest p below the bracket top at which the equation is defined.
    fn feasible_upper(&self) -> f64 {
        if self.window_denominator(BRACKET_TOP) >= DENOMINATOR_GUARD {
            return BRACKET_TOP;
        }
        // the window denominator is decreasing on [0, 1)
        let (mut lo, mut hi) = (0.0, BRACKET_TOP);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.window_denominator(mid) >= DENOMINATOR_GUARD {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn zero_solution() -> CollisionSolution {
    CollisionSolution {
        p: 0.0,
        residual: 0.0,
        iterations: 0,
    }
}

/// Damped fixed-point iteration from p = 0. Returns `None` when it leaves the
/// feasible region or fails to converge in the step budget.
pub fn solve_by_iteration(problem: &CsmaProblem) -> Option<CollisionSolution> {
    if problem.trivial() {
        return Some(zero_solution());
    }
    let mut p = 0.0;
    for i in 1..=MAX_ITERATIONS {
        let r = problem.rhs(p)?;
        let next = (1.0 - DAMPING) * p + DAMPING * r;
        if !(0.0..1.0).contains(&next) {
            return None;
        }
        let step = (next - p).abs();
        p = next;
        if step < 1e-15 || (step < 1e-13 && problem.residual(p)?.abs() <= SOLVER_TOLERANCE) {
            let residual = problem.residual(p)?;
            if residual.abs() > SOLVER_TOLERANCE {
                return None;
            }
            return Some(CollisionSolution {
                p,
                residual,
                iterations: i,
            });
        }
    }
    None
}

/// Bisection on f(p) = p - RHS(p) inside the first sign change found by a
/// uniform scan of the feasible bracket.
pub fn solve_by_bisection(problem: &CsmaProblem) -> Result<CollisionSolution, ModelError> {
    if problem.trivial() {
        return Ok(zero_solution());
    }
    let upper = problem.feasible_upper();
    let saturated = ModelError::Saturated {
        offered_load: problem.load,
        upper,
    };
    let f = |p: f64| problem.residual(p).unwrap_or(f64::NAN);
    let f0 = f(0.0);
    if f0 >= 0.0 {
        return Ok(CollisionSolution {
            p: 0.0,
            residual: f0,
            iterations: 0,
        });
    }
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=SCAN_POINTS {
        let x = upper * k as f64 / SCAN_POINTS as f64;
        let fx = f(x);
        if fx.is_nan() {
            break;
        }
        if fx >= 0.0 {
            hi = Some(x);
            break;
        }
        lo = x;
    }
    let mut hi = hi.ok_or(saturated)?;
    let mut iterations = 0;
    while hi - lo > 1e-15 && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // report whichever end is closer to the root
    let (p, residual) = if f(lo).abs() <= f(hi).abs() {
        (lo, f(lo))
    } else {
        (hi, f(hi))
    };
    Ok(CollisionSolution {
        p,
        residual,
        iterations,
    })
}

/// Collision probability of the common-active-period category.
pub fn csma_collision_probability(ctx: &NetworkContext) -> Result<CollisionSolution, ModelError> {
    let problem = CsmaProblem::from_context(ctx);
    if let Some(sol) = solve_by_iteration(&problem) {
        return Ok(sol);
    }
    log::debug!("damped iteration did not converge, falling back to bisection");
    solve_by_bisection(&problem)
}

/// Mean transmissions per packet with per-attempt collision probability `p`.
pub fn expected_attempts_csma(p: f64) -> Result<f64, ModelError> {
    if !(0.0..1.0).contains(&p) {
        return Err(ModelError::Domain(format!(
            "collision probability must be in [0, 1), got {p}"
        )));
    }
    Ok(1.0 / (1.0 - p))
}

/// Offered load G' seen around one node during one preamble+message airtime.
pub fn psa_offered_load(ctx: &NetworkContext) -> f64 {
    ctx.pkt_rate * ctx.coverage_ratio() * (ctx.psp.preamble_len + ctx.msg_len) / ctx.bandwidth
}

/// Mean transmission attempts under preamble sampling, e^(2 G').
pub fn expected_attempts_psa(g_prime: f64) -> f64 {
    (2.0 * g_prime).exp()
}

/// Count of other nodes in one neighborhood, N' - 1, clamped at zero.
pub fn other_neighbors(ctx: &NetworkContext) -> f64 {
    let n = ctx.derive_geometry().neighbors - 1.0;
    if n < 0.0 {
        log::warn!("expected neighborhood {:.4} < 1; clamping N' - 1 to 0", n + 1.0);
        0.0
    } else {
        n
    }
}

/// True when the neighbor-count clamp of [`other_neighbors`] is active.
pub fn sparse_neighborhood(ctx: &NetworkContext) -> bool {
    ctx.derive_geometry().neighbors < 1.0
}

/// Scheduled category. Collision and overhearing are zero by construction.
pub fn scheduled_energy(ctx: &NetworkContext, prof: &RadioProfile) -> EnergyBreakdown {
    let s = &ctx.sched;
    let n = f64::from(ctx.n_nodes);
    let links = n * ctx.derive_geometry().neighbors;
    let g = ctx.pkt_rate;
    let e_rt = rx_energy_per_bit(prof) + tx_energy_per_bit(ctx.tx_range, prof);

    let occupancy = if links > 0.0 {
        (g * s.frame_len / links).min(1.0)
    } else {
        1.0
    };
    let idle = prof.p_idle * links * (1.0 - occupancy) * s.idle_window() / s.frame_len;

    let timing = prof.p_idle * g * 1.5 * s.guard;
    let sync = (1.0 / s.sync_interval) * 2.0 * links * e_rt * s.sync_len;
    let ack = g * s.ack_len * e_rt;
    let switching = 2.0 * links * (prof.e_on + prof.e_off);

    EnergyBreakdown::new(0.0, 0.0, idle, timing + sync + ack + switching)
}

/// Common-active-period category with an already solved collision probability.
pub fn cap_energy_with(
    ctx: &NetworkContext,
    prof: &RadioProfile,
    sol: &CollisionSolution,
) -> EnergyBreakdown {
    let k = &ctx.cap;
    let n = f64::from(ctx.n_nodes);
    let g = ctx.pkt_rate;
    let others = other_neighbors(ctx);
    let e_rx = rx_energy_per_bit(prof);
    let e_tx = tx_energy_per_bit(ctx.tx_range, prof);
    let per_bit_local = others * e_rx + e_tx;
    let p = sol.p;

    let collision = g * k.rts_len * per_bit_local * (p / (1.0 - p)) * k.duty_cycle;
    let overhearing = ctx.msg_len * e_rx * others * g;
    let busy = (ctx.msg_len + k.control_bits()) / ctx.bandwidth * g * ctx.coverage_ratio();
    let idle = n * prof.p_idle * (k.duty_cycle - busy).max(0.0);
    let overhead = g * k.control_bits() * per_bit_local
        + n * ((k.sync_len / k.sync_interval) * per_bit_local + prof.e_on + prof.e_off);

    EnergyBreakdown::new(collision, overhearing, idle, overhead)
}

/// Common-active-period category.
pub fn cap_energy(ctx: &NetworkContext, prof: &RadioProfile) -> Result<EnergyBreakdown, ModelError> {
    let sol = csma_collision_probability(ctx)?;
    Ok(cap_energy_with(ctx, prof, &sol))
}

/// Preamble-sampling category.
pub fn psp_energy(ctx: &NetworkContext, prof: &RadioProfile) -> EnergyBreakdown {
    let s = &ctx.psp;
    let n = f64::from(ctx.n_nodes);
    let g = ctx.pkt_rate;
    let others = other_neighbors(ctx);
    let e_rx = rx_energy_per_bit(prof);
    let e_tx = tx_energy_per_bit(ctx.tx_range, prof);
    let retries = expected_attempts_psa(psa_offered_load(ctx)) - 1.0;

    let collision = retries * (e_rx * (s.preamble_len / 2.0 + ctx.msg_len) + e_tx * (s.preamble_len + ctx.msg_len));
    let overhearing = s.check_dur * ctx.bandwidth * e_rx * others * g;
    let idle = n * prof.p_idle * s.check_dur * (1.0 / s.check_interval - g * ctx.coverage_ratio()).max(0.0);
    let overhead = g * (e_rx * s.preamble_len / 2.0 + e_tx * s.preamble_len)
        + n * (prof.e_on + prof.e_off) / s.check_interval;

    EnergyBreakdown::new(collision, overhearing, idle, overhead)
}
