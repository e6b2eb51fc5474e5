//! Combined performance function, per-category evaluation, ranking and sweeps.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::category::{CategoryId, BUILTIN};
use crate::context::{NetworkContext, Violation};
use crate::delay::{cap_delay_with, psp_delay, scheduled_delay, DelayEstimate};
use crate::energy::{
    cap_energy_with, csma_collision_probability, psp_energy, scheduled_energy, sparse_neighborhood,
    EnergyBreakdown,
};
use crate::error::ModelError;
use crate::radio::RadioProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger is better; placed in the numerator.
    Direct,
    /// Smaller is better; placed in the denominator.
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub id: String,
    pub value: f64,
    pub importance: f64,
    pub cost: f64,
    pub direction: Direction,
}

impl CriterionValue {
    pub fn inverse(id: &str, value: f64, weight: f64) -> Self {
        CriterionValue {
            id: id.to_string(),
            value,
            importance: weight,
            cost: 1.0,
            direction: Direction::Inverse,
        }
    }
}

/// Raw multipliers of energy (W) and delay (s). They absorb the units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            alpha: 10.0 / 11.0,
            beta: 1.0 / 11.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (field, x) in [("weights.alpha", self.alpha), ("weights.beta", self.beta)] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(Violation {
                    field: field.into(),
                    rule: "must be finite and >= 0".into(),
                });
            }
        }
        if v.is_empty() && self.alpha + self.beta <= 0.0 {
            v.push(Violation {
                field: "weights".into(),
                rule: "alpha + beta must be > 0 (degenerate CPF)".into(),
            });
        }
        v
    }

    pub fn scaled(&self, c: f64) -> Weights {
        Weights {
            alpha: c * self.alpha,
            beta: c * self.beta,
        }
    }
}

/// General form: weighted direct criteria over weighted inverse criteria.
/// With no direct criterion the numerator is the constant 1.
pub fn cpf_general(criteria: &[CriterionValue]) -> Result<f64, ModelError> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any_direct = false;
    for c in criteria {
        if !(c.value >= 0.0 && c.importance >= 0.0 && c.cost >= 0.0) {
            return Err(ModelError::Domain(format!(
                "criterion '{}' must have non-negative value, importance and cost",
                c.id
            )));
        }
        let term = c.importance * c.cost * c.value;
        match c.direction {
            Direction::Direct => {
                any_direct = true;
                num += term;
            }
            Direction::Inverse => den += term,
        }
    }
    if !any_direct {
        num = 1.0;
    }
    if !(den > 0.0) || !den.is_finite() {
        return Err(ModelError::DegenerateCpf { denominator: den });
    }
    Ok(num / den)
}

/// Energy/delay specialization, 1 / (alpha E + beta T).
pub fn cpf_energy_delay(energy: f64, delay: f64, w: &Weights) -> Result<f64, ModelError> {
    let den = w.alpha * energy + w.beta * delay;
    if !(den > 0.0) || !den.is_finite() {
        return Err(ModelError::DegenerateCpf { denominator: den });
    }
    Ok(1.0 / den)
}

/// Energy and delay of one category in one context.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryPerformance {
    pub energy: EnergyBreakdown,
    pub delay: DelayEstimate,
    pub collision_probability: Option<f64>,
    pub warnings: Vec<String>,
}

/// Plug-in evaluation for one category.
pub trait PerformanceModel: Send + Sync {
    fn evaluate(&self, ctx: &NetworkContext, prof: &RadioProfile) -> Result<CategoryPerformance, ModelError>;
}

fn neighborhood_warnings(ctx: &NetworkContext) -> Vec<String> {
    if sparse_neighborhood(ctx) {
        vec![format!(
            "expected neighborhood {:.4} < 1: N' - 1 clamped to 0",
            ctx.derive_geometry().neighbors
        )]
    } else {
        Vec::new()
    }
}

struct Scheduled;
struct CommonActive;
struct PreambleSampling;

impl PerformanceModel for Scheduled {
    fn evaluate(&self, ctx: &NetworkContext, prof: &RadioProfile) -> Result<CategoryPerformance, ModelError> {
        Ok(CategoryPerformance {
            energy: scheduled_energy(ctx, prof),
            delay: scheduled_delay(ctx),
            collision_probability: None,
            warnings: Vec::new(),
        })
    }
}

impl PerformanceModel for CommonActive {
    fn evaluate(&self, ctx: &NetworkContext, prof: &RadioProfile) -> Result<CategoryPerformance, ModelError> {
        let sol = csma_collision_probability(ctx)?;
        Ok(CategoryPerformance {
            energy: cap_energy_with(ctx, prof, &sol),
            delay: cap_delay_with(ctx, &sol),
            collision_probability: Some(sol.p),
            warnings: neighborhood_warnings(ctx),
        })
    }
}

impl PerformanceModel for PreambleSampling {
    fn evaluate(&self, ctx: &NetworkContext, prof: &RadioProfile) -> Result<CategoryPerformance, ModelError> {
        Ok(CategoryPerformance {
            energy: psp_energy(ctx, prof),
            delay: psp_delay(ctx),
            collision_probability: None,
            warnings: neighborhood_warnings(ctx),
        })
    }
}

/// Result of evaluating one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok {
        energy: EnergyBreakdown,
        delay: DelayEstimate,
        cpf: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        collision_probability: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
    },
    Error {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEvaluation {
    pub category: CategoryId,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl CategoryEvaluation {
    pub fn cpf(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Ok { cpf, .. } => Some(*cpf),
            Outcome::Error { .. } => None,
        }
    }

    pub fn energy(&self) -> Option<&EnergyBreakdown> {
        match &self.outcome {
            Outcome::Ok { energy, .. } => Some(energy),
            Outcome::Error { .. } => None,
        }
    }

    pub fn delay(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Ok { delay, .. } => Some(delay.seconds),
            Outcome::Error { .. } => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Ok { .. } => None,
            Outcome::Error { reason } => Some(reason),
        }
    }
}

/// Performance models keyed by category.
#[derive(Clone, Default)]
pub struct ModelSet {
    models: BTreeMap<CategoryId, Arc<dyn PerformanceModel>>,
}

impl std::fmt::Debug for ModelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.models.keys()).finish()
    }
}

impl ModelSet {
    pub fn builtin() -> Self {
        let mut set = ModelSet::default();
        set.register(CategoryId::scheduled(), Arc::new(Scheduled));
        set.register(CategoryId::common_active(), Arc::new(CommonActive));
        set.register(CategoryId::preamble_sampling(), Arc::new(PreambleSampling));
        set
    }

    pub fn register(&mut self, id: CategoryId, model: Arc<dyn PerformanceModel>) {
        self.models.insert(id, model);
    }

    pub fn contains(&self, id: &CategoryId) -> bool {
        self.models.contains_key(id)
    }

    /// Registered categories in tie-break order.
    pub fn categories(&self) -> Vec<CategoryId> {
        let mut ids: Vec<_> = self.models.keys().cloned().collect();
        ids.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        ids
    }

    /// Evaluates one category. Model failures are reported in the outcome.
    pub fn evaluate_one(
        &self,
        id: &CategoryId,
        ctx: &NetworkContext,
        prof: &RadioProfile,
        w: &Weights,
    ) -> CategoryEvaluation {
        let result = match self.models.get(id) {
            None => Err(ModelError::NoPerformanceModel(id.to_string())),
            Some(m) => m.evaluate(ctx, prof),
        };
        let outcome = result
            .and_then(|perf| {
                let cpf = cpf_energy_delay(perf.energy.total, perf.delay.seconds, w)?;
                Ok(Outcome::Ok {
                    energy: perf.energy,
                    delay: perf.delay,
                    cpf,
                    collision_probability: perf.collision_probability,
                    warnings: perf.warnings,
                })
            })
            .unwrap_or_else(|e| Outcome::Error { reason: e.to_string() });
        CategoryEvaluation {
            category: id.clone(),
            outcome,
        }
    }

    /// Validates the inputs, then evaluates every registered category.
    pub fn evaluate_all(
        &self,
        ctx: &NetworkContext,
        prof: &RadioProfile,
        w: &Weights,
    ) -> Result<Vec<CategoryEvaluation>, ModelError> {
        check_inputs(ctx, prof, w)?;
        Ok(self
            .categories()
            .iter()
            .map(|id| self.evaluate_one(id, ctx, prof, w))
            .collect())
    }
}

pub(crate) fn check_inputs(ctx: &NetworkContext, prof: &RadioProfile, w: &Weights) -> Result<(), ModelError> {
    let mut v = ctx.validate();
    v.extend(prof.validate());
    v.extend(w.validate());
    if v.is_empty() {
        Ok(())
    } else {
        Err(ModelError::InvalidContext(v))
    }
}

/// Evaluates the three built-in categories.
pub fn evaluate_all(
    ctx: &NetworkContext,
    prof: &RadioProfile,
    w: &Weights,
) -> Result<Vec<CategoryEvaluation>, ModelError> {
    ModelSet::builtin().evaluate_all(ctx, prof, w)
}

/// Evaluations of every category together with their ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub evaluations: Vec<CategoryEvaluation>,
    pub ranking: Ranking,
}

impl ModelSet {
    pub fn report(&self, ctx: &NetworkContext, prof: &RadioProfile, w: &Weights) -> Result<EvaluationReport, ModelError> {
        let evaluations = self.evaluate_all(ctx, prof, w)?;
        let ranking = rank(&evaluations);
        Ok(EvaluationReport { evaluations, ranking })
    }
}

/// Evaluates and ranks the built-in categories.
pub fn report(ctx: &NetworkContext, prof: &RadioProfile, w: &Weights) -> Result<EvaluationReport, ModelError> {
    ModelSet::builtin().report(ctx, prof, w)
}

/// Relative CPF difference below which two categories count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Successful evaluations ordered by CPF, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<CategoryId>,
    pub best: Option<CategoryId>,
    /// Categories tied with the best (including it) when there is more than one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tied: Vec<CategoryId>,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

pub fn rank(evals: &[CategoryEvaluation]) -> Ranking {
    let mut ok: Vec<(&CategoryId, f64)> = evals
        .iter()
        .filter_map(|e| e.cpf().map(|c| (&e.category, c)))
        .collect();
    ok.sort_by(|a, b| {
        if tied(a.1, b.1) {
            a.0.order_key().cmp(&b.0.order_key())
        } else {
            b.1.total_cmp(&a.1)
        }
    });
    let best = ok.first().map(|(id, _)| (*id).clone());
    let tied_with_best: Vec<CategoryId> = match ok.first() {
        Some(&(_, top)) => ok
            .iter()
            .filter(|(_, c)| tied(*c, top))
            .map(|(id, _)| (*id).clone())
            .collect(),
        None => Vec::new(),
    };
    Ranking {
        order: ok.iter().map(|(id, _)| (*id).clone()).collect(),
        best,
        tied: if tied_with_best.len() > 1 { tied_with_best } else { Vec::new() },
    }
}

/// Context field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PktRate,
    NNodes,
    NetworkRadius,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::PktRate => "pkt_rate",
            SweepAxis::NNodes => "n_nodes",
            SweepAxis::NetworkRadius => "network_radius",
        }
    }

    /// Substitutes `value` into a copy of `ctx`.
    pub fn apply(&self, ctx: &NetworkContext, value: f64) -> Result<NetworkContext, Vec<Violation>> {
        let mut out = ctx.clone();
        match self {
            SweepAxis::PktRate => out.pkt_rate = value,
            SweepAxis::NetworkRadius => out.network_radius = value,
            SweepAxis::NNodes => {
                if !(value.is_finite() && value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX)) {
                    return Err(vec![Violation {
                        field: "n_nodes".into(),
                        rule: "must be a whole number".into(),
                    }]);
                }
                out.n_nodes = value as u32;
            }
        }
        let v = out.validate();
        if v.is_empty() {
            Ok(out)
        } else {
            Err(v)
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pkt_rate" | "G" => Ok(SweepAxis::PktRate),
            "n_nodes" | "N" => Ok(SweepAxis::NNodes),
            "network_radius" | "R" => Ok(SweepAxis::NetworkRadius),
            _ => Err(format!("unknown sweep axis '{s}' (expected pkt_rate, n_nodes or network_radius)")),
        }
    }
}

/// One axis value and its evaluations, or the violations of the substituted context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evaluations: Vec<CategoryEvaluation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ModelSet {
    /// Evaluates every axis value independently; rows come back in input order.
    pub fn sweep(
        &self,
        ctx: &NetworkContext,
        prof: &RadioProfile,
        w: &Weights,
        axis: SweepAxis,
        values: &[f64],
    ) -> Result<Vec<SweepRow>, ModelError> {
        if values.is_empty() {
            return Err(ModelError::Domain("sweep needs at least one axis value".into()));
        }
        let mut fixed = prof.validate();
        fixed.extend(w.validate());
        if !fixed.is_empty() {
            return Err(ModelError::InvalidContext(fixed));
        }
        let cats = self.categories();
        Ok(values
            .par_iter()
            .map(|&x| match axis.apply(ctx, x) {
                Ok(c) => SweepRow {
                    axis_value: x,
                    evaluations: cats.iter().map(|id| self.evaluate_one(id, &c, prof, w)).collect(),
                    violations: Vec::new(),
                },
                Err(v) => SweepRow {
                    axis_value: x,
                    evaluations: Vec::new(),
                    violations: v,
                },
            })
            .collect())
    }
}

pub fn sweep(
    ctx: &NetworkContext,
    prof: &RadioProfile,
    w: &Weights,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepRow>, ModelError> {
    ModelSet::builtin().sweep(ctx, prof, w, axis, values)
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>, ModelError> {
    if steps < 2 {
        return Err(ModelError::Domain(format!("steps must be >= 2, got {steps}")));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(ModelError::Domain("sweep bounds must be finite".into()));
    }
    let n = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i == steps - 1 { stop } else { start + (stop - start) * i as f64 / n })
        .collect())
}

pub const CSV_HEADER: [&str; 9] = [
    "axis",
    "category",
    "collision",
    "overhearing",
    "idle",
    "overhead",
    "total_energy",
    "delay",
    "cpf",
];

/// Writes sweep rows as CSV, one line per (axis value, category).
///
/// Failed evaluations leave the numeric columns empty and put
/// `error:<reason>` in the cpf column. Rows whose substituted context is
/// invalid get one such line per category.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow], categories: &[CategoryId]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let axis = row.axis_value.to_string();
        if !row.violations.is_empty() {
            let reason = ModelError::InvalidContext(row.violations.clone()).to_string();
            for c in categories {
                w.write_record(error_record(&axis, c, &reason))?;
            }
            continue;
        }
        for e in &row.evaluations {
            match &e.outcome {
                Outcome::Ok { energy, delay, cpf, .. } => {
                    let rec = [
                        axis.clone(),
                        e.category.to_string(),
                        energy.collision.to_string(),
                        energy.overhearing.to_string(),
                        energy.idle_listening.to_string(),
                        energy.overhead.to_string(),
                        energy.total.to_string(),
                        delay.seconds.to_string(),
                        cpf.to_string(),
                    ];
                    w.write_record(&rec)?;
                }
                Outcome::Error { reason } => w.write_record(error_record(&axis, &e.category, reason))?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn error_record(axis: &str, cat: &CategoryId, reason: &str) -> Vec<String> {
    let mut rec = vec![axis.to_string(), cat.to_string()];
    rec.extend(std::iter::repeat_n(String::new(), 6));
    rec.push(format!("error:{reason}"));
    rec
}

/// Built-in category ids in tie-break order.
pub fn builtin_categories() -> Vec<CategoryId> {
    BUILTIN.iter().map(|s| CategoryId::new(*s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn general_single_pair() {
        let c = [
            CriterionValue {
                id: "throughput".into(),
                value: 1.0,
                importance: 1.0,
                cost: 1.0,
                direction: Direction::Direct,
            },
            CriterionValue::inverse("energy", 2.0, 1.0),
        ];
        assert_eq!(cpf_general(&c).unwrap(), 0.5);
    }

    #[test]
    fn general_is_homogeneous() {
        let base = vec![
            CriterionValue {
                id: "a".into(),
                value: 3.0,
                importance: 0.7,
                cost: 1.3,
                direction: Direction::Direct,
            },
            CriterionValue::inverse("b", 2.0, 0.4),
            CriterionValue::inverse("c", 5.0, 0.1),
        ];
        let scaled: Vec<_> = base
            .iter()
            .map(|c| CriterionValue {
                importance: c.importance * 7.5,
                ..c.clone()
            })
            .collect();
        let a = cpf_general(&base).unwrap();
        let b = cpf_general(&scaled).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn general_matches_energy_delay() {
        let w = Weights::default();
        let (e, t) = (0.37, 0.081);
        let g = cpf_general(&[
            CriterionValue::inverse("energy", e, w.alpha),
            CriterionValue::inverse("delay", t, w.beta),
        ])
        .unwrap();
        assert_eq!(g, cpf_energy_delay(e, t, &w).unwrap());
    }

    #[test]
    fn energy_delay_examples() {
        let half = Weights { alpha: 0.5, beta: 0.5 };
        assert_eq!(cpf_energy_delay(1.0, 1.0, &half).unwrap(), 1.0);
        let v = cpf_energy_delay(0.1, 0.1, &Weights::default()).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate() {
        let w = Weights { alpha: 1.0, beta: 0.0 };
        assert!(matches!(
            cpf_energy_delay(0.0, 5.0, &w),
            Err(ModelError::DegenerateCpf { .. })
        ));
        assert!(matches!(cpf_general(&[]), Err(ModelError::DegenerateCpf { .. })));
    }

    #[test]
    fn ties_follow_fixed_order() {
        let mk = |id: &str, cpf: f64| CategoryEvaluation {
            category: CategoryId::new(id),
            outcome: Outcome::Ok {
                energy: EnergyBreakdown::new(0.0, 0.0, 0.0, 1.0),
                delay: DelayEstimate {
                    seconds: 0.0,
                    category: CategoryId::new(id),
                },
                cpf,
                collision_probability: None,
                warnings: vec![],
            },
        };
        let r = rank(&[mk("PSP", 2.0), mk("CAP", 2.0), mk("ScP", 1.0)]);
        assert_eq!(r.best.unwrap().as_str(), "CAP");
        assert_eq!(r.tied.len(), 2);
        assert_eq!(r.order[2].as_str(), "ScP");
        let r = rank(&[mk("PSP", 2.0), mk("CAP", 1.0)]);
        assert!(r.tied.is_empty());
    }

    #[test]
    fn unregistered_category_reports_error() {
        let set = ModelSet::builtin();
        let e = set.evaluate_one(
            &CategoryId::new("HYB"),
            &NetworkContext::default(),
            &RadioProfile::default(),
            &Weights::default(),
        );
        assert!(e.error().unwrap().contains("no performance model"));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(1.0, 2.0, 5).unwrap();
        assert_eq!(v, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(linspace(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn sweep_axis_substitution() {
        let ctx = NetworkContext::default();
        assert!(SweepAxis::NNodes.apply(&ctx, 10.5).is_err());
        assert_eq!(SweepAxis::NNodes.apply(&ctx, 12.0).unwrap().n_nodes, 12);
        let v = SweepAxis::NetworkRadius.apply(&ctx, -1.0).unwrap_err();
        assert_eq!(v[0].field, "network_radius");
    }

    #[test]
    fn evaluation_json_shape() {
        let evals = evaluate_all(&NetworkContext::default(), &RadioProfile::default(), &Weights::default()).unwrap();
        let j = serde_json::to_value(&evals[0]).unwrap();
        assert_eq!(j["category"], "ScP");
        assert_eq!(j["status"], "ok");
        assert!(j["energy"]["total"].is_f64());
        let back: CategoryEvaluation = serde_json::from_value(j).unwrap();
        assert_eq!(back, evals[0]);
    }
}
