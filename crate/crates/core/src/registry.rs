//! Protocol registry, requirement filtering and category selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::CategoryId;
use crate::context::{NetworkContext, Violation};
use crate::cpf::{check_inputs, rank, CategoryEvaluation, ModelSet, Weights};
use crate::error::{join_violations, ModelError};
use crate::radio::RadioProfile;

const SEED: &str = include_str!("../data/seed-registry.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRecord {
    pub id: CategoryId,
    /// Protocol whose analysis stands in for the whole category.
    pub representative: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub id: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolRecord {
    pub name: String,
    pub category: CategoryId,
    #[serde(default)]
    pub satisfies: BTreeSet<String>,
    /// Requirements this protocol has been checked against, satisfied or not.
    #[serde(default)]
    pub reviewed_against: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub categories: Vec<CategoryRecord>,
    pub requirements: Vec<Requirement>,
    pub protocols: Vec<ProtocolRecord>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("malformed registry document at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid registry: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("protocol '{0}' already exists")]
    DuplicateProtocol(String),
    #[error("category '{0}' already exists")]
    DuplicateCategory(String),
    #[error("requirement '{0}' already exists")]
    DuplicateRequirement(String),
    #[error("unknown category '{0}'")]
    UnknownCategory(String),
    #[error("unknown requirement '{0}'")]
    UnknownRequirement(String),
    #[error("unknown protocol '{0}'")]
    UnknownProtocol(String),
    #[error("protocol '{protocol}' was already reviewed against '{requirement}'")]
    AlreadyReviewed { protocol: String, requirement: String },
    #[error("no satisfying category for requirements {0:?}")]
    NoSatisfyingCategory(Vec<String>),
    #[error("no evaluable category: {}", .0.join("; "))]
    NoEvaluableCategory(Vec<String>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl Registry {
    /// The shipped seed registry.
    pub fn seed() -> Registry {
        Registry::from_json(SEED).expect("seed registry is valid")
    }

    pub fn empty() -> Registry {
        Registry {
            note: None,
            categories: Vec::new(),
            requirements: Vec::new(),
            protocols: Vec::new(),
        }
    }

    /// Parses and validates a registry document.
    pub fn from_json(doc: &str) -> Result<Registry, RegistryError> {
        let de = &mut serde_json::Deserializer::from_str(doc);
        let reg: Registry = serde_path_to_error::deserialize(de).map_err(|e| RegistryError::Malformed {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let v = reg.validate();
        if v.is_empty() {
            Ok(reg)
        } else {
            Err(RegistryError::Invalid(v))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    pub fn load(path: &Path) -> Result<Registry, RegistryError> {
        let doc = fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Registry::from_json(&doc)
    }

    /// Writes atomically: a temp file in the target directory renamed over the target.
    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        let io = |source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        };
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(self.to_json().as_bytes()).map_err(io)?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    /// Every broken invariant, with a field path.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut bad = |field: String, rule: String| v.push(Violation { field, rule });

        let mut cats = BTreeSet::new();
        for (i, c) in self.categories.iter().enumerate() {
            if c.id.as_str().is_empty() {
                bad(format!("categories[{i}].id"), "must not be empty".into());
            }
            if !cats.insert(c.id.clone()) {
                bad(format!("categories[{i}].id"), format!("duplicate category '{}'", c.id));
            }
        }
        let mut reqs = BTreeSet::new();
        for (i, r) in self.requirements.iter().enumerate() {
            if r.id.is_empty() {
                bad(format!("requirements[{i}].id"), "must not be empty".into());
            }
            if !reqs.insert(r.id.as_str()) {
                bad(format!("requirements[{i}].id"), format!("duplicate requirement '{}'", r.id));
            }
        }
        let mut names = BTreeSet::new();
        for (i, p) in self.protocols.iter().enumerate() {
            if p.name.is_empty() {
                bad(format!("protocols[{i}].name"), "must not be empty".into());
            }
            if !names.insert(p.name.as_str()) {
                bad(format!("protocols[{i}].name"), format!("duplicate protocol '{}'", p.name));
            }
            if !cats.contains(&p.category) {
                bad(format!("protocols[{i}].category"), format!("unknown category '{}'", p.category));
            }
            for r in &p.satisfies {
                if !reqs.contains(r.as_str()) {
                    bad(format!("protocols[{i}].satisfies"), format!("unknown requirement '{r}'"));
                }
                if !p.reviewed_against.contains(r) {
                    bad(
                        format!("protocols[{i}].satisfies"),
                        format!("'{r}' is satisfied but not listed in reviewed_against"),
                    );
                }
            }
            for r in &p.reviewed_against {
                if !reqs.contains(r.as_str()) {
                    bad(format!("protocols[{i}].reviewed_against"), format!("unknown requirement '{r}'"));
                }
            }
        }
        v
    }

    pub fn category(&self, id: &CategoryId) -> Option<&CategoryRecord> {
        self.categories.iter().find(|c| &c.id == id)
    }

    pub fn has_requirement(&self, id: &str) -> bool {
        self.requirements.iter().any(|r| r.id == id)
    }

    pub fn add_protocol(&self, rec: ProtocolRecord) -> Result<Registry, RegistryError> {
        if self.protocols.iter().any(|p| p.name == rec.name) {
            return Err(RegistryError::DuplicateProtocol(rec.name));
        }
        if self.category(&rec.category).is_none() {
            return Err(RegistryError::UnknownCategory(rec.category.to_string()));
        }
        let mut next = self.clone();
        next.protocols.push(rec);
        let v = next.validate();
        if !v.is_empty() {
            return Err(RegistryError::Invalid(v));
        }
        Ok(next)
    }

    pub fn add_category(&self, id: CategoryId, representative: &str, note: &str) -> Result<Registry, RegistryError> {
        if self.category(&id).is_some() {
            return Err(RegistryError::DuplicateCategory(id.to_string()));
        }
        if id.as_str().is_empty() {
            return Err(RegistryError::Invalid(vec![Violation {
                field: "id".into(),
                rule: "must not be empty".into(),
            }]));
        }
        let mut next = self.clone();
        next.categories.push(CategoryRecord {
            id,
            representative: representative.to_string(),
            note: note.to_string(),
        });
        Ok(next)
    }

    /// Adds a requirement and returns the protocols to review against it,
    /// ordered by [`review_worklist`].
    pub fn add_requirement(&self, r: Requirement) -> Result<(Registry, Vec<String>), RegistryError> {
        if self.has_requirement(&r.id) {
            return Err(RegistryError::DuplicateRequirement(r.id));
        }
        if r.id.is_empty() {
            return Err(RegistryError::Invalid(vec![Violation {
                field: "id".into(),
                rule: "must not be empty".into(),
            }]));
        }
        let mut next = self.clone();
        next.requirements.push(r);
        let worklist = review_worklist(&next);
        Ok((next, worklist))
    }

    /// Records the outcome of reviewing one protocol against one requirement.
    /// A pair can be reviewed only once.
    pub fn record_review(&self, protocol: &str, requirement: &str, satisfied: bool) -> Result<Registry, RegistryError> {
        if !self.has_requirement(requirement) {
            return Err(RegistryError::UnknownRequirement(requirement.to_string()));
        }
        let mut next = self.clone();
        let p = next
            .protocols
            .iter_mut()
            .find(|p| p.name == protocol)
            .ok_or_else(|| RegistryError::UnknownProtocol(protocol.to_string()))?;
        if !p.reviewed_against.insert(requirement.to_string()) {
            return Err(RegistryError::AlreadyReviewed {
                protocol: protocol.to_string(),
                requirement: requirement.to_string(),
            });
        }
        if satisfied {
            p.satisfies.insert(requirement.to_string());
        }
        Ok(next)
    }

    /// Protocols not yet reviewed against `requirement`.
    pub fn pending_reviews(&self, requirement: &str) -> Vec<&ProtocolRecord> {
        self.protocols
            .iter()
            .filter(|p| !p.reviewed_against.contains(requirement))
            .collect()
    }

    fn check_requirements<'a>(&self, req: impl IntoIterator<Item = &'a String>) -> Result<(), RegistryError> {
        for r in req {
            if !self.has_requirement(r) {
                return Err(RegistryError::UnknownRequirement(r.clone()));
            }
        }
        Ok(())
    }

    /// Protocols of `category` satisfying every requirement in `req`, in registry order.
    pub fn satisfying_protocols(&self, category: &CategoryId, req: &BTreeSet<String>) -> Vec<&ProtocolRecord> {
        self.protocols
            .iter()
            .filter(|p| &p.category == category && req.is_subset(&p.satisfies))
            .collect()
    }
}

/// A (category, requirement combination) pair a protocol can vouch for.
type Combination = (CategoryId, Vec<String>);

/// Combinations covered by one protocol: every subset of what it satisfies,
/// including the empty one, within its category.
pub fn protocol_combinations(p: &ProtocolRecord) -> BTreeSet<Combination> {
    let reqs: Vec<&String> = p.satisfies.iter().collect();
    let k = reqs.len().min(20);
    (0u32..(1u32 << k))
        .map(|mask| {
            let subset = (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| reqs[i].clone())
                .collect();
            (p.category.clone(), subset)
        })
        .collect()
}

/// Review order for a newly added requirement: greedily take the protocol
/// covering the most combinations not yet covered by the protocols before
/// it, ties by name. Every protocol appears once.
pub fn review_worklist(reg: &Registry) -> Vec<String> {
    let mut remaining: BTreeMap<&str, BTreeSet<Combination>> = reg
        .protocols
        .iter()
        .map(|p| (p.name.as_str(), protocol_combinations(p)))
        .collect();
    let mut covered: BTreeSet<Combination> = BTreeSet::new();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        // BTreeMap iterates by name, so the first maximum wins ties
        let mut best: Option<(&str, usize)> = None;
        for (name, combos) in &remaining {
            let gain = combos.difference(&covered).count();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((name, gain));
            }
        }
        let (name, _) = best.expect("non-empty");
        let combos = remaining.remove(name).expect("present");
        covered.extend(combos);
        order.push(name.to_string());
    }
    order
}

/// Categories with at least one protocol satisfying every requirement in
/// `req`, in registry order. An empty `req` selects every category.
pub fn satisfying_categories(reg: &Registry, req: &BTreeSet<String>) -> Result<Vec<CategoryId>, RegistryError> {
    reg.check_requirements(req)?;
    Ok(reg
        .categories
        .iter()
        .filter(|c| req.is_empty() || !reg.satisfying_protocols(&c.id, req).is_empty())
        .map(|c| c.id.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Evaluable categories passing the requirement filter, best first.
    pub feasible_categories: Vec<CategoryId>,
    pub best_category: CategoryId,
    pub protocols: Vec<String>,
    /// One evaluation per category passing the requirement filter.
    pub evaluations: Vec<CategoryEvaluation>,
    /// Categories tied with the best on CPF, when there is more than one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tied: Vec<CategoryId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Filters categories by `req`, ranks them by CPF and returns the satisfying
/// protocols of the best one.
pub fn select_with(
    models: &ModelSet,
    reg: &Registry,
    ctx: &NetworkContext,
    prof: &RadioProfile,
    req: &BTreeSet<String>,
    w: &Weights,
) -> Result<SelectionResult, RegistryError> {
    check_inputs(ctx, prof, w)?;
    let psi = satisfying_categories(reg, req)?;
    if psi.is_empty() {
        return Err(RegistryError::NoSatisfyingCategory(req.iter().cloned().collect()));
    }
    let evaluations: Vec<CategoryEvaluation> =
        psi.iter().map(|id| models.evaluate_one(id, ctx, prof, w)).collect();
    let warnings: Vec<String> = evaluations
        .iter()
        .filter_map(|e| e.error().map(|r| format!("category {} excluded: {r}", e.category)))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let ranking = rank(&evaluations);
    let best = ranking
        .best
        .clone()
        .ok_or_else(|| RegistryError::NoEvaluableCategory(warnings.clone()))?;
    let protocols = reg
        .satisfying_protocols(&best, req)
        .into_iter()
        .map(|p| p.name.clone())
        .collect();
    Ok(SelectionResult {
        feasible_categories: ranking.order,
        best_category: best,
        protocols,
        evaluations,
        tied: ranking.tied,
        warnings,
    })
}

/// [`select_with`] over the built-in category models.
pub fn select(
    reg: &Registry,
    ctx: &NetworkContext,
    prof: &RadioProfile,
    req: &BTreeSet<String>,
    w: &Weights,
) -> Result<SelectionResult, RegistryError> {
    select_with(&ModelSet::builtin(), reg, ctx, prof, req, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn example_requirements() -> BTreeSet<String> {
        set(&["overhearing-avoidance", "distributed"])
    }

    #[test]
    fn seed_is_valid() {
        let r = Registry::seed();
        assert_eq!(r.categories.len(), 3);
        assert!(r.note.as_deref().unwrap().contains("Partial reconstruction"));
    }

    #[test]
    fn example_filter() {
        let psi = satisfying_categories(&Registry::seed(), &example_requirements()).unwrap();
        assert_eq!(psi, vec![CategoryId::scheduled(), CategoryId::preamble_sampling()]);
    }

    #[test]
    fn empty_requirements_keep_all() {
        let psi = satisfying_categories(&Registry::seed(), &BTreeSet::new()).unwrap();
        assert_eq!(psi.len(), 3);
    }

    #[test]
    fn unknown_requirement_named() {
        let err = satisfying_categories(&Registry::seed(), &set(&["mobility"])).unwrap_err();
        assert!(err.to_string().contains("mobility"));
    }

    #[test]
    fn unsatisfiable_combination() {
        let reg = Registry::seed()
            .add_requirement(Requirement {
                id: "mobility".into(),
                description: String::new(),
            })
            .unwrap()
            .0;
        let psi = satisfying_categories(&reg, &set(&["mobility"])).unwrap();
        assert!(psi.is_empty());
        let err = select(
            &reg,
            &NetworkContext::default(),
            &RadioProfile::default(),
            &set(&["mobility"]),
            &Weights::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RegistryError::NoSatisfyingCategory(_)));
    }

    #[test]
    fn add_protocol_rules() {
        let reg = Registry::seed();
        let rec = ProtocolRecord {
            name: "B-MAC".into(),
            category: CategoryId::preamble_sampling(),
            satisfies: set(&["distributed"]),
            reviewed_against: set(&["distributed"]),
        };
        let next = reg.add_protocol(rec.clone()).unwrap();
        assert_eq!(next.protocols.len(), reg.protocols.len() + 1);
        assert_eq!(&next.protocols[..reg.protocols.len()], &reg.protocols[..]);
        assert!(matches!(next.add_protocol(rec.clone()), Err(RegistryError::DuplicateProtocol(_))));
        let orphan = ProtocolRecord {
            name: "X".into(),
            category: CategoryId::new("HYB"),
            ..rec
        };
        assert!(matches!(reg.add_protocol(orphan), Err(RegistryError::UnknownCategory(_))));
    }

    #[test]
    fn add_category_rules() {
        let reg = Registry::seed();
        assert!(matches!(
            reg.add_category(CategoryId::scheduled(), "TSMP", ""),
            Err(RegistryError::DuplicateCategory(_))
        ));
        let next = reg.add_category(CategoryId::new("HYB"), "Z-MAC", "hybrid").unwrap();
        assert!(next.category(&CategoryId::new("HYB")).is_some());
    }

    #[test]
    fn category_without_model_is_excluded_with_warning() {
        let reg = Registry::seed()
            .add_category(CategoryId::new("HYB"), "Z-MAC", "")
            .unwrap()
            .add_protocol(ProtocolRecord {
                name: "Z-MAC".into(),
                category: CategoryId::new("HYB"),
                satisfies: example_requirements(),
                reviewed_against: example_requirements(),
            })
            .unwrap();
        let res = select(
            &reg,
            &NetworkContext::default(),
            &RadioProfile::default(),
            &example_requirements(),
            &Weights::default(),
        )
        .unwrap();
        assert_eq!(res.evaluations.len(), 3);
        assert!(!res.feasible_categories.contains(&CategoryId::new("HYB")));
        assert!(res.warnings[0].contains("no performance model"));
    }

    #[test]
    fn duplicate_requirement() {
        let reg = Registry::seed();
        let r = Requirement {
            id: "distributed".into(),
            description: String::new(),
        };
        assert!(matches!(reg.add_requirement(r), Err(RegistryError::DuplicateRequirement(_))));
    }

    #[test]
    fn empty_registry_has_empty_worklist() {
        let (_, w) = Registry::empty()
            .add_requirement(Requirement {
                id: "x".into(),
                description: String::new(),
            })
            .unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn review_recording() {
        let (reg, work) = Registry::seed()
            .add_requirement(Requirement {
                id: "mobility".into(),
                description: String::new(),
            })
            .unwrap();
        assert_eq!(work.len(), 6);
        assert_eq!(reg.pending_reviews("mobility").len(), 6);
        let reg = reg.record_review("STEM", "mobility", true).unwrap();
        assert!(reg.protocols.iter().find(|p| p.name == "STEM").unwrap().satisfies.contains("mobility"));
        assert!(matches!(
            reg.record_review("STEM", "mobility", false),
            Err(RegistryError::AlreadyReviewed { .. })
        ));
        assert_eq!(reg.pending_reviews("mobility").len(), 5);
    }

    #[test]
    fn round_trip() {
        let reg = Registry::seed();
        assert_eq!(Registry::from_json(&reg.to_json()).unwrap(), reg);
    }

    #[test]
    fn dangling_category_reference() {
        let doc = r#"{"categories":[],"requirements":[],"protocols":[{"name":"A","category":"ScP"}]}"#;
        let err = Registry::from_json(doc).unwrap_err();
        assert!(err.to_string().contains("protocols[0].category"));
    }

    #[test]
    fn unknown_field_has_path() {
        let doc = r#"{"categories":[{"id":"ScP","representative":"TSMP","colour":"red"}],"requirements":[],"protocols":[]}"#;
        match Registry::from_json(doc).unwrap_err() {
            RegistryError::Malformed { path, message } => {
                assert_eq!(path, "categories[0].colour");
                assert!(message.contains("colour"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn satisfied_must_be_reviewed() {
        let doc = r#"{"categories":[{"id":"ScP","representative":"TSMP"}],"requirements":[{"id":"a"}],
            "protocols":[{"name":"A","category":"ScP","satisfies":["a"]}]}"#;
        let err = Registry::from_json(doc).unwrap_err();
        assert!(err.to_string().contains("reviewed_against"));
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reg.json");
        let reg = Registry::seed();
        reg.save(&path).unwrap();
        assert_eq!(Registry::load(&path).unwrap(), reg);
    }
}
