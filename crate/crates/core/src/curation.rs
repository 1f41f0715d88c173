//! Dataset curation: molecule standardization, duplicate removal,
//! instruction-record emission, scaffold-aware splitting, and quality
//! control.

use crate::molgraph::{parse_smiles, BondOrder, MoleculeGraph};
use crate::routes;
use crate::validity;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CurationError {
    #[error("standardization conflict: {0}")]
    StandardizationConflict(String),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    RatioError((f64, f64, f64)),
    #[error("record {id}: {reason}")]
    Record { id: String, reason: String },
}

/// The eight instruction-template families.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    PropertyPrediction,
    StructureOptimization,
    SimilarityDesign,
    ScaffoldHopping,
    ForwardSynthesis,
    Retrosynthesis,
    ReactionPrediction,
    MechanismElucidation,
}

impl TaskCategory {
    pub fn all() -> [TaskCategory; 8] {
        [
            TaskCategory::PropertyPrediction,
            TaskCategory::StructureOptimization,
            TaskCategory::SimilarityDesign,
            TaskCategory::ScaffoldHopping,
            TaskCategory::ForwardSynthesis,
            TaskCategory::Retrosynthesis,
            TaskCategory::ReactionPrediction,
            TaskCategory::MechanismElucidation,
        ]
    }

    /// Families whose records hinge on a reaction rather than one molecule.
    pub fn is_reaction_task(&self) -> bool {
        matches!(
            self,
            TaskCategory::ForwardSynthesis
                | TaskCategory::Retrosynthesis
                | TaskCategory::ReactionPrediction
                | TaskCategory::MechanismElucidation
        )
    }
}

/// One curated example. `molecules` and `reaction` carry the raw notation;
/// the `key_*` fields are canonical and filled by `prepare_record`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub task_category: TaskCategory,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    #[serde(default)]
    pub output: String,
    #[serde(default)]
    pub molecules: Vec<String>,
    #[serde(default)]
    pub reaction: Option<String>,
    #[serde(default)]
    pub properties: BTreeMap<String, f64>,
    #[serde(default)]
    pub key_molecules: Vec<String>,
    #[serde(default)]
    pub key_product: Option<String>,
}

/// Standardizes every molecule field and fills the canonical keys.
pub fn prepare_record(mut rec: DatasetRecord) -> Result<DatasetRecord, CurationError> {
    let mut keys = Vec::new();
    for raw in &rec.molecules {
        let g = parse_smiles(raw).map_err(|e| CurationError::Record {
            id: rec.id.clone(),
            reason: format!("molecule '{raw}': {e}"),
        })?;
        keys.push(standardize(&g)?.canonical_smiles());
    }
    rec.key_molecules = keys;
    if let Some(rxn_text) = &rec.reaction {
        let rxn = routes::parse_reaction(rxn_text).map_err(|e| CurationError::Record {
            id: rec.id.clone(),
            reason: e.to_string(),
        })?;
        if let Some(product) = rxn.products.first() {
            rec.key_product = Some(standardize(product)?.canonical_smiles());
        }
    }
    Ok(rec)
}

/// Functional-group normalization, charge neutralization for simple
/// protonation states, the fixed tautomer transforms, then
/// canonicalization. Idempotent: the output reparses from its own canonical
/// string.
pub fn standardize(g: &MoleculeGraph) -> Result<MoleculeGraph, CurationError> {
    // Fast path: when no transform can fire there is no choice point to
    // anchor, so one canonicalization suffices.
    if !may_transform(g) {
        let canonical = g.canonical_smiles();
        return Ok(parse_smiles(&canonical).expect("canonical output reparses"));
    }
    let mut probe = g.perceive_rings();
    if let Ok(upgraded) = probe.perceive_aromaticity() {
        probe = upgraded;
    }
    if !apply_transforms(&mut probe.clone()) {
        let canonical = probe.canonical_smiles();
        return Ok(parse_smiles(&canonical).expect("canonical output reparses"));
    }

    // Canonical atom order first, so transform choice points are
    // independent of how the input was written.
    let mut work = parse_smiles(&g.canonical_smiles())
        .expect("canonical output reparses")
        .perceive_rings();
    if let Ok(upgraded) = work.perceive_aromaticity() {
        work = upgraded;
    }
    let before_issues = valence_issue_count(&work);
    apply_transforms(&mut work);
    let after_issues = valence_issue_count(&work);
    if after_issues > before_issues {
        return Err(CurationError::StandardizationConflict(
            "transform introduced a valence violation".into(),
        ));
    }
    let canonical = work.canonical_smiles();
    Ok(parse_smiles(&canonical).expect("canonical output reparses"))
}

/// Cheap structural screen: can any standardization transform possibly
/// apply? Charges, cumulated N=N, nitro-shaped N(=O)(=O), and hydroxyl-like
/// oxygens next to unsaturation or aromatic carbon are the only triggers.
fn may_transform(g: &MoleculeGraph) -> bool {
    if g.atoms.iter().any(|a| a.charge != 0) {
        return true;
    }
    for (i, atom) in g.atoms.iter().enumerate() {
        match atom.element {
            crate::Element::NITROGEN => {
                let doubles = g
                    .bonds_of(i)
                    .iter()
                    .filter(|b| b.order == BondOrder::Double)
                    .count();
                if doubles >= 2 {
                    return true;
                }
            }
            crate::Element::OXYGEN => {
                if g.degree(i) != 1 {
                    continue;
                }
                let bond = g.bonds_of(i)[0];
                if bond.order != BondOrder::Single {
                    continue;
                }
                let c = bond.other(i);
                let ca = &g.atoms[c];
                if ca.element != crate::Element::CARBON {
                    continue;
                }
                if ca.aromatic
                    || g.bonds_of(c).iter().any(|b| b.order == BondOrder::Double)
                {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

/// Runs the transform list to fixpoint; true when anything fired.
fn apply_transforms(work: &mut MoleculeGraph) -> bool {
    let mut any = false;
    for _ in 0..64 {
        let mut changed = false;
        changed |= normalize_nitro(work);
        changed |= normalize_azide(work);
        changed |= normalize_sulfoxide(work);
        changed |= neutralize_carboxylate(work);
        changed |= neutralize_ammonium(work);
        changed |= enol_to_keto(work);
        changed |= hydroxypyridine_to_pyridone(work);
        any |= changed;
        if !changed {
            break;
        }
    }
    any
}

fn valence_issue_count(g: &MoleculeGraph) -> usize {
    validity::check_valences(&g.assign_implicit_hydrogens()).len()
}

fn bond_mut(g: &mut MoleculeGraph, a: usize, b: usize) -> &mut crate::molgraph::Bond {
    g.bonds
        .iter_mut()
        .find(|bo| (bo.a == a && bo.b == b) || (bo.a == b && bo.b == a))
        .expect("bond exists")
}

/// Drops bracket-only state so hydrogens become implicit again.
fn unbracket(g: &mut MoleculeGraph, i: usize) {
    g.atoms[i].explicit_h = None;
    g.atoms[i].implicit_h = 0;
}

/// N(=O)=O written neutral becomes the charge-separated nitro form.
fn normalize_nitro(g: &mut MoleculeGraph) -> bool {
    for n in 0..g.atoms.len() {
        let atom = &g.atoms[n];
        if atom.element != crate::Element::NITROGEN || atom.charge != 0 {
            continue;
        }
        let double_o: Vec<usize> = g
            .bonds_of(n)
            .iter()
            .filter(|b| b.order == BondOrder::Double)
            .map(|b| b.other(n))
            .filter(|&o| {
                g.atoms[o].element == crate::Element::OXYGEN
                    && g.atoms[o].charge == 0
                    && g.degree(o) == 1
            })
            .collect();
        if double_o.len() == 2 {
            let o = *double_o.iter().min().unwrap();
            g.atoms[n].charge = 1;
            g.atoms[o].charge = -1;
            unbracket(g, o);
            bond_mut(g, n, o).order = BondOrder::Single;
            return true;
        }
    }
    false
}

/// R-N=N=N written neutral becomes R-N=[N+]=[N-].
fn normalize_azide(g: &mut MoleculeGraph) -> bool {
    for center in 0..g.atoms.len() {
        let atom = &g.atoms[center];
        if atom.element != crate::Element::NITROGEN || atom.charge != 0 {
            continue;
        }
        let double_n: Vec<usize> = g
            .bonds_of(center)
            .iter()
            .filter(|b| b.order == BondOrder::Double)
            .map(|b| b.other(center))
            .filter(|&o| g.atoms[o].element == crate::Element::NITROGEN)
            .collect();
        if double_n.len() != 2 || g.degree(center) != 2 {
            continue;
        }
        let terminal = double_n
            .iter()
            .copied()
            .find(|&o| g.degree(o) == 1 && g.atoms[o].charge == 0);
        if let Some(t) = terminal {
            g.atoms[center].charge = 1;
            g.atoms[t].charge = -1;
            unbracket(g, t);
            return true;
        }
    }
    false
}

/// Charge-separated [S+]-[O-] collapses to the neutral S=O form.
fn normalize_sulfoxide(g: &mut MoleculeGraph) -> bool {
    for s in 0..g.atoms.len() {
        if g.atoms[s].element != crate::Element::SULFUR || g.atoms[s].charge != 1 {
            continue;
        }
        let o = g
            .bonds_of(s)
            .iter()
            .filter(|b| b.order == BondOrder::Single)
            .map(|b| b.other(s))
            .find(|&o| {
                g.atoms[o].element == crate::Element::OXYGEN
                    && g.atoms[o].charge == -1
                    && g.degree(o) == 1
            });
        if let Some(o) = o {
            g.atoms[s].charge = 0;
            g.atoms[o].charge = 0;
            unbracket(g, o);
            bond_mut(g, s, o).order = BondOrder::Double;
            return true;
        }
    }
    false
}

/// C(=O)[O-] becomes the free acid when the neutral oxygen is legal.
fn neutralize_carboxylate(g: &mut MoleculeGraph) -> bool {
    for o in 0..g.atoms.len() {
        let atom = &g.atoms[o];
        if atom.element != crate::Element::OXYGEN
            || atom.charge != -1
            || atom.isotope.is_some()
            || g.degree(o) != 1
        {
            continue;
        }
        let carbon = g.bonds_of(o)[0].other(o);
        if g.atoms[carbon].element != crate::Element::CARBON {
            continue;
        }
        let has_carbonyl = g.bonds_of(carbon).iter().any(|b| {
            b.order == BondOrder::Double
                && g.atoms[b.other(carbon)].element == crate::Element::OXYGEN
        });
        if has_carbonyl {
            g.atoms[o].charge = 0;
            unbracket(g, o);
            return true;
        }
    }
    false
}

/// Protonated amines lose one hydrogen; quaternary nitrogen stays charged.
fn neutralize_ammonium(g: &mut MoleculeGraph) -> bool {
    for n in 0..g.atoms.len() {
        let atom = &g.atoms[n];
        if atom.element != crate::Element::NITROGEN || atom.charge != 1 || atom.aromatic {
            continue;
        }
        let h = atom.total_h();
        if h == 0 {
            continue;
        }
        g.atoms[n].charge = 0;
        g.atoms[n].explicit_h = Some(h - 1);
        return true;
    }
    false
}

/// Simple enol C=C-OH rearranges to the ketone.
fn enol_to_keto(g: &mut MoleculeGraph) -> bool {
    let assigned = g.assign_implicit_hydrogens();
    for o in 0..g.atoms.len() {
        let atom = &g.atoms[o];
        if atom.element != crate::Element::OXYGEN
            || atom.charge != 0
            || atom.aromatic
            || g.degree(o) != 1
            || assigned.atoms[o].total_h() == 0
        {
            continue;
        }
        let bond = g.bonds_of(o)[0];
        if bond.order != BondOrder::Single {
            continue;
        }
        let c2 = bond.other(o);
        if g.atoms[c2].element != crate::Element::CARBON || g.atoms[c2].aromatic {
            continue;
        }
        let c1 = g
            .bonds_of(c2)
            .iter()
            .filter(|b| b.order == BondOrder::Double)
            .map(|b| b.other(c2))
            .find(|&c1| g.atoms[c1].element == crate::Element::CARBON && !g.atoms[c1].aromatic);
        if let Some(c1) = c1 {
            unbracket(g, o);
            bond_mut(g, o, c2).order = BondOrder::Double;
            bond_mut(g, c1, c2).order = BondOrder::Single;
            return true;
        }
    }
    false
}

/// 2-hydroxypyridine tautomerizes to 2-pyridone.
fn hydroxypyridine_to_pyridone(g: &mut MoleculeGraph) -> bool {
    let assigned = g.assign_implicit_hydrogens();
    for o in 0..g.atoms.len() {
        let atom = &g.atoms[o];
        if atom.element != crate::Element::OXYGEN
            || atom.charge != 0
            || atom.aromatic
            || g.degree(o) != 1
            || assigned.atoms[o].total_h() == 0
        {
            continue;
        }
        let bond = g.bonds_of(o)[0];
        if bond.order != BondOrder::Single {
            continue;
        }
        let c = bond.other(o);
        if !(g.atoms[c].element == crate::Element::CARBON && g.atoms[c].aromatic) {
            continue;
        }
        let n = g
            .bonds_of(c)
            .iter()
            .filter(|b| b.order == BondOrder::Aromatic)
            .map(|b| b.other(c))
            .find(|&n| {
                let na = &g.atoms[n];
                na.element == crate::Element::NITROGEN
                    && na.aromatic
                    && na.charge == 0
                    && assigned.atoms[n].total_h() == 0
                    && g.degree(n) == 2
            });
        if let Some(n) = n {
            unbracket(g, o);
            bond_mut(g, o, c).order = BondOrder::Double;
            g.atoms[n].explicit_h = Some(1);
            return true;
        }
    }
    false
}

/// Two records are duplicates when category, canonical key set, and
/// whitespace-normalized instruction coincide. The first occurrence wins.
pub fn deduplicate(records: Vec<DatasetRecord>) -> (Vec<DatasetRecord>, usize) {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut kept = Vec::new();
    let mut removed = 0usize;
    for rec in records {
        let mut keys = rec.key_molecules.clone();
        if let Some(p) = &rec.key_product {
            keys.push(p.clone());
        }
        keys.sort();
        let instruction_norm = rec.instruction.split_whitespace().collect::<Vec<_>>().join(" ");
        let fingerprint = format!("{:?}|{}|{}", rec.task_category, keys.join("."), instruction_norm);
        if seen.insert(fingerprint) {
            kept.push(rec);
        } else {
            removed += 1;
        }
    }
    (kept, removed)
}

/// The serialized three-field shape, in fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

/// Serializes exactly instruction/input/output, in that order, as one JSON
/// line. Byte-deterministic for fixed input.
pub fn emit_instruction_record(rec: &DatasetRecord) -> String {
    let record = InstructionRecord {
        instruction: rec.instruction.clone(),
        input: rec.input.clone(),
        output: rec.output.clone(),
    };
    serde_json::to_string(&record).expect("instruction record serializes")
}

pub fn parse_instruction_record(line: &str) -> Result<InstructionRecord, serde_json::Error> {
    serde_json::from_str(line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn all() -> [Split; 3] {
        [Split::Train, Split::Validation, Split::Test]
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub splits: BTreeMap<String, Split>,
    pub group_keys: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut counts = BTreeMap::new();
        for split in Split::all() {
            counts.insert(split, 0);
        }
        for split in self.splits.values() {
            *counts.get_mut(split).unwrap() += 1;
        }
        counts
    }
}

/// Group key: reaction records group by canonical product; molecule records
/// by Bemis-Murcko scaffold; acyclic molecules by their own canonical
/// SMILES; records with no structure by id.
pub fn group_key(rec: &DatasetRecord) -> String {
    if let Some(product) = &rec.key_product {
        return format!("product:{product}");
    }
    if let Some(first) = rec.key_molecules.first() {
        let scaffold = parse_smiles(first)
            .map(|g| g.bemis_murcko_scaffold())
            .ok();
        match scaffold {
            Some(s) if !s.is_empty => format!("scaffold:{}", s.key()),
            _ => format!("mol:{first}"),
        }
    } else {
        format!("id:{}", rec.id)
    }
}

/// Greedy grouped split: groups sorted by size descending (ties by key)
/// are assigned to the split with the largest remaining deficit. Run
/// independently per task category, so the category mix is stratified.
/// Deterministic for a fixed seed; record order never matters because
/// groups are formed from sorted keys.
pub fn scaffold_split(
    records: &[DatasetRecord],
    ratios: (f64, f64, f64),
    _seed: u64,
) -> Result<SplitAssignment, CurationError> {
    let (tr, va, te) = ratios;
    if tr <= 0.0 || va <= 0.0 || te <= 0.0 || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(CurationError::RatioError(ratios));
    }
    let mut by_category: BTreeMap<TaskCategory, Vec<&DatasetRecord>> = BTreeMap::new();
    for rec in records {
        by_category.entry(rec.task_category).or_default().push(rec);
    }

    let mut splits = BTreeMap::new();
    let mut group_keys = BTreeMap::new();
    let mut warnings = Vec::new();

    for (category, recs) in by_category {
        let mut groups: BTreeMap<String, Vec<&DatasetRecord>> = BTreeMap::new();
        for rec in recs {
            let key = group_key(rec);
            group_keys.insert(rec.id.clone(), key.clone());
            groups.entry(key).or_default().push(rec);
        }
        let total: usize = groups.values().map(|g| g.len()).sum();
        let targets = [
            tr * total as f64,
            va * total as f64,
            te * total as f64,
        ];
        let mut assigned = [0usize; 3];

        let mut ordered: Vec<(&String, &Vec<&DatasetRecord>)> = groups.iter().collect();
        ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));

        for (_, members) in ordered {
            let deficits: Vec<f64> = (0..3)
                .map(|i| targets[i] - assigned[i] as f64)
                .collect();
            let pick = (0..3)
                .max_by(|&a, &b| deficits[a].partial_cmp(&deficits[b]).unwrap())
                .unwrap();
            let split = Split::all()[pick];
            assigned[pick] += members.len();
            for rec in members {
                splits.insert(rec.id.clone(), split);
            }
        }

        for (i, split) in Split::all().iter().enumerate() {
            if assigned[i] == 0 && targets[i] > 0.0 {
                warnings.push(format!(
                    "{:?}: {} split is underfilled (target {:.1}, got 0)",
                    category,
                    split.as_str(),
                    targets[i]
                ));
            }
        }
    }

    Ok(SplitAssignment {
        splits,
        group_keys,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcFlag {
    pub record_id: String,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct QcReport {
    pub checked: usize,
    pub counts: BTreeMap<String, usize>,
    pub flags: Vec<QcFlag>,
}

impl QcReport {
    pub fn removal_candidates(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.flags.iter().map(|f| f.record_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Per-record validity and balance checks, duplicate detection, and robust
/// median/MAD outlier flagging (|x - median| > 4 MAD) for numeric
/// properties.
pub fn quality_control(records: &[DatasetRecord]) -> QcReport {
    let mut report = QcReport {
        checked: records.len(),
        ..Default::default()
    };
    let bump = |report: &mut QcReport, check: &str| {
        *report.counts.entry(check.to_string()).or_insert(0) += 1;
    };

    for rec in records {
        for mol in &rec.molecules {
            let v = validity::validate(mol);
            if !v.is_valid() {
                bump(&mut report, "invalid_molecule");
                report.flags.push(QcFlag {
                    record_id: rec.id.clone(),
                    check: "invalid_molecule".into(),
                    detail: format!("{mol}: stage {:?}", v.stage_reached),
                });
            }
        }
        if let Some(rxn_text) = &rec.reaction {
            match routes::parse_reaction(rxn_text) {
                Ok(rxn) => {
                    let balance = routes::check_mass_balance(&rxn);
                    if !balance.balanced {
                        bump(&mut report, "mass_balance");
                        report.flags.push(QcFlag {
                            record_id: rec.id.clone(),
                            check: "mass_balance".into(),
                            detail: format!("deficit {:?}", balance.deficit),
                        });
                    }
                }
                Err(e) => {
                    bump(&mut report, "invalid_reaction");
                    report.flags.push(QcFlag {
                        record_id: rec.id.clone(),
                        check: "invalid_reaction".into(),
                        detail: e.to_string(),
                    });
                }
            }
        }
    }

    // Duplicates.
    let (_, removed) = deduplicate(records.to_vec());
    if removed > 0 {
        report.counts.insert("duplicate".into(), removed);
        let mut seen = BTreeSet::new();
        for rec in records {
            let mut keys = rec.key_molecules.clone();
            keys.extend(rec.key_product.clone());
            keys.sort();
            let norm = rec.instruction.split_whitespace().collect::<Vec<_>>().join(" ");
            let fp = format!("{:?}|{}|{}", rec.task_category, keys.join("."), norm);
            if !seen.insert(fp) {
                report.flags.push(QcFlag {
                    record_id: rec.id.clone(),
                    check: "duplicate".into(),
                    detail: "duplicate of an earlier record".into(),
                });
            }
        }
    }

    // Property outliers under median/MAD scaling.
    let mut by_property: BTreeMap<&String, Vec<(&String, f64)>> = BTreeMap::new();
    for rec in records {
        for (name, value) in &rec.properties {
            by_property.entry(name).or_default().push((&rec.id, *value));
        }
    }
    for (name, values) in by_property {
        if values.len() < 3 {
            continue;
        }
        let mut sorted: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = median(&sorted);
        let mut deviations: Vec<f64> = sorted.iter().map(|v| (v - med).abs()).collect();
        deviations.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mad = median(&deviations);
        for (id, value) in values {
            let deviation = (value - med).abs();
            let outlier = if mad == 0.0 {
                deviation > 0.0
            } else {
                deviation > 4.0 * mad
            };
            if outlier {
                bump(&mut report, "property_outlier");
                report.flags.push(QcFlag {
                    record_id: id.clone(),
                    check: "property_outlier".into(),
                    detail: format!("{name} = {value} vs median {med} (MAD {mad})"),
                });
            }
        }
    }

    report
}
