//! Synthetic fixtures: molecule pools, scaffold-realistic curation corpora,
//! and model-output documents with controlled defects. Everything here is
//! clearly synthetic and deterministic for a fixed seed.

use crate::curation::{DatasetRecord, TaskCategory};
use crate::molgraph::parse_smiles;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Ring cores used to assemble scaffolds.
pub const RING_CORES: [&str; 16] = [
    "c1ccccc1",
    "c1ccncc1",
    "c1ccc2ccccc2c1",
    "c1cc[nH]c1",
    "c1ccoc1",
    "c1ccsc1",
    "C1CCCCC1",
    "C1CCNCC1",
    "C1CCOCC1",
    "C1CCCC1",
    "c1cnc[nH]1",
    "c1cscn1",
    "C1CNCCN1",
    "C1COCCN1",
    "c1ccc2[nH]ccc2c1",
    "c1ccc2ncccc2c1",
];

const LINKERS: [&str; 8] = ["", "C", "CC", "CCC", "O", "CO", "OC", "COC"];

const PREFIXES: [&str; 10] = [
    "C", "CC", "CCC", "CCCC", "CC(C)", "CCO", "CCN", "OCC", "NCC", "ClCC",
];

const SUFFIXES: [&str; 7] = ["C", "CC", "CCO", "Cl", "F", "N", "O"];

/// Distinct scaffold templates: single cores plus core-linker-core pairs.
/// Deduplicated by canonical scaffold key, deterministic order.
pub fn scaffold_templates(limit: usize) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |s: String, out: &mut Vec<String>| {
        if out.len() >= limit {
            return;
        }
        if let Ok(g) = parse_smiles(&s) {
            let key = g.bemis_murcko_scaffold().key();
            if !key.is_empty() && seen.insert(key) {
                out.push(s);
            }
        }
    };
    for core in RING_CORES {
        push(core.to_string(), &mut out);
    }
    for a in RING_CORES {
        for linker in LINKERS {
            for b in RING_CORES {
                if out.len() >= limit {
                    return out;
                }
                push(format!("{a}{linker}{b}"), &mut out);
            }
        }
    }
    out
}

/// A decorated molecule whose Bemis-Murcko scaffold equals the template's.
pub fn decorate(template: &str, variant: usize) -> String {
    let prefix = PREFIXES[variant % PREFIXES.len()];
    let suffix = SUFFIXES[(variant / PREFIXES.len()) % SUFFIXES.len()];
    if variant % 3 == 0 {
        format!("{prefix}{template}")
    } else {
        format!("{prefix}{template}{suffix}")
    }
}

/// Valid, assorted molecules for parser and canonicalization exercises.
pub fn molecule_pool(count: usize) -> Vec<String> {
    let hand_picked = [
        "CC(=O)Oc1ccccc1C(=O)O",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
        "CC(=O)Nc1ccc(O)cc1",
        "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
        "CN1CCC[C@H]1c1cccnc1",
        "N[C@@H](C)C(=O)O",
        "N[C@@H](Cc1ccccc1)C(=O)O",
        "OC[C@H](O)[C@@H](O)CO",
        "F/C=C/F",
        "F/C=C\\F",
        "CC(=O)[O-].[Na+]",
        "[13CH4]",
        "[NH4+].[Cl-]",
        "c1ccc2[nH]ccc2c1",
        "O=c1cccc[nH]1",
        "C1CC2(CC1)CCC2",
        "c1ccc(-c2ccccc2)cc1",
        "OCC1OC(O)C(O)C(O)C1O",
        "CN(C)C(=N)NC(=N)N",
        "NC(=O)c1ccc[nH]1",
    ];
    let mut out: Vec<String> = hand_picked.iter().map(|s| s.to_string()).collect();
    let templates = scaffold_templates(512);
    let mut variant = 0usize;
    while out.len() < count {
        let template = &templates[out.len() % templates.len()];
        out.push(decorate(template, variant));
        variant += 1;
    }
    out.truncate(count);
    out
}

/// Group sizes with a long-tailed, realistic shape: a few large scaffold
/// families, many singletons. Capped so no group exceeds one percent of the
/// corpus.
fn group_sizes(total: usize, cap: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut remaining = total;
    let mut k = 1usize;
    while remaining > 0 {
        let raw = (250.0 / (k as f64).powf(1.15)).floor() as usize;
        let size = raw.clamp(1, cap).min(remaining);
        sizes.push(size);
        remaining -= size;
        k += 1;
    }
    sizes
}

/// Scaffold-realistic corpus: molecule tasks grouped by scaffold, reaction
/// tasks grouped by shared product, sizes long-tailed, order shuffled
/// deterministically.
pub fn curation_corpus(seed: u64, total: usize) -> Vec<DatasetRecord> {
    let cap = (total / 100).max(1);
    let sizes = group_sizes(total, cap);
    let templates = scaffold_templates(sizes.len());
    let categories = TaskCategory::all();

    let mut records = Vec::with_capacity(total);
    for (k, &size) in sizes.iter().enumerate() {
        // Category follows the template, so a scaffold family never spans
        // categories and the stratified split keeps whole families intact.
        let template_idx = k % templates.len();
        let category = categories[template_idx % categories.len()];
        let template = &templates[template_idx];
        // Reaction families share one product; molecule families share the
        // scaffold and vary the decoration.
        let shared_product = decorate(template, k);
        for v in 0..size {
            let id = format!("syn-{k}-{v}");
            let (molecules, reaction) = if category.is_reaction_task() {
                let reactant = decorate(template, k + v + 1);
                (vec![], Some(format!("{reactant}>>{shared_product}")))
            } else {
                (vec![decorate(template, k * 7 + v)], None)
            };
            records.push(DatasetRecord {
                id,
                task_category: category,
                instruction: format!("synthetic task {k}/{v} on family {k}"),
                input: String::new(),
                output: String::new(),
                molecules,
                reaction,
                properties: BTreeMap::new(),
                key_molecules: vec![],
                key_product: None,
            });
        }
    }

    // Canonical keys, then a deterministic shuffle so input order carries no
    // signal.
    let mut prepared: Vec<DatasetRecord> = records
        .into_iter()
        .map(|r| crate::curation::prepare_record(r).expect("synthetic records are valid"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    prepared.shuffle(&mut rng);
    prepared
}

/// The Table X-style defect classes a synthetic document can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocViolation {
    MissingSummary,
    ThinkNotFirst,
    UnterminatedSmilesFence,
    MoleculeOutsideSmilesFence,
    UnbalancedEmphasis,
    MixedListStyles,
    MisalignedTable,
    UnbalancedJson,
    EmptyEquationSide,
}

impl DocViolation {
    pub fn all() -> [DocViolation; 9] {
        [
            DocViolation::MissingSummary,
            DocViolation::ThinkNotFirst,
            DocViolation::UnterminatedSmilesFence,
            DocViolation::MoleculeOutsideSmilesFence,
            DocViolation::UnbalancedEmphasis,
            DocViolation::MixedListStyles,
            DocViolation::MisalignedTable,
            DocViolation::UnbalancedJson,
            DocViolation::EmptyEquationSide,
        ]
    }

    /// The single requirement this violation trips.
    pub fn requirement(&self) -> crate::protocol::Requirement {
        use crate::protocol::Requirement::*;
        match self {
            DocViolation::MissingSummary | DocViolation::ThinkNotFirst => SectionHeaders,
            DocViolation::UnterminatedSmilesFence | DocViolation::MoleculeOutsideSmilesFence => {
                SmilesCodeBlocks
            }
            DocViolation::UnbalancedEmphasis => MarkdownFormatting,
            DocViolation::MixedListStyles => BulletedLists,
            DocViolation::MisalignedTable => TabularData,
            DocViolation::UnbalancedJson => JsonStructures,
            DocViolation::EmptyEquationSide => ChemicalEquations,
        }
    }
}

/// A fully compliant document exercising every format requirement: think
/// block first, headers, a closed smiles fence, bullets, a table, a JSON
/// block, an equation, and balanced emphasis.
pub fn compliant_document(mol: &str) -> String {
    format!(
        "<think>\n1. Examine the request and the target profile.\n2. Weigh candidate scaffolds for fit.\n3. Settle on the structure below.\n</think>\n\n## Molecular Design\n\nThe **preferred** candidate is shown with its *rationale*.\n\n```smiles\n{mol}\n```\n\n- Good aqueous solubility\n- Synthetically accessible\n\n| Property | Value |\n|---|---|\n| MW | 180.2 |\n| LogP | 1.3 |\n\n```json\n{{\"candidate\": \"{mol}\", \"score\": 0.82}}\n```\n\nOxidation step: {mol} + [O] -> product\n\n## Summary\n\nThe proposed candidate meets the stated constraints.\n"
    )
}

/// A document violating exactly one requirement, built from the compliant
/// template.
pub fn violating_document(kind: DocViolation, mol: &str) -> String {
    let base = compliant_document(mol);
    match kind {
        DocViolation::MissingSummary => base.replace("## Summary", "## Wrap-up"),
        DocViolation::ThinkNotFirst => {
            let without = base.replace("<think>\n", "").replace("\n</think>", "");
            format!("Preamble text appears first.\n\n<think>\nMoved reasoning.\n</think>\n\n{without}")
        }
        DocViolation::UnterminatedSmilesFence => {
            // The dangling fence sits inside the Summary body so every other
            // requirement stays satisfied.
            format!("{base}\n```smiles\n{mol}\n")
        }
        DocViolation::MoleculeOutsideSmilesFence => base.replace(
            &format!("```smiles\n{mol}\n```"),
            &format!("```\n{mol}\n```"),
        ),
        DocViolation::UnbalancedEmphasis => base.replace("**preferred**", "**preferred"),
        DocViolation::MixedListStyles => base.replace(
            "- Good aqueous solubility\n- Synthetically accessible",
            "- Good aqueous solubility\n1. Synthetically accessible",
        ),
        DocViolation::MisalignedTable => base.replace(
            "| LogP | 1.3 |",
            "| LogP | 1.3 | extra |",
        ),
        DocViolation::UnbalancedJson => base.replace(", \"score\": 0.82}", ", \"score\": 0.82"),
        DocViolation::EmptyEquationSide => base.replace(
            &format!("Oxidation step: {mol} + [O] -> product"),
            &format!("Oxidation step: {mol} + [O] ->"),
        ),
    }
}

/// A route fence in the dedicated line format, for feasibility evaluation.
/// The infeasible variant declares a starting material no catalog carries.
pub fn route_block(feasible: bool) -> String {
    if feasible {
        "```route\nTARGET: CC(=O)O\nSM: CC(=O)OC\nSTEP 1: CC(=O)OC.O>>CC(=O)O | 25 C, 1 atm\n```\n"
            .to_string()
    } else {
        "```route\nTARGET: CC(=O)O\nSM: [13CH3][13CH3]\nSTEP 1: [13CH3][13CH3]>>CC(=O)O | 25 C\n```\n"
            .to_string()
    }
}

/// A catalog covering the feasible synthetic routes above.
pub const SYNTH_CATALOG: &str = "CC(=O)OC\nO\nCCO\nCC=O\nOC\nCCN\n";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{check_format, parse_document, FormatProfile};

    #[test]
    fn templates_are_distinct_scaffolds() {
        let templates = scaffold_templates(300);
        assert!(templates.len() >= 300);
        let keys: std::collections::BTreeSet<String> = templates
            .iter()
            .map(|t| parse_smiles(t).unwrap().bemis_murcko_scaffold().key())
            .collect();
        assert_eq!(keys.len(), templates.len());
    }

    #[test]
    fn decorations_preserve_scaffold() {
        for template in scaffold_templates(25) {
            let base_key = parse_smiles(&template).unwrap().bemis_murcko_scaffold().key();
            for v in 0..12 {
                let decorated = decorate(&template, v);
                let g = parse_smiles(&decorated).expect(&decorated);
                assert_eq!(
                    g.bemis_murcko_scaffold().key(),
                    base_key,
                    "decoration {decorated} changed scaffold"
                );
            }
        }
    }

    #[test]
    fn molecule_pool_is_valid() {
        for mol in molecule_pool(250) {
            assert!(parse_smiles(&mol).is_ok(), "invalid pool molecule {mol}");
        }
    }

    #[test]
    fn corpus_sizes_are_capped_and_total_exact() {
        let sizes = group_sizes(30_820, 308);
        assert_eq!(sizes.iter().sum::<usize>(), 30_820);
        assert!(sizes.iter().all(|&s| s <= 308));
        assert!(sizes.len() > 1000, "want many groups, got {}", sizes.len());
    }

    #[test]
    fn small_corpus_prepares() {
        let corpus = curation_corpus(1, 400);
        assert_eq!(corpus.len(), 400);
        let with_products = corpus.iter().filter(|r| r.key_product.is_some()).count();
        assert!(with_products > 0);
        let with_molecules = corpus.iter().filter(|r| !r.key_molecules.is_empty()).count();
        assert!(with_molecules > 0);
    }

    #[test]
    fn compliant_document_adheres() {
        let doc = parse_document(&compliant_document("CCO"));
        let report = check_format(&doc, &FormatProfile::default());
        assert!(report.adherent, "{report:?}");
        // All seven requirements exercised, none not-applicable.
        assert!(report.verdicts.values().all(|v| v.passed()), "{report:?}");
    }

    #[test]
    fn each_violation_trips_exactly_its_requirement() {
        for kind in DocViolation::all() {
            let text = violating_document(kind, "CCO");
            let report = check_format(&parse_document(&text), &FormatProfile::default());
            assert!(!report.adherent, "{kind:?} still adherent");
            let failed = report.failed_requirements();
            assert_eq!(failed, vec![kind.requirement()], "{kind:?} -> {failed:?}");
        }
    }

    #[test]
    fn route_blocks_parse() {
        use crate::routes::{assess_feasibility, Catalog, Route, RuleTable};
        for feasible in [true, false] {
            let block = route_block(feasible);
            let inner: String = block
                .lines()
                .filter(|l| !l.starts_with("```"))
                .collect::<Vec<_>>()
                .join("\n");
            let route = Route::parse(&inner).unwrap();
            let catalog = Catalog::from_smiles_lines(SYNTH_CATALOG);
            let rules = RuleTable::builtin();
            let report =
                assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default())
                    .unwrap();
            assert_eq!(report.feasible, feasible, "{:?}", report.flaws);
        }
    }
}
