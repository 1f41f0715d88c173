//! Staged validity pipeline for SMILES strings: syntax, then chemical
//! possibility (valence, aromaticity, isotopes), then a notation-level
//! sanity screen (ring strain, stereo consistency). Failures are data, not
//! exceptions, and every failure carries a taxonomy code.

use crate::element::Element;
use crate::molgraph::{
    self, parse_smiles, BondOrder, GeometryMark, MoleculeGraph, SyntaxErrorKind,
};
use crate::stats::{RateEstimate, StatsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityStage {
    Syntax,
    Possibility,
    Sanity,
    Valid,
}

/// Error taxonomy: the six error classes plus the generic syntax bucket and
/// the strain screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxonomyCode {
    InvalidSyntax,
    MismatchedBrackets,
    RingClosureError,
    InvalidIsotope,
    IncorrectValence,
    IncorrectAromaticity,
    InvalidStereochemistry,
    StrainViolation,
}

impl TaxonomyCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaxonomyCode::InvalidSyntax => "invalid_syntax",
            TaxonomyCode::MismatchedBrackets => "mismatched_brackets",
            TaxonomyCode::RingClosureError => "ring_closure_error",
            TaxonomyCode::InvalidIsotope => "invalid_isotope",
            TaxonomyCode::IncorrectValence => "incorrect_valence",
            TaxonomyCode::IncorrectAromaticity => "incorrect_aromaticity",
            TaxonomyCode::InvalidStereochemistry => "invalid_stereochemistry",
            TaxonomyCode::StrainViolation => "strain_violation",
        }
    }

    pub fn all() -> [TaxonomyCode; 8] {
        [
            TaxonomyCode::InvalidSyntax,
            TaxonomyCode::MismatchedBrackets,
            TaxonomyCode::RingClosureError,
            TaxonomyCode::InvalidIsotope,
            TaxonomyCode::IncorrectValence,
            TaxonomyCode::IncorrectAromaticity,
            TaxonomyCode::InvalidStereochemistry,
            TaxonomyCode::StrainViolation,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityError {
    pub code: TaxonomyCode,
    /// Atom index, bond description, or byte position, when known.
    pub locus: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub input: String,
    pub stage_reached: ValidityStage,
    pub errors: Vec<ValidityError>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.stage_reached == ValidityStage::Valid
    }

    /// Line-record shape: input, stage, codes, loci.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({
            "input": self.input,
            "stage": self.stage_reached,
            "codes": self.errors.iter().map(|e| e.code.as_str()).collect::<Vec<_>>(),
            "loci": self.errors.iter().map(|e| e.locus.clone()).collect::<Vec<_>>(),
            "messages": self.errors.iter().map(|e| e.message.clone()).collect::<Vec<_>>(),
        })
    }
}

fn syntax_code(kind: &SyntaxErrorKind) -> TaxonomyCode {
    match kind {
        SyntaxErrorKind::UnmatchedBracket => TaxonomyCode::MismatchedBrackets,
        SyntaxErrorKind::UnmatchedRingClosure(_)
        | SyntaxErrorKind::RingBondConflict(_)
        | SyntaxErrorKind::RingClosureRebond(_) => TaxonomyCode::RingClosureError,
        SyntaxErrorKind::MalformedIsotope => TaxonomyCode::InvalidIsotope,
        _ => TaxonomyCode::InvalidSyntax,
    }
}

/// Per-atom valence check on an H-assigned graph. Elements without a
/// valence rule are skipped. This is the single code path shared by
/// `validate` and the exhaustive oracle tests.
pub fn check_valences(g: &MoleculeGraph) -> Vec<ValidityError> {
    let mut errors = Vec::new();
    for (i, atom) in g.atoms.iter().enumerate() {
        let Some(allowed) = atom.element.allowed_valences(atom.charge) else {
            continue;
        };
        let total = effective_valence(g, i);
        let ok = if atom.explicit_h.is_some() {
            allowed.contains(&total)
        } else {
            !atom.valence_overflow
        };
        if !ok {
            errors.push(ValidityError {
                code: TaxonomyCode::IncorrectValence,
                locus: Some(format!("atom {i}")),
                message: format!(
                    "{} with total valence {total} (allowed {allowed:?})",
                    atom.element.symbol()
                ),
            });
        }
    }
    errors
}

/// Bond-order sum plus hydrogens, counting the pi unit of aromatic atoms
/// that own an in-ring double bond.
pub fn effective_valence(g: &MoleculeGraph, i: usize) -> u8 {
    let mut sum = g.sigma_bond_sum(i);
    if g.atoms[i].aromatic && owns_pi_unit(g, i) {
        sum += 1;
    }
    sum + g.atoms[i].total_h()
}

fn owns_pi_unit(g: &MoleculeGraph, i: usize) -> bool {
    // Mirrors the contribution table used for hydrogen assignment.
    let atom = &g.atoms[i];
    match atom.element {
        Element::CARBON => !g
            .bonds_of(i)
            .iter()
            .any(|b| b.order == BondOrder::Double && g.atoms[b.other(i)].element == Element::OXYGEN),
        Element::NITROGEN | Element::PHOSPHORUS => {
            !(atom.charge == 0 && (atom.total_h() > 0 || g.degree(i) as u8 + atom.total_h() >= 3))
        }
        _ => false,
    }
}

pub fn check_isotopes(g: &MoleculeGraph) -> Vec<ValidityError> {
    let mut errors = Vec::new();
    for (i, atom) in g.atoms.iter().enumerate() {
        if let Some(iso) = atom.isotope {
            let (lo, hi) = atom.element.isotope_bounds();
            if iso < lo || iso > hi {
                errors.push(ValidityError {
                    code: TaxonomyCode::InvalidIsotope,
                    locus: Some(format!("atom {i}")),
                    message: format!(
                        "isotope {iso} outside [{lo}, {hi}] for {}",
                        atom.element.symbol()
                    ),
                });
            }
        }
    }
    errors
}

/// Stereo-notation consistency: chiral tags need at least three neighbors
/// and no duplicated substituents; geometry marks must sit next to a double
/// bond and may not repeat on one end of it.
pub fn check_stereo_notation(g: &MoleculeGraph) -> Vec<ValidityError> {
    let mut errors = Vec::new();

    for (i, atom) in g.atoms.iter().enumerate() {
        if atom.chirality.is_none() {
            continue;
        }
        let neighbor_count = g.degree(i) + atom.total_h() as usize;
        if neighbor_count < 3 {
            errors.push(ValidityError {
                code: TaxonomyCode::InvalidStereochemistry,
                locus: Some(format!("atom {i}")),
                message: format!("chiral tag with only {neighbor_count} neighbors"),
            });
            continue;
        }
        if atom.total_h() >= 2 {
            errors.push(ValidityError {
                code: TaxonomyCode::InvalidStereochemistry,
                locus: Some(format!("atom {i}")),
                message: "chiral tag with duplicate hydrogens".into(),
            });
            continue;
        }
        if has_duplicate_substituents(g, i) {
            errors.push(ValidityError {
                code: TaxonomyCode::InvalidStereochemistry,
                locus: Some(format!("atom {i}")),
                message: "chiral tag with duplicate substituents".into(),
            });
        }
    }

    // Geometry marks: stray marks and same-symbol conflicts per double-bond
    // end. Marks written into a ring count like any other.
    for (bi, bond) in g.bonds.iter().enumerate() {
        if bond.geometry.is_none() {
            continue;
        }
        let next_to_double = [bond.a, bond.b].iter().any(|&e| {
            g.bonds_of(e)
                .iter()
                .any(|b| b.order == BondOrder::Double)
        });
        if !next_to_double {
            errors.push(ValidityError {
                code: TaxonomyCode::InvalidStereochemistry,
                locus: Some(format!("bond {bi}")),
                message: "geometry mark with no adjacent double bond".into(),
            });
        }
    }
    for (bi, bond) in g.bonds.iter().enumerate() {
        if bond.order != BondOrder::Double {
            continue;
        }
        for end in [bond.a, bond.b] {
            let marks: Vec<GeometryMark> = g
                .bonds_of(end)
                .iter()
                .filter(|b| b.order == BondOrder::Single)
                .filter_map(|b| b.geometry)
                .collect();
            for pair in marks.windows(2) {
                if pair[0] == pair[1] {
                    errors.push(ValidityError {
                        code: TaxonomyCode::InvalidStereochemistry,
                        locus: Some(format!("bond {bi}, atom {end}")),
                        message: "two identical geometry marks on one double-bond end".into(),
                    });
                }
            }
        }
    }
    errors.sort_by(|a, b| a.locus.cmp(&b.locus).then(a.message.cmp(&b.message)));
    errors.dedup();
    errors
}

/// Two neighbors duplicate each other when they sit in different connected
/// components of the graph minus the chiral atom and those components look
/// identical from the entry atom. Ring neighbors share one component and so
/// never count as duplicates.
fn has_duplicate_substituents(g: &MoleculeGraph, center: usize) -> bool {
    let rest: Vec<usize> = (0..g.atoms.len()).filter(|&x| x != center).collect();
    let cut = g.subgraph(&rest);
    let remap = |old: usize| -> usize {
        // subgraph keeps sorted order of `rest`
        rest.binary_search(&old).unwrap()
    };
    let (comp, _) = cut.components();
    let mut signatures: Vec<(usize, String)> = Vec::new();
    for n in g.neighbors(center) {
        let local = remap(n);
        let component = comp[local];
        let members: Vec<usize> = (0..cut.atoms.len()).filter(|&x| comp[x] == component).collect();
        let fragment = cut.subgraph(&members);
        let entry_class = {
            let classes = fragment.symmetry_classes();
            let entry_local = members.binary_search(&local).unwrap();
            classes[entry_local]
        };
        let signature = format!("{}#{entry_class}", fragment.canonical_smiles());
        if signatures
            .iter()
            .any(|(c, s)| *c != component && *s == signature)
        {
            return true;
        }
        signatures.push((component, signature));
    }
    false
}

/// Notation-level strain screen: triple bonds, and trans-marked double
/// bonds, inside rings smaller than eight atoms.
pub fn check_strain(g: &MoleculeGraph) -> Vec<ValidityError> {
    let mut errors = Vec::new();
    for ring in &g.rings {
        if ring.len() >= 8 {
            continue;
        }
        let m = ring.len();
        let in_ring = |x: usize, y: usize| -> bool {
            (0..m).any(|k| {
                let a = ring[k];
                let b = ring[(k + 1) % m];
                (a == x && b == y) || (a == y && b == x)
            })
        };
        for (bi, bond) in g.bonds.iter().enumerate() {
            if !in_ring(bond.a, bond.b) {
                continue;
            }
            match bond.order {
                BondOrder::Triple => errors.push(ValidityError {
                    code: TaxonomyCode::StrainViolation,
                    locus: Some(format!("bond {bi}")),
                    message: format!("triple bond inside a {m}-ring"),
                }),
                BondOrder::Double => {
                    // The two marked ring bonds flanking a ring double bond
                    // spell trans when they carry the same symbol.
                    let flank_marks: Vec<GeometryMark> = [bond.a, bond.b]
                        .iter()
                        .flat_map(|&e| {
                            g.bonds_of(e)
                                .into_iter()
                                .filter(|fb| {
                                    fb.order == BondOrder::Single
                                        && in_ring(fb.a, fb.b)
                                        && fb.geometry.is_some()
                                })
                                .map(|fb| fb.geometry.unwrap())
                                .collect::<Vec<_>>()
                        })
                        .collect();
                    if flank_marks.len() == 2 && flank_marks[0] == flank_marks[1] {
                        errors.push(ValidityError {
                            code: TaxonomyCode::StrainViolation,
                            locus: Some(format!("bond {bi}")),
                            message: format!("trans double bond inside a {m}-ring"),
                        });
                    }
                }
                _ => {}
            }
        }
    }
    errors.sort_by(|a, b| a.locus.cmp(&b.locus));
    errors.dedup();
    errors
}

/// Runs the full staged pipeline. The report records the first failing
/// stage and every error found within it; later stages never run after a
/// failure.
pub fn validate(text: &str) -> ValidityReport {
    let input = text.trim().to_string();

    // Stage 1: syntax.
    let parsed = match parse_smiles(&input) {
        Ok(g) => g,
        Err(e) => {
            return ValidityReport {
                input,
                stage_reached: ValidityStage::Syntax,
                errors: vec![ValidityError {
                    code: syntax_code(&e.kind),
                    locus: Some(format!("position {}", e.position)),
                    message: e.to_string(),
                }],
            }
        }
    };

    // Stage 2: chemical possibility on the ring-perceived, H-assigned graph.
    let ringed = parsed.perceive_rings();
    let (graph, mut stage2) = match ringed.perceive_aromaticity() {
        Ok(g) => (g, Vec::new()),
        Err(err) => {
            let errors: Vec<ValidityError> = err
                .issues
                .iter()
                .map(|iss| ValidityError {
                    code: TaxonomyCode::IncorrectAromaticity,
                    locus: Some(format!("atom {}", iss.atom)),
                    message: iss.message.clone(),
                })
                .collect();
            (ringed, errors)
        }
    };
    let graph = graph.assign_implicit_hydrogens();
    stage2.extend(check_valences(&graph));
    stage2.extend(check_isotopes(&graph));
    if !stage2.is_empty() {
        return ValidityReport {
            input,
            stage_reached: ValidityStage::Possibility,
            errors: stage2,
        };
    }

    // Stage 3: sanity.
    let mut stage3 = check_strain(&graph);
    stage3.extend(check_stereo_notation(&graph));
    if !stage3.is_empty() {
        return ValidityReport {
            input,
            stage_reached: ValidityStage::Sanity,
            errors: stage3,
        };
    }

    ValidityReport {
        input,
        stage_reached: ValidityStage::Valid,
        errors: Vec::new(),
    }
}

/// Proportion of valid reports with a 95% Wilson interval.
pub fn corpus_validity_rate(reports: &[ValidityReport]) -> Result<RateEstimate, StatsError> {
    if reports.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let valid = reports.iter().filter(|r| r.is_valid()).count() as u64;
    RateEstimate::from_counts(valid, reports.len() as u64, 0.95)
}

/// Parses a molecule for downstream use, surfacing the validity report on
/// failure.
pub fn parsed_if_valid(text: &str) -> Result<MoleculeGraph, ValidityReport> {
    let report = validate(text);
    if report.is_valid() {
        Ok(molgraph::parse_smiles(text).expect("validated input reparses"))
    } else {
        Err(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pentavalent_carbon_is_a_possibility_failure() {
        let r = validate("C(C)(C)(C)(C)C");
        assert_eq!(r.stage_reached, ValidityStage::Possibility);
        assert_eq!(r.errors[0].code, TaxonomyCode::IncorrectValence);
        assert_eq!(r.errors[0].locus.as_deref(), Some("atom 0"));
    }

    #[test]
    fn acetic_acid_is_valid() {
        let r = validate("CC(=O)O");
        assert!(r.is_valid());
        assert!(r.errors.is_empty());
    }

    #[test]
    fn unclosed_ring_is_a_syntax_failure() {
        let r = validate("C1CC");
        assert_eq!(r.stage_reached, ValidityStage::Syntax);
        assert_eq!(r.errors[0].code, TaxonomyCode::RingClosureError);
    }

    #[test]
    fn conflicting_geometry_marks() {
        let clean = validate("F/C=C");
        assert!(clean.is_valid(), "{clean:?}");
        let conflicted = validate("F/C(/F)=C");
        assert_eq!(conflicted.stage_reached, ValidityStage::Sanity);
        assert_eq!(conflicted.errors[0].code, TaxonomyCode::InvalidStereochemistry);
    }

    #[test]
    fn stereo_neighbor_rules() {
        assert!(validate("[C@H](F)(Cl)Br").is_valid());
        let dup = validate("[C@H](C)(C)C");
        assert_eq!(dup.stage_reached, ValidityStage::Sanity);
        assert_eq!(dup.errors[0].code, TaxonomyCode::InvalidStereochemistry);
        // Ring bonds count as neighbors and ring paths are one substituent.
        assert!(validate("C[C@]1(F)CCC1").is_valid());
    }

    #[test]
    fn isotope_bounds_checked_in_stage_two() {
        assert!(validate("[13CH4]").is_valid());
        let bad = validate("[99CH4]");
        assert_eq!(bad.stage_reached, ValidityStage::Possibility);
        assert_eq!(bad.errors[0].code, TaxonomyCode::InvalidIsotope);
    }

    #[test]
    fn strain_screen() {
        let r = validate("C1CCC#CC1"); // cyclohexyne
        assert_eq!(r.stage_reached, ValidityStage::Sanity);
        assert_eq!(r.errors[0].code, TaxonomyCode::StrainViolation);
        // Cyclooctyne is the textbook smallest tolerable cycloalkyne.
        assert!(validate("C1CCCC#CCC1").is_valid());
        // Trans-marked double bond in a six-ring.
        let r = validate("C1/C=C/CCC1");
        assert_eq!(r.stage_reached, ValidityStage::Sanity);
        // Cis-marked is fine.
        assert!(validate("C1/C=C\\CCC1").is_valid());
    }

    #[test]
    fn aromaticity_failure_is_possibility_stage() {
        let r = validate("c1ccc1");
        assert_eq!(r.stage_reached, ValidityStage::Possibility);
        assert!(r
            .errors
            .iter()
            .all(|e| e.code == TaxonomyCode::IncorrectAromaticity));
    }

    #[test]
    fn stage_monotonicity() {
        // A syntax-broken string never reports later-stage codes.
        let r = validate("C(C)(C)(C)(C)(C");
        assert_eq!(r.stage_reached, ValidityStage::Syntax);
        assert!(r.errors.iter().all(|e| matches!(
            e.code,
            TaxonomyCode::InvalidSyntax
                | TaxonomyCode::MismatchedBrackets
                | TaxonomyCode::RingClosureError
                | TaxonomyCode::InvalidIsotope
        )));
    }

    #[test]
    fn multiple_errors_within_one_stage_all_reported() {
        let r = validate("C(C)(C)(C)(C)N(C)(C)(C)(C)C");
        assert_eq!(r.stage_reached, ValidityStage::Possibility);
        assert!(r.errors.len() >= 2, "{:?}", r.errors);
    }

    #[test]
    fn corpus_rate_examples() {
        let reports: Vec<ValidityReport> =
            ["CC", "CC", "C(C)(C)(C)(C)C", "CCO"].iter().map(|s| validate(s)).collect();
        let rate = corpus_validity_rate(&reports).unwrap();
        assert_eq!(rate.point, 0.75);
        let all_valid: Vec<ValidityReport> = ["C", "CC"].iter().map(|s| validate(s)).collect();
        let rate = corpus_validity_rate(&all_valid).unwrap();
        assert_eq!(rate.point, 1.0);
        assert_eq!(rate.ci_high, 1.0);
        assert!(corpus_validity_rate(&[]).is_err());
    }

    #[test]
    fn anchor_487_of_500() {
        let rate = RateEstimate::from_counts(487, 500, 0.95).unwrap();
        assert!((rate.point - 0.974).abs() < 1e-12);
        assert!((rate.half_width() - 0.0144).abs() < 4e-4);
    }

    #[test]
    fn report_bytes_deterministic() {
        let a = serde_json::to_vec(&validate("C1CC").to_record()).unwrap();
        let b = serde_json::to_vec(&validate("C1CC").to_record()).unwrap();
        assert_eq!(a, b);
    }
}
