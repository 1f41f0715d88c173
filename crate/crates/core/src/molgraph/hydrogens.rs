//! Implicit hydrogen assignment: each organic-subset atom is topped up to the
//! smallest allowed valence at or above its bond-order sum. Bracket atoms keep
//! their written hydrogen count untouched.

use super::{aromaticity, MoleculeGraph};

/// Bond-order sum including the pi unit of an aromatic atom that owns an
/// in-ring double bond.
pub(crate) fn effective_bond_sum(g: &MoleculeGraph, i: usize) -> u8 {
    let base = g.sigma_bond_sum(i);
    if aromaticity::owns_ring_double(g, i) {
        base + 1
    } else {
        base
    }
}

/// Hydrogen count a bare (bracketless) atom would receive, or `None` when no
/// allowed valence fits.
pub(crate) fn inferred_h(g: &MoleculeGraph, i: usize) -> Option<u8> {
    let atom = &g.atoms[i];
    let sum = effective_bond_sum(g, i);
    smallest_fit(atom.element.allowed_valences(atom.charge)?, sum)
}

/// What a parser would infer if this atom were rewritten without brackets.
/// Differs from `inferred_h` for aromatic nitrogen, whose pi contribution
/// depends on whether it carries a hydrogen.
pub(crate) fn inferred_h_as_bare(g: &MoleculeGraph, i: usize) -> Option<u8> {
    let atom = &g.atoms[i];
    let mut sum = g.sigma_bond_sum(i);
    if atom.aromatic && aromaticity::declared_pi_with_h(g, i, 0) == Some(1) {
        sum += 1;
    }
    smallest_fit(atom.element.allowed_valences(atom.charge)?, sum)
}

fn smallest_fit(allowed: Vec<u8>, sum: u8) -> Option<u8> {
    allowed.iter().filter(|&&v| v >= sum).min().map(|&v| v - sum)
}

pub fn assign(g: &MoleculeGraph) -> MoleculeGraph {
    let mut out = g.clone();
    for i in 0..out.atoms.len() {
        if out.atoms[i].explicit_h.is_some() {
            out.atoms[i].implicit_h = 0;
            continue;
        }
        match inferred_h(g, i) {
            Some(h) => out.atoms[i].implicit_h = h,
            None => {
                out.atoms[i].implicit_h = 0;
                out.atoms[i].valence_overflow = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn h_counts(s: &str) -> Vec<u8> {
        parse_smiles(s)
            .unwrap()
            .assign_implicit_hydrogens()
            .atoms
            .iter()
            .map(|a| a.total_h())
            .collect()
    }

    #[test]
    fn methane_gets_four() {
        assert_eq!(h_counts("C"), vec![4]);
    }

    #[test]
    fn benzene_carbons_get_one() {
        assert_eq!(h_counts("c1ccccc1"), vec![1; 6]);
    }

    #[test]
    fn bracket_atoms_are_literal() {
        let g = parse_smiles("[CH3]").unwrap().assign_implicit_hydrogens();
        assert_eq!(g.atoms[0].explicit_h, Some(3));
        assert_eq!(g.atoms[0].implicit_h, 0);
    }

    #[test]
    fn nitrogen_uses_smallest_fitting_valence() {
        assert_eq!(h_counts("N"), vec![3]);
        assert_eq!(h_counts("N(C)(C)C"), vec![0, 3, 3, 3]);
        // Bond sum 4 skips to valence 5 for a bare nitrogen.
        assert_eq!(h_counts("CN(C)(C)C")[1], 1);
        // A bracket nitrogen keeps its written hydrogen count of zero.
        assert_eq!(h_counts("C[N](C)(C)C")[1], 0);
    }

    #[test]
    fn overflow_flags_instead_of_failing() {
        let g = parse_smiles("C(C)(C)(C)(C)C").unwrap().assign_implicit_hydrogens();
        assert!(g.atoms[0].valence_overflow);
        assert_eq!(g.atoms[0].implicit_h, 0);
    }

    #[test]
    fn pyridine_vs_pyrrole_nitrogen() {
        assert_eq!(h_counts("c1ccncc1")[3], 0);
        let g = parse_smiles("c1cc[nH]c1").unwrap().assign_implicit_hydrogens();
        let n = g.atoms.iter().find(|a| a.element.symbol() == "N").unwrap();
        assert_eq!(n.total_h(), 1);
    }

    #[test]
    fn fused_ring_junction_has_no_hydrogen() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap().assign_implicit_hydrogens();
        let junctions: Vec<u8> = (0..g.atoms.len())
            .filter(|&i| g.degree(i) == 3)
            .map(|i| g.atoms[i].total_h())
            .collect();
        assert_eq!(junctions, vec![0, 0]);
    }

    #[test]
    fn never_exceeds_max_allowed_valence() {
        for s in ["C", "CC", "C=C", "C#C", "N", "O", "S", "P", "c1ccccc1", "C[N+](C)(C)C"] {
            let g = parse_smiles(s).unwrap().assign_implicit_hydrogens();
            for i in 0..g.atoms.len() {
                let atom = &g.atoms[i];
                if let Some(allowed) = atom.element.allowed_valences(atom.charge) {
                    let total = effective_bond_sum(&g, i) + atom.total_h();
                    if !atom.valence_overflow && atom.explicit_h.is_none() {
                        assert!(allowed.contains(&total), "{s}: atom {i} total {total}");
                    }
                }
            }
        }
    }
}
