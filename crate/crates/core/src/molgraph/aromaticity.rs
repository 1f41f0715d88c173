//! Hueckel aromaticity on single SSSR rings.
//!
//! Pi contributions: aromatic carbon 1, carbonyl-bearing ring carbon 0,
//! neutral nitrogen with a hydrogen (or three sigma connections) 2,
//! pyridine-type nitrogen 1, ring oxygen/sulfur 2. Fused systems are judged
//! ring by ring, never as an envelope.

use super::{BondOrder, MoleculeGraph};
use crate::element::Element;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AromaticityIssue {
    pub atom: usize,
    pub message: String,
}

/// Raised when lowercase (declared-aromatic) notation cannot be justified by
/// the ring model; carries every offending atom.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("incorrect aromaticity on {} atom(s)", issues.len())]
pub struct AromaticityError {
    pub issues: Vec<AromaticityIssue>,
}

fn heavy_connections(g: &MoleculeGraph, i: usize) -> u8 {
    g.degree(i) as u8 + g.atoms[i].total_h()
}

/// Pi electrons a declared-aromatic atom brings to its ring, per the fixed
/// contribution table. `None` marks an atom that cannot sit in an aromatic
/// ring at all (sp3-like, cumulated, or overloaded).
pub(crate) fn declared_pi(g: &MoleculeGraph, i: usize) -> Option<u8> {
    declared_pi_with_h(g, i, g.atoms[i].total_h())
}

/// Same as `declared_pi` with an overridden hydrogen count, so a writer can
/// ask what a bare (bracketless) rewrite of the atom would imply.
pub(crate) fn declared_pi_with_h(g: &MoleculeGraph, i: usize, h: u8) -> Option<u8> {
    let atom = &g.atoms[i];
    if g.degree(i) as u8 + h > 3 {
        return None;
    }
    let mut exo_double_o = false;
    for bond in g.bonds_of(i) {
        match bond.order {
            BondOrder::Triple => return None,
            BondOrder::Double => {
                let other = bond.other(i);
                if g.atoms[other].element == Element::OXYGEN && !g.atoms[other].aromatic {
                    exo_double_o = true;
                } else {
                    return None;
                }
            }
            _ => {}
        }
    }
    Some(match atom.element {
        Element::CARBON => {
            if exo_double_o {
                0
            } else {
                1
            }
        }
        Element::NITROGEN | Element::PHOSPHORUS => {
            if atom.charge == 0 && (h > 0 || g.degree(i) as u8 + h >= 3) {
                2
            } else {
                1
            }
        }
        Element::OXYGEN | Element::SULFUR | Element(34) | Element(33) => 2,
        Element::BORON => 0,
        _ => return None,
    })
}

/// True when the declared-aromatic atom owns one in-ring double bond in the
/// implied Kekule structure; such an atom counts one extra valence unit.
pub(crate) fn owns_ring_double(g: &MoleculeGraph, i: usize) -> bool {
    g.atoms[i].aromatic && declared_pi(g, i) == Some(1)
}

/// Pi electrons for a Kekule-written ring atom, or `None` when incompatible.
fn kekule_pi(g: &MoleculeGraph, on_ring: &[bool], i: usize) -> Option<u8> {
    if heavy_connections(g, i) > 3 {
        return None;
    }
    let mut doubles: Vec<usize> = Vec::new();
    for bond in g.bonds_of(i) {
        match bond.order {
            BondOrder::Triple => return None,
            BondOrder::Double => doubles.push(bond.other(i)),
            _ => {}
        }
    }
    match doubles.as_slice() {
        [] => match g.atoms[i].element {
            Element::NITROGEN
            | Element::PHOSPHORUS
            | Element::OXYGEN
            | Element::SULFUR
            | Element(33)
            | Element(34) => Some(2),
            _ => None,
        },
        [partner] => {
            if on_ring[*partner] {
                Some(1)
            } else if g.atoms[*partner].element == Element::OXYGEN {
                Some(0)
            } else {
                None
            }
        }
        _ => None,
    }
}

pub fn perceive(g: &MoleculeGraph) -> Result<MoleculeGraph, AromaticityError> {
    let mut out = if g.rings.is_empty() && !g.bonds.is_empty() {
        g.perceive_rings()
    } else {
        g.clone()
    };
    let on_ring = out.ring_membership();

    let mut aromatic_rings: Vec<usize> = Vec::new();
    for (ri, ring) in out.rings.iter().enumerate() {
        let mut total = 0u32;
        let mut compatible = true;
        for &a in ring {
            let pi = if out.atoms[a].aromatic {
                declared_pi(&out, a)
            } else {
                kekule_pi(&out, &on_ring, a)
            };
            match pi {
                Some(p) => total += p as u32,
                None => {
                    compatible = false;
                    break;
                }
            }
        }
        if compatible && total >= 2 && (total - 2) % 4 == 0 {
            aromatic_rings.push(ri);
        }
    }

    let mut atom_aromatic = vec![false; out.atoms.len()];
    for &ri in &aromatic_rings {
        let ring = out.rings[ri].clone();
        let m = ring.len();
        for k in 0..m {
            let a = ring[k];
            let b = ring[(k + 1) % m];
            atom_aromatic[a] = true;
            atom_aromatic[b] = true;
            for bond in &mut out.bonds {
                if (bond.a == a && bond.b == b) || (bond.a == b && bond.b == a) {
                    bond.order = BondOrder::Aromatic;
                    bond.geometry = None;
                }
            }
        }
    }

    let mut issues = Vec::new();
    for (i, atom) in out.atoms.iter().enumerate() {
        if atom.aromatic && !atom_aromatic[i] {
            let message = if on_ring[i] {
                "declared-aromatic ring fails the 4n+2 rule".to_string()
            } else {
                "declared-aromatic atom lies on no ring".to_string()
            };
            issues.push(AromaticityIssue { atom: i, message });
        }
    }
    if !issues.is_empty() {
        return Err(AromaticityError { issues });
    }

    for (i, flag) in atom_aromatic.into_iter().enumerate() {
        if flag {
            out.atoms[i].aromatic = true;
        }
    }
    Ok(out)
}
