//! Molecular graphs parsed from SMILES: parsing, implicit hydrogens, ring and
//! aromaticity perception, canonicalization, and Bemis-Murcko scaffolds.

mod aromaticity;
mod canon;
mod hydrogens;
mod iso;
mod parse;
mod rings;
mod scaffold;

pub use aromaticity::{AromaticityError, AromaticityIssue};
pub use canon::write_smiles_with_order;
pub use iso::{find_all_anchors, find_substructure, is_isomorphic};
pub use parse::{parse_smiles, SyntaxError, SyntaxErrorKind};
pub use scaffold::Scaffold;

use crate::element::Element;
use serde::{Deserialize, Serialize};

/// Tetrahedral chirality mark from `@` / `@@` notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chirality {
    /// `@`
    Counterclockwise,
    /// `@@`
    Clockwise,
}

impl Chirality {
    pub fn flipped(self) -> Chirality {
        match self {
            Chirality::Counterclockwise => Chirality::Clockwise,
            Chirality::Clockwise => Chirality::Counterclockwise,
        }
    }
}

/// Bond order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer contribution to an atom's bond-order sum. Aromatic bonds count
    /// one each; an atom that owns an in-ring double bond adds one more via
    /// its pi contribution (see `aromaticity`).
    pub fn valence_units(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

/// Up/down geometry mark (`/` or `\`) on a single bond next to a double bond.
///
/// The mark is kept exactly as written; writers emit it unchanged regardless
/// of traversal direction, so a mark is a plain bond attribute here rather
/// than a direction-relative symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryMark {
    /// `/`
    Up,
    /// `\`
    Down,
}

impl GeometryMark {
    pub fn as_char(self) -> char {
        match self {
            GeometryMark::Up => '/',
            GeometryMark::Down => '\\',
        }
    }
}

/// One entry in an atom's written neighbor order, used to carry chirality
/// parity through rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeighborSlot {
    /// Bracket-implicit hydrogen, e.g. the H of `[C@H]`.
    ImplicitH,
    Atom(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub charge: i32,
    pub isotope: Option<u16>,
    /// Hydrogen count given in brackets. `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
    /// Hydrogens added by `assign_implicit_hydrogens`.
    pub implicit_h: u8,
    pub aromatic: bool,
    pub chirality: Option<Chirality>,
    /// True when no allowed valence fits the atom's bond-order sum; the
    /// hydrogen assigner then leaves zero hydrogens and sets this flag.
    pub valence_overflow: bool,
    /// Neighbors in the order they were attached in the source text
    /// (preceding atom first, then the bracket H, then the rest).
    pub neighbor_order: Vec<NeighborSlot>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            charge: 0,
            isotope: None,
            explicit_h: None,
            implicit_h: 0,
            aromatic: false,
            chirality: None,
            valence_overflow: false,
            neighbor_order: Vec::new(),
        }
    }

    /// Total hydrogen count: bracket hydrogens or assigned implicit ones.
    pub fn total_h(&self) -> u8 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
            || self.isotope.is_some()
            || self.charge != 0
            || self.chirality.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub geometry: Option<GeometryMark>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, atom: usize) -> bool {
        self.a == atom || self.b == atom
    }
}

/// Attributed molecular graph. Operations never mutate in place; they return
/// new graphs, so values can be shared freely across workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MoleculeGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Smallest set of smallest rings, filled by `perceive_rings`.
    pub rings: Vec<Vec<usize>>,
    pub fragment_count: usize,
}

impl MoleculeGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.bonds
            .iter()
            .find(|bo| (bo.a == a && bo.b == b) || (bo.a == b && bo.b == a))
    }

    pub fn neighbors(&self, atom: usize) -> Vec<usize> {
        self.bonds
            .iter()
            .filter(|b| b.touches(atom))
            .map(|b| b.other(atom))
            .collect()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.touches(atom)).count()
    }

    pub fn bonds_of(&self, atom: usize) -> Vec<&Bond> {
        self.bonds.iter().filter(|b| b.touches(atom)).collect()
    }

    /// Integer bond-order sum of the non-pi frame; aromatic bonds count one.
    pub fn sigma_bond_sum(&self, atom: usize) -> u8 {
        self.bonds_of(atom)
            .iter()
            .map(|b| b.order.valence_units())
            .sum()
    }

    /// Connected-component index per atom plus the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = count;
            while let Some(v) = stack.pop() {
                for w in self.neighbors(v) {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub(crate) fn recompute_fragment_count(&mut self) {
        self.fragment_count = self.components().1;
    }

    /// Extracts the induced subgraph on `keep` (sorted, deduplicated inside).
    /// Chirality slots that point at removed atoms are dropped.
    pub fn subgraph(&self, keep: &[usize]) -> MoleculeGraph {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let mut atoms: Vec<Atom> = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        for atom in &mut atoms {
            atom.neighbor_order.retain(|slot| match slot {
                NeighborSlot::ImplicitH => true,
                NeighborSlot::Atom(i) => remap[*i] != usize::MAX,
            });
            for slot in &mut atom.neighbor_order {
                if let NeighborSlot::Atom(i) = slot {
                    *i = remap[*i];
                }
            }
        }
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
                geometry: b.geometry,
            })
            .collect();
        let mut g = MoleculeGraph {
            atoms,
            bonds,
            rings: Vec::new(),
            fragment_count: 0,
        };
        g.recompute_fragment_count();
        g
    }

    /// Atoms that sit on at least one perceived ring.
    pub fn ring_membership(&self) -> Vec<bool> {
        let mut on_ring = vec![false; self.atoms.len()];
        for ring in &self.rings {
            for &a in ring {
                on_ring[a] = true;
            }
        }
        on_ring
    }

    pub fn assign_implicit_hydrogens(&self) -> MoleculeGraph {
        hydrogens::assign(self)
    }

    pub fn perceive_rings(&self) -> MoleculeGraph {
        rings::perceive(self)
    }

    pub fn perceive_aromaticity(&self) -> Result<MoleculeGraph, AromaticityError> {
        aromaticity::perceive(self)
    }

    pub fn canonical_smiles(&self) -> String {
        canon::canonical_smiles(self)
    }

    pub fn bemis_murcko_scaffold(&self) -> Scaffold {
        scaffold::bemis_murcko(self)
    }

    /// Structural equivalence classes from Morgan-style refinement, without
    /// tie-breaking. Atoms in the same class are interchangeable as far as
    /// the refinement invariant can tell.
    pub fn symmetry_classes(&self) -> Vec<usize> {
        canon::refined_classes(self)
    }
}

/// Parses one molecule per non-empty, non-`#` line.
pub fn parse_smiles_lines(text: &str) -> Vec<(String, Result<MoleculeGraph, SyntaxError>)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| (l.to_string(), parse_smiles(l)))
        .collect()
}
