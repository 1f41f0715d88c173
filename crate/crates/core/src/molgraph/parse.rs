//! SMILES reader. Produces a `MoleculeGraph` with ring closures resolved and
//! branches balanced; implicit hydrogens are assigned by a separate pass.

use super::{Atom, Bond, BondOrder, Chirality, GeometryMark, MoleculeGraph, NeighborSlot};
use crate::element::Element;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntaxErrorKind {
    /// `(` without `)`, `)` without `(`, or an unterminated `[...]`.
    UnmatchedBracket,
    /// Ring-closure digit never closed.
    UnmatchedRingClosure(u16),
    /// Opening and closing sides of a ring closure specify different bonds.
    RingBondConflict(u16),
    /// Ring closure to the same atom or duplicating an existing bond.
    RingClosureRebond(u16),
    UnknownElement(String),
    MalformedIsotope,
    /// Bond symbol with nothing to bond to.
    DanglingBond,
    MalformedCharge,
    /// Wildcards, atom maps, quadruple bonds, and other notation outside the
    /// supported subset.
    UnsupportedFeature(String),
    UnexpectedChar(char),
    EmptyInput,
}

impl SyntaxErrorKind {
    pub fn describe(&self) -> String {
        match self {
            SyntaxErrorKind::UnmatchedBracket => "unmatched bracket".into(),
            SyntaxErrorKind::UnmatchedRingClosure(d) => {
                format!("unmatched ring-closure digit {d}")
            }
            SyntaxErrorKind::RingBondConflict(d) => {
                format!("conflicting bond orders on ring closure {d}")
            }
            SyntaxErrorKind::RingClosureRebond(d) => {
                format!("ring closure {d} duplicates an existing bond")
            }
            SyntaxErrorKind::UnknownElement(s) => format!("unknown element symbol '{s}'"),
            SyntaxErrorKind::MalformedIsotope => "malformed isotope".into(),
            SyntaxErrorKind::DanglingBond => "dangling bond symbol".into(),
            SyntaxErrorKind::MalformedCharge => "malformed charge".into(),
            SyntaxErrorKind::UnsupportedFeature(s) => format!("unsupported SMILES feature: {s}"),
            SyntaxErrorKind::UnexpectedChar(c) => format!("unexpected character '{c}'"),
            SyntaxErrorKind::EmptyInput => "empty input".into(),
        }
    }
}

/// Parse failure with a 0-based byte offset. Errors detected at end of input
/// (an unclosed branch, for instance) report the input length as position.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{} at position {position}", kind.describe())]
pub struct SyntaxError {
    pub kind: SyntaxErrorKind,
    pub position: usize,
}

fn err<T>(kind: SyntaxErrorKind, position: usize) -> Result<T, SyntaxError> {
    Err(SyntaxError { kind, position })
}

#[derive(Clone, Copy)]
struct PendingBond {
    order: Option<BondOrder>,
    geometry: Option<GeometryMark>,
    position: usize,
}

struct RingOpening {
    atom: usize,
    order: Option<BondOrder>,
    geometry: Option<GeometryMark>,
    /// Index into the opening atom's neighbor_order reserved for the partner.
    slot: usize,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    branch_stack: Vec<(usize, usize)>, // (atom, position of '(')
    pending: Option<PendingBond>,
    open_rings: HashMap<u16, RingOpening>,
    ring_positions: HashMap<u16, usize>,
}

pub fn parse_smiles(text: &str) -> Result<MoleculeGraph, SyntaxError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return err(SyntaxErrorKind::EmptyInput, 0);
    }
    let mut p = Parser {
        bytes: trimmed.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branch_stack: Vec::new(),
        pending: None,
        open_rings: HashMap::new(),
        ring_positions: HashMap::new(),
    };
    p.run()?;
    let mut g = MoleculeGraph {
        atoms: p.atoms,
        bonds: p.bonds,
        rings: Vec::new(),
        fragment_count: 0,
    };
    g.recompute_fragment_count();
    Ok(g)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        while let Some(c) = self.peek() {
            match c {
                b'A'..=b'Z' => self.organic_atom()?,
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => self.organic_atom()?,
                b'[' => self.bracket_atom()?,
                b'-' => self.bond_symbol(BondOrder::Single, None)?,
                b'=' => self.bond_symbol(BondOrder::Double, None)?,
                b'#' => self.bond_symbol(BondOrder::Triple, None)?,
                b':' => self.bond_symbol(BondOrder::Aromatic, None)?,
                b'/' => self.bond_symbol(BondOrder::Single, Some(GeometryMark::Up))?,
                b'\\' => self.bond_symbol(BondOrder::Single, Some(GeometryMark::Down))?,
                b'0'..=b'9' => self.ring_digit()?,
                b'%' => self.ring_percent()?,
                b'(' => self.open_branch()?,
                b')' => self.close_branch()?,
                b'.' => self.dot()?,
                b'*' => {
                    return err(SyntaxErrorKind::UnsupportedFeature("wildcard atom".into()), self.pos)
                }
                b'$' => {
                    return err(
                        SyntaxErrorKind::UnsupportedFeature("quadruple bond".into()),
                        self.pos,
                    )
                }
                b'~' => {
                    return err(
                        SyntaxErrorKind::UnsupportedFeature("any-order bond".into()),
                        self.pos,
                    )
                }
                other => return err(SyntaxErrorKind::UnexpectedChar(other as char), self.pos),
            }
        }
        self.finish()
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        if self.pending.is_some() {
            return err(SyntaxErrorKind::DanglingBond, self.pos);
        }
        if !self.branch_stack.is_empty() {
            return err(SyntaxErrorKind::UnmatchedBracket, self.pos);
        }
        if let Some((&digit, _)) = self.open_rings.iter().min_by_key(|(d, _)| **d) {
            let position = self.ring_positions.get(&digit).copied().unwrap_or(self.pos);
            return err(SyntaxErrorKind::UnmatchedRingClosure(digit), position);
        }
        if self.atoms.is_empty() {
            return err(SyntaxErrorKind::EmptyInput, 0);
        }
        Ok(())
    }

    fn take_pending(&mut self) -> Option<PendingBond> {
        self.pending.take()
    }

    fn attach(&mut self, new_atom: usize) -> Result<(), SyntaxError> {
        let pending = self.take_pending();
        if let Some(prev) = self.prev {
            let order = pending.and_then(|p| p.order).unwrap_or_else(|| {
                if self.atoms[prev].aromatic && self.atoms[new_atom].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            });
            let geometry = pending.and_then(|p| p.geometry);
            self.bonds.push(Bond {
                a: prev,
                b: new_atom,
                order,
                geometry,
            });
            self.atoms[prev].neighbor_order.push(NeighborSlot::Atom(new_atom));
            self.atoms[new_atom]
                .neighbor_order
                .push(NeighborSlot::Atom(prev));
        } else if let Some(p) = pending {
            return err(SyntaxErrorKind::DanglingBond, p.position);
        }
        self.prev = Some(new_atom);
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom) -> Result<(), SyntaxError> {
        self.atoms.push(atom);
        let idx = self.atoms.len() - 1;
        self.attach(idx)
    }

    fn organic_atom(&mut self) -> Result<(), SyntaxError> {
        let start = self.pos;
        let first = self.bump().unwrap();
        let aromatic = first.is_ascii_lowercase();
        // Two-letter symbols in the organic subset: Cl and Br.
        let symbol = if first == b'C' && self.peek() == Some(b'l') {
            self.bump();
            "Cl".to_string()
        } else if first == b'B' && self.peek() == Some(b'r') {
            self.bump();
            "Br".to_string()
        } else {
            (first as char).to_ascii_uppercase().to_string()
        };
        let element = match Element::from_symbol(&symbol) {
            Some(e) if e.in_organic_subset() => e,
            _ => return err(SyntaxErrorKind::UnknownElement(symbol), start),
        };
        if aromatic && !element.aromatic_capable() {
            return err(SyntaxErrorKind::UnknownElement(symbol), start);
        }
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        self.push_atom(atom)
    }

    fn bracket_atom(&mut self) -> Result<(), SyntaxError> {
        let open = self.pos;
        self.bump(); // '['

        // Isotope.
        let mut isotope: Option<u16> = None;
        let iso_start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            let d = (self.bump().unwrap() - b'0') as u32;
            let next = isotope.unwrap_or(0) as u32 * 10 + d;
            if next > 999 {
                return err(SyntaxErrorKind::MalformedIsotope, iso_start);
            }
            isotope = Some(next as u16);
        }
        if isotope == Some(0) {
            return err(SyntaxErrorKind::MalformedIsotope, iso_start);
        }

        // Element symbol; lowercase start marks a declared-aromatic atom.
        let sym_start = self.pos;
        let first = match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.bump().unwrap(),
            Some(b'*') => {
                return err(SyntaxErrorKind::UnsupportedFeature("wildcard atom".into()), self.pos)
            }
            Some(b']') => return err(SyntaxErrorKind::UnknownElement(String::new()), self.pos),
            _ => return err(SyntaxErrorKind::UnmatchedBracket, open),
        };
        let aromatic = first.is_ascii_lowercase();
        let mut symbol = (first as char).to_ascii_uppercase().to_string();
        // A following lowercase letter extends the symbol when that spells a
        // known element (so [Cl-] works but [CH4] keeps H as the H-count).
        if let Some(c) = self.peek() {
            if c.is_ascii_lowercase() {
                let two = format!("{symbol}{}", c as char);
                if Element::from_symbol(&two).is_some() {
                    symbol = two;
                    self.bump();
                }
            }
        }
        let element = match Element::from_symbol(&symbol) {
            Some(e) => e,
            None => return err(SyntaxErrorKind::UnknownElement(symbol), sym_start),
        };
        if aromatic && !element.aromatic_capable() {
            return err(SyntaxErrorKind::UnknownElement(symbol.to_lowercase()), sym_start);
        }

        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.isotope = isotope;
        atom.explicit_h = Some(0);

        // Chirality.
        if self.peek() == Some(b'@') {
            self.bump();
            if self.peek() == Some(b'@') {
                self.bump();
                atom.chirality = Some(Chirality::Clockwise);
            } else {
                atom.chirality = Some(Chirality::Counterclockwise);
            }
        }

        // Hydrogen count.
        let mut has_h = false;
        if self.peek() == Some(b'H') {
            self.bump();
            has_h = true;
            let mut count = 1u8;
            if matches!(self.peek(), Some(b'0'..=b'9')) {
                count = self.bump().unwrap() - b'0';
            }
            atom.explicit_h = Some(count);
        }

        // Charge.
        match self.peek() {
            Some(b'+') | Some(b'-') => {
                let sign: i32 = if self.bump().unwrap() == b'+' { 1 } else { -1 };
                let mut magnitude = 1i32;
                if matches!(self.peek(), Some(b'0'..=b'9')) {
                    magnitude = (self.bump().unwrap() - b'0') as i32;
                    if magnitude == 0 {
                        return err(SyntaxErrorKind::MalformedCharge, self.pos - 1);
                    }
                } else {
                    // Runs of ++ / -- add up.
                    while self.peek() == Some(if sign > 0 { b'+' } else { b'-' }) {
                        self.bump();
                        magnitude += 1;
                    }
                }
                atom.charge = sign * magnitude;
            }
            _ => {}
        }

        match self.peek() {
            Some(b']') => {
                self.bump();
            }
            Some(b':') => {
                return err(
                    SyntaxErrorKind::UnsupportedFeature("atom map in plain molecule".into()),
                    self.pos,
                )
            }
            _ => return err(SyntaxErrorKind::UnmatchedBracket, open),
        }

        self.atoms.push(atom);
        let idx = self.atoms.len() - 1;
        self.attach(idx)?;
        // The bracket hydrogen occupies the slot right after the preceding
        // atom in the written neighbor order.
        if has_h && self.atoms[idx].explicit_h.unwrap_or(0) > 0 {
            self.atoms[idx].neighbor_order.push(NeighborSlot::ImplicitH);
        }
        Ok(())
    }

    fn bond_symbol(
        &mut self,
        order: BondOrder,
        geometry: Option<GeometryMark>,
    ) -> Result<(), SyntaxError> {
        let position = self.pos;
        self.bump();
        if self.pending.is_some() || self.prev.is_none() {
            return err(SyntaxErrorKind::DanglingBond, position);
        }
        self.pending = Some(PendingBond {
            order: Some(order),
            geometry,
            position,
        });
        Ok(())
    }

    fn ring_digit(&mut self) -> Result<(), SyntaxError> {
        let position = self.pos;
        let digit = (self.bump().unwrap() - b'0') as u16;
        self.ring_closure(digit, position)
    }

    fn ring_percent(&mut self) -> Result<(), SyntaxError> {
        let position = self.pos;
        self.bump(); // '%'
        let mut digits = String::new();
        while digits.len() < 2 {
            match self.peek() {
                Some(c @ b'0'..=b'9') => {
                    digits.push(c as char);
                    self.bump();
                }
                _ => return err(SyntaxErrorKind::UnexpectedChar('%'), position),
            }
        }
        let number: u16 = digits.parse().unwrap();
        self.ring_closure(number, position)
    }

    fn ring_closure(&mut self, digit: u16, position: usize) -> Result<(), SyntaxError> {
        let current = match self.prev {
            Some(a) => a,
            None => return err(SyntaxErrorKind::UnexpectedChar('0'), position),
        };
        let pending = self.take_pending();
        if let Some(opening) = self.open_rings.remove(&digit) {
            if opening.atom == current {
                return err(SyntaxErrorKind::RingClosureRebond(digit), position);
            }
            if self.bonds.iter().any(|b| {
                (b.a == opening.atom && b.b == current) || (b.a == current && b.b == opening.atom)
            }) {
                return err(SyntaxErrorKind::RingClosureRebond(digit), position);
            }
            let close_order = pending.and_then(|p| p.order);
            let order = match (opening.order, close_order) {
                (Some(a), Some(b)) if a != b => {
                    return err(SyntaxErrorKind::RingBondConflict(digit), position)
                }
                (Some(a), _) => a,
                (None, Some(b)) => b,
                (None, None) => {
                    if self.atoms[opening.atom].aromatic && self.atoms[current].aromatic {
                        BondOrder::Aromatic
                    } else {
                        BondOrder::Single
                    }
                }
            };
            let geometry = opening.geometry.or(pending.and_then(|p| p.geometry));
            self.bonds.push(Bond {
                a: opening.atom,
                b: current,
                order,
                geometry,
            });
            // The opening atom reserved a slot at the digit's position.
            self.atoms[opening.atom].neighbor_order[opening.slot] = NeighborSlot::Atom(current);
            self.atoms[current]
                .neighbor_order
                .push(NeighborSlot::Atom(opening.atom));
        } else {
            let slot = self.atoms[current].neighbor_order.len();
            // Reserve the slot now so chirality parity sees the digit where
            // it was written; the index is patched at closure time.
            self.atoms[current].neighbor_order.push(NeighborSlot::Atom(usize::MAX));
            self.open_rings.insert(
                digit,
                RingOpening {
                    atom: current,
                    order: pending.and_then(|p| p.order),
                    geometry: pending.and_then(|p| p.geometry),
                    slot,
                },
            );
            self.ring_positions.insert(digit, position);
        }
        Ok(())
    }

    fn open_branch(&mut self) -> Result<(), SyntaxError> {
        let position = self.pos;
        self.bump();
        if self.pending.is_some() {
            return err(SyntaxErrorKind::DanglingBond, position);
        }
        match self.prev {
            Some(atom) => {
                self.branch_stack.push((atom, position));
                Ok(())
            }
            None => err(SyntaxErrorKind::UnexpectedChar('('), position),
        }
    }

    fn close_branch(&mut self) -> Result<(), SyntaxError> {
        let position = self.pos;
        self.bump();
        if self.pending.is_some() {
            return err(SyntaxErrorKind::DanglingBond, position);
        }
        match self.branch_stack.pop() {
            Some((atom, _)) => {
                self.prev = Some(atom);
                Ok(())
            }
            None => err(SyntaxErrorKind::UnmatchedBracket, position),
        }
    }

    fn dot(&mut self) -> Result<(), SyntaxError> {
        let position = self.pos;
        self.bump();
        if self.pending.is_some() {
            return err(SyntaxErrorKind::DanglingBond, position);
        }
        if !self.branch_stack.is_empty() {
            return err(SyntaxErrorKind::UnexpectedChar('.'), position);
        }
        if self.prev.is_none() {
            return err(SyntaxErrorKind::UnexpectedChar('.'), position);
        }
        self.prev = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.atoms.len(), 1);
        assert!(g.bonds.is_empty());
        assert_eq!(g.atoms[0].element, Element::CARBON);
        assert_eq!(g.fragment_count, 1);
    }

    #[test]
    fn unmatched_branch_reports_detection_point() {
        let e = parse_smiles("C(C").unwrap_err();
        assert_eq!(e.kind, SyntaxErrorKind::UnmatchedBracket);
        assert_eq!(e.position, 3);
    }

    #[test]
    fn unmatched_ring_digit() {
        let e = parse_smiles("C1CC").unwrap_err();
        assert_eq!(e.kind, SyntaxErrorKind::UnmatchedRingClosure(1));
    }

    #[test]
    fn bracket_isotope_and_hydrogens() {
        // Hand-applied bracket grammar: isotope 13, carbon, four hydrogens.
        let g = parse_smiles("[13CH4]").unwrap();
        assert_eq!(g.atoms.len(), 1);
        let a = &g.atoms[0];
        assert_eq!(a.element, Element::CARBON);
        assert_eq!(a.isotope, Some(13));
        assert_eq!(a.explicit_h, Some(4));
    }

    #[test]
    fn charges_and_signed_runs() {
        assert_eq!(parse_smiles("[NH4+]").unwrap().atoms[0].charge, 1);
        assert_eq!(parse_smiles("[O-]").unwrap().atoms[0].charge, -1);
        assert_eq!(parse_smiles("[Ca+2]").unwrap().atoms[0].charge, 2);
        assert_eq!(parse_smiles("[Fe++]").unwrap().atoms[0].charge, 2);
    }

    #[test]
    fn ring_closure_builds_cycle() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.bonds.len(), 3);
        assert_eq!(g.fragment_count, 1);
    }

    #[test]
    fn ring_bond_order_conflict() {
        assert!(parse_smiles("C=1CCC1C").is_ok());
        let e = parse_smiles("C=1CCC#1").unwrap_err();
        assert!(matches!(e.kind, SyntaxErrorKind::RingBondConflict(1)));
    }

    #[test]
    fn ring_rebond_rejected() {
        assert!(matches!(
            parse_smiles("C12CC12").unwrap_err().kind,
            SyntaxErrorKind::RingClosureRebond(_)
        ));
        assert!(matches!(
            parse_smiles("C11").unwrap_err().kind,
            SyntaxErrorKind::RingClosureRebond(_)
        ));
    }

    #[test]
    fn dangling_bonds() {
        assert_eq!(parse_smiles("CC=").unwrap_err().kind, SyntaxErrorKind::DanglingBond);
        assert_eq!(parse_smiles("=C").unwrap_err().kind, SyntaxErrorKind::DanglingBond);
        assert_eq!(parse_smiles("C(=)C").unwrap_err().kind, SyntaxErrorKind::DanglingBond);
        assert_eq!(parse_smiles("C=#C").unwrap_err().kind, SyntaxErrorKind::DanglingBond);
    }

    #[test]
    fn unsupported_features() {
        assert!(matches!(
            parse_smiles("C*").unwrap_err().kind,
            SyntaxErrorKind::UnsupportedFeature(_)
        ));
        assert!(matches!(
            parse_smiles("C$C").unwrap_err().kind,
            SyntaxErrorKind::UnsupportedFeature(_)
        ));
        assert!(matches!(
            parse_smiles("[CH3:1]").unwrap_err().kind,
            SyntaxErrorKind::UnsupportedFeature(_)
        ));
    }

    #[test]
    fn unknown_elements() {
        assert!(matches!(
            parse_smiles("[Xx]").unwrap_err().kind,
            SyntaxErrorKind::UnknownElement(_)
        ));
        // Bare atoms outside the organic subset need brackets.
        assert!(parse_smiles("NaCl").is_err());
        assert!(parse_smiles("[Na+].[Cl-]").is_ok());
    }

    #[test]
    fn fragments_via_dot() {
        let g = parse_smiles("CC.O").unwrap();
        assert_eq!(g.fragment_count, 2);
        assert_eq!(g.atoms.len(), 3);
        assert_eq!(g.bonds.len(), 1);
    }

    #[test]
    fn aromatic_default_bond() {
        let g = parse_smiles("cc").unwrap();
        assert_eq!(g.bonds[0].order, BondOrder::Aromatic);
        let g = parse_smiles("Cc1ccccc1").unwrap();
        assert_eq!(g.bonds[0].order, BondOrder::Single);
    }

    #[test]
    fn geometry_marks_recorded() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bonds[0].geometry, Some(GeometryMark::Up));
        assert_eq!(g.bonds[1].geometry, None);
        assert_eq!(g.bonds[2].geometry, Some(GeometryMark::Up));
    }

    #[test]
    fn percent_ring_closures() {
        let g = parse_smiles("C%12CC%12").unwrap();
        assert_eq!(g.bonds.len(), 3);
    }

    #[test]
    fn chiral_neighbor_order_tracks_text() {
        let g = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        let chiral = &g.atoms[1];
        assert_eq!(chiral.chirality, Some(Chirality::Clockwise));
        assert_eq!(
            chiral.neighbor_order,
            vec![
                NeighborSlot::Atom(0),
                NeighborSlot::ImplicitH,
                NeighborSlot::Atom(2),
                NeighborSlot::Atom(3),
            ]
        );
    }

    #[test]
    fn whitespace_trimmed_empty_rejected() {
        assert!(parse_smiles("  CCO  ").is_ok());
        assert_eq!(parse_smiles("   ").unwrap_err().kind, SyntaxErrorKind::EmptyInput);
    }
}
