//! Canonical SMILES writing: Morgan-style invariant refinement with
//! deterministic tie-splitting, then a rank-driven depth-first writer.
//!
//! Tie splitting tries every member of the lowest tied class and keeps the
//! lexicographically smallest string, so the output is independent of input
//! atom order even when refinement alone cannot separate symmetric atoms.

use super::{hydrogens, BondOrder, MoleculeGraph, NeighborSlot};

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

type InitialKey = (u8, i32, u16, usize, u8, bool);

fn initial_key(g: &MoleculeGraph, i: usize) -> InitialKey {
    let a = &g.atoms[i];
    (
        a.element.atomic_number(),
        a.charge,
        a.isotope.unwrap_or(0),
        g.degree(i),
        a.total_h(),
        a.aromatic,
    )
}

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap())
        .collect()
}

fn refine_step(g: &MoleculeGraph, ranks: &[usize]) -> Vec<usize> {
    let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..g.atoms.len())
        .map(|i| {
            let mut nb: Vec<(u8, usize)> = g
                .bonds_of(i)
                .iter()
                .map(|b| (bond_code(b.order), ranks[b.other(i)]))
                .collect();
            nb.sort_unstable();
            (ranks[i], nb)
        })
        .collect();
    dense_rank(&keys)
}

fn refine(g: &MoleculeGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let next = refine_step(g, &ranks);
        if next == ranks {
            return ranks;
        }
        ranks = next;
    }
}

/// Structural equivalence classes without tie-breaking.
pub(crate) fn refined_classes(g: &MoleculeGraph) -> Vec<usize> {
    let g = g.assign_implicit_hydrogens();
    let keys: Vec<InitialKey> = (0..g.atoms.len()).map(|i| initial_key(&g, i)).collect();
    refine(&g, dense_rank(&keys))
}

/// Ring perception, lenient aromaticity upgrade, and hydrogen assignment.
/// Declared-aromatic atoms that fail perception keep their flags so invalid
/// input still writes back to itself. Graphs that cannot host an aromatic
/// ring (no declared flags and either no cycles or no double bonds) skip
/// perception entirely.
fn prepare(g: &MoleculeGraph) -> MoleculeGraph {
    let any_declared = g.atoms.iter().any(|a| a.aromatic);
    let (_, components) = g.components();
    let cycle_dim = (g.bonds.len() + components).saturating_sub(g.atoms.len());
    let any_double = g.bonds.iter().any(|b| b.order == BondOrder::Double);
    if !any_declared && (cycle_dim == 0 || !any_double) {
        return g.assign_implicit_hydrogens();
    }
    let ringed = g.perceive_rings();
    let upgraded = match ringed.perceive_aromaticity() {
        Ok(p) => p,
        Err(_) => ringed,
    };
    upgraded.assign_implicit_hydrogens()
}

pub fn canonical_smiles(g: &MoleculeGraph) -> String {
    let prepared = prepare(g);
    let (comp, count) = prepared.components();
    if count <= 1 {
        return canon_component(&prepared);
    }
    let mut parts: Vec<String> = (0..count)
        .map(|c| {
            let keep: Vec<usize> = (0..prepared.atoms.len()).filter(|&i| comp[i] == c).collect();
            canon_component(&prepared.subgraph(&keep))
        })
        .collect();
    parts.sort();
    parts.join(".")
}

fn canon_component(g: &MoleculeGraph) -> String {
    let keys: Vec<InitialKey> = (0..g.atoms.len()).map(|i| initial_key(g, i)).collect();
    let ranks = dense_rank(&keys);
    canon_search(g, ranks)
}

fn canon_search(g: &MoleculeGraph, ranks: Vec<usize>) -> String {
    let ranks = refine(g, ranks);
    let n = g.atoms.len();
    let mut class_size = vec![0usize; n];
    for &r in &ranks {
        class_size[r] += 1;
    }
    let tied = (0..n).filter(|&r| class_size[r] > 1).min();
    let Some(tied_rank) = tied else {
        return write_component(g, &ranks);
    };
    let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == tied_rank).collect();
    members
        .into_iter()
        .map(|m| {
            let mut split: Vec<usize> = ranks.iter().map(|&r| if r > tied_rank { r + 1 } else { r }).collect();
            for i in 0..n {
                if ranks[i] == tied_rank && i != m {
                    split[i] = tied_rank + 1;
                }
            }
            canon_search(g, split)
        })
        .min()
        .unwrap()
}

/// Writes the molecule with an explicit priority order (lower value first).
/// Used by canonicalization and by randomized-rewriting tests.
pub fn write_smiles_with_order(g: &MoleculeGraph, priority: &[usize]) -> String {
    let g = g.assign_implicit_hydrogens();
    let (comp, count) = g.components();
    if count <= 1 {
        return write_component(&g, priority);
    }
    // Components appear in order of their highest-priority atom.
    let mut starts: Vec<(usize, usize)> = (0..count)
        .map(|c| {
            let best = (0..g.atoms.len())
                .filter(|&i| comp[i] == c)
                .min_by_key(|&i| priority[i])
                .unwrap();
            (priority[best], c)
        })
        .collect();
    starts.sort_unstable();
    starts
        .into_iter()
        .map(|(_, c)| {
            let keep: Vec<usize> = (0..g.atoms.len()).filter(|&i| comp[i] == c).collect();
            let sub = g.subgraph(&keep);
            let sub_priority: Vec<usize> = keep.iter().map(|&i| priority[i]).collect();
            write_component(&sub, &sub_priority)
        })
        .collect::<Vec<_>>()
        .join(".")
}

struct Plan {
    parent: Vec<Option<usize>>,
    parent_bond: Vec<Option<usize>>,
    children: Vec<Vec<(usize, usize)>>, // (child atom, bond id)
    openings: Vec<Vec<usize>>,          // bond ids opened at this atom
    closings: Vec<Vec<usize>>,          // bond ids closed at this atom
    order: Vec<usize>,                  // dfs order of atoms
}

fn build_plan(g: &MoleculeGraph, priority: &[usize], root: usize) -> Plan {
    let n = g.atoms.len();
    let mut plan = Plan {
        parent: vec![None; n],
        parent_bond: vec![None; n],
        children: vec![Vec::new(); n],
        openings: vec![Vec::new(); n],
        closings: vec![Vec::new(); n],
        order: Vec::new(),
    };
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, b) in g.bonds.iter().enumerate() {
        adjacency[b.a].push((b.b, bi));
        adjacency[b.b].push((b.a, bi));
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|&(w, _)| (priority[w], w));
    }
    let mut visited = vec![false; n];
    let mut bond_used = vec![false; g.bonds.len()];

    // Iterative DFS that scans each atom's neighbors in priority order.
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    visited[root] = true;
    plan.order.push(root);
    loop {
        let Some(&(v, cursor)) = stack.last() else {
            break;
        };
        if cursor >= adjacency[v].len() {
            stack.pop();
            continue;
        }
        stack.last_mut().unwrap().1 += 1;
        let (w, bi) = adjacency[v][cursor];
        if bond_used[bi] {
            continue;
        }
        if !visited[w] {
            bond_used[bi] = true;
            visited[w] = true;
            plan.parent[w] = Some(v);
            plan.parent_bond[w] = Some(bi);
            plan.children[v].push((w, bi));
            plan.order.push(w);
            stack.push((w, 0));
        } else {
            // Ring closure; w was reached first and owns the opening digit.
            bond_used[bi] = true;
            plan.openings[w].push(bi);
            plan.closings[v].push(bi);
        }
    }
    plan
}

struct Emitter<'a> {
    g: &'a MoleculeGraph,
    plan: &'a Plan,
    digit_of_bond: Vec<Option<u16>>,
    free_digits: std::collections::BinaryHeap<std::cmp::Reverse<u16>>,
    out: String,
}

fn bond_symbol(g: &MoleculeGraph, bond_id: usize) -> String {
    let b = &g.bonds[bond_id];
    let both_aromatic = g.atoms[b.a].aromatic && g.atoms[b.b].aromatic;
    let mut s = String::new();
    match b.order {
        BondOrder::Single => {
            if let Some(mark) = b.geometry {
                s.push(mark.as_char());
            } else if both_aromatic {
                s.push('-');
            }
        }
        BondOrder::Double => s.push('='),
        BondOrder::Triple => s.push('#'),
        BondOrder::Aromatic => {
            if !both_aromatic {
                s.push(':');
            }
        }
    }
    s
}

fn write_component(g: &MoleculeGraph, priority: &[usize]) -> String {
    let root = (0..g.atoms.len()).min_by_key(|&i| (priority[i], i)).unwrap();
    let plan = build_plan(g, priority, root);
    let mut emitter = Emitter {
        g,
        plan: &plan,
        digit_of_bond: vec![None; g.bonds.len()],
        free_digits: (1..=99).map(std::cmp::Reverse).collect(),
        out: String::new(),
    };
    emitter.emit_atom(root);
    emitter.out
}

impl<'a> Emitter<'a> {
    fn emit_atom(&mut self, v: usize) {
        // Neighbor order as it will appear in the output, for parity.
        let mut out_order: Vec<NeighborSlot> = Vec::new();
        if let Some(p) = self.plan.parent[v] {
            out_order.push(NeighborSlot::Atom(p));
        }
        let atom = &self.g.atoms[v];
        let bracket = needs_bracket(self.g, v);
        if bracket && atom.total_h() > 0 {
            out_order.push(NeighborSlot::ImplicitH);
        }
        for &bi in &self.plan.closings[v] {
            out_order.push(NeighborSlot::Atom(self.g.bonds[bi].other(v)));
        }
        for &bi in &self.plan.openings[v] {
            out_order.push(NeighborSlot::Atom(self.g.bonds[bi].other(v)));
        }
        for &(child, _) in &self.plan.children[v] {
            out_order.push(NeighborSlot::Atom(child));
        }

        self.out.push_str(&atom_token(self.g, v, bracket, &out_order));

        for &bi in &self.plan.closings[v] {
            let digit = self.digit_of_bond[bi].expect("closing an unopened ring digit");
            self.push_digit(digit);
            self.free_digits.push(std::cmp::Reverse(digit));
        }
        for &bi in &self.plan.openings[v] {
            let std::cmp::Reverse(digit) =
                self.free_digits.pop().expect("ring closure digits exhausted");
            self.digit_of_bond[bi] = Some(digit);
            self.out.push_str(&bond_symbol(self.g, bi));
            self.push_digit(digit);
        }

        let children = &self.plan.children[v];
        for (k, &(child, bi)) in children.iter().enumerate() {
            let last = k + 1 == children.len();
            if !last {
                self.out.push('(');
            }
            self.out.push_str(&bond_symbol(self.g, bi));
            self.emit_atom(child);
            if !last {
                self.out.push(')');
            }
        }
    }

    fn push_digit(&mut self, digit: u16) {
        if digit < 10 {
            self.out.push((b'0' + digit as u8) as char);
        } else {
            self.out.push('%');
            self.out.push_str(&format!("{digit:02}"));
        }
    }
}

/// Whether the atom must be written in brackets: any decoration, or a
/// hydrogen count a bare atom would not re-derive.
fn needs_bracket(g: &MoleculeGraph, i: usize) -> bool {
    let atom = &g.atoms[i];
    if !atom.element.in_organic_subset()
        || atom.charge != 0
        || atom.isotope.is_some()
        || atom.chirality.is_some()
    {
        return true;
    }
    match hydrogens::inferred_h_as_bare(g, i) {
        Some(h) => h != atom.total_h(),
        None => atom.total_h() != 0,
    }
}

fn atom_token(g: &MoleculeGraph, i: usize, bracket: bool, out_order: &[NeighborSlot]) -> String {
    let atom = &g.atoms[i];
    let symbol = if atom.aromatic {
        atom.element.symbol().to_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if !bracket {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&symbol);
    if let Some(tag) = atom.chirality {
        let tag = match parity_between(&atom.neighbor_order, out_order) {
            Some(true) => tag.flipped(),
            _ => tag,
        };
        s.push_str(match tag {
            super::Chirality::Counterclockwise => "@",
            super::Chirality::Clockwise => "@@",
        });
    }
    match atom.total_h() {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{h}")),
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 1 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    s.push(']');
    s
}

/// Parity of the permutation mapping `from` onto `to` (true = odd). `None`
/// when the slot lists do not contain the same entries.
fn parity_between(from: &[NeighborSlot], to: &[NeighborSlot]) -> Option<bool> {
    if from.len() != to.len() {
        return None;
    }
    let mut used = vec![false; from.len()];
    let mut perm = Vec::with_capacity(to.len());
    for slot in to {
        let pos = from
            .iter()
            .enumerate()
            .position(|(k, s)| !used[k] && s == slot)?;
        used[pos] = true;
        perm.push(pos);
    }
    let mut inversions = 0usize;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    Some(inversions % 2 == 1)
}
