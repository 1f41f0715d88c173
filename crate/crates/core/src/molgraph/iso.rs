//! Exact graph isomorphism and substructure search by backtracking. Both are
//! used on small molecular graphs where plain pruning is plenty.

use super::{Bond, MoleculeGraph, NeighborSlot};

type AtomKey = (u8, i32, u16, usize, u8, bool);

fn atom_key(g: &MoleculeGraph, i: usize) -> AtomKey {
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

fn bonds_equal(x: &Bond, y: &Bond) -> bool {
    x.order == y.order && x.geometry == y.geometry
}

/// Connectivity-first visiting order so each atom after the first has a
/// previously-placed neighbor whenever the graph allows it.
fn search_order(g: &MoleculeGraph) -> Vec<usize> {
    let n = g.atoms.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = (0..n)
            .filter(|&i| !placed[i])
            .find(|&i| g.neighbors(i).iter().any(|&w| placed[w]))
            .or_else(|| (0..n).find(|&i| !placed[i]))
            .unwrap();
        placed[next] = true;
        order.push(next);
    }
    order
}

/// Attribute-preserving isomorphism, including chirality up to the parity of
/// the written neighbor order and literal geometry marks.
pub fn is_isomorphic(a: &MoleculeGraph, b: &MoleculeGraph) -> bool {
    if a.atoms.len() != b.atoms.len() || a.bonds.len() != b.bonds.len() {
        return false;
    }
    let mut keys_a: Vec<AtomKey> = (0..a.atoms.len()).map(|i| atom_key(a, i)).collect();
    let mut keys_b: Vec<AtomKey> = (0..b.atoms.len()).map(|i| atom_key(b, i)).collect();
    let order = search_order(a);
    keys_a.sort_unstable();
    keys_b.sort_unstable();
    if keys_a != keys_b {
        return false;
    }

    let n = a.atoms.len();
    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn assign(
        a: &MoleculeGraph,
        b: &MoleculeGraph,
        order: &[usize],
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return chirality_consistent(a, b, mapping);
        }
        let u = order[depth];
        let key_u = atom_key(a, u);
        for v in 0..b.atoms.len() {
            if used[v] || atom_key(b, v) != key_u {
                continue;
            }
            let mut ok = true;
            for &w in order[..depth].iter() {
                let eu = a.bond_between(u, w);
                let ev = b.bond_between(v, mapping[w]);
                match (eu, ev) {
                    (None, None) => {}
                    (Some(x), Some(y)) if bonds_equal(x, y) => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            mapping[u] = v;
            used[v] = true;
            if assign(a, b, order, depth + 1, mapping, used) {
                return true;
            }
            used[v] = false;
            mapping[u] = usize::MAX;
        }
        false
    }
    assign(a, b, &order, 0, &mut mapping, &mut used)
}

fn chirality_consistent(a: &MoleculeGraph, b: &MoleculeGraph, mapping: &[usize]) -> bool {
    for (i, atom) in a.atoms.iter().enumerate() {
        let other = &b.atoms[mapping[i]];
        match (atom.chirality, other.chirality) {
            (None, None) => continue,
            (Some(ta), Some(tb)) => {
                let mapped: Vec<NeighborSlot> = atom
                    .neighbor_order
                    .iter()
                    .map(|slot| match slot {
                        NeighborSlot::ImplicitH => NeighborSlot::ImplicitH,
                        NeighborSlot::Atom(x) => NeighborSlot::Atom(mapping[*x]),
                    })
                    .collect();
                match permutation_parity(&mapped, &other.neighbor_order) {
                    Some(false) => {
                        if ta != tb {
                            return false;
                        }
                    }
                    Some(true) => {
                        if ta == tb {
                            return false;
                        }
                    }
                    // Slot lists that no longer line up (subgraph extraction)
                    // carry no parity information.
                    None => continue,
                }
            }
            _ => return false,
        }
    }
    true
}

fn permutation_parity(from: &[NeighborSlot], to: &[NeighborSlot]) -> Option<bool> {
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

/// First embedding of `pattern` into `target`, if any. Pattern atoms match on
/// element and aromatic flag; charge only constrains when nonzero in the
/// pattern. Pattern bonds must exist in the target with the same order; extra
/// target bonds are allowed.
pub fn find_substructure(pattern: &MoleculeGraph, target: &MoleculeGraph) -> Option<Vec<usize>> {
    if pattern.atoms.is_empty() || pattern.atoms.len() > target.atoms.len() {
        return None;
    }
    let order = search_order(pattern);
    let mut mapping = vec![usize::MAX; pattern.atoms.len()];
    let mut used = vec![false; target.atoms.len()];

    fn compatible(p: &MoleculeGraph, t: &MoleculeGraph, pi: usize, ti: usize) -> bool {
        let pa = &p.atoms[pi];
        let ta = &t.atoms[ti];
        pa.element == ta.element
            && pa.aromatic == ta.aromatic
            && (pa.charge == 0 || pa.charge == ta.charge)
            && p.degree(pi) <= t.degree(ti)
    }

    fn assign(
        p: &MoleculeGraph,
        t: &MoleculeGraph,
        order: &[usize],
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let u = order[depth];
        for v in 0..t.atoms.len() {
            if used[v] || !compatible(p, t, u, v) {
                continue;
            }
            let mut ok = true;
            for &w in order[..depth].iter() {
                if let Some(pb) = p.bond_between(u, w) {
                    match t.bond_between(v, mapping[w]) {
                        Some(tb) if tb.order == pb.order => {}
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            mapping[u] = v;
            used[v] = true;
            if assign(p, t, order, depth + 1, mapping, used) {
                return true;
            }
            used[v] = false;
            mapping[u] = usize::MAX;
        }
        false
    }

    if assign(pattern, target, &order, 0, &mut mapping, &mut used) {
        Some(mapping)
    } else {
        None
    }
}

/// All pairwise-disjoint-free embeddings' anchor atoms, used when a rewrite
/// needs every match site. Matches are reported by the image of pattern atom
/// 0 and deduplicated.
pub fn find_all_anchors(pattern: &MoleculeGraph, target: &MoleculeGraph) -> Vec<Vec<usize>> {
    let mut results = Vec::new();
    let order = search_order(pattern);
    let mut mapping = vec![usize::MAX; pattern.atoms.len()];
    let mut used = vec![false; target.atoms.len()];

    fn assign_all(
        p: &MoleculeGraph,
        t: &MoleculeGraph,
        order: &[usize],
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
        results: &mut Vec<Vec<usize>>,
    ) {
        if depth == order.len() {
            results.push(mapping.to_vec());
            return;
        }
        let u = order[depth];
        for v in 0..t.atoms.len() {
            if used[v] {
                continue;
            }
            let pa = &p.atoms[u];
            let ta = &t.atoms[v];
            if pa.element != ta.element
                || pa.aromatic != ta.aromatic
                || (pa.charge != 0 && pa.charge != ta.charge)
                || p.degree(u) > t.degree(v)
            {
                continue;
            }
            let mut ok = true;
            for &w in order[..depth].iter() {
                if let Some(pb) = p.bond_between(u, w) {
                    match t.bond_between(v, mapping[w]) {
                        Some(tb) if tb.order == pb.order => {}
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            mapping[u] = v;
            used[v] = true;
            assign_all(p, t, order, depth + 1, mapping, used, results);
            used[v] = false;
            mapping[u] = usize::MAX;
        }
    }

    assign_all(pattern, target, &order, 0, &mut mapping, &mut used, &mut results);
    results.sort();
    results.dedup();
    results
}
