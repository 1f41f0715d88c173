//! Smallest set of smallest rings via Horton's candidate cycles and GF(2)
//! independence. The basis size always equals bonds - atoms + components.

use super::MoleculeGraph;

/// Iterative degree-<=1 pruning; cycles only pass through surviving atoms.
fn two_core(g: &MoleculeGraph) -> Vec<bool> {
    let mut keep = vec![true; g.atoms.len()];
    loop {
        let mut removed = false;
        for i in 0..g.atoms.len() {
            if !keep[i] {
                continue;
            }
            let degree = g
                .bonds
                .iter()
                .filter(|b| b.touches(i) && keep[b.other(i)])
                .count();
            if degree <= 1 {
                keep[i] = false;
                removed = true;
            }
        }
        if !removed {
            return keep;
        }
    }
}

/// Shortest-path tree from `src` (unweighted) restricted to `within`.
fn bfs_parents_within(g: &MoleculeGraph, src: usize, within: &[bool]) -> Vec<Option<usize>> {
    let n = g.atoms.len();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[src] = true;
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v) {
            if within[w] && !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    parent
}

fn path_to_root(parent: &[Option<usize>], mut v: usize) -> Vec<usize> {
    let mut path = vec![v];
    while let Some(p) = parent[v] {
        path.push(p);
        v = p;
    }
    path
}

/// Edge-set bitmask of a vertex cycle, or None if the vertex list does not
/// describe a simple cycle in `g`.
fn cycle_edges(ring: &[usize], edge_index: &[(usize, usize)]) -> Option<Vec<u64>> {
    let words = (edge_index.len() + 63) / 64;
    let mut mask = vec![0u64; words];
    let m = ring.len();
    for i in 0..m {
        let a = ring[i];
        let b = ring[(i + 1) % m];
        let e = edge_index
            .iter()
            .position(|&(x, y)| (x == a && y == b) || (x == b && y == a))?;
        mask[e / 64] |= 1 << (e % 64);
    }
    Some(mask)
}

pub fn perceive(g: &MoleculeGraph) -> MoleculeGraph {
    let mut out = g.clone();
    out.rings = find_sssr(g);
    out
}

pub fn find_sssr(g: &MoleculeGraph) -> Vec<Vec<usize>> {
    let n = g.atoms.len();
    let m = g.bonds.len();
    let (_, components) = g.components();
    let dim = (m + components).saturating_sub(n);
    if dim == 0 {
        return Vec::new();
    }
    let edge_index: Vec<(usize, usize)> = g.bonds.iter().map(|b| (b.a, b.b)).collect();

    // Every cycle lives in the 2-core, so roots, candidate edges, and the
    // BFS itself stay inside it.
    let core = two_core(g);

    // Horton candidates: for every root r and edge (x, y), the cycle made of
    // the two shortest paths r..x and r..y plus the edge, kept when the paths
    // share only r.
    let mut candidates: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut seen_rings: std::collections::HashSet<Vec<usize>> = std::collections::HashSet::new();
    for root in 0..n {
        if !core[root] {
            continue;
        }
        let parent = bfs_parents_within(g, root, &core);
        for bond in &g.bonds {
            let (x, y) = (bond.a, bond.b);
            if !core[x] || !core[y] {
                continue;
            }
            if x == root || y == root {
                continue;
            }
            let px = path_to_root(&parent, x);
            let py = path_to_root(&parent, y);
            if px.last() != Some(&root) || py.last() != Some(&root) {
                continue;
            }
            let sx: std::collections::HashSet<usize> = px.iter().copied().collect();
            let shared: Vec<usize> = py.iter().copied().filter(|v| sx.contains(v)).collect();
            if shared != [root] {
                continue;
            }
            // Vertex list x .. root .. y; the closing edge (y, x) wraps.
            let mut ring: Vec<usize> = {
                let mut r = px;
                r.pop();
                let mut tail: Vec<usize> = py;
                tail.reverse();
                r.extend(tail);
                r
            };
            let mut key = ring.clone();
            key.sort_unstable();
            key.dedup();
            if key.len() != ring.len() {
                continue;
            }
            if seen_rings.insert(key) {
                let len = ring.len();
                ring.shrink_to_fit();
                candidates.push((len, ring));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    // Greedy GF(2) basis selection over edge incidence vectors. Basis rows
    // keep distinct leading bits, so one reduction sweep per row suffices.
    let mut pivots: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut chosen: Vec<Vec<usize>> = Vec::new();
    for (_, ring) in candidates {
        if chosen.len() == dim {
            break;
        }
        let Some(vec) = cycle_edges(&ring, &edge_index) else {
            continue;
        };
        if gf2_insert(&mut pivots, vec) {
            chosen.push(ring);
        }
    }
    chosen
}

fn first_set_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Inserts `v` into the echelon basis; returns false when dependent.
fn gf2_insert(pivots: &mut Vec<(usize, Vec<u64>)>, mut v: Vec<u64>) -> bool {
    loop {
        let Some(lead) = first_set_bit(&v) else {
            return false;
        };
        match pivots.binary_search_by_key(&lead, |p| p.0) {
            Ok(i) => {
                let row = pivots[i].1.clone();
                for (word, other) in v.iter_mut().zip(row) {
                    *word ^= other;
                }
            }
            Err(i) => {
                pivots.insert(i, (lead, v));
                return true;
            }
        }
    }
}
