//! Bemis-Murcko scaffolds: strip terminal atoms until only ring systems and
//! the linkers between them remain.

use super::MoleculeGraph;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scaffold {
    pub graph: MoleculeGraph,
    /// True for acyclic input, which reduces to nothing.
    pub is_empty: bool,
}

impl Scaffold {
    /// Canonical SMILES of the scaffold; empty string for empty scaffolds.
    pub fn key(&self) -> String {
        if self.is_empty {
            String::new()
        } else {
            self.graph.canonical_smiles()
        }
    }
}

pub fn bemis_murcko(g: &MoleculeGraph) -> Scaffold {
    // Iterated removal of degree-<=1 atoms leaves the maximal subgraph of
    // minimum degree 2: exactly the rings plus ring-to-ring linkers.
    let mut keep: Vec<bool> = vec![true; g.atoms.len()];
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
            break;
        }
    }
    let kept: Vec<usize> = (0..g.atoms.len()).filter(|&i| keep[i]).collect();
    if kept.is_empty() {
        return Scaffold {
            graph: MoleculeGraph::default(),
            is_empty: true,
        };
    }
    let graph = g.subgraph(&kept).perceive_rings();
    Scaffold {
        graph,
        is_empty: false,
    }
}
