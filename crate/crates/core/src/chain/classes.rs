use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::sparse::CsrMatrix;

/// Closed strongly connected components of the support digraph, each sorted,
/// ordered by smallest member.
pub fn recurrent_classes(kernel: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = kernel.size();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, kernel.nnz());
    for _ in 0..n {
        graph.add_node(());
    }
    for i in 0..n {
        for (j, _) in kernel.row_entries(i) {
            graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), ());
        }
    }

    let components = tarjan_scc(&graph);
    let mut component_of = vec![0usize; n];
    for (k, comp) in components.iter().enumerate() {
        for node in comp {
            component_of[node.index()] = k;
        }
    }

    let mut closed: Vec<Vec<usize>> = components
        .iter()
        .enumerate()
        .filter(|(k, comp)| {
            comp.iter().all(|node| {
                kernel
                    .row_entries(node.index())
                    .all(|(j, _)| component_of[j] == *k)
            })
        })
        .map(|(_, comp)| {
            let mut states: Vec<usize> = comp.iter().map(|v| v.index()).collect();
            states.sort_unstable();
            states
        })
        .collect();
    closed.sort_unstable_by_key(|c| c[0]);
    closed
}
