//! Labeled graph isomorphism by colour refinement plus backtracking.

use std::collections::HashMap;

use super::{BondOrder, Element, MolGraph};

type AtomLabel = (Element, bool, u8, usize);

fn atom_label(g: &MolGraph, i: usize) -> AtomLabel {
    let a = g.atom(i);
    (a.element, a.aromatic, g.hydrogen_count(i), g.degree(i))
}

/// Refines colours of both graphs with a shared palette so that equal colours
/// mean equal neighbourhood signatures across the two graphs.
fn joint_colors(g1: &MolGraph, g2: &MolGraph) -> (Vec<usize>, Vec<usize>) {
    let mut palette: HashMap<AtomLabel, usize> = HashMap::new();
    let mut initial = |g: &MolGraph| -> Vec<usize> {
        (0..g.atom_count())
            .map(|i| {
                let next = palette.len();
                *palette.entry(atom_label(g, i)).or_insert(next)
            })
            .collect()
    };
    let mut c1 = initial(g1);
    let mut c2 = initial(g2);
    let mut classes = distinct(&c1, &c2);
    loop {
        let mut palette: HashMap<(usize, Vec<(BondOrder, usize)>), usize> = HashMap::new();
        let mut step = |g: &MolGraph, colors: &[usize]| -> Vec<usize> {
            (0..g.atom_count())
                .map(|i| {
                    let mut sig: Vec<(BondOrder, usize)> = g.neighbors(i).map(|(n, o)| (o, colors[n])).collect();
                    sig.sort_unstable();
                    let next = palette.len();
                    *palette.entry((colors[i], sig)).or_insert(next)
                })
                .collect()
        };
        let n1 = step(g1, &c1);
        let n2 = step(g2, &c2);
        let refined = distinct(&n1, &n2);
        c1 = n1;
        c2 = n2;
        if refined == classes {
            return (c1, c2);
        }
        classes = refined;
    }
}

fn distinct(a: &[usize], b: &[usize]) -> usize {
    let mut all: Vec<usize> = a.iter().chain(b).copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

fn histogram(colors: &[usize]) -> Vec<usize> {
    let mut h = colors.to_vec();
    h.sort_unstable();
    h
}

/// True iff some bijection of atoms preserves element, aromaticity,
/// hydrogen count, adjacency and bond order.
pub fn is_isomorphic(g1: &MolGraph, g2: &MolGraph) -> bool {
    if g1.atom_count() != g2.atom_count() || g1.bond_count() != g2.bond_count() {
        return false;
    }
    if g1.atom_count() == 0 {
        return true;
    }
    let (c1, c2) = joint_colors(g1, g2);
    if histogram(&c1) != histogram(&c2) {
        return false;
    }
    let order = search_order(g1, &c1);
    let mut mapping = vec![usize::MAX; g1.atom_count()];
    let mut used = vec![false; g2.atom_count()];
    extend(g1, g2, &c1, &c2, &order, 0, &mut mapping, &mut used)
}

/// Breadth-first order from the atom with the rarest colour so that each
/// atom after the first has an already-mapped neighbour when the graph is
/// connected.
fn search_order(g: &MolGraph, colors: &[usize]) -> Vec<usize> {
    let n = g.atom_count();
    let mut freq: HashMap<usize, usize> = HashMap::new();
    for &c in colors {
        *freq.entry(c).or_default() += 1;
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !seen[i])
            .min_by_key(|&i| (freq[&colors[i]], colors[i], i))
            .expect("unvisited atom remains");
        seen[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut next: Vec<usize> = g.neighbors(u).map(|(v, _)| v).filter(|&v| !seen[v]).collect();
            next.sort_by_key(|&v| (freq[&colors[v]], colors[v], v));
            for v in next {
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn extend(
    g1: &MolGraph,
    g2: &MolGraph,
    c1: &[usize],
    c2: &[usize],
    order: &[usize],
    depth: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    let mapped_nbrs: Vec<(usize, BondOrder)> = g1.neighbors(u).filter(|&(v, _)| mapping[v] != usize::MAX).collect();
    let candidates: Vec<usize> = match mapped_nbrs.first() {
        Some(&(v, _)) => g2.neighbors(mapping[v]).map(|(w, _)| w).collect(),
        None => (0..g2.atom_count()).collect(),
    };
    for cand in candidates {
        if used[cand] || c2[cand] != c1[u] {
            continue;
        }
        let consistent = mapped_nbrs.iter().all(|&(v, order)| g2.bond_between(cand, mapping[v]) == Some(order));
        if !consistent {
            continue;
        }
        let cand_mapped = g2.neighbors(cand).filter(|&(w, _)| used[w]).count();
        if cand_mapped != mapped_nbrs.len() {
            continue;
        }
        mapping[u] = cand;
        used[cand] = true;
        if extend(g1, g2, c1, c2, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[u] = usize::MAX;
        used[cand] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{Atom, BondOrder};
    use crate::smiles::parse;

    fn iso(a: &str, b: &str) -> bool {
        is_isomorphic(&parse(a).unwrap(), &parse(b).unwrap())
    }

    #[test]
    fn traversal_order_does_not_matter() {
        assert!(iso("CCO", "OCC"));
        assert!(iso("CC(C)(C)O", "OC(C)(C)C"));
        assert!(iso("c1ccccc1O", "Oc1ccccc1"));
    }

    #[test]
    fn labels_and_topology_matter() {
        assert!(!iso("CCO", "CCN"));
        assert!(!iso("C1CC1", "CCC"));
        assert!(!iso("C=CC", "CCC"));
        assert!(!iso("CCCC", "CC(C)C"));
    }

    #[test]
    fn equal_size_ring_systems_are_separated() {
        // decalin vs. spiro[4.5]decane: same atom and bond counts
        assert!(!iso("C1CCC2CCCCC2C1", "C1CCCCC12CCCC2"));
        assert!(iso("C1CCC2CCCCC2C1", "C1CC2CCCCC2CC1"));
    }

    #[test]
    fn refinement_ties_resolved_by_search() {
        // 3-regular carbon cages: colour refinement alone cannot tell them apart
        let cubane = "C12C3C4C1C5C2C3C45";
        let other = "C12C3C4C5C1C2C3C45";
        assert!(iso(cubane, cubane));
        assert_eq!(iso(cubane, other), iso(other, cubane));
    }

    #[test]
    fn hand_built_triangle_matches_parsed_ring() {
        let mut g = MolGraph::new();
        for _ in 0..3 {
            g.add_atom(Atom::new(Element::C));
        }
        g.add_bond(0, 1, BondOrder::Single).unwrap();
        g.add_bond(1, 2, BondOrder::Single).unwrap();
        g.add_bond(2, 0, BondOrder::Single).unwrap();
        assert!(is_isomorphic(&g, &parse("C1CC1").unwrap()));
    }

    #[test]
    fn permutation_preserves_isomorphism() {
        let g = parse("CC(Cc1ccc(cc1)C(C(=O)O)C)C").unwrap();
        let n = g.atom_count();
        assert_eq!(n, 15);
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        assert!(is_isomorphic(&g, &g.permuted(&perm)));
    }
}
