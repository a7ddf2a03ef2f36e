//! Canonical SMILES output.
//!
//! Atoms are ranked by iterative neighbourhood refinement. Remaining ties
//! are broken by individualizing each member of the first tied cell in turn;
//! every fully ordered leaf is written out and the lexicographically smallest
//! string wins, so the result does not depend on input atom order.

use crate::error::{Error, Result};
use crate::molgraph::{BondOrder, Element, MolGraph};

/// Canonical SMILES for a valid graph.
pub fn write(graph: &MolGraph) -> Result<String> {
    if let Some(v) = graph.validate().first() {
        return Err(Error::InvalidGraph(v.to_string()));
    }
    Ok(write_unchecked(graph))
}

/// Canonical SMILES without validating first. The graph must be connected
/// and non-empty.
pub(crate) fn write_unchecked(graph: &MolGraph) -> String {
    let n = graph.atom_count();
    if n == 0 {
        return String::new();
    }
    let hydrogens: Vec<u8> = (0..n).map(|i| graph.hydrogen_count(i)).collect();
    let ranks = refine(graph, initial_ranks(graph, &hydrogens));
    let mut best: Option<String> = None;
    search(graph, &hydrogens, ranks, &mut best);
    best.expect("at least one leaf")
}

fn initial_ranks(graph: &MolGraph, hydrogens: &[u8]) -> Vec<usize> {
    let keys: Vec<_> = (0..graph.atom_count())
        .map(|i| {
            let a = graph.atom(i);
            let mut orders: Vec<u8> = graph.neighbors(i).map(|(_, o)| order_code(o)).collect();
            orders.sort_unstable();
            (crate::molgraph::element_index(a.element), a.aromatic, graph.degree(i), hydrogens[i], orders)
        })
        .collect();
    dense_ranks(&keys)
}

fn order_code(o: BondOrder) -> u8 {
    match o {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut rank = 0;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            rank += 1;
        }
        ranks[idx[w]] = rank;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

/// Refines an ordered partition until it is equitable. Existing order
/// between cells is preserved; cells only split.
fn refine(graph: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..graph.atom_count())
            .map(|i| {
                let mut sig: Vec<(usize, u8)> = graph.neighbors(i).map(|(v, o)| (ranks[v], order_code(o))).collect();
                sig.sort_unstable();
                (ranks[i], sig)
            })
            .collect();
        let next = dense_ranks(&keys);
        if class_count(&next) == class_count(&ranks) {
            return next;
        }
        ranks = next;
    }
}

fn search(graph: &MolGraph, hydrogens: &[u8], ranks: Vec<usize>, best: &mut Option<String>) {
    let n = ranks.len();
    if class_count(&ranks) == n {
        let s = emit(graph, hydrogens, &ranks);
        if best.as_ref().is_none_or(|b| s < *b) {
            *best = Some(s);
        }
        return;
    }
    let mut sizes = vec![0usize; n];
    for &r in &ranks {
        sizes[r] += 1;
    }
    let target = (0..n).find(|&r| sizes[r] > 1).expect("non-discrete partition has a tied cell");
    let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == target).collect();
    for &chosen in &members {
        let keys: Vec<(usize, bool)> = (0..n).map(|i| (ranks[i], ranks[i] == target && i != chosen)).collect();
        let split = refine(graph, dense_ranks(&keys));
        search(graph, hydrogens, split, best);
    }
}

fn atom_symbol(graph: &MolGraph, hydrogens: &[u8], i: usize, out: &mut String) {
    let atom = graph.atom(i);
    let h = hydrogens[i];
    if atom.element == Element::Other {
        match h {
            0 => out.push('*'),
            _ => push_bracket(out, "*", h),
        }
        return;
    }
    if atom.aromatic {
        let sym = match atom.element {
            Element::C => "c",
            Element::N => "n",
            Element::O => "o",
            Element::S => "s",
            _ => unreachable!("validated graphs only flag aromatic-capable atoms"),
        };
        let default = match atom.element {
            Element::C => 3u8.saturating_sub(graph.bond_order_sum(i)),
            _ => 0,
        };
        if h != default {
            push_bracket(out, sym, h);
        } else {
            out.push_str(sym);
        }
        return;
    }
    if atom.explicit_h.is_some() && h != default_hydrogens(graph, i) {
        push_bracket(out, atom.element.symbol(), h);
    } else {
        out.push_str(atom.element.symbol());
    }
}

fn default_hydrogens(graph: &MolGraph, i: usize) -> u8 {
    let used = graph.bond_order_sum(i);
    graph.atom(i).element.valences().iter().find(|&&v| v >= used).map_or(0, |&v| v - used)
}

fn push_bracket(out: &mut String, sym: &str, h: u8) {
    out.push('[');
    out.push_str(sym);
    match h {
        0 => {}
        1 => out.push('H'),
        _ => {
            out.push('H');
            out.push_str(&h.to_string());
        }
    }
    out.push(']');
}

fn bond_symbol(graph: &MolGraph, a: usize, b: usize, order: BondOrder, out: &mut String) {
    match order {
        BondOrder::Single => {
            if graph.atom(a).aromatic && graph.atom(b).aromatic {
                out.push('-');
            }
        }
        BondOrder::Double => out.push('='),
        BondOrder::Triple => out.push('#'),
        BondOrder::Aromatic => {}
    }
}

struct Layout {
    children: Vec<Vec<usize>>,
    /// Ring bonds opened at an atom, as partner ids.
    opens: Vec<Vec<usize>>,
    /// Ring bonds closed at an atom, as partner ids.
    closes: Vec<Vec<usize>>,
}

/// Depth-first spanning tree from the lowest-ranked atom, visiting
/// neighbours in rank order. Non-tree edges become ring closures.
fn layout(graph: &MolGraph, ranks: &[usize]) -> (usize, Layout) {
    let n = graph.atom_count();
    let root = (0..n).min_by_key(|&i| ranks[i]).expect("non-empty");
    let sorted_nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v: Vec<usize> = graph.neighbors(i).map(|(j, _)| j).collect();
            v.sort_by_key(|&j| ranks[j]);
            v
        })
        .collect();
    let mut lay = Layout { children: vec![Vec::new(); n], opens: vec![Vec::new(); n], closes: vec![Vec::new(); n] };
    let mut visited = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    // explicit stack of (atom, next neighbour index)
    let mut stack = vec![(root, 0usize)];
    visited[root] = true;
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        if *next >= sorted_nbrs[u].len() {
            stack.pop();
            continue;
        }
        let v = sorted_nbrs[u][*next];
        *next += 1;
        if !visited[v] {
            visited[v] = true;
            parent[v] = u;
            lay.children[u].push(v);
            stack.push((v, 0));
        } else if v != parent[u] && !lay.closes[v].contains(&u) && !lay.opens[u].contains(&v) {
            // v is an ancestor still on the stack: ring opens at v, closes at u
            lay.opens[v].push(u);
            lay.closes[u].push(v);
        }
    }
    (root, lay)
}

fn emit(graph: &MolGraph, hydrogens: &[u8], ranks: &[usize]) -> String {
    let (root, lay) = layout(graph, ranks);
    let n = graph.atom_count();
    let mut out = String::with_capacity(n * 2);
    let mut digit_of: std::collections::HashMap<(usize, usize), u32> = std::collections::HashMap::new();
    let mut in_use = [false; 100];
    let mut order = vec![usize::MAX; n];
    let mut counter = 0;

    enum Step {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut stack = vec![Step::Atom(root, None)];
    while let Some(step) = stack.pop() {
        let (u, from) = match step {
            Step::Open => {
                out.push('(');
                continue;
            }
            Step::Close => {
                out.push(')');
                continue;
            }
            Step::Atom(u, from) => (u, from),
        };
        if let Some(p) = from {
            let o = graph.bond_between(p, u).expect("tree edge exists");
            bond_symbol(graph, p, u, o, &mut out);
        }
        atom_symbol(graph, hydrogens, u, &mut out);
        order[u] = counter;
        counter += 1;

        let mut closes = lay.closes[u].clone();
        closes.sort_by_key(|&v| order[v]);
        for v in closes {
            let d = digit_of.remove(&(v, u)).expect("ring opened before close");
            in_use[d as usize] = false;
            push_ring_digit(&mut out, d);
        }
        let mut opens = lay.opens[u].clone();
        opens.sort_by_key(|&v| ranks[v]);
        for v in opens {
            let d = (1..100).find(|&d| !in_use[d]).expect("fewer than 99 open rings") as u32;
            in_use[d as usize] = true;
            digit_of.insert((u, v), d);
            let o = graph.bond_between(u, v).expect("ring edge exists");
            bond_symbol(graph, u, v, o, &mut out);
            push_ring_digit(&mut out, d);
        }

        let kids = &lay.children[u];
        // push in reverse so the first child is emitted first
        if let Some((&last, rest)) = kids.split_last() {
            stack.push(Step::Atom(last, Some(u)));
            for &c in rest.iter().rev() {
                stack.push(Step::Close);
                stack.push(Step::Atom(c, Some(u)));
                stack.push(Step::Open);
            }
        }
    }
    out
}

fn push_ring_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from_digit(d, 10).expect("single digit"));
    } else {
        out.push('%');
        out.push_str(&format!("{d:02}"));
    }
}
