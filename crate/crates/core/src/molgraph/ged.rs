//! Exact graph edit distance under the node-edit algebra used for mutation.
//!
//! Only `add`, `replace` and `remove` node edits are counted; bonds between
//! existing atoms are never inserted or deleted, so ring structure is fixed.
//! The search is a bidirectional breadth-first search over isomorphism
//! classes (keyed by canonical SMILES), pruned with an admissible bound.

use std::collections::HashMap;

use super::{is_isomorphic, BondOrder, MolGraph};
use crate::error::{Error, Result};
use crate::{mutation, smiles};

/// Largest heavy-atom count accepted by [`ged_exact`].
pub const GED_MAX_ATOMS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GedOutcome {
    Distance(usize),
    /// No edit sequence of length `<= max_d` reaches the target.
    Exceeds,
}

impl GedOutcome {
    pub fn distance(self) -> Option<usize> {
        match self {
            GedOutcome::Distance(d) => Some(d),
            GedOutcome::Exceeds => None,
        }
    }
}

/// Quantities no edit in the algebra can change, plus element counts.
struct Profile {
    atoms: usize,
    elements: [usize; 11],
    aromatic_atoms: usize,
    cycles: isize,
    multiple_bonds: [usize; 3],
}

impl Profile {
    fn of(g: &MolGraph) -> Self {
        let mut multiple_bonds = [0; 3];
        for b in g.bonds() {
            match b.order {
                BondOrder::Single => {}
                BondOrder::Double => multiple_bonds[0] += 1,
                BondOrder::Triple => multiple_bonds[1] += 1,
                BondOrder::Aromatic => multiple_bonds[2] += 1,
            }
        }
        Profile {
            atoms: g.atom_count(),
            elements: g.element_counts(),
            aromatic_atoms: g.atoms().iter().filter(|a| a.aromatic).count(),
            cycles: g.bond_count() as isize - g.atom_count() as isize,
            multiple_bonds,
        }
    }

    /// Admissible lower bound on the number of edits; `None` if unreachable.
    fn lower_bound(&self, other: &Profile) -> Option<usize> {
        if self.aromatic_atoms != other.aromatic_atoms
            || self.cycles != other.cycles
            || self.multiple_bonds != other.multiple_bonds
        {
            return None;
        }
        let size_gap = self.atoms.abs_diff(other.atoms);
        let l1: usize = self.elements.iter().zip(&other.elements).map(|(a, b)| a.abs_diff(*b)).sum();
        // add/remove move the element histogram by 1, replace by at most 2
        Some(size_gap + (l1 - size_gap).div_ceil(2))
    }
}

struct Side {
    visited: HashMap<String, usize>,
    frontier: Vec<MolGraph>,
    depth: usize,
    origin: Profile,
}

impl Side {
    fn new(g: &MolGraph) -> Self {
        let mut visited = HashMap::new();
        visited.insert(smiles::write_unchecked(g), 0);
        Side { visited, frontier: vec![g.clone()], depth: 0, origin: Profile::of(g) }
    }
}

/// Minimum number of node edits that make `g1` isomorphic to `g2`, or
/// [`GedOutcome::Exceeds`] when more than `max_d` are needed.
pub fn ged_exact(g1: &MolGraph, g2: &MolGraph, max_d: usize) -> Result<GedOutcome> {
    for g in [g1, g2] {
        if g.atom_count() > GED_MAX_ATOMS {
            return Err(Error::GedTooLarge { atoms: g.atom_count(), limit: GED_MAX_ATOMS });
        }
    }
    if is_isomorphic(g1, g2) {
        return Ok(GedOutcome::Distance(0));
    }
    match Profile::of(g1).lower_bound(&Profile::of(g2)) {
        Some(lb) if lb <= max_d => {}
        _ => return Ok(GedOutcome::Exceeds),
    }

    let mut fwd = Side::new(g1);
    let mut bwd = Side::new(g2);
    while fwd.depth + bwd.depth < max_d {
        let expand_fwd = fwd.frontier.len() <= bwd.frontier.len();
        let (this, other) = if expand_fwd { (&mut fwd, &bwd) } else { (&mut bwd, &fwd) };
        if this.frontier.is_empty() {
            break;
        }
        let depth = this.depth + 1;
        let mut next = Vec::new();
        let mut best: Option<usize> = None;
        for state in std::mem::take(&mut this.frontier) {
            for nbr in mutation::neighbors(&state) {
                let bound = Profile::of(&nbr).lower_bound(&other.origin);
                if !matches!(bound, Some(lb) if depth + lb <= max_d) {
                    continue;
                }
                let key = smiles::write_unchecked(&nbr);
                if this.visited.contains_key(&key) {
                    continue;
                }
                if let Some(&j) = other.visited.get(&key) {
                    let total = depth + j;
                    best = Some(best.map_or(total, |b: usize| b.min(total)));
                }
                this.visited.insert(key, depth);
                next.push(nbr);
            }
        }
        this.frontier = next;
        this.depth = depth;
        if let Some(d) = best {
            return Ok(GedOutcome::Distance(d));
        }
    }
    Ok(GedOutcome::Exceeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn ged(a: &str, b: &str, max_d: usize) -> GedOutcome {
        ged_exact(&parse(a).unwrap(), &parse(b).unwrap(), max_d).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(ged("CC", "CC", 3), GedOutcome::Distance(0));
        assert_eq!(ged("OCC", "CCO", 0), GedOutcome::Distance(0));
    }

    #[test]
    fn single_addition() {
        assert_eq!(ged("CC", "CCO", 3), GedOutcome::Distance(1));
    }

    #[test]
    fn too_far_for_budget() {
        assert_eq!(ged("C", "CCC", 1), GedOutcome::Exceeds);
        assert_eq!(ged("C", "CCC", 2), GedOutcome::Distance(2));
    }

    #[test]
    fn replacement_and_mixed_paths() {
        assert_eq!(ged("CC", "CN", 2), GedOutcome::Distance(1));
        assert_eq!(ged("CCO", "NCCN", 3), GedOutcome::Distance(2));
        assert_eq!(ged("c1ccccc1", "c1ccncc1", 2), GedOutcome::Distance(1));
    }

    #[test]
    fn ring_changes_are_unreachable() {
        assert_eq!(ged("C1CC1", "CCC", 5), GedOutcome::Exceeds);
        assert_eq!(ged("C=C", "CC", 5), GedOutcome::Exceeds);
    }

    #[test]
    fn size_guard() {
        let big = parse("CCCCCCCCCCCCCCC").unwrap();
        let small = parse("C").unwrap();
        assert!(matches!(ged_exact(&big, &small, 2), Err(Error::GedTooLarge { atoms: 15, .. })));
    }
}
