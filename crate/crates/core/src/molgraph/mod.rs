//! Labeled molecular graphs with implicit hydrogens.
//!
//! Atoms carry an element, an aromatic flag and (for bracket atoms such as
//! `[nH]`) an explicit hydrogen count. Bonds are undirected and carry an
//! order. Atom ids are dense indices `0..n` and are re-indexed after removal.

mod ged;
mod iso;

use std::fmt;

pub use ged::{ged_exact, GedOutcome, GED_MAX_ATOMS};
pub use iso::is_isomorphic;

use crate::error::{Error, Result};

/// Atom types. `Other` stands in for any element outside the modelled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Element {
    C,
    O,
    N,
    S,
    Br,
    Cl,
    I,
    F,
    P,
    B,
    Other,
}

impl Element {
    /// The ten concrete elements, in the order used by distributions and reports.
    pub const CONCRETE: [Element; 10] = [
        Element::C,
        Element::O,
        Element::N,
        Element::S,
        Element::Br,
        Element::Cl,
        Element::I,
        Element::F,
        Element::P,
        Element::B,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::O => "O",
            Element::N => "N",
            Element::S => "S",
            Element::Br => "Br",
            Element::Cl => "Cl",
            Element::I => "I",
            Element::F => "F",
            Element::P => "P",
            Element::B => "B",
            Element::Other => "*",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Some(match symbol {
            "C" => Element::C,
            "O" => Element::O,
            "N" => Element::N,
            "S" => Element::S,
            "Br" => Element::Br,
            "Cl" => Element::Cl,
            "I" => Element::I,
            "F" => Element::F,
            "P" => Element::P,
            "B" => Element::B,
            "*" => Element::Other,
            _ => return None,
        })
    }

    /// Allowed total valences for a non-aromatic atom, ascending. Empty for `Other`.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
            Element::P => &[3, 5],
            Element::B => &[3],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::Other => &[],
        }
    }

    /// Largest allowed valence; `None` means the check is skipped.
    pub fn max_valence(self) -> Option<u8> {
        self.valences().last().copied()
    }

    /// Valence of the element when it sits in an aromatic ring.
    pub fn aromatic_valence(self) -> Option<u8> {
        match self {
            Element::C => Some(4),
            Element::N => Some(3),
            Element::O | Element::S => Some(2),
            _ => None,
        }
    }

    pub fn is_aromatic_capable(self) -> bool {
        self.aromatic_valence().is_some()
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Standard atomic weight in daltons. `Other` contributes nothing.
    pub fn atomic_weight(self) -> f64 {
        match self {
            Element::C => 12.011,
            Element::O => 15.999,
            Element::N => 14.007,
            Element::S => 32.06,
            Element::Br => 79.904,
            Element::Cl => 35.45,
            Element::I => 126.904,
            Element::F => 18.998,
            Element::P => 30.974,
            Element::B => 10.81,
            Element::Other => 0.0,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the bond-order sum. Aromatic bonds count as one; the
    /// ring pi system is accounted separately per atom.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    /// Hydrogen count given explicitly by a bracket atom; `None` means implicit.
    pub explicit_h: Option<u8>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom { element, aromatic: false, explicit_h: None }
    }

    pub fn aromatic(element: Element) -> Self {
        Atom { element, aromatic: true, explicit_h: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// An invariant a graph fails to satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    Disconnected { components: usize },
    SelfLoop { atom: usize },
    DuplicateBond { a: usize, b: usize },
    Valence { atom: usize, used: u8, max: u8 },
    AromaticElement { atom: usize },
    AromaticBond { a: usize, b: usize },
    IsolatedAromatic { atom: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no atoms"),
            Violation::Disconnected { components } => {
                write!(f, "graph is disconnected ({components} components)")
            }
            Violation::SelfLoop { atom } => write!(f, "atom {atom} is bonded to itself"),
            Violation::DuplicateBond { a, b } => write!(f, "duplicate bond {a}-{b}"),
            Violation::Valence { atom, used, max } => {
                write!(f, "atom {atom} uses valence {used} > {max}")
            }
            Violation::AromaticElement { atom } => {
                write!(f, "atom {atom} is flagged aromatic but its element cannot be")
            }
            Violation::AromaticBond { a, b } => {
                write!(f, "aromatic bond {a}-{b} joins a non-aromatic atom")
            }
            Violation::IsolatedAromatic { atom } => {
                write!(f, "aromatic atom {atom} has fewer than two aromatic bonds")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    /// Adds a bond without checking chemistry; `validate` reports problems.
    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize> {
        let n = self.atoms.len();
        if a >= n || b >= n {
            return Err(Error::UnknownAtom(a.max(b)));
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond { a, b, order });
        self.adjacency[a].push((b, idx));
        if a != b {
            self.adjacency[b].push((a, idx));
        }
        Ok(idx)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, id: usize) -> &Atom {
        &self.atoms[id]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Neighbour ids with the connecting bond order.
    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = (usize, BondOrder)> + '_ {
        self.adjacency[id].iter().map(move |&(nbr, bond)| (nbr, self.bonds[bond].order))
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondOrder> {
        self.adjacency[a].iter().find(|&&(nbr, _)| nbr == b).map(|&(_, bond)| self.bonds[bond].order)
    }

    pub fn bond_order_sum(&self, id: usize) -> u8 {
        self.neighbors(id).map(|(_, o)| o.valence()).sum()
    }

    fn aromatic_bond_count(&self, id: usize) -> usize {
        self.neighbors(id).filter(|&(_, o)| o == BondOrder::Aromatic).count()
    }

    /// Valence units reserved for the ring pi system. Carbon and
    /// pyridine-type nitrogen hold one; pyrrole-type nitrogen, oxygen and
    /// sulfur donate a lone pair instead.
    fn pi_reserve(&self, id: usize) -> u8 {
        let atom = &self.atoms[id];
        if !atom.aromatic {
            return 0;
        }
        match atom.element {
            Element::C => 1,
            Element::N => {
                let used = self.bond_order_sum(id) + atom.explicit_h.unwrap_or(0);
                u8::from(used == 2)
            }
            _ => 0,
        }
    }

    /// Valence units consumed by bonds, explicit hydrogens and the pi reserve.
    pub fn valence_used(&self, id: usize) -> u8 {
        self.bond_order_sum(id) + self.atoms[id].explicit_h.unwrap_or(0) + self.pi_reserve(id)
    }

    /// Maximum valence for the atom given its aromaticity; `None` for `Other`.
    pub fn valence_limit(&self, id: usize) -> Option<u8> {
        let atom = &self.atoms[id];
        if atom.aromatic {
            atom.element.aromatic_valence()
        } else {
            atom.element.max_valence()
        }
    }

    /// Implicit hydrogens: the smallest allowed valence at or above the
    /// bond-order sum, minus that sum. Bracket atoms have none.
    pub fn implicit_hydrogens(&self, id: usize) -> Result<u8> {
        let atom = self.atoms.get(id).ok_or(Error::UnknownAtom(id))?;
        if atom.explicit_h.is_some() || atom.element == Element::Other {
            return Ok(0);
        }
        let used = self.bond_order_sum(id) + self.pi_reserve(id);
        if atom.aromatic {
            let limit = atom.element.aromatic_valence().unwrap_or(0);
            return Ok(match atom.element {
                Element::C => limit.saturating_sub(used),
                _ => 0,
            });
        }
        Ok(atom.element.valences().iter().find(|&&v| v >= used).map_or(0, |&v| v - used))
    }

    /// Total hydrogens attached to the atom, explicit or implicit.
    pub fn hydrogen_count(&self, id: usize) -> u8 {
        match self.atoms[id].explicit_h {
            Some(h) => h,
            None => self.implicit_hydrogens(id).unwrap_or(0),
        }
    }

    pub fn total_hydrogens(&self) -> usize {
        (0..self.atom_count()).map(|i| self.hydrogen_count(i) as usize).sum()
    }

    pub fn component_count(&self) -> usize {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        !self.atoms.is_empty() && self.component_count() == 1
    }

    /// Every violated invariant; empty iff the graph is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.atoms.is_empty() {
            out.push(Violation::Empty);
            return out;
        }
        let components = self.component_count();
        if components > 1 {
            out.push(Violation::Disconnected { components });
        }
        let mut seen_pairs = std::collections::HashSet::new();
        for bond in &self.bonds {
            if bond.a == bond.b {
                out.push(Violation::SelfLoop { atom: bond.a });
                continue;
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen_pairs.insert(key) {
                out.push(Violation::DuplicateBond { a: key.0, b: key.1 });
            }
            if bond.order == BondOrder::Aromatic && !(self.atoms[bond.a].aromatic && self.atoms[bond.b].aromatic) {
                out.push(Violation::AromaticBond { a: key.0, b: key.1 });
            }
        }
        for (id, atom) in self.atoms.iter().enumerate() {
            if atom.aromatic {
                if !atom.element.is_aromatic_capable() && atom.element != Element::Other {
                    out.push(Violation::AromaticElement { atom: id });
                }
                if self.aromatic_bond_count(id) < 2 {
                    out.push(Violation::IsolatedAromatic { atom: id });
                }
            }
            if let Some(max) = self.valence_limit(id) {
                let used = self.valence_used(id);
                if used > max {
                    out.push(Violation::Valence { atom: id, used, max });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Copy with atom `id` removed and ids above it shifted down by one.
    pub fn without_atom(&self, id: usize) -> MolGraph {
        let mut out = MolGraph::new();
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (old, atom) in self.atoms.iter().enumerate() {
            if old != id {
                map[old] = out.add_atom(*atom);
            }
        }
        for bond in &self.bonds {
            if bond.a != id && bond.b != id {
                out.add_bond(map[bond.a], map[bond.b], bond.order).expect("ids remapped in range");
            }
        }
        out
    }

    pub fn atom_mut(&mut self, id: usize) -> &mut Atom {
        &mut self.atoms[id]
    }

    /// Relabels atoms so that old atom `i` becomes `perm[i]`. Bond order is
    /// shuffled along with the atoms.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let mut inverse = vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let mut out = MolGraph::new();
        for &old in &inverse {
            out.add_atom(self.atoms[old]);
        }
        let mut bonds: Vec<Bond> =
            self.bonds.iter().map(|b| Bond { a: perm[b.a], b: perm[b.b], order: b.order }).collect();
        bonds.sort_by_key(|b| (b.a.min(b.b), b.a.max(b.b)));
        for b in bonds {
            out.add_bond(b.a, b.b, b.order).expect("permuted ids in range");
        }
        out
    }

    /// Count of each concrete element plus `Other`, indexed like `Element::CONCRETE`.
    pub fn element_counts(&self) -> [usize; 11] {
        let mut counts = [0; 11];
        for atom in &self.atoms {
            counts[element_index(atom.element)] += 1;
        }
        counts
    }
}

pub(crate) fn element_index(e: Element) -> usize {
    match e {
        Element::Other => 10,
        e => Element::CONCRETE.iter().position(|&c| c == e).expect("concrete element"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn ethane_is_valid() {
        assert!(parse("CC").unwrap().validate().is_empty());
    }

    #[test]
    fn pentavalent_carbon_is_rejected() {
        let mut g = MolGraph::new();
        let c = g.add_atom(Atom::new(Element::C));
        for _ in 0..5 {
            let h = g.add_atom(Atom::new(Element::F));
            g.add_bond(c, h, BondOrder::Single).unwrap();
        }
        let v = g.validate();
        assert_eq!(v, vec![Violation::Valence { atom: 0, used: 5, max: 4 }]);
    }

    #[test]
    fn disconnected_atoms_are_rejected() {
        let mut g = MolGraph::new();
        g.add_atom(Atom::new(Element::C));
        g.add_atom(Atom::new(Element::C));
        assert_eq!(g.validate(), vec![Violation::Disconnected { components: 2 }]);
    }

    #[test]
    fn duplicate_and_self_bonds_reported() {
        let mut g = MolGraph::new();
        g.add_atom(Atom::new(Element::C));
        g.add_atom(Atom::new(Element::C));
        g.add_bond(0, 1, BondOrder::Single).unwrap();
        g.add_bond(1, 0, BondOrder::Single).unwrap();
        g.add_bond(0, 0, BondOrder::Single).unwrap();
        let v = g.validate();
        assert!(v.contains(&Violation::DuplicateBond { a: 0, b: 1 }));
        assert!(v.contains(&Violation::SelfLoop { atom: 0 }));
    }

    #[test]
    fn aromatic_flag_mismatch_reported() {
        let mut g = MolGraph::new();
        g.add_atom(Atom::aromatic(Element::C));
        g.add_atom(Atom::new(Element::C));
        g.add_bond(0, 1, BondOrder::Aromatic).unwrap();
        let v = g.validate();
        assert!(v.contains(&Violation::AromaticBond { a: 0, b: 1 }));
        assert!(v.contains(&Violation::IsolatedAromatic { atom: 0 }));
    }

    #[test]
    fn implicit_hydrogen_counts() {
        let methane = parse("C").unwrap();
        assert_eq!(methane.implicit_hydrogens(0).unwrap(), 4);
        let propane = parse("CCC").unwrap();
        assert_eq!(propane.implicit_hydrogens(1).unwrap(), 2);
        let methanol = parse("CO").unwrap();
        assert_eq!(methanol.implicit_hydrogens(1).unwrap(), 1);
        assert!(matches!(methanol.implicit_hydrogens(7), Err(Error::UnknownAtom(7))));
    }

    #[test]
    fn aromatic_hydrogens_follow_ring_model() {
        let benzene = parse("c1ccccc1").unwrap();
        assert!((0..6).all(|i| benzene.hydrogen_count(i) == 1));
        let pyridine = parse("c1ccncc1").unwrap();
        assert_eq!(pyridine.hydrogen_count(3), 0);
        let pyrrole = parse("c1cc[nH]c1").unwrap();
        assert_eq!(pyrrole.hydrogen_count(3), 1);
        let toluene = parse("Cc1ccccc1").unwrap();
        assert_eq!(toluene.hydrogen_count(1), 0);
        let furan = parse("c1ccoc1").unwrap();
        assert!(furan.is_valid());
    }

    #[test]
    fn higher_valence_states_pick_smallest_fit() {
        let g = parse("CS(=O)(=O)C").unwrap();
        assert!(g.is_valid());
        assert_eq!(g.hydrogen_count(1), 0);
        let g = parse("CS(C)C").unwrap();
        assert_eq!(g.hydrogen_count(1), 1);
    }

    #[test]
    fn removal_reindexes_densely() {
        let g = parse("CCO").unwrap();
        let h = g.without_atom(0);
        assert_eq!(h.atom_count(), 2);
        assert_eq!(h.atom(1).element, Element::O);
        assert_eq!(h.bond_between(0, 1), Some(BondOrder::Single));
    }
}
