use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::molgraph::{Atom, BondOrder, Element, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown atom symbols are errors.
    #[default]
    Strict,
    /// Unknown atom symbols become `Element::Other`.
    Lenient,
}

/// Parses with [`ParseMode::Strict`].
pub fn parse(smiles: &str) -> Result<MolGraph> {
    parse_with(smiles, ParseMode::Strict)
}

pub fn parse_with(smiles: &str, mode: ParseMode) -> Result<MolGraph> {
    let mut p = Parser { src: smiles.as_bytes(), pos: 0, mode, graph: MolGraph::new() };
    p.run()?;
    let violations = p.graph.validate();
    if let Some(v) = violations.first() {
        return Err(Error::InvalidGraph(format!("{smiles}: {v}")));
    }
    Ok(p.graph)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    mode: ParseMode,
    graph: MolGraph,
}

struct RingOpen {
    atom: usize,
    bond: Option<BondOrder>,
    position: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.pos, message: message.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<()> {
        if self.src.is_empty() {
            return self.err("empty SMILES");
        }
        let mut prev: Option<usize> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, RingOpen> = BTreeMap::new();
        let mut pending: Option<BondOrder> = None;

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err("branch must follow an atom");
                    }
                    branches.push((prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((at, _)) = branches.pop() else {
                        return self.err("unmatched ')'");
                    };
                    if pending.is_some() {
                        return self.err("bond symbol before ')'");
                    }
                    prev = at;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return self.err("two consecutive bond symbols");
                    }
                    pending = Some(match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    });
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return self.err("ring closure before any atom");
                    };
                    let start = self.pos;
                    let label = self.ring_label()?;
                    match rings.remove(&label) {
                        None => {
                            rings.insert(label, RingOpen { atom, bond: pending.take(), position: start });
                        }
                        Some(open) => {
                            let bond = match (open.bond, pending.take()) {
                                (Some(a), Some(b)) if a != b => {
                                    return self.err(format!("conflicting bond symbols on ring {label}"));
                                }
                                (Some(a), _) | (None, Some(a)) => a,
                                (None, None) => self.default_bond(open.atom, atom),
                            };
                            if open.atom == atom {
                                return self.err(format!("ring {label} closes on its own atom"));
                            }
                            if self.graph.bond_between(open.atom, atom).is_some() {
                                return self.err(format!("ring {label} duplicates an existing bond"));
                            }
                            self.graph.add_bond(open.atom, atom, bond)?;
                        }
                    }
                }
                b'.' => return self.err("multi-fragment SMILES are not supported"),
                _ => {
                    let atom = self.atom()?;
                    let id = self.graph.add_atom(atom);
                    if let Some(p) = prev {
                        let bond = pending.take().unwrap_or_else(|| self.default_bond(p, id));
                        self.graph.add_bond(p, id, bond)?;
                    } else if pending.is_some() {
                        return self.err("bond symbol before first atom");
                    }
                    prev = Some(id);
                }
            }
        }
        if pending.is_some() {
            return self.err("dangling bond symbol");
        }
        if let Some((_, position)) = branches.pop() {
            return Err(Error::Parse { position, message: "unmatched '('".into() });
        }
        if let Some((label, open)) = rings.into_iter().next() {
            return Err(Error::Parse { position: open.position, message: format!("unmatched ring-closure {label}") });
        }
        Ok(())
    }

    fn default_bond(&self, a: usize, b: usize) -> BondOrder {
        if self.graph.atom(a).aromatic && self.graph.atom(b).aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_label(&mut self) -> Result<u32> {
        if self.peek() == Some(b'%') {
            let digits = self.src.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0'))
                }
                _ => self.err("'%' must be followed by two digits"),
            }
        } else {
            let d = self.src[self.pos] - b'0';
            self.pos += 1;
            Ok(u32::from(d))
        }
    }

    fn unknown(&self, symbol: &str) -> Result<Element> {
        match self.mode {
            ParseMode::Strict => self.err(format!("unknown atom symbol '{symbol}'")),
            ParseMode::Lenient => Ok(Element::Other),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let c = self.src[self.pos];
        if c == b'[' {
            return self.bracket_atom();
        }
        let two = self.src.get(self.pos..self.pos + 2);
        if let Some(e) = two.and_then(|t| match t {
            b"Cl" => Some(Element::Cl),
            b"Br" => Some(Element::Br),
            _ => None,
        }) {
            self.pos += 2;
            return Ok(Atom::new(e));
        }
        self.pos += 1;
        let atom = match c {
            b'C' => Atom::new(Element::C),
            b'N' => Atom::new(Element::N),
            b'O' => Atom::new(Element::O),
            b'S' => Atom::new(Element::S),
            b'P' => Atom::new(Element::P),
            b'B' => Atom::new(Element::B),
            b'F' => Atom::new(Element::F),
            b'I' => Atom::new(Element::I),
            b'c' => Atom::aromatic(Element::C),
            b'n' => Atom::aromatic(Element::N),
            b'o' => Atom::aromatic(Element::O),
            b's' => Atom::aromatic(Element::S),
            b'*' => Atom::new(Element::Other),
            c if c.is_ascii_alphabetic() => {
                self.pos -= 1;
                let sym = (c as char).to_string();
                let e = self.unknown(&sym)?;
                self.pos += 1;
                Atom::new(e)
            }
            c => {
                self.pos -= 1;
                return self.err(format!("unexpected character '{}'", c as char));
            }
        };
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        self.pos += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return self.err("isotopes are not supported");
        }
        let start = self.pos;
        let mut atom = match self.peek() {
            Some(b'*') => {
                self.pos += 1;
                Atom::new(Element::Other)
            }
            Some(c) if c.is_ascii_lowercase() => {
                self.pos += 1;
                let e = match c {
                    b'c' => Element::C,
                    b'n' => Element::N,
                    b'o' => Element::O,
                    b's' => Element::S,
                    _ => self.unknown(&(c as char).to_string())?,
                };
                Atom::aromatic(e)
            }
            Some(c) if c.is_ascii_uppercase() => {
                self.pos += 1;
                // 'H' after an element letter is a hydrogen count, not part of the symbol
                while self.peek().is_some_and(|c| c.is_ascii_lowercase()) {
                    self.pos += 1;
                }
                let sym = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                match Element::from_symbol(sym) {
                    Some(e) => Atom::new(e),
                    None => Atom::new(self.unknown(sym)?),
                }
            }
            _ => return self.err("expected element symbol in bracket atom"),
        };
        if self.peek() == Some(b'@') {
            return self.err("stereo descriptors are not supported");
        }
        let mut h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h = 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                h = d - b'0';
                self.pos += 1;
            }
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b'+' | b'-') => return self.err("formal charges are not supported"),
            _ => return self.err("unterminated bracket atom"),
        }
        atom.explicit_h = Some(h);
        Ok(atom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::is_isomorphic;

    #[test]
    fn ibuprofen_has_one_aromatic_six_ring() {
        let g = parse("CC(Cc1ccc(cc1)C(C(=O)O)C)C").unwrap();
        // C13H18O2: thirteen carbons, fifteen heavy atoms
        assert_eq!(g.atom_count(), 15);
        assert_eq!(g.atoms().iter().filter(|a| a.element == Element::C).count(), 13);
        let aromatic = g.atoms().iter().filter(|a| a.aromatic).count();
        assert_eq!(aromatic, 6);
        assert_eq!(g.bond_count() - g.atom_count() + 1, 1);
    }

    #[test]
    fn methane() {
        let g = parse("C").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert_eq!(g.hydrogen_count(0), 4);
    }

    #[test]
    fn ring_closures() {
        let g = parse("C1CC1").unwrap();
        assert_eq!(g.bond_count(), 3);
        assert!(is_isomorphic(&g, &parse("C2CC2").unwrap()));
        let g = parse("C%10CC%10").unwrap();
        assert_eq!(g.bond_count(), 3);
        let g = parse("C=1CCC1").unwrap();
        assert_eq!(g.bond_between(0, 3), Some(BondOrder::Double));
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(parse("CC(C"), Err(Error::Parse { position: 2, .. })));
        assert!(matches!(parse("CC)C"), Err(Error::Parse { .. })));
        assert!(matches!(parse("C1CC"), Err(Error::Parse { position: 1, .. })));
        assert!(matches!(parse("CXC"), Err(Error::Parse { .. })));
        assert!(matches!(parse("C(C)(C)(C)(C)C"), Err(Error::InvalidGraph(_))));
        assert!(matches!(parse("CC.O"), Err(Error::Parse { .. })));
        assert!(matches!(parse("C[N+](C)(C)C"), Err(Error::Parse { .. })));
        assert!(matches!(parse("C[C@H](O)N"), Err(Error::Parse { .. })));
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn lenient_mode_maps_unknowns_to_other() {
        let g = parse_with("C[Si](C)(C)C", ParseMode::Lenient).unwrap();
        assert_eq!(g.atom(1).element, Element::Other);
        assert!(parse("C[Si](C)(C)C").is_err());
        let g = parse_with("CXC", ParseMode::Lenient).unwrap();
        assert_eq!(g.atom(1).element, Element::Other);
    }

    #[test]
    fn bracket_hydrogens() {
        let g = parse("c1cc[nH]c1").unwrap();
        assert_eq!(g.atom(3).explicit_h, Some(1));
        let g = parse("[CH3]C").unwrap();
        assert_eq!(g.hydrogen_count(0), 3);
        let g = parse("Clc1ccc(Br)cc1").unwrap();
        assert_eq!(g.atom(0).element, Element::Cl);
    }

    #[test]
    fn explicit_single_between_aromatics() {
        let g = parse("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(g.bond_between(5, 6), Some(BondOrder::Single));
    }
}
