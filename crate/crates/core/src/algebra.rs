//! Finite σ-algebras represented by their atom partitions.
//!
//! A measurable event is a union of atoms, so the measurable events of an
//! algebra with `k` atoms are in bijection with `k`-bit codes: bit `i` of a
//! code selects atom `i`. Atoms are kept sorted by their lowest point, which
//! makes the encoding canonical.

use std::fmt;

use crate::error::{Error, Result};
use crate::space::Event;

#[derive(Clone, PartialEq, Eq)]
pub struct SigmaAlgebra {
    len: usize,
    atoms: Vec<Event>,
    atom_of: Vec<u8>,
}

impl SigmaAlgebra {
    pub fn new(len: usize, mut atoms: Vec<Event>) -> Result<Self> {
        let mut seen = Event::empty(len);
        for a in &atoms {
            if a.len() != len {
                return Err(Error::InvalidEvent(format!("atom {a} lives on a different space")));
            }
            if a.is_empty() {
                return Err(Error::InvalidEvent("empty atom".into()));
            }
            if !a.is_disjoint(&seen) {
                return Err(Error::InvalidEvent(format!("atom {a} overlaps another atom")));
            }
            seen = seen | *a;
        }
        if !seen.is_full() {
            return Err(Error::InvalidEvent(format!("atoms do not cover the space: missing {}", seen.complement())));
        }
        if atoms.len() > 63 {
            return Err(Error::InvalidEvent("more than 63 atoms".into()));
        }
        atoms.sort_by_key(|a| a.lowest());
        let mut atom_of = vec![0u8; len];
        for (k, a) in atoms.iter().enumerate() {
            for i in a.indices() {
                atom_of[i] = k as u8;
            }
        }
        Ok(SigmaAlgebra { len, atoms, atom_of })
    }

    pub fn power_set(len: usize) -> Self {
        Self::new(len, (0..len).map(|i| Event::singleton(len, i)).collect()).expect("singletons partition the space")
    }

    pub fn trivial(len: usize) -> Self {
        Self::new(len, vec![Event::full(len)]).expect("one atom covers the space")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn atoms(&self) -> &[Event] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom_index_of(&self, point: usize) -> usize {
        self.atom_of[point] as usize
    }

    pub fn is_power_set(&self) -> bool {
        self.atoms.len() == self.len
    }

    /// Number of measurable events, `2^atoms`.
    pub fn event_count(&self) -> u64 {
        1u64 << self.atoms.len()
    }

    /// The atom-subset code of `e`, or `None` if `e` is not measurable.
    pub fn encode(&self, e: Event) -> Option<u64> {
        if self.is_power_set() {
            return Some(e.bits());
        }
        let mut code = 0u64;
        for (k, a) in self.atoms.iter().enumerate() {
            if a.is_subset(&e) {
                code |= 1 << k;
            } else if !a.is_disjoint(&e) {
                return None;
            }
        }
        Some(code)
    }

    pub fn decode(&self, code: u64) -> Event {
        if self.is_power_set() {
            return Event::from_bits_unchecked(self.len, code);
        }
        let mut bits = 0u64;
        let mut c = code;
        while c != 0 {
            let k = c.trailing_zeros() as usize;
            bits |= self.atoms[k].bits();
            c &= c - 1;
        }
        Event::from_bits_unchecked(self.len, bits)
    }

    pub fn is_measurable(&self, e: Event) -> bool {
        self.encode(e).is_some()
    }

    /// Smallest measurable superset of `e` (union of atoms meeting `e`).
    pub fn outer(&self, e: Event) -> Event {
        let mut out = Event::empty(self.len);
        for a in &self.atoms {
            if !a.is_disjoint(&e) {
                out = out | *a;
            }
        }
        out
    }

    /// All measurable events in code order.
    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        (0..self.event_count()).map(move |c| self.decode(c))
    }

    /// True when every atom of `self` is a union of atoms of `finer`.
    pub fn is_coarser_than(&self, finer: &SigmaAlgebra) -> bool {
        self.len == finer.len && self.atoms.iter().all(|a| finer.is_measurable(*a))
    }

    /// Split atom `k` into `h` and `atom \ h`.
    pub fn split_atom(&self, k: usize, h: Event) -> Result<Self> {
        let a = self.atoms[k];
        if h.is_empty() || !h.is_subset(&a) || h == a {
            return Err(Error::InvalidEvent(format!("{h} is not a proper nonempty subset of atom {a}")));
        }
        let mut atoms = self.atoms.clone();
        atoms[k] = h;
        atoms.push(a - h);
        Self::new(self.len, atoms)
    }
}

impl fmt::Debug for SigmaAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.atoms.iter().map(|a| a.to_string())).finish()
    }
}

/// The coarsest partition making every generator measurable: the common
/// refinement of the two-block partitions `{G, G^c}`.
pub fn generate_algebra(len: usize, generators: &[Event]) -> SigmaAlgebra {
    let mut atoms = vec![Event::full(len)];
    for g in generators {
        let mut next = Vec::with_capacity(atoms.len() * 2);
        for a in atoms {
            let inside = a & *g;
            let outside = a - *g;
            if !inside.is_empty() {
                next.push(inside);
            }
            if !outside.is_empty() {
                next.push(outside);
            }
        }
        atoms = next;
    }
    SigmaAlgebra::new(len, atoms).expect("refinement of a partition is a partition")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(len: usize, idx: &[usize]) -> Event {
        Event::from_indices(len, idx.iter().copied()).unwrap()
    }

    #[test]
    fn generate_examples() {
        assert_eq!(generate_algebra(3, &[]), SigmaAlgebra::trivial(3));
        let singles: Vec<_> = (0..3).map(|i| Event::singleton(3, i)).collect();
        assert_eq!(generate_algebra(3, &singles), SigmaAlgebra::power_set(3));
        let g = generate_algebra(3, &[ev(3, &[0])]);
        assert_eq!(g.atoms(), &[ev(3, &[0]), ev(3, &[1, 2])]);
    }

    #[test]
    fn encode_decode() {
        let g = SigmaAlgebra::new(4, vec![ev(4, &[1, 3]), ev(4, &[0]), ev(4, &[2])]).unwrap();
        assert_eq!(g.atoms()[0], ev(4, &[0]));
        let e = ev(4, &[0, 1, 3]);
        let c = g.encode(e).unwrap();
        assert_eq!(g.decode(c), e);
        assert!(g.encode(ev(4, &[1])).is_none());
        assert_eq!(g.events().count(), 8);
        assert!(g.is_coarser_than(&SigmaAlgebra::power_set(4)));
        assert!(!SigmaAlgebra::power_set(4).is_coarser_than(&g));
    }

    #[test]
    fn rejects_bad_partitions() {
        assert!(SigmaAlgebra::new(3, vec![ev(3, &[0, 1]), ev(3, &[1, 2])]).is_err());
        assert!(SigmaAlgebra::new(3, vec![ev(3, &[0, 1])]).is_err());
    }

    #[test]
    fn split() {
        let t = SigmaAlgebra::trivial(3);
        let s = t.split_atom(0, ev(3, &[1])).unwrap();
        assert_eq!(s.atoms(), &[ev(3, &[0, 2]), ev(3, &[1])]);
        assert!(t.split_atom(0, ev(3, &[0, 1, 2])).is_err());
    }
}
