//! Finite ground sets and their subsets.

use std::fmt;
use std::ops::{BitAnd, BitOr, BitXor, Not, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported number of points; events are stored as `u64` masks.
pub const MAX_POINTS: usize = 64;

/// An ordered set of labelled points, addressed by index `0..len`.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    labels: Arc<[String]>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSpace("a space needs at least one point".into()));
        }
        if labels.len() > MAX_POINTS {
            return Err(Error::InvalidSpace(format!("{} points exceed the maximum of {MAX_POINTS}", labels.len())));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(FiniteSpace { labels: labels.into() })
    }

    /// Points labelled `"0"`, `"1"`, ...
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn empty_event(&self) -> Event {
        Event::empty(self.len())
    }

    pub fn full_event(&self) -> Event {
        Event::full(self.len())
    }

    pub fn point(&self, i: usize) -> Event {
        Event::singleton(self.len(), i)
    }

    pub fn event(&self, indices: &[usize]) -> Result<Event> {
        Event::from_indices(self.len(), indices.iter().copied())
    }
}

impl fmt::Debug for FiniteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels.iter()).finish()
    }
}

/// A subset of a finite space, stored as a bitmask together with the size
/// of the ambient space so that complements are total.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    bits: u64,
    len: u8,
}

#[inline]
fn full_mask(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl Event {
    pub fn empty(len: usize) -> Self {
        assert!(len <= MAX_POINTS);
        Event { bits: 0, len: len as u8 }
    }

    pub fn full(len: usize) -> Self {
        assert!(len <= MAX_POINTS);
        Event { bits: full_mask(len), len: len as u8 }
    }

    pub fn singleton(len: usize, i: usize) -> Self {
        assert!(i < len, "point {i} outside a space of {len} points");
        Event { bits: 1 << i, len: len as u8 }
    }

    pub fn from_bits(len: usize, bits: u64) -> Result<Self> {
        if len > MAX_POINTS {
            return Err(Error::InvalidEvent(format!("space of {len} points too large")));
        }
        if bits & !full_mask(len) != 0 {
            return Err(Error::InvalidEvent(format!("mask {bits:#x} has indices outside 0..{len}")));
        }
        Ok(Event { bits, len: len as u8 })
    }

    /// Caller guarantees `bits` fits in `len`.
    #[inline]
    pub(crate) fn from_bits_unchecked(len: usize, bits: u64) -> Self {
        debug_assert!(bits & !full_mask(len) == 0);
        Event { bits, len: len as u8 }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = 0u64;
        for i in indices {
            if i >= len {
                return Err(Error::InvalidEvent(format!("index {i} outside 0..{len}")));
            }
            bits |= 1 << i;
        }
        Ok(Event { bits, len: len as u8 })
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len() && self.bits >> i & 1 == 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.bits == full_mask(self.len())
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn lowest(&self) -> Option<usize> {
        (self.bits != 0).then(|| self.bits.trailing_zeros() as usize)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> {
        let mut bits = self.bits;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    #[inline]
    pub fn complement(&self) -> Self {
        Event { bits: !self.bits & full_mask(self.len()), len: self.len }
    }

    #[inline]
    pub fn union(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Event { bits: self.bits | other.bits, len: self.len }
    }

    #[inline]
    pub fn intersection(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Event { bits: self.bits & other.bits, len: self.len }
    }

    #[inline]
    pub fn difference(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Event { bits: self.bits & !other.bits, len: self.len }
    }

    #[inline]
    pub fn sym_diff(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Event { bits: self.bits ^ other.bits, len: self.len }
    }

    #[inline]
    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits & !other.bits == 0
    }

    #[inline]
    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.bits & other.bits == 0
    }

    /// All `2^len` subsets of a space, in mask order.
    pub fn all(len: usize) -> impl Iterator<Item = Event> {
        assert!(len < 64, "cannot enumerate all subsets of {len} points");
        (0..1u64 << len).map(move |bits| Event { bits, len: len as u8 })
    }
}

impl BitAnd for Event {
    type Output = Event;
    fn bitand(self, rhs: Self) -> Event {
        self.intersection(&rhs)
    }
}

impl BitOr for Event {
    type Output = Event;
    fn bitor(self, rhs: Self) -> Event {
        self.union(&rhs)
    }
}

impl BitXor for Event {
    type Output = Event;
    fn bitxor(self, rhs: Self) -> Event {
        self.sym_diff(&rhs)
    }
}

impl Sub for Event {
    type Output = Event;
    fn sub(self, rhs: Self) -> Event {
        self.difference(&rhs)
    }
}

impl Not for Event {
    type Output = Event;
    fn not(self) -> Event {
        self.complement()
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}/{}", self.len)
    }
}

/// Serialized as a sorted index array; the space size comes from context.
impl Serialize for Event {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.indices())
    }
}

/// Sorted index array as written by the `Serialize` impl; the ambient space
/// size is supplied when converting back with [`IndexList::into_event`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexList(pub Vec<usize>);

impl IndexList {
    pub fn into_event(&self, len: usize) -> Result<Event> {
        Event::from_indices(len, self.0.iter().copied())
    }

    pub fn from_event(e: &Event) -> Self {
        IndexList(e.indices().collect())
    }
}
