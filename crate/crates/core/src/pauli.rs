//! Pauli axes, words over them, and axis relabelings.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Longest word we can pack into the bit masks.
pub const MAX_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 4] = [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
    /// The three non-identity axes in index order.
    pub const LOCAL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn letter(self) -> char {
        match self {
            PauliAxis::I => 'I',
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' | '0' => Some(PauliAxis::I),
            'X' => Some(PauliAxis::X),
            'Y' => Some(PauliAxis::Y),
            'Z' => Some(PauliAxis::Z),
            _ => None,
        }
    }

    /// 0 for X, 1 for Y, 2 for Z; `None` for the identity.
    pub fn local_index(self) -> Option<usize> {
        match self {
            PauliAxis::I => None,
            PauliAxis::X => Some(0),
            PauliAxis::Y => Some(1),
            PauliAxis::Z => Some(2),
        }
    }

    /// Symplectic (x, z) bits.
    fn bits(self) -> (bool, bool) {
        match self {
            PauliAxis::I => (false, false),
            PauliAxis::X => (true, false),
            PauliAxis::Y => (true, true),
            PauliAxis::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliAxis::I,
            (true, false) => PauliAxis::X,
            (true, true) => PauliAxis::Y,
            (false, true) => PauliAxis::Z,
        }
    }

    pub fn commutes_with(self, other: PauliAxis) -> bool {
        self == PauliAxis::I || other == PauliAxis::I || self == other
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A tensor product of single-qubit Paulis, party 0 written first.
///
/// Stored as two bit masks (bit k belongs to party k) so that copies and
/// commutation checks are cheap.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u8,
    x: u32,
    z: u32,
}

impl PauliString {
    pub fn new(axes: &[PauliAxis]) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_LEN {
            return Err(Error::InvalidPauli(axes.iter().map(|a| a.letter()).collect()));
        }
        let mut s = PauliString { n: axes.len() as u8, x: 0, z: 0 };
        for (k, &a) in axes.iter().enumerate() {
            s.set(k, a);
        }
        Ok(s)
    }

    /// `axis` repeated `n` times, e.g. `XXX`.
    pub fn uniform(axis: PauliAxis, n: usize) -> Self {
        assert!((1..=MAX_LEN).contains(&n), "word length {n} out of range");
        let mut s = PauliString { n: n as u8, x: 0, z: 0 };
        for k in 0..n {
            s.set(k, axis);
        }
        s
    }

    /// Identity on every party except `party`.
    pub fn single(n: usize, party: usize, axis: PauliAxis) -> Self {
        let mut s = Self::uniform(PauliAxis::I, n);
        s.set(party, axis);
        s
    }

    fn set(&mut self, k: usize, a: PauliAxis) {
        let (bx, bz) = a.bits();
        self.x = (self.x & !(1 << k)) | ((bx as u32) << k);
        self.z = (self.z & !(1 << k)) | ((bz as u32) << k);
    }

    pub fn with_axis(mut self, k: usize, a: PauliAxis) -> Self {
        assert!(k < self.len());
        self.set(k, a);
        self
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self, k: usize) -> PauliAxis {
        assert!(k < self.len(), "party {k} out of range");
        PauliAxis::from_bits(self.x >> k & 1 == 1, self.z >> k & 1 == 1)
    }

    pub fn axes(&self) -> impl Iterator<Item = PauliAxis> + '_ {
        (0..self.len()).map(move |k| self.axis(k))
    }

    fn support(&self) -> u32 {
        self.x | self.z
    }

    /// Number of non-identity slots.
    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_full_weight(&self) -> bool {
        self.weight() == self.len()
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(())
    }

    /// Commutation of the two tensor-product operators.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        Ok(!self.anticommutes_unchecked(other))
    }

    pub fn anticommutes(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.anticommutes_unchecked(other))
    }

    /// Symplectic form; words must have equal length.
    pub(crate) fn anticommutes_unchecked(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() & 1 == 1
    }

    /// Product up to phase.
    pub fn product(&self, other: &PauliString) -> Result<PauliString> {
        self.check_len(other)?;
        Ok(PauliString { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z })
    }

    /// Position in the 4^N tensor, digits I=0, X=1, Y=2, Z=3 with party 0 most significant.
    pub fn index(&self) -> usize {
        self.axes().fold(0, |acc, a| acc * 4 + a as usize)
    }

    pub fn from_index(mut index: usize, n: usize) -> Self {
        let mut s = Self::uniform(PauliAxis::I, n);
        for k in (0..n).rev() {
            s.set(k, PauliAxis::ALL[index % 4]);
            index /= 4;
        }
        s
    }

    /// Position among the 3^N full-weight words, digits X=0, Y=1, Z=2.
    /// Sorting by this index is the same as sorting the words alphabetically.
    pub fn full_index(&self) -> Option<usize> {
        self.axes().try_fold(0, |acc, a| a.local_index().map(|d| acc * 3 + d))
    }

    pub fn from_full_index(mut index: usize, n: usize) -> Self {
        let mut s = Self::uniform(PauliAxis::X, n);
        for k in (0..n).rev() {
            s.set(k, PauliAxis::LOCAL[index % 3]);
            index /= 3;
        }
        s
    }

    /// All 3^N full-weight words in alphabetical order.
    pub fn all_full_weight(n: usize) -> Vec<PauliString> {
        (0..3usize.pow(n as u32)).map(|i| Self::from_full_index(i, n)).collect()
    }

    pub fn relabel(&self, perm: &AxisPermutation) -> PauliString {
        let mut s = *self;
        for k in 0..self.len() {
            s.set(k, perm.apply(self.axis(k)));
        }
        s
    }

    /// Masks in state-vector convention (party 0 is the most significant bit):
    /// bit flips, phase-flip mask, and the number of Y factors.
    pub(crate) fn vector_masks(&self) -> (usize, usize, u32) {
        let n = self.len();
        let mut flip = 0usize;
        let mut phase = 0usize;
        for k in 0..n {
            let bit = 1usize << (n - 1 - k);
            if self.x >> k & 1 == 1 {
                flip |= bit;
            }
            if self.z >> k & 1 == 1 {
                phase |= bit;
            }
        }
        (flip, phase, (self.x & self.z).count_ones())
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.axes().cmp(other.axes())
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.axes() {
            write!(f, "{}", a.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Case-insensitive letters I/X/Y/Z; `0` is accepted for the identity.
    fn from_str(s: &str) -> Result<Self> {
        let axes: Option<Vec<PauliAxis>> = s.trim().chars().map(PauliAxis::from_letter).collect();
        match axes {
            Some(axes) if !axes.is_empty() => PauliString::new(&axes),
            _ => Err(Error::InvalidPauli(s.to_string())),
        }
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A permutation of the local axes {X, Y, Z}; the identity stays fixed.
///
/// Written as the images of X, Y and Z in that order, so `"ZXY"` is the
/// cycle x→z→y→x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AxisPermutation([PauliAxis; 3]);

impl AxisPermutation {
    pub fn new(images: [PauliAxis; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for a in images {
            match a.local_index() {
                Some(i) if !seen[i] => seen[i] = true,
                _ => return Err(Error::InvalidPauli(images.iter().map(|a| a.letter()).collect())),
            }
        }
        Ok(AxisPermutation(images))
    }

    pub fn identity() -> Self {
        AxisPermutation(PauliAxis::LOCAL)
    }

    /// Swap `a` and `b`, fix the third axis.
    pub fn transposition(a: PauliAxis, b: PauliAxis) -> Self {
        let mut images = PauliAxis::LOCAL;
        if let (Some(i), Some(j)) = (a.local_index(), b.local_index()) {
            images.swap(i, j);
        }
        AxisPermutation(images)
    }

    pub fn apply(&self, a: PauliAxis) -> PauliAxis {
        match a.local_index() {
            Some(i) => self.0[i],
            None => PauliAxis::I,
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &AxisPermutation) -> AxisPermutation {
        AxisPermutation(PauliAxis::LOCAL.map(|a| self.apply(first.apply(a))))
    }

    pub fn inverse(&self) -> AxisPermutation {
        let mut images = PauliAxis::LOCAL;
        for a in PauliAxis::LOCAL {
            images[self.apply(a).local_index().unwrap()] = a;
        }
        AxisPermutation(images)
    }

    pub fn images(&self) -> [PauliAxis; 3] {
        self.0
    }
}

impl Default for AxisPermutation {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for AxisPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.0 {
            write!(f, "{}", a.letter())?;
        }
        Ok(())
    }
}

impl FromStr for AxisPermutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<PauliAxis> = s.trim().chars().filter_map(PauliAxis::from_letter).collect();
        if letters.len() != 3 || s.trim().chars().count() != 3 {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        AxisPermutation::new([letters[0], letters[1], letters[2]])
    }
}

impl Serialize for AxisPermutation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AxisPermutation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
