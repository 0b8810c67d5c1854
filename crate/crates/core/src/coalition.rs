use std::fmt;

use crate::error::{Error, Result};
use crate::MAX_SENSORS;

/// A subset of sensor indices `0..n`, stored as a bit set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    bits: u32,
    n: u8,
}

impl Coalition {
    pub fn empty(n: usize) -> Result<Self> {
        if n > MAX_SENSORS {
            return Err(Error::UniverseTooLarge {
                n,
                max: MAX_SENSORS,
            });
        }
        Ok(Self {
            bits: 0,
            n: n as u8,
        })
    }

    pub fn full(n: usize) -> Result<Self> {
        let empty = Self::empty(n)?;
        Ok(Self {
            bits: Self::universe_mask(n),
            ..empty
        })
    }

    /// Builds a coalition from a raw mask. Bits at or above `n` are rejected.
    pub fn from_bits(bits: u32, n: usize) -> Result<Self> {
        let empty = Self::empty(n)?;
        if bits & !Self::universe_mask(n) != 0 {
            let index = 31 - bits.leading_zeros() as usize;
            return Err(Error::SensorOutOfRange { index, n });
        }
        Ok(Self { bits, ..empty })
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I, n: usize) -> Result<Self> {
        let mut c = Self::empty(n)?;
        for index in indices {
            if index >= n {
                return Err(Error::SensorOutOfRange { index, n });
            }
            c.bits |= 1 << index;
        }
        Ok(c)
    }

    pub fn singleton(index: usize, n: usize) -> Result<Self> {
        Self::from_indices([index], n)
    }

    pub(crate) fn from_bits_unchecked(bits: u32, n: usize) -> Self {
        debug_assert!(n <= MAX_SENSORS && bits & !Self::universe_mask(n) == 0);
        Self { bits, n: n as u8 }
    }

    fn universe_mask(n: usize) -> u32 {
        if n == 0 {
            0
        } else {
            u32::MAX >> (32 - n)
        }
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn universe(self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn contains(self, index: usize) -> bool {
        index < self.universe() && self.bits & (1 << index) != 0
    }

    /// `S ∪ {index}`. Panics if `index` is outside the universe.
    #[inline]
    pub fn with(self, index: usize) -> Self {
        assert!(index < self.universe(), "sensor {index} outside universe");
        Self {
            bits: self.bits | (1 << index),
            ..self
        }
    }

    /// `S ∖ {index}`. Panics if `index` is outside the universe.
    #[inline]
    pub fn without(self, index: usize) -> Self {
        assert!(index < self.universe(), "sensor {index} outside universe");
        Self {
            bits: self.bits & !(1u32 << index),
            ..self
        }
    }

    pub fn union(self, other: Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        Self {
            bits: self.bits | other.bits,
            ..self
        }
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.bits & other.bits == 0
    }

    /// Members in increasing order.
    pub fn iter(self) -> Members {
        Members { bits: self.bits }
    }
}

pub struct Members {
    bits: u32,
}

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.bits == 0 {
            return None;
        }
        let index = self.bits.trailing_zeros() as usize;
        self.bits &= self.bits - 1;
        Some(index)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let k = self.bits.count_ones() as usize;
        (k, Some(k))
    }
}

impl ExactSizeIterator for Members {}

impl IntoIterator for Coalition {
    type Item = usize;
    type IntoIter = Members;

    fn into_iter(self) -> Members {
        self.iter()
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Iterates every subset of `0..n` that excludes `excluded`, in increasing
/// mask order. Yields `2^(n-1)` coalitions.
pub(crate) fn subsets_excluding(n: usize, excluded: usize) -> impl Iterator<Item = Coalition> {
    let low = (1u32 << excluded) - 1;
    (0u32..1 << (n - 1)).map(move |m| {
        let bits = (m & low) | ((m & !low) << 1);
        Coalition::from_bits_unchecked(bits, n)
    })
}
