use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Fixed-length binary configuration of visible or hidden units.
///
/// Canonical integer order: `bits[0]` is the most significant bit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitState(Vec<u8>);

impl BitState {
    pub fn zeros(len: usize) -> Self {
        BitState(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Empty("bit state"));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("non-binary entry {b}")));
        }
        Ok(BitState(bits))
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        BitState(bits.iter().map(|&b| b as u8).collect())
    }

    /// Builds the `len`-bit pattern of `index`, MSB first.
    pub fn from_index(index: u64, len: usize) -> Self {
        assert!(len <= 64, "BitState index form supports at most 64 bits");
        assert!(
            len == 64 || index >> len == 0,
            "index {index} does not fit in {len} bits"
        );
        BitState(
            (0..len)
                .map(|j| ((index >> (len - 1 - j)) & 1) as u8)
                .collect(),
        )
    }

    pub fn to_index(&self) -> u64 {
        assert!(self.0.len() <= 64, "BitState index form supports at most 64 bits");
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Concatenation of `self` followed by `other`.
    pub fn concat(&self, other: &BitState) -> BitState {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BitState(bits)
    }

    pub fn rotate_left(&self, by: usize) -> BitState {
        let mut bits = self.0.clone();
        if !bits.is_empty() {
            let n = bits.len();
            bits.rotate_left(by % n);
        }
        BitState(bits)
    }

    pub fn rotate_right(&self, by: usize) -> BitState {
        let mut bits = self.0.clone();
        if !bits.is_empty() {
            let n = bits.len();
            bits.rotate_right(by % n);
        }
        BitState(bits)
    }

    /// Bits as 0/1 reals.
    pub fn to_reals<T: num_traits::Float>(&self) -> Vec<T> {
        self.0
            .iter()
            .map(|&b| if b == 1 { T::one() } else { T::zero() })
            .collect()
    }
}

impl fmt::Display for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitState({self})")
    }
}

impl FromStr for BitState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        BitState::from_bits(bits)
    }
}
