//! Bit strings and the three-valued symbol carried by one bit-sending call.

use serde::{Deserialize, Serialize};

/// A bit or the absence of one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trit {
    Bot,
    Zero,
    One,
}

impl Trit {
    /// Number of pulses that encode the symbol.
    pub fn pulses(self) -> u32 {
        match self {
            Trit::Bot => 0,
            Trit::Zero => 1,
            Trit::One => 2,
        }
    }

    pub fn from_pulses(k: u32) -> Option<Trit> {
        match k {
            0 => Some(Trit::Bot),
            1 => Some(Trit::Zero),
            2 => Some(Trit::One),
            _ => None,
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            Trit::Bot => None,
            Trit::Zero => Some(false),
            Trit::One => Some(true),
        }
    }

    pub const ALL: [Trit; 3] = [Trit::Bot, Trit::Zero, Trit::One];
}

impl From<bool> for Trit {
    fn from(b: bool) -> Self {
        if b {
            Trit::One
        } else {
            Trit::Zero
        }
    }
}

impl From<Option<bool>> for Trit {
    fn from(b: Option<bool>) -> Self {
        b.map_or(Trit::Bot, Trit::from)
    }
}

/// A finite bit string, indexed past its end as [`Trit::Bot`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitMessage(pub Vec<bool>);

impl BitMessage {
    pub fn empty() -> Self {
        BitMessage(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, phase: usize) -> Trit {
        self.0.get(phase).copied().into()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// MSB-first binary of `x` without leading zeros; `0` is `"0"`.
    pub fn from_uint(x: u64) -> Self {
        BitMessage(to_bits_msb(x))
    }

    /// Fixed-width MSB-first binary of `x`.
    pub fn from_uint_width(x: u64, width: usize) -> Self {
        BitMessage((0..width).rev().map(|i| i < 64 && (x >> i) & 1 == 1).collect())
    }

    /// Reads the string as MSB-first binary. `None` if empty or wider
    /// than 64 bits.
    pub fn to_uint(&self) -> Option<u64> {
        if self.0.is_empty() || self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }
}

impl From<Vec<bool>> for BitMessage {
    fn from(v: Vec<bool>) -> Self {
        BitMessage(v)
    }
}

impl std::fmt::Display for BitMessage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Length of the binary representation of `x`; `bit_length(0) = 1`.
pub fn bit_length(x: u64) -> usize {
    (64 - x.leading_zeros() as usize).max(1)
}

pub fn to_bits_msb(x: u64) -> Vec<bool> {
    (0..bit_length(x)).rev().map(|i| (x >> i) & 1 == 1).collect()
}

/// LSB-first binary of `x` without leading zeros; `0` is `[false]`.
pub fn to_bits_lsb(x: u64) -> Vec<bool> {
    (0..bit_length(x)).map(|i| (x >> i) & 1 == 1).collect()
}

pub fn from_bits_lsb(bits: &[bool]) -> Option<u64> {
    if bits.len() > 64 {
        return None;
    }
    Some(bits.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i)))
}
