// SPDX-License-Identifier: Apache-2.0

//! Four-state bit vectors.
//!
//! Each bit is encoded by a pair `(val, xz)`: `xz = 0` means the bit is a
//! known `0`/`1` given by `val`; `xz = 1` means unknown, with `val = 0` for
//! `x` and `val = 1` for `z`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Logic {
    width: u32,
    val: BigUint,
    xz: BigUint,
}

fn mask(width: u32) -> BigUint {
    (BigUint::one() << width as usize) - BigUint::one()
}

impl Logic {
    pub fn zero(width: u32) -> Self {
        Self {
            width,
            val: BigUint::zero(),
            xz: BigUint::zero(),
        }
    }

    pub fn all_x(width: u32) -> Self {
        Self {
            width,
            val: BigUint::zero(),
            xz: mask(width),
        }
    }

    pub fn all_z(width: u32) -> Self {
        Self {
            width,
            val: mask(width),
            xz: mask(width),
        }
    }

    pub fn from_u64(value: u64, width: u32) -> Self {
        Self::from_biguint(BigUint::from(value), width)
    }

    pub fn from_biguint(value: BigUint, width: u32) -> Self {
        Self {
            width,
            val: value & mask(width),
            xz: BigUint::zero(),
        }
    }

    /// Two's-complement encoding of a signed integer.
    pub fn from_i64(value: i64, width: u32) -> Self {
        if value >= 0 {
            Self::from_u64(value as u64, width)
        } else {
            let magnitude = BigUint::from(value.unsigned_abs());
            let modulus = BigUint::one() << width as usize;
            let m = magnitude % &modulus;
            let v = if m.is_zero() { m } else { modulus - m };
            Self::from_biguint(v, width)
        }
    }

    pub fn from_bool(b: bool) -> Self {
        Self::from_u64(b as u64, 1)
    }

    pub(crate) fn from_parts(width: u32, val: BigUint, xz: BigUint) -> Self {
        let m = mask(width);
        Self {
            width,
            val: val & &m,
            xz: xz & m,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn is_known(&self) -> bool {
        self.xz.is_zero()
    }

    pub fn has_z(&self) -> bool {
        !(&self.xz & &self.val).is_zero()
    }

    /// Known value as an unsigned integer, if no bit is `x`/`z`.
    pub fn to_biguint(&self) -> Option<BigUint> {
        self.is_known().then(|| self.val.clone())
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_biguint().and_then(|v| v.to_u64())
    }

    /// Known value interpreted as two's complement.
    pub fn to_i64(&self) -> Option<i64> {
        let v = self.to_biguint()?;
        if self.width == 0 {
            return Some(0);
        }
        if v.bit(self.width as u64 - 1) {
            let modulus = BigUint::one() << self.width as usize;
            let mag = modulus - v;
            mag.to_i64().map(|m| -m)
        } else {
            v.to_i64()
        }
    }

    pub fn bit(&self, i: u32) -> Bit {
        if i >= self.width {
            return Bit::X;
        }
        let v = self.val.bit(i as u64);
        if self.xz.bit(i as u64) {
            if v {
                Bit::Z
            } else {
                Bit::X
            }
        } else if v {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    pub fn set_bit(&mut self, i: u32, b: Bit) {
        if i >= self.width {
            return;
        }
        let (v, x) = match b {
            Bit::Zero => (false, false),
            Bit::One => (true, false),
            Bit::X => (false, true),
            Bit::Z => (true, true),
        };
        self.val.set_bit(i as u64, v);
        self.xz.set_bit(i as u64, x);
    }

    /// Truncate or extend to `width`. Extension replicates the top bit
    /// (including `x`/`z`) when `signed`, otherwise fills with zero.
    pub fn resize(&self, width: u32, signed: bool) -> Self {
        if width == self.width {
            return self.clone();
        }
        if width < self.width {
            return Self::from_parts(width, self.val.clone(), self.xz.clone());
        }
        let mut out = Self::from_parts(width, self.val.clone(), self.xz.clone());
        if signed && self.width > 0 {
            let top = self.bit(self.width - 1);
            if top != Bit::Zero {
                let fill = mask(width) ^ mask(self.width);
                match top {
                    Bit::One => out.val |= &fill,
                    Bit::X => out.xz |= &fill,
                    Bit::Z => {
                        out.val |= &fill;
                        out.xz |= &fill;
                    }
                    Bit::Zero => {}
                }
            }
        }
        out
    }

    /// Collapses `z` bits to `x`; operators treat both as unknown.
    fn known_masks(&self) -> (BigUint, BigUint) {
        let m = mask(self.width);
        let known = &m ^ &self.xz;
        let ones = &self.val & &known;
        let zeros = (&m ^ &self.val) & &known;
        (zeros, ones)
    }

    pub fn bit_and(&self, other: &Self) -> Self {
        let w = self.width.max(other.width);
        let (a0, a1) = self.resize(w, false).known_masks();
        let (b0, b1) = other.resize(w, false).known_masks();
        let zeros = a0 | b0;
        let ones = a1 & b1;
        Self::from_masks(w, zeros, ones)
    }

    pub fn bit_or(&self, other: &Self) -> Self {
        let w = self.width.max(other.width);
        let (a0, a1) = self.resize(w, false).known_masks();
        let (b0, b1) = other.resize(w, false).known_masks();
        let ones = a1 | b1;
        let zeros = a0 & b0;
        Self::from_masks(w, zeros, ones)
    }

    pub fn bit_xor(&self, other: &Self) -> Self {
        let w = self.width.max(other.width);
        let a = self.resize(w, false);
        let b = other.resize(w, false);
        let unknown = &a.xz | &b.xz;
        let val = (&a.val ^ &b.val) & (mask(w) ^ &unknown);
        Self::from_parts(w, val, unknown)
    }

    pub fn bit_not(&self) -> Self {
        let (zeros, ones) = self.known_masks();
        Self::from_masks(self.width, ones, zeros)
    }

    fn from_masks(width: u32, zeros: BigUint, ones: BigUint) -> Self {
        let m = mask(width);
        let unknown = &m ^ (&zeros | &ones);
        Self::from_parts(width, ones, unknown)
    }

    /// Truth value used by `if`, `&&`, `!`, `?:`.
    pub fn truth(&self) -> Bit {
        let (_, ones) = self.known_masks();
        if !ones.is_zero() {
            Bit::One
        } else if self.is_known() {
            Bit::Zero
        } else {
            Bit::X
        }
    }

    pub fn reduce_and(&self) -> Bit {
        let (zeros, ones) = self.known_masks();
        if !zeros.is_zero() {
            Bit::Zero
        } else if ones == mask(self.width) {
            Bit::One
        } else {
            Bit::X
        }
    }

    pub fn reduce_or(&self) -> Bit {
        let (zeros, ones) = self.known_masks();
        if !ones.is_zero() {
            Bit::One
        } else if zeros == mask(self.width) {
            Bit::Zero
        } else {
            Bit::X
        }
    }

    pub fn reduce_xor(&self) -> Bit {
        if !self.is_known() {
            return Bit::X;
        }
        if self.val.count_ones() % 2 == 1 {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    /// `===` comparison: exact match including `x`/`z` bits.
    pub fn case_eq(&self, other: &Self) -> bool {
        let w = self.width.max(other.width);
        let a = self.resize(w, false);
        let b = other.resize(w, false);
        a.val == b.val && a.xz == b.xz
    }

    pub fn raw_val(&self) -> &BigUint {
        &self.val
    }

    pub fn raw_xz(&self) -> &BigUint {
        &self.xz
    }

    /// Slice of `len` bits starting at offset `lo`; bits beyond the vector read as `x`.
    pub fn slice(&self, lo: i64, len: u32) -> Self {
        let mut out = Self::all_x(len);
        for i in 0..len {
            let src = lo + i as i64;
            if src >= 0 && (src as u64) < self.width as u64 {
                out.set_bit(i, self.bit(src as u32));
            }
        }
        out
    }

    /// Overwrite `value.width()` bits starting at offset `lo`; out-of-range bits are ignored.
    pub fn write_slice(&mut self, lo: i64, value: &Self) {
        for i in 0..value.width {
            let dst = lo + i as i64;
            if dst >= 0 && (dst as u64) < self.width as u64 {
                self.set_bit(dst as u32, value.bit(i));
            }
        }
    }

    /// Concatenation; `parts[0]` is the most significant.
    pub fn concat(parts: &[Self]) -> Self {
        let width: u32 = parts.iter().map(|p| p.width).sum();
        let mut val = BigUint::zero();
        let mut xz = BigUint::zero();
        for p in parts {
            val = (val << p.width as usize) | &p.val;
            xz = (xz << p.width as usize) | &p.xz;
        }
        Self::from_parts(width, val, xz)
    }

    /// Format with `%h` semantics: zero-padded to the full digit count;
    /// fully unknown digits print `x`/`z`, partially unknown `X`/`Z`.
    pub fn to_hex(&self) -> String {
        self.to_radix_digits(4)
    }

    pub fn to_bin(&self) -> String {
        self.to_radix_digits(1)
    }

    pub fn to_oct(&self) -> String {
        self.to_radix_digits(3)
    }

    fn to_radix_digits(&self, bits: u32) -> String {
        let width = self.width.max(1);
        let digits = width.div_ceil(bits);
        let mut out = String::with_capacity(digits as usize);
        for d in (0..digits).rev() {
            let mut value = 0u32;
            let (mut nx, mut nz, mut n) = (0, 0, 0);
            for b in 0..bits {
                let i = d * bits + b;
                if i >= self.width {
                    continue;
                }
                n += 1;
                match self.bit(i) {
                    Bit::One => value |= 1 << b,
                    Bit::Zero => {}
                    Bit::X => nx += 1,
                    Bit::Z => nz += 1,
                }
            }
            let c = if nx == n && n > 0 {
                'x'
            } else if nz == n && n > 0 {
                'z'
            } else if nx > 0 {
                'X'
            } else if nz > 0 {
                'Z'
            } else {
                std::char::from_digit(value, 1 << bits).unwrap_or('?')
            };
            out.push(c);
        }
        out
    }

    /// Decimal rendering; any unknown bit renders the whole value as `x` (or `z`).
    pub fn to_dec(&self, signed: bool) -> String {
        if !self.is_known() {
            if self.xz == mask(self.width) && self.val == mask(self.width) {
                return "z".into();
            }
            return if self.has_z() && (&self.val & &self.xz) == self.xz {
                "z".into()
            } else {
                "x".into()
            };
        }
        if signed && self.width > 0 && self.val.bit(self.width as u64 - 1) {
            let modulus = BigUint::one() << self.width as usize;
            format!("-{}", modulus - &self.val)
        } else {
            self.val.to_string()
        }
    }

    /// Parse a hex string such as produced by [`Logic::to_hex`] (known digits only).
    pub fn parse_hex(text: &str, width: u32) -> Option<Self> {
        if text.is_empty() {
            return None;
        }
        let v = BigUint::parse_bytes(text.as_bytes(), 16)?;
        if v.bits() > width as u64 {
            return None;
        }
        Some(Self::from_biguint(v, width))
    }
}

impl fmt::Debug for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self.to_bin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bit {
    Zero,
    One,
    X,
    Z,
}

impl Bit {
    pub fn to_logic(self) -> Logic {
        let mut l = Logic::zero(1);
        l.set_bit(0, self);
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_padding_and_unknowns() {
        assert_eq!(Logic::from_u64(0xab, 8).to_hex(), "ab");
        assert_eq!(Logic::from_u64(1, 1).to_hex(), "1");
        assert_eq!(Logic::from_u64(5, 12).to_hex(), "005");
        assert_eq!(Logic::all_x(8).to_hex(), "xx");
        let mut l = Logic::from_u64(0, 8);
        l.set_bit(0, Bit::X);
        assert_eq!(l.to_hex(), "0X");
        assert_eq!(Logic::all_z(4).to_hex(), "z");
    }

    #[test]
    fn and_with_unknown_zero_dominates() {
        let x = Logic::all_x(1);
        let zero = Logic::from_u64(0, 1);
        let one = Logic::from_u64(1, 1);
        assert_eq!(x.bit_and(&zero), zero);
        assert!(!x.bit_and(&one).is_known());
        assert_eq!(x.bit_or(&one), one);
    }

    #[test]
    fn signed_resize_replicates_sign() {
        let v = Logic::from_i64(-3, 4);
        assert_eq!(v.resize(8, true).to_u64(), Some(0xfd));
        assert_eq!(v.resize(8, false).to_u64(), Some(0x0d));
        assert_eq!(v.to_i64(), Some(-3));
    }

    #[test]
    fn concat_and_slice() {
        let c = Logic::concat(&[Logic::from_u64(0b10, 2), Logic::from_u64(0b011, 3)]);
        assert_eq!(c.to_u64(), Some(0b10011));
        assert_eq!(c.slice(1, 3).to_u64(), Some(0b001));
        assert!(!c.slice(4, 3).is_known());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(Logic::from_i64(-5, 8).to_dec(true), "-5");
        assert_eq!(Logic::from_u64(251, 8).to_dec(false), "251");
        assert_eq!(Logic::all_x(4).to_dec(false), "x");
    }
}
