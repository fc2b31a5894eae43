// SPDX-License-Identifier: Apache-2.0

//! Operator semantics over four-state vectors. Operands arrive already
//! extended to the operation width; results have that width unless the
//! operator yields a single bit.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ast::{BinaryOp, CaseKind, UnaryOp};
use crate::value::{Bit, Logic};

fn to_bigint(v: &BigUint, width: u32, signed: bool) -> BigInt {
    if signed && width > 0 && v.bit(width as u64 - 1) {
        BigInt::from_biguint(Sign::Plus, v.clone()) - (BigInt::one() << width as usize)
    } else {
        BigInt::from_biguint(Sign::Plus, v.clone())
    }
}

fn from_bigint(v: BigInt, width: u32) -> Logic {
    let modulus = BigInt::one() << width as usize;
    let mut r = v % &modulus;
    if r.is_negative() {
        r += modulus;
    }
    Logic::from_biguint(r.to_biguint().unwrap_or_default(), width)
}

pub fn unary(op: UnaryOp, a: &Logic, width: u32) -> Logic {
    match op {
        UnaryOp::Plus => a.resize(width, false),
        UnaryOp::Neg => match a.to_biguint() {
            Some(v) => from_bigint(-BigInt::from_biguint(Sign::Plus, v), width),
            None => Logic::all_x(width),
        },
        UnaryOp::Not => a.bit_not(),
        UnaryOp::LogNot => match a.truth() {
            Bit::One => Logic::from_bool(false),
            Bit::Zero => Logic::from_bool(true),
            _ => Logic::all_x(1),
        },
        UnaryOp::RedAnd => a.reduce_and().to_logic(),
        UnaryOp::RedOr => a.reduce_or().to_logic(),
        UnaryOp::RedXor => a.reduce_xor().to_logic(),
        UnaryOp::RedNand => invert(a.reduce_and()).to_logic(),
        UnaryOp::RedNor => invert(a.reduce_or()).to_logic(),
        UnaryOp::RedXnor => invert(a.reduce_xor()).to_logic(),
    }
}

fn invert(b: Bit) -> Bit {
    match b {
        Bit::Zero => Bit::One,
        Bit::One => Bit::Zero,
        _ => Bit::X,
    }
}

/// Context-determined binary operators (arithmetic and bitwise).
pub fn arith(op: BinaryOp, a: &Logic, b: &Logic, width: u32, signed: bool) -> Logic {
    match op {
        BinaryOp::And => return a.bit_and(b),
        BinaryOp::Or => return a.bit_or(b),
        BinaryOp::Xor => return a.bit_xor(b),
        BinaryOp::Xnor => return a.bit_xor(b).bit_not(),
        _ => {}
    }
    let (Some(x), Some(y)) = (a.to_biguint(), b.to_biguint()) else {
        return Logic::all_x(width);
    };
    match op {
        BinaryOp::Add => Logic::from_biguint(x + y, width),
        BinaryOp::Sub => {
            let modulus = BigUint::one() << width as usize;
            Logic::from_biguint(x + &modulus - (y % &modulus), width)
        }
        BinaryOp::Mul => Logic::from_biguint(x * y, width),
        BinaryOp::Div | BinaryOp::Mod => {
            if y.is_zero() {
                return Logic::all_x(width);
            }
            let xi = to_bigint(&x, width, signed);
            let yi = to_bigint(&y, width, signed);
            // BigInt division truncates toward zero, matching Verilog.
            let r = if op == BinaryOp::Div { xi / yi } else { xi % yi };
            from_bigint(r, width)
        }
        _ => Logic::all_x(width),
    }
}

pub fn power(a: &Logic, b: &Logic, width: u32, signed: bool, exp_signed: bool) -> Logic {
    let (Some(x), Some(y)) = (a.to_biguint(), b.to_biguint()) else {
        return Logic::all_x(width);
    };
    let base = to_bigint(&x, width, signed);
    let exp = to_bigint(&y, b.width(), exp_signed);
    if exp.is_negative() {
        if base.is_zero() {
            return Logic::all_x(width);
        }
        if base == BigInt::one() {
            return Logic::from_u64(1, width);
        }
        if base == -BigInt::one() {
            let odd = (&exp % 2u32) != BigInt::zero();
            return from_bigint(if odd { -BigInt::one() } else { BigInt::one() }, width);
        }
        return Logic::zero(width);
    }
    let modulus = BigUint::one() << width as usize;
    let e = exp.to_biguint().unwrap_or_default();
    Logic::from_biguint(x.modpow(&e, &modulus), width)
}

pub fn shift(op: BinaryOp, a: &Logic, amount: &Logic, width: u32, signed: bool) -> Logic {
    let Some(n) = amount.to_biguint() else {
        return Logic::all_x(width);
    };
    let n = n.to_u64().unwrap_or(u64::MAX).min(width as u64 + 1) as i64;
    let mut out = Logic::zero(width);
    match op {
        BinaryOp::Shl | BinaryOp::AShl => {
            for i in 0..width as i64 {
                let src = i - n;
                if src >= 0 {
                    out.set_bit(i as u32, a.bit(src as u32));
                }
            }
        }
        BinaryOp::Shr | BinaryOp::AShr => {
            let fill = if op == BinaryOp::AShr && signed && width > 0 {
                a.bit(width - 1)
            } else {
                Bit::Zero
            };
            for i in 0..width as i64 {
                let src = i + n;
                let b = if src < width as i64 { a.bit(src as u32) } else { fill };
                out.set_bit(i as u32, b);
            }
        }
        _ => {}
    }
    out
}

/// Relational and equality operators; one-bit result.
pub fn compare(op: BinaryOp, a: &Logic, b: &Logic, signed: bool) -> Logic {
    match op {
        BinaryOp::CaseEq => return Logic::from_bool(a.case_eq(b)),
        BinaryOp::CaseNe => return Logic::from_bool(!a.case_eq(b)),
        _ => {}
    }
    if matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
        // A known mismatching bit decides equality even with unknowns elsewhere.
        let diff = a.bit_xor(b);
        let res = match diff.reduce_or() {
            Bit::One => Some(false),
            Bit::Zero => Some(true),
            _ => {
                let known_diff = (0..a.width().max(b.width())).any(|i| {
                    matches!(
                        (a.bit(i), b.bit(i)),
                        (Bit::Zero, Bit::One) | (Bit::One, Bit::Zero)
                    )
                });
                known_diff.then_some(false)
            }
        };
        return match res {
            Some(eq) => Logic::from_bool(if op == BinaryOp::Eq { eq } else { !eq }),
            None => Logic::all_x(1),
        };
    }
    let (Some(x), Some(y)) = (a.to_biguint(), b.to_biguint()) else {
        return Logic::all_x(1);
    };
    let w = a.width().max(b.width());
    let xi = to_bigint(&x, w, signed);
    let yi = to_bigint(&y, w, signed);
    let r = match op {
        BinaryOp::Lt => xi < yi,
        BinaryOp::Le => xi <= yi,
        BinaryOp::Gt => xi > yi,
        BinaryOp::Ge => xi >= yi,
        _ => false,
    };
    Logic::from_bool(r)
}

pub fn logical(op: BinaryOp, a: &Logic, b: &Logic) -> Logic {
    let (x, y) = (a.truth(), b.truth());
    let r = match op {
        BinaryOp::LogAnd => match (x, y) {
            (Bit::Zero, _) | (_, Bit::Zero) => Bit::Zero,
            (Bit::One, Bit::One) => Bit::One,
            _ => Bit::X,
        },
        _ => match (x, y) {
            (Bit::One, _) | (_, Bit::One) => Bit::One,
            (Bit::Zero, Bit::Zero) => Bit::Zero,
            _ => Bit::X,
        },
    };
    r.to_logic()
}

/// `cond ? a : b` with an unknown condition: bits that agree survive.
pub fn merge(a: &Logic, b: &Logic) -> Logic {
    let w = a.width().max(b.width());
    let mut out = Logic::all_x(w);
    for i in 0..w {
        let (x, y) = (a.bit(i), b.bit(i));
        if x == y && matches!(x, Bit::Zero | Bit::One) {
            out.set_bit(i, x);
        }
    }
    out
}

pub fn case_match(kind: CaseKind, sel: &Logic, label: &Logic) -> bool {
    let w = sel.width().max(label.width());
    (0..w).all(|i| {
        let (a, b) = (sel.bit(i), label.bit(i));
        match kind {
            CaseKind::Case => a == b,
            CaseKind::Casez => a == Bit::Z || b == Bit::Z || a == b,
            CaseKind::Casex => {
                matches!(a, Bit::X | Bit::Z) || matches!(b, Bit::X | Bit::Z) || a == b
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtraction_wraps() {
        let a = Logic::from_u64(3, 4);
        let b = Logic::from_u64(5, 4);
        assert_eq!(arith(BinaryOp::Sub, &a, &b, 4, false).to_u64(), Some(14));
    }

    #[test]
    fn signed_division_truncates_toward_zero() {
        let a = Logic::from_i64(-7, 8);
        let b = Logic::from_i64(2, 8);
        assert_eq!(arith(BinaryOp::Div, &a, &b, 8, true).to_i64(), Some(-3));
        assert_eq!(arith(BinaryOp::Mod, &a, &b, 8, true).to_i64(), Some(-1));
    }

    #[test]
    fn division_by_zero_is_unknown() {
        let a = Logic::from_u64(7, 4);
        assert!(!arith(BinaryOp::Div, &a, &Logic::zero(4), 4, false).is_known());
    }

    #[test]
    fn equality_with_unknown() {
        let mut a = Logic::from_u64(0b10, 2);
        a.set_bit(0, Bit::X);
        // bit 1 differs for sure
        assert_eq!(compare(BinaryOp::Eq, &a, &Logic::from_u64(0b00, 2), false).to_u64(), Some(0));
        assert!(!compare(BinaryOp::Eq, &a, &Logic::from_u64(0b10, 2), false).is_known());
    }

    #[test]
    fn arithmetic_shift_right() {
        let a = Logic::from_i64(-8, 8);
        let n = Logic::from_u64(2, 32);
        assert_eq!(shift(BinaryOp::AShr, &a, &n, 8, true).to_i64(), Some(-2));
        assert_eq!(shift(BinaryOp::Shr, &a, &n, 8, true).to_u64(), Some(0x3e));
    }

    #[test]
    fn casez_wildcards() {
        let sel = Logic::from_u64(0b1011, 4);
        let mut label = Logic::from_u64(0b1000, 4);
        label.set_bit(0, Bit::Z);
        label.set_bit(1, Bit::Z);
        label.set_bit(2, Bit::Z);
        assert!(case_match(CaseKind::Casez, &sel, &label));
        assert!(!case_match(CaseKind::Case, &sel, &label));
    }
}
