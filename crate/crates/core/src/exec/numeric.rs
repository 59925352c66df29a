// SPDX-License-Identifier: Apache-2.0

//! Semantics of the immediate-free numeric instructions.
//!
//! Shared by the interpreter and the constant folder so that folding can
//! never disagree with execution. Arithmetic producing a NaN yields the
//! canonical quiet NaN (positive, zero payload); sign-manipulating
//! operations (`abs`, `neg`, `copysign`) and reinterpretations are bit
//! operations and pass NaN payloads through unchanged.

use super::trap::TrapKind;
use super::value::Value;
use crate::model::NumOp;

pub const CANONICAL_NAN_F32: u32 = 0x7FC0_0000;
pub const CANONICAL_NAN_F64: u64 = 0x7FF8_0000_0000_0000;

#[inline]
fn canon32(x: f32) -> f32 {
    if x.is_nan() {
        f32::from_bits(CANONICAL_NAN_F32)
    } else {
        x
    }
}

#[inline]
fn canon64(x: f64) -> f64 {
    if x.is_nan() {
        f64::from_bits(CANONICAL_NAN_F64)
    } else {
        x
    }
}

macro_rules! float_minmax {
    ($name:ident, $t:ty, $canon:ident, $pick_neg_zero:expr, $cmp:ident) => {
        #[inline]
        fn $name(a: $t, b: $t) -> $t {
            if a.is_nan() || b.is_nan() {
                return $canon(<$t>::NAN);
            }
            if a == 0.0 && b == 0.0 {
                let neg = a.is_sign_negative();
                let other_neg = b.is_sign_negative();
                return if $pick_neg_zero(neg, other_neg) { -0.0 } else { 0.0 };
            }
            a.$cmp(b)
        }
    };
}

float_minmax!(fmin32, f32, canon32, |a: bool, b: bool| a || b, min);
float_minmax!(fmax32, f32, canon32, |a: bool, b: bool| a && b, max);
float_minmax!(fmin64, f64, canon64, |a: bool, b: bool| a || b, min);
float_minmax!(fmax64, f64, canon64, |a: bool, b: bool| a && b, max);

/// Truncates toward zero, checking the result fits in `[lo, hi]`.
///
/// Bounds are exact doubles; every f32 converts to f64 exactly, so f32
/// inputs go through the same check.
#[inline]
fn trunc_checked(x: f64, lo_exclusive: f64, hi_exclusive: f64) -> Result<f64, TrapKind> {
    if x.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    if x <= lo_exclusive || x >= hi_exclusive {
        return Err(TrapKind::IntOverflow);
    }
    Ok(x.trunc())
}

const I32_LO: f64 = -2_147_483_649.0;
const I32_HI: f64 = 2_147_483_648.0;
const U32_HI: f64 = 4_294_967_296.0;
const I64_HI: f64 = 9_223_372_036_854_775_808.0;
const U64_HI: f64 = 18_446_744_073_709_551_616.0;

/// One-operand instructions: unary arithmetic, `eqz`, and conversions.
#[inline]
pub fn unary(op: NumOp, a: Value) -> Result<Value, TrapKind> {
    use NumOp::*;
    use Value::*;
    Ok(match (op, a) {
        (I32Eqz, I32(x)) => I32((x == 0) as i32),
        (I64Eqz, I64(x)) => I32((x == 0) as i32),
        (I32Clz, I32(x)) => I32(x.leading_zeros() as i32),
        (I32Ctz, I32(x)) => I32(x.trailing_zeros() as i32),
        (I32Popcnt, I32(x)) => I32(x.count_ones() as i32),
        (I64Clz, I64(x)) => I64(i64::from(x.leading_zeros())),
        (I64Ctz, I64(x)) => I64(i64::from(x.trailing_zeros())),
        (I64Popcnt, I64(x)) => I64(i64::from(x.count_ones())),

        (F32Abs, F32(x)) => F32(f32::from_bits(x.to_bits() & 0x7FFF_FFFF)),
        (F32Neg, F32(x)) => F32(f32::from_bits(x.to_bits() ^ 0x8000_0000)),
        (F32Ceil, F32(x)) => F32(canon32(x.ceil())),
        (F32Floor, F32(x)) => F32(canon32(x.floor())),
        (F32Trunc, F32(x)) => F32(canon32(x.trunc())),
        (F32Nearest, F32(x)) => F32(canon32(x.round_ties_even())),
        (F32Sqrt, F32(x)) => F32(canon32(x.sqrt())),
        (F64Abs, F64(x)) => F64(f64::from_bits(x.to_bits() & 0x7FFF_FFFF_FFFF_FFFF)),
        (F64Neg, F64(x)) => F64(f64::from_bits(x.to_bits() ^ 0x8000_0000_0000_0000)),
        (F64Ceil, F64(x)) => F64(canon64(x.ceil())),
        (F64Floor, F64(x)) => F64(canon64(x.floor())),
        (F64Trunc, F64(x)) => F64(canon64(x.trunc())),
        (F64Nearest, F64(x)) => F64(canon64(x.round_ties_even())),
        (F64Sqrt, F64(x)) => F64(canon64(x.sqrt())),

        (I32WrapI64, I64(x)) => I32(x as i32),
        (I32TruncF32S, F32(x)) => I32(trunc_checked(x.into(), I32_LO, I32_HI)? as i32),
        (I32TruncF32U, F32(x)) => I32(trunc_checked(x.into(), -1.0, U32_HI)? as u32 as i32),
        (I32TruncF64S, F64(x)) => I32(trunc_checked(x, I32_LO, I32_HI)? as i32),
        (I32TruncF64U, F64(x)) => I32(trunc_checked(x, -1.0, U32_HI)? as u32 as i32),
        (I64ExtendI32S, I32(x)) => I64(i64::from(x)),
        (I64ExtendI32U, I32(x)) => I64(i64::from(x as u32)),
        (I64TruncF32S, F32(x)) => I64(trunc_i64(x.into())?),
        (I64TruncF32U, F32(x)) => I64(trunc_checked(x.into(), -1.0, U64_HI)? as u64 as i64),
        (I64TruncF64S, F64(x)) => I64(trunc_i64(x)?),
        (I64TruncF64U, F64(x)) => I64(trunc_checked(x, -1.0, U64_HI)? as u64 as i64),
        (F32ConvertI32S, I32(x)) => F32(x as f32),
        (F32ConvertI32U, I32(x)) => F32(x as u32 as f32),
        (F32ConvertI64S, I64(x)) => F32(x as f32),
        (F32ConvertI64U, I64(x)) => F32(x as u64 as f32),
        (F32DemoteF64, F64(x)) => F32(canon32(x as f32)),
        (F64ConvertI32S, I32(x)) => F64(f64::from(x)),
        (F64ConvertI32U, I32(x)) => F64(f64::from(x as u32)),
        (F64ConvertI64S, I64(x)) => F64(x as f64),
        (F64ConvertI64U, I64(x)) => F64(x as u64 as f64),
        (F64PromoteF32, F32(x)) => F64(canon64(f64::from(x))),
        (I32ReinterpretF32, F32(x)) => I32(x.to_bits() as i32),
        (I64ReinterpretF64, F64(x)) => I64(x.to_bits() as i64),
        (F32ReinterpretI32, I32(x)) => F32(f32::from_bits(x as u32)),
        (F64ReinterpretI64, I64(x)) => F64(f64::from_bits(x as u64)),
        (op, a) => panic!("ill-typed unary operation {op:?} on {a:?}"),
    })
}

#[inline]
fn trunc_i64(x: f64) -> Result<i64, TrapKind> {
    if x.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    // -2^63 itself is representable; anything below is not.
    if !(-I64_HI..I64_HI).contains(&x) {
        return Err(TrapKind::IntOverflow);
    }
    Ok(x.trunc() as i64)
}

/// Two-operand instructions: binary arithmetic and comparisons.
#[inline]
pub fn binary(op: NumOp, a: Value, b: Value) -> Result<Value, TrapKind> {
    use NumOp::*;
    use Value::*;
    Ok(match (op, a, b) {
        (I32Eq, I32(x), I32(y)) => I32((x == y) as i32),
        (I32Ne, I32(x), I32(y)) => I32((x != y) as i32),
        (I32LtS, I32(x), I32(y)) => I32((x < y) as i32),
        (I32LtU, I32(x), I32(y)) => I32(((x as u32) < (y as u32)) as i32),
        (I32GtS, I32(x), I32(y)) => I32((x > y) as i32),
        (I32GtU, I32(x), I32(y)) => I32(((x as u32) > (y as u32)) as i32),
        (I32LeS, I32(x), I32(y)) => I32((x <= y) as i32),
        (I32LeU, I32(x), I32(y)) => I32(((x as u32) <= (y as u32)) as i32),
        (I32GeS, I32(x), I32(y)) => I32((x >= y) as i32),
        (I32GeU, I32(x), I32(y)) => I32(((x as u32) >= (y as u32)) as i32),
        (I64Eq, I64(x), I64(y)) => I32((x == y) as i32),
        (I64Ne, I64(x), I64(y)) => I32((x != y) as i32),
        (I64LtS, I64(x), I64(y)) => I32((x < y) as i32),
        (I64LtU, I64(x), I64(y)) => I32(((x as u64) < (y as u64)) as i32),
        (I64GtS, I64(x), I64(y)) => I32((x > y) as i32),
        (I64GtU, I64(x), I64(y)) => I32(((x as u64) > (y as u64)) as i32),
        (I64LeS, I64(x), I64(y)) => I32((x <= y) as i32),
        (I64LeU, I64(x), I64(y)) => I32(((x as u64) <= (y as u64)) as i32),
        (I64GeS, I64(x), I64(y)) => I32((x >= y) as i32),
        (I64GeU, I64(x), I64(y)) => I32(((x as u64) >= (y as u64)) as i32),
        (F32Eq, F32(x), F32(y)) => I32((x == y) as i32),
        (F32Ne, F32(x), F32(y)) => I32((x != y) as i32),
        (F32Lt, F32(x), F32(y)) => I32((x < y) as i32),
        (F32Gt, F32(x), F32(y)) => I32((x > y) as i32),
        (F32Le, F32(x), F32(y)) => I32((x <= y) as i32),
        (F32Ge, F32(x), F32(y)) => I32((x >= y) as i32),
        (F64Eq, F64(x), F64(y)) => I32((x == y) as i32),
        (F64Ne, F64(x), F64(y)) => I32((x != y) as i32),
        (F64Lt, F64(x), F64(y)) => I32((x < y) as i32),
        (F64Gt, F64(x), F64(y)) => I32((x > y) as i32),
        (F64Le, F64(x), F64(y)) => I32((x <= y) as i32),
        (F64Ge, F64(x), F64(y)) => I32((x >= y) as i32),

        (I32Add, I32(x), I32(y)) => I32(x.wrapping_add(y)),
        (I32Sub, I32(x), I32(y)) => I32(x.wrapping_sub(y)),
        (I32Mul, I32(x), I32(y)) => I32(x.wrapping_mul(y)),
        (I32DivS, I32(x), I32(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            if x == i32::MIN && y == -1 {
                return Err(TrapKind::IntOverflow);
            }
            I32(x / y)
        }
        (I32DivU, I32(x), I32(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            I32(((x as u32) / (y as u32)) as i32)
        }
        (I32RemS, I32(x), I32(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            I32(x.wrapping_rem(y))
        }
        (I32RemU, I32(x), I32(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            I32(((x as u32) % (y as u32)) as i32)
        }
        (I32And, I32(x), I32(y)) => I32(x & y),
        (I32Or, I32(x), I32(y)) => I32(x | y),
        (I32Xor, I32(x), I32(y)) => I32(x ^ y),
        (I32Shl, I32(x), I32(y)) => I32(x.wrapping_shl(y as u32)),
        (I32ShrS, I32(x), I32(y)) => I32(x.wrapping_shr(y as u32)),
        (I32ShrU, I32(x), I32(y)) => I32((x as u32).wrapping_shr(y as u32) as i32),
        (I32Rotl, I32(x), I32(y)) => I32(x.rotate_left(y as u32 % 32)),
        (I32Rotr, I32(x), I32(y)) => I32(x.rotate_right(y as u32 % 32)),

        (I64Add, I64(x), I64(y)) => I64(x.wrapping_add(y)),
        (I64Sub, I64(x), I64(y)) => I64(x.wrapping_sub(y)),
        (I64Mul, I64(x), I64(y)) => I64(x.wrapping_mul(y)),
        (I64DivS, I64(x), I64(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            if x == i64::MIN && y == -1 {
                return Err(TrapKind::IntOverflow);
            }
            I64(x / y)
        }
        (I64DivU, I64(x), I64(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            I64(((x as u64) / (y as u64)) as i64)
        }
        (I64RemS, I64(x), I64(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            I64(x.wrapping_rem(y))
        }
        (I64RemU, I64(x), I64(y)) => {
            if y == 0 {
                return Err(TrapKind::DivByZero);
            }
            I64(((x as u64) % (y as u64)) as i64)
        }
        (I64And, I64(x), I64(y)) => I64(x & y),
        (I64Or, I64(x), I64(y)) => I64(x | y),
        (I64Xor, I64(x), I64(y)) => I64(x ^ y),
        (I64Shl, I64(x), I64(y)) => I64(x.wrapping_shl(y as u32)),
        (I64ShrS, I64(x), I64(y)) => I64(x.wrapping_shr(y as u32)),
        (I64ShrU, I64(x), I64(y)) => I64((x as u64).wrapping_shr(y as u32) as i64),
        (I64Rotl, I64(x), I64(y)) => I64(x.rotate_left((y as u64 % 64) as u32)),
        (I64Rotr, I64(x), I64(y)) => I64(x.rotate_right((y as u64 % 64) as u32)),

        (F32Add, F32(x), F32(y)) => F32(canon32(x + y)),
        (F32Sub, F32(x), F32(y)) => F32(canon32(x - y)),
        (F32Mul, F32(x), F32(y)) => F32(canon32(x * y)),
        (F32Div, F32(x), F32(y)) => F32(canon32(x / y)),
        (F32Min, F32(x), F32(y)) => F32(fmin32(x, y)),
        (F32Max, F32(x), F32(y)) => F32(fmax32(x, y)),
        (F32Copysign, F32(x), F32(y)) => {
            F32(f32::from_bits((x.to_bits() & 0x7FFF_FFFF) | (y.to_bits() & 0x8000_0000)))
        }
        (F64Add, F64(x), F64(y)) => F64(canon64(x + y)),
        (F64Sub, F64(x), F64(y)) => F64(canon64(x - y)),
        (F64Mul, F64(x), F64(y)) => F64(canon64(x * y)),
        (F64Div, F64(x), F64(y)) => F64(canon64(x / y)),
        (F64Min, F64(x), F64(y)) => F64(fmin64(x, y)),
        (F64Max, F64(x), F64(y)) => F64(fmax64(x, y)),
        (F64Copysign, F64(x), F64(y)) => F64(f64::from_bits(
            (x.to_bits() & 0x7FFF_FFFF_FFFF_FFFF) | (y.to_bits() & 0x8000_0000_0000_0000),
        )),
        (op, a, b) => panic!("ill-typed binary operation {op:?} on {a:?}, {b:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use NumOp::*;

    #[test]
    fn declared_signatures_match_the_evaluator() {
        for &op in NumOp::ALL {
            let a = Value::default_for(op.operand_type());
            let r = if op.arity() == 1 { unary(op, a) } else { binary(op, a, a) };
            if let Ok(v) = r {
                assert_eq!(v.ty(), op.result_type(), "{op:?}");
            }
        }
    }

    #[test]
    fn integer_traps() {
        assert_eq!(binary(I32DivS, Value::I32(1), Value::I32(0)), Err(TrapKind::DivByZero));
        assert_eq!(
            binary(I32DivS, Value::I32(i32::MIN), Value::I32(-1)),
            Err(TrapKind::IntOverflow)
        );
        assert_eq!(binary(I32RemS, Value::I32(i32::MIN), Value::I32(-1)), Ok(Value::I32(0)));
        assert_eq!(
            binary(I64DivS, Value::I64(i64::MIN), Value::I64(-1)),
            Err(TrapKind::IntOverflow)
        );
        assert_eq!(binary(I64RemU, Value::I64(5), Value::I64(0)), Err(TrapKind::DivByZero));
    }

    #[test]
    fn truncation_bounds() {
        let t = |op, v| unary(op, v);
        assert_eq!(t(I32TruncF32S, Value::F32(f32::NAN)), Err(TrapKind::InvalidConversion));
        assert_eq!(t(I32TruncF32S, Value::F32(2147483648.0)), Err(TrapKind::IntOverflow));
        assert_eq!(t(I32TruncF32S, Value::F32(-2147483648.0)), Ok(Value::I32(i32::MIN)));
        assert_eq!(t(I32TruncF64S, Value::F64(-2147483648.9)), Ok(Value::I32(i32::MIN)));
        assert_eq!(t(I32TruncF64S, Value::F64(-2147483649.0)), Err(TrapKind::IntOverflow));
        assert_eq!(t(I32TruncF64U, Value::F64(-0.9)), Ok(Value::I32(0)));
        assert_eq!(t(I32TruncF64U, Value::F64(-1.0)), Err(TrapKind::IntOverflow));
        assert_eq!(t(I32TruncF64U, Value::F64(4294967295.9)), Ok(Value::I32(-1)));
        assert_eq!(t(I64TruncF64S, Value::F64(-9223372036854775808.0)), Ok(Value::I64(i64::MIN)));
        assert_eq!(t(I64TruncF64S, Value::F64(9223372036854775808.0)), Err(TrapKind::IntOverflow));
        assert_eq!(t(I64TruncF64U, Value::F64(18446744073709549568.0)), Ok(Value::I64(-2048)));
        assert_eq!(t(I64TruncF32U, Value::F32(f32::INFINITY)), Err(TrapKind::IntOverflow));
    }

    #[test]
    fn nan_canonicalization() {
        let odd = Value::f32_bits(0xFFC0_1234);
        assert_eq!(binary(F32Add, odd, Value::F32(1.0)), Ok(Value::f32_bits(CANONICAL_NAN_F32)));
        assert_eq!(unary(F32Neg, odd), Ok(Value::f32_bits(0x7FC0_1234)));
        assert_eq!(unary(F32Abs, odd), Ok(Value::f32_bits(0x7FC0_1234)));
        assert_eq!(
            unary(F64PromoteF32, odd),
            Ok(Value::f64_bits(CANONICAL_NAN_F64))
        );
        assert_eq!(binary(F64Min, Value::F64(f64::NAN), Value::F64(1.0)), Ok(Value::f64_bits(CANONICAL_NAN_F64)));
    }

    #[test]
    fn min_max_signed_zero() {
        assert_eq!(binary(F32Min, Value::F32(0.0), Value::F32(-0.0)), Ok(Value::F32(-0.0)));
        assert_eq!(binary(F32Max, Value::F32(-0.0), Value::F32(0.0)), Ok(Value::F32(0.0)));
        assert_eq!(binary(F64Min, Value::F64(-0.0), Value::F64(-0.0)), Ok(Value::F64(-0.0)));
    }

    #[test]
    fn nearest_rounds_half_to_even() {
        assert_eq!(unary(F64Nearest, Value::F64(2.5)), Ok(Value::F64(2.0)));
        assert_eq!(unary(F64Nearest, Value::F64(-0.5)), Ok(Value::F64(-0.0)));
        assert_eq!(unary(F32Nearest, Value::F32(3.5)), Ok(Value::F32(4.0)));
    }

    #[test]
    fn shifts_and_rotates_mask_count() {
        assert_eq!(binary(I32Shl, Value::I32(1), Value::I32(33)), Ok(Value::I32(2)));
        assert_eq!(binary(I32ShrU, Value::I32(-1), Value::I32(-4)), Ok(Value::I32(15)));
        assert_eq!(binary(I64Rotl, Value::I64(1), Value::I64(-1)), Ok(Value::I64(i64::MIN)));
        assert_eq!(binary(I32Rotr, Value::I32(1), Value::I32(1)), Ok(Value::I32(i32::MIN)));
    }
}
