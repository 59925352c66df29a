// SPDX-License-Identifier: Apache-2.0

//! Host reference semantics for every numeric opcode, written
//! independently of the runtime. NaN results are expected to be the
//! canonical quiet NaN except for abs, neg, copysign and the
//! reinterpretations, which are bit operations.

#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasmdesk::exec::numeric::{binary, unary};
use wasmdesk::exec::{TrapKind, Value};
use wasmdesk::{NumOp, ValType};

pub const SAMPLES: usize = 10_000;
const NAN32: u32 = 0x7FC0_0000;
const NAN64: u64 = 0x7FF8_0000_0000_0000;

fn c32(x: f32) -> Value {
    Value::F32(if x.is_nan() { f32::from_bits(NAN32) } else { x })
}

fn c64(x: f64) -> Value {
    Value::F64(if x.is_nan() { f64::from_bits(NAN64) } else { x })
}

fn b(x: bool) -> Value {
    Value::I32(x as i32)
}

fn clz(x: u64, bits: u32) -> u32 {
    (0..bits).take_while(|i| x >> (bits - 1 - i) & 1 == 0).count() as u32
}

fn ctz(x: u64, bits: u32) -> u32 {
    (0..bits).take_while(|i| x >> i & 1 == 0).count() as u32
}

fn popcnt(x: u64) -> u32 {
    (0..64).filter(|i| x >> i & 1 == 1).count() as u32
}

fn rotl(x: u64, k: u64, bits: u32) -> u64 {
    let mask = if bits == 64 { u64::MAX } else { (1 << bits) - 1 };
    let k = (k % u64::from(bits)) as u32;
    if k == 0 {
        return x & mask;
    }
    ((x << k) | (x & mask) >> (bits - k)) & mask
}

/// Quotient of `a / b` in `[lo, hi]`, or the trap wasm requires.
fn div(a: i128, b: i128, lo: i128, hi: i128) -> Result<i128, TrapKind> {
    if b == 0 {
        return Err(TrapKind::DivByZero);
    }
    let q = a / b;
    if q < lo || q > hi {
        return Err(TrapKind::IntOverflow);
    }
    Ok(q)
}

fn rem(a: i128, b: i128) -> Result<i128, TrapKind> {
    if b == 0 {
        return Err(TrapKind::DivByZero);
    }
    Ok(a % b)
}

/// Float-to-int truncation through i128, which holds every in-range
/// value exactly.
fn trunc(x: f64, lo: i128, hi: i128) -> Result<i128, TrapKind> {
    if x.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    if x.is_infinite() || x.abs() >= 2f64.powi(100) {
        return Err(TrapKind::IntOverflow);
    }
    let t = x.trunc() as i128;
    if t < lo || t > hi {
        return Err(TrapKind::IntOverflow);
    }
    Ok(t)
}

fn fmin32(a: f32, b: f32) -> Value {
    if a.is_nan() || b.is_nan() {
        return c32(f32::NAN);
    }
    if a == b {
        return Value::F32(f32::from_bits(a.to_bits() | b.to_bits()));
    }
    Value::F32(if a < b { a } else { b })
}

fn fmax32(a: f32, b: f32) -> Value {
    if a.is_nan() || b.is_nan() {
        return c32(f32::NAN);
    }
    if a == b {
        return Value::F32(f32::from_bits(a.to_bits() & b.to_bits()));
    }
    Value::F32(if a > b { a } else { b })
}

fn fmin64(a: f64, b: f64) -> Value {
    if a.is_nan() || b.is_nan() {
        return c64(f64::NAN);
    }
    if a == b {
        return Value::F64(f64::from_bits(a.to_bits() | b.to_bits()));
    }
    Value::F64(if a < b { a } else { b })
}

fn fmax64(a: f64, b: f64) -> Value {
    if a.is_nan() || b.is_nan() {
        return c64(f64::NAN);
    }
    if a == b {
        return Value::F64(f64::from_bits(a.to_bits() & b.to_bits()));
    }
    Value::F64(if a > b { a } else { b })
}

pub fn reference(op: NumOp, x: Value, y: Value) -> Result<Value, TrapKind> {
    use NumOp::*;
    // operands are read from raw bits; only the ones matching `op` matter
    let (a64, b64) = (x.bits() as i64, y.bits() as i64);
    let (a32, b32) = (a64 as i32, b64 as i32);
    let (u32a, u32b) = (a32 as u32, b32 as u32);
    let (u64a, u64b) = (a64 as u64, b64 as u64);
    let (fa, fb) = (f32::from_bits(a32 as u32), f32::from_bits(b32 as u32));
    let (da, db) = (f64::from_bits(u64a), f64::from_bits(u64b));
    let i32v = |v: i128| Value::I32(v as i32);
    let i64v = |v: i128| Value::I64(v as i64);
    Ok(match op {
        I32Eqz => b(a32 == 0),
        I32Eq => b(a32 == b32),
        I32Ne => b(a32 != b32),
        I32LtS => b(a32 < b32),
        I32LtU => b(u32a < u32b),
        I32GtS => b(a32 > b32),
        I32GtU => b(u32a > u32b),
        I32LeS => b(a32 <= b32),
        I32LeU => b(u32a <= u32b),
        I32GeS => b(a32 >= b32),
        I32GeU => b(u32a >= u32b),
        I64Eqz => b(a64 == 0),
        I64Eq => b(a64 == b64),
        I64Ne => b(a64 != b64),
        I64LtS => b(a64 < b64),
        I64LtU => b(u64a < u64b),
        I64GtS => b(a64 > b64),
        I64GtU => b(u64a > u64b),
        I64LeS => b(a64 <= b64),
        I64LeU => b(u64a <= u64b),
        I64GeS => b(a64 >= b64),
        I64GeU => b(u64a >= u64b),
        F32Eq => b(fa == fb),
        F32Ne => b(fa != fb),
        F32Lt => b(fa < fb),
        F32Gt => b(fa > fb),
        F32Le => b(fa <= fb),
        F32Ge => b(fa >= fb),
        F64Eq => b(da == db),
        F64Ne => b(da != db),
        F64Lt => b(da < db),
        F64Gt => b(da > db),
        F64Le => b(da <= db),
        F64Ge => b(da >= db),
        I32Clz => Value::I32(clz(u64::from(u32a), 32) as i32),
        I32Ctz => Value::I32(ctz(u64::from(u32a), 32) as i32),
        I32Popcnt => Value::I32(popcnt(u64::from(u32a)) as i32),
        I32Add => i32v(i128::from(a32) + i128::from(b32)),
        I32Sub => i32v(i128::from(a32) - i128::from(b32)),
        I32Mul => i32v(i128::from(a32) * i128::from(b32)),
        I32DivS => i32v(div(a32.into(), b32.into(), i32::MIN.into(), i32::MAX.into())?),
        I32DivU => i32v(div(u32a.into(), u32b.into(), 0, u32::MAX.into())?),
        I32RemS => i32v(rem(a32.into(), b32.into())?),
        I32RemU => i32v(rem(u32a.into(), u32b.into())?),
        I32And => Value::I32(a32 & b32),
        I32Or => Value::I32(a32 | b32),
        I32Xor => Value::I32(a32 ^ b32),
        I32Shl => i32v(i128::from(u32a) << (u32b % 32)),
        I32ShrS => Value::I32(a32 >> (u32b % 32)),
        I32ShrU => Value::I32((u32a >> (u32b % 32)) as i32),
        I32Rotl => Value::I32(rotl(u32a.into(), u32b.into(), 32) as i32),
        I32Rotr => Value::I32(rotl(u32a.into(), 32 - u64::from(u32b % 32), 32) as i32),
        I64Clz => Value::I64(clz(u64a, 64).into()),
        I64Ctz => Value::I64(ctz(u64a, 64).into()),
        I64Popcnt => Value::I64(popcnt(u64a).into()),
        I64Add => i64v(i128::from(a64) + i128::from(b64)),
        I64Sub => i64v(i128::from(a64) - i128::from(b64)),
        I64Mul => i64v(i128::from(a64).wrapping_mul(i128::from(b64))),
        I64DivS => i64v(div(a64.into(), b64.into(), i64::MIN.into(), i64::MAX.into())?),
        I64DivU => i64v(div(u64a.into(), u64b.into(), 0, u64::MAX.into())?),
        I64RemS => i64v(rem(a64.into(), b64.into())?),
        I64RemU => i64v(rem(u64a.into(), u64b.into())?),
        I64And => Value::I64(a64 & b64),
        I64Or => Value::I64(a64 | b64),
        I64Xor => Value::I64(a64 ^ b64),
        I64Shl => i64v(i128::from(u64a) << (u64b % 64)),
        I64ShrS => Value::I64(a64 >> (u64b % 64)),
        I64ShrU => Value::I64((u64a >> (u64b % 64)) as i64),
        I64Rotl => Value::I64(rotl(u64a, u64b, 64) as i64),
        I64Rotr => Value::I64(rotl(u64a, 64 - u64b % 64, 64) as i64),
        F32Abs => Value::F32(f32::from_bits(fa.to_bits() & 0x7FFF_FFFF)),
        F32Neg => Value::F32(f32::from_bits(fa.to_bits() ^ 0x8000_0000)),
        F32Copysign => {
            Value::F32(f32::from_bits(fa.to_bits() & 0x7FFF_FFFF | fb.to_bits() & 0x8000_0000))
        }
        F32Ceil => c32(fa.ceil()),
        F32Floor => c32(fa.floor()),
        F32Trunc => c32(fa.trunc()),
        F32Nearest => c32(fa.round_ties_even()),
        F32Sqrt => c32(fa.sqrt()),
        F32Add => c32(fa + fb),
        F32Sub => c32(fa - fb),
        F32Mul => c32(fa * fb),
        F32Div => c32(fa / fb),
        F32Min => fmin32(fa, fb),
        F32Max => fmax32(fa, fb),
        F64Abs => Value::F64(f64::from_bits(da.to_bits() & !(1 << 63))),
        F64Neg => Value::F64(f64::from_bits(da.to_bits() ^ (1 << 63))),
        F64Copysign => {
            Value::F64(f64::from_bits(da.to_bits() & !(1 << 63) | db.to_bits() & (1 << 63)))
        }
        F64Ceil => c64(da.ceil()),
        F64Floor => c64(da.floor()),
        F64Trunc => c64(da.trunc()),
        F64Nearest => c64(da.round_ties_even()),
        F64Sqrt => c64(da.sqrt()),
        F64Add => c64(da + db),
        F64Sub => c64(da - db),
        F64Mul => c64(da * db),
        F64Div => c64(da / db),
        F64Min => fmin64(da, db),
        F64Max => fmax64(da, db),
        I32WrapI64 => i32v(a64.into()),
        I32TruncF32S => i32v(trunc(fa.into(), i32::MIN.into(), i32::MAX.into())?),
        I32TruncF32U => i32v(trunc(fa.into(), 0, u32::MAX.into())?),
        I32TruncF64S => i32v(trunc(da, i32::MIN.into(), i32::MAX.into())?),
        I32TruncF64U => i32v(trunc(da, 0, u32::MAX.into())?),
        I64ExtendI32S => Value::I64(a32.into()),
        I64ExtendI32U => Value::I64(u32a.into()),
        I64TruncF32S => i64v(trunc(fa.into(), i64::MIN.into(), i64::MAX.into())?),
        I64TruncF32U => i64v(trunc(fa.into(), 0, u64::MAX.into())?),
        I64TruncF64S => i64v(trunc(da, i64::MIN.into(), i64::MAX.into())?),
        I64TruncF64U => i64v(trunc(da, 0, u64::MAX.into())?),
        F32ConvertI32S => c32(a32 as f32),
        F32ConvertI32U => c32(u32a as f32),
        F32ConvertI64S => c32(a64 as f32),
        F32ConvertI64U => c32(u64a as f32),
        F32DemoteF64 => c32(da as f32),
        F64ConvertI32S => c64(a32.into()),
        F64ConvertI32U => c64(u32a.into()),
        F64ConvertI64S => c64(a64 as f64),
        F64ConvertI64U => c64(u64a as f64),
        F64PromoteF32 => c64(fa.into()),
        I32ReinterpretF32 => Value::I32(fa.to_bits() as i32),
        I64ReinterpretF64 => Value::I64(da.to_bits() as i64),
        F32ReinterpretI32 => Value::F32(f32::from_bits(u32a)),
        F64ReinterpretI64 => Value::F64(f64::from_bits(u64a)),
    })
}

/// Random operand of type `ty`, biased toward edge cases.
pub fn sample(rng: &mut ChaCha8Rng, ty: ValType) -> Value {
    let edge = rng.random_bool(0.25);
    match ty {
        ValType::I32 => Value::I32(if edge {
            [0, 1, -1, 31, 32, 33, i32::MIN, i32::MAX, i32::MIN + 1][rng.random_range(0..9)]
        } else {
            rng.random()
        }),
        ValType::I64 => Value::I64(if edge {
            [0, 1, -1, 63, 64, 65, i64::MIN, i64::MAX, i64::MIN + 1][rng.random_range(0..9)]
        } else {
            rng.random()
        }),
        ValType::F32 => Value::F32(if edge {
            let e = [
                0.0, -0.0, 0.5, -0.5, 1.5, 2.5, -2.5, f32::INFINITY, f32::NEG_INFINITY, f32::NAN,
                f32::from_bits(0x7FA0_0001), f32::from_bits(0xFFC0_0000), 2147483648.0,
                -2147483904.0, 4294967296.0, 9.223372e18, f32::MIN_POSITIVE, 1.0e-45,
            ];
            e[rng.random_range(0..e.len())]
        } else if rng.random_bool(0.5) {
            rng.random_range(-1.0e10..1.0e10f32)
        } else {
            f32::from_bits(rng.random())
        }),
        ValType::F64 => Value::F64(if edge {
            let e = [
                0.0, -0.0, 0.5, -0.5, 1.5, 2.5, -2.5, f64::INFINITY, f64::NEG_INFINITY, f64::NAN,
                f64::from_bits(0x7FF4_0000_0000_0001), f64::from_bits(0xFFF8_0000_0000_0000),
                2147483647.9, -2147483648.9, 4294967295.5, 9223372036854775807.0,
                18446744073709549568.0, f64::MIN_POSITIVE, 5e-324,
            ];
            e[rng.random_range(0..e.len())]
        } else if rng.random_bool(0.5) {
            rng.random_range(-1.0e20..1.0e20f64)
        } else {
            f64::from_bits(rng.random())
        }),
    }
}

pub fn same(a: &Result<Value, TrapKind>, b: &Result<Value, TrapKind>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.ty() == y.ty() && x.bits() == y.bits(),
        (Err(x), Err(y)) => x == y,
        _ => false,
    }
}

/// Compares `samples` random operand sets per opcode against the numeric
/// core; the first disagreement is returned as text.
pub fn check_opcodes(seed: u64, samples: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &op in NumOp::ALL {
        let ty = op.operand_type();
        for _ in 0..samples {
            let (x, y) = (sample(&mut rng, ty), sample(&mut rng, ty));
            let got = if op.arity() == 1 { unary(op, x) } else { binary(op, x, y) };
            let want = reference(op, x, y);
            if !same(&got, &want) {
                return Err(format!("{op:?}({x:?}, {y:?}): got {got:?}, want {want:?}"));
            }
        }
    }
    Ok(())
}
