// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use crate::model::ValType;

/// A runtime scalar.
///
/// Equality is bitwise for floats, so two NaNs are equal exactly when
/// their bit patterns are.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::I32(a), Value::I32(b)) => a == b,
            (Value::I64(a), Value::I64(b)) => a == b,
            (Value::F32(a), Value::F32(b)) => a.to_bits() == b.to_bits(),
            (Value::F64(a), Value::F64(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn ty(self) -> ValType {
        match self {
            Value::I32(_) => ValType::I32,
            Value::I64(_) => ValType::I64,
            Value::F32(_) => ValType::F32,
            Value::F64(_) => ValType::F64,
        }
    }

    pub fn default_for(ty: ValType) -> Value {
        match ty {
            ValType::I32 => Value::I32(0),
            ValType::I64 => Value::I64(0),
            ValType::F32 => Value::F32(0.0),
            ValType::F64 => Value::F64(0.0),
        }
    }

    pub fn f32_bits(bits: u32) -> Value {
        Value::F32(f32::from_bits(bits))
    }

    pub fn f64_bits(bits: u64) -> Value {
        Value::F64(f64::from_bits(bits))
    }

    /// Raw bit pattern zero-extended to 64 bits.
    pub fn bits(self) -> u64 {
        match self {
            Value::I32(v) => u64::from(v as u32),
            Value::I64(v) => v as u64,
            Value::F32(v) => u64::from(v.to_bits()),
            Value::F64(v) => v.to_bits(),
        }
    }

    #[inline]
    pub fn as_i32(self) -> i32 {
        match self {
            Value::I32(v) => v,
            other => panic!("expected i32, found {other:?}"),
        }
    }

    #[inline]
    pub fn as_i64(self) -> i64 {
        match self {
            Value::I64(v) => v,
            other => panic!("expected i64, found {other:?}"),
        }
    }

    #[inline]
    pub fn as_f32(self) -> f32 {
        match self {
            Value::F32(v) => v,
            other => panic!("expected f32, found {other:?}"),
        }
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Value::F64(v) => v,
            other => panic!("expected f64, found {other:?}"),
        }
    }

    /// Parses CLI text: decimal or `0x` hex for integers (hex is taken as a
    /// bit pattern), decimal or `nan`/`inf` for floats.
    pub fn parse(ty: ValType, text: &str) -> Option<Value> {
        let text = text.trim();
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let hex = body
            .strip_prefix("0x")
            .or_else(|| body.strip_prefix("0X"));
        match ty {
            ValType::I32 => {
                if let Some(h) = hex {
                    let v = u32::from_str_radix(h, 16).ok()?;
                    Some(Value::I32(if neg { (v as i32).wrapping_neg() } else { v as i32 }))
                } else if let Ok(v) = text.parse::<i32>() {
                    Some(Value::I32(v))
                } else {
                    text.parse::<u32>().ok().map(|v| Value::I32(v as i32))
                }
            }
            ValType::I64 => {
                if let Some(h) = hex {
                    let v = u64::from_str_radix(h, 16).ok()?;
                    Some(Value::I64(if neg { (v as i64).wrapping_neg() } else { v as i64 }))
                } else if let Ok(v) = text.parse::<i64>() {
                    Some(Value::I64(v))
                } else {
                    text.parse::<u64>().ok().map(|v| Value::I64(v as i64))
                }
            }
            ValType::F32 => match hex {
                Some(h) if !neg => u32::from_str_radix(h, 16).ok().map(Value::f32_bits),
                _ => text.parse::<f32>().ok().map(Value::F32),
            },
            ValType::F64 => match hex {
                Some(h) if !neg => u64::from_str_radix(h, 16).ok().map(Value::f64_bits),
                _ => text.parse::<f64>().ok().map(Value::F64),
            },
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::I32(v) => write!(f, "{v}"),
            Value::I64(v) => write!(f, "{v}"),
            Value::F32(v) => write!(f, "{v}"),
            Value::F64(v) => write!(f, "{v}"),
        }
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::I32(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::I64(v)
    }
}

impl From<f32> for Value {
    fn from(v: f32) -> Self {
        Value::F32(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::F64(v)
    }
}
