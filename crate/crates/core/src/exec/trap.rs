// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrapKind {
    Unreachable,
    DivByZero,
    IntOverflow,
    InvalidConversion,
    OobMemory,
    OobTable,
    /// Signature mismatch, or a call through an empty table slot.
    IndirectTypeMismatch,
    CallDepthExceeded,
    FuelExhausted,
}

impl TrapKind {
    pub const ALL: [TrapKind; 9] = [
        TrapKind::Unreachable,
        TrapKind::DivByZero,
        TrapKind::IntOverflow,
        TrapKind::InvalidConversion,
        TrapKind::OobMemory,
        TrapKind::OobTable,
        TrapKind::IndirectTypeMismatch,
        TrapKind::CallDepthExceeded,
        TrapKind::FuelExhausted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrapKind::Unreachable => "unreachable",
            TrapKind::DivByZero => "div-by-zero",
            TrapKind::IntOverflow => "int-overflow",
            TrapKind::InvalidConversion => "invalid-conversion",
            TrapKind::OobMemory => "oob-memory",
            TrapKind::OobTable => "oob-table",
            TrapKind::IndirectTypeMismatch => "indirect-type-mismatch",
            TrapKind::CallDepthExceeded => "call-depth-exceeded",
            TrapKind::FuelExhausted => "fuel-exhausted",
        }
    }

    fn default_message(self) -> &'static str {
        match self {
            TrapKind::Unreachable => "unreachable executed",
            TrapKind::DivByZero => "integer divide by zero",
            TrapKind::IntOverflow => "integer overflow",
            TrapKind::InvalidConversion => "invalid conversion to integer",
            TrapKind::OobMemory => "out of bounds memory access",
            TrapKind::OobTable => "undefined table element",
            TrapKind::IndirectTypeMismatch => "indirect call type mismatch",
            TrapKind::CallDepthExceeded => "call stack exhausted",
            TrapKind::FuelExhausted => "fuel exhausted",
        }
    }
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trap ({kind}): {message}")]
pub struct Trap {
    pub kind: TrapKind,
    pub message: String,
}

impl Trap {
    pub fn new(kind: TrapKind, message: impl Into<String>) -> Self {
        Trap {
            kind,
            message: message.into(),
        }
    }
}

impl From<TrapKind> for Trap {
    fn from(kind: TrapKind) -> Self {
        Trap::new(kind, kind.default_message())
    }
}
