// SPDX-License-Identifier: Apache-2.0

//! Structural representation of a decoded WebAssembly 1.0 module.
//!
//! Everything here is plain data. Index validity is the validator's job;
//! the types only encode what the binary format can express.

use std::fmt;

use thiserror::Error;

/// One of the four MVP machine types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValType {
    I32,
    I64,
    F32,
    F64,
}

impl ValType {
    pub fn to_byte(self) -> u8 {
        match self {
            ValType::I32 => 0x7F,
            ValType::I64 => 0x7E,
            ValType::F32 => 0x7D,
            ValType::F64 => 0x7C,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x7F => ValType::I32,
            0x7E => ValType::I64,
            0x7D => ValType::F32,
            0x7C => ValType::F64,
            _ => return None,
        })
    }
}

impl fmt::Display for ValType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValType::I32 => "i32",
            ValType::I64 => "i64",
            ValType::F32 => "f32",
            ValType::F64 => "f64",
        })
    }
}

/// Function signature. `results` holds at most one type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FuncType {
    pub params: Vec<ValType>,
    pub results: Vec<ValType>,
}

impl FuncType {
    pub fn new(params: impl Into<Vec<ValType>>, results: impl Into<Vec<ValType>>) -> Self {
        FuncType {
            params: params.into(),
            results: results.into(),
        }
    }

    pub fn result(&self) -> Option<ValType> {
        self.results.first().copied()
    }
}

impl fmt::Display for FuncType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ") -> (")?;
        for (i, r) in self.results.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

/// Page-count limits for memories and tables (element counts for tables).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Limits {
    pub min: u32,
    pub max: Option<u32>,
}

impl Limits {
    pub fn new(min: u32, max: Option<u32>) -> Self {
        Limits { min, max }
    }
}

/// Result type of a structured control instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockType {
    #[default]
    Empty,
    Value(ValType),
}

impl BlockType {
    pub fn result(self) -> Option<ValType> {
        match self {
            BlockType::Empty => None,
            BlockType::Value(t) => Some(t),
        }
    }
}

impl From<Option<ValType>> for BlockType {
    fn from(t: Option<ValType>) -> Self {
        t.map_or(BlockType::Empty, BlockType::Value)
    }
}

/// Alignment hint and static offset of a memory access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemArg {
    /// log2 of the alignment hint.
    pub align: u32,
    pub offset: u32,
}

impl MemArg {
    pub fn new(align: u32, offset: u32) -> Self {
        MemArg { align, offset }
    }
}

macro_rules! opcode_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident = $byte:literal,)* }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant,)* }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)*];

            pub fn opcode(self) -> u8 {
                match self { $($name::$variant => $byte,)* }
            }

            pub fn from_opcode(b: u8) -> Option<Self> {
                match b { $($byte => Some($name::$variant),)* _ => None }
            }
        }
    };
}

opcode_enum! {
    /// Memory loads, 0x28..=0x35.
    pub enum LoadOp {
        I32Load = 0x28,
        I64Load = 0x29,
        F32Load = 0x2A,
        F64Load = 0x2B,
        I32Load8S = 0x2C,
        I32Load8U = 0x2D,
        I32Load16S = 0x2E,
        I32Load16U = 0x2F,
        I64Load8S = 0x30,
        I64Load8U = 0x31,
        I64Load16S = 0x32,
        I64Load16U = 0x33,
        I64Load32S = 0x34,
        I64Load32U = 0x35,
    }
}

impl LoadOp {
    /// Access width in bytes.
    pub fn width(self) -> u32 {
        use LoadOp::*;
        match self {
            I32Load8S | I32Load8U | I64Load8S | I64Load8U => 1,
            I32Load16S | I32Load16U | I64Load16S | I64Load16U => 2,
            I32Load | F32Load | I64Load32S | I64Load32U => 4,
            I64Load | F64Load => 8,
        }
    }

    pub fn signed(self) -> bool {
        use LoadOp::*;
        matches!(
            self,
            I32Load8S | I32Load16S | I64Load8S | I64Load16S | I64Load32S
        )
    }

    pub fn result(self) -> ValType {
        use LoadOp::*;
        match self {
            I32Load | I32Load8S | I32Load8U | I32Load16S | I32Load16U => ValType::I32,
            F32Load => ValType::F32,
            F64Load => ValType::F64,
            _ => ValType::I64,
        }
    }
}

opcode_enum! {
    /// Memory stores, 0x36..=0x3E.
    pub enum StoreOp {
        I32Store = 0x36,
        I64Store = 0x37,
        F32Store = 0x38,
        F64Store = 0x39,
        I32Store8 = 0x3A,
        I32Store16 = 0x3B,
        I64Store8 = 0x3C,
        I64Store16 = 0x3D,
        I64Store32 = 0x3E,
    }
}

impl StoreOp {
    pub fn width(self) -> u32 {
        use StoreOp::*;
        match self {
            I32Store8 | I64Store8 => 1,
            I32Store16 | I64Store16 => 2,
            I32Store | F32Store | I64Store32 => 4,
            I64Store | F64Store => 8,
        }
    }

    pub fn operand(self) -> ValType {
        use StoreOp::*;
        match self {
            I32Store | I32Store8 | I32Store16 => ValType::I32,
            F32Store => ValType::F32,
            F64Store => ValType::F64,
            I64Store | I64Store8 | I64Store16 | I64Store32 => ValType::I64,
        }
    }
}

opcode_enum! {
    /// Every immediate-free numeric instruction, 0x45..=0xBF.
    pub enum NumOp {
        I32Eqz = 0x45,
        I32Eq = 0x46,
        I32Ne = 0x47,
        I32LtS = 0x48,
        I32LtU = 0x49,
        I32GtS = 0x4A,
        I32GtU = 0x4B,
        I32LeS = 0x4C,
        I32LeU = 0x4D,
        I32GeS = 0x4E,
        I32GeU = 0x4F,
        I64Eqz = 0x50,
        I64Eq = 0x51,
        I64Ne = 0x52,
        I64LtS = 0x53,
        I64LtU = 0x54,
        I64GtS = 0x55,
        I64GtU = 0x56,
        I64LeS = 0x57,
        I64LeU = 0x58,
        I64GeS = 0x59,
        I64GeU = 0x5A,
        F32Eq = 0x5B,
        F32Ne = 0x5C,
        F32Lt = 0x5D,
        F32Gt = 0x5E,
        F32Le = 0x5F,
        F32Ge = 0x60,
        F64Eq = 0x61,
        F64Ne = 0x62,
        F64Lt = 0x63,
        F64Gt = 0x64,
        F64Le = 0x65,
        F64Ge = 0x66,
        I32Clz = 0x67,
        I32Ctz = 0x68,
        I32Popcnt = 0x69,
        I32Add = 0x6A,
        I32Sub = 0x6B,
        I32Mul = 0x6C,
        I32DivS = 0x6D,
        I32DivU = 0x6E,
        I32RemS = 0x6F,
        I32RemU = 0x70,
        I32And = 0x71,
        I32Or = 0x72,
        I32Xor = 0x73,
        I32Shl = 0x74,
        I32ShrS = 0x75,
        I32ShrU = 0x76,
        I32Rotl = 0x77,
        I32Rotr = 0x78,
        I64Clz = 0x79,
        I64Ctz = 0x7A,
        I64Popcnt = 0x7B,
        I64Add = 0x7C,
        I64Sub = 0x7D,
        I64Mul = 0x7E,
        I64DivS = 0x7F,
        I64DivU = 0x80,
        I64RemS = 0x81,
        I64RemU = 0x82,
        I64And = 0x83,
        I64Or = 0x84,
        I64Xor = 0x85,
        I64Shl = 0x86,
        I64ShrS = 0x87,
        I64ShrU = 0x88,
        I64Rotl = 0x89,
        I64Rotr = 0x8A,
        F32Abs = 0x8B,
        F32Neg = 0x8C,
        F32Ceil = 0x8D,
        F32Floor = 0x8E,
        F32Trunc = 0x8F,
        F32Nearest = 0x90,
        F32Sqrt = 0x91,
        F32Add = 0x92,
        F32Sub = 0x93,
        F32Mul = 0x94,
        F32Div = 0x95,
        F32Min = 0x96,
        F32Max = 0x97,
        F32Copysign = 0x98,
        F64Abs = 0x99,
        F64Neg = 0x9A,
        F64Ceil = 0x9B,
        F64Floor = 0x9C,
        F64Trunc = 0x9D,
        F64Nearest = 0x9E,
        F64Sqrt = 0x9F,
        F64Add = 0xA0,
        F64Sub = 0xA1,
        F64Mul = 0xA2,
        F64Div = 0xA3,
        F64Min = 0xA4,
        F64Max = 0xA5,
        F64Copysign = 0xA6,
        I32WrapI64 = 0xA7,
        I32TruncF32S = 0xA8,
        I32TruncF32U = 0xA9,
        I32TruncF64S = 0xAA,
        I32TruncF64U = 0xAB,
        I64ExtendI32S = 0xAC,
        I64ExtendI32U = 0xAD,
        I64TruncF32S = 0xAE,
        I64TruncF32U = 0xAF,
        I64TruncF64S = 0xB0,
        I64TruncF64U = 0xB1,
        F32ConvertI32S = 0xB2,
        F32ConvertI32U = 0xB3,
        F32ConvertI64S = 0xB4,
        F32ConvertI64U = 0xB5,
        F32DemoteF64 = 0xB6,
        F64ConvertI32S = 0xB7,
        F64ConvertI32U = 0xB8,
        F64ConvertI64S = 0xB9,
        F64ConvertI64U = 0xBA,
        F64PromoteF32 = 0xBB,
        I32ReinterpretF32 = 0xBC,
        I64ReinterpretF64 = 0xBD,
        F32ReinterpretI32 = 0xBE,
        F64ReinterpretI64 = 0xBF,
    }
}

/// Shape class of a numeric instruction, used by the tree IR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumClass {
    Unary,
    Binary,
    Compare,
    Convert,
}

impl NumOp {
    pub fn class(self) -> NumClass {
        match self.opcode() {
            0x45..=0x66 => NumClass::Compare,
            0x67..=0x69 | 0x79..=0x7B | 0x8B..=0x91 | 0x99..=0x9F => NumClass::Unary,
            0xA7..=0xBF => NumClass::Convert,
            _ => NumClass::Binary,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            NumOp::I32Eqz | NumOp::I64Eqz => 1,
            _ => match self.class() {
                NumClass::Binary | NumClass::Compare => 2,
                NumClass::Unary | NumClass::Convert => 1,
            },
        }
    }

    /// Operand type (all operands of a numeric op share one type).
    pub fn operand_type(self) -> ValType {
        use ValType::*;
        match self.opcode() {
            0x45..=0x4F | 0x67..=0x78 => I32,
            0x50..=0x5A | 0x79..=0x8A => I64,
            0x5B..=0x60 | 0x8B..=0x98 => F32,
            0x61..=0x66 | 0x99..=0xA6 => F64,
            0xA7 => I64,
            0xA8 | 0xA9 | 0xAE | 0xAF | 0xBB | 0xBC => F32,
            0xAA | 0xAB | 0xB0 | 0xB1 | 0xB6 | 0xBD => F64,
            0xAC | 0xAD | 0xB2 | 0xB3 | 0xB7 | 0xB8 | 0xBE => I32,
            0xB4 | 0xB5 | 0xB9 | 0xBA | 0xBF => I64,
            _ => unreachable!("opcode table covers 0x45..=0xBF"),
        }
    }

    pub fn result_type(self) -> ValType {
        use ValType::*;
        match self.class() {
            NumClass::Compare => I32,
            NumClass::Unary | NumClass::Binary => self.operand_type(),
            NumClass::Convert => match self.opcode() {
                0xA7..=0xAB | 0xBC => I32,
                0xAC..=0xB1 | 0xBD => I64,
                0xB2..=0xB6 | 0xBE => F32,
                _ => F64,
            },
        }
    }

    /// Whether some operand values make this instruction trap.
    pub fn can_trap(self) -> bool {
        use NumOp::*;
        matches!(
            self,
            I32DivS
                | I32DivU
                | I32RemS
                | I32RemU
                | I64DivS
                | I64DivU
                | I64RemS
                | I64RemU
                | I32TruncF32S
                | I32TruncF32U
                | I32TruncF64S
                | I32TruncF64U
                | I64TruncF32S
                | I64TruncF32U
                | I64TruncF64S
                | I64TruncF64U
        )
    }
}

/// A single MVP instruction with its immediates.
///
/// Float literals are kept as raw IEEE-754 bits so that structural
/// equality is bit-exact, NaN payloads included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Unreachable,
    Nop,
    Block(BlockType),
    Loop(BlockType),
    If(BlockType),
    Else,
    End,
    Br(u32),
    BrIf(u32),
    BrTable { targets: Vec<u32>, default: u32 },
    Return,
    Call(u32),
    CallIndirect(u32),
    Drop,
    Select,
    LocalGet(u32),
    LocalSet(u32),
    LocalTee(u32),
    GlobalGet(u32),
    GlobalSet(u32),
    Load(LoadOp, MemArg),
    Store(StoreOp, MemArg),
    MemorySize,
    MemoryGrow,
    I32Const(i32),
    I64Const(i64),
    F32Const(u32),
    F64Const(u64),
    Num(NumOp),
}

/// Initializer of a global or a segment offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstExpr {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
    GlobalGet(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalType {
    pub ty: ValType,
    pub mutable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportDesc {
    /// Type index.
    Func(u32),
    Table(Limits),
    Memory(Limits),
    Global(GlobalType),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Import {
    pub module: String,
    pub field: String,
    pub desc: ImportDesc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExportKind {
    Func,
    Table,
    Memory,
    Global,
}

impl fmt::Display for ExportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportKind::Func => "func",
            ExportKind::Table => "table",
            ExportKind::Memory => "memory",
            ExportKind::Global => "global",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Export {
    pub name: String,
    pub kind: ExportKind,
    pub index: u32,
}

/// A defined (non-imported) function.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Func {
    pub type_index: u32,
    /// Declared locals, expanded one entry per local (parameters excluded).
    pub locals: Vec<ValType>,
    /// Flat body including the closing `End`.
    pub body: Vec<Instr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Global {
    pub ty: GlobalType,
    pub init: ConstExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSegment {
    pub table: u32,
    pub offset: ConstExpr,
    pub funcs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub memory: u32,
    pub offset: ConstExpr,
    pub bytes: Vec<u8>,
}

/// An uninterpreted custom section and the id of the standard section it
/// followed (0 when it preceded every standard section).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CustomSection {
    pub after: u8,
    pub name: String,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Module {
    pub types: Vec<FuncType>,
    pub imports: Vec<Import>,
    pub funcs: Vec<Func>,
    /// Funcref tables; at most one.
    pub tables: Vec<Limits>,
    /// At most one.
    pub memories: Vec<Limits>,
    pub globals: Vec<Global>,
    pub exports: Vec<Export>,
    pub start: Option<u32>,
    pub elements: Vec<ElementSegment>,
    pub data: Vec<DataSegment>,
    pub customs: Vec<CustomSection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructuralError {
    #[error("function index {index} out of range (function space has {len} entries)")]
    FuncIndex { index: u32, len: u32 },
    #[error("type index {index} out of range ({len} types)")]
    TypeIndex { index: u32, len: u32 },
    #[error("function type has {0} results; at most one is allowed")]
    TooManyResults(usize),
    #[error("{0} memories declared; at most one is allowed")]
    TooManyMemories(usize),
    #[error("{0} tables declared; at most one is allowed")]
    TooManyTables(usize),
    #[error("limits min {min} exceeds max {max}")]
    LimitsOrder { min: u32, max: u32 },
}

impl Module {
    pub fn imported_funcs(&self) -> impl Iterator<Item = u32> + '_ {
        self.imports.iter().filter_map(|i| match i.desc {
            ImportDesc::Func(t) => Some(t),
            _ => None,
        })
    }

    pub fn imported_func_count(&self) -> u32 {
        self.imported_funcs().count() as u32
    }

    pub fn imported_globals(&self) -> impl Iterator<Item = GlobalType> + '_ {
        self.imports.iter().filter_map(|i| match i.desc {
            ImportDesc::Global(g) => Some(g),
            _ => None,
        })
    }

    /// Size of the function index space (imports first, then definitions).
    pub fn func_space_len(&self) -> u32 {
        self.imported_func_count() + self.funcs.len() as u32
    }

    /// Type index of any function in the function index space.
    pub fn func_type_index(&self, index: u32) -> Option<u32> {
        let imported = self.imported_func_count();
        if index < imported {
            self.imported_funcs().nth(index as usize)
        } else {
            self.funcs
                .get((index - imported) as usize)
                .map(|f| f.type_index)
        }
    }

    pub fn func_signature(&self, index: u32) -> Result<&FuncType, StructuralError> {
        let ti = self.func_type_index(index).ok_or(StructuralError::FuncIndex {
            index,
            len: self.func_space_len(),
        })?;
        self.types.get(ti as usize).ok_or(StructuralError::TypeIndex {
            index: ti,
            len: self.types.len() as u32,
        })
    }

    /// Finds the export with the given name; names compare bytewise.
    pub fn export_lookup(&self, name: &str) -> Option<(ExportKind, u32)> {
        self.exports
            .iter()
            .find(|e| e.name.as_bytes() == name.as_bytes())
            .map(|e| (e.kind, e.index))
    }

    pub fn has_memory(&self) -> bool {
        !self.memories.is_empty()
            || self
                .imports
                .iter()
                .any(|i| matches!(i.desc, ImportDesc::Memory(_)))
    }

    pub fn has_table(&self) -> bool {
        !self.tables.is_empty()
            || self
                .imports
                .iter()
                .any(|i| matches!(i.desc, ImportDesc::Table(_)))
    }

    /// Checks the MVP cardinality restrictions the encoder relies on.
    pub fn check_mvp_shape(&self) -> Result<(), StructuralError> {
        let mems = self.memories.len()
            + self
                .imports
                .iter()
                .filter(|i| matches!(i.desc, ImportDesc::Memory(_)))
                .count();
        if mems > 1 {
            return Err(StructuralError::TooManyMemories(mems));
        }
        let tables = self.tables.len()
            + self
                .imports
                .iter()
                .filter(|i| matches!(i.desc, ImportDesc::Table(_)))
                .count();
        if tables > 1 {
            return Err(StructuralError::TooManyTables(tables));
        }
        for t in &self.types {
            if t.results.len() > 1 {
                return Err(StructuralError::TooManyResults(t.results.len()));
            }
        }
        for l in self.memories.iter().chain(&self.tables) {
            if let Some(max) = l.max {
                if l.min > max {
                    return Err(StructuralError::LimitsOrder { min: l.min, max });
                }
            }
        }
        Ok(())
    }
}
