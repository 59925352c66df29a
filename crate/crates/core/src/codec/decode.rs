// SPDX-License-Identifier: Apache-2.0

//! Single forward pass over a binary module.
//!
//! [`ModuleReader`] yields one [`Payload`] per section, except that the
//! code section is split into one payload per function body. A body is
//! decoded as soon as its own bytes are present; nothing past the
//! current section's declared size is inspected.

use super::cursor::{ByteCursor, DecodeResult, MalformedError, MalformedKind};
use crate::model::*;

pub const MAGIC: [u8; 4] = *b"\0asm";
pub const VERSION: u32 = 1;
/// Inputs above this size are rejected before decoding starts.
pub const MAX_INPUT_LEN: usize = 256 * 1024 * 1024;
/// Upper bound on declared locals per function.
pub const MAX_LOCALS: usize = 50_000;

pub(crate) mod section {
    pub const CUSTOM: u8 = 0;
    pub const TYPE: u8 = 1;
    pub const IMPORT: u8 = 2;
    pub const FUNCTION: u8 = 3;
    pub const TABLE: u8 = 4;
    pub const MEMORY: u8 = 5;
    pub const GLOBAL: u8 = 6;
    pub const EXPORT: u8 = 7;
    pub const START: u8 = 8;
    pub const ELEMENT: u8 = 9;
    pub const CODE: u8 = 10;
    pub const DATA: u8 = 11;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Types(Vec<FuncType>),
    Imports(Vec<Import>),
    /// Type indices of the defined functions.
    Functions(Vec<u32>),
    Tables(Vec<Limits>),
    Memories(Vec<Limits>),
    Globals(Vec<Global>),
    Exports(Vec<Export>),
    Start(u32),
    Elements(Vec<ElementSegment>),
    /// Header of the code section: number of bodies that follow.
    CodeStart { count: u32 },
    /// One decoded function body, in code-section order.
    CodeEntry {
        index: u32,
        locals: Vec<ValType>,
        body: Vec<Instr>,
    },
    Data(Vec<DataSegment>),
    Custom(CustomSection),
}

/// Where the reader is inside the code section.
#[derive(Debug, Clone, Copy)]
struct CodeState {
    remaining: u32,
    next_index: u32,
    outer_limit: usize,
    section_end: usize,
}

pub struct ModuleReader<'a> {
    cursor: ByteCursor<'a>,
    header_done: bool,
    last_id: u8,
    code: Option<CodeState>,
    failed: bool,
}

impl<'a> ModuleReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ModuleReader {
            cursor: ByteCursor::new(bytes),
            header_done: false,
            last_id: 0,
            code: None,
            failed: false,
        }
    }

    /// Current byte offset; never decreases.
    pub fn position(&self) -> usize {
        self.cursor.position()
    }

    fn header(&mut self) -> DecodeResult<()> {
        if self.cursor.limit() > MAX_INPUT_LEN {
            return Err(self.cursor.error(
                MalformedKind::Truncated,
                format!("input exceeds {MAX_INPUT_LEN} bytes"),
            ));
        }
        let start = self.cursor.position();
        let magic = self.cursor.read_array::<4>().map_err(|_| {
            MalformedError::new(MalformedKind::BadMagic, start, "missing magic number")
        })?;
        if magic != MAGIC {
            return Err(MalformedError::new(
                MalformedKind::BadMagic,
                start,
                "magic number is not \\0asm",
            ));
        }
        let vpos = self.cursor.position();
        let version = self.cursor.read_array::<4>().map_err(|_| {
            MalformedError::new(MalformedKind::BadVersion, vpos, "missing version field")
        })?;
        let version = u32::from_le_bytes(version);
        if version != VERSION {
            return Err(MalformedError::new(
                MalformedKind::BadVersion,
                vpos,
                format!("unsupported version {version}"),
            ));
        }
        Ok(())
    }

    fn next_payload(&mut self) -> DecodeResult<Option<Payload>> {
        if !self.header_done {
            self.header()?;
            self.header_done = true;
        }
        if let Some(state) = self.code {
            return self.next_code_entry(state).map(Some);
        }
        if self.cursor.is_empty() {
            return Ok(None);
        }
        let id_pos = self.cursor.position();
        let id = self.cursor.read_u8()?;
        let size = self.cursor.read_u32()? as usize;
        let section_end = self.cursor.position() + size;
        // Code bodies are handed out one at a time, so the code section may
        // still be arriving; every other section must be complete.
        let window = if id == section::CODE {
            size.min(self.cursor.remaining())
        } else {
            size
        };
        let outer = self.cursor.push_limit(window)?;

        if id != section::CUSTOM {
            if id > section::DATA {
                return Err(MalformedError::new(
                    MalformedKind::BadSectionOrder,
                    id_pos,
                    format!("unknown section id {id}"),
                ));
            }
            if id <= self.last_id {
                return Err(MalformedError::new(
                    MalformedKind::BadSectionOrder,
                    id_pos,
                    format!("section {id} after section {}", self.last_id),
                ));
            }
            self.last_id = id;
        }

        let payload = match id {
            section::CUSTOM => {
                let name = self.cursor.read_name()?;
                let data = self.cursor.read_bytes(self.cursor.remaining())?.to_vec();
                Payload::Custom(CustomSection {
                    after: self.last_id,
                    name,
                    data,
                })
            }
            section::TYPE => Payload::Types(self.vec(read_func_type)?),
            section::IMPORT => Payload::Imports(self.vec(read_import)?),
            section::FUNCTION => Payload::Functions(self.vec(|c| c.read_u32())?),
            section::TABLE => Payload::Tables(self.vec(read_table_type)?),
            section::MEMORY => Payload::Memories(self.vec(read_limits)?),
            section::GLOBAL => Payload::Globals(self.vec(read_global)?),
            section::EXPORT => Payload::Exports(self.vec(read_export)?),
            section::START => Payload::Start(self.cursor.read_u32()?),
            section::ELEMENT => Payload::Elements(self.vec(read_element)?),
            section::CODE => {
                let count = self.cursor.read_u32()?;
                self.code = Some(CodeState {
                    remaining: count,
                    next_index: 0,
                    outer_limit: outer,
                    section_end,
                });
                if count == 0 {
                    self.finish_section(outer, section_end)?;
                    self.code = None;
                }
                return Ok(Some(Payload::CodeStart { count }));
            }
            section::DATA => Payload::Data(self.vec(read_data)?),
            _ => unreachable!(),
        };
        self.finish_section(outer, section_end)?;
        Ok(Some(payload))
    }

    fn finish_section(&mut self, outer: usize, section_end: usize) -> DecodeResult<()> {
        if section_end > self.cursor.limit() {
            return Err(self.cursor.error(
                MalformedKind::Truncated,
                "section extends past the end of the input",
            ));
        }
        if self.cursor.position() != section_end {
            return Err(self.cursor.error(
                MalformedKind::SectionSizeMismatch,
                format!(
                    "section content ends at {} but declared size ends at {section_end}",
                    self.cursor.position()
                ),
            ));
        }
        self.cursor.pop_limit(outer);
        Ok(())
    }

    fn next_code_entry(&mut self, mut state: CodeState) -> DecodeResult<Payload> {
        let size = self.cursor.read_u32()? as usize;
        let section_limit = self.cursor.push_limit(size)?;
        let body_end = self.cursor.position() + size;
        let locals = read_locals(&mut self.cursor)?;
        let body = read_body(&mut self.cursor)?;
        if self.cursor.position() != body_end {
            return Err(self.cursor.error(
                MalformedKind::SectionSizeMismatch,
                "function body shorter than its declared size",
            ));
        }
        self.cursor.pop_limit(section_limit);
        let index = state.next_index;
        state.next_index += 1;
        state.remaining -= 1;
        if state.remaining == 0 {
            self.code = None;
            self.finish_section(state.outer_limit, state.section_end)?;
        } else {
            self.code = Some(state);
        }
        Ok(Payload::CodeEntry {
            index,
            locals,
            body,
        })
    }

    fn vec<T>(
        &mut self,
        mut item: impl FnMut(&mut ByteCursor<'a>) -> DecodeResult<T>,
    ) -> DecodeResult<Vec<T>> {
        let n = self.cursor.read_u32()? as usize;
        // Every item occupies at least one byte.
        let mut out = Vec::with_capacity(n.min(self.cursor.remaining()));
        for _ in 0..n {
            out.push(item(&mut self.cursor)?);
        }
        Ok(out)
    }
}

impl Iterator for ModuleReader<'_> {
    type Item = DecodeResult<Payload>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_payload() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

fn read_valtype(c: &mut ByteCursor<'_>) -> DecodeResult<ValType> {
    let pos = c.position();
    let b = c.read_u8()?;
    ValType::from_byte(b).ok_or_else(|| {
        MalformedError::new(
            MalformedKind::BadOpcode,
            pos,
            format!("invalid value type 0x{b:02x}"),
        )
    })
}

fn expect_byte(c: &mut ByteCursor<'_>, want: u8, what: &str) -> DecodeResult<()> {
    let pos = c.position();
    let b = c.read_u8()?;
    if b != want {
        return Err(MalformedError::new(
            MalformedKind::BadOpcode,
            pos,
            format!("expected {what} 0x{want:02x}, found 0x{b:02x}"),
        ));
    }
    Ok(())
}

fn read_func_type(c: &mut ByteCursor<'_>) -> DecodeResult<FuncType> {
    expect_byte(c, 0x60, "function type marker")?;
    let params = read_valtypes(c)?;
    let pos = c.position();
    let results = read_valtypes(c)?;
    if results.len() > 1 {
        return Err(MalformedError::new(
            MalformedKind::BadOpcode,
            pos,
            "multiple results are not supported",
        ));
    }
    Ok(FuncType { params, results })
}

fn read_valtypes(c: &mut ByteCursor<'_>) -> DecodeResult<Vec<ValType>> {
    let n = c.read_u32()? as usize;
    let mut out = Vec::with_capacity(n.min(c.remaining()));
    for _ in 0..n {
        out.push(read_valtype(c)?);
    }
    Ok(out)
}

fn read_limits(c: &mut ByteCursor<'_>) -> DecodeResult<Limits> {
    let pos = c.position();
    let flag = c.read_u8()?;
    let limits = match flag {
        0x00 => Limits::new(c.read_u32()?, None),
        0x01 => Limits::new(c.read_u32()?, Some(c.read_u32()?)),
        _ => {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("invalid limits flag 0x{flag:02x}"),
            ))
        }
    };
    if let Some(max) = limits.max {
        if limits.min > max {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("limits min {} exceeds max {max}", limits.min),
            ));
        }
    }
    Ok(limits)
}

fn read_table_type(c: &mut ByteCursor<'_>) -> DecodeResult<Limits> {
    expect_byte(c, 0x70, "funcref element type")?;
    read_limits(c)
}

fn read_global_type(c: &mut ByteCursor<'_>) -> DecodeResult<GlobalType> {
    let ty = read_valtype(c)?;
    let pos = c.position();
    let mutable = match c.read_u8()? {
        0x00 => false,
        0x01 => true,
        b => {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("invalid mutability flag 0x{b:02x}"),
            ))
        }
    };
    Ok(GlobalType { ty, mutable })
}

fn read_import(c: &mut ByteCursor<'_>) -> DecodeResult<Import> {
    let module = c.read_name()?;
    let field = c.read_name()?;
    let pos = c.position();
    let desc = match c.read_u8()? {
        0x00 => ImportDesc::Func(c.read_u32()?),
        0x01 => ImportDesc::Table(read_table_type(c)?),
        0x02 => ImportDesc::Memory(read_limits(c)?),
        0x03 => ImportDesc::Global(read_global_type(c)?),
        b => {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("invalid import kind 0x{b:02x}"),
            ))
        }
    };
    Ok(Import {
        module,
        field,
        desc,
    })
}

fn read_const_expr(c: &mut ByteCursor<'_>) -> DecodeResult<ConstExpr> {
    let pos = c.position();
    let expr = match c.read_u8()? {
        0x41 => ConstExpr::I32(c.read_s32()?),
        0x42 => ConstExpr::I64(c.read_s64()?),
        0x43 => ConstExpr::F32(u32::from_le_bytes(c.read_array()?)),
        0x44 => ConstExpr::F64(u64::from_le_bytes(c.read_array()?)),
        0x23 => ConstExpr::GlobalGet(c.read_u32()?),
        b => {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("opcode 0x{b:02x} not allowed in a constant expression"),
            ))
        }
    };
    expect_byte(c, 0x0B, "end of constant expression")?;
    Ok(expr)
}

fn read_global(c: &mut ByteCursor<'_>) -> DecodeResult<Global> {
    Ok(Global {
        ty: read_global_type(c)?,
        init: read_const_expr(c)?,
    })
}

fn read_export(c: &mut ByteCursor<'_>) -> DecodeResult<Export> {
    let name = c.read_name()?;
    let pos = c.position();
    let kind = match c.read_u8()? {
        0x00 => ExportKind::Func,
        0x01 => ExportKind::Table,
        0x02 => ExportKind::Memory,
        0x03 => ExportKind::Global,
        b => {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("invalid export kind 0x{b:02x}"),
            ))
        }
    };
    Ok(Export {
        name,
        kind,
        index: c.read_u32()?,
    })
}

fn read_element(c: &mut ByteCursor<'_>) -> DecodeResult<ElementSegment> {
    let table = c.read_u32()?;
    let offset = read_const_expr(c)?;
    let n = c.read_u32()? as usize;
    let mut funcs = Vec::with_capacity(n.min(c.remaining()));
    for _ in 0..n {
        funcs.push(c.read_u32()?);
    }
    Ok(ElementSegment {
        table,
        offset,
        funcs,
    })
}

fn read_data(c: &mut ByteCursor<'_>) -> DecodeResult<DataSegment> {
    let memory = c.read_u32()?;
    let offset = read_const_expr(c)?;
    let len = c.read_u32()? as usize;
    let bytes = c.read_bytes(len)?.to_vec();
    Ok(DataSegment {
        memory,
        offset,
        bytes,
    })
}

fn read_locals(c: &mut ByteCursor<'_>) -> DecodeResult<Vec<ValType>> {
    let groups = c.read_u32()?;
    let mut locals = Vec::new();
    for _ in 0..groups {
        let pos = c.position();
        let n = c.read_u32()? as usize;
        let ty = read_valtype(c)?;
        if locals.len() + n > MAX_LOCALS {
            return Err(MalformedError::new(
                MalformedKind::SectionSizeMismatch,
                pos,
                format!("more than {MAX_LOCALS} locals declared"),
            ));
        }
        locals.extend(std::iter::repeat_n(ty, n));
    }
    Ok(locals)
}

fn read_block_type(c: &mut ByteCursor<'_>) -> DecodeResult<BlockType> {
    let pos = c.position();
    match c.read_u8()? {
        0x40 => Ok(BlockType::Empty),
        b => ValType::from_byte(b).map(BlockType::Value).ok_or_else(|| {
            MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("invalid block type 0x{b:02x}"),
            )
        }),
    }
}

fn read_memarg(c: &mut ByteCursor<'_>) -> DecodeResult<MemArg> {
    Ok(MemArg {
        align: c.read_u32()?,
        offset: c.read_u32()?,
    })
}

/// Decodes instructions up to and including the `End` that closes the
/// function body.
fn read_body(c: &mut ByteCursor<'_>) -> DecodeResult<Vec<Instr>> {
    let mut body = Vec::new();
    let mut depth = 1usize;
    while depth > 0 {
        let instr = read_instr(c)?;
        match instr {
            Instr::Block(_) | Instr::Loop(_) | Instr::If(_) => depth += 1,
            Instr::End => depth -= 1,
            _ => {}
        }
        body.push(instr);
    }
    Ok(body)
}

pub(crate) fn read_instr(c: &mut ByteCursor<'_>) -> DecodeResult<Instr> {
    let pos = c.position();
    let op = c.read_u8()?;
    let instr = match op {
        0x00 => Instr::Unreachable,
        0x01 => Instr::Nop,
        0x02 => Instr::Block(read_block_type(c)?),
        0x03 => Instr::Loop(read_block_type(c)?),
        0x04 => Instr::If(read_block_type(c)?),
        0x05 => Instr::Else,
        0x0B => Instr::End,
        0x0C => Instr::Br(c.read_u32()?),
        0x0D => Instr::BrIf(c.read_u32()?),
        0x0E => {
            let n = c.read_u32()? as usize;
            let mut targets = Vec::with_capacity(n.min(c.remaining()));
            for _ in 0..n {
                targets.push(c.read_u32()?);
            }
            Instr::BrTable {
                targets,
                default: c.read_u32()?,
            }
        }
        0x0F => Instr::Return,
        0x10 => Instr::Call(c.read_u32()?),
        0x11 => {
            let ty = c.read_u32()?;
            expect_byte(c, 0x00, "table index")?;
            Instr::CallIndirect(ty)
        }
        0x1A => Instr::Drop,
        0x1B => Instr::Select,
        0x20 => Instr::LocalGet(c.read_u32()?),
        0x21 => Instr::LocalSet(c.read_u32()?),
        0x22 => Instr::LocalTee(c.read_u32()?),
        0x23 => Instr::GlobalGet(c.read_u32()?),
        0x24 => Instr::GlobalSet(c.read_u32()?),
        0x28..=0x35 => Instr::Load(LoadOp::from_opcode(op).unwrap(), read_memarg(c)?),
        0x36..=0x3E => Instr::Store(StoreOp::from_opcode(op).unwrap(), read_memarg(c)?),
        0x3F => {
            expect_byte(c, 0x00, "memory index")?;
            Instr::MemorySize
        }
        0x40 => {
            expect_byte(c, 0x00, "memory index")?;
            Instr::MemoryGrow
        }
        0x41 => Instr::I32Const(c.read_s32()?),
        0x42 => Instr::I64Const(c.read_s64()?),
        0x43 => Instr::F32Const(u32::from_le_bytes(c.read_array()?)),
        0x44 => Instr::F64Const(u64::from_le_bytes(c.read_array()?)),
        0x45..=0xBF => Instr::Num(NumOp::from_opcode(op).unwrap()),
        _ => {
            return Err(MalformedError::new(
                MalformedKind::BadOpcode,
                pos,
                format!("unknown opcode 0x{op:02x}"),
            ))
        }
    };
    Ok(instr)
}

/// Decodes a complete binary module.
pub fn decode_module(bytes: &[u8]) -> Result<Module, MalformedError> {
    let mut module = Module::default();
    let mut declared: Option<Vec<u32>> = None;
    let mut reader = ModuleReader::new(bytes);
    let mut code_seen = false;
    while let Some(payload) = reader.next() {
        match payload? {
            Payload::Types(t) => module.types = t,
            Payload::Imports(i) => module.imports = i,
            Payload::Functions(f) => declared = Some(f),
            Payload::Tables(t) => module.tables = t,
            Payload::Memories(m) => module.memories = m,
            Payload::Globals(g) => module.globals = g,
            Payload::Exports(e) => module.exports = e,
            Payload::Start(s) => module.start = Some(s),
            Payload::Elements(e) => module.elements = e,
            Payload::CodeStart { count } => {
                code_seen = true;
                let expected = declared.as_ref().map_or(0, Vec::len);
                if count as usize != expected {
                    return Err(MalformedError::new(
                        MalformedKind::SectionSizeMismatch,
                        reader.position(),
                        format!("code section has {count} bodies, function section declares {expected}"),
                    ));
                }
                module.funcs.reserve(count as usize);
            }
            Payload::CodeEntry {
                index,
                locals,
                body,
            } => {
                let type_index = declared.as_ref().expect("checked at code start")[index as usize];
                module.funcs.push(Func {
                    type_index,
                    locals,
                    body,
                });
            }
            Payload::Data(d) => module.data = d,
            Payload::Custom(c) => module.customs.push(c),
        }
    }
    if !code_seen && declared.as_ref().is_some_and(|d| !d.is_empty()) {
        return Err(MalformedError::new(
            MalformedKind::SectionSizeMismatch,
            bytes.len(),
            "function section declared bodies but no code section follows",
        ));
    }
    Ok(module)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY: [u8; 8] = [0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00];

    #[test]
    fn empty_module() {
        assert_eq!(decode_module(&EMPTY).unwrap(), Module::default());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = EMPTY;
        b[0] = 0x01;
        let e = decode_module(&b).unwrap_err();
        assert_eq!((e.kind, e.offset), (MalformedKind::BadMagic, 0));

        let mut b = EMPTY;
        b[4] = 0x02;
        let e = decode_module(&b).unwrap_err();
        assert_eq!((e.kind, e.offset), (MalformedKind::BadVersion, 4));

        assert_eq!(decode_module(&EMPTY[..6]).unwrap_err().kind, MalformedKind::BadVersion);
        assert_eq!(decode_module(&[]).unwrap_err().kind, MalformedKind::BadMagic);
    }

    #[test]
    fn section_order_is_enforced() {
        let mut b = EMPTY.to_vec();
        // memory section then type section
        b.extend([0x05, 0x03, 0x01, 0x00, 0x01]);
        b.extend([0x01, 0x01, 0x00]);
        let e = decode_module(&b).unwrap_err();
        assert_eq!(e.kind, MalformedKind::BadSectionOrder);
        assert_eq!(e.offset, 13);

        let mut b = EMPTY.to_vec();
        b.extend([0x0C, 0x01, 0x00]);
        assert_eq!(decode_module(&b).unwrap_err().kind, MalformedKind::BadSectionOrder);
    }

    #[test]
    fn section_size_must_match() {
        let mut b = EMPTY.to_vec();
        // memory section claims 4 bytes but its content is 3
        b.extend([0x05, 0x04, 0x01, 0x00, 0x01, 0x00]);
        assert_eq!(
            decode_module(&b).unwrap_err().kind,
            MalformedKind::SectionSizeMismatch
        );
        let mut b = EMPTY.to_vec();
        b.extend([0x05, 0x09, 0x01, 0x00, 0x01]);
        assert_eq!(decode_module(&b).unwrap_err().kind, MalformedKind::Truncated);
    }

    #[test]
    fn custom_sections_are_preserved() {
        let mut b = EMPTY.to_vec();
        b.extend([0x00, 0x04, 0x01, b'n', 0xAA, 0xBB]);
        let m = decode_module(&b).unwrap();
        assert_eq!(
            m.customs,
            vec![CustomSection {
                after: 0,
                name: "n".into(),
                data: vec![0xAA, 0xBB]
            }]
        );
    }

    #[test]
    fn bad_utf8_name() {
        let mut b = EMPTY.to_vec();
        b.extend([0x00, 0x03, 0x01, 0xFF, 0x00]);
        let e = decode_module(&b).unwrap_err();
        assert_eq!(e.kind, MalformedKind::BadUtf8);
        assert_eq!(e.offset, 11);
    }

    #[test]
    fn unknown_opcode_in_body() {
        let mut b = EMPTY.to_vec();
        b.extend([0x01, 0x04, 0x01, 0x60, 0x00, 0x00]); // type ()->()
        b.extend([0x03, 0x02, 0x01, 0x00]); // func 0 : type 0
        b.extend([0x0A, 0x05, 0x01, 0x03, 0x00, 0xFD, 0x0B]); // simd prefix
        let e = decode_module(&b).unwrap_err();
        assert_eq!(e.kind, MalformedKind::BadOpcode);
        assert_eq!(e.offset, b.len() - 2);
    }

    #[test]
    fn code_bodies_stream_before_section_completes() {
        let mut b = EMPTY.to_vec();
        b.extend([0x01, 0x04, 0x01, 0x60, 0x00, 0x00]);
        b.extend([0x03, 0x03, 0x02, 0x00, 0x00]);
        // code section declares two bodies; only the first is present
        b.extend([0x0A, 0x07, 0x02, 0x02, 0x00, 0x0B]);
        let mut reader = ModuleReader::new(&b);
        let mut bodies = 0;
        let mut err = None;
        for p in &mut reader {
            match p {
                Ok(Payload::CodeEntry { body, .. }) => {
                    assert_eq!(body, vec![Instr::End]);
                    bodies += 1;
                }
                Ok(_) => {}
                Err(e) => err = Some(e),
            }
        }
        assert_eq!(bodies, 1);
        assert_eq!(err.unwrap().kind, MalformedKind::Truncated);
    }

    #[test]
    fn oversized_locals_are_rejected() {
        let mut b = EMPTY.to_vec();
        b.extend([0x01, 0x04, 0x01, 0x60, 0x00, 0x00]);
        b.extend([0x03, 0x02, 0x01, 0x00]);
        b.extend([0x0A, 0x0A, 0x01, 0x08, 0x01, 0xFF, 0xFF, 0xFF, 0xFF, 0x0F, 0x7F, 0x0B]);
        assert_eq!(
            decode_module(&b).unwrap_err().kind,
            MalformedKind::SectionSizeMismatch
        );
    }
}
