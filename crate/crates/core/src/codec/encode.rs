// SPDX-License-Identifier: Apache-2.0

use super::cursor::{write_sleb128, write_uleb128};
use super::decode::{section, MAGIC, VERSION};
use crate::model::*;

/// Errors for modules the binary format (MVP subset) cannot express.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error(transparent)]
    Structure(#[from] StructuralError),
    #[error("body of defined function {0} does not end with `end`")]
    UnterminatedBody(usize),
}

/// Emits the canonical encoding: standard sections in order, empty
/// sections omitted, minimal LEB128 everywhere, locals run-length grouped.
pub fn encode_module(module: &Module) -> Result<Vec<u8>, EncodeError> {
    module.check_mvp_shape()?;
    for (i, f) in module.funcs.iter().enumerate() {
        if f.body.last() != Some(&Instr::End) {
            return Err(EncodeError::UnterminatedBody(i));
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    customs(&mut out, module, 0);

    let emit = |out: &mut Vec<u8>, id: u8, present: bool, content: &dyn Fn(&mut Vec<u8>)| {
        if present {
            let mut body = Vec::new();
            content(&mut body);
            out.push(id);
            write_uleb128(out, body.len() as u64);
            out.extend_from_slice(&body);
        }
        customs(out, module, id);
    };

    emit(&mut out, section::TYPE, !module.types.is_empty(), &|b| {
        vec_of(b, &module.types, write_func_type)
    });
    emit(&mut out, section::IMPORT, !module.imports.is_empty(), &|b| {
        vec_of(b, &module.imports, write_import)
    });
    emit(&mut out, section::FUNCTION, !module.funcs.is_empty(), &|b| {
        vec_of(b, &module.funcs, |b, f| write_uleb128(b, f.type_index.into()))
    });
    emit(&mut out, section::TABLE, !module.tables.is_empty(), &|b| {
        vec_of(b, &module.tables, write_table_type)
    });
    emit(&mut out, section::MEMORY, !module.memories.is_empty(), &|b| {
        vec_of(b, &module.memories, write_limits)
    });
    emit(&mut out, section::GLOBAL, !module.globals.is_empty(), &|b| {
        vec_of(b, &module.globals, |b, g| {
            write_global_type(b, g.ty);
            write_const_expr(b, g.init);
        })
    });
    emit(&mut out, section::EXPORT, !module.exports.is_empty(), &|b| {
        vec_of(b, &module.exports, write_export)
    });
    emit(&mut out, section::START, module.start.is_some(), &|b| {
        write_uleb128(b, module.start.unwrap_or_default().into())
    });
    emit(&mut out, section::ELEMENT, !module.elements.is_empty(), &|b| {
        vec_of(b, &module.elements, |b, e| {
            write_uleb128(b, e.table.into());
            write_const_expr(b, e.offset);
            vec_of(b, &e.funcs, |b, f| write_uleb128(b, (*f).into()));
        })
    });
    emit(&mut out, section::CODE, !module.funcs.is_empty(), &|b| {
        vec_of(b, &module.funcs, write_code_entry)
    });
    emit(&mut out, section::DATA, !module.data.is_empty(), &|b| {
        vec_of(b, &module.data, |b, d| {
            write_uleb128(b, d.memory.into());
            write_const_expr(b, d.offset);
            write_uleb128(b, d.bytes.len() as u64);
            b.extend_from_slice(&d.bytes);
        })
    });
    Ok(out)
}

fn customs(out: &mut Vec<u8>, module: &Module, after: u8) {
    for c in module.customs.iter().filter(|c| c.after == after) {
        let mut body = Vec::new();
        write_name(&mut body, &c.name);
        body.extend_from_slice(&c.data);
        out.push(section::CUSTOM);
        write_uleb128(out, body.len() as u64);
        out.extend_from_slice(&body);
    }
}

fn vec_of<T>(out: &mut Vec<u8>, items: &[T], mut f: impl FnMut(&mut Vec<u8>, &T)) {
    write_uleb128(out, items.len() as u64);
    for item in items {
        f(out, item);
    }
}

fn write_name(out: &mut Vec<u8>, name: &str) {
    write_uleb128(out, name.len() as u64);
    out.extend_from_slice(name.as_bytes());
}

fn write_func_type(out: &mut Vec<u8>, t: &FuncType) {
    out.push(0x60);
    vec_of(out, &t.params, |o, v| o.push(v.to_byte()));
    vec_of(out, &t.results, |o, v| o.push(v.to_byte()));
}

fn write_limits(out: &mut Vec<u8>, l: &Limits) {
    match l.max {
        None => {
            out.push(0x00);
            write_uleb128(out, l.min.into());
        }
        Some(max) => {
            out.push(0x01);
            write_uleb128(out, l.min.into());
            write_uleb128(out, max.into());
        }
    }
}

fn write_table_type(out: &mut Vec<u8>, l: &Limits) {
    out.push(0x70);
    write_limits(out, l);
}

fn write_global_type(out: &mut Vec<u8>, g: GlobalType) {
    out.push(g.ty.to_byte());
    out.push(u8::from(g.mutable));
}

fn write_import(out: &mut Vec<u8>, i: &Import) {
    write_name(out, &i.module);
    write_name(out, &i.field);
    match &i.desc {
        ImportDesc::Func(t) => {
            out.push(0x00);
            write_uleb128(out, (*t).into());
        }
        ImportDesc::Table(l) => {
            out.push(0x01);
            write_table_type(out, l);
        }
        ImportDesc::Memory(l) => {
            out.push(0x02);
            write_limits(out, l);
        }
        ImportDesc::Global(g) => {
            out.push(0x03);
            write_global_type(out, *g);
        }
    }
}

fn write_export(out: &mut Vec<u8>, e: &Export) {
    write_name(out, &e.name);
    out.push(match e.kind {
        ExportKind::Func => 0x00,
        ExportKind::Table => 0x01,
        ExportKind::Memory => 0x02,
        ExportKind::Global => 0x03,
    });
    write_uleb128(out, e.index.into());
}

fn write_const_expr(out: &mut Vec<u8>, e: ConstExpr) {
    match e {
        ConstExpr::I32(v) => {
            out.push(0x41);
            write_sleb128(out, v.into());
        }
        ConstExpr::I64(v) => {
            out.push(0x42);
            write_sleb128(out, v);
        }
        ConstExpr::F32(bits) => {
            out.push(0x43);
            out.extend_from_slice(&bits.to_le_bytes());
        }
        ConstExpr::F64(bits) => {
            out.push(0x44);
            out.extend_from_slice(&bits.to_le_bytes());
        }
        ConstExpr::GlobalGet(i) => {
            out.push(0x23);
            write_uleb128(out, i.into());
        }
    }
    out.push(0x0B);
}

fn write_code_entry(out: &mut Vec<u8>, f: &Func) {
    let mut body = Vec::new();
    let mut groups: Vec<(u32, ValType)> = Vec::new();
    for &t in &f.locals {
        match groups.last_mut() {
            Some((n, last)) if *last == t => *n += 1,
            _ => groups.push((1, t)),
        }
    }
    vec_of(&mut body, &groups, |b, (n, t)| {
        write_uleb128(b, (*n).into());
        b.push(t.to_byte());
    });
    for instr in &f.body {
        write_instr(&mut body, instr);
    }
    write_uleb128(out, body.len() as u64);
    out.extend_from_slice(&body);
}

fn write_block_type(out: &mut Vec<u8>, bt: BlockType) {
    match bt {
        BlockType::Empty => out.push(0x40),
        BlockType::Value(t) => out.push(t.to_byte()),
    }
}

fn write_memarg(out: &mut Vec<u8>, m: MemArg) {
    write_uleb128(out, m.align.into());
    write_uleb128(out, m.offset.into());
}

pub(crate) fn write_instr(out: &mut Vec<u8>, instr: &Instr) {
    match instr {
        Instr::Unreachable => out.push(0x00),
        Instr::Nop => out.push(0x01),
        Instr::Block(bt) => {
            out.push(0x02);
            write_block_type(out, *bt);
        }
        Instr::Loop(bt) => {
            out.push(0x03);
            write_block_type(out, *bt);
        }
        Instr::If(bt) => {
            out.push(0x04);
            write_block_type(out, *bt);
        }
        Instr::Else => out.push(0x05),
        Instr::End => out.push(0x0B),
        Instr::Br(l) => {
            out.push(0x0C);
            write_uleb128(out, (*l).into());
        }
        Instr::BrIf(l) => {
            out.push(0x0D);
            write_uleb128(out, (*l).into());
        }
        Instr::BrTable { targets, default } => {
            out.push(0x0E);
            vec_of(out, targets, |o, t| write_uleb128(o, (*t).into()));
            write_uleb128(out, (*default).into());
        }
        Instr::Return => out.push(0x0F),
        Instr::Call(f) => {
            out.push(0x10);
            write_uleb128(out, (*f).into());
        }
        Instr::CallIndirect(t) => {
            out.push(0x11);
            write_uleb128(out, (*t).into());
            out.push(0x00);
        }
        Instr::Drop => out.push(0x1A),
        Instr::Select => out.push(0x1B),
        Instr::LocalGet(i) => {
            out.push(0x20);
            write_uleb128(out, (*i).into());
        }
        Instr::LocalSet(i) => {
            out.push(0x21);
            write_uleb128(out, (*i).into());
        }
        Instr::LocalTee(i) => {
            out.push(0x22);
            write_uleb128(out, (*i).into());
        }
        Instr::GlobalGet(i) => {
            out.push(0x23);
            write_uleb128(out, (*i).into());
        }
        Instr::GlobalSet(i) => {
            out.push(0x24);
            write_uleb128(out, (*i).into());
        }
        Instr::Load(op, m) => {
            out.push(op.opcode());
            write_memarg(out, *m);
        }
        Instr::Store(op, m) => {
            out.push(op.opcode());
            write_memarg(out, *m);
        }
        Instr::MemorySize => out.extend_from_slice(&[0x3F, 0x00]),
        Instr::MemoryGrow => out.extend_from_slice(&[0x40, 0x00]),
        Instr::I32Const(v) => {
            out.push(0x41);
            write_sleb128(out, (*v).into());
        }
        Instr::I64Const(v) => {
            out.push(0x42);
            write_sleb128(out, *v);
        }
        Instr::F32Const(bits) => {
            out.push(0x43);
            out.extend_from_slice(&bits.to_le_bytes());
        }
        Instr::F64Const(bits) => {
            out.push(0x44);
            out.extend_from_slice(&bits.to_le_bytes());
        }
        Instr::Num(op) => out.push(op.opcode()),
    }
}
