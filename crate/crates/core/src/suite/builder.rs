// SPDX-License-Identifier: Apache-2.0

use crate::model::*;

/// Incremental construction of a [`Module`].
///
/// Function imports must be added before any defined function so that
/// returned indices stay stable.
#[derive(Debug, Clone, Default)]
pub struct ModuleBuilder {
    module: Module,
}

impl ModuleBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `ty` in the type section, adding it if new.
    pub fn ty(&mut self, ty: FuncType) -> u32 {
        if let Some(i) = self.module.types.iter().position(|t| *t == ty) {
            return i as u32;
        }
        self.module.types.push(ty);
        self.module.types.len() as u32 - 1
    }

    pub fn import_func(&mut self, module: &str, field: &str, ty: FuncType) -> u32 {
        assert!(
            self.module.funcs.is_empty(),
            "function imports must precede defined functions"
        );
        let t = self.ty(ty);
        self.module.imports.push(Import {
            module: module.into(),
            field: field.into(),
            desc: ImportDesc::Func(t),
        });
        self.module.imported_func_count() - 1
    }

    pub fn import(&mut self, module: &str, field: &str, desc: ImportDesc) {
        self.module.imports.push(Import {
            module: module.into(),
            field: field.into(),
            desc,
        });
    }

    /// Reserves the next function index; fill it with [`Self::define`].
    pub fn declare(&mut self, ty: FuncType) -> u32 {
        let t = self.ty(ty);
        self.module.funcs.push(Func {
            type_index: t,
            locals: Vec::new(),
            body: vec![Instr::End],
        });
        self.module.func_space_len() - 1
    }

    /// Sets the body of a declared function. A final `end` is appended.
    pub fn define(&mut self, index: u32, locals: Vec<ValType>, mut body: Vec<Instr>) {
        body.push(Instr::End);
        let at = (index - self.module.imported_func_count()) as usize;
        let f = &mut self.module.funcs[at];
        f.locals = locals;
        f.body = body;
    }

    pub fn func(&mut self, ty: FuncType, locals: Vec<ValType>, body: Vec<Instr>) -> u32 {
        let i = self.declare(ty);
        self.define(i, locals, body);
        i
    }

    pub fn export(&mut self, name: &str, kind: ExportKind, index: u32) {
        self.module.exports.push(Export {
            name: name.into(),
            kind,
            index,
        });
    }

    pub fn export_func(&mut self, name: &str, index: u32) {
        self.export(name, ExportKind::Func, index);
    }

    pub fn memory(&mut self, min: u32, max: Option<u32>) {
        self.module.memories.push(Limits::new(min, max));
    }

    pub fn table(&mut self, min: u32, max: Option<u32>) {
        self.module.tables.push(Limits::new(min, max));
    }

    pub fn global(&mut self, ty: ValType, mutable: bool, init: ConstExpr) -> u32 {
        self.module.globals.push(Global {
            ty: GlobalType { ty, mutable },
            init,
        });
        self.module.imported_globals().count() as u32 + self.module.globals.len() as u32 - 1
    }

    pub fn data(&mut self, offset: u32, bytes: Vec<u8>) {
        self.module.data.push(DataSegment {
            memory: 0,
            offset: ConstExpr::I32(offset as i32),
            bytes,
        });
    }

    pub fn elements(&mut self, offset: u32, funcs: Vec<u32>) {
        self.module.elements.push(ElementSegment {
            table: 0,
            offset: ConstExpr::I32(offset as i32),
            funcs,
        });
    }

    pub fn start(&mut self, index: u32) {
        self.module.start = Some(index);
    }

    pub fn custom(&mut self, after: u8, name: &str, data: Vec<u8>) {
        self.module.customs.push(CustomSection {
            after,
            name: name.into(),
            data,
        });
    }

    pub fn finish(self) -> Module {
        self.module
    }
}
