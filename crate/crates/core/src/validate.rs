// SPDX-License-Identifier: Apache-2.0

//! Single-pass module validation.
//!
//! Function bodies are checked by simulating the operand stack over a
//! stack of control frames. After an unconditional transfer the frame is
//! marked unreachable and pops below its base height yield `Unknown`
//! operands, which unify with any type.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::*;
use crate::par::{self, Parallelism};

/// Largest memory the MVP can address, in 64 KiB pages.
pub const MAX_PAGES: u32 = 65536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    TypeMismatch,
    StackUnderflow,
    BadLabelDepth,
    BadIndex,
    ArityMismatch,
    BadConstantExpr,
    MissingMemory,
    MissingTable,
    /// Alignment hint larger than the access width.
    BadAlignment,
    DuplicateExport,
    /// Memory limits above 65536 pages.
    BadLimits,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::TypeMismatch => "type-mismatch",
            Rule::StackUnderflow => "stack-underflow",
            Rule::BadLabelDepth => "bad-label-depth",
            Rule::BadIndex => "bad-index",
            Rule::ArityMismatch => "arity-mismatch",
            Rule::BadConstantExpr => "bad-constant-expr",
            Rule::MissingMemory => "missing-memory",
            Rule::MissingTable => "missing-table",
            Rule::BadAlignment => "bad-alignment",
            Rule::DuplicateExport => "duplicate-export",
            Rule::BadLimits => "bad-limits",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    /// Function index (in the function index space) for body errors.
    pub func: Option<u32>,
    /// Instruction position within the body, or entry position within the
    /// offending section for module-level errors.
    pub offset: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.func {
            Some(func) => write!(
                f,
                "{} in function {func} at instruction {}: {}",
                self.rule, self.offset, self.detail
            ),
            None => write!(f, "{} at entry {}: {}", self.rule, self.offset, self.detail),
        }
    }
}

fn module_error(offset: usize, rule: Rule, detail: impl Into<String>) -> ValidationError {
    ValidationError {
        func: None,
        offset,
        rule,
        detail: detail.into(),
    }
}

/// Facts gathered while checking one body.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FuncFacts {
    pub max_operand_depth: usize,
    pub max_label_depth: usize,
    /// Result arity of each structured instruction, in body order.
    pub label_arities: Vec<u8>,
    pub instructions_visited: usize,
}

/// A module that passed validation. Cheap to clone.
#[derive(Debug, Clone)]
pub struct ValidatedModule {
    inner: Arc<ValidatedInner>,
}

#[derive(Debug)]
struct ValidatedInner {
    module: Module,
    func_types: Vec<FuncType>,
    globals: Vec<GlobalType>,
    facts: Vec<FuncFacts>,
}

impl ValidatedModule {
    pub fn module(&self) -> &Module {
        &self.inner.module
    }

    /// Signature of every function in the function index space.
    pub fn func_types(&self) -> &[FuncType] {
        &self.inner.func_types
    }

    /// Type of every global in the global index space.
    pub fn global_types(&self) -> &[GlobalType] {
        &self.inner.globals
    }

    /// Facts for defined function `i` (not counting imports).
    pub fn facts(&self, defined: usize) -> &FuncFacts {
        &self.inner.facts[defined]
    }

    pub fn imported_func_count(&self) -> u32 {
        self.inner.func_types.len() as u32 - self.inner.module.funcs.len() as u32
    }
}

/// Operand-stack entry; `None` is the polymorphic unknown type.
type Operand = Option<ValType>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Func,
    Block,
    Loop,
    If,
    Else,
}

#[derive(Debug, Clone)]
struct Frame {
    kind: FrameKind,
    result: Option<ValType>,
    height: usize,
    unreachable: bool,
}

impl Frame {
    /// Types a branch to this frame's label must carry.
    fn label_type(&self) -> Option<ValType> {
        if self.kind == FrameKind::Loop {
            None
        } else {
            self.result
        }
    }
}

/// Module-wide index spaces plus the per-function typing state.
pub struct ValidationContext<'m> {
    pub types: &'m [FuncType],
    pub funcs: &'m [FuncType],
    pub tables: u32,
    pub memories: u32,
    pub globals: &'m [GlobalType],
    pub locals: Vec<ValType>,
    pub return_type: Option<ValType>,
    func_index: Option<u32>,
    labels: Vec<Frame>,
    operands: Vec<Operand>,
    offset: usize,
}

type Check<T> = Result<T, ValidationError>;

impl<'m> ValidationContext<'m> {
    pub fn new(
        types: &'m [FuncType],
        funcs: &'m [FuncType],
        tables: u32,
        memories: u32,
        globals: &'m [GlobalType],
    ) -> Self {
        ValidationContext {
            types,
            funcs,
            tables,
            memories,
            globals,
            locals: Vec::new(),
            return_type: None,
            func_index: None,
            labels: Vec::new(),
            operands: Vec::new(),
            offset: 0,
        }
    }

    fn err(&self, rule: Rule, detail: impl Into<String>) -> ValidationError {
        ValidationError {
            func: self.func_index,
            offset: self.offset,
            rule,
            detail: detail.into(),
        }
    }

    fn push(&mut self, t: Operand) {
        self.operands.push(t);
    }

    fn pop(&mut self) -> Check<Operand> {
        let frame = self.labels.last().expect("frame stack never empty inside a body");
        if self.operands.len() == frame.height {
            if frame.unreachable {
                return Ok(None);
            }
            return Err(self.err(Rule::StackUnderflow, "operand stack is empty"));
        }
        Ok(self.operands.pop().expect("height checked"))
    }

    fn pop_expect(&mut self, want: Operand) -> Check<Operand> {
        let got = self.pop()?;
        match (got, want) {
            (Some(g), Some(w)) if g != w => Err(self.err(
                Rule::TypeMismatch,
                format!("expected {w}, found {g}"),
            )),
            (None, w) => Ok(w),
            (g, _) => Ok(g),
        }
    }

    fn pop_val(&mut self, want: ValType) -> Check<()> {
        self.pop_expect(Some(want)).map(|_| ())
    }

    fn push_frame(&mut self, kind: FrameKind, result: Option<ValType>) {
        self.labels.push(Frame {
            kind,
            result,
            height: self.operands.len(),
            unreachable: false,
        });
    }

    fn pop_frame(&mut self) -> Check<Frame> {
        let frame = self.labels.last().expect("frame present").clone();
        if let Some(t) = frame.result {
            self.pop_val(t)?;
        }
        if self.operands.len() != frame.height {
            return Err(self.err(
                Rule::ArityMismatch,
                format!(
                    "{} values left on the stack at end of block",
                    self.operands.len() - frame.height
                ),
            ));
        }
        self.labels.pop();
        Ok(frame)
    }

    fn set_unreachable(&mut self) {
        let frame = self.labels.last_mut().expect("frame present");
        self.operands.truncate(frame.height);
        frame.unreachable = true;
    }

    fn label(&self, depth: u32) -> Check<&Frame> {
        let n = self.labels.len();
        if depth as usize >= n {
            return Err(self.err(
                Rule::BadLabelDepth,
                format!("branch depth {depth} exceeds nesting depth {n}"),
            ));
        }
        Ok(&self.labels[n - 1 - depth as usize])
    }

    fn need_memory(&self) -> Check<()> {
        if self.memories == 0 {
            return Err(self.err(Rule::MissingMemory, "no memory is defined or imported"));
        }
        Ok(())
    }

    fn local(&self, i: u32) -> Check<ValType> {
        self.locals.get(i as usize).copied().ok_or_else(|| {
            self.err(
                Rule::BadIndex,
                format!("local {i} out of range ({} locals)", self.locals.len()),
            )
        })
    }

    fn global(&self, i: u32) -> Check<GlobalType> {
        self.globals.get(i as usize).copied().ok_or_else(|| {
            self.err(
                Rule::BadIndex,
                format!("global {i} out of range ({} globals)", self.globals.len()),
            )
        })
    }

    fn check_align(&self, align: u32, width: u32) -> Check<()> {
        if align >= 32 || (1u64 << align) > u64::from(width) {
            return Err(self.err(
                Rule::BadAlignment,
                format!("alignment 2^{align} exceeds natural alignment {width}"),
            ));
        }
        Ok(())
    }

    fn step(&mut self, instr: &Instr, facts: &mut FuncFacts) -> Check<()> {
        use ValType::*;
        match instr {
            Instr::Unreachable => self.set_unreachable(),
            Instr::Nop => {}
            Instr::Block(bt) | Instr::Loop(bt) | Instr::If(bt) => {
                if matches!(instr, Instr::If(_)) {
                    self.pop_val(I32)?;
                }
                let kind = match instr {
                    Instr::Block(_) => FrameKind::Block,
                    Instr::Loop(_) => FrameKind::Loop,
                    _ => FrameKind::If,
                };
                self.push_frame(kind, bt.result());
                facts.label_arities.push(u8::from(bt.result().is_some()));
                facts.max_label_depth = facts.max_label_depth.max(self.labels.len());
            }
            Instr::Else => {
                if self.labels.last().map(|f| f.kind) != Some(FrameKind::If) {
                    return Err(self.err(Rule::ArityMismatch, "else without matching if"));
                }
                let frame = self.pop_frame()?;
                self.push_frame(FrameKind::Else, frame.result);
            }
            Instr::End => {
                let frame = self.pop_frame()?;
                if frame.kind == FrameKind::If && frame.result.is_some() {
                    return Err(self.err(
                        Rule::ArityMismatch,
                        "if with a result type requires an else arm",
                    ));
                }
                if let Some(t) = frame.result {
                    self.push(Some(t));
                }
            }
            Instr::Br(depth) => {
                if let Some(t) = self.label(*depth)?.label_type() {
                    self.pop_val(t)?;
                }
                self.set_unreachable();
            }
            Instr::BrIf(depth) => {
                self.pop_val(I32)?;
                if let Some(t) = self.label(*depth)?.label_type() {
                    self.pop_val(t)?;
                    self.push(Some(t));
                }
            }
            Instr::BrTable { targets, default } => {
                self.pop_val(I32)?;
                let arity = self.label(*default)?.label_type();
                for &t in targets {
                    let other = self.label(t)?.label_type();
                    if other != arity {
                        return Err(self.err(
                            Rule::ArityMismatch,
                            format!("br_table target {t} disagrees with the default label type"),
                        ));
                    }
                }
                if let Some(t) = arity {
                    self.pop_val(t)?;
                }
                self.set_unreachable();
            }
            Instr::Return => {
                if let Some(t) = self.return_type {
                    self.pop_val(t)?;
                }
                self.set_unreachable();
            }
            Instr::Call(f) => {
                let ty = self.funcs.get(*f as usize).ok_or_else(|| {
                    self.err(Rule::BadIndex, format!("function {f} out of range"))
                })?;
                for &p in ty.params.iter().rev() {
                    self.pop_val(p)?;
                }
                if let Some(r) = ty.result() {
                    self.push(Some(r));
                }
            }
            Instr::CallIndirect(ti) => {
                if self.tables == 0 {
                    return Err(self.err(Rule::MissingTable, "call_indirect without a table"));
                }
                let ty = self.types.get(*ti as usize).ok_or_else(|| {
                    self.err(Rule::BadIndex, format!("type {ti} out of range"))
                })?;
                self.pop_val(I32)?;
                for &p in ty.params.iter().rev() {
                    self.pop_val(p)?;
                }
                if let Some(r) = ty.result() {
                    self.push(Some(r));
                }
            }
            Instr::Drop => {
                self.pop()?;
            }
            Instr::Select => {
                self.pop_val(I32)?;
                let a = self.pop()?;
                let b = self.pop_expect(a)?;
                self.push(a.or(b));
            }
            Instr::LocalGet(i) => {
                let t = self.local(*i)?;
                self.push(Some(t));
            }
            Instr::LocalSet(i) => {
                let t = self.local(*i)?;
                self.pop_val(t)?;
            }
            Instr::LocalTee(i) => {
                let t = self.local(*i)?;
                self.pop_val(t)?;
                self.push(Some(t));
            }
            Instr::GlobalGet(i) => {
                let g = self.global(*i)?;
                self.push(Some(g.ty));
            }
            Instr::GlobalSet(i) => {
                let g = self.global(*i)?;
                if !g.mutable {
                    return Err(self.err(Rule::TypeMismatch, format!("global {i} is immutable")));
                }
                self.pop_val(g.ty)?;
            }
            Instr::Load(op, m) => {
                self.need_memory()?;
                self.check_align(m.align, op.width())?;
                self.pop_val(I32)?;
                self.push(Some(op.result()));
            }
            Instr::Store(op, m) => {
                self.need_memory()?;
                self.check_align(m.align, op.width())?;
                self.pop_val(op.operand())?;
                self.pop_val(I32)?;
            }
            Instr::MemorySize => {
                self.need_memory()?;
                self.push(Some(I32));
            }
            Instr::MemoryGrow => {
                self.need_memory()?;
                self.pop_val(I32)?;
                self.push(Some(I32));
            }
            Instr::I32Const(_) => self.push(Some(I32)),
            Instr::I64Const(_) => self.push(Some(I64)),
            Instr::F32Const(_) => self.push(Some(F32)),
            Instr::F64Const(_) => self.push(Some(F64)),
            Instr::Num(op) => {
                let t = op.operand_type();
                for _ in 0..op.arity() {
                    self.pop_val(t)?;
                }
                self.push(Some(op.result_type()));
            }
        }
        facts.max_operand_depth = facts.max_operand_depth.max(self.operands.len());
        Ok(())
    }
}

/// Type-checks one function body in a single forward pass.
pub fn check_body(
    ctx: &mut ValidationContext<'_>,
    func_index: u32,
    body: &[Instr],
    declared: &FuncType,
) -> Result<FuncFacts, ValidationError> {
    ctx.func_index = Some(func_index);
    ctx.return_type = declared.result();
    ctx.labels.clear();
    ctx.operands.clear();
    ctx.push_frame(FrameKind::Func, declared.result());
    let mut facts = FuncFacts {
        max_label_depth: 1,
        ..FuncFacts::default()
    };
    for (offset, instr) in body.iter().enumerate() {
        ctx.offset = offset;
        if ctx.labels.is_empty() {
            return Err(ctx.err(Rule::ArityMismatch, "instructions after the final end"));
        }
        facts.instructions_visited += 1;
        ctx.step(instr, &mut facts)?;
    }
    if !ctx.labels.is_empty() {
        ctx.offset = body.len();
        return Err(ctx.err(Rule::ArityMismatch, "body is missing its final end"));
    }
    Ok(facts)
}

fn check_limits(l: &Limits, offset: usize, cap: u32, what: &str) -> Check<()> {
    if l.min > cap || l.max.is_some_and(|m| m > cap) {
        return Err(module_error(
            offset,
            Rule::BadLimits,
            format!("{what} limits exceed {cap}"),
        ));
    }
    if let Some(max) = l.max {
        if l.min > max {
            return Err(module_error(offset, Rule::BadLimits, "min exceeds max"));
        }
    }
    Ok(())
}

/// Validates a constant expression of type `want`. Only imported,
/// immutable globals may be read.
fn check_const(
    e: ConstExpr,
    want: ValType,
    imported_globals: &[GlobalType],
    offset: usize,
) -> Check<()> {
    let ty = match e {
        ConstExpr::I32(_) => ValType::I32,
        ConstExpr::I64(_) => ValType::I64,
        ConstExpr::F32(_) => ValType::F32,
        ConstExpr::F64(_) => ValType::F64,
        ConstExpr::GlobalGet(i) => {
            let g = imported_globals.get(i as usize).ok_or_else(|| {
                module_error(
                    offset,
                    Rule::BadConstantExpr,
                    format!("global.get {i} does not name an imported global"),
                )
            })?;
            if g.mutable {
                return Err(module_error(
                    offset,
                    Rule::BadConstantExpr,
                    format!("global.get {i} reads a mutable global"),
                ));
            }
            g.ty
        }
    };
    if ty != want {
        return Err(module_error(
            offset,
            Rule::BadConstantExpr,
            format!("constant of type {ty} where {want} is required"),
        ));
    }
    Ok(())
}

/// Validates a module, checking function bodies in parallel when the
/// `parallel` feature is enabled.
pub fn validate_module(module: Module) -> Result<ValidatedModule, ValidationError> {
    validate_module_with(module, Parallelism::default())
}

/// Validates a module using the requested parallelism for bodies. The
/// reported error is the same in every mode: module-level errors first,
/// then the body error with the lowest function index.
pub fn validate_module_with(
    module: Module,
    mode: Parallelism,
) -> Result<ValidatedModule, ValidationError> {
    let m = &module;
    if m.types.iter().any(|t| t.results.len() > 1) {
        return Err(module_error(0, Rule::ArityMismatch, "multiple results"));
    }

    let mut func_types = Vec::with_capacity(m.func_space_len() as usize);
    let mut globals = Vec::new();
    let mut tables = m.tables.len() as u32;
    let mut memories = m.memories.len() as u32;
    for (i, imp) in m.imports.iter().enumerate() {
        match &imp.desc {
            ImportDesc::Func(ti) => {
                let t = m.types.get(*ti as usize).ok_or_else(|| {
                    module_error(i, Rule::BadIndex, format!("import type {ti} out of range"))
                })?;
                func_types.push(t.clone());
            }
            ImportDesc::Table(l) => {
                check_limits(l, i, u32::MAX, "table")?;
                tables += 1;
            }
            ImportDesc::Memory(l) => {
                check_limits(l, i, MAX_PAGES, "memory")?;
                memories += 1;
            }
            ImportDesc::Global(g) => globals.push(*g),
        }
    }
    let imported_globals = globals.clone();
    for (i, f) in m.funcs.iter().enumerate() {
        let t = m.types.get(f.type_index as usize).ok_or_else(|| {
            module_error(
                i,
                Rule::BadIndex,
                format!("function type {} out of range", f.type_index),
            )
        })?;
        func_types.push(t.clone());
    }
    if tables > 1 {
        return Err(module_error(0, Rule::BadIndex, "more than one table"));
    }
    if memories > 1 {
        return Err(module_error(0, Rule::BadIndex, "more than one memory"));
    }
    for (i, l) in m.tables.iter().enumerate() {
        check_limits(l, i, u32::MAX, "table")?;
    }
    for (i, l) in m.memories.iter().enumerate() {
        check_limits(l, i, MAX_PAGES, "memory")?;
    }
    for (i, g) in m.globals.iter().enumerate() {
        check_const(g.init, g.ty.ty, &imported_globals, i)?;
        globals.push(g.ty);
    }

    let mut names = HashSet::new();
    for (i, e) in m.exports.iter().enumerate() {
        if !names.insert(e.name.as_bytes()) {
            return Err(module_error(
                i,
                Rule::DuplicateExport,
                format!("export name {:?} used twice", e.name),
            ));
        }
        let space = match e.kind {
            ExportKind::Func => func_types.len() as u32,
            ExportKind::Table => tables,
            ExportKind::Memory => memories,
            ExportKind::Global => globals.len() as u32,
        };
        if e.index >= space {
            return Err(module_error(
                i,
                Rule::BadIndex,
                format!("exported {} index {} out of range", e.kind, e.index),
            ));
        }
    }
    if let Some(s) = m.start {
        let t = func_types.get(s as usize).ok_or_else(|| {
            module_error(0, Rule::BadIndex, format!("start function {s} out of range"))
        })?;
        if !t.params.is_empty() || !t.results.is_empty() {
            return Err(module_error(
                0,
                Rule::TypeMismatch,
                format!("start function has type {t}, expected () -> ()"),
            ));
        }
    }
    for (i, seg) in m.elements.iter().enumerate() {
        if seg.table >= tables {
            return Err(module_error(i, Rule::MissingTable, "element segment without a table"));
        }
        check_const(seg.offset, ValType::I32, &imported_globals, i)?;
        if let Some(f) = seg.funcs.iter().find(|&&f| f as usize >= func_types.len()) {
            return Err(module_error(
                i,
                Rule::BadIndex,
                format!("element function {f} out of range"),
            ));
        }
    }
    for (i, seg) in m.data.iter().enumerate() {
        if seg.memory >= memories {
            return Err(module_error(i, Rule::MissingMemory, "data segment without a memory"));
        }
        check_const(seg.offset, ValType::I32, &imported_globals, i)?;
    }

    let imported = func_types.len() - m.funcs.len();
    let results = par::map_slice(mode, &m.funcs, |i, f| {
        let mut ctx = ValidationContext::new(&m.types, &func_types, tables, memories, &globals);
        let declared = &func_types[imported + i];
        ctx.locals = declared.params.iter().chain(&f.locals).copied().collect();
        check_body(&mut ctx, (imported + i) as u32, &f.body, declared)
    });
    let facts = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    Ok(ValidatedModule {
        inner: Arc::new(ValidatedInner {
            module,
            func_types,
            globals,
            facts,
        }),
    })
}
