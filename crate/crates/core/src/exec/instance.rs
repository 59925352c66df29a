// SPDX-License-Identifier: Apache-2.0

use std::cell::Cell;
use std::rc::Rc;

use thiserror::Error;

use super::host::{Caller, Extern, HostError, HostFunction, Imports, TableInstance};
use super::memory::{LinearMemoryInstance, DEFAULT_MEMORY_CAP_PAGES};
use super::numeric;
use super::{Trap, TrapKind, Value};
use crate::model::{ConstExpr, ExportKind, ImportDesc, Limits, ValType};
use crate::tree::{self, build_tree, ExprNode, FuncBody};
use crate::validate::ValidatedModule;

/// Largest table a module may declare or import, in entries.
pub const MAX_TABLE_SIZE: u32 = 10_000_000;

const STACK_RED_ZONE: usize = 128 * 1024;
const STACK_SEGMENT: usize = 4 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub max_call_depth: u32,
    /// Node evaluations allowed per invocation.
    pub fuel: Option<u64>,
    /// Profile count that triggers reoptimization; `None` disables it.
    pub opt_threshold: Option<u32>,
    /// Build every tree at instantiation instead of on first call.
    pub eager_build: bool,
    pub memory_cap_pages: u32,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_call_depth: 10_000,
            fuel: None,
            opt_threshold: Some(tree::DEFAULT_THRESHOLD),
            eager_build: false,
            memory_cap_pages: DEFAULT_MEMORY_CAP_PAGES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("unresolved import {module}.{field}")]
    UnresolvedImport { module: String, field: String },
    #[error("import {module}.{field} does not match: {detail}")]
    ImportMismatch { module: String, field: String, detail: String },
    #[error("{kind} segment {index} does not fit")]
    SegmentOutOfBounds { kind: &'static str, index: usize },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("start function: {0}")]
    Trap(Trap),
    #[error("start function exited with status {0}")]
    Exit(i32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvokeError {
    #[error(transparent)]
    Trap(#[from] Trap),
    #[error("guest exited with status {0}")]
    Exit(i32),
    #[error("no export named {0:?}")]
    UnknownExport(String),
    #[error("export {0:?} is not a function")]
    NotAFunction(String),
    #[error("argument mismatch: {0}")]
    ArgumentMismatch(String),
}

impl InvokeError {
    pub fn trap_kind(&self) -> Option<TrapKind> {
        match self {
            InvokeError::Trap(t) => Some(t.kind),
            _ => None,
        }
    }
}

/// Non-local exits while evaluating a tree.
#[derive(Debug)]
enum Unwind {
    Br(u32, Value),
    Return(Value),
    Trap(Box<Trap>),
    Exit(i32),
}

impl From<TrapKind> for Unwind {
    #[inline]
    fn from(kind: TrapKind) -> Self {
        Unwind::Trap(Box::new(kind.into()))
    }
}

type Flow = Result<Value, Unwind>;

/// Placeholder result of statements.
const VOID: Value = Value::I32(0);

/// An instantiated module. Not thread-safe: invocations on one instance
/// must be serialized.
pub struct ModuleInstance {
    vm: ValidatedModule,
    hosts: Vec<HostFunction>,
    bodies: Vec<Option<Rc<FuncBody>>>,
    globals: Vec<Value>,
    memory: Option<LinearMemoryInstance>,
    table: Option<TableInstance>,
    config: Config,
    /// Parameters and locals of all active frames.
    stack: Vec<Value>,
    depth: u32,
    fuel: u64,
}

impl std::fmt::Debug for ModuleInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModuleInstance")
            .field("functions", &(self.hosts.len() + self.bodies.len()))
            .field("globals", &self.globals)
            .field("memory_pages", &self.memory.as_ref().map(|m| m.pages()))
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn const_value(e: ConstExpr, globals: &[Value]) -> Value {
    match e {
        ConstExpr::I32(v) => Value::I32(v),
        ConstExpr::I64(v) => Value::I64(v),
        ConstExpr::F32(b) => Value::f32_bits(b),
        ConstExpr::F64(b) => Value::f64_bits(b),
        ConstExpr::GlobalGet(i) => globals[i as usize],
    }
}

fn limits_fit(have_min: u32, have_max: Option<u32>, want: Limits) -> bool {
    have_min >= want.min
        && match want.max {
            None => true,
            Some(m) => have_max.is_some_and(|h| h <= m),
        }
}

impl ModuleInstance {
    /// Resolves imports, allocates state, applies segments and runs the
    /// start function.
    pub fn instantiate(
        vm: &ValidatedModule,
        imports: &mut Imports,
        config: Config,
    ) -> Result<Self, InstantiateError> {
        let m = vm.module();
        let mut hosts = Vec::new();
        let mut globals = Vec::new();
        let mut memory = None;
        let mut table = None;
        for imp in &m.imports {
            let ext = imports.take(&imp.module, &imp.field).ok_or_else(|| {
                InstantiateError::UnresolvedImport {
                    module: imp.module.clone(),
                    field: imp.field.clone(),
                }
            })?;
            let mismatch = |detail: String| InstantiateError::ImportMismatch {
                module: imp.module.clone(),
                field: imp.field.clone(),
                detail,
            };
            match (&imp.desc, ext) {
                (ImportDesc::Func(ti), Extern::Func(h)) => {
                    let want = &m.types[*ti as usize];
                    if &h.ty != want {
                        return Err(mismatch(format!("expected {want}, host provides {}", h.ty)));
                    }
                    hosts.push(h);
                }
                (ImportDesc::Memory(l), Extern::Memory(mem)) => {
                    if !limits_fit(mem.pages(), mem.limits().max, *l) {
                        return Err(mismatch("memory limits".into()));
                    }
                    memory = Some(mem);
                }
                (ImportDesc::Table(l), Extern::Table(t)) => {
                    if !limits_fit(t.elements.len() as u32, t.max, *l) {
                        return Err(mismatch("table limits".into()));
                    }
                    table = Some(t);
                }
                (ImportDesc::Global(gt), Extern::Global(have, v)) => {
                    if *gt != have || v.ty() != gt.ty {
                        return Err(mismatch(format!("global type {}", gt.ty)));
                    }
                    globals.push(v);
                }
                (desc, other) => {
                    return Err(mismatch(format!("expected {desc:?}, found {other:?}")));
                }
            }
        }
        for g in &m.globals {
            let v = const_value(g.init, &globals);
            globals.push(v);
        }
        if let Some(l) = m.memories.first() {
            memory = Some(
                LinearMemoryInstance::new(*l, config.memory_cap_pages).ok_or_else(|| {
                    InstantiateError::ResourceLimit(format!(
                        "memory of {} pages exceeds the host cap of {}",
                        l.min, config.memory_cap_pages
                    ))
                })?,
            );
        }
        if let Some(l) = m.tables.first() {
            if l.min > MAX_TABLE_SIZE {
                return Err(InstantiateError::ResourceLimit(format!(
                    "table of {} entries",
                    l.min
                )));
            }
            table = Some(TableInstance::new(l.min, l.max));
        }

        // every segment is checked before any is written
        let mut elem_at = Vec::new();
        for (i, seg) in m.elements.iter().enumerate() {
            let off = const_value(seg.offset, &globals).as_i32() as u32 as u64;
            let size = table.as_ref().map_or(0, |t| t.elements.len()) as u64;
            if off + seg.funcs.len() as u64 > size {
                return Err(InstantiateError::SegmentOutOfBounds { kind: "element", index: i });
            }
            elem_at.push(off as usize);
        }
        let mut data_at = Vec::new();
        for (i, seg) in m.data.iter().enumerate() {
            let off = const_value(seg.offset, &globals).as_i32() as u32 as u64;
            let size = memory.as_ref().map_or(0, |mem| mem.len()) as u64;
            if off + seg.bytes.len() as u64 > size {
                return Err(InstantiateError::SegmentOutOfBounds { kind: "data", index: i });
            }
            data_at.push(off);
        }
        for (seg, at) in m.elements.iter().zip(elem_at) {
            let t = table.as_mut().expect("checked above");
            for (slot, f) in t.elements[at..].iter_mut().zip(&seg.funcs) {
                *slot = Some(*f);
            }
        }
        for (seg, at) in m.data.iter().zip(data_at) {
            let mem = memory.as_mut().expect("checked above");
            mem.slice_mut(at, seg.bytes.len())
                .expect("checked above")
                .copy_from_slice(&seg.bytes);
        }

        let fuel = config.fuel.unwrap_or(u64::MAX);
        let mut inst = ModuleInstance {
            vm: vm.clone(),
            hosts,
            bodies: vec![None; m.funcs.len()],
            globals,
            memory,
            table,
            config,
            stack: Vec::new(),
            depth: 0,
            fuel,
        };
        if inst.config.eager_build {
            for i in 0..m.funcs.len() {
                inst.bodies[i] = Some(Rc::new(build_tree(vm, i)));
            }
        }
        if let Some(s) = m.start {
            inst.run(s, &[]).map_err(|e| match e {
                InvokeError::Trap(t) => InstantiateError::Trap(t),
                InvokeError::Exit(c) => InstantiateError::Exit(c),
                other => unreachable!("start function cannot fail with {other}"),
            })?;
        }
        Ok(inst)
    }

    pub fn validated(&self) -> &ValidatedModule {
        &self.vm
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn memory(&self) -> Option<&LinearMemoryInstance> {
        self.memory.as_ref()
    }

    pub fn memory_mut(&mut self) -> Option<&mut LinearMemoryInstance> {
        self.memory.as_mut()
    }

    pub fn table(&self) -> Option<&TableInstance> {
        self.table.as_ref()
    }

    pub fn globals(&self) -> &[Value] {
        &self.globals
    }

    /// Value of an exported global.
    pub fn global(&self, name: &str) -> Option<Value> {
        match self.vm.module().export_lookup(name)? {
            (ExportKind::Global, i) => Some(self.globals[i as usize]),
            _ => None,
        }
    }

    /// The current tree for defined function `defined`, if built.
    pub fn body(&self, defined: usize) -> Option<&FuncBody> {
        self.bodies.get(defined)?.as_deref()
    }

    /// Invokes an exported function.
    pub fn invoke(&mut self, name: &str, args: &[Value]) -> Result<Vec<Value>, InvokeError> {
        let func = match self.vm.module().export_lookup(name) {
            Some((ExportKind::Func, i)) => i,
            Some(_) => return Err(InvokeError::NotAFunction(name.to_owned())),
            None => return Err(InvokeError::UnknownExport(name.to_owned())),
        };
        let ty = &self.vm.func_types()[func as usize];
        if args.len() != ty.params.len()
            || args.iter().zip(&ty.params).any(|(a, p)| a.ty() != *p)
        {
            let got: Vec<String> = args.iter().map(|a| a.ty().to_string()).collect();
            return Err(InvokeError::ArgumentMismatch(format!(
                "{name} has type {ty}, called with ({})",
                got.join(", ")
            )));
        }
        self.run(func, args)
    }

    fn run(&mut self, func: u32, args: &[Value]) -> Result<Vec<Value>, InvokeError> {
        self.fuel = self.config.fuel.unwrap_or(u64::MAX);
        self.stack.clear();
        self.depth = 0;
        self.stack.extend_from_slice(args);
        let has_result = self.vm.func_types()[func as usize].result().is_some();
        let out = self.call(func, 0);
        self.stack.clear();
        self.depth = 0;
        match out {
            Ok(v) => Ok(if has_result { vec![v] } else { Vec::new() }),
            Err(Unwind::Trap(t)) => Err(InvokeError::Trap(*t)),
            Err(Unwind::Exit(c)) => Err(InvokeError::Exit(c)),
            Err(other) => unreachable!("call boundary absorbs {other:?}"),
        }
    }

    fn body_for(&mut self, defined: usize) -> Rc<FuncBody> {
        let vm = &self.vm;
        let slot = self.bodies[defined].get_or_insert_with(|| Rc::new(build_tree(vm, defined)));
        slot.bump_profile();
        if let Some(t) = self.config.opt_threshold {
            if slot.wants_reoptimize(t) {
                *slot = Rc::new(tree::maybe_reoptimize((**slot).clone(), t));
            }
        }
        Rc::clone(slot)
    }

    /// Calls function `func` whose arguments occupy `stack[fp..]`.
    fn call(&mut self, func: u32, fp: usize) -> Flow {
        let imported = self.hosts.len();
        if (func as usize) < imported {
            return self.call_host(func as usize, fp);
        }
        if self.depth >= self.config.max_call_depth {
            return Err(Unwind::Trap(Box::new(Trap::new(
                TrapKind::CallDepthExceeded,
                format!("call depth exceeded {}", self.config.max_call_depth),
            ))));
        }
        let body = self.body_for(func as usize - imported);
        self.stack
            .extend(body.locals[body.params..].iter().map(|t| Value::default_for(*t)));
        self.depth += 1;
        let out = stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || {
            self.eval(&body.root, fp, &body.profile)
        });
        self.depth -= 1;
        self.stack.truncate(fp);
        match out {
            Err(Unwind::Return(v)) => Ok(v),
            other => other,
        }
    }

    fn call_host(&mut self, index: usize, fp: usize) -> Flow {
        let host = self.hosts[index].clone();
        let args: Vec<Value> = self.stack.drain(fp..).collect();
        let mut caller = Caller {
            memory: self.memory.as_mut(),
        };
        match host.call(&mut caller, &args) {
            Ok(r) if r.map(Value::ty) == host.ty.result() => Ok(r.unwrap_or(VOID)),
            Ok(r) => Err(Unwind::Trap(Box::new(Trap::new(
                TrapKind::Unreachable,
                format!("host function returned {r:?}, declared {}", host.ty),
            )))),
            Err(HostError::Trap(t)) => Err(Unwind::Trap(Box::new(t))),
            Err(HostError::Exit(c)) => Err(Unwind::Exit(c)),
        }
    }

    fn eval_seq(&mut self, body: &[ExprNode], fp: usize, prof: &Cell<u32>) -> Flow {
        let mut v = VOID;
        for n in body {
            v = self.eval(n, fp, prof)?;
        }
        Ok(v)
    }

    /// Evaluates a labelled body, absorbing branches that target it.
    #[inline]
    fn eval_labelled(&mut self, body: &[ExprNode], fp: usize, prof: &Cell<u32>) -> Flow {
        match self.eval_seq(body, fp, prof) {
            Err(Unwind::Br(0, v)) => Ok(v),
            Err(Unwind::Br(d, v)) => Err(Unwind::Br(d - 1, v)),
            other => other,
        }
    }

    #[inline]
    fn mem(&mut self) -> &mut LinearMemoryInstance {
        self.memory.as_mut().expect("validated module has a memory")
    }

    fn eval(&mut self, n: &ExprNode, fp: usize, prof: &Cell<u32>) -> Flow {
        use ExprNode as E;
        if self.fuel == 0 {
            return Err(TrapKind::FuelExhausted.into());
        }
        self.fuel -= 1;
        match n {
            E::Const(v) => Ok(*v),
            E::LocalGet(i) => Ok(self.stack[fp + *i as usize]),
            E::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, fp, prof)?;
                let b = self.eval(rhs, fp, prof)?;
                numeric::binary(*op, a, b).map_err(Unwind::from)
            }
            E::Unary { op, arg } => {
                let a = self.eval(arg, fp, prof)?;
                numeric::unary(*op, a).map_err(Unwind::from)
            }
            E::LocalSet { index, value } => {
                let v = self.eval(value, fp, prof)?;
                self.stack[fp + *index as usize] = v;
                Ok(VOID)
            }
            E::LocalTee { index, value } => {
                let v = self.eval(value, fp, prof)?;
                self.stack[fp + *index as usize] = v;
                Ok(v)
            }
            E::GlobalGet(i) => Ok(self.globals[*i as usize]),
            E::GlobalSet { index, value } => {
                let v = self.eval(value, fp, prof)?;
                self.globals[*index as usize] = v;
                Ok(VOID)
            }
            E::Load { op, offset, addr } => {
                let base = self.eval(addr, fp, prof)?.as_i32() as u32;
                let ea = u64::from(base) + u64::from(*offset);
                let width = op.width();
                let raw = self.mem().load(ea, width).map_err(|k| oob(k, ea, width))?;
                let shift = 64 - 8 * width;
                let ext = if op.signed() {
                    ((raw << shift) as i64 >> shift) as u64
                } else {
                    raw
                };
                Ok(match op.result() {
                    ValType::I32 => Value::I32(ext as i32),
                    ValType::I64 => Value::I64(ext as i64),
                    ValType::F32 => Value::f32_bits(raw as u32),
                    ValType::F64 => Value::f64_bits(raw),
                })
            }
            E::Store { op, offset, addr, value } => {
                let base = self.eval(addr, fp, prof)?.as_i32() as u32;
                let v = self.eval(value, fp, prof)?;
                let ea = u64::from(base) + u64::from(*offset);
                let width = op.width();
                self.mem().store(ea, width, v.bits()).map_err(|k| oob(k, ea, width))?;
                Ok(VOID)
            }
            E::Block { body, .. } => stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || {
                self.eval_labelled(body, fp, prof)
            }),
            E::Loop { body, .. } => stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || loop {
                match self.eval_seq(body, fp, prof) {
                    Err(Unwind::Br(0, _)) => {
                        prof.set(prof.get().saturating_add(1));
                    }
                    Err(Unwind::Br(d, v)) => return Err(Unwind::Br(d - 1, v)),
                    other => return other,
                }
            }),
            E::If { cond, then, els, .. } => {
                let c = self.eval(cond, fp, prof)?.as_i32();
                let arm = if c != 0 {
                    then.as_slice()
                } else {
                    match els {
                        Some(e) => e.as_slice(),
                        None => return Ok(VOID),
                    }
                };
                stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || {
                    self.eval_labelled(arm, fp, prof)
                })
            }
            E::Br { depth, value } => {
                let v = match value {
                    Some(v) => self.eval(v, fp, prof)?,
                    None => VOID,
                };
                Err(Unwind::Br(*depth, v))
            }
            E::BrIf { depth, value, cond } => {
                let v = match value {
                    Some(v) => self.eval(v, fp, prof)?,
                    None => VOID,
                };
                if self.eval(cond, fp, prof)?.as_i32() != 0 {
                    Err(Unwind::Br(*depth, v))
                } else {
                    Ok(v)
                }
            }
            E::BrTable { targets, default, value, index } => {
                let v = match value {
                    Some(v) => self.eval(v, fp, prof)?,
                    None => VOID,
                };
                let i = self.eval(index, fp, prof)?.as_i32() as u32 as usize;
                Err(Unwind::Br(*targets.get(i).unwrap_or(default), v))
            }
            E::Return(value) => {
                let v = match value {
                    Some(v) => self.eval(v, fp, prof)?,
                    None => VOID,
                };
                Err(Unwind::Return(v))
            }
            E::Call { func, args } => {
                let callee_fp = self.push_args(args, fp, prof)?;
                let out = self.call(*func, callee_fp);
                self.stack.truncate(callee_fp);
                out
            }
            E::CallIndirect { type_index, args, index } => {
                let callee_fp = self.push_args(args, fp, prof)?;
                let func = match self.eval(index, fp, prof) {
                    Ok(i) => self.resolve_indirect(*type_index, i.as_i32() as u32),
                    Err(e) => Err(e),
                };
                let func = func.inspect_err(|_| self.stack.truncate(callee_fp))?;
                let out = self.call(func, callee_fp);
                self.stack.truncate(callee_fp);
                out
            }
            E::Select { a, b, cond } => {
                let a = self.eval(a, fp, prof)?;
                let b = self.eval(b, fp, prof)?;
                let c = self.eval(cond, fp, prof)?.as_i32();
                Ok(if c != 0 { a } else { b })
            }
            E::Drop(v) => {
                self.eval(v, fp, prof)?;
                Ok(VOID)
            }
            E::Unreachable => Err(TrapKind::Unreachable.into()),
            E::Nop => Ok(VOID),
            E::MemorySize => Ok(Value::I32(self.mem().pages() as i32)),
            E::MemoryGrow(delta) => {
                let d = self.eval(delta, fp, prof)?.as_i32() as u32;
                Ok(Value::I32(self.mem().grow(d)))
            }
            E::Seq { body, .. } => self.eval_seq(body, fp, prof),
        }
    }

    /// Evaluates call arguments onto the frame stack, returning the
    /// callee's frame pointer.
    fn push_args(&mut self, args: &[ExprNode], fp: usize, prof: &Cell<u32>) -> Result<usize, Unwind> {
        let callee_fp = self.stack.len();
        for a in args {
            match self.eval(a, fp, prof) {
                Ok(v) => self.stack.push(v),
                Err(e) => {
                    self.stack.truncate(callee_fp);
                    return Err(e);
                }
            }
        }
        Ok(callee_fp)
    }

    fn resolve_indirect(&self, type_index: u32, i: u32) -> Result<u32, Unwind> {
        let table = self.table.as_ref().expect("validated module has a table");
        let slot = table.elements.get(i as usize).ok_or_else(|| {
            Unwind::Trap(Box::new(Trap::new(
                TrapKind::OobTable,
                format!("table index {i} out of bounds ({} entries)", table.elements.len()),
            )))
        })?;
        let func = slot.ok_or_else(|| {
            Unwind::Trap(Box::new(Trap::new(
                TrapKind::IndirectTypeMismatch,
                format!("table slot {i} is empty"),
            )))
        })?;
        let want = &self.vm.module().types[type_index as usize];
        let have = &self.vm.func_types()[func as usize];
        if want != have {
            return Err(Unwind::Trap(Box::new(Trap::new(
                TrapKind::IndirectTypeMismatch,
                format!("expected {want}, table slot {i} holds {have}"),
            ))));
        }
        Ok(func)
    }
}

#[cold]
fn oob(kind: TrapKind, ea: u64, width: u32) -> Unwind {
    Unwind::Trap(Box::new(Trap::new(
        kind,
        format!("out of bounds memory access at {ea}+{width}"),
    )))
}
