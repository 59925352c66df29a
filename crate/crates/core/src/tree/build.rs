// SPDX-License-Identifier: Apache-2.0

//! Flat-to-tree reconstruction by operand-stack simulation.

use std::cell::Cell;

use super::{ExprNode, FuncBody};
use crate::exec::Value;
use crate::model::{Instr, ValType};
use crate::validate::ValidatedModule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Func,
    Block,
    Loop,
    If,
}

struct Frame {
    shape: Shape,
    ty: Option<ValType>,
    stmts: Vec<ExprNode>,
    /// Expressions not yet consumed, with their types.
    pending: Vec<(ExprNode, ValType)>,
    cond: Option<Box<ExprNode>>,
    then: Option<Vec<ExprNode>>,
    /// Set after an unconditional transfer; remaining instructions up to
    /// the frame's `else`/`end` are skipped.
    dead: bool,
}

impl Frame {
    fn new(shape: Shape, ty: Option<ValType>) -> Self {
        Frame {
            shape,
            ty,
            stmts: Vec::new(),
            pending: Vec::new(),
            cond: None,
            then: None,
            dead: false,
        }
    }

    /// Statements followed by the frame's result expression, if any.
    fn take_body(&mut self) -> Vec<ExprNode> {
        let mut body = std::mem::take(&mut self.stmts);
        debug_assert!(self.dead || self.pending.len() == usize::from(self.ty.is_some()));
        body.extend(self.pending.drain(..).map(|(e, _)| e));
        body
    }
}

struct Builder<'a> {
    vm: &'a ValidatedModule,
    locals: Vec<ValType>,
    frames: Vec<Frame>,
    /// Nesting depth of structured instructions inside dead code.
    skip: usize,
}

fn boxed(e: ExprNode) -> Box<ExprNode> {
    Box::new(e)
}

impl Builder<'_> {
    fn top(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("frame stack never empty while building")
    }

    fn push(&mut self, e: ExprNode, ty: ValType) {
        self.top().pending.push((e, ty));
    }

    fn pop(&mut self) -> ExprNode {
        self.top().pending.pop().expect("validated body never underflows").0
    }

    fn pop_n(&mut self, n: usize) -> Vec<ExprNode> {
        let pending = &mut self.top().pending;
        let at = pending.len() - n;
        pending.drain(at..).map(|(e, _)| e).collect()
    }

    /// Moves every pending non-constant expression into a fresh local so
    /// that a following statement cannot run ahead of it.
    fn flush(&mut self) {
        let first_local = self.locals.len() as u32;
        let frame = self.frames.last_mut().expect("frame present");
        let mut next = first_local;
        let mut added = Vec::new();
        for (e, ty) in frame.pending.iter_mut() {
            if matches!(e, ExprNode::Const(_)) {
                continue;
            }
            let value = std::mem::replace(e, ExprNode::LocalGet(next));
            frame.stmts.push(ExprNode::LocalSet { index: next, value: boxed(value) });
            added.push(*ty);
            next += 1;
        }
        self.locals.extend(added);
    }

    fn stmt(&mut self, s: ExprNode) {
        self.flush();
        self.top().stmts.push(s);
    }

    /// Emits an unconditional transfer. Values still pending below the
    /// consumed operands are evaluated for effect first.
    fn terminate(&mut self, s: ExprNode) {
        let frame = self.top();
        for (e, _) in frame.pending.drain(..) {
            if !matches!(e, ExprNode::Const(_) | ExprNode::LocalGet(_) | ExprNode::GlobalGet(_)) {
                frame.stmts.push(ExprNode::Drop(boxed(e)));
            }
        }
        frame.stmts.push(s);
        frame.dead = true;
    }

    fn label_has_value(&self, depth: u32) -> bool {
        let f = &self.frames[self.frames.len() - 1 - depth as usize];
        f.shape != Shape::Loop && f.ty.is_some()
    }

    fn value_for(&mut self, depth: u32) -> Option<Box<ExprNode>> {
        self.label_has_value(depth).then(|| boxed(self.pop()))
    }

    fn open(&mut self, shape: Shape, ty: Option<ValType>, cond: Option<ExprNode>) {
        if ty.is_none() {
            self.flush();
        }
        let mut f = Frame::new(shape, ty);
        f.cond = cond.map(boxed);
        self.frames.push(f);
    }

    fn close(&mut self) -> Option<ExprNode> {
        let mut f = self.frames.pop().expect("frame present");
        let body = f.take_body();
        let node = match f.shape {
            Shape::Func => {
                self.frames.push(f);
                return Some(ExprNode::Block { ty: self.frames[0].ty, body });
            }
            Shape::Block => ExprNode::Block { ty: f.ty, body },
            Shape::Loop => ExprNode::Loop { ty: f.ty, body },
            Shape::If => {
                let cond = f.cond.take().expect("if frame holds its condition");
                match f.then.take() {
                    Some(then) => ExprNode::If { ty: f.ty, cond, then, els: Some(body) },
                    None => ExprNode::If { ty: f.ty, cond, then: body, els: None },
                }
            }
        };
        match f.ty {
            Some(t) => self.push(node, t),
            None => self.top().stmts.push(node),
        }
        None
    }

    fn step(&mut self, instr: &Instr) -> Option<ExprNode> {
        use ExprNode as E;
        if self.top().dead {
            match instr {
                Instr::Block(_) | Instr::Loop(_) | Instr::If(_) => {
                    self.skip += 1;
                    return None;
                }
                Instr::End if self.skip > 0 => {
                    self.skip -= 1;
                    return None;
                }
                Instr::Else if self.skip > 0 => return None,
                Instr::End | Instr::Else => {}
                _ => return None,
            }
        }
        match instr {
            Instr::Unreachable => self.terminate(E::Unreachable),
            Instr::Nop => {}
            Instr::Block(bt) => self.open(Shape::Block, bt.result(), None),
            Instr::Loop(bt) => self.open(Shape::Loop, bt.result(), None),
            Instr::If(bt) => {
                let cond = self.pop();
                self.open(Shape::If, bt.result(), Some(cond));
            }
            Instr::Else => {
                let f = self.top();
                let then = f.take_body();
                f.then = Some(then);
                f.dead = false;
            }
            Instr::End => return self.close(),
            Instr::Br(depth) => {
                let value = self.value_for(*depth);
                self.terminate(E::Br { depth: *depth, value });
            }
            Instr::BrIf(depth) => {
                let cond = boxed(self.pop());
                if self.label_has_value(*depth) {
                    let value = boxed(self.pop());
                    let ty = self.label_type(*depth);
                    self.push(E::BrIf { depth: *depth, value: Some(value), cond }, ty);
                } else {
                    self.stmt(E::BrIf { depth: *depth, value: None, cond });
                }
            }
            Instr::BrTable { targets, default } => {
                let index = boxed(self.pop());
                let value = self.value_for(*default);
                self.terminate(E::BrTable {
                    targets: targets.clone(),
                    default: *default,
                    value,
                    index,
                });
            }
            Instr::Return => {
                let value = self.frames[0].ty.map(|_| boxed(self.pop()));
                self.terminate(E::Return(value));
            }
            Instr::Call(f) => {
                let ty = &self.vm.func_types()[*f as usize];
                let (n, result) = (ty.params.len(), ty.result());
                let args = self.pop_n(n);
                let node = E::Call { func: *f, args };
                match result {
                    Some(t) => self.push(node, t),
                    None => self.stmt(node),
                }
            }
            Instr::CallIndirect(ti) => {
                let ty = &self.vm.module().types[*ti as usize];
                let (n, result) = (ty.params.len(), ty.result());
                let index = boxed(self.pop());
                let args = self.pop_n(n);
                let node = E::CallIndirect { type_index: *ti, args, index };
                match result {
                    Some(t) => self.push(node, t),
                    None => self.stmt(node),
                }
            }
            Instr::Drop => {
                let v = self.pop();
                self.stmt(E::Drop(boxed(v)));
            }
            Instr::Select => {
                let cond = boxed(self.pop());
                let (b, _) = self.top().pending.pop().expect("validated");
                let (a, ty) = self.top().pending.pop().expect("validated");
                self.push(E::Select { a: boxed(a), b: boxed(b), cond }, ty);
            }
            Instr::LocalGet(i) => {
                let ty = self.locals[*i as usize];
                self.push(E::LocalGet(*i), ty);
            }
            Instr::LocalSet(i) => {
                let v = boxed(self.pop());
                self.stmt(E::LocalSet { index: *i, value: v });
            }
            Instr::LocalTee(i) => {
                let v = boxed(self.pop());
                let ty = self.locals[*i as usize];
                self.push(E::LocalTee { index: *i, value: v }, ty);
            }
            Instr::GlobalGet(i) => {
                let ty = self.vm.global_types()[*i as usize].ty;
                self.push(E::GlobalGet(*i), ty);
            }
            Instr::GlobalSet(i) => {
                let v = boxed(self.pop());
                self.stmt(E::GlobalSet { index: *i, value: v });
            }
            Instr::Load(op, m) => {
                let addr = boxed(self.pop());
                self.push(E::Load { op: *op, offset: m.offset, addr }, op.result());
            }
            Instr::Store(op, m) => {
                let value = boxed(self.pop());
                let addr = boxed(self.pop());
                self.stmt(E::Store { op: *op, offset: m.offset, addr, value });
            }
            Instr::MemorySize => self.push(E::MemorySize, ValType::I32),
            Instr::MemoryGrow => {
                let d = boxed(self.pop());
                self.push(E::MemoryGrow(d), ValType::I32);
            }
            Instr::I32Const(v) => self.push(E::Const(Value::I32(*v)), ValType::I32),
            Instr::I64Const(v) => self.push(E::Const(Value::I64(*v)), ValType::I64),
            Instr::F32Const(b) => self.push(E::Const(Value::f32_bits(*b)), ValType::F32),
            Instr::F64Const(b) => self.push(E::Const(Value::f64_bits(*b)), ValType::F64),
            Instr::Num(op) => {
                let node = if op.arity() == 1 {
                    E::Unary { op: *op, arg: boxed(self.pop()) }
                } else {
                    let rhs = boxed(self.pop());
                    let lhs = boxed(self.pop());
                    E::Binary { op: *op, lhs, rhs }
                };
                self.push(node, op.result_type());
            }
        }
        None
    }

    fn label_type(&self, depth: u32) -> ValType {
        self.frames[self.frames.len() - 1 - depth as usize]
            .ty
            .expect("branch value implies a typed label")
    }
}

/// Rebuilds defined function `defined` (not counting imports) as a tree.
///
/// Pending expressions are flushed into synthetic locals before any
/// statement is emitted, so the tree performs side effects in exactly the
/// order of the flat body.
pub fn build_tree(vm: &ValidatedModule, defined: usize) -> FuncBody {
    let func = &vm.module().funcs[defined];
    let ty = &vm.func_types()[vm.imported_func_count() as usize + defined];
    let locals: Vec<ValType> = ty.params.iter().chain(&func.locals).copied().collect();
    let mut b = Builder {
        vm,
        locals,
        frames: vec![Frame::new(Shape::Func, ty.result())],
        skip: 0,
    };
    let mut root = None;
    for instr in &func.body {
        if let Some(r) = b.step(instr) {
            root = Some(r);
            break;
        }
    }
    FuncBody {
        root: root.expect("validated body ends with end"),
        locals: b.locals,
        params: ty.params.len(),
        profile: Cell::new(0),
        optimized: false,
    }
}
