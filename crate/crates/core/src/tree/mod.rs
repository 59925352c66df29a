// SPDX-License-Identifier: Apache-2.0

//! Tree IR for function bodies.
//!
//! Flat instruction sequences are rebuilt into expression trees by
//! [`build_tree`]. Every `Block`, `Loop` and `If` node binds exactly one
//! label, as in the flat encoding, so branch depths carry over unchanged.
//! `Seq` groups nodes without binding a label.

mod build;
mod opt;

use std::cell::Cell;

use crate::exec::Value;
use crate::model::{LoadOp, NumClass, NumOp, StoreOp, ValType};
use crate::validate::ValidatedModule;

pub use build::build_tree;
pub use opt::{fold_constants, maybe_reoptimize, prune_dead_branches, MAX_PASS_ITERATIONS};

/// Default number of profile events before a body is reoptimized.
pub const DEFAULT_THRESHOLD: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Const,
    UnaryOp,
    BinaryOp,
    Compare,
    Convert,
    LocalGet,
    LocalSet,
    LocalTee,
    GlobalGet,
    GlobalSet,
    Load,
    Store,
    Block,
    Loop,
    If,
    Br,
    BrIf,
    BrTable,
    Call,
    CallIndirect,
    Select,
    Drop,
    Return,
    Unreachable,
    Nop,
    MemorySize,
    MemoryGrow,
    Seq,
}

type Node = Box<ExprNode>;

/// A tree-IR node. Children are evaluated strictly left to right, in
/// field order.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Const(Value),
    /// One-operand numeric op: unary arithmetic, `eqz`, or a conversion.
    Unary { op: NumOp, arg: Node },
    /// Two-operand numeric op: arithmetic or comparison.
    Binary { op: NumOp, lhs: Node, rhs: Node },
    LocalGet(u32),
    LocalSet { index: u32, value: Node },
    LocalTee { index: u32, value: Node },
    GlobalGet(u32),
    GlobalSet { index: u32, value: Node },
    Load { op: LoadOp, offset: u32, addr: Node },
    Store { op: StoreOp, offset: u32, addr: Node, value: Node },
    Block { ty: Option<ValType>, body: Vec<ExprNode> },
    Loop { ty: Option<ValType>, body: Vec<ExprNode> },
    If {
        ty: Option<ValType>,
        cond: Node,
        then: Vec<ExprNode>,
        els: Option<Vec<ExprNode>>,
    },
    Br { depth: u32, value: Option<Node> },
    /// With a value this is an expression yielding the value when the
    /// branch is not taken.
    BrIf { depth: u32, value: Option<Node>, cond: Node },
    BrTable {
        targets: Vec<u32>,
        default: u32,
        value: Option<Node>,
        index: Node,
    },
    Call { func: u32, args: Vec<ExprNode> },
    CallIndirect { type_index: u32, args: Vec<ExprNode>, index: Node },
    Select { a: Node, b: Node, cond: Node },
    Drop(Node),
    Return(Option<Node>),
    Unreachable,
    Nop,
    MemorySize,
    MemoryGrow(Node),
    /// Label-free sequence; yields its last child's value when typed.
    Seq { ty: Option<ValType>, body: Vec<ExprNode> },
}

impl ExprNode {
    pub fn kind(&self) -> NodeKind {
        use ExprNode::*;
        match self {
            Const(_) => NodeKind::Const,
            Unary { op, .. } | Binary { op, .. } => match op.class() {
                NumClass::Unary => NodeKind::UnaryOp,
                NumClass::Binary => NodeKind::BinaryOp,
                NumClass::Compare => NodeKind::Compare,
                NumClass::Convert => NodeKind::Convert,
            },
            LocalGet(_) => NodeKind::LocalGet,
            LocalSet { .. } => NodeKind::LocalSet,
            LocalTee { .. } => NodeKind::LocalTee,
            GlobalGet(_) => NodeKind::GlobalGet,
            GlobalSet { .. } => NodeKind::GlobalSet,
            Load { .. } => NodeKind::Load,
            Store { .. } => NodeKind::Store,
            Block { .. } => NodeKind::Block,
            Loop { .. } => NodeKind::Loop,
            If { .. } => NodeKind::If,
            Br { .. } => NodeKind::Br,
            BrIf { .. } => NodeKind::BrIf,
            BrTable { .. } => NodeKind::BrTable,
            Call { .. } => NodeKind::Call,
            CallIndirect { .. } => NodeKind::CallIndirect,
            Select { .. } => NodeKind::Select,
            Drop(_) => NodeKind::Drop,
            Return(_) => NodeKind::Return,
            Unreachable => NodeKind::Unreachable,
            Nop => NodeKind::Nop,
            MemorySize => NodeKind::MemorySize,
            MemoryGrow(_) => NodeKind::MemoryGrow,
            Seq { .. } => NodeKind::Seq,
        }
    }

    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&ExprNode> {
        use ExprNode::*;
        let mut out = Vec::new();
        match self {
            Const(_) | LocalGet(_) | GlobalGet(_) | Unreachable | Nop | MemorySize => {}
            Unary { arg, .. } => out.push(&**arg),
            Binary { lhs, rhs, .. } => {
                out.push(&**lhs);
                out.push(&**rhs);
            }
            LocalSet { value, .. } | LocalTee { value, .. } | GlobalSet { value, .. } => {
                out.push(&**value)
            }
            Load { addr, .. } => out.push(&**addr),
            Store { addr, value, .. } => {
                out.push(&**addr);
                out.push(&**value);
            }
            Block { body, .. } | Loop { body, .. } | Seq { body, .. } => out.extend(body),
            If { cond, then, els, .. } => {
                out.push(&**cond);
                out.extend(then);
                if let Some(e) = els {
                    out.extend(e);
                }
            }
            Br { value, .. } | Return(value) => out.extend(value.as_deref()),
            BrIf { value, cond, .. } => {
                out.extend(value.as_deref());
                out.push(&**cond);
            }
            BrTable { value, index, .. } => {
                out.extend(value.as_deref());
                out.push(&**index);
            }
            Call { args, .. } => out.extend(args),
            CallIndirect { args, index, .. } => {
                out.extend(args);
                out.push(&**index);
            }
            Select { a, b, cond } => {
                out.push(&**a);
                out.push(&**b);
                out.push(&**cond);
            }
            Drop(v) | MemoryGrow(v) => out.push(&**v),
        }
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(ExprNode::node_count).sum::<usize>()
    }

    pub fn as_const(&self) -> Option<Value> {
        match self {
            ExprNode::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Static result type, resolved against the function's locals and the
    /// module's index spaces. `None` for statements and for nodes that
    /// never fall through.
    pub fn static_type(&self, locals: &[ValType], vm: &ValidatedModule) -> Option<ValType> {
        use ExprNode::*;
        match self {
            Const(v) => Some(v.ty()),
            Unary { op, .. } | Binary { op, .. } => Some(op.result_type()),
            LocalGet(i) | LocalTee { index: i, .. } => Some(locals[*i as usize]),
            GlobalGet(i) => Some(vm.global_types()[*i as usize].ty),
            Load { op, .. } => Some(op.result()),
            Block { ty, .. } | Loop { ty, .. } | If { ty, .. } | Seq { ty, .. } => *ty,
            BrIf { value, .. } => value.as_ref().and_then(|v| v.static_type(locals, vm)),
            Call { func, .. } => vm.func_types()[*func as usize].result(),
            CallIndirect { type_index, .. } => {
                vm.module().types[*type_index as usize].result()
            }
            Select { a, .. } => a.static_type(locals, vm),
            MemorySize | MemoryGrow(_) => Some(ValType::I32),
            LocalSet { .. } | GlobalSet { .. } | Store { .. } | Br { .. } | BrTable { .. }
            | Drop(_) | Return(_) | Unreachable | Nop => None,
        }
    }
}

/// A function body ready for interpretation.
#[derive(Debug, Clone)]
pub struct FuncBody {
    /// Always a `Block` binding the function-level label.
    pub root: ExprNode,
    /// Parameters, declared locals, then synthetic locals.
    pub locals: Vec<ValType>,
    pub params: usize,
    /// Entries plus loop back-edges, saturating.
    pub profile: Cell<u32>,
    pub optimized: bool,
}

impl PartialEq for FuncBody {
    /// Structural equality; the profile counter is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
            && self.locals == other.locals
            && self.params == other.params
            && self.optimized == other.optimized
    }
}

impl FuncBody {
    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    #[inline]
    pub fn bump_profile(&self) {
        self.profile.set(self.profile.get().saturating_add(1));
    }

    pub fn wants_reoptimize(&self, threshold: u32) -> bool {
        !self.optimized && self.profile.get() >= threshold
    }
}

/// Whether any branch inside `nodes` targets the label `depth` levels
/// out from them.
pub(crate) fn label_used(nodes: &[ExprNode], depth: u32) -> bool {
    nodes.iter().any(|n| node_uses_label(n, depth))
}

fn node_uses_label(n: &ExprNode, depth: u32) -> bool {
    use ExprNode::*;
    match n {
        Br { depth: d, .. } | BrIf { depth: d, .. } if *d == depth => true,
        BrTable { targets, default, .. } if *default == depth || targets.contains(&depth) => {
            true
        }
        Block { body, .. } | Loop { body, .. } => label_used(body, depth + 1),
        If { cond, then, els, .. } => {
            node_uses_label(cond, depth)
                || label_used(then, depth + 1)
                || els.as_deref().is_some_and(|e| label_used(e, depth + 1))
        }
        _ => n.children().into_iter().any(|c| node_uses_label(c, depth)),
    }
}

/// Removes one label enclosing `nodes`: branches that pass over it lose a
/// level. Callers must ensure nothing targets the removed label itself.
pub(crate) fn unbind_label(nodes: &mut [ExprNode]) {
    for n in nodes {
        unbind_in(n, 0);
    }
}

fn unbind_in(n: &mut ExprNode, level: u32) {
    use ExprNode::*;
    let fix = |d: &mut u32| {
        debug_assert_ne!(*d, level, "branch targets a removed label");
        if *d > level {
            *d -= 1;
        }
    };
    match n {
        Br { depth, value } => {
            fix(depth);
            if let Some(v) = value {
                unbind_in(v, level);
            }
        }
        BrIf { depth, value, cond } => {
            fix(depth);
            if let Some(v) = value {
                unbind_in(v, level);
            }
            unbind_in(cond, level);
        }
        BrTable { targets, default, value, index } => {
            targets.iter_mut().for_each(fix);
            fix(default);
            if let Some(v) = value {
                unbind_in(v, level);
            }
            unbind_in(index, level);
        }
        Block { body, .. } | Loop { body, .. } => {
            body.iter_mut().for_each(|c| unbind_in(c, level + 1))
        }
        If { cond, then, els, .. } => {
            unbind_in(cond, level);
            then.iter_mut().for_each(|c| unbind_in(c, level + 1));
            if let Some(e) = els {
                e.iter_mut().for_each(|c| unbind_in(c, level + 1));
            }
        }
        _ => n.children_mut().into_iter().for_each(|c| unbind_in(c, level)),
    }
}

impl ExprNode {
    pub(crate) fn children_mut(&mut self) -> Vec<&mut ExprNode> {
        use ExprNode::*;
        let mut out = Vec::new();
        match self {
            Const(_) | LocalGet(_) | GlobalGet(_) | Unreachable | Nop | MemorySize => {}
            Unary { arg, .. } => out.push(&mut **arg),
            Binary { lhs, rhs, .. } => {
                out.push(&mut **lhs);
                out.push(&mut **rhs);
            }
            LocalSet { value, .. } | LocalTee { value, .. } | GlobalSet { value, .. } => {
                out.push(&mut **value)
            }
            Load { addr, .. } => out.push(&mut **addr),
            Store { addr, value, .. } => {
                out.push(&mut **addr);
                out.push(&mut **value);
            }
            Block { body, .. } | Loop { body, .. } | Seq { body, .. } => out.extend(body),
            If { cond, then, els, .. } => {
                out.push(&mut **cond);
                out.extend(then);
                if let Some(e) = els {
                    out.extend(e);
                }
            }
            Br { value, .. } | Return(value) => out.extend(value.as_deref_mut()),
            BrIf { value, cond, .. } => {
                out.extend(value.as_deref_mut());
                out.push(&mut **cond);
            }
            BrTable { value, index, .. } => {
                out.extend(value.as_deref_mut());
                out.push(&mut **index);
            }
            Call { args, .. } => out.extend(args),
            CallIndirect { args, index, .. } => {
                out.extend(args);
                out.push(&mut **index);
            }
            Select { a, b, cond } => {
                out.push(&mut **a);
                out.push(&mut **b);
                out.push(&mut **cond);
            }
            Drop(v) | MemoryGrow(v) => out.push(&mut **v),
        }
        out
    }
}
