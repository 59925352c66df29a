// SPDX-License-Identifier: Apache-2.0

//! Rewrite passes applied to hot bodies.

use super::{label_used, unbind_label, ExprNode, FuncBody};
use crate::exec::numeric;
use crate::exec::Value;

/// Upper bound on fold/prune rounds per reoptimization.
pub const MAX_PASS_ITERATIONS: usize = 10;

/// Replaces numeric nodes whose operands are all constants by their value.
/// Nodes whose evaluation would trap are left in place.
pub fn fold_constants(mut body: FuncBody) -> FuncBody {
    fold(&mut body.root);
    body
}

fn fold(n: &mut ExprNode) {
    for c in n.children_mut() {
        fold(c);
    }
    let folded = match n {
        ExprNode::Unary { op, arg } => arg.as_const().and_then(|a| numeric::unary(*op, a).ok()),
        ExprNode::Binary { op, lhs, rhs } => match (lhs.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => numeric::binary(*op, a, b).ok(),
            _ => None,
        },
        _ => None,
    };
    if let Some(v) = folded {
        *n = ExprNode::Const(v);
    }
}

/// Removes control flow decided by constants and collapses redundant
/// nesting.
pub fn prune_dead_branches(mut body: FuncBody) -> FuncBody {
    prune(&mut body.root);
    body
}

fn prune(n: &mut ExprNode) {
    for c in n.children_mut() {
        prune(c);
    }
    while let Some(next) = rewrite(n) {
        *n = next;
    }
}

fn truthy(v: Value) -> bool {
    v.as_i32() != 0
}

/// One rule application at `n`, or `None` if no rule matches.
fn rewrite(n: &mut ExprNode) -> Option<ExprNode> {
    use ExprNode::*;
    match n {
        If { ty, cond, then, els } => {
            let c = cond.as_const()?;
            let mut arm = if truthy(c) {
                std::mem::take(then)
            } else {
                match els.take() {
                    Some(e) => e,
                    None => return Some(Nop),
                }
            };
            if arm.is_empty() {
                return Some(Nop);
            }
            if label_used(&arm, 0) {
                Some(Block { ty: *ty, body: arm })
            } else {
                unbind_label(&mut arm);
                Some(Seq { ty: *ty, body: arm })
            }
        }
        BrIf { depth, value, cond } => {
            let c = cond.as_const()?;
            if truthy(c) {
                Some(Br { depth: *depth, value: value.take() })
            } else {
                Some(value.take().map_or(Nop, |v| *v))
            }
        }
        Block { ty, body } if body.len() == 1 => match &mut body[0] {
            Block { ty: inner_ty, body: inner } if inner_ty == ty && !label_used(inner, 0) => {
                let mut inner = std::mem::take(inner);
                unbind_label(&mut inner);
                Some(Block { ty: *ty, body: inner })
            }
            _ => None,
        },
        Seq { body, .. } if body.len() == 1 => body.pop(),
        _ => None,
    }
}

/// Runs both passes to a fixed point once the profile reaches
/// `threshold`. Bodies already optimized are returned unchanged.
pub fn maybe_reoptimize(mut body: FuncBody, threshold: u32) -> FuncBody {
    if !body.wants_reoptimize(threshold) {
        return body;
    }
    for _ in 0..MAX_PASS_ITERATIONS {
        let before = body.root.clone();
        body = prune_dead_branches(fold_constants(body));
        if body.root == before {
            break;
        }
    }
    body.optimized = true;
    body
}
