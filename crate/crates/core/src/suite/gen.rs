// SPDX-License-Identifier: Apache-2.0

//! Random valid modules for differential testing.
//!
//! Every function has type `(i32, i64) -> i64` and may only call functions
//! with a lower index, so programs always terminate. Loops are bounded by
//! dedicated counter locals that no other code writes.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::builder::ModuleBuilder;
use crate::wasi::WASI_MODULE;
use crate::model::*;

/// Export name of the function that drives the others.
pub const RANDOM_ENTRY: &str = "main";

const SCRATCH: u32 = 2;
const COUNTER: u32 = 6;
const MAX_LOOP_NEST: u32 = 2;
/// iovec and nwritten slot for output statements, above the masked range.
const IOVEC: i32 = 0x1010;
const TYPES: [ValType; 4] = [ValType::I32, ValType::I64, ValType::F32, ValType::F64];

/// Generates a module with roughly `budget` instructions per function.
pub fn gen_random_program(seed: u64, budget: usize) -> Module {
    generate(seed, budget, false)
}

/// Like [`gen_random_program`], but the module imports WASI `fd_write` and
/// some statements write a slice of linear memory to stdout.
pub fn gen_wasi_program(seed: u64, budget: usize) -> Module {
    generate(seed, budget, true)
}

fn generate(seed: u64, budget: usize, wasi: bool) -> Module {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        budget: 0,
        funcs: 0,
        loops: 0,
        fd_write: None,
    };
    let funcs = g.rng.random_range(1..=4u32);
    let mut b = ModuleBuilder::new();
    if wasi {
        let ty = FuncType::new([ValType::I32; 4], [ValType::I32]);
        g.fd_write = Some(b.import_func(WASI_MODULE, "fd_write", ty));
    }
    let base = u32::from(wasi);
    b.memory(1, Some(2));
    for ty in TYPES {
        let init = g.const_expr(ty);
        b.global(ty, true, init);
    }
    let fty = FuncType::new([ValType::I32, ValType::I64], [ValType::I64]);
    let mut locals = TYPES.to_vec();
    locals.extend([ValType::I32; MAX_LOOP_NEST as usize]);
    let seg: Vec<u8> = (0..64).map(|_| g.rng.random()).collect();
    b.data(g.rng.random_range(0..4096), seg);
    for f in 0..funcs {
        g.funcs = f;
        g.budget = budget.max(1);
        g.loops = 0;
        let mut body = Vec::new();
        let stmts = g.rng.random_range(1..=4);
        for _ in 0..stmts {
            g.stmt(&mut body);
        }
        g.expr(ValType::I64, 0, &mut body);
        let idx = b.func(fty.clone(), locals.clone(), body);
        b.export_func(&format!("f{idx}"), idx);
    }
    b.export_func(RANDOM_ENTRY, base + funcs - 1);
    b.export("memory", ExportKind::Memory, 0);
    b.finish()
}

struct Gen {
    rng: ChaCha8Rng,
    budget: usize,
    /// Index of the function being generated; callees are below it.
    funcs: u32,
    loops: u32,
    fd_write: Option<u32>,
}

impl Gen {
    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    fn const_expr(&mut self, ty: ValType) -> ConstExpr {
        match self.constant(ty) {
            Instr::I32Const(v) => ConstExpr::I32(v),
            Instr::I64Const(v) => ConstExpr::I64(v),
            Instr::F32Const(v) => ConstExpr::F32(v),
            Instr::F64Const(v) => ConstExpr::F64(v),
            _ => unreachable!(),
        }
    }

    fn constant(&mut self, ty: ValType) -> Instr {
        let special = self.rng.random_bool(0.3);
        match ty {
            ValType::I32 => Instr::I32Const(if special {
                [0, 1, -1, i32::MIN, i32::MAX, 31, 32][self.rng.random_range(0..7)]
            } else {
                self.rng.random_range(-1000..1000)
            }),
            ValType::I64 => Instr::I64Const(if special {
                [0, 1, -1, i64::MIN, i64::MAX, 63, 64][self.rng.random_range(0..7)]
            } else {
                self.rng.random()
            }),
            ValType::F32 => Instr::F32Const(if special {
                [0.0f32, -0.0, f32::NAN, f32::INFINITY, f32::NEG_INFINITY, 0.5, -1.5]
                    [self.rng.random_range(0..7)]
                .to_bits()
            } else {
                (self.rng.random_range(-1.0e6..1.0e6f32)).to_bits()
            }),
            ValType::F64 => Instr::F64Const(if special {
                [0.0f64, -0.0, f64::NAN, f64::INFINITY, f64::NEG_INFINITY, 0.5, 2.5e9]
                    [self.rng.random_range(0..7)]
                .to_bits()
            } else {
                self.rng.random_range(-1.0e9..1.0e9f64).to_bits()
            }),
        }
    }

    fn type_slot(ty: ValType) -> u32 {
        TYPES.iter().position(|t| *t == ty).expect("numeric type") as u32
    }

    /// In-bounds address most of the time, occasionally anything.
    fn address(&mut self, depth: u32, out: &mut Vec<Instr>) {
        self.expr(ValType::I32, depth + 1, out);
        if !self.rng.random_bool(0.03) {
            out.extend([Instr::I32Const(0xFFF), Instr::Num(NumOp::I32And)]);
        }
    }

    fn expr(&mut self, ty: ValType, depth: u32, out: &mut Vec<Instr>) {
        if !self.spend() || depth > 6 {
            self.leaf(ty, out);
            return;
        }
        match self.rng.random_range(0..16) {
            0..=5 => {
                let ops: Vec<NumOp> = NumOp::ALL
                    .iter()
                    .copied()
                    .filter(|op| op.result_type() == ty)
                    .collect();
                let mut op = ops[self.rng.random_range(0..ops.len())];
                while op.can_trap() && !self.rng.random_bool(0.15) {
                    op = ops[self.rng.random_range(0..ops.len())];
                }
                for _ in 0..op.arity() {
                    self.expr(op.operand_type(), depth + 1, out);
                }
                out.push(Instr::Num(op));
            }
            6 => {
                let ops: Vec<LoadOp> =
                    LoadOp::ALL.iter().copied().filter(|op| op.result() == ty).collect();
                let op = ops[self.rng.random_range(0..ops.len())];
                self.address(depth, out);
                let offset = self.rng.random_range(0..16);
                out.push(Instr::Load(op, MemArg::new(0, offset)));
            }
            7 => {
                self.expr(ty, depth + 1, out);
                out.push(Instr::LocalTee(SCRATCH + Self::type_slot(ty)));
            }
            8 => {
                self.expr(ValType::I32, depth + 1, out);
                out.push(Instr::If(BlockType::Value(ty)));
                self.expr(ty, depth + 1, out);
                out.push(Instr::Else);
                self.expr(ty, depth + 1, out);
                out.push(Instr::End);
            }
            9 => {
                // block with a conditional early exit carrying a value
                out.push(Instr::Block(BlockType::Value(ty)));
                self.expr(ty, depth + 1, out);
                self.expr(ValType::I32, depth + 1, out);
                out.push(Instr::BrIf(0));
                out.push(Instr::Drop);
                if self.rng.random_bool(0.5) {
                    self.stmt(out);
                }
                self.expr(ty, depth + 1, out);
                out.push(Instr::End);
            }
            10 => {
                self.expr(ty, depth + 1, out);
                self.expr(ty, depth + 1, out);
                self.expr(ValType::I32, depth + 1, out);
                out.push(Instr::Select);
            }
            11 if self.funcs > 0 => {
                let callee = self.rng.random_range(0..self.funcs);
                self.expr(ValType::I32, depth + 1, out);
                self.expr(ValType::I64, depth + 1, out);
                out.push(Instr::Call(self.callee_base() + callee));
                self.coerce_from_i64(ty, out);
            }
            12 => {
                // br_table choosing between two nested exits
                out.push(Instr::Block(BlockType::Value(ty)));
                out.push(Instr::Block(BlockType::Value(ty)));
                self.expr(ty, depth + 1, out);
                self.expr(ValType::I32, depth + 1, out);
                out.push(Instr::BrTable { targets: vec![0, 1], default: 0 });
                out.push(Instr::End);
                self.expr(ty, depth + 1, out);
                out.push(self.binop_for(ty));
                out.push(Instr::End);
            }
            13 => {
                self.stmt(out);
                self.expr(ty, depth + 1, out);
            }
            _ => self.leaf(ty, out),
        }
    }

    /// A non-trapping binary op on `ty`.
    fn binop_for(&mut self, ty: ValType) -> Instr {
        Instr::Num(match ty {
            ValType::I32 => NumOp::I32Xor,
            ValType::I64 => NumOp::I64Add,
            ValType::F32 => NumOp::F32Sub,
            ValType::F64 => NumOp::F64Mul,
        })
    }

    fn coerce_from_i64(&mut self, ty: ValType, out: &mut Vec<Instr>) {
        match ty {
            ValType::I32 => out.push(Instr::Num(NumOp::I32WrapI64)),
            ValType::I64 => {}
            ValType::F32 => out.push(Instr::Num(NumOp::F32ConvertI64S)),
            ValType::F64 => out.push(Instr::Num(NumOp::F64ReinterpretI64)),
        }
    }

    fn leaf(&mut self, ty: ValType, out: &mut Vec<Instr>) {
        match self.rng.random_range(0..4) {
            0 => out.push(self.constant(ty)),
            1 => out.push(Instr::GlobalGet(Self::type_slot(ty))),
            2 => out.push(Instr::LocalGet(SCRATCH + Self::type_slot(ty))),
            _ => match ty {
                ValType::I32 => out.push(Instr::LocalGet(0)),
                ValType::I64 => out.push(Instr::LocalGet(1)),
                _ => out.push(self.constant(ty)),
            },
        }
    }

    /// Index of the first defined function.
    fn callee_base(&self) -> u32 {
        u32::from(self.fd_write.is_some())
    }

    fn stmt(&mut self, out: &mut Vec<Instr>) {
        let ty = TYPES[self.rng.random_range(0..4)];
        let arms = if self.fd_write.is_some() { 13 } else { 12 };
        match self.rng.random_range(0..arms) {
            12 => self.output(out),
            0..=2 => {
                self.expr(ty, 1, out);
                out.push(Instr::LocalSet(SCRATCH + Self::type_slot(ty)));
            }
            3 | 4 => {
                self.expr(ty, 1, out);
                out.push(Instr::GlobalSet(Self::type_slot(ty)));
            }
            5 | 6 => {
                let ops: Vec<StoreOp> =
                    StoreOp::ALL.iter().copied().filter(|op| op.operand() == ty).collect();
                let op = ops[self.rng.random_range(0..ops.len())];
                self.address(1, out);
                self.expr(ty, 1, out);
                let offset = self.rng.random_range(0..16);
                out.push(Instr::Store(op, MemArg::new(0, offset)));
            }
            7 if self.loops < MAX_LOOP_NEST => {
                let c = COUNTER + self.loops;
                self.loops += 1;
                out.extend([
                    Instr::I32Const(self.rng.random_range(1..=4)),
                    Instr::LocalSet(c),
                    Instr::Loop(BlockType::Empty),
                ]);
                self.stmt(out);
                out.extend([
                    Instr::LocalGet(c),
                    Instr::I32Const(1),
                    Instr::Num(NumOp::I32Sub),
                    Instr::LocalTee(c),
                    Instr::BrIf(0),
                    Instr::End,
                ]);
                self.loops -= 1;
            }
            8 => {
                self.expr(ValType::I32, 1, out);
                out.push(Instr::If(BlockType::Empty));
                self.stmt(out);
                if self.rng.random_bool(0.3) {
                    out.push(Instr::Else);
                    self.stmt(out);
                }
                out.push(Instr::End);
            }
            9 => {
                self.expr(ty, 1, out);
                out.push(Instr::Drop);
            }
            10 if self.rng.random_bool(0.2) => {
                // early return, leaving dead code behind it
                out.push(Instr::Block(BlockType::Empty));
                self.expr(ValType::I32, 1, out);
                out.push(Instr::Num(NumOp::I32Eqz));
                out.push(Instr::BrIf(0));
                self.expr(ValType::I64, 1, out);
                out.push(Instr::Return);
                self.expr(ty, 1, out);
                out.push(Instr::Drop);
                out.push(Instr::End);
            }
            11 if self.rng.random_bool(0.1) => {
                self.expr(ValType::I32, 1, out);
                out.push(Instr::If(BlockType::Empty));
                out.push(Instr::Unreachable);
                out.push(Instr::End);
            }
            _ => {
                self.expr(ValType::I32, 1, out);
                out.push(Instr::MemoryGrow);
                out.push(Instr::GlobalSet(0));
            }
        }
    }

    /// fd_write(1) of up to 63 bytes at a computed address; errno goes to
    /// the i32 scratch local.
    fn output(&mut self, out: &mut Vec<Instr>) {
        let Some(fd_write) = self.fd_write else { return };
        let word = MemArg::new(2, 0);
        out.push(Instr::I32Const(IOVEC));
        self.address(1, out);
        out.push(Instr::Store(StoreOp::I32Store, word));
        out.push(Instr::I32Const(IOVEC));
        self.expr(ValType::I32, 1, out);
        out.extend([
            Instr::I32Const(63),
            Instr::Num(NumOp::I32And),
            Instr::Store(StoreOp::I32Store, MemArg::new(2, 4)),
            Instr::I32Const(1),
            Instr::I32Const(IOVEC),
            Instr::I32Const(1),
            Instr::I32Const(IOVEC + 8),
            Instr::Call(fd_write),
            Instr::LocalSet(SCRATCH),
        ]);
    }
}
