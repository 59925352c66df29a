// SPDX-License-Identifier: Apache-2.0

//! Small modules shared by the execution tests and the acceptance gate.

#![allow(dead_code)]

use wasmdesk::exec::{Config, Imports, InvokeError, ModuleInstance, TrapKind, Value};
use wasmdesk::suite::ModuleBuilder;
use wasmdesk::Instr::*;
use wasmdesk::NumOp::*;
use wasmdesk::ValType::{I32, I64};
use wasmdesk::{validate_module, FuncType, LoadOp, MemArg, Module, StoreOp};

pub fn instance_with(m: Module, config: Config) -> ModuleInstance {
    let vm = validate_module(m).expect("test module validates");
    ModuleInstance::instantiate(&vm, &mut Imports::new(), config).expect("instantiates")
}

pub fn instance(m: Module) -> ModuleInstance {
    instance_with(m, Config::default())
}

pub fn trap(r: Result<Vec<Value>, InvokeError>) -> TrapKind {
    r.expect_err("expected a trap").trap_kind().expect("a trap, not another error")
}

/// One exported function `name` of type `ty` with `body`, and a memory of
/// `pages` pages if given.
pub fn single(name: &str, ty: FuncType, locals: Vec<wasmdesk::ValType>, body: Vec<wasmdesk::Instr>, pages: Option<(u32, Option<u32>)>) -> Module {
    let mut b = ModuleBuilder::new();
    if let Some((min, max)) = pages {
        b.memory(min, max);
    }
    let f = b.func(ty, locals, body);
    b.export_func(name, f);
    b.finish()
}

pub fn i32_binop(op: wasmdesk::NumOp) -> Module {
    single("f", FuncType::new([I32, I32], [I32]), vec![], vec![LocalGet(0), LocalGet(1), Num(op)], None)
}

pub fn memory_module() -> Module {
    let mut b = ModuleBuilder::new();
    b.memory(1, Some(2));
    let store = |op, align| Store(op, MemArg::new(align, 0));
    let load = |op, align| Load(op, MemArg::new(align, 0));
    let funcs = [
        ("store8", FuncType::new([I32, I64], []), vec![LocalGet(0), LocalGet(1), store(StoreOp::I64Store8, 0)]),
        ("store16", FuncType::new([I32, I64], []), vec![LocalGet(0), LocalGet(1), store(StoreOp::I64Store16, 1)]),
        ("store32", FuncType::new([I32, I64], []), vec![LocalGet(0), LocalGet(1), store(StoreOp::I64Store32, 2)]),
        ("store64", FuncType::new([I32, I64], []), vec![LocalGet(0), LocalGet(1), store(StoreOp::I64Store, 3)]),
        ("i32.store", FuncType::new([I32, I32], []), vec![LocalGet(0), LocalGet(1), store(StoreOp::I32Store, 2)]),
        ("i32.store8", FuncType::new([I32, I32], []), vec![LocalGet(0), LocalGet(1), store(StoreOp::I32Store8, 0)]),
        ("i32.load", FuncType::new([I32], [I32]), vec![LocalGet(0), load(LoadOp::I32Load, 2)]),
        ("i32.load8_s", FuncType::new([I32], [I32]), vec![LocalGet(0), load(LoadOp::I32Load8S, 0)]),
        ("i32.load8_u", FuncType::new([I32], [I32]), vec![LocalGet(0), load(LoadOp::I32Load8U, 0)]),
        ("i64.load", FuncType::new([I32], [I64]), vec![LocalGet(0), load(LoadOp::I64Load, 3)]),
        (
            "far",
            FuncType::new([I32], [I32]),
            vec![LocalGet(0), Load(LoadOp::I32Load, MemArg::new(2, 0xFFFF_FFF0))],
        ),
        ("grow", FuncType::new([I32], [I32]), vec![LocalGet(0), MemoryGrow]),
        ("size", FuncType::new([], [I32]), vec![MemorySize]),
    ];
    for (name, ty, body) in funcs {
        let f = b.func(ty, vec![], body);
        b.export_func(name, f);
    }
    b.finish()
}

pub fn table_module() -> Module {
    let mut b = ModuleBuilder::new();
    let ii = FuncType::new([I32], [I32]);
    let double = b.func(ii.clone(), vec![], vec![LocalGet(0), I32Const(2), Num(I32Mul)]);
    let unit = b.func(FuncType::new([], []), vec![], vec![]);
    b.table(3, None);
    b.elements(0, vec![double, unit]);
    let ty = b.ty(ii.clone());
    let call = b.func(
        FuncType::new([I32, I32], [I32]),
        vec![],
        vec![LocalGet(1), LocalGet(0), CallIndirect(ty)],
    );
    b.export_func("call", call);
    b.finish()
}

pub fn recursive() -> Module {
    let mut b = ModuleBuilder::new();
    let f = b.declare(FuncType::new([I32], [I32]));
    b.define(f, vec![], vec![LocalGet(0), I32Const(1), Num(I32Add), Call(f)]);
    b.export_func("forever", f);
    b.finish()
}
