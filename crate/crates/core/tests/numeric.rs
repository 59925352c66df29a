// SPDX-License-Identifier: Apache-2.0

//! Per-opcode randomized comparison of the numeric core against the host
//! reference in `support/numeric_ref.rs`.

#[path = "support/numeric_ref.rs"]
mod numeric_ref;

use numeric_ref::{check_opcodes, reference, same, sample, SAMPLES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasmdesk::exec::{Config, Imports, ModuleInstance, Value};
use wasmdesk::suite::ModuleBuilder;
use wasmdesk::{validate_module, FuncType, Instr, NumOp};

#[test]
fn every_opcode_matches_the_reference() {
    check_opcodes(0x5EED, SAMPLES).unwrap();
}

/// The same comparison through decoded modules and the interpreter, for
/// a smaller number of samples per opcode.
#[test]
fn interpreter_routes_every_opcode() {
    let mut b = ModuleBuilder::new();
    for (k, &op) in NumOp::ALL.iter().enumerate() {
        let ty = op.operand_type();
        let params = vec![ty; op.arity()];
        let body = (0..op.arity() as u32).map(Instr::LocalGet).chain([Instr::Num(op)]).collect();
        let f = b.func(FuncType::new(params, [op.result_type()]), vec![], body);
        b.export_func(&format!("op{k}"), f);
    }
    let vm = validate_module(b.finish()).unwrap();
    let mut inst = ModuleInstance::instantiate(&vm, &mut Imports::new(), Config::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (k, &op) in NumOp::ALL.iter().enumerate() {
        for _ in 0..200 {
            let args: Vec<Value> = (0..op.arity()).map(|_| sample(&mut rng, op.operand_type())).collect();
            let y = args.get(1).copied().unwrap_or(args[0]);
            let got = inst.invoke(&format!("op{k}"), &args).map(|v| v[0]).map_err(|e| e.trap_kind().unwrap());
            let want = reference(op, args[0], y);
            assert!(same(&got, &want), "{op:?}{args:?}: got {got:?}, want {want:?}");
        }
    }
}
