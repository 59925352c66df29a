// SPDX-License-Identifier: Apache-2.0

//! A plain stack-machine interpreter over the flat instruction list, used
//! only as a reference when testing the tree interpreter.

use crate::exec::numeric;
use crate::exec::{TrapKind, Value};
use crate::model::*;

const PAGE: usize = 65536;
const MAX_DEPTH: usize = 10_000;

pub type HostFn<'a> = Box<dyn FnMut(&[Value]) -> Option<Value> + 'a>;

pub struct Flat<'a> {
    module: Module,
    hosts: Vec<HostFn<'a>>,
    pub memory: Vec<u8>,
    max_pages: usize,
    pub globals: Vec<Value>,
    table: Vec<Option<u32>>,
    depth: usize,
}

struct Label {
    arity: usize,
    height: usize,
    /// Where a branch lands.
    target: usize,
}

enum Flow {
    Next,
    Branch(u32),
    Return,
}

impl<'a> Flat<'a> {
    /// Instantiates `module`. Function imports are served by `hosts` in
    /// import order; other import kinds are not supported.
    pub fn new(module: Module, hosts: Vec<HostFn<'a>>, cap_pages: usize) -> Result<Self, TrapKind> {
        let mem = module.memories.first().copied();
        let mut f = Flat {
            memory: vec![0; mem.map_or(0, |l| l.min as usize * PAGE)],
            max_pages: mem.map_or(0, |l| l.max.map_or(cap_pages, |m| (m as usize).min(cap_pages))),
            globals: Vec::new(),
            table: vec![None; module.tables.first().map_or(0, |t| t.min as usize)],
            hosts,
            depth: 0,
            module,
        };
        for g in f.module.globals.clone() {
            let v = f.const_value(g.init);
            f.globals.push(v);
        }
        for seg in f.module.elements.clone() {
            let at = f.const_value(seg.offset).as_i32() as u32 as usize;
            if at + seg.funcs.len() > f.table.len() {
                return Err(TrapKind::OobTable);
            }
            for (i, func) in seg.funcs.iter().enumerate() {
                f.table[at + i] = Some(*func);
            }
        }
        for seg in f.module.data.clone() {
            let at = f.const_value(seg.offset).as_i32() as u32 as usize;
            if at + seg.bytes.len() > f.memory.len() {
                return Err(TrapKind::OobMemory);
            }
            f.memory[at..at + seg.bytes.len()].copy_from_slice(&seg.bytes);
        }
        if let Some(s) = f.module.start {
            f.call(s, &mut Vec::new())?;
        }
        Ok(f)
    }

    fn const_value(&self, e: ConstExpr) -> Value {
        match e {
            ConstExpr::I32(v) => Value::I32(v),
            ConstExpr::I64(v) => Value::I64(v),
            ConstExpr::F32(b) => Value::f32_bits(b),
            ConstExpr::F64(b) => Value::f64_bits(b),
            ConstExpr::GlobalGet(i) => self.globals[i as usize],
        }
    }

    pub fn invoke(&mut self, name: &str, args: &[Value]) -> Result<Vec<Value>, TrapKind> {
        let export = self
            .module
            .exports
            .iter()
            .find(|e| e.name == name && e.kind == ExportKind::Func)
            .expect("exported function");
        let mut stack = args.to_vec();
        self.depth = 0;
        self.call(export.index, &mut stack)?;
        Ok(stack)
    }

    fn func_type(&self, func: u32) -> FuncType {
        let imported: Vec<u32> = self
            .module
            .imports
            .iter()
            .filter_map(|i| match i.desc {
                ImportDesc::Func(t) => Some(t),
                _ => None,
            })
            .collect();
        let t = match imported.get(func as usize) {
            Some(t) => *t,
            None => self.module.funcs[func as usize - imported.len()].type_index,
        };
        self.module.types[t as usize].clone()
    }

    fn call(&mut self, func: u32, stack: &mut Vec<Value>) -> Result<(), TrapKind> {
        let ty = self.func_type(func);
        let args = stack.split_off(stack.len() - ty.params.len());
        let imported = self.module.imported_func_count() as usize;
        if (func as usize) < imported {
            if let Some(v) = (self.hosts[func as usize])(&args) {
                stack.push(v);
            }
            return Ok(());
        }
        if self.depth >= MAX_DEPTH {
            return Err(TrapKind::CallDepthExceeded);
        }
        self.depth += 1;
        let body = self.module.funcs[func as usize - imported].clone();
        let mut locals = args;
        locals.extend(body.locals.iter().map(|t| Value::default_for(*t)));
        let mut own = Vec::new();
        let r = self.exec(&body.body, &mut locals, &mut own, ty.results.len());
        self.depth -= 1;
        r?;
        stack.extend(own.drain(own.len() - ty.results.len()..));
        Ok(())
    }

    /// Matching `else` and `end` for the structured instruction at `pc`.
    fn scan(code: &[Instr], pc: usize) -> (Option<usize>, usize) {
        let mut depth = 0;
        let mut els = None;
        for (i, ins) in code.iter().enumerate().skip(pc + 1) {
            match ins {
                Instr::Block(_) | Instr::Loop(_) | Instr::If(_) => depth += 1,
                Instr::Else if depth == 0 => els = Some(i),
                Instr::End if depth == 0 => return (els, i),
                Instr::End => depth -= 1,
                _ => {}
            }
        }
        unreachable!("validated code is balanced")
    }

    fn exec(
        &mut self,
        code: &[Instr],
        locals: &mut [Value],
        stack: &mut Vec<Value>,
        arity: usize,
    ) -> Result<(), TrapKind> {
        let mut labels = vec![Label { arity, height: 0, target: code.len() - 1 }];
        let mut pc = 0;
        while pc < code.len() {
            let flow = self.step(code, &mut pc, locals, stack, &mut labels)?;
            match flow {
                Flow::Next => pc += 1,
                Flow::Return => return Ok(()),
                Flow::Branch(d) => {
                    let at = labels.len() - 1 - d as usize;
                    let l = &labels[at];
                    let keep = stack.split_off(stack.len() - l.arity);
                    stack.truncate(l.height);
                    stack.extend(keep);
                    pc = l.target;
                    if matches!(code[pc], Instr::Loop(_)) {
                        // re-enter the loop with a fresh label
                        labels.truncate(at);
                    } else {
                        labels.truncate(at + 1);
                    }
                    if at == 0 {
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }

    fn step(
        &mut self,
        code: &[Instr],
        pc: &mut usize,
        locals: &mut [Value],
        stack: &mut Vec<Value>,
        labels: &mut Vec<Label>,
    ) -> Result<Flow, TrapKind> {
        use Instr::*;
        let pop = |s: &mut Vec<Value>| s.pop().expect("validated stack");
        match &code[*pc] {
            Unreachable => return Err(TrapKind::Unreachable),
            Nop => {}
            Block(bt) | Loop(bt) | If(bt) => {
                let (els, end) = Self::scan(code, *pc);
                let is_loop = matches!(code[*pc], Loop(_));
                let taken = match code[*pc] {
                    If(_) => pop(stack).as_i32() != 0,
                    _ => true,
                };
                labels.push(Label {
                    arity: if is_loop { 0 } else { bt.result().map_or(0, |_| 1) },
                    height: stack.len(),
                    target: if is_loop { *pc } else { end },
                });
                if !taken {
                    match els {
                        Some(e) => *pc = e,
                        None => {
                            labels.pop();
                            *pc = end;
                        }
                    }
                }
            }
            // reaching `else` from the then-arm skips the else-arm
            Else => {
                let l = labels.pop().expect("label");
                *pc = l.target;
            }
            End => {
                labels.pop();
                if labels.is_empty() {
                    return Ok(Flow::Return);
                }
            }
            Br(d) => return Ok(Flow::Branch(*d)),
            BrIf(d) => {
                if pop(stack).as_i32() != 0 {
                    return Ok(Flow::Branch(*d));
                }
            }
            BrTable { targets, default } => {
                let i = pop(stack).as_i32() as u32 as usize;
                return Ok(Flow::Branch(*targets.get(i).unwrap_or(default)));
            }
            Return => return Ok(Flow::Branch(labels.len() as u32 - 1)),
            Call(f) => self.call(*f, stack)?,
            CallIndirect(t) => {
                let i = pop(stack).as_i32() as u32 as usize;
                let f = *self.table.get(i).ok_or(TrapKind::OobTable)?;
                let f = f.ok_or(TrapKind::IndirectTypeMismatch)?;
                if self.func_type(f) != self.module.types[*t as usize] {
                    return Err(TrapKind::IndirectTypeMismatch);
                }
                self.call(f, stack)?;
            }
            Drop => {
                pop(stack);
            }
            Select => {
                let c = pop(stack).as_i32();
                let b = pop(stack);
                let a = pop(stack);
                stack.push(if c != 0 { a } else { b });
            }
            LocalGet(i) => stack.push(locals[*i as usize]),
            LocalSet(i) => locals[*i as usize] = pop(stack),
            LocalTee(i) => locals[*i as usize] = *stack.last().expect("value"),
            GlobalGet(i) => stack.push(self.globals[*i as usize]),
            GlobalSet(i) => self.globals[*i as usize] = pop(stack),
            Load(op, m) => {
                let ea = pop(stack).as_i32() as u32 as usize + m.offset as usize;
                stack.push(self.load(*op, ea)?);
            }
            Store(op, m) => {
                let v = pop(stack);
                let ea = pop(stack).as_i32() as u32 as usize + m.offset as usize;
                self.store(*op, ea, v)?;
            }
            MemorySize => stack.push(Value::I32((self.memory.len() / PAGE) as i32)),
            MemoryGrow => {
                let delta = pop(stack).as_i32() as u32 as usize;
                let old = self.memory.len() / PAGE;
                if old + delta > self.max_pages {
                    stack.push(Value::I32(-1));
                } else {
                    self.memory.resize((old + delta) * PAGE, 0);
                    stack.push(Value::I32(old as i32));
                }
            }
            I32Const(v) => stack.push(Value::I32(*v)),
            I64Const(v) => stack.push(Value::I64(*v)),
            F32Const(b) => stack.push(Value::f32_bits(*b)),
            F64Const(b) => stack.push(Value::f64_bits(*b)),
            Num(op) => {
                let v = if op.arity() == 1 {
                    numeric::unary(*op, pop(stack))?
                } else {
                    let b = pop(stack);
                    let a = pop(stack);
                    numeric::binary(*op, a, b)?
                };
                stack.push(v);
            }
        }
        Ok(Flow::Next)
    }

    fn bytes<const N: usize>(&self, ea: usize) -> Result<[u8; N], TrapKind> {
        let end = ea.checked_add(N).ok_or(TrapKind::OobMemory)?;
        let s = self.memory.get(ea..end).ok_or(TrapKind::OobMemory)?;
        Ok(s.try_into().expect("length"))
    }

    fn load(&self, op: LoadOp, ea: usize) -> Result<Value, TrapKind> {
        use LoadOp::*;
        Ok(match op {
            I32Load => Value::I32(i32::from_le_bytes(self.bytes(ea)?)),
            I64Load => Value::I64(i64::from_le_bytes(self.bytes(ea)?)),
            F32Load => Value::f32_bits(u32::from_le_bytes(self.bytes(ea)?)),
            F64Load => Value::f64_bits(u64::from_le_bytes(self.bytes(ea)?)),
            I32Load8S => Value::I32(i8::from_le_bytes(self.bytes(ea)?).into()),
            I32Load8U => Value::I32(u8::from_le_bytes(self.bytes(ea)?).into()),
            I32Load16S => Value::I32(i16::from_le_bytes(self.bytes(ea)?).into()),
            I32Load16U => Value::I32(u16::from_le_bytes(self.bytes(ea)?).into()),
            I64Load8S => Value::I64(i8::from_le_bytes(self.bytes(ea)?).into()),
            I64Load8U => Value::I64(u8::from_le_bytes(self.bytes(ea)?).into()),
            I64Load16S => Value::I64(i16::from_le_bytes(self.bytes(ea)?).into()),
            I64Load16U => Value::I64(u16::from_le_bytes(self.bytes(ea)?).into()),
            I64Load32S => Value::I64(i32::from_le_bytes(self.bytes(ea)?).into()),
            I64Load32U => Value::I64(u32::from_le_bytes(self.bytes(ea)?).into()),
        })
    }

    fn store(&mut self, op: StoreOp, ea: usize, v: Value) -> Result<(), TrapKind> {
        use StoreOp::*;
        let raw = v.bits().to_le_bytes();
        let n = match op {
            I32Store8 | I64Store8 => 1,
            I32Store16 | I64Store16 => 2,
            I32Store | F32Store | I64Store32 => 4,
            I64Store | F64Store => 8,
        };
        let end = ea.checked_add(n).ok_or(TrapKind::OobMemory)?;
        let dst = self.memory.get_mut(ea..end).ok_or(TrapKind::OobMemory)?;
        dst.copy_from_slice(&raw[..n]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;
    use std::rc::Rc;

    use super::*;
    use crate::exec::{Config, Imports, ModuleInstance};
    use crate::suite::{gen_random_program, ModuleBuilder, RANDOM_ENTRY};
    use crate::validate_module;

    fn same(a: &[Value], b: &[Value]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.ty() == y.ty() && x.bits() == y.bits())
    }

    #[test]
    fn random_programs_agree_with_the_tree_interpreter() {
        let mut traps = 0;
        for seed in 0..400u64 {
            let module = gen_random_program(seed, 40);
            let vm = validate_module(module.clone()).unwrap();
            for threshold in [None, Some(1)] {
                let config = Config { opt_threshold: threshold, ..Config::default() };
                let mut tree = ModuleInstance::instantiate(&vm, &mut Imports::new(), config).unwrap();
                let mut flat = Flat::new(module.clone(), Vec::new(), 1024).unwrap();
                for args in [[Value::I32(3), Value::I64(-9)], [Value::I32(-1), Value::I64(1 << 40)]] {
                    let t = tree.invoke(RANDOM_ENTRY, &args);
                    let f = flat.invoke(RANDOM_ENTRY, &args);
                    match (&t, &f) {
                        (Ok(a), Ok(b)) => assert!(same(a, b), "seed {seed}: {a:?} vs {b:?}"),
                        (Err(e), Err(k)) => {
                            assert_eq!(e.trap_kind(), Some(*k), "seed {seed}");
                            traps += 1;
                        }
                        _ => panic!("seed {seed}: tree {t:?}, flat {f:?}"),
                    }
                    assert!(same(tree.globals(), &flat.globals), "seed {seed} globals");
                    assert!(tree.memory().unwrap().data() == &flat.memory[..], "seed {seed} memory");
                }
            }
        }
        // the generator should reach trapping paths now and then
        assert!(traps > 0);
    }

    /// `[call f, call g, i32.add]` must call f before g in both engines.
    #[test]
    fn operands_evaluate_left_to_right() {
        let mut b = ModuleBuilder::new();
        let unit = FuncType::new([], [ValType::I32]);
        let f = b.import_func("env", "f", unit.clone());
        let g = b.import_func("env", "g", unit.clone());
        let main = b.func(unit.clone(), vec![], vec![Instr::Call(f), Instr::Call(g), Instr::Num(NumOp::I32Sub)]);
        b.export_func("main", main);
        let module = b.finish();

        let log = Rc::new(RefCell::new(Vec::new()));
        let mut imports = Imports::new();
        for (name, v) in [("f", 10), ("g", 3)] {
            let log = log.clone();
            imports.func("env", name, unit.clone(), move |_, _| {
                log.borrow_mut().push(name);
                Ok(Some(Value::I32(v)))
            });
        }
        let vm = validate_module(module.clone()).unwrap();
        let mut inst = ModuleInstance::instantiate(&vm, &mut imports, Config::default()).unwrap();
        assert_eq!(inst.invoke("main", &[]).unwrap(), vec![Value::I32(7)]);
        assert_eq!(*log.borrow(), ["f", "g"]);

        let flat_log = RefCell::new(Vec::new());
        let hosts: Vec<HostFn> = vec![
            Box::new(|_| {
                flat_log.borrow_mut().push("f");
                Some(Value::I32(10))
            }),
            Box::new(|_| {
                flat_log.borrow_mut().push("g");
                Some(Value::I32(3))
            }),
        ];
        let mut flat = Flat::new(module, hosts, 1024).unwrap();
        assert_eq!(flat.invoke("main", &[]).unwrap(), vec![Value::I32(7)]);
        drop(flat);
        assert_eq!(*flat_log.borrow(), ["f", "g"]);
    }
}
