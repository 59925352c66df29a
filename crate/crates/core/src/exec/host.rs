// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use super::memory::LinearMemoryInstance;
use super::{Trap, Value};
use crate::model::{FuncType, GlobalType};

/// Why a host function stopped the guest.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HostError {
    #[error(transparent)]
    Trap(#[from] Trap),
    /// Orderly termination with a status code, as with `proc_exit`.
    #[error("guest exited with status {0}")]
    Exit(i32),
}

type HostCallable = dyn Fn(&mut Caller<'_>, &[Value]) -> Result<Option<Value>, HostError>;

/// A host-provided function. Its behavior reaches instance state only
/// through the [`Caller`] it receives.
#[derive(Clone)]
pub struct HostFunction {
    pub ty: FuncType,
    call: Rc<HostCallable>,
}

impl HostFunction {
    pub fn new<F>(ty: FuncType, f: F) -> Self
    where
        F: Fn(&mut Caller<'_>, &[Value]) -> Result<Option<Value>, HostError> + 'static,
    {
        HostFunction { ty, call: Rc::new(f) }
    }

    pub(crate) fn call(&self, caller: &mut Caller<'_>, args: &[Value]) -> Result<Option<Value>, HostError> {
        (self.call)(caller, args)
    }
}

impl fmt::Debug for HostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HostFunction({})", self.ty)
    }
}

/// Function table contents: indices into the owning instance's function
/// space, or empty slots.
#[derive(Debug, Clone, Default)]
pub struct TableInstance {
    pub elements: Vec<Option<u32>>,
    pub max: Option<u32>,
}

impl TableInstance {
    pub fn new(size: u32, max: Option<u32>) -> Self {
        TableInstance {
            elements: vec![None; size as usize],
            max,
        }
    }
}

/// Something that can satisfy an import.
#[derive(Debug, Clone)]
pub enum Extern {
    Func(HostFunction),
    Memory(LinearMemoryInstance),
    Table(TableInstance),
    Global(GlobalType, Value),
}

/// Import resolver keyed by `(module, field)`.
#[derive(Debug, Clone, Default)]
pub struct Imports {
    map: HashMap<(String, String), Extern>,
}

impl Imports {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(&mut self, module: &str, field: &str, ext: Extern) {
        self.map.insert((module.to_owned(), field.to_owned()), ext);
    }

    pub fn func<F>(&mut self, module: &str, field: &str, ty: FuncType, f: F)
    where
        F: Fn(&mut Caller<'_>, &[Value]) -> Result<Option<Value>, HostError> + 'static,
    {
        self.define(module, field, Extern::Func(HostFunction::new(ty, f)));
    }

    pub fn contains(&self, module: &str, field: &str) -> bool {
        self.map.contains_key(&(module.to_owned(), field.to_owned()))
    }

    pub(crate) fn take(&mut self, module: &str, field: &str) -> Option<Extern> {
        let key = (module.to_owned(), field.to_owned());
        match self.map.get(&key)? {
            // functions may satisfy several imports
            Extern::Func(f) => Some(Extern::Func(f.clone())),
            _ => self.map.remove(&key),
        }
    }
}

/// Guest pointer range that does not lie inside linear memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("guest range {addr}+{len} is outside linear memory")]
pub struct OutOfBounds {
    pub addr: u64,
    pub len: u64,
}

/// The calling instance, as seen by a host function.
pub struct Caller<'a> {
    pub(crate) memory: Option<&'a mut LinearMemoryInstance>,
}

impl Caller<'_> {
    pub fn memory(&mut self) -> Option<MemoryAccessor<'_>> {
        self.memory.as_deref_mut().map(|mem| MemoryAccessor { mem })
    }
}

/// Bounds-checked view of guest memory for host code.
pub struct MemoryAccessor<'a> {
    mem: &'a mut LinearMemoryInstance,
}

impl<'a> MemoryAccessor<'a> {
    pub fn new(mem: &'a mut LinearMemoryInstance) -> Self {
        MemoryAccessor { mem }
    }

    pub fn len(&self) -> usize {
        self.mem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mem.is_empty()
    }

    /// Checks that `[addr, addr + len)` is inside memory.
    pub fn check(&self, addr: u32, len: u64) -> Result<(), OutOfBounds> {
        let end = u64::from(addr) + len;
        if end > self.mem.len() as u64 {
            return Err(OutOfBounds { addr: u64::from(addr), len });
        }
        Ok(())
    }

    pub fn read(&self, addr: u32, len: u32) -> Result<&[u8], OutOfBounds> {
        self.mem
            .slice(u64::from(addr), len as usize)
            .map_err(|_| OutOfBounds { addr: u64::from(addr), len: u64::from(len) })
    }

    pub fn write(&mut self, addr: u32, bytes: &[u8]) -> Result<(), OutOfBounds> {
        let len = bytes.len();
        self.mem
            .slice_mut(u64::from(addr), len)
            .map(|dst| dst.copy_from_slice(bytes))
            .map_err(|_| OutOfBounds { addr: u64::from(addr), len: len as u64 })
    }

    pub fn read_u32(&self, addr: u32) -> Result<u32, OutOfBounds> {
        let b = self.read(addr, 4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn write_u32(&mut self, addr: u32, v: u32) -> Result<(), OutOfBounds> {
        self.write(addr, &v.to_le_bytes())
    }

    pub fn write_u64(&mut self, addr: u32, v: u64) -> Result<(), OutOfBounds> {
        self.write(addr, &v.to_le_bytes())
    }
}
