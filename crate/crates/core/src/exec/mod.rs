// SPDX-License-Identifier: Apache-2.0

//! Instantiation and tree-walking execution.

mod host;
mod instance;
pub mod memory;
pub mod numeric;
mod trap;
mod value;

pub use host::{
    Caller, Extern, HostError, HostFunction, Imports, MemoryAccessor, OutOfBounds, TableInstance,
};
pub use instance::{Config, InstantiateError, InvokeError, ModuleInstance, MAX_TABLE_SIZE};
pub use memory::{LinearMemoryInstance, DEFAULT_MEMORY_CAP_PAGES, PAGE_SIZE};
pub use trap::{Trap, TrapKind};
pub use value::Value;
