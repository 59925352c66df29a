// SPDX-License-Identifier: Apache-2.0

//! A small `wasi_snapshot_preview1` subset: stdio writes, clocks, random
//! bytes, args, environment and `proc_exit`.
//!
//! Every call either performs all of its guest-memory writes or returns
//! `FAULT` having written nothing.

use std::cell::RefCell;
use std::io::Write;
use std::rc::Rc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{Caller, HostError, Imports, MemoryAccessor, OutOfBounds, Value};
use crate::model::{FuncType, ImportDesc, Module, ValType};

pub const WASI_MODULE: &str = "wasi_snapshot_preview1";

/// Errno values from the preview1 interface definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Errno(pub u16);

impl Errno {
    pub const SUCCESS: Errno = Errno(0);
    pub const BADF: Errno = Errno(8);
    pub const FAULT: Errno = Errno(21);
    pub const INVAL: Errno = Errno(28);
    pub const NOSYS: Errno = Errno(52);
}

impl From<OutOfBounds> for Errno {
    fn from(_: OutOfBounds) -> Self {
        Errno::FAULT
    }
}

#[derive(Debug, Clone)]
pub enum Sink {
    /// Bytes are kept in memory, readable via [`WasiContext::output`].
    Capture(Vec<u8>),
    /// Bytes go to the host process's own stdout or stderr.
    Inherit,
}

#[derive(Debug, Clone)]
pub enum ClockSource {
    System { start: Instant },
    /// Constant readings, for reproducible runs.
    Fixed { realtime: u64, monotonic: u64 },
}

#[derive(Debug, Clone)]
pub enum EntropySource {
    Seeded(Box<ChaCha8Rng>),
    Os,
}

#[derive(Debug, Clone)]
pub struct WasiContext {
    pub args: Vec<Vec<u8>>,
    /// `KEY=value` entries.
    pub env: Vec<Vec<u8>>,
    pub stdout: Sink,
    pub stderr: Sink,
    pub clock: ClockSource,
    pub rng: EntropySource,
    pub exit_status: Option<i32>,
}

impl Default for WasiContext {
    fn default() -> Self {
        WasiContext {
            args: Vec::new(),
            env: Vec::new(),
            stdout: Sink::Inherit,
            stderr: Sink::Inherit,
            clock: ClockSource::System { start: Instant::now() },
            rng: EntropySource::Os,
            exit_status: None,
        }
    }
}

impl WasiContext {
    /// Captured output, fixed clock and seeded rng: fully reproducible.
    pub fn deterministic(seed: u64) -> Self {
        WasiContext {
            stdout: Sink::Capture(Vec::new()),
            stderr: Sink::Capture(Vec::new()),
            clock: ClockSource::Fixed { realtime: 0, monotonic: 0 },
            rng: EntropySource::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed))),
            ..Self::default()
        }
    }

    pub fn with_args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Vec<u8>>,
    {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_env<I, S>(mut self, env: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Vec<u8>>,
    {
        self.env = env.into_iter().map(Into::into).collect();
        self
    }

    /// Captured bytes for fd 1 or 2, empty if the stream is inherited.
    pub fn output(&self, fd: u32) -> &[u8] {
        match (fd, &self.stdout, &self.stderr) {
            (1, Sink::Capture(b), _) | (2, _, Sink::Capture(b)) => b,
            _ => &[],
        }
    }

    fn write_fd(&mut self, fd: u32, bytes: &[u8]) -> Result<(), Errno> {
        let sink = match fd {
            1 => &mut self.stdout,
            2 => &mut self.stderr,
            _ => return Err(Errno::BADF),
        };
        match sink {
            Sink::Capture(buf) => buf.extend_from_slice(bytes),
            Sink::Inherit if fd == 1 => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).and_then(|_| out.flush()).map_err(|_| Errno::BADF)?;
            }
            Sink::Inherit => std::io::stderr().write_all(bytes).map_err(|_| Errno::BADF)?,
        }
        Ok(())
    }

    fn now(&self, clock_id: u32) -> Result<u64, Errno> {
        match (&self.clock, clock_id) {
            (ClockSource::Fixed { realtime, .. }, 0) => Ok(*realtime),
            (ClockSource::Fixed { monotonic, .. }, 1) => Ok(*monotonic),
            (ClockSource::System { .. }, 0) => Ok(SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64)),
            (ClockSource::System { start }, 1) => Ok(start.elapsed().as_nanos() as u64),
            _ => Err(Errno::INVAL),
        }
    }

    fn fill_random(&mut self, buf: &mut [u8]) {
        match &mut self.rng {
            EntropySource::Seeded(r) => r.fill_bytes(buf),
            EntropySource::Os => rand::rng().fill_bytes(buf),
        }
    }
}

/// Sizes then contents of a NUL-terminated string list, as laid out by
/// `args_get` and `environ_get`.
fn list_sizes(list: &[Vec<u8>]) -> (u32, u32) {
    (list.len() as u32, list.iter().map(|s| s.len() as u32 + 1).sum())
}

fn write_list(
    mem: &mut MemoryAccessor<'_>,
    list: &[Vec<u8>],
    ptrs: u32,
    buf: u32,
) -> Result<(), Errno> {
    let (count, size) = list_sizes(list);
    mem.check(ptrs, 4 * u64::from(count))?;
    mem.check(buf, u64::from(size))?;
    let mut at = buf;
    for (i, s) in list.iter().enumerate() {
        mem.write_u32(ptrs + 4 * i as u32, at)?;
        mem.write(at, s)?;
        mem.write(at + s.len() as u32, &[0])?;
        at += s.len() as u32 + 1;
    }
    Ok(())
}

fn fd_write(
    ctx: &mut WasiContext,
    mem: &mut MemoryAccessor<'_>,
    fd: u32,
    iovs: u32,
    iovs_len: u32,
    nwritten: u32,
) -> Result<(), Errno> {
    if fd != 1 && fd != 2 {
        return Err(Errno::BADF);
    }
    mem.check(iovs, 8 * u64::from(iovs_len))?;
    mem.check(nwritten, 4)?;
    let mut bytes = Vec::new();
    for i in 0..iovs_len {
        let ptr = mem.read_u32(iovs + 8 * i)?;
        let len = mem.read_u32(iovs + 8 * i + 4)?;
        bytes.extend_from_slice(mem.read(ptr, len)?);
    }
    let total = u32::try_from(bytes.len()).map_err(|_| Errno::INVAL)?;
    ctx.write_fd(fd, &bytes)?;
    mem.write_u32(nwritten, total)?;
    Ok(())
}

type Ctx = Rc<RefCell<WasiContext>>;

fn errno(r: Result<(), Errno>) -> Result<Option<Value>, HostError> {
    Ok(Some(Value::I32(i32::from(r.err().unwrap_or(Errno::SUCCESS).0))))
}

/// Runs `f` with guest memory, or reports `FAULT` when there is none.
fn with_memory(
    caller: &mut Caller<'_>,
    f: impl FnOnce(&mut MemoryAccessor<'_>) -> Result<(), Errno>,
) -> Result<Option<Value>, HostError> {
    match caller.memory() {
        Some(mut mem) => errno(f(&mut mem)),
        None => errno(Err(Errno::FAULT)),
    }
}

fn arg(args: &[Value], i: usize) -> u32 {
    args[i].as_i32() as u32
}

/// Signatures of the supported calls.
pub fn signature(name: &str) -> Option<FuncType> {
    use ValType::{I32, I64};
    Some(match name {
        "fd_write" => FuncType::new([I32, I32, I32, I32], [I32]),
        "clock_time_get" => FuncType::new([I32, I64, I32], [I32]),
        "random_get" | "args_sizes_get" | "args_get" | "environ_sizes_get" | "environ_get" => {
            FuncType::new([I32, I32], [I32])
        }
        "proc_exit" => FuncType::new([I32], []),
        _ => return None,
    })
}

/// Defines every `wasi_snapshot_preview1` import of `module` in
/// `imports`. Calls outside the subset get a stub returning `NOSYS`.
pub fn link(imports: &mut Imports, ctx: Ctx, module: &Module) {
    for imp in &module.imports {
        let ImportDesc::Func(t) = imp.desc else { continue };
        if imp.module != WASI_MODULE {
            continue;
        }
        let declared = module.types[t as usize].clone();
        let name = imp.field.as_str();
        match signature(name) {
            // a mismatched declaration is left for instantiation to reject
            Some(ty) => define(imports, name, ty, ctx.clone()),
            None => {
                let result = declared.results.first().copied();
                imports.func(WASI_MODULE, name, declared, move |_, _| {
                    Ok(result.map(|t| match t {
                        ValType::I32 => Value::I32(i32::from(Errno::NOSYS.0)),
                        other => Value::default_for(other),
                    }))
                });
            }
        }
    }
}

fn define(imports: &mut Imports, name: &str, ty: FuncType, ctx: Ctx) {
    match name {
        "fd_write" => imports.func(WASI_MODULE, name, ty, move |caller, a| {
            let mut ctx = ctx.borrow_mut();
            with_memory(caller, |mem| fd_write(&mut ctx, mem, arg(a, 0), arg(a, 1), arg(a, 2), arg(a, 3)))
        }),
        "clock_time_get" => imports.func(WASI_MODULE, name, ty, move |caller, a| {
            let now = ctx.borrow().now(arg(a, 0));
            with_memory(caller, |mem| mem.write_u64(arg(a, 2), now?).map_err(Errno::from))
        }),
        "random_get" => imports.func(WASI_MODULE, name, ty, move |caller, a| {
            let mut ctx = ctx.borrow_mut();
            with_memory(caller, |mem| {
                let (ptr, len) = (arg(a, 0), arg(a, 1));
                mem.check(ptr, u64::from(len))?;
                let mut buf = vec![0; len as usize];
                ctx.fill_random(&mut buf);
                mem.write(ptr, &buf).map_err(Errno::from)
            })
        }),
        "args_sizes_get" | "environ_sizes_get" => {
            let args = name == "args_sizes_get";
            imports.func(WASI_MODULE, name, ty, move |caller, a| {
                let ctx = ctx.borrow();
                let (count, size) = list_sizes(if args { &ctx.args } else { &ctx.env });
                with_memory(caller, |mem| {
                    mem.check(arg(a, 0), 4)?;
                    mem.check(arg(a, 1), 4)?;
                    mem.write_u32(arg(a, 0), count)?;
                    mem.write_u32(arg(a, 1), size).map_err(Errno::from)
                })
            })
        }
        "args_get" | "environ_get" => {
            let args = name == "args_get";
            imports.func(WASI_MODULE, name, ty, move |caller, a| {
                let ctx = ctx.borrow();
                let list = if args { &ctx.args } else { &ctx.env };
                with_memory(caller, |mem| write_list(mem, list, arg(a, 0), arg(a, 1)))
            })
        }
        "proc_exit" => imports.func(WASI_MODULE, name, ty, move |_, a| {
            let code = a[0].as_i32();
            ctx.borrow_mut().exit_status = Some(code);
            Err(HostError::Exit(code))
        }),
        _ => unreachable!("signature() lists the subset"),
    }
}
