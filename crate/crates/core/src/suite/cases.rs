// SPDX-License-Identifier: Apache-2.0

//! The seven benchmark kernels and their host oracles.
//!
//! Every case exports `run: () -> i64`. Inputs are regenerated inside the
//! module on each call, either from the Lcg or (with an override) from a
//! data segment, so repeated invocations do identical work.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::builder::ModuleBuilder;
use super::lcg::{Lcg, LCG_INCREMENT, LCG_MASK, LCG_MULTIPLIER};
use crate::exec::PAGE_SIZE;
use crate::model::BlockType::Empty;
use crate::model::Instr::*;
use crate::model::NumOp::*;
use crate::model::*;
use crate::par::{self, Parallelism};

pub const DEFAULT_SEED: u32 = 42;
pub const ENTRY: &str = "run";

/// Memory ceiling for corpus modules, matching the interpreter's default
/// host cap.
const MAX_CASE_PAGES: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseName {
    Fibonacci,
    Collision,
    MultiplyIntVec,
    QuicksortInt,
    ImageThreshold,
    VideoConvolute,
    TrialDivision,
}

impl CaseName {
    pub const ALL: [CaseName; 7] = [
        CaseName::Fibonacci,
        CaseName::Collision,
        CaseName::MultiplyIntVec,
        CaseName::QuicksortInt,
        CaseName::ImageThreshold,
        CaseName::VideoConvolute,
        CaseName::TrialDivision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::Fibonacci => "fibonacci",
            CaseName::Collision => "collision",
            CaseName::MultiplyIntVec => "multiply-int-vec",
            CaseName::QuicksortInt => "quicksort-int",
            CaseName::ImageThreshold => "image-threshold",
            CaseName::VideoConvolute => "video-convolute",
            CaseName::TrialDivision => "trial-division",
        }
    }

    pub fn default_params(self) -> CaseParams {
        match self {
            CaseName::Fibonacci => CaseParams::Fibonacci { n: 30 },
            CaseName::Collision => CaseParams::Collision { count: 1000 },
            CaseName::MultiplyIntVec => CaseParams::MultiplyIntVec { len: 100_000 },
            CaseName::QuicksortInt => CaseParams::QuicksortInt { len: 100_000 },
            CaseName::ImageThreshold => CaseParams::ImageThreshold {
                width: 1024,
                height: 1024,
                threshold: 128,
            },
            CaseName::VideoConvolute => CaseParams::VideoConvolute {
                frames: 5,
                width: 256,
                height: 256,
            },
            CaseName::TrialDivision => CaseParams::TrialDivision { k: 10_000 },
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, CaseError> {
        CaseName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CaseError::UnknownCase(s.to_owned()))
    }
}

/// Per-case scale parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseParams {
    Fibonacci { n: u32 },
    Collision { count: u32 },
    MultiplyIntVec { len: u32 },
    QuicksortInt { len: u32 },
    ImageThreshold { width: u32, height: u32, threshold: u32 },
    VideoConvolute { frames: u32, width: u32, height: u32 },
    TrialDivision { k: u32 },
}

impl CaseParams {
    pub fn name(&self) -> CaseName {
        match self {
            CaseParams::Fibonacci { .. } => CaseName::Fibonacci,
            CaseParams::Collision { .. } => CaseName::Collision,
            CaseParams::MultiplyIntVec { .. } => CaseName::MultiplyIntVec,
            CaseParams::QuicksortInt { .. } => CaseName::QuicksortInt,
            CaseParams::ImageThreshold { .. } => CaseName::ImageThreshold,
            CaseParams::VideoConvolute { .. } => CaseName::VideoConvolute,
            CaseParams::TrialDivision { .. } => CaseName::TrialDivision,
        }
    }

    pub fn check(&self) -> Result<(), CaseError> {
        let within = |param: &'static str, value: u32, min: u32, max: u32| {
            if value < min || value > max {
                Err(CaseError::OutOfBounds { param, value, min, max })
            } else {
                Ok(())
            }
        };
        match *self {
            CaseParams::Fibonacci { n } => within("n", n, 0, 40),
            CaseParams::Collision { count } => within("count", count, 1, 20_000),
            CaseParams::MultiplyIntVec { len } => within("len", len, 1, 1_000_000),
            CaseParams::QuicksortInt { len } => within("len", len, 1, 1_000_000),
            CaseParams::ImageThreshold { width, height, threshold } => {
                within("width", width, 1, 4096)?;
                within("height", height, 1, 4096)?;
                within("threshold", threshold, 0, 256)
            }
            CaseParams::VideoConvolute { frames, width, height } => {
                within("frames", frames, 1, 64)?;
                within("width", width, 1, 1024)?;
                within("height", height, 1, 1024)
            }
            CaseParams::TrialDivision { k } => within("k", k, 1, 1_000_000),
        }
    }

    /// How each input element is derived from an Lcg output, cycling.
    fn draws(&self) -> &'static [Draw] {
        match self {
            CaseParams::Fibonacci { .. } | CaseParams::TrialDivision { .. } => &[],
            CaseParams::Collision { .. } => &[Draw::Mod(10_000), Draw::Mod(10_000), Draw::Radius],
            CaseParams::MultiplyIntVec { .. } | CaseParams::QuicksortInt { .. } => &[Draw::Raw],
            CaseParams::ImageThreshold { .. } | CaseParams::VideoConvolute { .. } => {
                &[Draw::HighByte]
            }
        }
    }

    /// Number of input elements the case consumes.
    pub fn input_len(&self) -> usize {
        match *self {
            CaseParams::Fibonacci { .. } | CaseParams::TrialDivision { .. } => 0,
            CaseParams::Collision { count } => 3 * count as usize,
            CaseParams::MultiplyIntVec { len } => 2 * len as usize,
            CaseParams::QuicksortInt { len } => len as usize,
            CaseParams::ImageThreshold { width, height, .. } => (width * height) as usize,
            CaseParams::VideoConvolute { frames, width, height } => {
                (frames * width * height) as usize
            }
        }
    }

    /// Bytes of working memory the kernel uses.
    fn work_bytes(&self) -> usize {
        match *self {
            CaseParams::Fibonacci { .. } | CaseParams::TrialDivision { .. } => 0,
            CaseParams::Collision { count } => 12 * count as usize,
            CaseParams::MultiplyIntVec { len } => 8 * len as usize,
            CaseParams::QuicksortInt { len } => 4 * len as usize,
            CaseParams::ImageThreshold { width, height, .. } => (width * height) as usize,
            CaseParams::VideoConvolute { width, height, .. } => {
                (width as usize + 2) * (height as usize + 2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaseError {
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("{param} = {value} outside [{min}, {max}]")]
    OutOfBounds { param: &'static str, value: u32, min: u32, max: u32 },
    #[error("input override has {got} elements, case needs {expected}")]
    OverrideLength { expected: usize, got: usize },
    #[error("case needs {0} pages of memory")]
    TooLarge(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Draw {
    Raw,
    Mod(u32),
    /// `s % 100 + 1`
    Radius,
    /// Bits 16..24, avoiding the weak low bits.
    HighByte,
}

impl Draw {
    fn apply(self, s: u32) -> i32 {
        match self {
            Draw::Raw => s as i32,
            Draw::Mod(m) => (s % m) as i32,
            Draw::Radius => (s % 100 + 1) as i32,
            Draw::HighByte => ((s >> 16) & 0xFF) as i32,
        }
    }

    fn instrs(self) -> Vec<Instr> {
        match self {
            Draw::Raw => vec![],
            Draw::Mod(m) => vec![I32Const(m as i32), Num(I32RemU)],
            Draw::Radius => vec![I32Const(100), Num(I32RemU), I32Const(1), Num(I32Add)],
            Draw::HighByte => vec![I32Const(16), Num(I32ShrU), I32Const(0xFF), Num(I32And)],
        }
    }
}

/// Input elements in draw order for `seed`.
pub fn input_stream(params: &CaseParams, seed: u32) -> Vec<i32> {
    let draws = params.draws();
    Lcg::new(seed)
        .take(params.input_len())
        .enumerate()
        .map(|(i, s)| draws[i % draws.len()].apply(s))
        .collect()
}

/// Ground truth for a case, computed on the host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleResult {
    pub value: i64,
    pub produced_by: &'static str,
}

#[derive(Debug, Clone)]
pub struct BenchCase {
    pub name: CaseName,
    pub params: CaseParams,
    pub seed: u32,
    pub module: Module,
    pub entry: &'static str,
    pub expected: OracleResult,
}

pub fn build_case(params: CaseParams, seed: u32) -> Result<BenchCase, CaseError> {
    build_case_with(params, seed, None)
}

/// Builds a case whose inputs come from `inputs` instead of the Lcg.
pub fn build_case_with(
    params: CaseParams,
    seed: u32,
    inputs: Option<Vec<i32>>,
) -> Result<BenchCase, CaseError> {
    params.check()?;
    if let Some(v) = &inputs {
        if v.len() != params.input_len() {
            return Err(CaseError::OverrideLength { expected: params.input_len(), got: v.len() });
        }
    }
    let expected = oracle(&params, seed, inputs.as_deref())?;
    let module = Kernel::new(params, seed, inputs)?.emit();
    Ok(BenchCase {
        name: params.name(),
        params,
        seed,
        module,
        entry: ENTRY,
        expected,
    })
}

/// All seven cases at default scale. Construction runs in parallel.
pub fn default_corpus(seed: u32) -> Vec<BenchCase> {
    corpus_with(seed, Parallelism::default())
}

pub fn corpus_with(seed: u32, mode: Parallelism) -> Vec<BenchCase> {
    par::map_slice(mode, &CaseName::ALL, |_, c| {
        build_case(c.default_params(), seed).expect("default parameters are in bounds")
    })
}

// ---------------------------------------------------------------- oracles

pub fn oracle(
    params: &CaseParams,
    seed: u32,
    inputs: Option<&[i32]>,
) -> Result<OracleResult, CaseError> {
    params.check()?;
    let generated;
    let xs = match inputs {
        Some(v) => v,
        None => {
            generated = input_stream(params, seed);
            &generated
        }
    };
    let r = |value, produced_by| Ok(OracleResult { value, produced_by });
    match *params {
        CaseParams::Fibonacci { n } => r(fib_iterative(n), "iterative-fibonacci"),
        CaseParams::Collision { .. } => r(collision_pairs(xs), "direct-pair-loop"),
        CaseParams::MultiplyIntVec { len } => {
            let (a, b) = xs.split_at(len as usize);
            let sum = a
                .iter()
                .zip(b)
                .fold(0i64, |s, (x, y)| s.wrapping_add(i64::from(x.wrapping_mul(*y))));
            r(sum, "zip-fold")
        }
        CaseParams::QuicksortInt { .. } => {
            let mut v = xs.to_vec();
            v.sort_unstable();
            r(position_checksum(&v), "library-sort")
        }
        CaseParams::ImageThreshold { threshold, .. } => {
            r(xs.iter().filter(|&&p| p as u32 >= threshold).count() as i64, "filter-count")
        }
        CaseParams::VideoConvolute { width, height, .. } => {
            r(convolve_frames(xs, width as usize, height as usize), "bounds-checked-convolution")
        }
        CaseParams::TrialDivision { k } => r(i64::from(nth_prime_sieve(k)), "sieve-of-eratosthenes"),
    }
}

fn fib_iterative(n: u32) -> i64 {
    let (mut a, mut b) = (0i64, 1i64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

fn collision_pairs(xs: &[i32]) -> i64 {
    let circles: Vec<[i64; 3]> = xs
        .chunks_exact(3)
        .map(|c| [i64::from(c[0]), i64::from(c[1]), i64::from(c[2])])
        .collect();
    let mut hits = 0;
    for (i, a) in circles.iter().enumerate() {
        for b in &circles[i + 1..] {
            let (dx, dy, rs) = (a[0] - b[0], a[1] - b[1], a[2] + b[2]);
            if dx * dx + dy * dy < rs * rs {
                hits += 1;
            }
        }
    }
    hits
}

fn position_checksum(v: &[i32]) -> i64 {
    v.iter().enumerate().fold(0i64, |s, (i, &x)| {
        s.wrapping_add(i64::from(x).wrapping_mul(i as i64 % 7 + 1))
    })
}

const KERNEL: [[i32; 3]; 3] = [[1, 2, 1], [2, 4, 2], [1, 2, 1]];

fn convolve_frames(xs: &[i32], w: usize, h: usize) -> i64 {
    let mut sum = 0i64;
    for frame in xs.chunks_exact(w * h) {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0;
                for (dy, row) in KERNEL.iter().enumerate() {
                    for (dx, k) in row.iter().enumerate() {
                        let (yy, xx) = (y + dy as isize - 1, x + dx as isize - 1);
                        if (0..h as isize).contains(&yy) && (0..w as isize).contains(&xx) {
                            acc += k * frame[yy as usize * w + xx as usize];
                        }
                    }
                }
                sum = sum.wrapping_add(i64::from(acc / 16));
            }
        }
    }
    sum
}

fn nth_prime_sieve(k: u32) -> u32 {
    let k = k as usize;
    let mut limit = 64usize;
    loop {
        let mut composite = vec![false; limit + 1];
        let mut seen = 0;
        for n in 2..=limit {
            if composite[n] {
                continue;
            }
            seen += 1;
            if seen == k {
                return n as u32;
            }
            for m in (n * n..=limit).step_by(n) {
                composite[m] = true;
            }
        }
        limit *= 2;
    }
}

// ---------------------------------------------------------------- kernels

const STATE: u32 = 0;
const CURSOR: u32 = 1;

struct Kernel {
    params: CaseParams,
    seed: u32,
    inputs: Option<Vec<i32>>,
    b: ModuleBuilder,
    /// Input region for overrides, after the working region.
    input_base: u32,
}

/// `i = start; while i < end { body; i += 1 }` with signed compare.
fn for_range(i: u32, start: Vec<Instr>, end: Vec<Instr>, body: Vec<Instr>) -> Vec<Instr> {
    let mut v = start;
    v.push(LocalSet(i));
    v.extend([Block(Empty), Loop(Empty), LocalGet(i)]);
    v.extend(end);
    v.extend([Num(I32GeS), BrIf(1)]);
    v.extend(body);
    v.extend([LocalGet(i), I32Const(1), Num(I32Add), LocalSet(i), Br(0), End, End]);
    v
}

fn load32(offset: u32) -> Instr {
    Load(LoadOp::I32Load, MemArg::new(2, offset))
}

fn store32(offset: u32) -> Instr {
    Store(StoreOp::I32Store, MemArg::new(2, offset))
}

impl Kernel {
    fn new(params: CaseParams, seed: u32, inputs: Option<Vec<i32>>) -> Result<Self, CaseError> {
        let work = params.work_bytes();
        let input_base = work.next_multiple_of(16);
        let total = input_base + inputs.as_ref().map_or(0, |v| 4 * v.len());
        let pages = total.div_ceil(PAGE_SIZE).max(1) as u32;
        if pages > MAX_CASE_PAGES {
            return Err(CaseError::TooLarge(pages));
        }
        let mut b = ModuleBuilder::new();
        if params.input_len() > 0 {
            b.memory(pages, Some(pages));
            b.global(ValType::I32, true, ConstExpr::I32(0));
            b.global(ValType::I32, true, ConstExpr::I32(0));
            b.export("memory", ExportKind::Memory, 0);
        }
        Ok(Kernel { params, seed, inputs, b, input_base: input_base as u32 })
    }

    /// One `next_*` function per distinct draw, in `draws()` order.
    fn next_funcs(&mut self) -> Vec<u32> {
        let ty = FuncType::new([], [ValType::I32]);
        let draws = self.params.draws();
        let mut out: Vec<u32> = Vec::new();
        let mut made: Vec<(Draw, u32)> = Vec::new();
        for &d in draws {
            if let Some(&(_, f)) = made.iter().find(|(m, _)| *m == d) {
                out.push(f);
                continue;
            }
            let body = if self.inputs.is_some() {
                vec![
                    GlobalGet(CURSOR),
                    load32(self.input_base),
                    GlobalGet(CURSOR),
                    I32Const(4),
                    Num(I32Add),
                    GlobalSet(CURSOR),
                ]
            } else {
                let mut v = vec![
                    GlobalGet(STATE),
                    I32Const(LCG_MULTIPLIER as i32),
                    Num(I32Mul),
                    I32Const(LCG_INCREMENT as i32),
                    Num(I32Add),
                    I32Const(LCG_MASK as i32),
                    Num(I32And),
                    GlobalSet(STATE),
                    GlobalGet(STATE),
                ];
                v.extend(d.instrs());
                v
            };
            let f = self.b.func(ty.clone(), vec![], body);
            made.push((d, f));
            out.push(f);
        }
        out
    }

    /// Resets the input stream at the top of `run`.
    fn prologue(&self) -> Vec<Instr> {
        if self.params.input_len() == 0 {
            return vec![];
        }
        vec![
            I32Const(self.seed as i32 & LCG_MASK as i32),
            GlobalSet(STATE),
            I32Const(0),
            GlobalSet(CURSOR),
        ]
    }

    fn emit(mut self) -> Module {
        let next = self.next_funcs();
        let mut body = self.prologue();
        let (locals, kernel) = match self.params {
            CaseParams::Fibonacci { n } => {
                let fib = self.fib();
                self.b.export_func("fib", fib);
                (vec![], vec![I32Const(n as i32), Call(fib), Num(I64ExtendI32U)])
            }
            CaseParams::Collision { count } => collision(count, &next),
            CaseParams::MultiplyIntVec { len } => multiply(len, next[0]),
            CaseParams::QuicksortInt { len } => {
                let (qs, _) = self.quicksort_funcs();
                quicksort_run(len, next[0], qs)
            }
            CaseParams::ImageThreshold { width, height, threshold } => {
                image(width * height, threshold, next[0])
            }
            CaseParams::VideoConvolute { frames, width, height } => {
                video(frames, width, height, next[0])
            }
            CaseParams::TrialDivision { k } => trial_division(k),
        };
        body.extend(kernel);
        let run = self.b.func(FuncType::new([], [ValType::I64]), locals, body);
        self.b.export_func(ENTRY, run);
        if let Some(v) = self.inputs.as_ref().filter(|v| !v.is_empty()) {
            let bytes = v.iter().flat_map(|x| x.to_le_bytes()).collect();
            self.b.data(self.input_base, bytes);
        }
        self.b.finish()
    }

    fn fib(&mut self) -> u32 {
        let f = self.b.declare(FuncType::new([ValType::I32], [ValType::I32]));
        self.b.define(
            f,
            vec![],
            vec![
                LocalGet(0),
                I32Const(2),
                Num(I32LtS),
                If(BlockType::Value(ValType::I32)),
                LocalGet(0),
                Else,
                LocalGet(0),
                I32Const(1),
                Num(I32Sub),
                Call(f),
                LocalGet(0),
                I32Const(2),
                Num(I32Sub),
                Call(f),
                Num(I32Add),
                End,
            ],
        );
        f
    }

    /// Returns `(quicksort, partition)`.
    fn quicksort_funcs(&mut self) -> (u32, u32) {
        let ii_i = FuncType::new([ValType::I32, ValType::I32], [ValType::I32]);
        let part = self.b.declare(ii_i);
        // params lo=0 hi=1; pivot=2 i=3 j=4 tmp=5
        let (lo, hi, pivot, i, j, tmp) = (0, 1, 2, 3, 4, 5);
        let mut body = vec![LocalGet(hi), I32Const(4), Num(I32Mul), load32(0), LocalSet(pivot)];
        body.extend([LocalGet(lo), LocalSet(i)]);
        body.extend(for_range(
            j,
            vec![LocalGet(lo)],
            vec![LocalGet(hi)],
            vec![
                LocalGet(j),
                I32Const(4),
                Num(I32Mul),
                load32(0),
                LocalGet(pivot),
                Num(I32LtS),
                If(Empty),
                // tmp = a[i]; a[i] = a[j]; a[j] = tmp; i++
                LocalGet(i),
                I32Const(4),
                Num(I32Mul),
                load32(0),
                LocalSet(tmp),
                LocalGet(i),
                I32Const(4),
                Num(I32Mul),
                LocalGet(j),
                I32Const(4),
                Num(I32Mul),
                load32(0),
                store32(0),
                LocalGet(j),
                I32Const(4),
                Num(I32Mul),
                LocalGet(tmp),
                store32(0),
                LocalGet(i),
                I32Const(1),
                Num(I32Add),
                LocalSet(i),
                End,
            ],
        ));
        body.extend([
            LocalGet(i),
            I32Const(4),
            Num(I32Mul),
            load32(0),
            LocalSet(tmp),
            LocalGet(i),
            I32Const(4),
            Num(I32Mul),
            LocalGet(hi),
            I32Const(4),
            Num(I32Mul),
            load32(0),
            store32(0),
            LocalGet(hi),
            I32Const(4),
            Num(I32Mul),
            LocalGet(tmp),
            store32(0),
            LocalGet(i),
        ]);
        self.b.define(part, vec![ValType::I32; 4], body);

        let qs = self.b.declare(FuncType::new([ValType::I32, ValType::I32], []));
        let p = 2;
        self.b.define(
            qs,
            vec![ValType::I32],
            vec![
                Block(Empty),
                Loop(Empty),
                LocalGet(lo),
                LocalGet(hi),
                Num(I32GeS),
                BrIf(1),
                LocalGet(lo),
                LocalGet(hi),
                Call(part),
                LocalSet(p),
                // recurse into the smaller side, iterate on the larger
                LocalGet(p),
                LocalGet(lo),
                Num(I32Sub),
                LocalGet(hi),
                LocalGet(p),
                Num(I32Sub),
                Num(I32LtS),
                If(Empty),
                LocalGet(lo),
                LocalGet(p),
                I32Const(1),
                Num(I32Sub),
                Call(qs),
                LocalGet(p),
                I32Const(1),
                Num(I32Add),
                LocalSet(lo),
                Else,
                LocalGet(p),
                I32Const(1),
                Num(I32Add),
                LocalGet(hi),
                Call(qs),
                LocalGet(p),
                I32Const(1),
                Num(I32Sub),
                LocalSet(hi),
                End,
                Br(0),
                End,
                End,
            ],
        );
        (qs, part)
    }
}

/// `for i in 0..n { mem32[i*4] = next() }`
fn fill_words(i: u32, n: u32, next: u32) -> Vec<Instr> {
    for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(n as i32)],
        vec![LocalGet(i), I32Const(4), Num(I32Mul), Call(next), store32(0)],
    )
}

fn collision(count: u32, next: &[u32]) -> (Vec<ValType>, Vec<Instr>) {
    use ValType::{I32, I64};
    let (i, j, hits, ai, aj) = (0, 1, 2, 3, 4);
    let locals = vec![I32, I32, I64, I32, I32];
    let mut v = for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(count as i32)],
        vec![
            LocalGet(i),
            I32Const(12),
            Num(I32Mul),
            LocalSet(ai),
            LocalGet(ai),
            Call(next[0]),
            store32(0),
            LocalGet(ai),
            Call(next[1]),
            store32(4),
            LocalGet(ai),
            Call(next[2]),
            store32(8),
        ],
    );
    // component k of circles i and j, as i64, combined with `op`
    let pair = |k: u32, op: NumOp| {
        vec![LocalGet(ai), load32(4 * k), LocalGet(aj), load32(4 * k), Num(op), Num(I64ExtendI32S)]
    };
    let mut inner = vec![LocalGet(j), I32Const(12), Num(I32Mul), LocalSet(aj), LocalGet(hits)];
    // dx*dx + dy*dy < (r1+r2)^2
    inner.extend(pair(0, I32Sub));
    inner.extend(pair(0, I32Sub));
    inner.push(Num(I64Mul));
    inner.extend(pair(1, I32Sub));
    inner.extend(pair(1, I32Sub));
    inner.extend([Num(I64Mul), Num(I64Add)]);
    inner.extend(pair(2, I32Add));
    inner.extend(pair(2, I32Add));
    inner.extend([Num(I64Mul), Num(I64LtS), Num(I64ExtendI32U), Num(I64Add), LocalSet(hits)]);
    v.extend(for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(count as i32)],
        [
            vec![LocalGet(i), I32Const(12), Num(I32Mul), LocalSet(ai)],
            for_range(
                j,
                vec![LocalGet(i), I32Const(1), Num(I32Add)],
                vec![I32Const(count as i32)],
                inner,
            ),
        ]
        .concat(),
    ));
    v.push(LocalGet(hits));
    (locals, v)
}

fn multiply(len: u32, next: u32) -> (Vec<ValType>, Vec<Instr>) {
    let (i, sum) = (0, 1);
    let mut v = fill_words(i, 2 * len, next);
    v.extend(for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(len as i32)],
        vec![
            LocalGet(sum),
            LocalGet(i),
            I32Const(4),
            Num(I32Mul),
            load32(0),
            LocalGet(i),
            I32Const(4),
            Num(I32Mul),
            load32(4 * len),
            Num(I32Mul),
            Num(I64ExtendI32S),
            Num(I64Add),
            LocalSet(sum),
        ],
    ));
    v.push(LocalGet(sum));
    (vec![ValType::I32, ValType::I64], v)
}

fn quicksort_run(len: u32, next: u32, qs: u32) -> (Vec<ValType>, Vec<Instr>) {
    let (i, sum) = (0, 1);
    let mut v = fill_words(i, len, next);
    v.extend([I32Const(0), I32Const(len as i32 - 1), Call(qs)]);
    v.extend(for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(len as i32)],
        vec![
            LocalGet(sum),
            LocalGet(i),
            I32Const(4),
            Num(I32Mul),
            load32(0),
            Num(I64ExtendI32S),
            LocalGet(i),
            I32Const(7),
            Num(I32RemU),
            I32Const(1),
            Num(I32Add),
            Num(I64ExtendI32U),
            Num(I64Mul),
            Num(I64Add),
            LocalSet(sum),
        ],
    ));
    v.push(LocalGet(sum));
    (vec![ValType::I32, ValType::I64], v)
}

fn image(pixels: u32, threshold: u32, next: u32) -> (Vec<ValType>, Vec<Instr>) {
    let (i, light) = (0, 1);
    let mut v = for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(pixels as i32)],
        vec![LocalGet(i), Call(next), Store(StoreOp::I32Store8, MemArg::new(0, 0))],
    );
    v.extend(for_range(
        i,
        vec![I32Const(0)],
        vec![I32Const(pixels as i32)],
        vec![
            LocalGet(light),
            LocalGet(i),
            Load(LoadOp::I32Load8U, MemArg::new(0, 0)),
            I32Const(threshold as i32),
            Num(I32GeU),
            Num(I32Add),
            LocalSet(light),
        ],
    ));
    v.extend([LocalGet(light), Num(I64ExtendI32U)]);
    (vec![ValType::I32, ValType::I32], v)
}

fn video(frames: u32, width: u32, height: u32, next: u32) -> (Vec<ValType>, Vec<Instr>) {
    use ValType::{I32, I64};
    let (f, y, x, base, acc, sum) = (0, 1, 2, 3, 4, 5);
    let stride = width + 2;
    let row_base = |y: u32, x: u32| {
        vec![LocalGet(y), I32Const(stride as i32), Num(I32Mul), LocalGet(x), Num(I32Add)]
    };
    // frame pixels live inside a zero border one pixel wide
    let fill = for_range(
        y,
        vec![I32Const(0)],
        vec![I32Const(height as i32)],
        for_range(
            x,
            vec![I32Const(0)],
            vec![I32Const(width as i32)],
            [
                row_base(y, x),
                vec![Call(next), Store(StoreOp::I32Store8, MemArg::new(0, stride + 1))],
            ]
            .concat(),
        ),
    );
    let mut taps = vec![I32Const(0)];
    for (dy, row) in KERNEL.iter().enumerate() {
        for (dx, k) in row.iter().enumerate() {
            let off = dy as u32 * stride + dx as u32;
            taps.extend([
                LocalGet(base),
                Load(LoadOp::I32Load8U, MemArg::new(0, off)),
                I32Const(*k),
                Num(I32Mul),
                Num(I32Add),
            ]);
        }
    }
    let mut pixel = row_base(y, x);
    pixel.push(LocalSet(base));
    pixel.extend(taps);
    pixel.extend([
        LocalSet(acc),
        LocalGet(sum),
        LocalGet(acc),
        I32Const(16),
        Num(I32DivU),
        Num(I64ExtendI32U),
        Num(I64Add),
        LocalSet(sum),
    ]);
    let convolve = for_range(
        y,
        vec![I32Const(0)],
        vec![I32Const(height as i32)],
        for_range(x, vec![I32Const(0)], vec![I32Const(width as i32)], pixel),
    );
    let mut v = for_range(
        f,
        vec![I32Const(0)],
        vec![I32Const(frames as i32)],
        [fill, convolve].concat(),
    );
    v.push(LocalGet(sum));
    (vec![I32, I32, I32, I32, I32, I64], v)
}

fn trial_division(k: u32) -> (Vec<ValType>, Vec<Instr>) {
    let (found, n, d, prime) = (0, 1, 2, 3);
    let v = vec![
        I32Const(1),
        LocalSet(n),
        Loop(Empty),
        LocalGet(n),
        I32Const(1),
        Num(I32Add),
        LocalSet(n),
        I32Const(1),
        LocalSet(prime),
        I32Const(2),
        LocalSet(d),
        Block(Empty),
        Loop(Empty),
        LocalGet(d),
        LocalGet(d),
        Num(I32Mul),
        LocalGet(n),
        Num(I32GtU),
        BrIf(1),
        LocalGet(n),
        LocalGet(d),
        Num(I32RemU),
        Num(I32Eqz),
        If(Empty),
        I32Const(0),
        LocalSet(prime),
        Br(2),
        End,
        LocalGet(d),
        I32Const(1),
        Num(I32Add),
        LocalSet(d),
        Br(0),
        End,
        End,
        LocalGet(found),
        LocalGet(prime),
        Num(I32Add),
        LocalTee(found),
        I32Const(k as i32),
        Num(I32LtU),
        BrIf(0),
        End,
        LocalGet(n),
        Num(I64ExtendI32U),
    ];
    (vec![ValType::I32; 4], v)
}
