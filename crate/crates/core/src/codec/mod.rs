// SPDX-License-Identifier: Apache-2.0

//! WebAssembly binary format, version 1.

mod cursor;
mod decode;
mod encode;

pub use cursor::{write_sleb128, write_uleb128, ByteCursor, DecodeResult, MalformedError, MalformedKind};
pub use decode::{decode_module, ModuleReader, Payload, MAGIC, MAX_INPUT_LEN, MAX_LOCALS, VERSION};
pub use encode::{encode_module, EncodeError};
