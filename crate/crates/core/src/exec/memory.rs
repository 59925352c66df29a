// SPDX-License-Identifier: Apache-2.0

use crate::model::Limits;

use super::TrapKind;

pub const PAGE_SIZE: usize = 65536;

/// Default host ceiling on memory size: 64 MiB.
pub const DEFAULT_MEMORY_CAP_PAGES: u32 = 1024;

/// A page-granular, little-endian byte array.
#[derive(Debug, Clone)]
pub struct LinearMemoryInstance {
    bytes: Vec<u8>,
    limits: Limits,
    cap_pages: u32,
}

impl LinearMemoryInstance {
    /// Allocates `limits.min` zeroed pages. Returns `None` if that exceeds
    /// the host cap.
    pub fn new(limits: Limits, cap_pages: u32) -> Option<Self> {
        if limits.min > cap_pages {
            return None;
        }
        Some(LinearMemoryInstance {
            bytes: vec![0; limits.min as usize * PAGE_SIZE],
            limits,
            cap_pages,
        })
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn pages(&self) -> u32 {
        (self.bytes.len() / PAGE_SIZE) as u32
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.bytes
    }

    /// Returns the previous page count, or -1 leaving memory unchanged.
    pub fn grow(&mut self, delta: u32) -> i32 {
        let old = self.pages();
        let max = self.limits.max.unwrap_or(u32::MAX).min(self.cap_pages);
        match old.checked_add(delta) {
            Some(new) if new <= max => {
                self.bytes.resize(new as usize * PAGE_SIZE, 0);
                old as i32
            }
            _ => -1,
        }
    }

    #[inline]
    fn range(&self, addr: u64, len: usize) -> Result<std::ops::Range<usize>, TrapKind> {
        let end = addr + len as u64;
        if end > self.bytes.len() as u64 {
            return Err(TrapKind::OobMemory);
        }
        Ok(addr as usize..end as usize)
    }

    /// Borrows `len` bytes at `addr`.
    pub fn slice(&self, addr: u64, len: usize) -> Result<&[u8], TrapKind> {
        let r = self.range(addr, len)?;
        Ok(&self.bytes[r])
    }

    pub fn slice_mut(&mut self, addr: u64, len: usize) -> Result<&mut [u8], TrapKind> {
        let r = self.range(addr, len)?;
        Ok(&mut self.bytes[r])
    }

    /// Reads `width` bytes little-endian, zero-extended.
    #[inline]
    pub fn load(&self, addr: u64, width: u32) -> Result<u64, TrapKind> {
        let r = self.range(addr, width as usize)?;
        let b = &self.bytes[r];
        Ok(match width {
            1 => u64::from(b[0]),
            2 => u64::from(u16::from_le_bytes([b[0], b[1]])),
            4 => u64::from(u32::from_le_bytes(b.try_into().expect("4 bytes"))),
            _ => u64::from_le_bytes(b.try_into().expect("8 bytes")),
        })
    }

    /// Writes the low `width` bytes of `value` little-endian. Nothing is
    /// written if any byte would fall outside memory.
    #[inline]
    pub fn store(&mut self, addr: u64, width: u32, value: u64) -> Result<(), TrapKind> {
        let r = self.range(addr, width as usize)?;
        self.bytes[r].copy_from_slice(&value.to_le_bytes()[..width as usize]);
        Ok(())
    }
}
