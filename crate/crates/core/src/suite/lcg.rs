// SPDX-License-Identifier: Apache-2.0

pub const LCG_MULTIPLIER: u32 = 1_103_515_245;
pub const LCG_INCREMENT: u32 = 12_345;
pub const LCG_MASK: u32 = 0x7FFF_FFFF;

/// `state <- (1103515245 * state + 12345) mod 2^31`; each step yields the
/// new state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lcg {
    state: u32,
}

impl Lcg {
    pub fn new(seed: u32) -> Self {
        Lcg {
            state: seed & LCG_MASK,
        }
    }

    pub fn state(&self) -> u32 {
        self.state
    }
}

impl Iterator for Lcg {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        self.state = LCG_MULTIPLIER
            .wrapping_mul(self.state)
            .wrapping_add(LCG_INCREMENT)
            & LCG_MASK;
        Some(self.state)
    }
}
