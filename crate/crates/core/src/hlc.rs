//! Hybrid logical clock, one per server.
//!
//! The physical clock reading is passed in on every call; the clock never
//! reads time on its own, which keeps simulated runs reproducible.

use crate::model::HlcTimestamp;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HlcState {
    current: HlcTimestamp,
}

impl HlcState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(current: HlcTimestamp) -> Self {
        Self { current }
    }

    pub fn current(&self) -> HlcTimestamp {
        self.current
    }

    /// Timestamp for a new write whose dependencies top out at `dt`.
    ///
    /// The result is strictly greater than both `dt` and the previous value.
    pub fn update_for_put(&mut self, pc: u64, dt: HlcTimestamp) -> HlcTimestamp {
        let prev = self.current;
        let l = prev.l.max(pc).max(dt.l);
        let c = if l == prev.l && l == dt.l {
            prev.c.max(dt.c) + 1
        } else if l == prev.l {
            prev.c + 1
        } else if l == dt.l {
            dt.c + 1
        } else {
            0
        };
        self.current = HlcTimestamp { l, c };
        self.current
    }

    /// Local event without a received timestamp (heartbeats).
    pub fn tick(&mut self, pc: u64) -> HlcTimestamp {
        let prev = self.current;
        let l = prev.l.max(pc);
        let c = if l == prev.l { prev.c + 1 } else { 0 };
        self.current = HlcTimestamp { l, c };
        self.current
    }
}
