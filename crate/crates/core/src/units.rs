//! Integer byte and millisecond units.
//!
//! All memory quantities are whole bytes; "MB" and "GB" throughout the
//! project mean the binary units 2^20 and 2^30 bytes.

use serde::{Deserialize, Serialize};
use std::fmt;

/// 2^20 bytes.
pub const MIB: u64 = 1 << 20;
/// 2^30 bytes.
pub const GIB: u64 = 1 << 30;

/// Simulated time in milliseconds.
pub type Millis = u64;

/// A non-negative amount of memory in whole bytes.
///
/// Arithmetic never wraps silently: callers use `checked_add` where an
/// overflow would be a logic error, and `saturating_add` only where the
/// result is clamped to a configured bound immediately afterwards.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MemBytes(pub u64);

impl MemBytes {
    pub const ZERO: MemBytes = MemBytes(0);

    pub const fn new(bytes: u64) -> Self {
        MemBytes(bytes)
    }

    pub const fn from_mib(mib: u64) -> Self {
        MemBytes(mib * MIB)
    }

    pub const fn from_gib(gib: u64) -> Self {
        MemBytes(gib * GIB)
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Rounds a real byte count up to whole bytes, clamping negatives to 0.
    pub fn from_f64_ceil(v: f64) -> Self {
        if v.is_nan() || v <= 0.0 {
            return MemBytes(0);
        }
        if v >= u64::MAX as f64 {
            return MemBytes(u64::MAX);
        }
        MemBytes(v.ceil() as u64)
    }

    pub fn checked_add(self, rhs: MemBytes) -> Option<MemBytes> {
        self.0.checked_add(rhs.0).map(MemBytes)
    }

    pub fn saturating_add(self, rhs: MemBytes) -> MemBytes {
        MemBytes(self.0.saturating_add(rhs.0))
    }

    pub fn saturating_sub(self, rhs: MemBytes) -> MemBytes {
        MemBytes(self.0.saturating_sub(rhs.0))
    }

    pub fn clamp_to(self, lo: MemBytes, hi: MemBytes) -> MemBytes {
        MemBytes(self.0.clamp(lo.0, hi.0))
    }
}

impl fmt::Display for MemBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 >= GIB && self.0.is_multiple_of(GIB) {
            write!(f, "{}GiB", self.0 / GIB)
        } else if self.0 >= MIB && self.0.is_multiple_of(MIB) {
            write!(f, "{}MiB", self.0 / MIB)
        } else {
            write!(f, "{}B", self.0)
        }
    }
}

/// A non-negative input-data size in whole bytes.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct InputBytes(pub u64);

impl InputBytes {
    pub const fn new(bytes: u64) -> Self {
        InputBytes(bytes)
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl fmt::Display for InputBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}B", self.0)
    }
}
