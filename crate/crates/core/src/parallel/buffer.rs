//! Shared state slots, one per cache line.

use std::alloc::{self, Layout};
use std::ptr::NonNull;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crate::error::{Error, Result};

/// Default padding granularity in bytes.
pub const DEFAULT_LINE_SIZE: usize = 64;

/// Environment variable overriding the padding granularity.
pub const LINE_SIZE_ENV: &str = "RAILSIM_CACHE_LINE";

/// Line size from [`LINE_SIZE_ENV`] when set and valid, else `fallback`.
pub fn line_size_from_env(fallback: usize) -> usize {
    std::env::var(LINE_SIZE_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| valid_line_size(v))
        .unwrap_or(fallback)
}

pub fn valid_line_size(line: usize) -> bool {
    line >= std::mem::size_of::<AtomicU64>() && line.is_power_of_two()
}

/// `f64` slots, each starting on its own `line_size`-aligned line.
///
/// Values are stored as bit patterns in relaxed atomics; ordering between
/// workers comes from the rendezvous barrier.
pub struct PaddedStateBuffer {
    base: NonNull<u8>,
    layout: Layout,
    slots: usize,
    line_size: usize,
    owners: Option<Vec<usize>>,
    violations: AtomicUsize,
}

// SAFETY: the allocation is only accessed through `AtomicU64` references.
unsafe impl Send for PaddedStateBuffer {}
unsafe impl Sync for PaddedStateBuffer {}

impl PaddedStateBuffer {
    pub fn new(slots: usize, line_size: usize) -> Result<Self> {
        if !valid_line_size(line_size) {
            return Err(Error::InvalidPlan(format!(
                "cache line size {line_size} must be a power of two >= 8"
            )));
        }
        if slots == 0 {
            return Err(Error::InvalidPlan("buffer needs at least one slot".into()));
        }
        let layout = Layout::from_size_align(slots * line_size, line_size)
            .map_err(|e| Error::InvalidPlan(format!("buffer layout: {e}")))?;
        // SAFETY: layout has non-zero size; all-zero bits are a valid AtomicU64.
        let raw = unsafe { alloc::alloc_zeroed(layout) };
        let base = NonNull::new(raw).unwrap_or_else(|| alloc::handle_alloc_error(layout));
        Ok(Self {
            base,
            layout,
            slots,
            line_size,
            owners: None,
            violations: AtomicUsize::new(0),
        })
    }

    /// Enables write tracking: every [`store_as`](Self::store_as) checks the
    /// writer against `owners[slot]` and counts mismatches.
    pub fn with_owners(mut self, owners: Vec<usize>) -> Self {
        assert_eq!(owners.len(), self.slots);
        self.owners = Some(owners);
        self
    }

    pub fn len(&self) -> usize {
        self.slots
    }

    pub fn is_empty(&self) -> bool {
        self.slots == 0
    }

    pub fn line_size(&self) -> usize {
        self.line_size
    }

    #[inline]
    fn slot(&self, i: usize) -> &AtomicU64 {
        assert!(i < self.slots, "slot {i} out of range");
        // SAFETY: offset is inside the allocation and aligned to line_size >= 8.
        unsafe { &*(self.base.as_ptr().add(i * self.line_size) as *const AtomicU64) }
    }

    /// Address of slot `i`, for layout checks.
    pub fn address(&self, i: usize) -> usize {
        self.slot(i) as *const AtomicU64 as usize
    }

    #[inline]
    pub fn load(&self, i: usize) -> f64 {
        f64::from_bits(self.slot(i).load(Ordering::Relaxed))
    }

    #[inline]
    pub fn store(&self, i: usize, value: f64) {
        self.slot(i).store(value.to_bits(), Ordering::Relaxed);
    }

    /// Store on behalf of `worker`, checked against the ownership map when
    /// tracking is enabled.
    #[inline]
    pub fn store_as(&self, worker: usize, i: usize, value: f64) {
        if let Some(owners) = &self.owners {
            if owners[i] != worker {
                self.violations.fetch_add(1, Ordering::Relaxed);
            }
        }
        self.store(i, value);
    }

    pub fn violations(&self) -> usize {
        self.violations.load(Ordering::Relaxed)
    }

    pub fn read_into(&self, out: &mut [f64]) {
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.load(i);
        }
    }
}

impl Drop for PaddedStateBuffer {
    fn drop(&mut self) {
        // SAFETY: allocated in `new` with the same layout.
        unsafe { alloc::dealloc(self.base.as_ptr(), self.layout) }
    }
}

impl std::fmt::Debug for PaddedStateBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PaddedStateBuffer")
            .field("slots", &self.slots)
            .field("line_size", &self.line_size)
            .finish()
    }
}
