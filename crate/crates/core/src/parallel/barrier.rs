//! Reusable rendezvous barrier.

use std::hint;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

#[derive(Default)]
#[repr(align(128))]
struct Padded<T>(T);

/// Counter/generation barrier that spins briefly, then yields.
///
/// Every store made before [`wait`](Self::wait) by any party is visible to
/// every party after it returns.
pub struct SpinBarrier {
    parties: usize,
    spins: u32,
    count: Padded<AtomicUsize>,
    generation: Padded<AtomicUsize>,
}

impl SpinBarrier {
    pub fn new(parties: usize) -> Self {
        assert!(parties > 0);
        // with fewer cores than parties, spinning only delays the peers
        let cores = thread::available_parallelism().map_or(1, |n| n.get());
        let spins = if cores >= parties { 1 << 12 } else { 16 };
        Self {
            parties,
            spins,
            count: Padded(AtomicUsize::new(0)),
            generation: Padded(AtomicUsize::new(0)),
        }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// Blocks until all parties have arrived. Returns `true` for exactly one
    /// party per round.
    pub fn wait(&self) -> bool {
        if self.parties == 1 {
            std::sync::atomic::fence(Ordering::SeqCst);
            return true;
        }
        let gen = self.generation.0.load(Ordering::Acquire);
        if self.count.0.fetch_add(1, Ordering::AcqRel) + 1 == self.parties {
            self.count.0.store(0, Ordering::Relaxed);
            self.generation
                .0
                .store(gen.wrapping_add(1), Ordering::Release);
            return true;
        }
        let mut spins = 0u32;
        while self.generation.0.load(Ordering::Acquire) == gen {
            if spins < self.spins {
                spins += 1;
                hint::spin_loop();
            } else {
                thread::yield_now();
            }
        }
        false
    }
}
