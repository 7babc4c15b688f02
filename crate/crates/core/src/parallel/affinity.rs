//! Core pinning and scheduling priority for the calling thread.
//!
//! Requests never fail the run: each one is reported as granted, denied or
//! not requested, and the worker carries on unpinned when denied.

use serde::Serialize;

use super::plan::PriorityHint;

/// Nice value requested for elevated workers.
pub const ELEVATED_NICE: i32 = -5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum Outcome {
    NotRequested,
    Granted,
    Denied(String),
}

impl Outcome {
    pub fn is_denied(&self) -> bool {
        matches!(self, Outcome::Denied(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PinReport {
    pub worker: usize,
    pub requested_core: Option<usize>,
    pub affinity: Outcome,
    pub priority: Outcome,
    /// Core the worker was running on right after the requests, where the
    /// platform can tell.
    pub observed_core: Option<usize>,
}

impl PinReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Outcome::Denied(why) = &self.affinity {
            out.push(format!(
                "worker {}: pinning to core {:?} denied: {why}",
                self.worker, self.requested_core
            ));
        }
        if let Outcome::Denied(why) = &self.priority {
            out.push(format!(
                "worker {}: priority elevation denied: {why}",
                self.worker
            ));
        }
        out
    }
}

/// Number of online logical cores.
pub fn logical_cores() -> usize {
    #[cfg(target_os = "linux")]
    {
        // SAFETY: sysconf has no preconditions.
        let n = unsafe { libc::sysconf(libc::_SC_NPROCESSORS_ONLN) };
        if n > 0 {
            return n as usize;
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Core the calling thread is executing on.
pub fn current_core() -> Option<usize> {
    #[cfg(target_os = "linux")]
    {
        // SAFETY: sched_getcpu has no preconditions.
        let c = unsafe { libc::sched_getcpu() };
        if c >= 0 {
            return Some(c as usize);
        }
    }
    None
}

/// Pins the calling thread to `core_id` and applies the priority hint.
pub fn pin_and_prioritize(worker: usize, core_id: Option<usize>, hint: PriorityHint) -> PinReport {
    let affinity = match core_id {
        None => Outcome::NotRequested,
        Some(core) => pin_current(core),
    };
    let priority = match hint {
        PriorityHint::Normal => Outcome::NotRequested,
        PriorityHint::Elevated => elevate_current(),
    };
    PinReport {
        worker,
        requested_core: core_id,
        affinity,
        priority,
        observed_core: current_core(),
    }
}

#[cfg(target_os = "linux")]
fn pin_current(core: usize) -> Outcome {
    let available = logical_cores();
    if core >= available {
        return Outcome::Denied(format!(
            "core {core} out of range ({available} logical cores)"
        ));
    }
    if core >= libc::CPU_SETSIZE as usize {
        return Outcome::Denied(format!("core {core} exceeds CPU_SETSIZE"));
    }
    // SAFETY: cpu_set_t is plain data; pid 0 is the calling thread.
    let ret = unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set)
    };
    if ret == 0 {
        Outcome::Granted
    } else {
        Outcome::Denied(std::io::Error::last_os_error().to_string())
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_current(core: usize) -> Outcome {
    let _ = core;
    Outcome::Denied("core pinning not supported on this platform".into())
}

#[cfg(target_os = "linux")]
fn elevate_current() -> Outcome {
    // SAFETY: gettid/setpriority have no memory preconditions; on Linux the
    // PRIO_PROCESS target may be a thread id.
    let ret = unsafe {
        let tid = libc::gettid();
        libc::setpriority(libc::PRIO_PROCESS, tid as libc::id_t, ELEVATED_NICE)
    };
    if ret == 0 {
        Outcome::Granted
    } else {
        Outcome::Denied(std::io::Error::last_os_error().to_string())
    }
}

#[cfg(not(target_os = "linux"))]
fn elevate_current() -> Outcome {
    Outcome::Denied("priority elevation not supported on this platform".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_requested() {
        let r = pin_and_prioritize(3, None, PriorityHint::Normal);
        assert_eq!(r.affinity, Outcome::NotRequested);
        assert_eq!(r.priority, Outcome::NotRequested);
        assert!(r.warnings().is_empty());
    }

    #[test]
    fn out_of_range_core_is_denied() {
        let core = logical_cores() + 7;
        let r = std::thread::spawn(move || pin_and_prioritize(0, Some(core), PriorityHint::Normal))
            .join()
            .unwrap();
        assert!(r.affinity.is_denied());
        assert_eq!(r.warnings().len(), 1);
    }

    #[test]
    fn pin_to_core_zero() {
        let r = std::thread::spawn(|| {
            let r = pin_and_prioritize(0, Some(0), PriorityHint::Normal);
            let later: Vec<_> = (0..50).map(|_| current_core()).collect();
            (r, later)
        })
        .join()
        .unwrap();
        let (report, later) = r;
        if report.affinity == Outcome::Granted && cfg!(target_os = "linux") {
            assert_eq!(report.observed_core, Some(0));
            assert!(later.iter().all(|c| *c == Some(0)));
        }
    }

    #[test]
    fn elevation_is_reported_either_way() {
        let r = std::thread::spawn(|| pin_and_prioritize(0, None, PriorityHint::Elevated))
            .join()
            .unwrap();
        assert_ne!(r.priority, Outcome::NotRequested);
    }
}
