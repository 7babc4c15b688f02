//! Assignment of state components to workers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::STATE_DIM;

/// Worker counts with a predefined grouping.
pub const SUPPORTED_WORKER_COUNTS: [usize; 4] = [1, 2, 4, 8];

/// Named component groupings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    /// Each worker owns whole bodies: with four workers, one second-order
    /// equation (displacement and velocity) per worker.
    BodyWise,
    /// Worker `i` of four owns equations `i` and `i + 4`, i.e. one
    /// displacement of one body and one velocity of another.
    Interleaved,
}

impl PlanKind {
    pub const ALL: [PlanKind; 2] = [PlanKind::BodyWise, PlanKind::Interleaved];

    pub fn name(self) -> &'static str {
        match self {
            PlanKind::BodyWise => "body-wise",
            PlanKind::Interleaved => "interleaved",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorityHint {
    #[default]
    Normal,
    Elevated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerPlan {
    /// Zero-based state indices owned by each worker.
    pub groups: Vec<Vec<usize>>,
    /// Core id per worker, when pinning is requested.
    pub core_assignment: Option<Vec<usize>>,
    pub priority_hint: PriorityHint,
}

impl WorkerPlan {
    pub fn from_groups(groups: Vec<Vec<usize>>) -> Result<Self> {
        let plan = Self {
            groups,
            core_assignment: None,
            priority_hint: PriorityHint::Normal,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn workers(&self) -> usize {
        self.groups.len()
    }

    /// Pin worker `i` to core `i`.
    pub fn pinned(mut self) -> Self {
        self.core_assignment = Some((0..self.groups.len()).collect());
        self
    }

    pub fn with_priority(mut self, hint: PriorityHint) -> Self {
        self.priority_hint = hint;
        self
    }

    /// Owning worker of each state component.
    pub fn owners(&self) -> [usize; STATE_DIM] {
        let mut owners = [usize::MAX; STATE_DIM];
        for (w, g) in self.groups.iter().enumerate() {
            for &i in g {
                owners[i] = w;
            }
        }
        owners
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidPlan("plan has no workers".into()));
        }
        let mut seen = [false; STATE_DIM];
        for (w, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidPlan(format!("worker {w} owns no components")));
            }
            for &i in g {
                if i >= STATE_DIM {
                    return Err(Error::InvalidPlan(format!(
                        "worker {w}: component {i} out of range"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPlan(format!(
                        "component {i} assigned to more than one worker"
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPlan(format!(
                "component {missing} is not assigned"
            )));
        }
        if let Some(cores) = &self.core_assignment {
            if cores.len() != self.groups.len() {
                return Err(Error::InvalidPlan(format!(
                    "{} core ids for {} workers",
                    cores.len(),
                    self.groups.len()
                )));
            }
            let mut sorted = cores.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidPlan("core ids must be distinct".into()));
            }
        }
        Ok(())
    }
}

/// Body-wise plan for `worker_count` workers.
pub fn default_plan(worker_count: usize) -> Result<WorkerPlan> {
    named_plan(PlanKind::BodyWise, worker_count)
}

pub fn named_plan(kind: PlanKind, worker_count: usize) -> Result<WorkerPlan> {
    if !SUPPORTED_WORKER_COUNTS.contains(&worker_count) {
        return Err(Error::InvalidPlan(format!(
            "unsupported worker count {worker_count} (supported: {SUPPORTED_WORKER_COUNTS:?})"
        )));
    }
    let groups: Vec<Vec<usize>> = match kind {
        PlanKind::BodyWise => {
            let width = STATE_DIM / worker_count;
            (0..worker_count)
                .map(|w| (w * width..(w + 1) * width).collect())
                .collect()
        }
        PlanKind::Interleaved => match worker_count {
            1 => vec![(0..STATE_DIM).collect()],
            2 => vec![vec![0, 1, 4, 5], vec![2, 3, 6, 7]],
            4 => (0..4).map(|w| vec![w, w + 4]).collect(),
            _ => (0..STATE_DIM).map(|i| vec![i]).collect(),
        },
    };
    WorkerPlan::from_groups(groups)
}
