//! Reference simulator and interactive debugger.

pub mod debugger;
pub mod elab;
pub mod machine;
pub mod value;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

pub use debugger::{
    run_to_completion, start_session, ActionPolicy, DebugSession, FsmState, ScriptPolicy, Session, SessionError,
    SessionView,
};
pub use elab::{elaborate, Design, ElabError};
pub use value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub clock_period: u64,
    pub total_time: u64,
    /// Samples earlier than this are ignored by comparisons.
    pub reset_window: u64,
    /// Wall-clock budget for a single RunAll or Step.
    pub action_budget: Duration,
    /// Iteration limit for one execution of a `for` loop.
    pub loop_cap: u32,
    /// Whether Step stops inside instantiated submodules.
    pub step_into_instances: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            clock_period: 10,
            total_time: 400,
            reset_window: 100,
            action_budget: Duration::from_secs(30),
            loop_cap: 1 << 16,
            step_into_instances: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.clock_period < 2 {
            return Err("clock period must be at least 2".into());
        }
        if self.total_time <= self.reset_window {
            return Err("total simulation time must exceed the reset window".into());
        }
        Ok(())
    }
}

/// Deliberate defects that turn the reference debugger into a test target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fault {
    /// F1: breakpoints on non-executable lines are not moved; they stay unset.
    NoSliding,
    /// F2: non-blocking assignments commit immediately.
    NonBlockingAsBlocking,
    /// F3: pause events report the line after the real one.
    PauseLineOffByOne,
    /// F4: breakpoint lines added while folded are taken as source lines.
    FoldIgnoresView,
    /// F5: a breakpoint inside a loop does not fire on the first iteration.
    LoopFirstHitSkipped,
}

impl Fault {
    pub const ALL: [Fault; 5] = [
        Fault::NoSliding,
        Fault::NonBlockingAsBlocking,
        Fault::PauseLineOffByOne,
        Fault::FoldIgnoresView,
        Fault::LoopFirstHitSkipped,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Fault::NoSliding => "F1",
            Fault::NonBlockingAsBlocking => "F2",
            Fault::PauseLineOffByOne => "F3",
            Fault::FoldIgnoresView => "F4",
            Fault::LoopFirstHitSkipped => "F5",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fault::ALL
            .into_iter()
            .find(|f| f.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown fault '{s}' (expected F1..F5)"))
    }
}

pub type FaultSet = BTreeSet<Fault>;
