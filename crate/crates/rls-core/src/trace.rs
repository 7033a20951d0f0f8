//! Per-iteration trace records and sinks.

use crate::error::Result;

/// One trace row, emitted once per outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub outer_iter: u64,
    /// Cumulative subroutine iterations across all instances.
    pub fom_iters: u64,
    /// Cumulative equivalent data passes.
    pub data_passes: u64,
    /// Objective of the best feasible solution so far.
    pub f_best: f64,
    /// Constraint value of the best solution so far.
    pub g_best: f64,
    /// `max(f_best - f*, g_best)` when the instance carries `f*`.
    pub p_at_fstar: Option<f64>,
    /// Cumulative restart count.
    pub restarts: u64,
    /// Index of the most recent restart, if any.
    pub last_kprime: Option<usize>,
    /// Level parameter of instance zero; constant over a run by construction.
    pub r0: f64,
}

/// Destination for trace rows.
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;
}

/// Collects rows in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<TraceRecord>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }
}

impl TraceSink for MemorySink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }
}

/// Discards rows.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) -> Result<()> {
        Ok(())
    }
}
