//! Training-resident memory accounting: the bytes of every tensor a backward
//! pass will read (forward caches, targets, loss weights) plus auxiliary
//! buffers an iteration holds alive to produce its gradient inputs (PF's
//! rolling frozen-forward window). Datasets themselves are excluded; this is
//! the per-iteration residency the frameworks differ on.

use crate::{CoreError, Result};

#[derive(Debug, Clone, Default)]
pub struct MemoryMeter {
    in_iteration: bool,
    iteration_bytes: u64,
    epoch_peak: u64,
    epoch_peaks: Vec<u64>,
    overall_peak: u64,
}

impl MemoryMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counters reset at iteration start.
    pub fn begin_iteration(&mut self) {
        self.in_iteration = true;
        self.iteration_bytes = 0;
    }

    /// Monotone within an iteration.
    pub fn add(&mut self, bytes: u64) {
        debug_assert!(self.in_iteration, "add() outside an iteration");
        self.iteration_bytes += bytes;
    }

    pub fn end_iteration(&mut self) {
        self.in_iteration = false;
        self.epoch_peak = self.epoch_peak.max(self.iteration_bytes);
        self.overall_peak = self.overall_peak.max(self.iteration_bytes);
    }

    pub fn end_epoch(&mut self) {
        self.epoch_peaks.push(self.epoch_peak);
        self.epoch_peak = 0;
    }

    pub fn peak_bytes(&self) -> u64 {
        self.overall_peak
    }

    pub fn epoch_peaks(&self) -> &[u64] {
        &self.epoch_peaks
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeterRow {
    pub framework: String,
    pub delta: usize,
    pub peak_bytes: u64,
    /// Parameter count of the trained model; rows are only comparable when
    /// they trained the same model on the same data.
    pub model_params: usize,
}

#[derive(Debug, Clone)]
pub struct MemoryReport {
    pub rows: Vec<MeterRow>,
    pub one_step_smallest: bool,
    pub spf_constant_in_delta: bool,
    pub atf_increasing_in_delta: bool,
    pub pf_below_atf: bool,
    pub spf_at_most_pf: bool,
}

impl MemoryReport {
    pub fn orderings_hold(&self) -> bool {
        self.one_step_smallest
            && self.spf_constant_in_delta
            && self.atf_increasing_in_delta
            && self.pf_below_atf
            && self.spf_at_most_pf
    }
}

/// Compare peak retained bytes across framework runs, checking the expected
/// orderings: the one-step baseline smallest, SPF constant in δ, ATF strictly
/// increasing in δ, PF below ATF at matching δ.
pub fn retained_memory_report(rows: &[MeterRow]) -> Result<MemoryReport> {
    if rows.is_empty() {
        return Err(CoreError::Comparability("no meter rows".into()));
    }
    let params = rows[0].model_params;
    if rows.iter().any(|r| r.model_params != params) {
        return Err(CoreError::Comparability(
            "meter rows trained different model sizes".into(),
        ));
    }
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| (&a.framework, a.delta).cmp(&(&b.framework, b.delta)));

    let of = |name: &str| -> Vec<&MeterRow> {
        rows.iter().filter(|r| r.framework == name).collect()
    };
    let one_step = of("one_step");
    let atf = of("atf");
    let pf = of("pf");
    let spf = of("spf");

    let min_other = rows
        .iter()
        .filter(|r| r.framework != "one_step")
        .map(|r| r.peak_bytes)
        .min()
        .unwrap_or(u64::MAX);
    let one_step_smallest = one_step.iter().all(|r| r.peak_bytes < min_other);

    let spf_constant_in_delta =
        spf.windows(2).all(|w| w[0].peak_bytes == w[1].peak_bytes);
    let atf_increasing_in_delta = atf.windows(2).all(|w| w[0].peak_bytes < w[1].peak_bytes);
    let pf_below_atf = pf.iter().all(|p| {
        atf.iter()
            .find(|a| a.delta == p.delta)
            .is_none_or(|a| p.peak_bytes < a.peak_bytes)
    });
    let spf_at_most_pf = spf.iter().all(|s| {
        pf.iter()
            .find(|p| p.delta == s.delta)
            .is_none_or(|p| s.peak_bytes <= p.peak_bytes)
    });

    Ok(MemoryReport {
        rows,
        one_step_smallest,
        spf_constant_in_delta,
        atf_increasing_in_delta,
        pf_below_atf,
        spf_at_most_pf,
    })
}
