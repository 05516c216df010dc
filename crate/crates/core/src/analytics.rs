//! Run statistics, the pad-uniqueness ledger, and the closed-form
//! recovery-time model.

use std::collections::BTreeSet;

use crate::crypto::Key128;
use crate::devices::WriteCause;
use crate::error::SimError;
use crate::geometry::{Iv, RegionMap, BLOCK_SIZE, PAGE_SIZE, ROOT_SLOTS};
use crate::merkle::TreeGeometry;

pub const DEFAULT_T_BLOCK_NS: f64 = 100.0;

/// Per-run counters. Causes partition the NVM write total; everything is
/// monotone within a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub trace_reads: u64,
    pub trace_writes: u64,
    pub nvm_data_writes: u64,
    pub nvm_counter_writes: u64,
    /// Indexed by MT level - 1.
    pub nvm_mt_writes: Vec<u64>,
    pub nvm_recovery_writes: u64,
    pub counter_cache_hits: u64,
    pub counter_cache_misses: u64,
    pub mt_cache_hits: u64,
    pub mt_cache_misses: u64,
    /// Tree-node blocks fetched from NVM during verification.
    pub node_nvm_fetches: u64,
    pub latency_ns: u64,
    pub wpq_stalls: u64,
    pub crashes: u64,
    pub recoveries: u64,
    pub rekey_events: u64,
    /// Recovery work in 64B blocks read-or-hashed, split by what it rebuilt.
    pub recovery_rebuild_blocks: u64,
    pub recovery_lazy_blocks: u64,
    pub recovery_counter_touches: u64,
    pub recovery_data_touches: u64,
}

impl RunStats {
    pub fn count_nvm_write(&mut self, cause: WriteCause) {
        match cause {
            WriteCause::Data => self.nvm_data_writes += 1,
            WriteCause::Counter => self.nvm_counter_writes += 1,
            WriteCause::MtLevel(l) => {
                let i = l as usize - 1;
                if self.nvm_mt_writes.len() <= i {
                    self.nvm_mt_writes.resize(i + 1, 0);
                }
                self.nvm_mt_writes[i] += 1;
            }
            WriteCause::Recovery => self.nvm_recovery_writes += 1,
        }
    }

    pub fn mt_writes_total(&self) -> u64 {
        self.nvm_mt_writes.iter().sum()
    }

    /// Strictly-persisted metadata writes: counters plus MT nodes, the
    /// quantity the 1 + P accounting law governs.
    pub fn metadata_writes(&self) -> u64 {
        self.nvm_counter_writes + self.mt_writes_total()
    }

    pub fn total_nvm_writes(&self) -> u64 {
        self.nvm_data_writes + self.nvm_counter_writes + self.mt_writes_total() + self.nvm_recovery_writes
    }

    pub fn recovery_work_blocks(&self) -> u64 {
        self.recovery_rebuild_blocks + self.recovery_lazy_blocks
    }
}

/// One issued pad, identified by the key material and the full IV.
pub type PadRecord = (u128, Iv);

/// Global record of every (key, IV) pad the encryption engine has issued.
/// The oracle for the counter-reuse attack: a duplicate insert is detected
/// and kept, never silently ignored.
#[derive(Debug, Clone, Default)]
pub struct PadLedger {
    seen: BTreeSet<PadRecord>,
    duplicates: Vec<PadRecord>,
}

impl PadLedger {
    pub fn record(&mut self, key: Key128, iv: Iv) {
        let rec = (key.0, iv);
        if !self.seen.insert(rec) {
            self.duplicates.push(rec);
        }
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn duplicates(&self) -> &[PadRecord] {
        &self.duplicates
    }
}

/// Lowest metadata tier that must be rebuilt at recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowestTier {
    /// Nothing persisted: a full sweep over every data block.
    Data,
    /// Counters persisted nowhere above tier 0: read counters, rebuild all
    /// node levels.
    Counters,
    /// MT levels 1..=l persisted: read tier l, rebuild everything above.
    MtLevel(u8),
}

impl LowestTier {
    pub fn parse(s: &str) -> Result<Self, SimError> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "data" => Ok(LowestTier::Data),
            "counters" | "counter" => Ok(LowestTier::Counters),
            _ => {
                if let Some(rest) = s.strip_prefix("mt") {
                    let l: u8 = rest
                        .parse()
                        .map_err(|_| SimError::Config(format!("bad tier `{s}`")))?;
                    if l == 0 {
                        return Err(SimError::Config("mt level must be >= 1".into()));
                    }
                    Ok(LowestTier::MtLevel(l))
                } else {
                    Err(SimError::Config(format!(
                        "bad tier `{s}` (expected data, counters, or mtN)"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for LowestTier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LowestTier::Data => write!(f, "data"),
            LowestTier::Counters => write!(f, "counters"),
            LowestTier::MtLevel(l) => write!(f, "mt{l}"),
        }
    }
}

/// 64B blocks processed when reconstructing from `lowest` for `slices` of the
/// eight address slices.
///
/// Metadata tiers follow the geometric-sum convention: read every block of
/// the lowest persisted tier and read-or-hash every tier above it, which is
/// what yields the ~8x step between adjacent persist levels. The no-persist
/// case is a flat re-initialization sweep over the data blocks themselves;
/// counter and tree state is rebuilt in the same pass.
pub fn recovery_blocks(capacity: u64, lowest: LowestTier, slices: u64) -> Result<u64, SimError> {
    if capacity == 0 {
        return Ok(0);
    }
    if capacity % PAGE_SIZE != 0 {
        return Err(SimError::Config(format!(
            "capacity {capacity} must be a multiple of the 4KB page size"
        )));
    }
    let geometry = TreeGeometry::for_capacity(capacity);
    let scale = |whole: u64| whole * slices / ROOT_SLOTS;
    match lowest {
        LowestTier::Data => Ok(scale(capacity / BLOCK_SIZE)),
        LowestTier::Counters => {
            let mut total = geometry.counter_blocks;
            for l in 1..=geometry.node_levels {
                total += geometry.level_node_count(l);
            }
            Ok(scale(total))
        }
        LowestTier::MtLevel(start) => {
            if start > geometry.node_levels {
                return Err(SimError::Config(format!(
                    "tier mt{start} exceeds the {} node levels of a {capacity}-byte tree",
                    geometry.node_levels
                )));
            }
            let mut total = 0;
            for l in start..=geometry.node_levels {
                total += geometry.level_node_count(l);
            }
            Ok(scale(total))
        }
    }
}

/// Closed-form recovery time in seconds for a whole device.
pub fn analytic_recovery_time(capacity: u64, lowest: LowestTier, t_block_ns: f64) -> Result<f64, SimError> {
    Ok(recovery_blocks(capacity, lowest, ROOT_SLOTS)? as f64 * t_block_ns * 1e-9)
}

/// Recovery time for just the slices of one region class.
pub fn analytic_recovery_time_region(
    capacity: u64,
    lowest: LowestTier,
    map: &RegionMap,
    persistent: bool,
    t_block_ns: f64,
) -> Result<f64, SimError> {
    let p = map.ratio.persistent_eighths as u64;
    let slices = if persistent { p } else { ROOT_SLOTS - p };
    Ok(recovery_blocks(capacity, lowest, slices)? as f64 * t_block_ns * 1e-9)
}

/// Fixed CSV header for run reports; `emit_csv_row` must stay in sync.
pub const STATS_CSV_HEADER: &str = "scenario,capacity,ratio,policy,seed,trace_reads,trace_writes,\
nvm_data_writes,nvm_counter_writes,nvm_mt_writes_total,nvm_mt_writes_by_level,nvm_recovery_writes,\
nvm_writes_total,counter_cache_hits,counter_cache_misses,mt_cache_hits,mt_cache_misses,\
node_nvm_fetches,latency_ns,wpq_stalls,crashes,recoveries,rekey_events,pad_ledger_size,\
pad_duplicates,state_hash";

/// Everything identifying one run, echoed into reports for reproducibility.
#[derive(Debug, Clone)]
pub struct RunIdentity {
    pub scenario: String,
    pub capacity: u64,
    pub ratio: String,
    pub policy: String,
    pub seed: u64,
}

pub fn emit_csv_row(id: &RunIdentity, stats: &RunStats, ledger: &PadLedger, state_hash: u64) -> String {
    let by_level = if stats.nvm_mt_writes.is_empty() {
        "-".to_string()
    } else {
        stats
            .nvm_mt_writes
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("|")
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:016x}",
        id.scenario,
        id.capacity,
        id.ratio,
        id.policy,
        id.seed,
        stats.trace_reads,
        stats.trace_writes,
        stats.nvm_data_writes,
        stats.nvm_counter_writes,
        stats.mt_writes_total(),
        by_level,
        stats.nvm_recovery_writes,
        stats.total_nvm_writes(),
        stats.counter_cache_hits,
        stats.counter_cache_misses,
        stats.mt_cache_hits,
        stats.mt_cache_misses,
        stats.node_nvm_fetches,
        stats.latency_ns,
        stats.wpq_stalls,
        stats.crashes,
        stats.recoveries,
        stats.rekey_events,
        ledger.len(),
        ledger.duplicates().len(),
        state_hash
    )
}

pub fn emit_text_report(id: &RunIdentity, stats: &RunStats, ledger: &PadLedger, state_hash: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario            {}\n", id.scenario));
    out.push_str(&format!("capacity            {} bytes\n", id.capacity));
    out.push_str(&format!("ratio               {}\n", id.ratio));
    out.push_str(&format!("policy              {}\n", id.policy));
    out.push_str(&format!("seed                {}\n", id.seed));
    out.push_str(&format!("trace ops           {} reads, {} writes\n", stats.trace_reads, stats.trace_writes));
    out.push_str(&format!("nvm writes          {} total\n", stats.total_nvm_writes()));
    out.push_str(&format!("  data              {}\n", stats.nvm_data_writes));
    out.push_str(&format!("  counter           {}\n", stats.nvm_counter_writes));
    for (i, c) in stats.nvm_mt_writes.iter().enumerate() {
        out.push_str(&format!("  mt level {}        {}\n", i + 1, c));
    }
    out.push_str(&format!("  recovery          {}\n", stats.nvm_recovery_writes));
    out.push_str(&format!(
        "counter cache       {} hits, {} misses\n",
        stats.counter_cache_hits, stats.counter_cache_misses
    ));
    out.push_str(&format!(
        "mt cache            {} hits, {} misses\n",
        stats.mt_cache_hits, stats.mt_cache_misses
    ));
    out.push_str(&format!("node nvm fetches    {}\n", stats.node_nvm_fetches));
    out.push_str(&format!("modeled latency     {} ns\n", stats.latency_ns));
    out.push_str(&format!("wpq stalls          {}\n", stats.wpq_stalls));
    out.push_str(&format!("crashes/recoveries  {}/{}\n", stats.crashes, stats.recoveries));
    out.push_str(&format!("rekey events        {}\n", stats.rekey_events));
    out.push_str(&format!(
        "pad ledger          {} pads, {} duplicates\n",
        ledger.len(),
        ledger.duplicates().len()
    ));
    out.push_str(&format!("state hash          {state_hash:016x}\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TB: u64 = 1 << 40;
    const T: f64 = DEFAULT_T_BLOCK_NS;

    fn secs(capacity: u64, lowest: LowestTier) -> f64 {
        analytic_recovery_time(capacity, lowest, T).unwrap()
    }

    fn within(value: f64, target: f64, rel: f64) {
        assert!(
            (value - target).abs() <= target * rel,
            "{value} not within {rel} of {target}"
        );
    }

    #[test]
    fn golden_recovery_times_1tb() {
        within(secs(TB, LowestTier::Counters), 30.68, 0.01);
        within(secs(TB, LowestTier::MtLevel(1)), 3.83, 0.01);
        within(secs(TB, LowestTier::MtLevel(2)), 0.48, 0.01);
        within(secs(TB, LowestTier::Data), 30.0 * 60.0, 0.05);
    }

    #[test]
    fn golden_recovery_times_3tb() {
        within(secs(3 * TB, LowestTier::Counters), 92.0, 0.01);
        within(secs(3 * TB, LowestTier::MtLevel(1)), 11.5, 0.01);
        within(secs(3 * TB, LowestTier::Data), 5154.0, 0.01);
    }

    #[test]
    fn golden_recovery_times_large_systems() {
        assert!(secs(8 * TB, LowestTier::MtLevel(2)) < 4.0);
        within(secs(64 * TB, LowestTier::MtLevel(2)), 30.6, 0.03);
        let ratio = secs(8 * TB, LowestTier::Data) / secs(8 * TB, LowestTier::MtLevel(2));
        within(ratio, 3648.0, 0.03);
    }

    #[test]
    fn zero_capacity_and_linearity() {
        assert_eq!(secs(0, LowestTier::Counters), 0.0);
        let one = secs(TB, LowestTier::MtLevel(1));
        let two = secs(2 * TB, LowestTier::MtLevel(1));
        let r = two / one;
        assert!((r - 2.0).abs() < 1e-6, "doubling capacity must double time, got {r}");
    }

    #[test]
    fn eight_x_tier_law() {
        for cap in [1u64 << 30, 1 << 35, TB, 8 * TB] {
            let g = TreeGeometry::for_capacity(cap);
            for l in 1..g.node_levels.saturating_sub(3) {
                let a = secs(cap, LowestTier::MtLevel(l));
                let b = secs(cap, LowestTier::MtLevel(l + 1));
                let r = a / b;
                assert!((7.9..=8.1).contains(&r), "cap={cap} l={l} ratio={r}");
            }
        }
    }

    #[test]
    fn invalid_tier_rejected() {
        let g = TreeGeometry::for_capacity(1 << 20);
        assert!(analytic_recovery_time(1 << 20, LowestTier::MtLevel(g.node_levels + 1), T).is_err());
        assert!(LowestTier::parse("mt0").is_err());
        assert!(LowestTier::parse("bogus").is_err());
        assert_eq!(LowestTier::parse("MT2").unwrap(), LowestTier::MtLevel(2));
    }

    #[test]
    fn region_scaling_follows_ratio() {
        use crate::geometry::{PersistentPlacement, Ratio};
        let cap = 64 << 20;
        let map = RegionMap::new(cap, Ratio::parse("4:4").unwrap(), PersistentPlacement::End).unwrap();
        let whole = secs(cap, LowestTier::MtLevel(1));
        let half = analytic_recovery_time_region(cap, LowestTier::MtLevel(1), &map, true, T).unwrap();
        assert!((half / whole - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ledger_detects_duplicates() {
        let mut ledger = PadLedger::default();
        let iv = Iv { page_id: 1, page_offset: 0, major: 0, minor: 1 };
        ledger.record(Key128(1), iv);
        ledger.record(Key128(2), iv);
        assert!(ledger.duplicates().is_empty());
        ledger.record(Key128(1), iv);
        assert_eq!(ledger.duplicates().len(), 1);
        assert_eq!(ledger.len(), 2);
    }

    #[test]
    fn csv_columns_sum_to_total() {
        let mut stats = RunStats::default();
        for _ in 0..3 {
            stats.count_nvm_write(WriteCause::Data);
        }
        stats.count_nvm_write(WriteCause::Counter);
        stats.count_nvm_write(WriteCause::MtLevel(1));
        stats.count_nvm_write(WriteCause::MtLevel(2));
        stats.count_nvm_write(WriteCause::Recovery);
        assert_eq!(stats.total_nvm_writes(), 7);
        assert_eq!(
            stats.nvm_data_writes + stats.nvm_counter_writes + stats.mt_writes_total() + stats.nvm_recovery_writes,
            stats.total_nvm_writes()
        );
        let id = RunIdentity {
            scenario: "t".into(),
            capacity: 1 << 20,
            ratio: "4:4".into(),
            policy: "triad:1".into(),
            seed: 1,
        };
        let row = emit_csv_row(&id, &stats, &PadLedger::default(), 0xabc);
        assert_eq!(row.split(',').count(), STATS_CSV_HEADER.split(',').count());
    }
}
