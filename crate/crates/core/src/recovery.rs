//! Crash recovery: write-record replay, WPQ drain, persistent-subtree
//! reconstruction against the on-chip root, lazy zero-initialization of
//! non-persistent subtrees, and corruption pinpointing.
//!
//! Also home to the crash harness: deterministic enumeration of every
//! durable event boundary in a trace, and the crash-inject/recover/verify
//! sweep built on top of it.

use std::collections::BTreeMap;

use crate::analytics::PadLedger;
use crate::controller::{Controller, ControllerParams, EventKind, PersistMode, Progress};
use crate::crypto::mac64;
use crate::devices::{Target, WpqEntry, WpqPayload};
use crate::error::SimError;
use crate::geometry::{region_of, Address, Region, PAGE_SIZE, ROOT_SLOTS};
use crate::merkle::MerkleNode;
use crate::workload::TraceOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryOutcome {
    Verified,
    Partial,
    Failed,
}

impl std::fmt::Display for RecoveryOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecoveryOutcome::Verified => write!(f, "verified"),
            RecoveryOutcome::Partial => write!(f, "partial"),
            RecoveryOutcome::Failed => write!(f, "failed"),
        }
    }
}

/// Smallest address span whose integrity cannot be attested after recovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnverifiableRange {
    pub start: u64,
    pub len: u64,
    pub cause: String,
}

#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub outcome: RecoveryOutcome,
    /// Tier the persistent rebuild read from (0 = counters); None when no
    /// reconstruction ran (strict policy or no persistent slices).
    pub rebuilt_from: Option<u8>,
    /// Node levels recomputed above the base tier.
    pub rebuilt_levels: Option<(u8, u8)>,
    pub unverifiable: Vec<UnverifiableRange>,
    pub rebuild_blocks: u64,
    pub lazy_blocks: u64,
    pub pinpoint_blocks: u64,
    pub wall_seconds: f64,
}

impl RecoveryReport {
    pub fn work_blocks(&self) -> u64 {
        self.rebuild_blocks + self.lazy_blocks + self.pinpoint_blocks
    }

    pub const CSV_HEADER: &'static str =
        "outcome,rebuilt_from,rebuilt_levels,rebuild_blocks,lazy_blocks,pinpoint_blocks,\
work_blocks,wall_seconds,unverifiable_count,ranges";

    pub fn to_csv_row(&self) -> String {
        let from = self.rebuilt_from.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        let levels = self
            .rebuilt_levels
            .map(|(a, b)| format!("{a}..{b}"))
            .unwrap_or_else(|| "-".into());
        let ranges = if self.unverifiable.is_empty() {
            "-".to_string()
        } else {
            self.unverifiable
                .iter()
                .map(|r| format!("{:#x}:{:#x}:{}", r.start, r.len, r.cause.replace(',', ";")))
                .collect::<Vec<_>>()
                .join("|")
        };
        format!(
            "{},{},{},{},{},{},{},{:.9},{},{}",
            self.outcome,
            from,
            levels,
            self.rebuild_blocks,
            self.lazy_blocks,
            self.pinpoint_blocks,
            self.work_blocks(),
            self.wall_seconds,
            self.unverifiable.len(),
            ranges
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("outcome          {}\n", self.outcome));
        match self.rebuilt_from {
            Some(0) => out.push_str("rebuilt-from     counters\n"),
            Some(t) => out.push_str(&format!("rebuilt-from     mt{t}\n")),
            None => out.push_str("rebuilt-from     -\n"),
        }
        match self.rebuilt_levels {
            Some((a, b)) => out.push_str(&format!("rebuilt-levels   {a}..{b}\n")),
            None => out.push_str("rebuilt-levels   -\n"),
        }
        out.push_str(&format!("rebuild-blocks   {}\n", self.rebuild_blocks));
        out.push_str(&format!("lazy-blocks      {}\n", self.lazy_blocks));
        out.push_str(&format!("pinpoint-blocks  {}\n", self.pinpoint_blocks));
        out.push_str(&format!("work-blocks      {}\n", self.work_blocks()));
        out.push_str(&format!("wall-seconds     {:.9}\n", self.wall_seconds));
        if self.unverifiable.is_empty() {
            out.push_str("unverifiable     none\n");
        } else {
            out.push_str(&format!("unverifiable     {} range(s)\n", self.unverifiable.len()));
            for r in &self.unverifiable {
                out.push_str(&format!(
                    "  range          start={:#x} len={:#x} cause={}\n",
                    r.start, r.len, r.cause
                ));
            }
        }
        out
    }
}

/// Per-slice reconstruction scratch: node values recomputed from a base tier.
struct SliceRebuild {
    base: u8,
    /// `levels[i]` holds within-slice nodes at level `base + 1 + i`.
    levels: Vec<Vec<MerkleNode>>,
    top_mac: u64,
}

fn rebuild_slice_from(c: &Controller, slice: u64, base: u8, work: &mut u64, count_base: bool) -> SliceRebuild {
    let g = &c.geometry;
    let key = c.mac_key();
    let s = g.node_levels;
    let base_count = g.slice_node_count(slice, base);
    if count_base {
        *work += base_count;
    }
    let mut macs: Vec<u64> = Vec::with_capacity(base_count as usize);
    if base == 0 {
        let first_page = slice * g.counters_per_slice;
        for i in 0..base_count {
            let ctr = c.dev.backing_counter(first_page + i);
            macs.push(mac64(key, &ctr.to_bytes()));
        }
    } else {
        for w in 0..base_count {
            let idx = g.node_index(base, slice, w);
            macs.push(c.dev.backing_node(base, idx).mac(key));
        }
    }
    let mut levels = Vec::new();
    for level in base + 1..=s {
        let count = g.slice_node_count(slice, level);
        *work += count;
        let mut nodes = Vec::with_capacity(count as usize);
        let mut next = Vec::with_capacity(count as usize);
        for w in 0..count as usize {
            let mut node = MerkleNode::default();
            let lo = 8 * w;
            let hi = (lo + 8).min(macs.len());
            node.slots[..hi - lo].copy_from_slice(&macs[lo..hi]);
            next.push(node.mac(key));
            nodes.push(node);
        }
        levels.push(nodes);
        macs = next;
    }
    SliceRebuild { base, levels, top_mac: macs[0] }
}

fn apply_rebuild(c: &mut Controller, slice: u64, rb: &SliceRebuild) {
    let g = c.geometry.clone();
    let s = g.node_levels;
    for (i, nodes) in rb.levels.iter().enumerate() {
        let level = rb.base + 1 + i as u8;
        for (w, node) in nodes.iter().enumerate() {
            let idx = g.node_index(level, slice, w as u64);
            c.dev.recovery_write_node(level, idx, *node, &mut c.stats);
            c.dev.flagged.remove(&Target::Node(level, idx));
            if level + 1 >= s {
                if let Some(pins) = &mut c.dev.pinned_upper {
                    pins.insert((level, idx), *node);
                }
            }
        }
    }
}

/// Address span covered by one node of a slice at a level (counter blocks
/// at level 0), clamped at ragged edges.
fn node_span(c: &Controller, slice: u64, level: u8, within: u64) -> (u64, u64) {
    let g = &c.geometry;
    let covered = g.counters_under_node(level);
    let first = within * covered;
    let len = covered.min(g.slice_len(slice) - first);
    let start_page = slice * g.counters_per_slice + first;
    (start_page * PAGE_SIZE, len * PAGE_SIZE)
}

fn slice_span(c: &Controller, slice: u64) -> (u64, u64) {
    let len = c.map.slice_len();
    (slice * len, len)
}

fn lazy_recover_slice(c: &mut Controller, slice: u64, report: &mut RecoveryReport) {
    let g = c.geometry.clone();
    let s = g.node_levels;
    if g.slice_len(slice) == 0 {
        return;
    }
    if s == 0 {
        // Single-counter slice: a zero root slot is the first-touch marker.
        c.dev.root.slots[slice as usize] = 0;
        return;
    }
    let c1 = g.slice_node_count(slice, 1);
    for w in 0..c1 {
        let idx = g.node_index(1, slice, w);
        c.dev.recovery_write_node(1, idx, MerkleNode::default(), &mut c.stats);
        c.dev.flagged.remove(&Target::Node(1, idx));
    }
    report.lazy_blocks += c1;
    c.stats.recovery_lazy_blocks += c1;
    let mut work = 0;
    let rb = rebuild_slice_from(c, slice, 1, &mut work, false);
    report.lazy_blocks += work;
    c.stats.recovery_lazy_blocks += work;
    apply_rebuild(c, slice, &rb);
    c.dev.root.slots[slice as usize] = rb.top_mac;
}

fn flag_ranges_below(c: &Controller, slice: u64, tier: u8, report: &mut RecoveryReport) {
    let g = &c.geometry;
    for target in &c.dev.flagged {
        match target {
            Target::Counter(page) if g.slice_of_counter(*page) == slice => {
                report.unverifiable.push(UnverifiableRange {
                    start: page * PAGE_SIZE,
                    len: PAGE_SIZE,
                    cause: "flagged uncorrectable counter block".into(),
                });
            }
            Target::Node(l, idx) if *l <= tier && g.node_slice(*l, *idx) == slice => {
                let within = idx % g.level_stride(*l);
                let (start, len) = node_span(c, slice, *l, within);
                report.unverifiable.push(UnverifiableRange {
                    start,
                    len,
                    cause: format!("flagged uncorrectable tier-{l} node"),
                });
            }
            _ => {}
        }
    }
}

fn pinpoint(c: &mut Controller, slice: u64, base: u8, report: &mut RecoveryReport) {
    let g = c.geometry.clone();
    let s = g.node_levels;
    // Descend one persisted tier at a time looking for a root-consistent
    // reconstruction source.
    for t in (0..base).rev() {
        let mut work = 0;
        let rb = rebuild_slice_from(c, slice, t, &mut work, true);
        report.pinpoint_blocks += work;
        c.stats.recovery_rebuild_blocks += work;
        if rb.top_mac == c.dev.root.slots[slice as usize] {
            // The stored copy of tier t+1 is the corrupted one; recomputing
            // it from tier t pinpoints the node.
            let level = t + 1;
            for (w, node) in rb.levels[0].iter().enumerate() {
                let idx = g.node_index(level, slice, w as u64);
                if c.dev.backing_node(level, idx) != *node {
                    let (start, len) = node_span(c, slice, level, w as u64);
                    report.unverifiable.push(UnverifiableRange {
                        start,
                        len,
                        cause: format!("corrupted persisted tier-{level} node"),
                    });
                }
            }
            flag_ranges_below(c, slice, t, report);
            apply_rebuild(c, slice, &rb);
            return;
        }
    }
    // No persisted tier reproduces the root slot. With pinned upper tiers
    // the damage can still be bounded below a whole root slot.
    if c.dev.pinned_upper.is_some() && s >= 1 {
        let mut work = 0;
        let rb = rebuild_slice_from(c, slice, 0, &mut work, true);
        report.pinpoint_blocks += work;
        c.stats.recovery_rebuild_blocks += work;
        let cmp_level = if s >= 2 { s - 1 } else { s };
        let recomputed = &rb.levels[cmp_level as usize - 1];
        let pins = c.dev.pinned_upper.as_ref().unwrap();
        let mut found = false;
        for (w, node) in recomputed.iter().enumerate() {
            let idx = g.node_index(cmp_level, slice, w as u64);
            let pinned = pins
                .get(&(cmp_level, idx))
                .copied()
                .unwrap_or_else(|| c.dev.defaults.initial_node(&g, cmp_level, idx));
            if pinned != *node {
                let (start, len) = node_span(c, slice, cmp_level, w as u64);
                report.unverifiable.push(UnverifiableRange {
                    start,
                    len,
                    cause: format!("subtree mismatch against pinned tier-{cmp_level} register"),
                });
                found = true;
            }
        }
        if found {
            return;
        }
    }
    let (start, len) = slice_span(c, slice);
    report.unverifiable.push(UnverifiableRange {
        start,
        len,
        cause: "unlocalizable corruption below the lowest persisted tier".into(),
    });
}

fn rebuild_persistent_slice(c: &mut Controller, slice: u64, persist_level: u8, report: &mut RecoveryReport) {
    let g = c.geometry.clone();
    if g.slice_len(slice) == 0 {
        return;
    }
    let s = g.node_levels;
    let base = persist_level.min(s);
    let mut work = 0;
    let rb = rebuild_slice_from(c, slice, base, &mut work, true);
    report.rebuild_blocks += work;
    c.stats.recovery_rebuild_blocks += work;
    report.rebuilt_from = Some(base);
    if base < s {
        report.rebuilt_levels = Some((base + 1, s));
    }
    if rb.top_mac == c.dev.root.slots[slice as usize] {
        apply_rebuild(c, slice, &rb);
        flag_ranges_below(c, slice, base, report);
    } else {
        pinpoint(c, slice, base, report);
    }
}

/// Full recovery procedure. The caller has already applied `crash()`.
pub fn recover(c: &mut Controller) -> RecoveryReport {
    c.stats.recoveries += 1;
    let mut report = RecoveryReport {
        outcome: RecoveryOutcome::Verified,
        rebuilt_from: None,
        rebuilt_levels: None,
        unverifiable: Vec::new(),
        rebuild_blocks: 0,
        lazy_blocks: 0,
        pinpoint_blocks: 0,
        wall_seconds: 0.0,
    };

    // An interrupted write is replayed from the persistent registers before
    // anything else; the WPQ (persistence domain) is then drained so NVM
    // reflects every acknowledged update.
    if c.dev.regs.ready {
        if let Some(rec) = c.dev.regs.record.clone() {
            c.dev.root = rec.root_image;
            for (block, cell) in &rec.data {
                let entry = WpqEntry {
                    target: Target::Data(*block),
                    payload: WpqPayload::Data(*cell),
                    cause_is_recovery: true,
                    mt_level: 0,
                };
                c.dev.enqueue(entry, &mut c.stats);
            }
            if let Some((page, ctr)) = &rec.counter {
                let entry = WpqEntry {
                    target: Target::Counter(*page),
                    payload: WpqPayload::Counter(*ctr),
                    cause_is_recovery: true,
                    mt_level: 0,
                };
                c.dev.enqueue(entry, &mut c.stats);
            }
            for ((level, idx), node) in &rec.nodes {
                let entry = WpqEntry {
                    target: Target::Node(*level, *idx),
                    payload: WpqPayload::Node(*node),
                    cause_is_recovery: true,
                    mt_level: *level,
                };
                c.dev.enqueue(entry, &mut c.stats);
            }
        }
        c.dev.regs.ready = false;
        c.dev.regs.record = None;
    }
    c.dev.drain_wpq(&mut c.stats);

    for slice in 0..ROOT_SLOTS {
        let region = c.map.slice_region(slice);
        if c.policy.lazy_eligible(region) {
            lazy_recover_slice(c, slice, &mut report);
            c.lazy_slices.insert(slice);
            if region == Region::Persistent {
                // Only reachable under NoPersist: persistent data had no
                // persisted metadata at all.
                let (start, len) = slice_span(c, slice);
                report.unverifiable.push(UnverifiableRange {
                    start,
                    len,
                    cause: "no security metadata persisted for persistent region".into(),
                });
            }
        } else if let PersistMode::Triad(p) = c.policy.mode {
            if region == Region::Persistent {
                rebuild_persistent_slice(c, slice, p, &mut report);
            }
        }
        // Strict: write-through state is already current; zero work.
    }

    c.keys.bump_epoch();

    let slice_bytes = c.map.slice_len();
    report.outcome = if report.unverifiable.is_empty() {
        RecoveryOutcome::Verified
    } else if report.unverifiable.iter().any(|r| r.len >= slice_bytes) {
        RecoveryOutcome::Failed
    } else {
        RecoveryOutcome::Partial
    };
    report.wall_seconds = report.work_blocks() as f64 * c.t_block_ns * 1e-9;
    report
}

// ---------------------------------------------------------------------------
// Crash harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CrashPointPlan {
    /// Number of durable events in the full run; crash points are 0..=total.
    pub total_events: u64,
    pub labels: Vec<EventKind>,
}

impl CrashPointPlan {
    pub fn point_count(&self) -> u64 {
        self.total_events + 1
    }

    pub fn label(&self, point: u64) -> String {
        if point == 0 {
            "initial".to_string()
        } else {
            format!("after {}", self.labels[point as usize - 1].name())
        }
    }
}

/// Runs the trace once to enumerate every durable event boundary.
pub fn enumerate_crash_points(params: &ControllerParams, ops: &[TraceOp]) -> Result<CrashPointPlan, SimError> {
    let mut c = Controller::new(params.clone());
    c.start_event_log();
    crate::workload::replay(&mut c, ops)?;
    let labels = c.take_event_log();
    Ok(CrashPointPlan { total_events: labels.len() as u64, labels })
}

/// Replays until `budget` durable events have been applied (or the trace
/// ends). Returns the controller mid-protocol, the index of the op after
/// the last fully- or partially-applied one, and every acknowledged
/// persistent-region write.
pub fn run_trace_until(
    params: &ControllerParams,
    ops: &[TraceOp],
    budget: Option<u64>,
) -> Result<(Controller, usize, BTreeMap<u64, [u8; 64]>), SimError> {
    let mut c = Controller::new(params.clone());
    c.set_event_budget(budget);
    let mut acked: BTreeMap<u64, [u8; 64]> = BTreeMap::new();
    for (i, op) in ops.iter().enumerate() {
        match op {
            TraceOp::Read(a) => {
                if matches!(c.read(*a)?, Progress::Interrupted) {
                    return Ok((c, i + 1, acked));
                }
            }
            TraceOp::Write(a, seed) => {
                let payload = TraceOp::payload(*seed);
                match c.write(*a, &payload)? {
                    Progress::Done(()) => {
                        if region_of(*a, &c.map)? == Region::Persistent {
                            acked.insert(a.0, payload);
                        }
                    }
                    Progress::Interrupted => return Ok((c, i + 1, acked)),
                }
            }
        }
    }
    Ok((c, ops.len(), acked))
}

#[derive(Debug, Clone)]
pub struct CrashViolation {
    pub crash_point: u64,
    pub label: String,
    pub kind: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CrashTestReport {
    pub total_points: u64,
    pub points_run: u64,
    pub checked_writes: u64,
    pub pad_reuse_points: u64,
    pub violations: Vec<CrashViolation>,
}

impl CrashTestReport {
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("crash points      {} of {}\n", self.points_run, self.total_points));
        out.push_str(&format!("writes checked    {}\n", self.checked_writes));
        out.push_str(&format!("pad-reuse points  {}\n", self.pad_reuse_points));
        out.push_str(&format!("violations        {}\n", self.violations.len()));
        for v in self.violations.iter().take(50) {
            out.push_str(&format!(
                "  point {} ({}): {} — {}\n",
                v.crash_point, v.label, v.kind, v.detail
            ));
        }
        if self.violations.len() > 50 {
            out.push_str(&format!("  ... and {} more\n", self.violations.len() - 50));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashMode {
    Exhaustive,
    Random { count: u64, seed: u64 },
    At(u64),
}

fn sample_points(total: u64, count: u64, seed: u64) -> Vec<u64> {
    let mut points = Vec::with_capacity(count as usize);
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    for _ in 0..count {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        points.push(state % (total + 1));
    }
    points.sort_unstable();
    points.dedup();
    points
}

/// Crash/recover/verify at one boundary; returns findings and how many
/// acknowledged writes were re-read.
fn check_point(
    params: &ControllerParams,
    ops: &[TraceOp],
    plan: &CrashPointPlan,
    point: u64,
) -> Result<(Vec<CrashViolation>, u64, bool), SimError> {
    let mut violations = Vec::new();
    let label = plan.label(point);
    let (mut c, resume_at, acked) = run_trace_until(params, ops, Some(point))?;
    c.crash();
    let report = recover(&mut c);
    if report.outcome != RecoveryOutcome::Verified {
        violations.push(CrashViolation {
            crash_point: point,
            label: label.clone(),
            kind: "recovery-outcome",
            detail: format!("outcome {} with {} unverifiable range(s)", report.outcome, report.unverifiable.len()),
        });
    }
    // Every acknowledged persistent-region write must read back verified.
    let mut checked = 0u64;
    for (addr, expect) in &acked {
        checked += 1;
        match c.read(Address(*addr)) {
            Ok(Progress::Done(got)) => {
                if got != *expect {
                    violations.push(CrashViolation {
                        crash_point: point,
                        label: label.clone(),
                        kind: "lost-write",
                        detail: format!("persistent write at {addr:#x} not the acknowledged value"),
                    });
                }
            }
            Ok(Progress::Interrupted) => unreachable!("no budget during verification"),
            Err(e) => violations.push(CrashViolation {
                crash_point: point,
                label: label.clone(),
                kind: "integrity",
                detail: format!("read of acknowledged write at {addr:#x}: {e}"),
            }),
        }
    }
    // Continue the remainder of the trace on the recovered device; the op in
    // flight at the crash was never acknowledged and is skipped.
    for (i, op) in ops.iter().enumerate().skip(resume_at) {
        let res = match op {
            TraceOp::Read(a) => c.read(*a).map(|_| ()),
            TraceOp::Write(a, seed) => c.write(*a, &TraceOp::payload(*seed)).map(|_| ()),
        };
        if let Err(e) = res {
            violations.push(CrashViolation {
                crash_point: point,
                label: label.clone(),
                kind: "continuation-error",
                detail: format!("op {} after recovery: {e}", i + 1),
            });
            break;
        }
    }
    let reuse = !c.ledger.duplicates().is_empty();
    if reuse {
        violations.push(CrashViolation {
            crash_point: point,
            label,
            kind: "pad-reuse",
            detail: format!("{} duplicate pad(s) in the ledger", c.ledger.duplicates().len()),
        });
    }
    Ok((violations, checked, reuse))
}

/// The full crash-consistency sweep: for each selected boundary, crash,
/// recover, verify acknowledged persistent writes, replay the remainder,
/// and check pad uniqueness.
pub fn crash_test(
    params: &ControllerParams,
    ops: &[TraceOp],
    mode: CrashMode,
    jobs: usize,
) -> Result<CrashTestReport, SimError> {
    let plan = enumerate_crash_points(params, ops)?;
    let points: Vec<u64> = match mode {
        CrashMode::Exhaustive => (0..=plan.total_events).collect(),
        CrashMode::Random { count, seed } => sample_points(plan.total_events, count, seed),
        CrashMode::At(p) => {
            if p > plan.total_events {
                return Err(SimError::Config(format!(
                    "crash point {p} out of range (trace has {} events)",
                    plan.total_events
                )));
            }
            vec![p]
        }
    };

    let jobs = jobs.max(1).min(points.len().max(1));
    let chunks: Vec<&[u64]> = points.chunks(points.len().div_ceil(jobs).max(1)).collect();
    let mut results: Vec<(Vec<CrashViolation>, u64, u64)> = Vec::new();
    std::thread::scope(|scope| -> Result<(), SimError> {
        let mut handles = Vec::new();
        for chunk in &chunks {
            let plan = &plan;
            handles.push(scope.spawn(move || -> Result<(Vec<CrashViolation>, u64, u64), SimError> {
                let mut vs = Vec::new();
                let mut checked = 0;
                let mut reuse_points = 0;
                for &p in *chunk {
                    let (mut v, c, reuse) = check_point(params, ops, plan, p)?;
                    vs.append(&mut v);
                    checked += c;
                    reuse_points += reuse as u64;
                }
                Ok((vs, checked, reuse_points))
            }));
        }
        for h in handles {
            results.push(h.join().expect("crash-test worker panicked")?);
        }
        Ok(())
    })?;

    let mut violations = Vec::new();
    let mut checked_writes = 0;
    let mut pad_reuse_points = 0;
    for (mut v, c, r) in results {
        violations.append(&mut v);
        checked_writes += c;
        pad_reuse_points += r;
    }
    violations.sort_by_key(|v| v.crash_point);
    Ok(CrashTestReport {
        total_points: plan.point_count(),
        points_run: points.len() as u64,
        checked_writes,
        pad_reuse_points,
        violations,
    })
}

/// Pad-uniqueness violations are expected in attack-demo mode; everything
/// else is always a failure.
pub fn hard_violations(report: &CrashTestReport, attack_demo: bool) -> usize {
    report
        .violations
        .iter()
        .filter(|v| !(attack_demo && v.kind == "pad-reuse"))
        .count()
}

/// Convenience: crash and recover a clone, leaving the original untouched.
pub fn crash_and_recover_clone(c: &Controller) -> (Controller, RecoveryReport) {
    let mut clone = c.clone();
    clone.crash();
    let report = recover(&mut clone);
    (clone, report)
}

/// Quick pad-ledger audit used by property checks: replays a trace with a
/// crash at `point`, recovers, finishes the trace, and returns the ledger.
pub fn ledger_after_crash_resume(
    params: &ControllerParams,
    ops: &[TraceOp],
    point: u64,
) -> Result<PadLedger, SimError> {
    let (mut c, resume_at, _) = run_trace_until(params, ops, Some(point))?;
    c.crash();
    recover(&mut c);
    for op in ops.iter().skip(resume_at) {
        match op {
            TraceOp::Read(a) => {
                c.read(*a)?;
            }
            TraceOp::Write(a, seed) => {
                c.write(*a, &TraceOp::payload(*seed))?;
            }
        }
    }
    Ok(c.ledger.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{recovery_blocks, LowestTier};
    use crate::controller::{PersistPolicy, PersistMode};
    use crate::devices::{BitFlip, DeviceParams};
    use crate::geometry::{PersistentPlacement, Ratio, RegionMap};
    use crate::workload::{generate, SyntheticSpec, WorkloadRegion};

    const MB: u64 = 1 << 20;

    fn params(capacity: u64, ratio: &str, mode: PersistMode, pin: bool) -> ControllerParams {
        ControllerParams {
            map: RegionMap::new(capacity, Ratio::parse(ratio).unwrap(), PersistentPlacement::End)
                .unwrap(),
            policy: PersistPolicy { mode, pin_upper_tiers: pin },
            devices: DeviceParams::default(),
            seed: 11,
            rotate_volatile_key: true,
            t_block_ns: 100.0,
        }
    }

    fn mixed_ops(map: &RegionMap, count: u64) -> Vec<TraceOp> {
        let spec = SyntheticSpec {
            region: WorkloadRegion::Mixed,
            stride: 128,
            reads_per_write: 1,
            op_count: count,
            seed: 5,
        };
        generate(&spec, map).unwrap()
    }

    fn persistent_writes(map: &RegionMap, count: u64) -> Vec<TraceOp> {
        let spec = SyntheticSpec {
            region: WorkloadRegion::Persistent,
            stride: 64,
            reads_per_write: 0,
            op_count: count,
            seed: 7,
        };
        generate(&spec, map).unwrap()
    }

    #[test]
    fn clean_crash_rebuilds_and_verifies() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = mixed_ops(&params.map, 40);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        c.crash();
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Verified);
        assert_eq!(report.rebuilt_from, Some(1));
        let s = c.geometry.node_levels;
        assert_eq!(report.rebuilt_levels, Some((2, s)));
        // Reconstruction work matches the closed-form count for the
        // persistent slices; lazy work matches the non-persistent ones.
        let rebuild = recovery_blocks(MB, LowestTier::MtLevel(1), 4).unwrap();
        assert_eq!(report.rebuild_blocks, rebuild);
        let lazy = recovery_blocks(MB, LowestTier::MtLevel(1), 4).unwrap();
        assert_eq!(report.lazy_blocks, lazy);
        assert_eq!(report.work_blocks(), report.rebuild_blocks + report.lazy_blocks);
        assert!((report.wall_seconds - report.work_blocks() as f64 * 100.0 * 1e-9).abs() < 1e-12);
    }

    #[test]
    fn strict_crash_recovers_with_zero_reconstruction() {
        let params = params(MB, "4:4", PersistMode::Strict, false);
        let ops = mixed_ops(&params.map, 30);
        let (mut c, _, acked) = run_trace_until(&params, &ops, None).unwrap();
        c.crash();
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Verified);
        assert_eq!(report.work_blocks(), 0);
        for (addr, expect) in acked {
            assert_eq!(c.read(Address(addr)).unwrap().unwrap_done(), expect);
        }
    }

    #[test]
    fn lazy_recovery_touches_no_counters_or_data() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = mixed_ops(&params.map, 60);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        assert!(c.dev.counter_cache.dirty_lines() > 0, "non-persistent counters stay dirty");
        c.crash();
        let before_data = c.stats.recovery_data_touches;
        let before_ctr = c.stats.recovery_counter_touches;
        let report = recover(&mut c);
        assert_eq!(c.stats.recovery_data_touches, before_data);
        assert_eq!(c.stats.recovery_counter_touches, before_ctr);
        assert!(report.lazy_blocks > 0);
        // Post-recovery: reads of never-rewritten non-persistent blocks
        // return the initialization value with no tamper flag.
        let got = c.read(Address(0)).unwrap().unwrap_done();
        assert_eq!(got, [0u8; 64]);
    }

    #[test]
    fn first_write_after_lazy_recovery_reinitializes() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let addr = Address(4096);
        let mut c = Controller::new(params.clone());
        c.write(addr, &[9u8; 64]).unwrap().unwrap_done();
        c.dev.drain_wpq(&mut c.stats);
        c.crash();
        recover(&mut c);
        // The parent slot is zero now; the next write is a first touch.
        c.write(addr, &[4u8; 64]).unwrap().unwrap_done();
        assert_eq!(c.read(addr).unwrap().unwrap_done(), [4u8; 64]);
        // The counter restarted from a fresh block: minor 1 on block 1.
        let ctr = c.dev.counter_cache.get(addr.page_index()).unwrap();
        assert_eq!(ctr.major, 0);
        assert_eq!(ctr.minors[addr.block_in_page() as usize], 1);
        assert!(c.ledger.duplicates().is_empty(), "epoch rotation keeps pads unique");
    }

    #[test]
    fn post_recovery_random_ops_raise_no_spurious_flags() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = mixed_ops(&params.map, 80);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        c.crash();
        recover(&mut c);
        let follow = mixed_ops(&params.map, 500);
        for op in &follow {
            match op {
                TraceOp::Read(a) => {
                    c.read(*a).unwrap();
                }
                TraceOp::Write(a, s) => {
                    c.write(*a, &TraceOp::payload(*s)).unwrap();
                }
            }
        }
        assert!(c.ledger.duplicates().is_empty());
    }

    #[test]
    fn pinpoint_flagged_counter_under_p1_yields_one_page_range() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = persistent_writes(&params.map, 30);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        let page = ops[0].addr().page_index();
        c.dev.drain_wpq(&mut c.stats);
        c.crash();
        c.dev.inject_flip(BitFlip { target: Target::Counter(page), bit: 10 });
        c.dev.flag_uncorrectable(Target::Counter(page));
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Partial);
        assert_eq!(report.unverifiable.len(), 1);
        assert_eq!(report.unverifiable[0].start, page * PAGE_SIZE);
        assert_eq!(report.unverifiable[0].len, PAGE_SIZE);
    }

    #[test]
    fn pinpoint_corrupt_l1_node_with_intact_counters_yields_32kb() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = persistent_writes(&params.map, 30);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        let page = ops[0].addr().page_index();
        let l1 = c.geometry.ancestor_of_counter(page, 1);
        c.dev.drain_wpq(&mut c.stats);
        c.crash();
        c.dev.inject_flip(BitFlip { target: Target::Node(1, l1), bit: 7 });
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Partial);
        assert_eq!(report.unverifiable.len(), 1);
        assert_eq!(report.unverifiable[0].len, 8 * PAGE_SIZE, "an L1 node covers 32KB");
        // Pinpointing repaired the stored tier from the counters: reads in
        // the damaged span verify again.
        assert!(c.read(ops[0].addr()).is_ok());
    }

    #[test]
    fn corruption_under_p0_loses_a_whole_root_slot() {
        let params = params(MB, "4:4", PersistMode::Triad(0), false);
        let ops = persistent_writes(&params.map, 30);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        let page = ops[0].addr().page_index();
        c.dev.drain_wpq(&mut c.stats);
        c.crash();
        c.dev.inject_flip(BitFlip { target: Target::Counter(page), bit: 10 });
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Failed);
        assert_eq!(report.unverifiable.len(), 1);
        assert_eq!(report.unverifiable[0].len, c.map.slice_len(), "1/8 of memory unverifiable");
    }

    #[test]
    fn pinned_upper_tiers_shrink_the_unverifiable_span() {
        let params = params(MB, "4:4", PersistMode::Triad(0), true);
        let ops = persistent_writes(&params.map, 30);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        let page = ops[0].addr().page_index();
        c.dev.drain_wpq(&mut c.stats);
        c.crash();
        c.dev.inject_flip(BitFlip { target: Target::Counter(page), bit: 10 });
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Partial);
        assert!(!report.unverifiable.is_empty());
        for r in &report.unverifiable {
            assert!(r.len < c.map.slice_len(), "pinning must bound the span below a root slot");
        }
    }

    #[test]
    fn crash_points_enumerate_and_cover_mid_write_boundaries() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = persistent_writes(&params.map, 10);
        let plan = enumerate_crash_points(&params, &ops).unwrap();
        // At least data+counter+MT enqueues plus two register events per write.
        assert!(plan.total_events >= 10 * 5, "events {}", plan.total_events);
        let empty = enumerate_crash_points(&params, &[]).unwrap();
        assert_eq!(empty.point_count(), 1);
    }

    #[test]
    fn exhaustive_crash_sweep_on_short_trace_is_clean() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = mixed_ops(&params.map, 12);
        let report = crash_test(&params, &ops, CrashMode::Exhaustive, 2).unwrap();
        assert_eq!(hard_violations(&report, false), 0, "{}", report.summary_text());
        assert_eq!(report.pad_reuse_points, 0);
        assert!(report.checked_writes > 0);
    }

    #[test]
    fn attack_demo_reproduces_pad_reuse_and_rotation_prevents_it() {
        // A non-persistent address rewritten across a crash: with the
        // volatile key pinned, the regressed counter reissues a known pad.
        let mut params = params(MB, "4:4", PersistMode::Triad(1), false);
        let addr = Address(64);
        let ops: Vec<TraceOp> = (0..6).map(|i| TraceOp::Write(addr, i)).collect();
        let plan = enumerate_crash_points(&params, &ops).unwrap();
        let mid = plan.total_events / 2;

        params.rotate_volatile_key = false;
        let ledger = ledger_after_crash_resume(&params, &ops, mid).unwrap();
        assert!(!ledger.duplicates().is_empty(), "static key must reuse a pad");

        params.rotate_volatile_key = true;
        let ledger = ledger_after_crash_resume(&params, &ops, mid).unwrap();
        assert!(ledger.duplicates().is_empty(), "rotation must prevent reuse");
    }

    #[test]
    fn nopersist_crash_marks_persistent_region_unverifiable() {
        let params = params(MB, "4:4", PersistMode::NoPersist, false);
        let ops = persistent_writes(&params.map, 10);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        c.crash();
        let report = recover(&mut c);
        assert_eq!(report.outcome, RecoveryOutcome::Failed);
        let total: u64 = report.unverifiable.iter().map(|r| r.len).sum();
        assert_eq!(total, c.map.persistent_len);
    }

    #[test]
    fn report_serializes_to_text_and_csv() {
        let params = params(MB, "4:4", PersistMode::Triad(1), false);
        let ops = persistent_writes(&params.map, 5);
        let (mut c, _, _) = run_trace_until(&params, &ops, None).unwrap();
        c.crash();
        let report = recover(&mut c);
        let text = report.to_text();
        assert!(text.contains("outcome          verified"));
        assert!(text.contains("rebuilt-from     mt1"));
        let row = report.to_csv_row();
        assert_eq!(row.split(',').count(), RecoveryReport::CSV_HEADER.split(',').count());
    }
}
