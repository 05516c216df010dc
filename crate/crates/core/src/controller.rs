//! The secure memory controller: verified reads, the crash-consistent write
//! path, per-region key selection, and persistence-policy enforcement.
//!
//! Every durable transition passes through an event gate, which is what the
//! crash harness uses to stop a run at an exact boundary. A write logs its
//! full record to the persistent registers (READY_BIT set) before anything
//! is copied toward the WPQ, so recovery can replay a torn write
//! idempotently from the registers.

use crate::analytics::{PadLedger, RunStats};
use crate::crypto::{self, mac64, Key128, KeySet};
use crate::devices::{
    DeviceParams, DeviceState, Target, WpqEntry, WpqPayload, WriteRecord,
};
use crate::error::SimError;
use crate::geometry::{
    region_of, Address, BumpOutcome, DataBlock, Iv, Region, RegionMap, SplitCounterBlock,
    BLOCKS_PER_PAGE,
};
use crate::merkle::{MerkleNode, TreeGeometry};
use std::collections::BTreeSet;

/// Persistence rule for security metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersistMode {
    /// Counters and every MT level write-through, both regions.
    Strict,
    /// Persistent-region counters write-through, persistent-subtree MT
    /// levels 1..=P write-through, everything else write-back.
    Triad(u8),
    /// Everything write-back; data still goes through the WPQ.
    NoPersist,
}

impl PersistMode {
    pub fn parse(s: &str) -> Result<Self, SimError> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "strict" => Ok(PersistMode::Strict),
            "none" | "nopersist" => Ok(PersistMode::NoPersist),
            _ => {
                if let Some(p) = s.strip_prefix("triad:") {
                    let p: u8 = p
                        .parse()
                        .map_err(|_| SimError::Config(format!("bad persist level in `{s}`")))?;
                    Ok(PersistMode::Triad(p))
                } else {
                    Err(SimError::Config(format!(
                        "bad policy `{s}` (expected strict, triad:P, or none)"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for PersistMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PersistMode::Strict => write!(f, "strict"),
            PersistMode::Triad(p) => write!(f, "triad:{p}"),
            PersistMode::NoPersist => write!(f, "none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PersistPolicy {
    pub mode: PersistMode,
    /// Keep durable copies of the top two NVM node tiers to shrink the
    /// worst-case unverifiable span. Off by default.
    pub pin_upper_tiers: bool,
}

impl PersistPolicy {
    pub fn counter_strict(&self, region: Region) -> bool {
        match self.mode {
            PersistMode::Strict => true,
            PersistMode::Triad(_) => region == Region::Persistent,
            PersistMode::NoPersist => false,
        }
    }

    /// Number of MT levels strictly persisted for a region.
    pub fn strict_node_levels(&self, region: Region, node_levels: u8) -> u8 {
        match self.mode {
            PersistMode::Strict => node_levels,
            PersistMode::Triad(p) => {
                if region == Region::Persistent {
                    p.min(node_levels)
                } else {
                    0
                }
            }
            PersistMode::NoPersist => 0,
        }
    }

    /// Whether this region's subtree is zero-initialized lazily after a
    /// crash (and therefore needs the zero-MAC avoidance rule).
    pub fn lazy_eligible(&self, region: Region) -> bool {
        match self.mode {
            PersistMode::Strict => false,
            PersistMode::Triad(_) => region == Region::NonPersistent,
            PersistMode::NoPersist => true,
        }
    }

    /// Persistent register slots a write record needs under this policy:
    /// data + counter + strict MT levels + root image.
    pub fn register_slots(&self, node_levels: u8) -> usize {
        let p = self.strict_node_levels(Region::Persistent, node_levels) as usize;
        2 + p + 1
    }

    pub fn describe(&self) -> String {
        let mut s = match self.mode {
            PersistMode::Strict => "strict".to_string(),
            PersistMode::Triad(p) => format!("triad:{p}"),
            PersistMode::NoPersist => "none".to_string(),
        };
        if self.pin_upper_tiers {
            s.push_str("+pin");
        }
        s
    }
}

/// Result of an operation that may be cut short at a crash point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress<T> {
    Done(T),
    Interrupted,
}

impl<T> Progress<T> {
    pub fn unwrap_done(self) -> T {
        match self {
            Progress::Done(v) => v,
            Progress::Interrupted => panic!("operation was interrupted"),
        }
    }
}

/// Kinds of durable event boundaries, for crash-point diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PageSweep,
    RecordLog,
    RootUpdate,
    CacheUpdate,
    Eviction,
    WpqData,
    WpqCounter,
    WpqNode,
    ReadyClear,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PageSweep => "page-sweep",
            EventKind::RecordLog => "record-log",
            EventKind::RootUpdate => "root-update",
            EventKind::CacheUpdate => "cache-update",
            EventKind::Eviction => "eviction",
            EventKind::WpqData => "wpq-data",
            EventKind::WpqCounter => "wpq-counter",
            EventKind::WpqNode => "wpq-node",
            EventKind::ReadyClear => "ready-clear",
        }
    }
}

const MAX_ZERO_MAC_ITERATIONS: u32 = 64;

/// Re-encrypt one cacheline at a time (bumping its minor) until the counter
/// block's MAC differs from `forbidden`, which the lazy-recovery scheme
/// reserves as the first-touch marker. Capped at 64 iterations with a
/// diagnostic, though a persistent collision needs ~2^-64 odds per try.
pub fn ensure_nonzero_counter_mac(
    ctr: &mut SplitCounterBlock,
    mut mac_of: impl FnMut(&SplitCounterBlock) -> u64,
    forbidden: u64,
) -> Result<(u64, u32, bool), SimError> {
    let mut overflowed = false;
    for i in 0..=MAX_ZERO_MAC_ITERATIONS {
        let m = mac_of(ctr);
        if m != forbidden {
            return Ok((m, i, overflowed));
        }
        if i == MAX_ZERO_MAC_ITERATIONS {
            break;
        }
        let line = (i % 64) as u8;
        match ctr.bump(line) {
            BumpOutcome::Minor => {}
            BumpOutcome::Overflowed => overflowed = true,
            BumpOutcome::RekeyRequired => return Err(SimError::ZeroMacDiverged(i)),
        }
    }
    Err(SimError::ZeroMacDiverged(MAX_ZERO_MAC_ITERATIONS))
}

#[derive(Debug, Clone)]
pub struct ControllerParams {
    pub map: RegionMap,
    pub policy: PersistPolicy,
    pub devices: DeviceParams,
    pub seed: u64,
    pub rotate_volatile_key: bool,
    pub t_block_ns: f64,
}

/// One simulated memory controller plus the device state it owns.
#[derive(Debug, Clone)]
pub struct Controller {
    pub map: RegionMap,
    pub geometry: TreeGeometry,
    pub policy: PersistPolicy,
    pub keys: KeySet,
    mac_key: u64,
    pub dev: DeviceState,
    pub ledger: PadLedger,
    pub stats: RunStats,
    pub t_block_ns: f64,
    /// Slices whose subtrees were lazily zero-initialized by the most
    /// recent recovery; zero parent slots mean first-touch only here.
    pub lazy_slices: BTreeSet<u64>,
    event_counter: u64,
    event_budget: Option<u64>,
    event_log: Option<Vec<EventKind>>,
}

fn iv_of(page: u64, block_in_page: u8, ctr: &SplitCounterBlock) -> Iv {
    Iv {
        page_id: page,
        page_offset: block_in_page,
        major: ctr.major,
        minor: ctr.minors[block_in_page as usize],
    }
}

fn node_key(level: u8, index: u64) -> u64 {
    ((level as u64) << 48) | index
}

enum CounterFetch {
    Verified(SplitCounterBlock),
    FirstTouch,
}

macro_rules! gate {
    ($self:expr, $kind:expr) => {
        if $self.event($kind) {
            return Ok(Progress::Interrupted);
        }
    };
}

macro_rules! try_prog {
    ($e:expr) => {
        match $e? {
            Progress::Done(v) => v,
            Progress::Interrupted => return Ok(Progress::Interrupted),
        }
    };
}

impl Controller {
    pub fn new(params: ControllerParams) -> Self {
        let geometry = TreeGeometry::for_capacity(params.map.capacity);
        if let PersistMode::Triad(p) = params.policy.mode {
            assert!(
                p <= geometry.node_levels,
                "persist level must be validated against tree depth before construction"
            );
        }
        let keys = KeySet::new(params.seed, params.rotate_volatile_key);
        let mac_key = keys.tree_mac_key();
        let dev = DeviceState::new(geometry.clone(), mac_key, &params.devices, params.policy.pin_upper_tiers);
        Controller {
            map: params.map,
            geometry,
            policy: params.policy,
            keys,
            mac_key,
            dev,
            ledger: PadLedger::default(),
            stats: RunStats::default(),
            t_block_ns: params.t_block_ns,
            lazy_slices: BTreeSet::new(),
            event_counter: 0,
            event_budget: None,
            event_log: None,
        }
    }

    pub fn mac_key(&self) -> u64 {
        self.mac_key
    }

    /// Total durable event boundaries seen so far.
    pub fn event_count(&self) -> u64 {
        self.event_counter
    }

    /// Stop (simulating a crash point) after `n` more durable events.
    pub fn set_event_budget(&mut self, n: Option<u64>) {
        self.event_budget = n;
    }

    pub fn start_event_log(&mut self) {
        self.event_log = Some(Vec::new());
    }

    pub fn take_event_log(&mut self) -> Vec<EventKind> {
        self.event_log.take().unwrap_or_default()
    }

    /// Returns true when the budget is exhausted and the caller must stop.
    fn event(&mut self, kind: EventKind) -> bool {
        if let Some(budget) = &mut self.event_budget {
            if *budget == 0 {
                return true;
            }
            *budget -= 1;
        }
        self.event_counter += 1;
        if let Some(log) = &mut self.event_log {
            log.push(kind);
        }
        false
    }

    pub fn select_key(&self, region: Region) -> Key128 {
        match region {
            Region::Persistent => self.keys.persistent_key(),
            Region::NonPersistent => self.keys.volatile_key(),
        }
    }

    fn check_addr(&self, addr: Address) -> Result<Region, SimError> {
        if !addr.is_block_aligned() {
            return Err(SimError::Config(format!("address {:#x} is not 64B-aligned", addr.0)));
        }
        region_of(addr, &self.map)
    }

    fn counter_mac(&self, ctr: &SplitCounterBlock) -> u64 {
        mac64(self.mac_key, &ctr.to_bytes())
    }

    fn insert_counter_line(
        &mut self,
        page: u64,
        ctr: SplitCounterBlock,
        dirty: bool,
        region: Region,
    ) -> Result<Progress<()>, SimError> {
        if let Some(victim) = self.dev.counter_cache.insert(page, ctr, dirty, region) {
            gate!(self, EventKind::Eviction);
            let entry = WpqEntry {
                target: Target::Counter(victim.key),
                payload: WpqPayload::Counter(victim.value),
                cause_is_recovery: false,
                mt_level: 0,
            };
            self.dev.enqueue(entry, &mut self.stats);
        }
        Ok(Progress::Done(()))
    }

    fn insert_node_line(
        &mut self,
        level: u8,
        index: u64,
        node: MerkleNode,
        dirty: bool,
        region: Region,
    ) -> Result<Progress<()>, SimError> {
        if let Some(victim) = self.dev.mt_cache.insert(node_key(level, index), node, dirty, region) {
            gate!(self, EventKind::Eviction);
            let vlevel = (victim.key >> 48) as u8;
            let vindex = victim.key & 0xffff_ffff_ffff;
            let entry = WpqEntry {
                target: Target::Node(vlevel, vindex),
                payload: WpqPayload::Node(victim.value),
                cause_is_recovery: false,
                mt_level: vlevel,
            };
            self.dev.enqueue(entry, &mut self.stats);
        }
        Ok(Progress::Done(()))
    }

    /// Ancestor node values for a counter, levels 1..=node_levels, each one
    /// either already trusted in the MT cache or fetched and verified up the
    /// chain. Fetched nodes are cached clean.
    fn verified_ancestor_chain(
        &mut self,
        counter_idx: u64,
        region: Region,
    ) -> Result<Progress<Vec<MerkleNode>>, SimError> {
        let s = self.geometry.node_levels;
        let slice = self.geometry.slice_of_counter(counter_idx);
        let mut values: Vec<(MerkleNode, bool)> = Vec::with_capacity(s as usize);
        for level in 1..=s {
            let idx = self.geometry.ancestor_of_counter(counter_idx, level);
            if let Some(v) = self.dev.mt_cache.get(node_key(level, idx)) {
                self.stats.mt_cache_hits += 1;
                values.push((v, true));
            } else {
                self.stats.mt_cache_misses += 1;
                self.stats.node_nvm_fetches += 1;
                self.stats.latency_ns += self.dev.nvm.read_ns;
                values.push((self.dev.backing_node(level, idx), false));
            }
        }
        // Validate fetched nodes top-down; a cached node is a trusted anchor.
        for level in (1..=s).rev() {
            let (node, cached) = values[level as usize - 1];
            if cached {
                continue;
            }
            let expected = if level == s {
                self.dev.root.slots[slice as usize]
            } else {
                let slot = self.geometry.slot_in_ancestor(counter_idx, level + 1);
                values[level as usize].0.slots[slot]
            };
            let (parent_cached_or_root, parent_level, parent_idx) = if level == s {
                (true, self.geometry.hash_levels, slice)
            } else {
                (
                    values[level as usize].1,
                    level + 1,
                    self.geometry.ancestor_of_counter(counter_idx, level + 1),
                )
            };
            // Only compare against a parent that is itself trusted by now:
            // root, cached, or validated in an earlier (higher) iteration.
            let _ = parent_cached_or_root;
            if node.mac(self.mac_key) != expected {
                return Err(SimError::IntegrityViolation {
                    level: parent_level,
                    index: parent_idx,
                    detail: "tree node MAC does not match its parent slot".into(),
                });
            }
        }
        // Cache the now-verified fetched nodes.
        for level in 1..=s {
            let (node, cached) = values[level as usize - 1];
            if !cached {
                let idx = self.geometry.ancestor_of_counter(counter_idx, level);
                try_prog!(self.insert_node_line(level, idx, node, false, region));
            }
        }
        Ok(Progress::Done(values.into_iter().map(|(n, _)| n).collect()))
    }

    /// The counter's parent slot: level-1 ancestor slot, or the root slot
    /// for single-counter slices.
    fn parent_slot_of_counter(&mut self, counter_idx: u64, chain: &[MerkleNode]) -> u64 {
        let slice = self.geometry.slice_of_counter(counter_idx);
        if self.geometry.node_levels == 0 {
            self.dev.root.slots[slice as usize]
        } else {
            chain[0].slots[self.geometry.slot_in_ancestor(counter_idx, 1)]
        }
    }

    fn fetch_counter_verified(
        &mut self,
        page: u64,
        region: Region,
    ) -> Result<Progress<CounterFetch>, SimError> {
        if let Some(ctr) = self.dev.counter_cache.get(page) {
            self.stats.counter_cache_hits += 1;
            return Ok(Progress::Done(CounterFetch::Verified(ctr)));
        }
        self.stats.counter_cache_misses += 1;
        self.stats.latency_ns += self.dev.nvm.read_ns;
        let ctr = self.dev.backing_counter(page);
        let chain = try_prog!(self.verified_ancestor_chain(page, region));
        let slot = self.parent_slot_of_counter(page, &chain);
        let slice = self.geometry.slice_of_counter(page);
        if slot == 0 && self.lazy_slices.contains(&slice) {
            // First touch after lazy recovery: the counter block's stale
            // content is meaningless; do not cache or verify it.
            return Ok(Progress::Done(CounterFetch::FirstTouch));
        }
        if self.counter_mac(&ctr) != slot {
            let (level, index) = if self.geometry.node_levels == 0 {
                (self.geometry.hash_levels, slice)
            } else {
                (1, self.geometry.ancestor_of_counter(page, 1))
            };
            return Err(SimError::IntegrityViolation {
                level,
                index,
                detail: format!("counter block {page} MAC mismatch"),
            });
        }
        try_prog!(self.insert_counter_line(page, ctr, false, region));
        Ok(Progress::Done(CounterFetch::Verified(ctr)))
    }

    /// Verified read: counter via cache (verify on fill), data MAC checked
    /// over ciphertext and counter, then pad decryption.
    pub fn read(&mut self, addr: Address) -> Result<Progress<[u8; 64]>, SimError> {
        let region = self.check_addr(addr)?;
        self.stats.trace_reads += 1;
        let page = addr.page_index();
        let ctr = match try_prog!(self.fetch_counter_verified(page, region)) {
            CounterFetch::Verified(c) => c,
            CounterFetch::FirstTouch => {
                // Discarded-data semantics: the initialization value, with
                // no verification claim and no state change.
                return Ok(Progress::Done([0u8; 64]));
            }
        };
        let block = addr.block_index();
        self.stats.latency_ns += self.dev.nvm.read_ns;
        match self.dev.backing_data(block) {
            None => Ok(Progress::Done([0u8; 64])),
            Some(cell) => {
                let key = self.select_key(region);
                let iv = iv_of(page, addr.block_in_page(), &ctr);
                if crypto::data_mac(self.mac_key, &iv, &cell.bytes) != cell.mac {
                    return Err(SimError::IntegrityViolation {
                        level: 0,
                        index: block,
                        detail: "data MAC mismatch".into(),
                    });
                }
                Ok(Progress::Done(crypto::decrypt_block(&cell.bytes, key, &iv)))
            }
        }
    }

    /// Crash-consistent write. Returns `Interrupted` when the event budget
    /// ran out mid-protocol, leaving the state exactly at that boundary.
    pub fn write(&mut self, addr: Address, plain: &[u8; 64]) -> Result<Progress<()>, SimError> {
        let region = self.check_addr(addr)?;
        self.stats.trace_writes += 1;
        let page = addr.page_index();
        let bip = addr.block_in_page();
        let slice = self.geometry.slice_of_counter(page);

        let fetched = try_prog!(self.fetch_counter_verified(page, region));
        let (old_ctr, first_touch) = match fetched {
            CounterFetch::Verified(c) => (c, false),
            CounterFetch::FirstTouch => (SplitCounterBlock::default(), true),
        };

        let mut ctr = old_ctr;
        let mut overflowed = match ctr.bump(bip) {
            BumpOutcome::Minor => false,
            BumpOutcome::Overflowed => true,
            BumpOutcome::RekeyRequired => {
                // Whole-memory re-key is counted as an event, not simulated.
                self.stats.rekey_events += 1;
                ctr = SplitCounterBlock::default();
                ctr.bump(bip);
                false
            }
        };
        if self.policy.lazy_eligible(region) {
            let key = self.mac_key;
            let (_, _, ovf) = ensure_nonzero_counter_mac(
                &mut ctr,
                |c| mac64(key, &c.to_bytes()),
                0,
            )?;
            overflowed |= ovf;
        }

        let key = self.select_key(region);
        let page_base = page * BLOCKS_PER_PAGE;
        let mut data_records: Vec<(u64, DataBlock)> = Vec::new();
        let mut pads: Vec<(Key128, Iv)> = Vec::new();
        for i in 0..BLOCKS_PER_PAGE {
            let is_target = i as u8 == bip;
            let changed = overflowed || ctr.minors[i as usize] != old_ctr.minors[i as usize];
            if !changed {
                continue;
            }
            let block = page_base + i;
            let existing = if first_touch { None } else { self.dev.backing_data(block) };
            if !is_target && existing.is_none() && !overflowed {
                // A zero-avoidance bump on a never-written line encrypts the
                // zero fill it would read as.
            }
            if !is_target && existing.is_none() && overflowed {
                continue; // nothing stored, nothing to re-encrypt
            }
            let block_plain = if is_target {
                *plain
            } else if let Some(cell) = existing {
                let old_iv = iv_of(page, i as u8, &old_ctr);
                crypto::decrypt_block(&cell.bytes, key, &old_iv)
            } else {
                [0u8; 64]
            };
            let iv = iv_of(page, i as u8, &ctr);
            let cipher = crypto::encrypt_block(&block_plain, key, &iv);
            let mac = crypto::data_mac(self.mac_key, &iv, &cipher);
            data_records.push((block, DataBlock { bytes: cipher, mac }));
            pads.push((key, iv));
        }

        // New tree path.
        let chain = try_prog!(self.verified_ancestor_chain(page, region));
        let mut new_nodes: Vec<((u8, u64), MerkleNode)> = Vec::with_capacity(chain.len());
        let mut mac = self.counter_mac(&ctr);
        for (level0, node) in chain.iter().enumerate() {
            let level = level0 as u8 + 1;
            let idx = self.geometry.ancestor_of_counter(page, level);
            let mut node = *node;
            node.slots[self.geometry.slot_in_ancestor(page, level)] = mac;
            mac = node.mac(self.mac_key);
            new_nodes.push(((level, idx), node));
        }
        let mut new_root = self.dev.root;
        new_root.slots[slice as usize] = mac;

        let counter_strict = self.policy.counter_strict(region);
        let strict_levels = self.policy.strict_node_levels(region, self.geometry.node_levels);

        // Durable protocol: sweep (first touch), record log, root update,
        // cache updates, WPQ copies, ack.
        if first_touch {
            gate!(self, EventKind::PageSweep);
            for b in page_base..page_base + BLOCKS_PER_PAGE {
                self.dev.nvm.data.remove(&b);
                self.dev.flagged.remove(&Target::Data(b));
            }
            self.dev.flagged.remove(&Target::Counter(page));
        }

        gate!(self, EventKind::RecordLog);
        let record = WriteRecord {
            data: data_records.clone(),
            counter: counter_strict.then_some((page, ctr)),
            nodes: new_nodes.iter().take(strict_levels as usize).cloned().collect(),
            root_image: new_root,
        };
        self.dev.regs.record = Some(record);
        self.dev.regs.ready = true;
        for (k, iv) in &pads {
            self.ledger.record(*k, *iv);
        }

        gate!(self, EventKind::RootUpdate);
        self.dev.root = new_root;
        if let Some(pins) = &mut self.dev.pinned_upper {
            let s = self.geometry.node_levels;
            for ((level, idx), node) in &new_nodes {
                if *level + 1 >= s {
                    pins.insert((*level, *idx), *node);
                }
            }
        }

        gate!(self, EventKind::CacheUpdate);
        try_prog!(self.insert_counter_line(page, ctr, !counter_strict, region));
        for ((level, idx), node) in &new_nodes {
            let dirty = *level > strict_levels;
            try_prog!(self.insert_node_line(*level, *idx, *node, dirty, region));
        }

        // Strict-tier copies: data, then counter, then MT levels 1..=P.
        for (block, cell) in &data_records {
            gate!(self, EventKind::WpqData);
            let entry = WpqEntry {
                target: Target::Data(*block),
                payload: WpqPayload::Data(*cell),
                cause_is_recovery: false,
                mt_level: 0,
            };
            self.dev.enqueue(entry, &mut self.stats);
            self.dev.flagged.remove(&Target::Data(*block));
        }
        if counter_strict {
            gate!(self, EventKind::WpqCounter);
            let entry = WpqEntry {
                target: Target::Counter(page),
                payload: WpqPayload::Counter(ctr),
                cause_is_recovery: false,
                mt_level: 0,
            };
            self.dev.enqueue(entry, &mut self.stats);
            self.dev.flagged.remove(&Target::Counter(page));
        }
        for ((level, idx), node) in new_nodes.iter().take(strict_levels as usize) {
            gate!(self, EventKind::WpqNode);
            let entry = WpqEntry {
                target: Target::Node(*level, *idx),
                payload: WpqPayload::Node(*node),
                cause_is_recovery: false,
                mt_level: *level,
            };
            self.dev.enqueue(entry, &mut self.stats);
            self.dev.flagged.remove(&Target::Node(*level, *idx));
        }

        gate!(self, EventKind::ReadyClear);
        self.dev.regs.ready = false;
        self.dev.regs.record = None;
        Ok(Progress::Done(()))
    }

    /// The crash operator: erases the volatile caches, keeps everything in
    /// the persistence domain.
    pub fn crash(&mut self) {
        self.stats.crashes += 1;
        self.dev.crash();
        self.event_budget = None;
    }

    /// Deterministic fingerprint of all durable state.
    pub fn state_hash(&self) -> u64 {
        let mut h = crypto::StreamHasher::new(0x7472_6961_6473_696d);
        h.update(&self.dev.durable_hash().to_le_bytes());
        h.update(&self.keys.volatile_epoch().to_le_bytes());
        for s in &self.lazy_slices {
            h.update(&s.to_le_bytes());
        }
        h.finish()
    }
}
