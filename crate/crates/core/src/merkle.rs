//! 8-ary hash tree over the split-counter blocks.
//!
//! The device is cut into eight equal address slices, one per slot of the
//! on-chip root register, and each slice carries its own subtree. That keeps
//! every root slot covering exclusively persistent or exclusively
//! non-persistent space for any legal p:n ratio. Within a slice the tree is
//! the usual 8-ary reduction with ragged edges: missing children contribute
//! MAC 0 and are excluded from verification.
//!
//! Levels are counted from the counters up: counter blocks are tier 0,
//! levels `1..=node_levels` live in NVM as 64B node blocks, and the root
//! register (tier `node_levels + 1`) stays inside the processor.

use crate::crypto::{mac64, Mac64};
use crate::geometry::{RegionMap, Region, PAGE_SIZE, ROOT_SLOTS};

/// Shape of the tree for a given capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGeometry {
    pub counter_blocks: u64,
    /// Counter blocks covered by each root slot (last slices may be short).
    pub counters_per_slice: u64,
    /// NVM-resident hash levels above the counters.
    pub node_levels: u8,
    /// Hash levels including the on-chip root.
    pub hash_levels: u8,
    /// Per-level node stride between slices: `ceil(counters_per_slice / 8^l)`.
    strides: Vec<u64>,
}

fn pow8(l: u8) -> u64 {
    1u64 << (3 * l as u32)
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

impl TreeGeometry {
    pub fn for_capacity(capacity: u64) -> Self {
        assert!(capacity >= PAGE_SIZE && capacity % PAGE_SIZE == 0, "capacity must be whole pages");
        Self::for_counter_blocks(capacity / PAGE_SIZE)
    }

    pub fn for_counter_blocks(counter_blocks: u64) -> Self {
        assert!(counter_blocks >= 1);
        let cps = ceil_div(counter_blocks, ROOT_SLOTS);
        let mut s = 0u8;
        if cps > 1 {
            s = 1;
            while pow8(s) < cps {
                s += 1;
            }
        }
        let strides = (1..=s).map(|l| ceil_div(cps, pow8(l))).collect();
        TreeGeometry {
            counter_blocks,
            counters_per_slice: cps,
            node_levels: s,
            hash_levels: s + 1,
            strides,
        }
    }

    /// Number of counter blocks in a slice (0 for empty tail slices).
    pub fn slice_len(&self, slice: u64) -> u64 {
        let start = slice * self.counters_per_slice;
        self.counter_blocks.saturating_sub(start).min(self.counters_per_slice)
    }

    pub fn slice_of_counter(&self, counter_idx: u64) -> u64 {
        counter_idx / self.counters_per_slice
    }

    /// Stride between slices at a level (also the per-slice node capacity).
    pub fn level_stride(&self, level: u8) -> u64 {
        self.strides[level as usize - 1]
    }

    /// Nodes a slice actually has at a level.
    pub fn slice_node_count(&self, slice: u64, level: u8) -> u64 {
        let len = self.slice_len(slice);
        if len == 0 {
            0
        } else if level == 0 {
            len
        } else {
            ceil_div(len, pow8(level))
        }
    }

    /// Total node blocks at a level across all slices.
    pub fn level_node_count(&self, level: u8) -> u64 {
        (0..ROOT_SLOTS).map(|s| self.slice_node_count(s, level)).sum()
    }

    pub fn node_index(&self, level: u8, slice: u64, within: u64) -> u64 {
        slice * self.level_stride(level) + within
    }

    pub fn node_slice(&self, level: u8, index: u64) -> u64 {
        index / self.level_stride(level)
    }

    /// Global index of the level-`level` ancestor of a counter block.
    pub fn ancestor_of_counter(&self, counter_idx: u64, level: u8) -> u64 {
        let slice = self.slice_of_counter(counter_idx);
        let within = counter_idx % self.counters_per_slice;
        self.node_index(level, slice, within / pow8(level))
    }

    /// Slot inside the level-`level` ancestor that covers this counter.
    pub fn slot_in_ancestor(&self, counter_idx: u64, level: u8) -> usize {
        let within = counter_idx % self.counters_per_slice;
        ((within / pow8(level - 1)) % 8) as usize
    }

    /// How many children a node has (ragged edges have fewer than 8).
    pub fn child_count(&self, level: u8, index: u64) -> u64 {
        let slice = self.node_slice(level, index);
        let within = index % self.level_stride(level);
        let below = self.slice_node_count(slice, level - 1);
        (below - 8 * within).min(8)
    }

    /// Counter blocks covered by one node at a level.
    pub fn counters_under_node(&self, level: u8) -> u64 {
        pow8(level)
    }
}

/// One 64-byte tree node: eight 8-byte MAC slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MerkleNode {
    pub slots: [Mac64; 8],
}

impl MerkleNode {
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        for (i, s) in self.slots.iter().enumerate() {
            out[i * 8..i * 8 + 8].copy_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 64]) -> Self {
        let mut slots = [0u64; 8];
        for (i, s) in slots.iter_mut().enumerate() {
            *s = u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
        }
        MerkleNode { slots }
    }

    pub fn mac(&self, key: u64) -> Mac64 {
        mac64(key, &self.to_bytes())
    }
}

/// The on-chip root: one 64B register, eight MAC slots, never written to NVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RootRegister {
    pub slots: [Mac64; 8],
}

/// One step of an update path, from level 1 up to the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathNode {
    /// 1..=node_levels for NVM nodes; hash_levels for the root slot.
    pub level: u8,
    /// Global node index, or the root slot index at the root level.
    pub index: u64,
}

/// Fully materialized tree. Serves as the from-scratch oracle and as the
/// recovery scratch space; the live simulation keeps nodes in NVM + caches.
#[derive(Debug, Clone)]
pub struct TreeImage {
    pub geometry: TreeGeometry,
    /// `levels[l-1]` holds level-l nodes, `8 * stride(l)` entries (tail
    /// entries of short slices are unused zeros).
    levels: Vec<Vec<MerkleNode>>,
    pub root: RootRegister,
}

impl TreeImage {
    pub fn empty(geometry: TreeGeometry) -> Self {
        let levels = (1..=geometry.node_levels)
            .map(|l| vec![MerkleNode::default(); (ROOT_SLOTS * geometry.level_stride(l)) as usize])
            .collect();
        TreeImage { geometry, levels, root: RootRegister::default() }
    }

    pub fn node(&self, level: u8, index: u64) -> &MerkleNode {
        &self.levels[level as usize - 1][index as usize]
    }

    pub fn node_mut(&mut self, level: u8, index: u64) -> &mut MerkleNode {
        &mut self.levels[level as usize - 1][index as usize]
    }

    /// Recomputes the path for one updated counter block and returns the
    /// dirtied nodes bottom-up, root slot last. Always `hash_levels` entries.
    pub fn update_path(&mut self, counter_idx: u64, counter_bytes: &[u8; 64], key: u64) -> Vec<PathNode> {
        let g = self.geometry.clone();
        let mut dirtied = Vec::with_capacity(g.hash_levels as usize);
        let mut mac = mac64(key, counter_bytes);
        for level in 1..=g.node_levels {
            let idx = g.ancestor_of_counter(counter_idx, level);
            let slot = g.slot_in_ancestor(counter_idx, level);
            let node = self.node_mut(level, idx);
            node.slots[slot] = mac;
            mac = node.mac(key);
            dirtied.push(PathNode { level, index: idx });
        }
        let slice = g.slice_of_counter(counter_idx);
        self.root.slots[slice as usize] = mac;
        dirtied.push(PathNode { level: g.hash_levels, index: slice });
        dirtied
    }

    /// Recomputes child MACs upward until a trusted node or the root.
    /// Returns the location holding the first mismatching slot.
    pub fn verify_path(
        &self,
        counter_idx: u64,
        counter_bytes: &[u8; 64],
        key: u64,
        trusted: impl Fn(u8, u64) -> bool,
    ) -> Result<(), PathNode> {
        let g = &self.geometry;
        let mut mac = mac64(key, counter_bytes);
        for level in 1..=g.node_levels {
            let idx = g.ancestor_of_counter(counter_idx, level);
            let slot = g.slot_in_ancestor(counter_idx, level);
            let node = self.node(level, idx);
            if node.slots[slot] != mac {
                return Err(PathNode { level, index: idx });
            }
            if trusted(level, idx) {
                return Ok(());
            }
            mac = node.mac(key);
        }
        let slice = g.slice_of_counter(counter_idx);
        if self.root.slots[slice as usize] != mac {
            return Err(PathNode { level: g.hash_levels, index: slice });
        }
        Ok(())
    }

    /// Binary dump: magic, counter count, level count, then level-order node
    /// blocks (existing nodes only, slice-major within each level), then the
    /// root as a 64B block. All integers little-endian.
    pub fn dump(&self) -> Vec<u8> {
        let g = &self.geometry;
        let mut out = Vec::new();
        out.extend_from_slice(b"MTDUMP01");
        out.extend_from_slice(&g.counter_blocks.to_le_bytes());
        out.push(g.node_levels);
        for level in 1..=g.node_levels {
            for slice in 0..ROOT_SLOTS {
                for within in 0..g.slice_node_count(slice, level) {
                    let idx = g.node_index(level, slice, within);
                    out.extend_from_slice(&self.node(level, idx).to_bytes());
                }
            }
        }
        let root_node = MerkleNode { slots: self.root.slots };
        out.extend_from_slice(&root_node.to_bytes());
        out
    }
}

/// Builds the whole tree bottom-up from a counter-block lookup. This is the
/// from-scratch oracle the incremental path is checked against.
pub fn build_full(
    geometry: &TreeGeometry,
    counter_at: impl Fn(u64) -> [u8; 64],
    key: u64,
) -> TreeImage {
    let mut img = TreeImage::empty(geometry.clone());
    for slice in 0..ROOT_SLOTS {
        let len = geometry.slice_len(slice);
        if len == 0 {
            continue;
        }
        let base = slice * geometry.counters_per_slice;
        // Level 1 from counters.
        if geometry.node_levels >= 1 {
            for w in 0..geometry.slice_node_count(slice, 1) {
                let idx = geometry.node_index(1, slice, w);
                let mut node = MerkleNode::default();
                for c in 0..geometry.child_count(1, idx) {
                    node.slots[c as usize] = mac64(key, &counter_at(base + 8 * w + c));
                }
                *img.node_mut(1, idx) = node;
            }
        }
        for level in 2..=geometry.node_levels {
            for w in 0..geometry.slice_node_count(slice, level) {
                let idx = geometry.node_index(level, slice, w);
                let mut node = MerkleNode::default();
                for c in 0..geometry.child_count(level, idx) {
                    let child = geometry.node_index(level - 1, slice, 8 * w + c);
                    node.slots[c as usize] = img.node(level - 1, child).mac(key);
                }
                *img.node_mut(level, idx) = node;
            }
        }
        img.root.slots[slice as usize] = if geometry.node_levels == 0 {
            mac64(key, &counter_at(base))
        } else {
            let top = geometry.node_index(geometry.node_levels, slice, 0);
            img.node(geometry.node_levels, top).mac(key)
        };
    }
    img
}

/// Initial node values for an all-zero counter store, per distinct slice
/// length. Lets the NVM model answer reads of never-written metadata without
/// materializing the whole tree.
#[derive(Debug, Clone)]
pub struct InitialSliceValues {
    full: Vec<MerkleNode>,
    last: Vec<MerkleNode>,
    pub counter_mac: Mac64,
    pub root_slot: Mac64,
}

impl InitialSliceValues {
    pub fn build(geometry: &TreeGeometry, slice_len: u64, key: u64) -> Self {
        let counter_mac = mac64(key, &[0u8; 64]);
        if slice_len == 0 {
            return InitialSliceValues { full: Vec::new(), last: Vec::new(), counter_mac, root_slot: 0 };
        }
        let s = geometry.node_levels;
        let mut full = Vec::with_capacity(s as usize);
        let mut last = Vec::with_capacity(s as usize);
        let mut full_mac = Vec::with_capacity(s as usize);
        let mut last_mac = Vec::with_capacity(s as usize);
        let mut below_count = slice_len;
        let mut below_full = counter_mac;
        let mut below_last = counter_mac;
        for level in 1..=s {
            let count = ceil_div(below_count, 8);
            let full_node = MerkleNode { slots: [below_full; 8] };
            let k = (below_count - 8 * (count - 1)) as usize;
            let mut last_node = MerkleNode::default();
            for j in 0..k {
                last_node.slots[j] = if j == k - 1 { below_last } else { below_full };
            }
            if count == 1 {
                // The only node is the last node.
                full.push(last_node);
                full_mac.push(last_node.mac(key));
            } else {
                full.push(full_node);
                full_mac.push(full_node.mac(key));
            }
            last.push(last_node);
            last_mac.push(last_node.mac(key));
            below_count = count;
            below_full = full_mac[level as usize - 1];
            below_last = last_mac[level as usize - 1];
        }
        let root_slot = if s == 0 { counter_mac } else { last_mac[s as usize - 1] };
        InitialSliceValues { full, last, counter_mac, root_slot }
    }

    /// Initial value of node `within` at `level` in this slice.
    pub fn node(&self, geometry: &TreeGeometry, slice: u64, level: u8, within: u64) -> MerkleNode {
        let count = geometry.slice_node_count(slice, level);
        debug_assert!(within < count);
        if within + 1 == count {
            self.last[level as usize - 1]
        } else {
            self.full[level as usize - 1]
        }
    }
}

/// Precomputed initial values keyed by the (at most three) distinct slice
/// lengths a geometry can have.
#[derive(Debug, Clone)]
pub struct BootDefaults {
    by_len: Vec<(u64, InitialSliceValues)>,
}

impl BootDefaults {
    pub fn build(geometry: &TreeGeometry, key: u64) -> Self {
        let mut by_len: Vec<(u64, InitialSliceValues)> = Vec::new();
        for slice in 0..ROOT_SLOTS {
            let len = geometry.slice_len(slice);
            if !by_len.iter().any(|(l, _)| *l == len) {
                by_len.push((len, InitialSliceValues::build(geometry, len, key)));
            }
        }
        BootDefaults { by_len }
    }

    pub fn for_slice(&self, geometry: &TreeGeometry, slice: u64) -> &InitialSliceValues {
        let len = geometry.slice_len(slice);
        &self.by_len.iter().find(|(l, _)| *l == len).expect("slice length present").1
    }

    pub fn initial_root(&self, geometry: &TreeGeometry) -> RootRegister {
        let mut root = RootRegister::default();
        for slice in 0..ROOT_SLOTS {
            root.slots[slice as usize] = self.for_slice(geometry, slice).root_slot;
        }
        root
    }

    pub fn initial_node(&self, geometry: &TreeGeometry, level: u8, index: u64) -> MerkleNode {
        let slice = geometry.node_slice(level, index);
        let within = index % geometry.level_stride(level);
        self.for_slice(geometry, slice).node(geometry, slice, level, within)
    }
}

/// Assigns every NVM node below the root to exactly one region class.
pub fn node_region(geometry: &TreeGeometry, map: &RegionMap, level: u8, index: u64) -> Region {
    map.slice_region(geometry.node_slice(level, index))
}

/// Node sets of the two subtree classes, as (level, index) pairs.
pub fn partition(
    geometry: &TreeGeometry,
    map: &RegionMap,
) -> (Vec<(u8, u64)>, Vec<(u8, u64)>) {
    let mut persistent = Vec::new();
    let mut non_persistent = Vec::new();
    for level in 1..=geometry.node_levels {
        for slice in 0..ROOT_SLOTS {
            for within in 0..geometry.slice_node_count(slice, level) {
                let idx = geometry.node_index(level, slice, within);
                match map.slice_region(slice) {
                    Region::Persistent => persistent.push((level, idx)),
                    Region::NonPersistent => non_persistent.push((level, idx)),
                }
            }
        }
    }
    (persistent, non_persistent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PersistentPlacement, Ratio, RegionMap};

    const KEY: u64 = 0x1122334455667788;

    fn zero_counters(_idx: u64) -> [u8; 64] {
        [0u8; 64]
    }

    #[test]
    fn geometry_16gb_has_nine_tiers_including_counters() {
        let g = TreeGeometry::for_capacity(16 << 30);
        assert_eq!(g.counter_blocks, 1 << 22);
        assert_eq!(g.node_levels, 7);
        assert_eq!(g.hash_levels, 8);
        // counters (tier 0) + 7 NVM hash levels + root = 9 tiers.
    }

    #[test]
    fn geometry_slice_local_counts_for_1mb_slice() {
        // A 1MB persistent slice holds 16384 data blocks -> 256 counter
        // blocks -> slice-local levels of 32, 4, 1 nodes.
        let g = TreeGeometry::for_capacity(8 << 20); // 8MB device, 1MB slices
        assert_eq!(g.counters_per_slice, 256);
        assert_eq!(g.slice_node_count(0, 1), 32);
        assert_eq!(g.slice_node_count(0, 2), 4);
        assert_eq!(g.slice_node_count(0, 3), 1);
        assert_eq!(g.node_levels, 3);
    }

    #[test]
    fn single_counter_block_tree() {
        let g = TreeGeometry::for_counter_blocks(1);
        assert_eq!(g.node_levels, 0);
        let img = build_full(&g, zero_counters, KEY);
        assert_eq!(img.root.slots[0], mac64(KEY, &[0u8; 64]));
        assert!(img.root.slots[1..].iter().all(|&s| s == 0));
    }

    #[test]
    fn update_path_dirties_exactly_hash_levels_nodes() {
        let g = TreeGeometry::for_counter_blocks(256);
        let mut img = build_full(&g, zero_counters, KEY);
        let mut block = [0u8; 64];
        block[0] = 1;
        let path = img.update_path(0, &block, KEY);
        assert_eq!(path.len(), g.hash_levels as usize);
        assert_eq!(path[0], PathNode { level: 1, index: 0 });
        assert_eq!(path[1], PathNode { level: 2, index: 0 });
        assert_eq!(path[2], PathNode { level: 3, index: 0 }); // root slot 0
    }

    #[test]
    fn shared_ancestors_iff_same_level_group() {
        // 512 counter blocks: 64 per slice, strides align with flat 8^l
        // grouping, so two counters share ancestors above level l iff they
        // agree on idx / 8^l.
        let g = TreeGeometry::for_counter_blocks(512);
        let pairs = [(0u64, 7u64, 1u8), (0, 8, 2), (63, 64, 3)];
        for (a, b, first_shared) in pairs {
            for level in 1..=g.node_levels {
                let same = g.ancestor_of_counter(a, level) == g.ancestor_of_counter(b, level);
                if level >= first_shared && first_shared <= g.node_levels {
                    assert_eq!(same, a / 8u64.pow(level as u32) == b / 8u64.pow(level as u32));
                }
            }
        }
    }

    #[test]
    fn two_updates_same_parent_share_ancestors() {
        let g = TreeGeometry::for_counter_blocks(256);
        let mut img = build_full(&g, zero_counters, KEY);
        let b = [1u8; 64];
        let p1: Vec<_> = img.update_path(8, &b, KEY).iter().map(|p| (p.level, p.index)).collect();
        let p2: Vec<_> = img.update_path(9, &b, KEY).iter().map(|p| (p.level, p.index)).collect();
        assert_eq!(p1, p2);
    }

    #[test]
    fn incremental_matches_build_full_oracle() {
        let g = TreeGeometry::for_counter_blocks(256);
        let mut store: Vec<[u8; 64]> = vec![[0u8; 64]; 256];
        let mut img = build_full(&g, |i| store[i as usize], KEY);
        // Deterministic pseudo-random update sequence.
        let mut x = 0x9e3779b97f4a7c15u64;
        for step in 0..2000u64 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let idx = x % 256;
            let mut block = [0u8; 64];
            block[..8].copy_from_slice(&step.to_le_bytes());
            block[8..16].copy_from_slice(&idx.to_le_bytes());
            store[idx as usize] = block;
            img.update_path(idx, &block, KEY);
        }
        let oracle = build_full(&g, |i| store[i as usize], KEY);
        assert_eq!(img.root, oracle.root);
        for level in 1..=g.node_levels {
            for slice in 0..ROOT_SLOTS {
                for w in 0..g.slice_node_count(slice, level) {
                    let idx = g.node_index(level, slice, w);
                    assert_eq!(img.node(level, idx), oracle.node(level, idx));
                }
            }
        }
    }

    #[test]
    fn verify_detects_counter_bit_flip_at_level_one() {
        let g = TreeGeometry::for_counter_blocks(256);
        let img = build_full(&g, zero_counters, KEY);
        assert!(img.verify_path(42, &[0u8; 64], KEY, |_, _| false).is_ok());
        let mut tampered = [0u8; 64];
        tampered[5] ^= 0x10;
        let err = img.verify_path(42, &tampered, KEY, |_, _| false).unwrap_err();
        assert_eq!(err.level, 1);
        assert_eq!(err.index, g.ancestor_of_counter(42, 1));
    }

    #[test]
    fn verify_stops_at_trusted_frontier() {
        let g = TreeGeometry::for_counter_blocks(256);
        let img = build_full(&g, zero_counters, KEY);
        let touched = std::cell::RefCell::new(Vec::new());
        let res = img.verify_path(17, &[0u8; 64], KEY, |level, idx| {
            touched.borrow_mut().push((level, idx));
            level == 1
        });
        assert!(res.is_ok());
        assert_eq!(touched.borrow().len(), 1, "must stop without touching level 2");
    }

    #[test]
    fn partition_counts_follow_ratio() {
        let g = TreeGeometry::for_counter_blocks(2048);
        let cap = 2048 * PAGE_SIZE_U64;
        let half = RegionMap::new(cap, Ratio::parse("4:4").unwrap(), PersistentPlacement::End).unwrap();
        let (p, n) = partition(&g, &half);
        assert_eq!(p.len(), n.len());
        let persistent_root_slots = half.persistent_slices().count();
        assert_eq!(persistent_root_slots, 4);

        let eighth = RegionMap::new(cap, Ratio::parse("1:7").unwrap(), PersistentPlacement::Start).unwrap();
        let (p1, n1) = partition(&g, &eighth);
        // The persistent class holds exactly 1/8 of every level's nodes.
        for level in 1..=g.node_levels {
            let total = g.level_node_count(level);
            let at_level = p1.iter().filter(|(l, _)| *l == level).count() as u64;
            assert_eq!(at_level, total / 8);
        }
        assert_eq!(p1.len() + n1.len(), (1..=g.node_levels).map(|l| g.level_node_count(l)).sum::<u64>() as usize);

        let all = RegionMap::new(cap, Ratio::parse("8:0").unwrap(), PersistentPlacement::End).unwrap();
        let (p8, n8) = partition(&g, &all);
        assert!(n8.is_empty());
        assert_eq!(p8.len(), p1.len() + n1.len());
    }

    const PAGE_SIZE_U64: u64 = 4096;

    #[test]
    fn boot_defaults_match_build_full() {
        for cbc in [1u64, 8, 9, 64, 256, 2048, 100] {
            let g = TreeGeometry::for_counter_blocks(cbc);
            let defaults = BootDefaults::build(&g, KEY);
            let oracle = build_full(&g, zero_counters, KEY);
            assert_eq!(defaults.initial_root(&g), oracle.root, "root mismatch cbc={cbc}");
            for level in 1..=g.node_levels {
                for slice in 0..ROOT_SLOTS {
                    for w in 0..g.slice_node_count(slice, level) {
                        let idx = g.node_index(level, slice, w);
                        assert_eq!(
                            &defaults.initial_node(&g, level, idx),
                            oracle.node(level, idx),
                            "cbc={cbc} level={level} idx={idx}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dump_layout_golden() {
        // Oracle-computed golden dump for a 2-counter-block tree: header,
        // one level-1 node per populated slice, then the root block.
        let g = TreeGeometry::for_counter_blocks(2);
        let img = build_full(&g, zero_counters, KEY);
        let dump = img.dump();
        assert_eq!(&dump[0..8], b"MTDUMP01");
        assert_eq!(u64::from_le_bytes(dump[8..16].try_into().unwrap()), 2);
        assert_eq!(dump[16], 0); // cps == 1, counters hash straight into the root
        let m0 = mac64(KEY, &[0u8; 64]);
        let root = MerkleNode::from_bytes(&dump[17..81].try_into().unwrap());
        assert_eq!(root.slots[0], m0);
        assert_eq!(root.slots[1], m0);
        assert_eq!(root.slots[2], 0);
        assert_eq!(dump.len(), 17 + 64);
    }
}
