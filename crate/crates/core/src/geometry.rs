//! Address geometry, region partitioning, and the block-level value types
//! shared by every other module.
//!
//! The geometry is fixed: 64B blocks, 4KB pages, one split-counter block per
//! page. Only the capacity scales. The device is divided into eight equal
//! slices so that each slot of the on-chip root register covers exclusively
//! persistent or exclusively non-persistent address space.

use crate::error::SimError;

pub const BLOCK_SIZE: u64 = 64;
pub const PAGE_SIZE: u64 = 4096;
pub const BLOCKS_PER_PAGE: u64 = PAGE_SIZE / BLOCK_SIZE;
/// Root register slots; also the number of address-space slices.
pub const ROOT_SLOTS: u64 = 8;

/// Byte address into the simulated NVM device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub u64);

impl Address {
    pub fn block_index(self) -> u64 {
        self.0 / BLOCK_SIZE
    }

    pub fn page_index(self) -> u64 {
        self.0 / PAGE_SIZE
    }

    pub fn block_in_page(self) -> u8 {
        ((self.0 % PAGE_SIZE) / BLOCK_SIZE) as u8
    }

    pub fn is_block_aligned(self) -> bool {
        self.0 % BLOCK_SIZE == 0
    }
}

/// Persistence class of an address or metadata block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Persistent,
    NonPersistent,
}

/// Persistent-to-non-persistent split in eighths of the capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub persistent_eighths: u8,
}

impl Ratio {
    pub fn new(p: u8) -> Result<Self, SimError> {
        if p > 8 {
            return Err(SimError::Config(format!(
                "ratio {p}:{} invalid: persistent eighths must be in 0..=8",
                8i32 - p as i32
            )));
        }
        Ok(Ratio { persistent_eighths: p })
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        let (p, n) = s
            .split_once(':')
            .ok_or_else(|| SimError::Config(format!("ratio `{s}` must look like `p:n`")))?;
        let p: u8 = p
            .trim()
            .parse()
            .map_err(|_| SimError::Config(format!("ratio `{s}`: bad persistent part")))?;
        let n: u8 = n
            .trim()
            .parse()
            .map_err(|_| SimError::Config(format!("ratio `{s}`: bad non-persistent part")))?;
        if p + n != 8 {
            return Err(SimError::Config(format!(
                "ratio {p}:{n} rejected: parts must sum to 8 (allowed 0:8, 1:7, ... 8:0)"
            )));
        }
        Ratio::new(p)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.persistent_eighths, 8 - self.persistent_eighths)
    }
}

/// Contiguous persistent carve-out within the device, aligned to root-slot
/// slices so every root MAC slot covers a single region class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionMap {
    pub capacity: u64,
    pub persistent_start: u64,
    pub persistent_len: u64,
    pub ratio: Ratio,
}

/// Where the persistent carve-out sits within the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PersistentPlacement {
    Start,
    /// Mirrors the usual `memmap=<len>!<start>` carve-out at the top of memory.
    #[default]
    End,
}

impl RegionMap {
    pub fn new(capacity: u64, ratio: Ratio, placement: PersistentPlacement) -> Result<Self, SimError> {
        if capacity == 0 || capacity % PAGE_SIZE != 0 {
            return Err(SimError::Config(format!(
                "capacity {capacity} must be a nonzero multiple of the 4KB page size"
            )));
        }
        let p = ratio.persistent_eighths as u64;
        if p != 0 && p != 8 && capacity % (ROOT_SLOTS * PAGE_SIZE) != 0 {
            return Err(SimError::Config(format!(
                "capacity {capacity} with mixed ratio {ratio} must be a multiple of 32KB \
                 so each root slot covers a whole number of pages"
            )));
        }
        let slice = capacity / ROOT_SLOTS;
        let persistent_len = slice * p;
        let persistent_start = match placement {
            PersistentPlacement::Start => 0,
            PersistentPlacement::End => capacity - persistent_len,
        };
        Ok(RegionMap { capacity, persistent_start, persistent_len, ratio })
    }

    pub fn slice_len(&self) -> u64 {
        self.capacity / ROOT_SLOTS
    }

    /// Region class of a root-slot slice index in 0..8.
    pub fn slice_region(&self, slice: u64) -> Region {
        let start = slice * self.slice_len();
        if self.persistent_len > 0
            && start >= self.persistent_start
            && start < self.persistent_start + self.persistent_len
        {
            Region::Persistent
        } else {
            Region::NonPersistent
        }
    }

    pub fn persistent_slices(&self) -> impl Iterator<Item = u64> + '_ {
        (0..ROOT_SLOTS).filter(|&s| self.slice_region(s) == Region::Persistent)
    }
}

/// Classifies an address, or faults if it lies outside the device.
pub fn region_of(addr: Address, map: &RegionMap) -> Result<Region, SimError> {
    if addr.0 >= map.capacity {
        return Err(SimError::AddressFault { addr: addr.0, capacity: map.capacity });
    }
    if map.persistent_len > 0
        && addr.0 >= map.persistent_start
        && addr.0 < map.persistent_start + map.persistent_len
    {
        Ok(Region::Persistent)
    } else {
        Ok(Region::NonPersistent)
    }
}

pub const MINOR_MAX: u8 = 127;

/// One 64-byte counter block: a 64-bit major counter for the page plus 64
/// seven-bit minor counters, one per cache block in the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounterBlock {
    pub major: u64,
    pub minors: [u8; 64],
}

impl Default for SplitCounterBlock {
    fn default() -> Self {
        SplitCounterBlock { major: 0, minors: [0u8; 64] }
    }
}

/// Result of bumping a counter for one block write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpOutcome {
    /// Minor counter incremented; nothing else changed.
    Minor,
    /// Minor overflowed: major incremented, all minors reset, this block's
    /// minor set to 1. The caller must re-encrypt the whole page.
    Overflowed,
    /// The major counter itself was exhausted. A whole-memory re-key is
    /// required; the simulator counts the event rather than performing it.
    RekeyRequired,
}

impl SplitCounterBlock {
    /// Packs into the 64-byte wire form: 8B little-endian major, then the 64
    /// 7-bit minors packed densely (56 bytes).
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[0..8].copy_from_slice(&self.major.to_le_bytes());
        let mut bitpos = 0usize;
        for &m in self.minors.iter() {
            let v = (m & 0x7f) as u32;
            let byte = 8 + bitpos / 8;
            let shift = bitpos % 8;
            out[byte] |= (v << shift) as u8;
            if shift > 1 {
                out[byte + 1] |= (v >> (8 - shift)) as u8;
            }
            bitpos += 7;
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 64]) -> Self {
        let major = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let mut minors = [0u8; 64];
        let mut bitpos = 0usize;
        for m in minors.iter_mut() {
            let byte = 8 + bitpos / 8;
            let shift = bitpos % 8;
            let mut v = (bytes[byte] as u32) >> shift;
            if shift > 1 {
                v |= (bytes[byte + 1] as u32) << (8 - shift);
            }
            *m = (v & 0x7f) as u8;
            bitpos += 7;
        }
        SplitCounterBlock { major, minors }
    }

    /// Advances the counter for a write to `block_in_page`.
    pub fn bump(&mut self, block_in_page: u8) -> BumpOutcome {
        let i = block_in_page as usize;
        assert!(i < 64, "block_in_page out of range");
        if self.minors[i] < MINOR_MAX {
            self.minors[i] += 1;
            BumpOutcome::Minor
        } else if self.major == u64::MAX {
            BumpOutcome::RekeyRequired
        } else {
            self.major += 1;
            self.minors = [0u8; 64];
            self.minors[i] = 1;
            BumpOutcome::Overflowed
        }
    }
}

/// Initialization vector for counter-mode encryption of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iv {
    pub page_id: u64,
    /// Block index within the page (6 bits used).
    pub page_offset: u8,
    pub major: u64,
    pub minor: u8,
}

/// Builds the IV for an address from the counter block covering its page.
pub fn iv_for(addr: Address, ctr: &SplitCounterBlock) -> Iv {
    let off = addr.block_in_page();
    Iv {
        page_id: addr.page_index(),
        page_offset: off,
        major: ctr.major,
        minor: ctr.minors[off as usize],
    }
}

/// A data block as stored in NVM: ciphertext plus its sideband MAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataBlock {
    pub bytes: [u8; 64],
    pub mac: u64,
}
