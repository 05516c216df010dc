//! Deterministic traces: the line-oriented trace format, synthetic workload
//! generators, and replay against a controller.
//!
//! Trace format, one op per line:
//! ```text
//! R <hex-addr>
//! W <hex-addr> <16-hex-digit payload seed>
//! ```
//! `#` starts a comment. Payloads expand deterministically from the seed, so
//! traces stay diffable text while replay is bit-deterministic.

use crate::controller::{Controller, Progress};
use crate::crypto::{expand_fill, mac64};
use crate::error::SimError;
use crate::geometry::{region_of, Address, Region, RegionMap, BLOCK_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    Read(Address),
    Write(Address, u64),
}

impl TraceOp {
    pub fn addr(&self) -> Address {
        match self {
            TraceOp::Read(a) | TraceOp::Write(a, _) => *a,
        }
    }

    pub fn payload(seed: u64) -> [u8; 64] {
        expand_fill(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadRegion {
    Persistent,
    NonPersistent,
    Mixed,
}

impl std::fmt::Display for WorkloadRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorkloadRegion::Persistent => write!(f, "persistent"),
            WorkloadRegion::NonPersistent => write!(f, "non-persistent"),
            WorkloadRegion::Mixed => write!(f, "mixed"),
        }
    }
}

/// Strided read/write stream in the spirit of a DAX microbenchmark:
/// sequential writes `stride` bytes apart, each followed by
/// `reads_per_write` reads, wrapping within the declared region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub region: WorkloadRegion,
    pub stride: u64,
    pub reads_per_write: u32,
    pub op_count: u64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Accepts either a preset name like `daxbench-128-2` / `mix-64-2` or an
    /// explicit `region=persistent,stride=128,rw=2,ops=1000,seed=7` form.
    pub fn parse(s: &str) -> Result<Self, SimError> {
        let s = s.trim();
        if !s.contains('=') {
            return Self::preset(s);
        }
        let mut spec = SyntheticSpec {
            region: WorkloadRegion::Persistent,
            stride: 64,
            reads_per_write: 0,
            op_count: 1000,
            seed: 1,
        };
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("bad synthetic field `{part}`")))?;
            match k.trim() {
                "region" => {
                    spec.region = match v.trim() {
                        "persistent" => WorkloadRegion::Persistent,
                        "non-persistent" | "nonpersistent" => WorkloadRegion::NonPersistent,
                        "mixed" => WorkloadRegion::Mixed,
                        other => {
                            return Err(SimError::Config(format!("bad region `{other}`")));
                        }
                    }
                }
                "stride" => spec.stride = parse_u64(v)?,
                "rw" => spec.reads_per_write = parse_u64(v)? as u32,
                "ops" => spec.op_count = parse_u64(v)?,
                "seed" => spec.seed = parse_u64(v)?,
                other => return Err(SimError::Config(format!("unknown synthetic field `{other}`"))),
            }
        }
        Ok(spec)
    }

    fn preset(name: &str) -> Result<Self, SimError> {
        let parts: Vec<&str> = name.split('-').collect();
        let (region, rest) = match parts.first() {
            Some(&"daxbench") => (WorkloadRegion::Persistent, &parts[1..]),
            Some(&"mix") => (WorkloadRegion::Mixed, &parts[1..]),
            _ => {
                return Err(SimError::Config(format!(
                    "unknown workload preset `{name}` (expected daxbench-S-RW or mix-S-RW)"
                )))
            }
        };
        if rest.len() != 2 {
            return Err(SimError::Config(format!("preset `{name}` must be <kind>-<stride>-<rw>")));
        }
        let stride = parse_u64(rest[0])?;
        let rw = parse_u64(rest[1])? as u32;
        Ok(SyntheticSpec { region, stride, reads_per_write: rw, op_count: 2000, seed: 1 })
    }

    pub fn name(&self) -> String {
        let kind = match self.region {
            WorkloadRegion::Persistent => "daxbench",
            WorkloadRegion::NonPersistent => "membench",
            WorkloadRegion::Mixed => "mix",
        };
        format!("{kind}-{}-{}", self.stride, self.reads_per_write)
    }
}

fn parse_u64(s: &str) -> Result<u64, SimError> {
    s.trim()
        .parse()
        .map_err(|_| SimError::Config(format!("bad number `{s}`")))
}

fn region_span(map: &RegionMap, region: Region) -> (u64, u64) {
    match region {
        Region::Persistent => (map.persistent_start, map.persistent_len),
        Region::NonPersistent => {
            if map.persistent_start == 0 {
                (map.persistent_len, map.capacity - map.persistent_len)
            } else {
                (0, map.persistent_start)
            }
        }
    }
}

/// Generates the deterministic op stream for a spec within a region map.
pub fn generate(spec: &SyntheticSpec, map: &RegionMap) -> Result<Vec<TraceOp>, SimError> {
    if spec.stride == 0 || spec.stride % BLOCK_SIZE != 0 {
        return Err(SimError::Config(format!(
            "stride {} must be a nonzero multiple of 64 bytes",
            spec.stride
        )));
    }
    let streams: Vec<(u64, u64)> = match spec.region {
        WorkloadRegion::Persistent => vec![region_span(map, Region::Persistent)],
        WorkloadRegion::NonPersistent => vec![region_span(map, Region::NonPersistent)],
        WorkloadRegion::Mixed => vec![
            region_span(map, Region::Persistent),
            region_span(map, Region::NonPersistent),
        ],
    };
    for (_, len) in &streams {
        if *len == 0 {
            return Err(SimError::Config(format!(
                "workload region {} is empty under ratio {}",
                spec.region, map.ratio
            )));
        }
    }
    let mut ops = Vec::with_capacity(spec.op_count as usize);
    let mut positions = vec![0u64; streams.len()];
    let mut stream = 0usize;
    let mut w = 0u64;
    while (ops.len() as u64) < spec.op_count {
        let (base, len) = streams[stream];
        let offset = (positions[stream] * spec.stride) % len;
        let addr = Address(base + offset);
        positions[stream] += 1;
        let mut seed_buf = [0u8; 64];
        seed_buf[0..8].copy_from_slice(&w.to_le_bytes());
        let payload_seed = mac64(spec.seed, &seed_buf);
        ops.push(TraceOp::Write(addr, payload_seed));
        w += 1;
        for _ in 0..spec.reads_per_write {
            if (ops.len() as u64) >= spec.op_count {
                break;
            }
            ops.push(TraceOp::Read(addr));
        }
        stream = (stream + 1) % streams.len();
    }
    Ok(ops)
}

/// The bundled workload set used by sweeps and ordering checks.
pub fn bundled_specs() -> Vec<SyntheticSpec> {
    ["daxbench-128-2", "daxbench-1024-2", "daxbench-256-2", "daxbench-512-3", "mix-64-2", "mix-512-2"]
        .iter()
        .map(|n| SyntheticSpec::parse(n).expect("bundled presets parse"))
        .collect()
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceOp>, SimError> {
    let mut ops = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let kind = fields.next().unwrap();
        let bad = |detail: String| SimError::Trace { line: lineno + 1, detail };
        let addr = fields
            .next()
            .ok_or_else(|| bad("missing address".into()))
            .and_then(|a| {
                u64::from_str_radix(a.trim_start_matches("0x"), 16)
                    .map_err(|_| bad(format!("bad address `{a}`")))
            })?;
        match kind {
            "R" | "r" => {
                if fields.next().is_some() {
                    return Err(bad("trailing fields after read".into()));
                }
                ops.push(TraceOp::Read(Address(addr)));
            }
            "W" | "w" => {
                let seed = fields
                    .next()
                    .ok_or_else(|| bad("missing payload seed".into()))
                    .and_then(|s| {
                        if s.len() > 16 {
                            return Err(bad(format!("payload seed `{s}` longer than 8 bytes")));
                        }
                        u64::from_str_radix(s, 16).map_err(|_| bad(format!("bad payload seed `{s}`")))
                    })?;
                if fields.next().is_some() {
                    return Err(bad("trailing fields after write".into()));
                }
                ops.push(TraceOp::Write(Address(addr), seed));
            }
            other => return Err(bad(format!("unknown op `{other}`"))),
        }
    }
    Ok(ops)
}

pub fn format_trace(ops: &[TraceOp]) -> String {
    let mut out = String::new();
    for op in ops {
        match op {
            TraceOp::Read(a) => out.push_str(&format!("R {:x}\n", a.0)),
            TraceOp::Write(a, seed) => out.push_str(&format!("W {:x} {:016x}\n", a.0, seed)),
        }
    }
    out
}

/// Checks every op against the geometry: 64B alignment and range.
pub fn validate(ops: &[TraceOp], map: &RegionMap) -> Result<(), SimError> {
    for (i, op) in ops.iter().enumerate() {
        let addr = op.addr();
        if !addr.is_block_aligned() {
            return Err(SimError::Trace {
                line: i + 1,
                detail: format!("address {:#x} not 64B-aligned", addr.0),
            });
        }
        region_of(addr, map).map_err(|e| SimError::Trace { line: i + 1, detail: e.to_string() })?;
    }
    Ok(())
}

/// Applies a whole trace; any controller error is reported with its
/// position. The WPQ is quiesced afterwards so write accounting is exact.
pub fn replay(c: &mut Controller, ops: &[TraceOp]) -> Result<(), SimError> {
    for (i, op) in ops.iter().enumerate() {
        apply_op(c, op).map_err(|e| match e {
            SimError::IntegrityViolation { level, index, detail } => SimError::IntegrityViolation {
                level,
                index,
                detail: format!("{detail} (trace op {})", i + 1),
            },
            other => other,
        })?;
    }
    c.dev.drain_wpq(&mut c.stats);
    Ok(())
}

/// Applies one op, panicking if an event budget interrupts it; use the
/// crash harness for budgeted runs.
fn apply_op(c: &mut Controller, op: &TraceOp) -> Result<(), SimError> {
    match op {
        TraceOp::Read(a) => {
            c.read(*a)?;
        }
        TraceOp::Write(a, seed) => {
            let payload = TraceOp::payload(*seed);
            match c.write(*a, &payload)? {
                Progress::Done(()) => {}
                Progress::Interrupted => unreachable!("replay runs without an event budget"),
            }
        }
    }
    Ok(())
}
