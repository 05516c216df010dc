//! Key=value config files with `[section]` headers, plus validation into
//! controller parameters. Flags on the CLI override file values.

use crate::analytics::DEFAULT_T_BLOCK_NS;
use crate::controller::{ControllerParams, PersistMode, PersistPolicy};
use crate::devices::{BitFlip, DeviceParams, Target};
use crate::error::SimError;
use crate::geometry::{PersistentPlacement, Ratio, RegionMap};
use crate::merkle::TreeGeometry;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub capacity: u64,
    pub ratio: Ratio,
    pub placement: PersistentPlacement,
    pub mode: PersistMode,
    pub pin_upper_tiers: bool,
    pub devices: DeviceParams,
    pub t_block_ns: f64,
    pub seed: u64,
    pub attack_demo: bool,
    pub synthetic: Option<String>,
    pub trace_path: Option<String>,
    pub flips: Vec<BitFlip>,
    pub flags: Vec<Target>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            capacity: 64 << 20,
            ratio: Ratio { persistent_eighths: 4 },
            placement: PersistentPlacement::End,
            mode: PersistMode::Triad(1),
            pin_upper_tiers: false,
            devices: DeviceParams::default(),
            t_block_ns: DEFAULT_T_BLOCK_NS,
            seed: 1,
            attack_demo: false,
            synthetic: None,
            trace_path: None,
            flips: Vec::new(),
            flags: Vec::new(),
        }
    }
}

/// Parses sizes like `64`, `4K`, `64M`, `16G`, `1T` (binary units).
pub fn parse_size(s: &str) -> Result<u64, SimError> {
    let s = s.trim();
    let (num, shift) = match s.chars().last() {
        Some('K') | Some('k') => (&s[..s.len() - 1], 10),
        Some('M') | Some('m') => (&s[..s.len() - 1], 20),
        Some('G') | Some('g') => (&s[..s.len() - 1], 30),
        Some('T') | Some('t') => (&s[..s.len() - 1], 40),
        _ => (s, 0),
    };
    let n: u64 = num
        .trim()
        .parse()
        .map_err(|_| SimError::Config(format!("bad size `{s}`")))?;
    n.checked_shl(shift)
        .filter(|v| shift == 0 || *v >> shift == n)
        .ok_or_else(|| SimError::Config(format!("size `{s}` overflows")))
}

fn parse_bool(s: &str) -> Result<bool, SimError> {
    match s.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(SimError::Config(format!("bad boolean `{other}`"))),
    }
}

fn parse_target(s: &str) -> Result<(Target, Option<u16>), SimError> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let bad = || SimError::Config(format!("bad fault target `{s}`"));
    let num = |t: &str| -> Result<u64, SimError> { t.parse().map_err(|_| bad()) };
    match parts.as_slice() {
        ["counter", p] => Ok((Target::Counter(num(p)?), None)),
        ["counter", p, b] => Ok((Target::Counter(num(p)?), Some(num(b)? as u16))),
        ["data", d] => Ok((Target::Data(num(d)?), None)),
        ["data", d, b] => Ok((Target::Data(num(d)?), Some(num(b)? as u16))),
        ["node", l, i] => Ok((Target::Node(num(l)? as u8, num(i)?), None)),
        ["node", l, i, b] => Ok((Target::Node(num(l)? as u8, num(i)?), Some(num(b)? as u16))),
        _ => Err(bad()),
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut cfg = SimConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |detail: String| {
                SimError::Config(format!("config line {}: {detail}", lineno + 1))
            };
            if let Some(name) = line.strip_prefix('[') {
                section = name
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".into()))?
                    .trim()
                    .to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            match (section.as_str(), key) {
                ("memory", "capacity") => cfg.capacity = parse_size(value)?,
                ("memory", "ratio") => cfg.ratio = Ratio::parse(value)?,
                ("memory", "persistent_at") => {
                    cfg.placement = match value {
                        "start" => PersistentPlacement::Start,
                        "end" => PersistentPlacement::End,
                        other => return Err(err(format!("bad persistent_at `{other}`"))),
                    }
                }
                ("policy", "mode") => cfg.mode = PersistMode::parse(value)?,
                ("policy", "pin_upper_tiers") => cfg.pin_upper_tiers = parse_bool(value)?,
                ("devices", "counter_cache_kb") => {
                    cfg.devices.counter_cache_bytes = parse_size(value)? as usize * 1024
                }
                ("devices", "mt_cache_kb") => {
                    cfg.devices.mt_cache_bytes = parse_size(value)? as usize * 1024
                }
                ("devices", "cache_assoc") => {
                    cfg.devices.cache_assoc = parse_size(value)? as usize
                }
                ("devices", "wpq_depth") => cfg.devices.wpq_depth = parse_size(value)? as usize,
                ("devices", "read_ns") => cfg.devices.read_ns = parse_size(value)?,
                ("devices", "write_ns") => cfg.devices.write_ns = parse_size(value)?,
                ("recovery", "t_block_ns") => {
                    cfg.t_block_ns = value
                        .parse()
                        .map_err(|_| err(format!("bad t_block_ns `{value}`")))?
                }
                ("sim", "seed") => {
                    cfg.seed = value.parse().map_err(|_| err(format!("bad seed `{value}`")))?
                }
                ("sim", "attack_demo") => cfg.attack_demo = parse_bool(value)?,
                ("workload", "synthetic") => cfg.synthetic = Some(value.to_string()),
                ("workload", "trace") => cfg.trace_path = Some(value.to_string()),
                ("faults", "flip") => {
                    let (target, bit) = parse_target(value)?;
                    let bit = bit.ok_or_else(|| err("flip needs a :bit suffix".into()))?;
                    cfg.flips.push(BitFlip { target, bit });
                }
                ("faults", "flag") => {
                    let (target, bit) = parse_target(value)?;
                    if bit.is_some() {
                        return Err(err("flag takes no bit index".into()));
                    }
                    cfg.flags.push(target);
                }
                (sec, key) => {
                    return Err(err(format!("unknown key `{key}` in section `[{sec}]`")))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Full validation; every simulation entry point goes through here.
    pub fn region_map(&self) -> Result<RegionMap, SimError> {
        let map = RegionMap::new(self.capacity, self.ratio, self.placement)?;
        let geometry = TreeGeometry::for_capacity(self.capacity);
        if let PersistMode::Triad(p) = self.mode {
            if p > geometry.node_levels {
                return Err(SimError::Config(format!(
                    "persist level {p} exceeds the tree: a {}-byte device has {} node levels",
                    self.capacity, geometry.node_levels
                )));
            }
        }
        Ok(map)
    }

    pub fn controller_params(&self) -> Result<ControllerParams, SimError> {
        let map = self.region_map()?;
        Ok(ControllerParams {
            map,
            policy: PersistPolicy { mode: self.mode, pin_upper_tiers: self.pin_upper_tiers },
            devices: self.devices,
            seed: self.seed,
            rotate_volatile_key: !self.attack_demo,
            t_block_ns: self.t_block_ns,
        })
    }

    /// Normalized echo of the effective config, embedded in reports.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str("[memory]\n");
        out.push_str(&format!("capacity = {}\n", self.capacity));
        out.push_str(&format!("ratio = {}\n", self.ratio));
        out.push_str(&format!(
            "persistent_at = {}\n",
            match self.placement {
                PersistentPlacement::Start => "start",
                PersistentPlacement::End => "end",
            }
        ));
        out.push_str("[policy]\n");
        out.push_str(&format!("mode = {}\n", self.mode));
        out.push_str(&format!("pin_upper_tiers = {}\n", self.pin_upper_tiers));
        out.push_str("[devices]\n");
        out.push_str(&format!("counter_cache_kb = {}\n", self.devices.counter_cache_bytes / 1024));
        out.push_str(&format!("mt_cache_kb = {}\n", self.devices.mt_cache_bytes / 1024));
        out.push_str(&format!("cache_assoc = {}\n", self.devices.cache_assoc));
        out.push_str(&format!("wpq_depth = {}\n", self.devices.wpq_depth));
        out.push_str(&format!("read_ns = {}\n", self.devices.read_ns));
        out.push_str(&format!("write_ns = {}\n", self.devices.write_ns));
        out.push_str("[recovery]\n");
        out.push_str(&format!("t_block_ns = {}\n", self.t_block_ns));
        out.push_str("[sim]\n");
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("attack_demo = {}\n", self.attack_demo));
        if !self.flips.is_empty() || !self.flags.is_empty() {
            out.push_str("[faults]\n");
            for f in &self.flips {
                out.push_str(&format!("flip = {}:{}\n", f.target.describe(), f.bit));
            }
            for t in &self.flags {
                out.push_str(&format!("flag = {}\n", t.describe()));
            }
        }
        out
    }
}
