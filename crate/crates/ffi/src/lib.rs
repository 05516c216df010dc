//! C ABI for the simulator: an opaque simulation handle, flat status codes,
//! and string getters with caller-supplied buffers. The header is generated
//! into `include/triadsim.h` by the build script.

use std::ffi::{c_char, CStr};

use triadsim::analytics::{self, LowestTier, RunIdentity};
use triadsim::config::SimConfig;
use triadsim::controller::{Controller, Progress};
use triadsim::error::SimError;
use triadsim::geometry::Address;
use triadsim::recovery;

/// Status codes shared with the CLI's exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriadStatus {
    Ok = 0,
    ConfigError = 2,
    PropertyViolation = 3,
    IntegrityViolation = 4,
    InvalidArgument = 5,
    BufferTooSmall = 6,
}

fn status_of(err: &SimError) -> TriadStatus {
    match err.exit_code() {
        2 => TriadStatus::ConfigError,
        3 => TriadStatus::PropertyViolation,
        4 => TriadStatus::IntegrityViolation,
        _ => TriadStatus::InvalidArgument,
    }
}

/// Opaque simulation handle: one configured controller plus its identity.
pub struct TriadSim {
    cfg: SimConfig,
    controller: Controller,
    scenario: String,
}

fn fill_buffer(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> TriadStatus {
    let bytes = text.as_bytes();
    let required = bytes.len() + 1;
    if !needed.is_null() {
        unsafe { *needed = required };
    }
    if buf.is_null() || len < required {
        return TriadStatus::BufferTooSmall;
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
        *buf.add(bytes.len()) = 0;
    }
    TriadStatus::Ok
}

/// Creates a simulation from config text in the same `key = value` format
/// the CLI accepts. Returns NULL on error; when `err_buf` is non-NULL the
/// error message is written into it (NUL-terminated, truncated to fit).
///
/// # Safety
/// `config_text` must be a valid NUL-terminated string. `err_buf`, when
/// non-NULL, must point to at least `err_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn triadsim_new(
    config_text: *const c_char,
    err_buf: *mut c_char,
    err_len: usize,
) -> *mut TriadSim {
    let report_err = |msg: &str| {
        if !err_buf.is_null() && err_len > 0 {
            let take = msg.len().min(err_len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), err_buf as *mut u8, take);
            *err_buf.add(take) = 0;
        }
        std::ptr::null_mut()
    };
    if config_text.is_null() {
        return report_err("config_text is NULL");
    }
    let text = match CStr::from_ptr(config_text).to_str() {
        Ok(t) => t,
        Err(_) => return report_err("config_text is not valid UTF-8"),
    };
    let cfg = match SimConfig::parse(text) {
        Ok(c) => c,
        Err(e) => return report_err(&e.to_string()),
    };
    let params = match cfg.controller_params() {
        Ok(p) => p,
        Err(e) => return report_err(&e.to_string()),
    };
    let mut controller = Controller::new(params);
    for flip in &cfg.flips {
        controller.dev.inject_flip(*flip);
    }
    for target in &cfg.flags {
        controller.dev.flag_uncorrectable(*target);
    }
    Box::into_raw(Box::new(TriadSim { cfg, controller, scenario: "ffi".into() }))
}

/// # Safety
/// `sim` must be a pointer returned by `triadsim_new` that has not been
/// freed yet, or NULL.
#[no_mangle]
pub unsafe extern "C" fn triadsim_free(sim: *mut TriadSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Writes one 64-byte block through the controller's persistence protocol.
///
/// # Safety
/// `sim` must be a live handle; `data` must point to 64 readable bytes.
#[no_mangle]
pub unsafe extern "C" fn triadsim_write(sim: *mut TriadSim, addr: u64, data: *const u8) -> TriadStatus {
    let Some(sim) = sim.as_mut() else { return TriadStatus::InvalidArgument };
    if data.is_null() {
        return TriadStatus::InvalidArgument;
    }
    let mut block = [0u8; 64];
    std::ptr::copy_nonoverlapping(data, block.as_mut_ptr(), 64);
    match sim.controller.write(Address(addr), &block) {
        Ok(Progress::Done(())) => TriadStatus::Ok,
        Ok(Progress::Interrupted) => TriadStatus::InvalidArgument,
        Err(e) => status_of(&e),
    }
}

/// Verified read of one 64-byte block into `out`.
///
/// # Safety
/// `sim` must be a live handle; `out` must point to 64 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn triadsim_read(sim: *mut TriadSim, addr: u64, out: *mut u8) -> TriadStatus {
    let Some(sim) = sim.as_mut() else { return TriadStatus::InvalidArgument };
    if out.is_null() {
        return TriadStatus::InvalidArgument;
    }
    match sim.controller.read(Address(addr)) {
        Ok(Progress::Done(block)) => {
            std::ptr::copy_nonoverlapping(block.as_ptr(), out, 64);
            TriadStatus::Ok
        }
        Ok(Progress::Interrupted) => TriadStatus::InvalidArgument,
        Err(e) => status_of(&e),
    }
}

/// Power-loss operator: erases the volatile caches, keeps the persistence
/// domain.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn triadsim_crash(sim: *mut TriadSim) -> TriadStatus {
    let Some(sim) = sim.as_mut() else { return TriadStatus::InvalidArgument };
    sim.controller.crash();
    TriadStatus::Ok
}

/// Runs the recovery procedure for the configured policy. When `report_buf`
/// is non-NULL the line-oriented recovery report is written into it;
/// `needed` (optional) receives the required buffer size including NUL.
///
/// # Safety
/// `sim` must be a live handle; `report_buf`, when non-NULL, must point to
/// `report_len` writable bytes; `needed`, when non-NULL, must be writable.
#[no_mangle]
pub unsafe extern "C" fn triadsim_recover(
    sim: *mut TriadSim,
    report_buf: *mut c_char,
    report_len: usize,
    needed: *mut usize,
) -> TriadStatus {
    let Some(sim) = sim.as_mut() else { return TriadStatus::InvalidArgument };
    let report = recovery::recover(&mut sim.controller);
    if report_buf.is_null() && needed.is_null() {
        return TriadStatus::Ok;
    }
    fill_buffer(&report.to_text(), report_buf, report_len, needed)
}

/// Deterministic fingerprint of all durable state.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn triadsim_state_hash(sim: *const TriadSim) -> u64 {
    match sim.as_ref() {
        Some(sim) => sim.controller.state_hash(),
        None => 0,
    }
}

/// Number of duplicate (key, IV) pads observed so far; nonzero means the
/// one-time-pad guarantee was violated.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn triadsim_pad_reuse_count(sim: *const TriadSim) -> u64 {
    match sim.as_ref() {
        Some(sim) => sim.controller.ledger.duplicates().len() as u64,
        None => 0,
    }
}

/// Run statistics as a two-line CSV document (header + row).
///
/// # Safety
/// Same buffer contract as `triadsim_recover`.
#[no_mangle]
pub unsafe extern "C" fn triadsim_stats_csv(
    sim: *const TriadSim,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> TriadStatus {
    let Some(sim) = sim.as_ref() else { return TriadStatus::InvalidArgument };
    let id = RunIdentity {
        scenario: sim.scenario.clone(),
        capacity: sim.cfg.capacity,
        ratio: sim.cfg.ratio.to_string(),
        policy: sim.controller.policy.describe(),
        seed: sim.cfg.seed,
    };
    let csv = format!(
        "{}\n{}\n",
        analytics::STATS_CSV_HEADER,
        analytics::emit_csv_row(&id, &sim.controller.stats, &sim.controller.ledger, sim.controller.state_hash())
    );
    fill_buffer(&csv, buf, len, needed)
}

/// Closed-form recovery time in seconds for a device of `capacity` bytes.
/// `tier` selects the lowest persisted tier: -1 = nothing (full data
/// sweep), 0 = counters, n >= 1 = tree level n. Returns a negative value
/// on invalid arguments.
#[no_mangle]
pub extern "C" fn triadsim_recovery_seconds(capacity: u64, tier: i32, t_block_ns: f64) -> f64 {
    let lowest = match tier {
        -1 => LowestTier::Data,
        0 => LowestTier::Counters,
        l if l > 0 && l <= u8::MAX as i32 => LowestTier::MtLevel(l as u8),
        _ => return -1.0,
    };
    match analytics::analytic_recovery_time(capacity, lowest, t_block_ns) {
        Ok(s) => s,
        Err(_) => -1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    const CONFIG: &str = "
[memory]
capacity = 1M
ratio = 4:4
[policy]
mode = triad:1
[sim]
seed = 3
";

    fn new_sim() -> *mut TriadSim {
        let text = CString::new(CONFIG).unwrap();
        let mut err = vec![0i8; 256];
        let sim = unsafe { triadsim_new(text.as_ptr(), err.as_mut_ptr() as *mut c_char, err.len()) };
        assert!(!sim.is_null());
        sim
    }

    #[test]
    fn write_read_crash_recover_round_trip() {
        let sim = new_sim();
        let data = [0x5au8; 64];
        let addr = (1 << 20) - (512 << 10); // first persistent byte under 4:4/end
        unsafe {
            assert_eq!(triadsim_write(sim, addr, data.as_ptr()), TriadStatus::Ok);
            let mut out = [0u8; 64];
            assert_eq!(triadsim_read(sim, addr, out.as_mut_ptr()), TriadStatus::Ok);
            assert_eq!(out, data);
            assert_eq!(triadsim_crash(sim), TriadStatus::Ok);
            let mut needed = 0usize;
            let mut buf = vec![0i8; 4096];
            assert_eq!(
                triadsim_recover(sim, buf.as_mut_ptr() as *mut c_char, buf.len(), &mut needed),
                TriadStatus::Ok
            );
            let report = CStr::from_ptr(buf.as_ptr() as *const c_char).to_str().unwrap();
            assert!(report.contains("outcome          verified"), "{report}");
            let mut out2 = [0u8; 64];
            assert_eq!(triadsim_read(sim, addr, out2.as_mut_ptr()), TriadStatus::Ok);
            assert_eq!(out2, data, "persistent write must survive crash+recovery");
            assert_eq!(triadsim_pad_reuse_count(sim), 0);
            triadsim_free(sim);
        }
    }

    #[test]
    fn bad_config_reports_error() {
        let text = CString::new("[memory]\nratio = 5:5\n").unwrap();
        let mut err = vec![0i8; 256];
        let sim = unsafe { triadsim_new(text.as_ptr(), err.as_mut_ptr() as *mut c_char, err.len()) };
        assert!(sim.is_null());
        let msg = unsafe { CStr::from_ptr(err.as_ptr() as *const c_char) }.to_str().unwrap();
        assert!(msg.contains("sum to 8"), "{msg}");
    }

    #[test]
    fn address_fault_maps_to_config_status() {
        let sim = new_sim();
        unsafe {
            let mut out = [0u8; 64];
            assert_eq!(triadsim_read(sim, 1 << 30, out.as_mut_ptr()), TriadStatus::ConfigError);
            assert_eq!(triadsim_write(sim, 3, out.as_ptr()), TriadStatus::ConfigError);
            triadsim_free(sim);
        }
    }

    #[test]
    fn buffer_too_small_reports_needed_size() {
        let sim = new_sim();
        unsafe {
            let mut needed = 0usize;
            assert_eq!(
                triadsim_stats_csv(sim, std::ptr::null_mut(), 0, &mut needed),
                TriadStatus::BufferTooSmall
            );
            assert!(needed > 0);
            let mut buf = vec![0i8; needed];
            assert_eq!(
                triadsim_stats_csv(sim, buf.as_mut_ptr() as *mut c_char, buf.len(), &mut needed),
                TriadStatus::Ok
            );
            triadsim_free(sim);
        }
    }

    #[test]
    fn model_matches_library_numbers() {
        let tb = 1u64 << 40;
        let s = triadsim_recovery_seconds(tb, 0, 100.0);
        assert!((s - 30.68).abs() < 0.31);
        assert_eq!(triadsim_recovery_seconds(tb, -2, 100.0), -1.0);
        // Requesting a level deeper than the tree is a config error.
        assert_eq!(triadsim_recovery_seconds(1 << 20, 9, 100.0), -1.0);
    }

    #[test]
    fn determinism_across_handles() {
        let a = new_sim();
        let b = new_sim();
        unsafe {
            let data = [7u8; 64];
            for addr in [0u64, 64, 4096] {
                assert_eq!(triadsim_write(a, addr, data.as_ptr()), TriadStatus::Ok);
                assert_eq!(triadsim_write(b, addr, data.as_ptr()), TriadStatus::Ok);
            }
            assert_eq!(triadsim_state_hash(a), triadsim_state_hash(b));
            triadsim_free(a);
            triadsim_free(b);
        }
    }

    #[test]
    fn generated_header_exists_and_declares_the_api() {
        let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/triadsim.h"))
            .expect("cbindgen header generated at build time");
        for symbol in [
            "TriadSim",
            "TriadStatus",
            "triadsim_new",
            "triadsim_free",
            "triadsim_write",
            "triadsim_read",
            "triadsim_crash",
            "triadsim_recover",
            "triadsim_state_hash",
            "triadsim_stats_csv",
            "triadsim_pad_reuse_count",
            "triadsim_recovery_seconds",
        ] {
            assert!(header.contains(symbol), "header missing {symbol}");
        }
    }
}
