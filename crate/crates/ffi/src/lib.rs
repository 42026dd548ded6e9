//! C ABI over the thetanav simulator.
//!
//! All objects are opaque handles created by a `thn_*_new`/`thn_*_run`
//! function and released with the matching `thn_*_free`. Functions return a
//! [`ThnStatus`]; on failure, [`thn_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use thetanav::chip_io::ChipState;
use thetanav::harness::{run_track, PathScript, RunConfig, TrackResult};
use thetanav::theta_core::{sample_population, VelocityVector};
use thetanav::vector_net::{sharable_nodes, total_nodes};
use thetanav::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    BufferTooSmall = 5,
    Compile = 6,
    Tracking = 7,
    Chip = 8,
    Panic = 99,
}

/// Run configuration.
pub struct ThnConfig(RunConfig);

/// Outcome of a tracking run.
pub struct ThnTrackResult(TrackResult);

/// Emulated chip with its sampled population.
pub struct ThnChip(ChipState);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> ThnStatus {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::UnknownScript(_) => ThnStatus::Parse,
        Error::Io { .. } => ThnStatus::Io,
        Error::TooFewGroups { .. }
        | Error::TooFewAxisGroups { .. }
        | Error::NotOpposing | Error::InsufficientPopulation { .. } => {
            ThnStatus::Compile
        }
        Error::OutOfBounds { .. } | Error::TickBudget { .. } => ThnStatus::Tracking,
        Error::NotInClear
        | Error::NotProgrammed
        | Error::Nyquist { .. }
        | Error::StreamLength { .. }
        | Error::UnitIndex(_)
        | Error::Aliasing(_) => ThnStatus::Chip,
        _ => ThnStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ThnStatus>) -> ThnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThnStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            ThnStatus::Panic
        }
    }
}

fn fail(e: Error) -> ThnStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null() -> ThnStatus {
    set_error("null pointer argument");
    ThnStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, ThnStatus> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        ThnStatus::InvalidArgument
    })
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, ThnStatus> {
    p.as_mut().ok_or_else(null)
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, ThnStatus> {
    p.as_ref().ok_or_else(null)
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn thn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn thn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Total interference nodes for `m` inputs grouped by `n` serving `k` networks.
///
/// # Safety
/// `out` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn thn_total_nodes(m: u64, n: u32, k: u64, out: *mut u64) -> ThnStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = total_nodes(m, n, k).map_err(fail)?;
        Ok(())
    })
}

/// Nodes shared across networks for `m` inputs grouped by `n`.
///
/// # Safety
/// `out` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn thn_sharable_nodes(m: u64, n: u32, out: *mut u64) -> ThnStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = sharable_nodes(m, n).map_err(fail)?;
        Ok(())
    })
}

/// Creates a default configuration.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`thn_config_free`].
#[no_mangle]
pub unsafe extern "C" fn thn_config_new(out: *mut *mut ThnConfig) -> ThnStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = Box::into_raw(Box::new(ThnConfig(RunConfig::default())));
        Ok(())
    })
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn thn_config_from_toml(toml: *const c_char, out: *mut *mut ThnConfig) -> ThnStatus {
    guard(|| {
        let text = str_arg(toml)?;
        let out = out_arg(out)?;
        let cfg = RunConfig::from_toml_str(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(ThnConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn thn_config_set_seed(cfg: *mut ThnConfig, seed: u64) -> ThnStatus {
    guard(|| {
        out_arg(cfg)?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a handle from this library or null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn thn_config_free(cfg: *mut ThnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs a built-in script by name, or a TOML script given inline.
///
/// # Safety
/// `cfg` must be a valid handle, `script` a NUL-terminated string and `out`
/// a valid pointer; the result is freed with [`thn_track_free`].
#[no_mangle]
pub unsafe extern "C" fn thn_track_run(
    cfg: *const ThnConfig,
    script: *const c_char,
    out: *mut *mut ThnTrackResult,
) -> ThnStatus {
    guard(|| {
        let cfg = &ref_arg(cfg)?.0;
        let text = str_arg(script)?;
        let out = out_arg(out)?;
        let script = match PathScript::builtin(text, cfg.network.speed) {
            Ok(s) => s,
            Err(_) => PathScript::from_toml_str(text).map_err(fail)?,
        };
        let r = run_track(cfg, &script).map_err(fail)?;
        *out = Box::into_raw(Box::new(ThnTrackResult(r)));
        Ok(())
    })
}

/// Final bump location.
///
/// # Safety
/// `r` must be a valid handle and `x`, `y` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn thn_track_final(r: *const ThnTrackResult, x: *mut i32, y: *mut i32) -> ThnStatus {
    guard(|| {
        let r = &ref_arg(r)?.0;
        let (x, y) = (out_arg(x)?, out_arg(y)?);
        (*x, *y) = r.final_location;
        Ok(())
    })
}

/// Number of migration events.
///
/// # Safety
/// `r` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn thn_track_event_count(r: *const ThnTrackResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.events.len())
}

/// Event `i` as a tick and a direction letter (`E`, `N`, `W` or `S`).
///
/// # Safety
/// `r` must be a valid handle and `tick`, `dir` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn thn_track_event(
    r: *const ThnTrackResult,
    i: usize,
    tick: *mut u64,
    dir: *mut c_char,
) -> ThnStatus {
    guard(|| {
        let r = &ref_arg(r)?.0;
        let (tick, dir) = (out_arg(tick)?, out_arg(dir)?);
        let e = r.events.get(i).ok_or_else(|| {
            set_error(format!("event index {i} out of range"));
            ThnStatus::InvalidArgument
        })?;
        *tick = e.tick;
        *dir = e.direction.letter() as c_char;
        Ok(())
    })
}

/// # Safety
/// `r` must be a handle from this library or null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn thn_track_free(r: *mut ThnTrackResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Samples the configured population onto a new chip held in Clear.
///
/// # Safety
/// `cfg` must be a valid handle and `out` a valid pointer; the chip is freed
/// with [`thn_chip_free`].
#[no_mangle]
pub unsafe extern "C" fn thn_chip_new(cfg: *const ThnConfig, out: *mut *mut ThnChip) -> ThnStatus {
    guard(|| {
        let cfg = &ref_arg(cfg)?.0;
        let out = out_arg(out)?;
        let pop = sample_population(&cfg.population_spec()).map_err(fail)?;
        let chip = ChipState::new(&pop, cfg.scan).map_err(fail)?;
        *out = Box::into_raw(Box::new(ThnChip(chip)));
        Ok(())
    })
}

/// Asserts Clear, wiping the programming.
///
/// # Safety
/// `chip` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn thn_chip_clear(chip: *mut ThnChip) -> ThnStatus {
    guard(|| {
        out_arg(chip)?.0.assert_clear();
        Ok(())
    })
}

/// Loads a serial programming stream of `len` bits, one bit per byte.
///
/// # Safety
/// `chip` must be a valid handle and `bits` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn thn_chip_program(chip: *mut ThnChip, bits: *const u8, len: usize) -> ThnStatus {
    guard(|| {
        let chip = &mut out_arg(chip)?.0;
        if bits.is_null() {
            return Err(null());
        }
        let stream: Vec<bool> = std::slice::from_raw_parts(bits, len).iter().map(|&b| b != 0).collect();
        chip.load_stream(&stream).map_err(fail)
    })
}

/// Number of phases in one scan cycle.
///
/// # Safety
/// `chip` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn thn_chip_enabled_phases(chip: *const ThnChip) -> usize {
    chip.as_ref().map_or(0, |c| c.0.enabled_phases())
}

/// Zeroes and releases all oscillator phases.
///
/// # Safety
/// `chip` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn thn_chip_reset(chip: *mut ThnChip) -> ThnStatus {
    guard(|| {
        let chip = &mut out_arg(chip)?.0;
        chip.hold();
        chip.release();
        Ok(())
    })
}

/// Scans `n_cycles` at velocity (`vx`, `vy`) into `out`, one bit per byte.
/// `written` receives the number of bytes produced. Fails with
/// `BufferTooSmall` without advancing the chip if `cap` is insufficient.
///
/// # Safety
/// `chip` must be a valid handle, `out` must point to `cap` writable bytes
/// and `written` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn thn_chip_scan(
    chip: *mut ThnChip,
    vx: f64,
    vy: f64,
    n_cycles: usize,
    out: *mut u8,
    cap: usize,
    written: *mut usize,
) -> ThnStatus {
    guard(|| {
        let chip = &mut out_arg(chip)?.0;
        let written = out_arg(written)?;
        if out.is_null() {
            return Err(null());
        }
        let need = n_cycles.saturating_mul(chip.enabled_phases());
        if need > cap {
            set_error(format!("buffer holds {cap} bytes, {need} needed"));
            return Err(ThnStatus::BufferTooSmall);
        }
        let bits = chip.scan(VelocityVector::new(vx, vy), n_cycles).map_err(fail)?;
        let dst = std::slice::from_raw_parts_mut(out, bits.len());
        for (d, b) in dst.iter_mut().zip(&bits) {
            *d = *b as u8;
        }
        *written = bits.len();
        Ok(())
    })
}

/// # Safety
/// `chip` must be a handle from this library or null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn thn_chip_free(chip: *mut ThnChip) {
    if !chip.is_null() {
        drop(Box::from_raw(chip));
    }
}
