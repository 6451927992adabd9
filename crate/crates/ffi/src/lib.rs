//! C ABI over the srdft engine.
//!
//! Objects are opaque handles created by `srdft_*_new`/`_load`/`_parse`
//! functions and released by the matching `_free`. Every fallible function
//! returns an [`SrdftStatus`]; on failure the message is available from
//! [`srdft_last_error`] on the same thread. Lengths are Bohr, energies Hartree.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use srdft::chem::{parse_basis, parse_xyz, BasisSet, LengthUnit, Molecule, Positions};
use srdft::config::BUILTIN_STO3G;
use srdft::model::{load_checkpoint, model_energy, predict_coefficients, ModelParams, PreparedFrame};
use srdft::scf::{solve_scf, ScfOptions};
use srdft::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrdftStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad UTF-8, bad lengths or inconsistent handles.
    InvalidArgument = 2,
    /// Malformed basis, XYZ or configuration text.
    Parse = 3,
    /// SCF did not converge, singular overlap, unstable numerics.
    Numerical = 4,
    Checkpoint = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Parsed basis set.
pub struct SrdftBasis(BasisSet);

/// Atoms, positions and charge.
pub struct SrdftMolecule(Molecule);

/// Trained model parameters.
pub struct SrdftModel(ModelParams);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SrdftStatus {
    match e {
        Error::Parse { .. }
        | Error::UnknownElement { .. }
        | Error::FrameMismatch { .. }
        | Error::UnknownOrbital(_)
        | Error::Config { .. } => SrdftStatus::Parse,
        Error::InvalidMolecule(_)
        | Error::MissingElement(_)
        | Error::DegenerateGeometry { .. }
        | Error::DimensionMismatch(_)
        | Error::EmptySource(_) => SrdftStatus::InvalidArgument,
        Error::Checkpoint(_) => SrdftStatus::Checkpoint,
        Error::Io { .. } => SrdftStatus::Io,
        _ => SrdftStatus::Numerical,
    }
}

struct Fail(SrdftStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(SrdftStatus::InvalidArgument, msg.to_string())
}

/// Run `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SrdftStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SrdftStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            SrdftStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SrdftStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not UTF-8"))
}

/// # Safety
/// `p` is null or points to a live handle.
unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail(SrdftStatus::NullPointer, "null handle".into()))
}

/// # Safety
/// `out` is null or valid for one write.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(SrdftStatus::NullPointer, "null output pointer".into()));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn srdft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srdft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The built-in STO-3G basis (H through Ne).
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_basis_sto3g(out: *mut *mut SrdftBasis) -> SrdftStatus {
    guard(|| {
        let b = parse_basis(BUILTIN_STO3G)?;
        put(out, Box::into_raw(Box::new(SrdftBasis(b))))
    })
}

/// Parse a basis in Gaussian94 format.
///
/// # Safety
/// `basis_text` is a NUL-terminated string; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_basis_parse(basis_text: *const c_char, out: *mut *mut SrdftBasis) -> SrdftStatus {
    guard(|| {
        let b = parse_basis(text(basis_text)?)?;
        put(out, Box::into_raw(Box::new(SrdftBasis(b))))
    })
}

/// # Safety
/// `basis` is null or came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdft_basis_free(basis: *mut SrdftBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Molecule from `n_atoms` atomic numbers and an `n_atoms x 3` row-major
/// position array in Bohr.
///
/// # Safety
/// `atomic_numbers` holds `n_atoms` values, `positions` holds `3 n_atoms`;
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_molecule_new(
    atomic_numbers: *const u32,
    positions: *const f64,
    n_atoms: usize,
    charge: i32,
    out: *mut *mut SrdftMolecule,
) -> SrdftStatus {
    guard(|| {
        if atomic_numbers.is_null() || positions.is_null() {
            return Err(Fail(SrdftStatus::NullPointer, "null array".into()));
        }
        if n_atoms == 0 {
            return Err(invalid("n_atoms must be positive"));
        }
        let z = std::slice::from_raw_parts(atomic_numbers, n_atoms).to_vec();
        let p = std::slice::from_raw_parts(positions, 3 * n_atoms);
        let m = Molecule::new(z, Positions::from_row_slice(n_atoms, 3, p), charge)?;
        put(out, Box::into_raw(Box::new(SrdftMolecule(m))))
    })
}

/// First frame of an XYZ text with coordinates in Angstrom.
///
/// # Safety
/// `xyz` is a NUL-terminated string; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_molecule_from_xyz(
    xyz: *const c_char,
    charge: i32,
    out: *mut *mut SrdftMolecule,
) -> SrdftStatus {
    guard(|| {
        let set = parse_xyz(text(xyz)?, LengthUnit::Angstrom, charge)?;
        let m = set.molecule(0)?;
        put(out, Box::into_raw(Box::new(SrdftMolecule(m))))
    })
}

/// # Safety
/// `molecule` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn srdft_molecule_n_atoms(molecule: *const SrdftMolecule) -> usize {
    molecule.as_ref().map_or(0, |m| m.0.n_atoms())
}

/// # Safety
/// `molecule` is null or came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdft_molecule_free(molecule: *mut SrdftMolecule) {
    if !molecule.is_null() {
        drop(Box::from_raw(molecule));
    }
}

/// Converged RHF total energy with default SCF settings. Non-convergence is
/// reported as `Numerical`.
///
/// # Safety
/// Handles are live; `energy` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_scf_energy(
    molecule: *const SrdftMolecule,
    basis: *const SrdftBasis,
    energy: *mut f64,
) -> SrdftStatus {
    guard(|| {
        let r = solve_scf(&handle(molecule)?.0, &handle(basis)?.0, &ScfOptions::default())?;
        if !r.converged {
            return Err(Fail(SrdftStatus::Numerical, format!("SCF not converged after {} iterations", r.iterations)));
        }
        put(energy, r.energy)
    })
}

/// Load model parameters from a checkpoint file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_model_load(path: *const c_char, out: *mut *mut SrdftModel) -> SrdftStatus {
    guard(|| {
        let (params, _, _) = load_checkpoint(Path::new(text(path)?))?;
        put(out, Box::into_raw(Box::new(SrdftModel(params))))
    })
}

/// # Safety
/// `model` is null or came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdft_model_free(model: *mut SrdftModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of basis functions the model predicts for; 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srdft_model_n_basis(model: *const SrdftModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.layout.n_basis())
}

fn prepare(model: &SrdftModel, molecule: &SrdftMolecule, basis: &SrdftBasis) -> Result<PreparedFrame, Fail> {
    Ok(PreparedFrame::new(&model.0, molecule.0.clone(), &basis.0)?)
}

/// Energy of the model's predicted orbitals at `molecule`.
///
/// # Safety
/// Handles are live; `energy` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn srdft_model_energy(
    model: *const SrdftModel,
    molecule: *const SrdftMolecule,
    basis: *const SrdftBasis,
    energy: *mut f64,
) -> SrdftStatus {
    guard(|| {
        let frame = prepare(handle(model)?, handle(molecule)?, handle(basis)?)?;
        let e = model_energy(&handle(model)?.0, &frame)?;
        put(energy, e)
    })
}

/// Predicted coefficient matrix, `n x n` column-major with `n` from
/// [`srdft_model_n_basis`]; `len` must equal `n * n`.
///
/// # Safety
/// Handles are live; `out` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srdft_model_coefficients(
    model: *const SrdftModel,
    molecule: *const SrdftMolecule,
    basis: *const SrdftBasis,
    out: *mut f64,
    len: usize,
) -> SrdftStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(SrdftStatus::NullPointer, "null output pointer".into()));
        }
        let m = handle(model)?;
        let frame = prepare(m, handle(molecule)?, handle(basis)?)?;
        let c = predict_coefficients(&m.0, &frame)?.values;
        if c.len() != len {
            return Err(invalid(&format!("buffer holds {len} values, need {}", c.len())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(c.as_slice());
        Ok(())
    })
}
