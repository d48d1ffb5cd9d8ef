//! C ABI for the table toolkit: parse HTML tables into grid handles, inspect
//! them, score hypotheses with TEDS, and run the validity checker, all from
//! C or any FFI-capable language.
//!
//! Conventions:
//! - Every fallible call returns a [`TabgenStatus`]; `Ok` is 0.
//! - On failure, [`tabgen_last_error_message`] returns a thread-local
//!   description, valid until the next failing call on the same thread.
//! - Strings returned through `char **` out-parameters are UTF-8, owned by
//!   the caller, and must be released with [`tabgen_string_free`].
//! - Grid handles are opaque and must be released with [`tabgen_grid_free`].
//! - No call unwinds across the boundary; internal panics surface as
//!   [`TabgenStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tabgen::checker::{validate_table, FillingChecker};
use tabgen::html::{html_to_grid, table_markup};
use tabgen::model::TableGrid;
use tabgen::teds::{teds_grids, TedsOptions};

/// Outcome of a C API call. Non-zero values are failures; the last error
/// message on the calling thread carries the details.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabgenStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The HTML did not parse into a table grid.
    ParseError = 3,
    /// The library hit an internal panic; treat the handle state as poisoned.
    Panic = 4,
}

/// Opaque handle to a resolved table grid.
pub struct TabgenGrid {
    grid: TableGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).expect("NUL bytes were replaced");
    });
}

/// Runs a call body, converting panics into a status instead of unwinding
/// across the FFI boundary.
fn guarded(body: impl FnOnce() -> TabgenStatus) -> TabgenStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            TabgenStatus::Panic
        }
    }
}

/// Reads a required C string argument.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, TabgenStatus> {
    if ptr.is_null() {
        set_error(format!("{name} must not be null"));
        return Err(TabgenStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        TabgenStatus::InvalidUtf8
    })
}

fn export_string(text: String, out: *mut *mut c_char) -> TabgenStatus {
    // Rust-produced text never contains NUL, but fail cleanly if it ever does.
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            TabgenStatus::Ok
        }
        Err(_) => {
            set_error("output contains a NUL byte");
            TabgenStatus::Panic
        }
    }
}

/// ABI revision of this header. Bump on any breaking signature change.
#[no_mangle]
pub extern "C" fn tabgen_abi_version() -> u32 {
    1
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn tabgen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, as a NUL-terminated
/// UTF-8 string. Owned by the library; valid until the next failing call on
/// the same thread. Empty when no call has failed yet.
#[no_mangle]
pub extern "C" fn tabgen_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses the first HTML table in `html` into a new grid handle, written to
/// `*out_grid` on success. The handle must be released with
/// [`tabgen_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_parse(
    html: *const c_char,
    out_grid: *mut *mut TabgenGrid,
) -> TabgenStatus {
    guarded(|| {
        if out_grid.is_null() {
            set_error("out_grid must not be null");
            return TabgenStatus::NullArgument;
        }
        let html = match required_str(html, "html") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match html_to_grid(html) {
            Ok(grid) => {
                *out_grid = Box::into_raw(Box::new(TabgenGrid { grid }));
                TabgenStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                TabgenStatus::ParseError
            }
        }
    })
}

/// Releases a grid handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_free(grid: *mut TabgenGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid rows; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_rows(grid: *const TabgenGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.n_rows)
}

/// Number of grid columns; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_cols(grid: *const TabgenGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.n_cols)
}

/// Number of logical cells (merged regions count once); 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_cell_count(grid: *const TabgenGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.cells.len())
}

/// True iff no cell spans more than one row or column. False for a null
/// handle.
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_is_simple(grid: *const TabgenGrid) -> bool {
    grid.as_ref().is_some_and(|g| g.grid.is_simple())
}

/// Renders the grid back to canonical `<table>` markup. The returned string
/// must be released with [`tabgen_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_html(
    grid: *const TabgenGrid,
    out_html: *mut *mut c_char,
) -> TabgenStatus {
    guarded(|| {
        if out_html.is_null() {
            set_error("out_html must not be null");
            return TabgenStatus::NullArgument;
        }
        let Some(g) = grid.as_ref() else {
            set_error("grid must not be null");
            return TabgenStatus::NullArgument;
        };
        export_string(table_markup(&g.grid), out_html)
    })
}

/// Cells of the grid as a JSON array (content, anchor position, spans,
/// header flag per cell). The returned string must be released with
/// [`tabgen_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tabgen_grid_cells_json(
    grid: *const TabgenGrid,
    out_json: *mut *mut c_char,
) -> TabgenStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("out_json must not be null");
            return TabgenStatus::NullArgument;
        }
        let Some(g) = grid.as_ref() else {
            set_error("grid must not be null");
            return TabgenStatus::NullArgument;
        };
        let json = serde_json::to_string(&g.grid.cells).expect("cells serialize");
        export_string(json, out_json)
    })
}

/// Tree edit distance similarity between two parsed tables, in [0, 1]
/// (1 means identical). `structure_only` ignores cell text; `merge_th_td`
/// scores `<th>` and `<td>` as the same tag. Both documents must parse.
#[no_mangle]
pub unsafe extern "C" fn tabgen_teds(
    pred_html: *const c_char,
    gold_html: *const c_char,
    structure_only: bool,
    merge_th_td: bool,
    out_score: *mut f64,
) -> TabgenStatus {
    guarded(|| {
        if out_score.is_null() {
            set_error("out_score must not be null");
            return TabgenStatus::NullArgument;
        }
        let pred = match required_str(pred_html, "pred_html") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let gold = match required_str(gold_html, "gold_html") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let pred_grid = match html_to_grid(pred) {
            Ok(g) => g,
            Err(e) => {
                set_error(format!("pred_html: {e}"));
                return TabgenStatus::ParseError;
            }
        };
        let gold_grid = match html_to_grid(gold) {
            Ok(g) => g,
            Err(e) => {
                set_error(format!("gold_html: {e}"));
                return TabgenStatus::ParseError;
            }
        };
        let opts = TedsOptions { structure_only, merge_th_td };
        *out_score = teds_grids(&pred_grid, &gold_grid, &opts);
        TabgenStatus::Ok
    })
}

/// Structural defects of the first table in `html`, as a JSON array of
/// `{kind, detail}` objects; an empty array means the table is valid.
/// Unparseable input is reported as defects, not as a parse failure. The
/// returned string must be released with [`tabgen_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tabgen_validate_json(
    html: *const c_char,
    out_json: *mut *mut c_char,
) -> TabgenStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("out_json must not be null");
            return TabgenStatus::NullArgument;
        }
        let html = match required_str(html, "html") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let defects = validate_table(html);
        let json = serde_json::to_string(&defects).expect("defects serialize");
        export_string(json, out_json)
    })
}

/// Full checker verdict for a table, as JSON: `{report: {structure, topic,
/// semantic, overall, defects}, accepted}`. `topic` may be null to skip the
/// topic rank. The returned string must be released with
/// [`tabgen_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tabgen_check_json(
    html: *const c_char,
    topic: *const c_char,
    out_json: *mut *mut c_char,
) -> TabgenStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("out_json must not be null");
            return TabgenStatus::NullArgument;
        }
        let html = match required_str(html, "html") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let topic = if topic.is_null() {
            None
        } else {
            match required_str(topic, "topic") {
                Ok(s) => Some(s),
                Err(status) => return status,
            }
        };
        let outcome = FillingChecker::surrogate().check(html, topic);
        let json = serde_json::to_string(&outcome).expect("outcomes serialize");
        export_string(json, out_json)
    })
}

/// Releases a string returned by this library. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn tabgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
