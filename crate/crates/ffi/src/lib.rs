//! C interface to `avgproc`.
//!
//! Every function returns an [`AvgStatus`] and writes results through out
//! pointers. Graphs are opaque [`AvgGraph`] handles created by the
//! `avg_graph_*` constructors and released with [`avg_graph_free`]. On
//! failure, [`avg_last_error_message`] describes the most recent error on the
//! calling thread. Panics never cross the boundary; they surface as
//! `AVG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use avgproc::bipartite::{exact_l2, profile, rho1};
use avgproc::ehrenfest::{hardy_constant, hypercube_avg_l2_exact};
use avgproc::sim::{mean_lp, Lp, MassConfig};
use avgproc::{Error, Graph, Part};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Unsupported = 3,
    Numerical = 4,
    Panic = 5,
}

/// Part of `K_{m,n-m}` holding the starting vertex.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgSide {
    /// The `m` vertices of the smaller part.
    C1 = 1,
    C2 = 2,
}

/// Opaque graph handle.
pub struct AvgGraph {
    inner: Graph,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AvgStatus {
    match e {
        Error::Parameter(_) => AvgStatus::InvalidParameter,
        Error::Capability(_) => AvgStatus::Unsupported,
        Error::Numerical(_) => AvgStatus::Numerical,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), AvgStatus>) -> AvgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AvgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            AvgStatus::Panic
        }
    }
}

fn check<T>(r: avgproc::Result<T>) -> Result<T, AvgStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), AvgStatus> {
    if p.is_null() {
        set_error(&format!("{name} is null"));
        return Err(AvgStatus::NullPointer);
    }
    Ok(())
}

/// # Safety
/// `out` must be null or valid for writes.
unsafe fn emit_graph(g: avgproc::Result<Graph>, out: *mut *mut AvgGraph) -> AvgStatus {
    guard(|| {
        non_null(out, "out")?;
        let g = check(g)?;
        *out = Box::into_raw(Box::new(AvgGraph { inner: g }));
        Ok(())
    })
}

/// Hypercube `{0,1}^d`, `1 <= d <= 30`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn avg_graph_hypercube(d: u32, out: *mut *mut AvgGraph) -> AvgStatus {
    emit_graph(Graph::hypercube(d), out)
}

/// Complete bipartite graph with parts of sizes `m <= k`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn avg_graph_complete_bipartite(m: usize, k: usize, out: *mut *mut AvgGraph) -> AvgStatus {
    emit_graph(Graph::complete_bipartite(m, k), out)
}

/// Complete graph on `n` vertices.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn avg_graph_complete(n: usize, out: *mut *mut AvgGraph) -> AvgStatus {
    emit_graph(Graph::complete(n), out)
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `g` must be null or a handle from an `avg_graph_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn avg_graph_free(g: *mut AvgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be null or a live handle; `n` and `edges` null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_graph_size(g: *const AvgGraph, n: *mut usize, edges: *mut usize) -> AvgStatus {
    guard(|| {
        non_null(g, "g")?;
        non_null(n, "n")?;
        non_null(edges, "edges")?;
        *n = (*g).inner.n();
        *edges = (*g).inner.edge_count();
        Ok(())
    })
}

/// Monte Carlo `E ||eta_t/pi - 1||_p^p` from a unit mass at `start`.
/// Deterministic for a given `seed`, whatever the thread count.
///
/// # Safety
/// `g` must be null or a live handle; out pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_mean_lp(
    g: *const AvgGraph,
    start: usize,
    t: f64,
    p: u32,
    replicas: usize,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> AvgStatus {
    guard(|| {
        non_null(g, "g")?;
        non_null(mean, "mean")?;
        non_null(std_error, "std_error")?;
        let g = &(*g).inner;
        let lp = check(Lp::from_p(p))?;
        let xi = check(MassConfig::dirac(g.n(), start))?;
        let est = check(mean_lp(g, &xi, t, lp, replicas, seed))?;
        *mean = est.mean;
        *std_error = est.stderr;
        Ok(())
    })
}

/// Exact `E ||eta_t/pi - 1||_2^2` on `K_{m,n-m}` from a vertex on `side`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_bipartite_exact_l2(m: usize, n: usize, side: AvgSide, t: f64, out: *mut f64) -> AvgStatus {
    guard(|| {
        non_null(out, "out")?;
        let part = match side {
            AvgSide::C1 => Part::C1,
            AvgSide::C2 => Part::C2,
        };
        *out = check(exact_l2(m, n, part, t))?;
        Ok(())
    })
}

/// Window time, exact distance and limiting profile at offset `a`.
///
/// # Safety
/// Out pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_bipartite_profile(
    m: usize,
    n: usize,
    a: f64,
    time: *mut f64,
    exact: *mut f64,
    predicted: *mut f64,
) -> AvgStatus {
    guard(|| {
        non_null(time, "time")?;
        non_null(exact, "exact")?;
        non_null(predicted, "predicted")?;
        let p = check(profile(m, n, a))?;
        (*time, *exact, *predicted) = (p.t, p.exact, p.predicted);
        Ok(())
    })
}

/// Smallest nonzero eigenvalue of the lumped pair chain on `K_{m,n-m}`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_bipartite_rho1(m: usize, n: usize, out: *mut f64) -> AvgStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = check(rho1(m, n))?;
        Ok(())
    })
}

/// Exact hypercube `E ||eta_t/pi - 1||_2^2` from a vertex. `value` may be
/// `+inf` for large `d` and small `t`; `log1p_value` is always finite.
///
/// # Safety
/// Out pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_hypercube_exact_l2(d: u32, t: f64, value: *mut f64, log1p_value: *mut f64) -> AvgStatus {
    guard(|| {
        non_null(value, "value")?;
        non_null(log1p_value, "log1p_value")?;
        let v = check(hypercube_avg_l2_exact(d, t))?;
        (*value, *log1p_value) = (v.value, v.log1p_value);
        Ok(())
    })
}

/// Hardy constant `C_M` of the urn chain, `1 <= big_m <= d/2`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn avg_hardy_constant(d: u32, big_m: usize, out: *mut f64) -> AvgStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = check(hardy_constant(d, big_m))?;
        Ok(())
    })
}

/// Message for the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn avg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn avg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
