//! C interface to trackverify. Every function returns a [`TvStatus`];
//! results go through out-pointers. Handles are opaque and owned by the
//! caller once returned, to be released with the matching `_free`.
//!
//! On failure, [`tv_last_error`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use trackverify::netcore::{nnw, Network};
use trackverify::speclang::{instantiate, parse_property, pretty_print, PropertySpec};
use trackverify::tensor::Tensor;
use trackverify::verify::{
    check_problem, check_robustness, propagate_bounds, IntervalTensor, Verdict, VerifyConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Parse = 5,
    Shape = 6,
    Verify = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvVerdict {
    Verified = 0,
    Falsified = 1,
    Unknown = 2,
}

/// Opaque network handle.
pub struct TvNetwork(Network);

/// Opaque parsed property.
pub struct TvProperty(PropertySpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(TvStatus, String);

type Result<T> = std::result::Result<T, Failure>;

fn err<T>(status: TvStatus, msg: impl ToString) -> Result<T> {
    Err(Failure(status, msg.to_string()))
}

/// Runs `f`, records any error and converts panics to [`TvStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<()>) -> TvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TvStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TvStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => err(TvStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => err(TvStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str> {
    if p.is_null() {
        return err(TvStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| err(TvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn floats<'a>(p: *const f32, len: usize, what: &str) -> Result<&'a [f32]> {
    if p.is_null() {
        return err(TvStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn floats_mut<'a>(p: *mut f32, len: usize, what: &str) -> Result<&'a mut [f32]> {
    if p.is_null() {
        return err(TvStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Copies a row-major image into a tensor of the network's input shape.
fn input_tensor(net: &Network, data: &[f32]) -> Result<Tensor> {
    let shape = net.input_shape();
    let want: usize = shape.iter().product();
    if data.len() != want {
        return err(
            TvStatus::Shape,
            format!("input has {} values, network expects {want}", data.len()),
        );
    }
    if data.iter().any(|v| !v.is_finite()) {
        return err(
            TvStatus::InvalidArgument,
            "input contains non-finite values",
        );
    }
    Tensor::new(shape, data.to_vec()).or_else(|e| err(TvStatus::Shape, e))
}

fn check_len(len: usize, net: &Network, what: &str) -> Result<()> {
    if len < net.output_len() {
        return err(
            TvStatus::Shape,
            format!(
                "{what} holds {len} values, network produces {}",
                net.output_len()
            ),
        );
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn tv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Freshly initialized network for square `side`x`side` inputs (`side` a
/// multiple of 4; 112 is the canonical size).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tv_network_new(
    seed: u64,
    side: usize,
    out: *mut *mut TvNetwork,
) -> TvStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        if side < 4 || side % 4 != 0 {
            return err(
                TvStatus::InvalidArgument,
                format!("side {side} is not a positive multiple of 4"),
            );
        }
        *out = boxed(TvNetwork(Network::with_side(seed, side)));
        Ok(())
    })
}

/// Loads a network from an NNW weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tv_network_load(
    path: *const c_char,
    out: *mut *mut TvNetwork,
) -> TvStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out = self::out(out, "out")?;
        let net = nnw::load(Path::new(path)).or_else(|e| match e {
            nnw::NnwError::Io { .. } => err(TvStatus::Io, e),
            _ => err(TvStatus::Format, e),
        })?;
        *out = boxed(TvNetwork(net));
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tv_network_save(net: *const TvNetwork, path: *const c_char) -> TvStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let path = c_str(path, "path")?;
        nnw::save(&net.0, Path::new(path)).or_else(|e| err(TvStatus::Io, e))
    })
}

/// Releases a network; null is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tv_network_free(net: *mut TvNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input side length and trainable parameter count.
///
/// # Safety
/// `net` must come from this library; the out-pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn tv_network_info(
    net: *const TvNetwork,
    side: *mut usize,
    params: *mut usize,
) -> TvStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        if let Some(s) = side.as_mut() {
            *s = net.input_shape()[0];
        }
        if let Some(p) = params.as_mut() {
            *p = net.total_params();
        }
        Ok(())
    })
}

/// Forward pass on a row-major image of `input_len` values in [0, 1];
/// writes the two normalized outputs.
///
/// # Safety
/// Buffers must hold at least the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn tv_network_forward(
    net: *const TvNetwork,
    input: *const f32,
    input_len: usize,
    output: *mut f32,
    output_len: usize,
) -> TvStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        let x = input_tensor(net, floats(input, input_len, "input")?)?;
        check_len(output_len, net, "output")?;
        let y = net.forward(&x).or_else(|e| err(TvStatus::Shape, e))?;
        floats_mut(output, output_len, "output")?[..y.len()].copy_from_slice(y.data());
        Ok(())
    })
}

/// Interval bounds of the outputs over the L-infinity ball of radius
/// `epsilon` around the input, intersected with [0, 1].
///
/// # Safety
/// Buffers must hold at least the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn tv_network_bounds(
    net: *const TvNetwork,
    input: *const f32,
    input_len: usize,
    epsilon: f64,
    lower: *mut f32,
    upper: *mut f32,
    output_len: usize,
) -> TvStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        let x = input_tensor(net, floats(input, input_len, "input")?)?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return err(
                TvStatus::InvalidArgument,
                format!("radius {epsilon} must be finite and non-negative"),
            );
        }
        check_len(output_len, net, "bound buffer")?;
        let b = propagate_bounds(net, &IntervalTensor::ball(&x, epsilon))
            .or_else(|e| err(TvStatus::Verify, e))?;
        let n = b.len();
        floats_mut(lower, output_len, "lower")?[..n].copy_from_slice(b.lower().data());
        floats_mut(upper, output_len, "upper")?[..n].copy_from_slice(b.upper().data());
        Ok(())
    })
}

/// Checks `|N(x)[i] - N(x0)[i]| <= delta` for every output over the ball.
/// When the verdict is falsified and `counterexample` is non-null, the
/// witness (`input_len` values) is written there.
///
/// # Safety
/// Buffers must hold at least `input_len` values; `verdict` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tv_check_robustness(
    net: *const TvNetwork,
    input: *const f32,
    input_len: usize,
    epsilon: f64,
    delta: f64,
    split_budget: usize,
    seed: u64,
    verdict: *mut TvVerdict,
    counterexample: *mut f32,
) -> TvStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        let x = input_tensor(net, floats(input, input_len, "input")?)?;
        let verdict = out(verdict, "verdict")?;
        if !(delta >= 0.0 && delta.is_finite()) {
            return err(
                TvStatus::InvalidArgument,
                format!("threshold {delta} must be finite and non-negative"),
            );
        }
        let cfg = VerifyConfig {
            split_budget,
            seed,
            ..VerifyConfig::default()
        };
        let v = check_robustness(net, &x, epsilon, delta, &cfg)
            .or_else(|e| err(TvStatus::Verify, e))?;
        *verdict = write_verdict(&v.verdict, counterexample, input_len);
        Ok(())
    })
}

unsafe fn write_verdict(v: &Verdict, counterexample: *mut f32, len: usize) -> TvVerdict {
    match v {
        Verdict::Verified => TvVerdict::Verified,
        Verdict::Unknown { .. } => TvVerdict::Unknown,
        Verdict::Falsified {
            counterexample: c, ..
        } => {
            if !counterexample.is_null() {
                slice::from_raw_parts_mut(counterexample, len).copy_from_slice(c.data());
            }
            TvVerdict::Falsified
        }
    }
}

/// Parses property text. Parse errors report `line:col: message` through
/// [`tv_last_error`].
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tv_property_parse(
    source: *const c_char,
    out: *mut *mut TvProperty,
) -> TvStatus {
    guard(|| {
        let src = c_str(source, "source")?;
        let out = self::out(out, "out")?;
        let spec = parse_property(src).or_else(|e| err(TvStatus::Parse, e))?;
        *out = boxed(TvProperty(spec));
        Ok(())
    })
}

/// # Safety
/// `prop` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tv_property_free(prop: *mut TvProperty) {
    if !prop.is_null() {
        drop(Box::from_raw(prop));
    }
}

/// Ball radius after substituting parameter values.
///
/// # Safety
/// `prop` must come from this library and `epsilon` be valid.
#[no_mangle]
pub unsafe extern "C" fn tv_property_epsilon(
    prop: *const TvProperty,
    epsilon: *mut f64,
) -> TvStatus {
    guard(|| {
        let spec = &deref(prop, "prop")?.0;
        let e = out(epsilon, "epsilon")?;
        *e = spec.epsilon().or_else(|e| err(TvStatus::Parse, e))?;
        Ok(())
    })
}

/// Canonical text of the property, to be released with [`tv_string_free`].
///
/// # Safety
/// `prop` must come from this library and `text` be valid.
#[no_mangle]
pub unsafe extern "C" fn tv_property_format(
    prop: *const TvProperty,
    text: *mut *mut c_char,
) -> TvStatus {
    guard(|| {
        let spec = &deref(prop, "prop")?.0;
        let text = out(text, "text")?;
        *text = CString::new(pretty_print(spec))
            .or_else(|e| err(TvStatus::InvalidArgument, e))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Checks a parsed property against `net`. Input paths resolve against
/// `base_dir` (null means the working directory). `counterexample`, when
/// non-null, receives the witness of a falsified verdict and must hold one
/// network input.
///
/// # Safety
/// Handles must come from this library; `verdict` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tv_property_verify(
    prop: *const TvProperty,
    net: *const TvNetwork,
    base_dir: *const c_char,
    split_budget: usize,
    seed: u64,
    verdict: *mut TvVerdict,
    counterexample: *mut f32,
) -> TvStatus {
    guard(|| {
        let spec = &deref(prop, "prop")?.0;
        let net = &deref(net, "net")?.0;
        let base = if base_dir.is_null() {
            "."
        } else {
            c_str(base_dir, "base_dir")?
        };
        let verdict = out(verdict, "verdict")?;
        let problem =
            instantiate(spec, net, Path::new(base)).or_else(|e| err(TvStatus::Format, e))?;
        let cfg = VerifyConfig {
            split_budget,
            seed,
            ..VerifyConfig::default()
        };
        let v = check_problem(net, &problem, &cfg).or_else(|e| err(TvStatus::Verify, e))?;
        let len = net.input_shape().iter().product();
        *verdict = write_verdict(&v.verdict, counterexample, len);
        Ok(())
    })
}
