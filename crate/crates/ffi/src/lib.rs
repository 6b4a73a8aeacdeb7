//! C ABI over `ldtm`.
//!
//! Corpora and models cross the boundary as opaque handles that the caller
//! releases with the matching `*_free`. Every fallible call returns an
//! [`LdtmStatus`]; on failure [`ldtm_last_error_message`] describes the most
//! recent error on the calling thread. Panics are caught and reported as
//! `LDTM_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ldtm::corpus::{ingest_events, read_events, Corpus, PruneRules};
use ldtm::dynamics::{kl_gradient, kl_objective, KlContext};
use ldtm::granger::{tsc_window, Direction, FStatForm, SeriesWindow};
use ldtm::ldtm::{run_inference, DynamicsMode, Model, ModelConfig};
use ldtm::{Error, ErrorCategory};

/// Result of every fallible call. The usage, data and numeric codes match
/// the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdtmStatus {
    Ok = 0,
    Usage = 2,
    Data = 3,
    Numeric = 4,
    NullPointer = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdtmMode {
    Identity = 0,
    HalfDecay = 1,
    FullDecay = 2,
    Learned = 3,
}

impl From<LdtmMode> for DynamicsMode {
    fn from(m: LdtmMode) -> Self {
        match m {
            LdtmMode::Identity => DynamicsMode::Identity,
            LdtmMode::HalfDecay => DynamicsMode::HalfDecay,
            LdtmMode::FullDecay => DynamicsMode::FullDecay,
            LdtmMode::Learned => DynamicsMode::Learned,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdtmDirection {
    IToJ = 0,
    JToI = 1,
    Tie = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdtmTrainOptions {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub mode: LdtmMode,
    pub seed: u64,
    /// Nonzero selects the `K beta` topic-item normalizer.
    pub k_beta_normalizer: i32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdtmTscResult {
    pub f_forward: f64,
    pub f_backward: f64,
    pub direction: LdtmDirection,
}

/// Opaque corpus handle.
pub struct LdtmCorpus(Corpus);

/// Opaque model handle.
pub struct LdtmModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(err: Error) -> LdtmStatus {
    let status = match err.category() {
        ErrorCategory::Usage => LdtmStatus::Usage,
        ErrorCategory::Data => LdtmStatus::Data,
        ErrorCategory::Numeric => LdtmStatus::Numeric,
    };
    set_error(err.to_string());
    status
}

fn null(what: &str) -> LdtmStatus {
    set_error(format!("{what} is null"));
    LdtmStatus::NullPointer
}

fn guard<F: FnOnce() -> LdtmStatus>(f: F) -> LdtmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            LdtmStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, LdtmStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("path is not valid UTF-8".into());
        LdtmStatus::Usage
    })
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], LdtmStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ldtm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ldtm_train_options_default() -> LdtmTrainOptions {
    let c = ModelConfig::default();
    LdtmTrainOptions {
        topics: c.topics,
        alpha: c.alpha,
        beta: c.beta,
        iterations: c.iterations,
        mode: LdtmMode::Learned,
        seed: c.seed,
        k_beta_normalizer: 0,
    }
}

/// Reads adoption events and prunes items seen fewer than `min_frequency`
/// times.
#[no_mangle]
pub unsafe extern "C" fn ldtm_corpus_load_events(
    path: *const c_char,
    min_frequency: u64,
    out: *mut *mut LdtmCorpus,
) -> LdtmStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let rules = PruneRules {
            min_frequency,
            ..PruneRules::default()
        };
        let res = File::open(path)
            .map_err(Error::from)
            .and_then(read_events)
            .and_then(|ev| ingest_events(&ev, &rules));
        match res {
            Ok(c) => {
                *out = Box::into_raw(Box::new(LdtmCorpus(c)));
                LdtmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_corpus_load_snapshot(path: *const c_char, out: *mut *mut LdtmCorpus) -> LdtmStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match File::open(path).map_err(Error::from).and_then(Corpus::read_snapshot) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(LdtmCorpus(c)));
                LdtmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_corpus_num_users(corpus: *const LdtmCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.num_users())
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_corpus_vocab_size(corpus: *const LdtmCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.vocab_size())
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_corpus_total_tokens(corpus: *const LdtmCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.total_tokens())
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_corpus_free(corpus: *mut LdtmCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Fits a model with the default decay search. `options` may be null for
/// the defaults of [`ldtm_train_options_default`].
#[no_mangle]
pub unsafe extern "C" fn ldtm_train(
    corpus: *const LdtmCorpus,
    options: *const LdtmTrainOptions,
    out: *mut *mut LdtmModel,
) -> LdtmStatus {
    guard(|| {
        let Some(corpus) = corpus.as_ref() else {
            return null("corpus");
        };
        if out.is_null() {
            return null("out");
        }
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| ldtm_train_options_default());
        let config = ModelConfig {
            topics: o.topics,
            alpha: o.alpha,
            beta: o.beta,
            iterations: o.iterations,
            dynamics_mode: o.mode.into(),
            seed: o.seed,
            k_beta_normalizer: o.k_beta_normalizer != 0,
            ..ModelConfig::default()
        };
        match run_inference(&corpus.0, &config) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(LdtmModel(m)));
                LdtmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_model_load(path: *const c_char, out: *mut *mut LdtmModel) -> LdtmStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match File::open(path).map_err(Error::from).and_then(Model::read_snapshot) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(LdtmModel(m)));
                LdtmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_model_save(model: *const LdtmModel, path: *const c_char) -> LdtmStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return null("model");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match File::create(path)
            .map_err(Error::from)
            .and_then(|f| model.0.write_snapshot(BufWriter::new(f)))
        {
            Ok(()) => LdtmStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_model_topics(model: *const LdtmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.topics())
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_model_items(model: *const LdtmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.topic_items.items())
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_model_num_users(model: *const LdtmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.users.len())
}

/// Number of time steps of `user`, or 0 if out of range.
#[no_mangle]
pub unsafe extern "C" fn ldtm_model_steps(model: *const LdtmModel, user: usize) -> usize {
    model
        .as_ref()
        .and_then(|m| m.0.step_tokens.get(user))
        .map_or(0, Vec::len)
}

/// Copies the filtered topic distribution of `user` at 1-based step `t`
/// into `out`, which must hold exactly `ldtm_model_topics` values.
#[no_mangle]
pub unsafe extern "C" fn ldtm_model_theta(
    model: *const LdtmModel,
    user: usize,
    t: usize,
    out: *mut f64,
    len: usize,
) -> LdtmStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return null("model");
        };
        if out.is_null() {
            return null("out");
        }
        let theta = model.0.theta();
        let Some(row) = theta.at(user, t) else {
            set_error(format!("no step {t} for user {user}"));
            return LdtmStatus::Usage;
        };
        if row.len() != len {
            return fail(Error::Dimension {
                expected: row.len(),
                got: len,
            });
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(row);
        LdtmStatus::Ok
    })
}

/// Copies topic `k`'s item distribution into `out` of length
/// `ldtm_model_items`.
#[no_mangle]
pub unsafe extern "C" fn ldtm_model_phi(model: *const LdtmModel, k: usize, out: *mut f64, len: usize) -> LdtmStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return null("model");
        };
        if out.is_null() {
            return null("out");
        }
        let phi = model.0.phi();
        if k >= phi.topics() {
            set_error(format!("topic {k} out of range"));
            return LdtmStatus::Usage;
        }
        let row = phi.row(k);
        if row.len() != len {
            return fail(Error::Dimension {
                expected: row.len(),
                got: len,
            });
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(row);
        LdtmStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn ldtm_model_free(model: *mut LdtmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// TSC in both directions for two row-major `steps x topics` series.
/// `classical` nonzero selects the classical F statistic.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ldtm_tsc_pair(
    i_series: *const f64,
    j_series: *const f64,
    steps: usize,
    topics: usize,
    tau: usize,
    width: usize,
    lookahead: usize,
    classical: i32,
    out: *mut LdtmTscResult,
) -> LdtmStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let Some(n) = steps.checked_mul(topics) else {
            set_error("steps * topics overflows".into());
            return LdtmStatus::Usage;
        };
        let (i, j) = match (slice_arg(i_series, n, "i_series"), slice_arg(j_series, n, "j_series")) {
            (Ok(i), Ok(j)) => (i, j),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        if topics == 0 {
            set_error("topics must be >= 1".into());
            return LdtmStatus::Usage;
        }
        let rows = |s: &[f64]| s.chunks(topics).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let form = if classical != 0 {
            FStatForm::Classical
        } else {
            FStatForm::Compact
        };
        match SeriesWindow::from_series(&rows(i), &rows(j), tau, width, lookahead) {
            Ok(w) => {
                let r = tsc_window(&w, form);
                *out = LdtmTscResult {
                    f_forward: r.f_forward,
                    f_backward: r.f_backward,
                    direction: match r.direction {
                        Direction::IToJ => LdtmDirection::IToJ,
                        Direction::JToI => LdtmDirection::JToI,
                        Direction::Tie => LdtmDirection::Tie,
                    },
                };
                LdtmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn kl_context(
    x_post_prev: *const f64,
    psi: *const f64,
    mu: *const f64,
    topics: usize,
    alpha: f64,
) -> Result<KlContext, LdtmStatus> {
    let x = slice_arg(x_post_prev, topics, "x_post_prev")?;
    let p = slice_arg(psi, topics, "psi")?;
    let m = slice_arg(mu, topics, "mu")?;
    if topics == 0 || alpha.is_nan() || alpha <= 0.0 {
        set_error("need topics >= 1 and alpha > 0".into());
        return Err(LdtmStatus::Usage);
    }
    Ok(KlContext::new(x.to_vec(), p.to_vec(), alpha, m.to_vec()))
}

/// KL divergence from the expected prior to the expected posterior for one
/// transition.
#[no_mangle]
pub unsafe extern "C" fn ldtm_kl_objective(
    x_post_prev: *const f64,
    psi: *const f64,
    mu: *const f64,
    topics: usize,
    alpha: f64,
    out: *mut f64,
) -> LdtmStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match kl_context(x_post_prev, psi, mu, topics, alpha) {
            Ok(ctx) => {
                *out = kl_objective(&ctx);
                LdtmStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Gradient of [`ldtm_kl_objective`] in `mu`, written to `out[0..topics]`.
#[no_mangle]
pub unsafe extern "C" fn ldtm_kl_gradient(
    x_post_prev: *const f64,
    psi: *const f64,
    mu: *const f64,
    topics: usize,
    alpha: f64,
    out: *mut f64,
) -> LdtmStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match kl_context(x_post_prev, psi, mu, topics, alpha) {
            Ok(ctx) => {
                slice::from_raw_parts_mut(out, topics).copy_from_slice(&kl_gradient(&ctx));
                LdtmStatus::Ok
            }
            Err(s) => s,
        }
    })
}
