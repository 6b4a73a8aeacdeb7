use std::ffi::{CStr, CString};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::ptr;

use ldtm::dynamics::{kl_gradient, kl_objective, KlContext};
use ldtm::granger::{tsc_pair, FStatForm};
use ldtm::synth::{generate_causal_pair, CausalPairSpec};
use ldtm_ffi::*;

fn last_error() -> String {
    let p = ldtm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn write_events(dir: &Path) -> CString {
    let mut text = String::new();
    for u in 0..4 {
        for t in 1..=4 {
            let item = if u % 2 == 0 { "alpha" } else { "beta" };
            text.push_str(&format!("u{u}\t{t}\t{item}\t3\n"));
            text.push_str(&format!("u{u}\t{t}\tgamma\t2\n"));
        }
    }
    let p = dir.join("events.tsv");
    fs::write(&p, text).unwrap();
    cpath(&p)
}

#[test]
fn corpus_train_theta_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let events = write_events(dir.path());
    unsafe {
        let mut corpus = ptr::null_mut();
        assert_eq!(ldtm_corpus_load_events(events.as_ptr(), 1, &mut corpus), LdtmStatus::Ok);
        assert_eq!(ldtm_corpus_num_users(corpus), 4);
        assert_eq!(ldtm_corpus_vocab_size(corpus), 3);
        assert_eq!(ldtm_corpus_total_tokens(corpus), 4 * 4 * 5);

        let mut opts = ldtm_train_options_default();
        opts.topics = 2;
        opts.iterations = 5;
        opts.seed = 3;
        let mut model = ptr::null_mut();
        assert_eq!(ldtm_train(corpus, &opts, &mut model), LdtmStatus::Ok);
        assert_eq!(ldtm_model_topics(model), 2);
        assert_eq!(ldtm_model_items(model), 3);
        assert_eq!(ldtm_model_num_users(model), 4);
        assert_eq!(ldtm_model_steps(model, 0), 4);
        assert_eq!(ldtm_model_steps(model, 99), 0);

        let mut theta = [0.0; 2];
        assert_eq!(ldtm_model_theta(model, 1, 4, theta.as_mut_ptr(), 2), LdtmStatus::Ok);
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut phi = [0.0; 3];
        assert_eq!(ldtm_model_phi(model, 1, phi.as_mut_ptr(), 3), LdtmStatus::Ok);
        assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let snap = cpath(&dir.path().join("model.json"));
        assert_eq!(ldtm_model_save(model, snap.as_ptr()), LdtmStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(ldtm_model_load(snap.as_ptr(), &mut again), LdtmStatus::Ok);
        let mut theta2 = [0.0; 2];
        assert_eq!(ldtm_model_theta(again, 1, 4, theta2.as_mut_ptr(), 2), LdtmStatus::Ok);
        assert_eq!(theta, theta2);

        ldtm_model_free(again);
        ldtm_model_free(model);
        ldtm_corpus_free(corpus);
    }
}

#[test]
fn errors_map_to_status_and_message() {
    unsafe {
        let mut corpus = ptr::null_mut();
        let missing = CString::new("/nonexistent/events.tsv").unwrap();
        assert_eq!(
            ldtm_corpus_load_events(missing.as_ptr(), 1, &mut corpus),
            LdtmStatus::Data
        );
        assert!(corpus.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            ldtm_corpus_load_events(ptr::null(), 1, &mut corpus),
            LdtmStatus::NullPointer
        );
        assert!(last_error().contains("path"));

        let dir = tempfile::tempdir().unwrap();
        let events = write_events(dir.path());
        assert_eq!(ldtm_corpus_load_events(events.as_ptr(), 1, &mut corpus), LdtmStatus::Ok);
        let mut opts = ldtm_train_options_default();
        opts.topics = 1;
        let mut model = ptr::null_mut();
        assert_eq!(ldtm_train(corpus, &opts, &mut model), LdtmStatus::Usage);
        assert!(last_error().contains("topics"));

        opts.topics = 2;
        opts.iterations = 1;
        assert_eq!(ldtm_train(corpus, &opts, &mut model), LdtmStatus::Ok);
        let mut short = [0.0; 1];
        assert_eq!(
            ldtm_model_theta(model, 0, 1, short.as_mut_ptr(), 1),
            LdtmStatus::Numeric
        );
        assert_eq!(ldtm_model_theta(model, 0, 9, short.as_mut_ptr(), 1), LdtmStatus::Usage);
        assert_eq!(ldtm_model_phi(model, 5, short.as_mut_ptr(), 1), LdtmStatus::Usage);

        ldtm_model_free(model);
        ldtm_corpus_free(corpus);
        ldtm_model_free(ptr::null_mut());
        ldtm_corpus_free(ptr::null_mut());
    }
}

#[test]
fn kl_entry_points_match_core() {
    let x = [2.0, 5.0, 1.0];
    let psi = [4.0, 0.0, 1.0];
    let mu = [0.9, 0.3, 0.6];
    let ctx = KlContext::new(x.to_vec(), psi.to_vec(), 0.5, mu.to_vec());
    let mut f = 0.0;
    let mut g = [0.0; 3];
    unsafe {
        assert_eq!(
            ldtm_kl_objective(x.as_ptr(), psi.as_ptr(), mu.as_ptr(), 3, 0.5, &mut f),
            LdtmStatus::Ok
        );
        assert_eq!(
            ldtm_kl_gradient(x.as_ptr(), psi.as_ptr(), mu.as_ptr(), 3, 0.5, g.as_mut_ptr()),
            LdtmStatus::Ok
        );
        assert_eq!(
            ldtm_kl_objective(x.as_ptr(), psi.as_ptr(), mu.as_ptr(), 3, 0.0, &mut f),
            LdtmStatus::Usage
        );
        assert_eq!(
            ldtm_kl_objective(ptr::null(), psi.as_ptr(), mu.as_ptr(), 3, 0.5, &mut f),
            LdtmStatus::NullPointer
        );
    }
    assert_eq!(f, kl_objective(&ctx));
    assert_eq!(g.to_vec(), kl_gradient(&ctx));
}

#[test]
fn kl_fixture_value() {
    let x = [2.0, 2.0];
    let psi = [4.0, 0.0];
    let mu = [1.0, 1.0];
    let mut f = 0.0;
    unsafe {
        assert_eq!(
            ldtm_kl_objective(x.as_ptr(), psi.as_ptr(), mu.as_ptr(), 2, 0.5, &mut f),
            LdtmStatus::Ok
        );
    }
    assert!((f - 0.10230493428436283).abs() < 1e-14);
}

#[test]
fn tsc_pair_matches_core_and_flags_planted_direction() {
    let spec = CausalPairSpec::default();
    let k = spec.topics;
    let mut forward = 0;
    for seed in 0..20 {
        let (i, j) = generate_causal_pair(&spec, seed).unwrap();
        let flat = |s: &[Vec<f64>]| s.concat();
        let (fi, fj) = (flat(&i), flat(&j));
        let mut out = LdtmTscResult {
            f_forward: 0.0,
            f_backward: 0.0,
            direction: LdtmDirection::Tie,
        };
        let status = unsafe { ldtm_tsc_pair(fi.as_ptr(), fj.as_ptr(), spec.steps, k, 8, 4, 4, 0, &mut out) };
        assert_eq!(status, LdtmStatus::Ok);
        let core = tsc_pair(&i, &j, 8, 4, 4, FStatForm::Compact).unwrap();
        assert_eq!((out.f_forward, out.f_backward), (core.f_forward, core.f_backward));
        if out.direction == LdtmDirection::IToJ {
            forward += 1;
        }
    }
    assert!(forward >= 18, "planted direction recovered {forward}/20");

    let (i, _) = generate_causal_pair(&spec, 0).unwrap();
    let fi = i.concat();
    let mut out = LdtmTscResult {
        f_forward: 0.0,
        f_backward: 0.0,
        direction: LdtmDirection::IToJ,
    };
    unsafe {
        assert_eq!(
            ldtm_tsc_pair(fi.as_ptr(), fi.as_ptr(), spec.steps, k, 8, 4, 4, 0, &mut out),
            LdtmStatus::Ok
        );
        assert_eq!(out.direction, LdtmDirection::Tie);
        assert_eq!(
            ldtm_tsc_pair(fi.as_ptr(), fi.as_ptr(), spec.steps, k, 2, 4, 4, 0, &mut out),
            LdtmStatus::Data
        );
        assert!(last_error().contains("history"));
        assert_eq!(
            ldtm_tsc_pair(fi.as_ptr(), ptr::null(), spec.steps, k, 8, 4, 4, 0, &mut out),
            LdtmStatus::NullPointer
        );
    }
}

#[test]
fn header_is_current_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ldtm.h");
    let text = fs::read_to_string(&header).unwrap();
    for sym in [
        "ldtm_corpus_load_events",
        "ldtm_train",
        "ldtm_model_theta",
        "ldtm_tsc_pair",
        "ldtm_last_error_message",
        "ldtm_kl_gradient",
        "typedef struct LdtmModel LdtmModel;",
        "LDTM_STATUS_NUMERIC = 4",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }

    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("use.c");
        fs::write(
            &src,
            "#include \"ldtm.h\"\nint main(void) { LdtmTrainOptions o = ldtm_train_options_default(); return (int)o.topics; }\n",
        )
        .unwrap();
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(header.parent().unwrap())
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available; skipped compile check"),
        }
    }
}
