#![allow(clippy::excessive_precision)]

use std::ffi::{CStr, CString};
use std::ptr;

use protoperf_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pp_last_error()) }.to_str().unwrap().to_string()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

const TWO: &str = "protocol small { A -> B: senc(size=80); hash(size=80) }\n\
                   protocol big { A -> B: senc(size=80); hash(size=80); aenc(size=80, key=1024) }\n";

#[test]
fn estimate_and_compare_through_handles() {
    unsafe {
        let mut reg = ptr::null_mut();
        assert_eq!(pp_registry_table1(&mut reg), PpStatus::Ok);
        let mut corpus = ptr::null_mut();
        assert_eq!(pp_corpus_parse(c(TWO).as_ptr(), &mut corpus), PpStatus::Ok);
        assert_eq!(pp_corpus_len(corpus), 2);

        let mut est = 0.0;
        assert_eq!(pp_estimate(reg, corpus, c("small").as_ptr(), &mut est), PpStatus::Ok);
        assert!((est - 12.370185964666320384).abs() <= 1e-12 * est);

        let mut v = PpVerdict::default();
        assert_eq!(pp_compare(reg, corpus, c("small").as_ptr(), c("big").as_ptr(), 0.0, &mut v), PpStatus::Ok);
        assert_eq!(v.faster, PpFaster::P);
        assert_eq!(v.est_p, est);
        assert!((v.est_ratio - v.est_p / v.est_q).abs() < 1e-15);

        assert_eq!(pp_estimate(reg, corpus, c("nope").as_ptr(), &mut est), PpStatus::NotFound);
        assert!(last_error().contains("nope"));

        pp_corpus_free(corpus);
        pp_registry_free(reg);
    }
}

#[test]
fn registry_json_round_trip_and_eval() {
    unsafe {
        let mut reg = ptr::null_mut();
        pp_registry_table1(&mut reg);
        let mut json = ptr::null_mut();
        assert_eq!(pp_registry_to_json(reg, &mut json), PpStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(pp_registry_from_json(json, &mut again), PpStatus::Ok);
        pp_string_free(json);

        for cat in [PpCategory::SymmetricEncrypt, PpCategory::Hash, PpCategory::AsymmetricDecrypt] {
            let (mut a, mut b) = (0.0, 0.0);
            assert_eq!(pp_registry_eval(reg, cat, 1024.0, &mut a), PpStatus::Ok);
            assert_eq!(pp_registry_eval(again, cat, 1024.0, &mut b), PpStatus::Ok);
            assert_eq!(a, b);
        }
        let mut x = 0.0;
        assert_eq!(pp_registry_eval(reg, PpCategory::Hash, f64::NAN, &mut x), PpStatus::InvalidArgument);

        let mut bad = ptr::null_mut();
        assert_eq!(pp_registry_from_json(c("{}").as_ptr(), &mut bad), PpStatus::Registry);
        assert!(bad.is_null());
        assert!(last_error().contains("symmetric.encrypt"));
        assert_eq!(pp_registry_load(c("/nonexistent/r.json").as_ptr(), &mut bad), PpStatus::Io);

        pp_registry_free(again);
        pp_registry_free(reg);
    }
}

#[test]
fn generate_serialize_parse_round_trip() {
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(pp_generate(2024, 50, &mut a), PpStatus::Ok);
        assert_eq!(pp_corpus_len(a), 50);
        let mut text = ptr::null_mut();
        assert_eq!(pp_corpus_serialize(a, &mut text), PpStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(pp_corpus_parse(text, &mut b), PpStatus::Ok);
        let mut text2 = ptr::null_mut();
        pp_corpus_serialize(b, &mut text2);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));
        pp_string_free(text);
        pp_string_free(text2);
        pp_corpus_free(a);
        pp_corpus_free(b);

        let mut bad = ptr::null_mut();
        assert_eq!(pp_corpus_parse(c("protocol x { A -> B: senc(size=0) }").as_ptr(), &mut bad), PpStatus::Parse);
        assert!(bad.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn fit_recovers_exact_cubic() {
    let xs: Vec<f64> = (0..8).map(|i| 16.0 * 2f64.powi(i)).collect();
    let want = [3.0, -2.0, 0.5, 1e-6];
    let ys: Vec<f64> = xs.iter().map(|x| want[0] + want[1] * x + want[2] * x * x + want[3] * x * x * x).collect();
    let mut got = [0.0; 4];
    let mut rmse = -1.0;
    unsafe {
        assert_eq!(pp_fit_cubic(xs.as_ptr(), ys.as_ptr(), xs.len(), got.as_mut_ptr(), &mut rmse), PpStatus::Ok);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0), "{got:?}");
        }
        assert!((0.0..1e-6).contains(&rmse));
        assert_eq!(pp_fit_cubic(xs.as_ptr(), ys.as_ptr(), 3, got.as_mut_ptr(), ptr::null_mut()), PpStatus::Fit);
        assert!(last_error().contains("distinct"));
    }
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    unsafe {
        assert_eq!(pp_registry_table1(ptr::null_mut()), PpStatus::NullArgument);
        let mut corpus = ptr::null_mut();
        assert_eq!(pp_corpus_parse(ptr::null(), &mut corpus), PpStatus::NullArgument);
        assert!(last_error().contains("text"));
        let mut est = 0.0;
        assert_eq!(pp_estimate(ptr::null(), ptr::null(), ptr::null(), &mut est), PpStatus::NullArgument);
        assert_eq!(pp_fit_cubic(ptr::null(), ptr::null(), 0, ptr::null_mut(), ptr::null_mut()), PpStatus::NullArgument);
        assert_eq!(pp_corpus_len(ptr::null()), 0);
        pp_corpus_free(ptr::null_mut());
        pp_registry_free(ptr::null_mut());
        pp_string_free(ptr::null_mut());

        let bytes = [0xffu8, 0];
        assert_eq!(pp_corpus_parse(bytes.as_ptr().cast(), &mut corpus), PpStatus::InvalidUtf8);
    }
}

#[test]
fn success_clears_last_error() {
    unsafe {
        let mut reg = ptr::null_mut();
        pp_registry_from_json(c("not json").as_ptr(), &mut reg);
        assert!(!last_error().is_empty());
        pp_registry_table1(&mut reg);
        assert_eq!(last_error(), "");
        pp_registry_free(reg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/protoperf.h");
    for f in ["pp_last_error", "pp_string_free", "pp_registry_load", "pp_registry_from_json", "pp_registry_table1",
              "pp_registry_to_json", "pp_registry_eval", "pp_registry_free", "pp_corpus_parse", "pp_generate",
              "pp_corpus_serialize", "pp_corpus_len", "pp_corpus_free", "pp_estimate", "pp_compare", "pp_fit_cubic"] {
        assert!(header.contains(&format!(" {f}(")) || header.contains(&format!("*{f}(")), "{f}");
    }
    assert!(header.contains("typedef struct PpRegistry PpRegistry;"));
}
