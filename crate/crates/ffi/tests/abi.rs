use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use affect_align_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        aa_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn pea_and_matrix() {
    let mut v = -1.0;
    unsafe {
        assert_eq!(aa_pea(0, 3, &mut v), AaStatus::AA_OK);
        assert_eq!(v, 0.0);
        assert_eq!(aa_pea(4, 5, &mut v), AaStatus::AA_OK);
        assert_eq!(v, 0.875);
        assert_eq!(aa_pea(0, 11, &mut v), AaStatus::AA_INVALID_ARGUMENT);
        assert!(last_error().contains("11"));
        assert_eq!(aa_pea(0, 1, ptr::null_mut()), AaStatus::AA_NULL_POINTER);
    }
    let mut m = [0.0; 121];
    unsafe {
        assert_eq!(aa_proximity_matrix(m.as_mut_ptr(), 121), AaStatus::AA_OK);
        assert_eq!(aa_proximity_matrix(m.as_mut_ptr(), 120), AaStatus::AA_BUFFER_TOO_SMALL);
    }
    assert_eq!(
        &m[..11],
        &[1.0, 0.75, 0.75, 0.0, 0.5, 0.375, 0.625, 0.375, 0.5, 0.25, 0.25]
    );
    for i in 0..11 {
        for j in 0..11 {
            assert_eq!(m[i * 11 + j], m[j * 11 + i]);
        }
    }
}

#[test]
fn jsd_normalizes_and_validates() {
    let p = [2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let q = [0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut d = 0.0;
    unsafe {
        assert_eq!(
            aa_jsd(AaTaxonomy::AA_MORAL, p.as_ptr(), q.as_ptr(), 10, &mut d),
            AaStatus::AA_OK
        );
        assert_eq!(d, 1.0);
        assert_eq!(
            aa_jsd(AaTaxonomy::AA_MORAL, p.as_ptr(), p.as_ptr(), 10, &mut d),
            AaStatus::AA_OK
        );
        assert_eq!(d, 0.0);
        assert_eq!(
            aa_jsd(AaTaxonomy::AA_EMOTION, p.as_ptr(), q.as_ptr(), 10, &mut d),
            AaStatus::AA_INVALID_ARGUMENT
        );
        let zero = [0.0; 10];
        assert_eq!(
            aa_jsd(AaTaxonomy::AA_MORAL, zero.as_ptr(), q.as_ptr(), 10, &mut d),
            AaStatus::AA_DEGENERATE_DISTRIBUTION
        );
        let negative = [-1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(
            aa_jsd(AaTaxonomy::AA_MORAL, negative.as_ptr(), q.as_ptr(), 10, &mut d),
            AaStatus::AA_INVALID_ARGUMENT
        );
    }
}

#[test]
fn alignment_handle_lifecycle() {
    let mut h: *mut AaAlignment = ptr::null_mut();
    unsafe {
        assert_eq!(aa_alignment_new(AaTaxonomy::AA_EMOTION, &mut h), AaStatus::AA_OK);
        let mut score = AaAlignmentScore::default();
        assert_eq!(
            aa_alignment_compute(h, &mut score, ptr::null_mut(), 0),
            AaStatus::AA_INSUFFICIENT_TOPICS
        );
        let mut a = [0.1; 11];
        a[4] = 0.9;
        let b = [0.3; 11];
        for topic in ["gun control", "abortion"] {
            let t = CString::new(topic).unwrap();
            assert_eq!(
                aa_alignment_add_topic(h, t.as_ptr(), a.as_ptr(), a.as_ptr(), 11),
                AaStatus::AA_OK
            );
        }
        let t = CString::new("climate").unwrap();
        assert_eq!(
            aa_alignment_add_topic(h, t.as_ptr(), a.as_ptr(), b.as_ptr(), 11),
            AaStatus::AA_OK
        );
        assert_eq!(
            aa_alignment_add_topic(h, t.as_ptr(), a.as_ptr(), b.as_ptr(), 10),
            AaStatus::AA_INVALID_ARGUMENT
        );
        let mut per_topic = [0.0; 3];
        assert_eq!(
            aa_alignment_compute(h, &mut score, per_topic.as_mut_ptr(), 2),
            AaStatus::AA_BUFFER_TOO_SMALL
        );
        assert_eq!(
            aa_alignment_compute(h, &mut score, per_topic.as_mut_ptr(), 3),
            AaStatus::AA_OK
        );
        assert_eq!(score.n_topics, 3);
        assert_eq!(per_topic[0], 1.0);
        assert!(per_topic[1] < 1.0);
        assert_eq!(per_topic[2], 1.0);
        assert!((score.mean - (2.0 + per_topic[1]) / 3.0).abs() < 1e-15);
        aa_alignment_free(h);
        aa_alignment_free(ptr::null_mut());
    }
}

#[test]
fn sign_flip() {
    let mut r = AaSignificance::default();
    let diffs = [0.1; 5];
    unsafe {
        assert_eq!(aa_sign_flip_test(diffs.as_ptr(), 5, 10_000, 0, &mut r), AaStatus::AA_OK);
        assert_eq!(r.p_value, 0.0625);
        assert!(r.exact);
        assert_eq!(
            aa_sign_flip_test(diffs.as_ptr(), 1, 10_000, 0, &mut r),
            AaStatus::AA_INSUFFICIENT_TOPICS
        );
        assert!(last_error().contains("at least 2"));
        let long = [0.01; 20];
        assert_eq!(aa_sign_flip_test(long.as_ptr(), 20, 1000, 7, &mut r), AaStatus::AA_OK);
        assert!(!r.exact);
        assert_eq!(r.p_value, 1.0 / 1001.0);
    }
}

#[test]
fn lexicon_handle() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/golden");
    let path = CString::new(dir.join("emotion_lexicon.csv").to_str().unwrap()).unwrap();
    let mut h: *mut AaLexicon = ptr::null_mut();
    unsafe {
        assert_eq!(
            aa_lexicon_load(path.as_ptr(), AaTaxonomy::AA_EMOTION, &mut h),
            AaStatus::AA_OK
        );
        let text = CString::new("So happy, HAPPY today").unwrap();
        let mut out = [0.0; 11];
        assert_eq!(
            aa_lexicon_score(h, text.as_ptr(), out.as_mut_ptr(), 11),
            AaStatus::AA_OK
        );
        assert_eq!(out[4], 2.0 / 3.0);
        assert_eq!(out.iter().filter(|x| **x > 0.0).count(), 1);
        assert_eq!(
            aa_lexicon_score(h, text.as_ptr(), out.as_mut_ptr(), 5),
            AaStatus::AA_BUFFER_TOO_SMALL
        );
        aa_lexicon_free(h);

        let mut bad: *mut AaLexicon = ptr::null_mut();
        assert_eq!(
            aa_lexicon_load(path.as_ptr(), AaTaxonomy::AA_MORAL, &mut bad),
            AaStatus::AA_IO
        );
        assert!(bad.is_null());
        let missing = CString::new("/nonexistent/lexicon.csv").unwrap();
        assert_eq!(
            aa_lexicon_load(missing.as_ptr(), AaTaxonomy::AA_EMOTION, &mut bad),
            AaStatus::AA_IO
        );
    }
}

#[test]
fn error_message_truncates_and_reports_size() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(aa_pea(99, 0, &mut v), AaStatus::AA_INVALID_ARGUMENT);
        let needed = aa_last_error_message(ptr::null_mut(), 0);
        let full = last_error();
        assert_eq!(needed, full.len() + 1);
        let mut small = [1 as std::ffi::c_char; 4];
        assert_eq!(aa_last_error_message(small.as_mut_ptr(), 4), needed);
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_str().unwrap(), &full[..3]);
        assert_eq!(aa_pea(0, 0, &mut v), AaStatus::AA_OK);
        assert_eq!(aa_last_error_message(ptr::null_mut(), 0), 1);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(aa_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
