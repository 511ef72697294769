use std::ffi::CStr;
use std::ptr;

use qdivide::bfi;
use qdivide::dynamics::RateModel;
use qdivide::mixtures::MixtureWeights;
use qdivide_ffi::*;

fn mixture(p: [f64; 3]) -> *mut QdRateModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { qd_model_mixture(p[0], p[1], p[2], &mut m) }, QdStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(qd_last_error_message()) }.to_str().unwrap().to_owned()
}

#[test]
fn model_lifecycle_and_rates() {
    let m = mixture([0.5, 0.5, 0.0]);
    let mut r = [0.0; 3];
    let mut f = [0.0; 3];
    unsafe {
        assert_eq!(qd_model_rates(m, 2.0, r.as_mut_ptr()), QdStatus::Ok);
        assert_eq!(qd_model_decay_factors(m, 2.0, f.as_mut_ptr()), QdStatus::Ok);
        qd_model_free(m);
        qd_model_free(ptr::null_mut());
    }
    assert!((r[2] + 2f64.tanh()).abs() < 1e-12);
    assert!((f[2] - (-4f64).exp()).abs() < 1e-15);
}

#[test]
fn constructors_report_errors() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(qd_model_mixture(0.6, 0.6, 0.0, &mut m), QdStatus::InvalidInput);
        assert!(m.is_null());
        assert!(last_error().contains("invalid input"));
        assert_eq!(qd_model_sinusoid(1.0, -1.0, &mut m), QdStatus::InvalidInput);
        assert_eq!(qd_model_constants(ptr::null(), 1.0, &mut m), QdStatus::NullPointer);
        assert!(last_error().contains("rates"));
        assert_eq!(qd_model_mixture(0.5, 0.5, 0.0, ptr::null_mut()), QdStatus::NullPointer);

        let times = [0.0, 1.0, 2.0];
        let rates = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(qd_model_tabulated(times.as_ptr(), rates.as_ptr(), 3, 1.0, &mut m), QdStatus::Ok);
        let mut r = [0.0; 3];
        assert_eq!(qd_model_rates(m, 3.0, r.as_mut_ptr()), QdStatus::OutOfRange);
        qd_model_free(m);
    }
}

#[test]
fn verdicts_match_library() {
    let enm = mixture([0.5, 0.5, 0.0]);
    let cp = mixture([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    let mut v = QdVerdictResult { label: QdVerdict::Undetermined, margin: 0.0, witness_time: 0.0 };
    unsafe {
        assert_eq!(qd_cp_divisible(enm, ptr::null(), 0, 1e-9, &mut v), QdStatus::Ok);
        assert_eq!(v.label, QdVerdict::PDivisibleOnly);
        assert!(v.witness_time > 0.0);
        assert_eq!(qd_p_divisible(enm, ptr::null(), 0, 1e-9, &mut v), QdStatus::Ok);
        assert_eq!(v.label, QdVerdict::PDivisibleOnly);
        assert_eq!(qd_tensor_p_divisible(enm, enm, ptr::null(), 0, 1e-9, &mut v), QdStatus::Ok);
        assert_eq!(v.label, QdVerdict::NotPDivisible);
        let grid = [0.1, 1.0, 10.0];
        assert_eq!(qd_cp_divisible(cp, grid.as_ptr(), grid.len(), 1e-9, &mut v), QdStatus::Ok);
        assert_eq!(v.label, QdVerdict::CpDivisible);
        assert!(v.witness_time.is_nan());
        assert_eq!(qd_cp_divisible(cp, grid.as_ptr(), grid.len(), 1e-9, ptr::null_mut()), QdStatus::NullPointer);
        qd_model_free(enm);
        qd_model_free(cp);
    }
}

#[test]
fn region_tests() {
    let mut inside = false;
    let mut m = [0.0; 3];
    unsafe {
        assert_eq!(qd_cp_region_test([1.0 / 3.0; 3].as_ptr(), &mut inside, m.as_mut_ptr()), QdStatus::Ok);
        assert!(inside);
        let p = [0.4, 0.4, 0.2];
        assert_eq!(qd_tensor_region_test(p.as_ptr(), [1.0 / 3.0; 3].as_ptr(), f64::INFINITY, &mut inside, m.as_mut_ptr()), QdStatus::Ok);
        assert_eq!(qd_tensor_region_test([1.0 / 3.0; 3].as_ptr(), p.as_ptr(), 1.0, &mut inside, m.as_mut_ptr()), QdStatus::Precondition);
    }
}

#[test]
fn witness_search_matches_library() {
    let m = mixture([0.5, 0.5, 0.0]);
    let mut out = std::mem::MaybeUninit::<QdWitnessResult>::uninit();
    let out = unsafe {
        assert_eq!(qd_witness_search(m, m, 30, 5, out.as_mut_ptr()), QdStatus::Ok);
        qd_model_free(m);
        out.assume_init()
    };
    let model = RateModel::mixture(MixtureWeights::new(0.5, 0.5, 0.0).unwrap());
    let r = bfi::witness_search(&model, &model, 30, 5, None).unwrap();
    assert_eq!(out.found, r.found);
    assert_eq!(out.max_derivative, r.max_derivative);
    assert_eq!(out.mu, r.spec.mu());
    assert_eq!(out.evaluations, r.evaluations);
    assert_eq!(out.rho_re[5], r.spec.rho().get(1, 1).re);
    unsafe {
        assert_eq!(qd_witness_search(ptr::null(), ptr::null(), 30, 5, ptr::null_mut()), QdStatus::NullPointer);
    }
}

#[test]
fn trace_norm_and_version() {
    let re = [0.0, 1.0, 1.0, 0.0];
    let im = [0.0; 4];
    let mut n = 0.0;
    unsafe {
        assert_eq!(qd_trace_norm(2, re.as_ptr(), im.as_ptr(), &mut n), QdStatus::Ok);
        assert!((n - 2.0).abs() < 1e-15);
        assert_eq!(qd_trace_norm(3, re.as_ptr(), im.as_ptr(), &mut n), QdStatus::InvalidInput);
        let bad_im = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(qd_trace_norm(2, re.as_ptr(), bad_im.as_ptr(), &mut n), QdStatus::InvalidInput);
    }
    let v = unsafe { CStr::from_ptr(qd_version()) }.to_str().unwrap();
    assert_eq!(v, qdivide::VERSION);
}
