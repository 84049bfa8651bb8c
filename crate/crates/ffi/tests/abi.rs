use std::ffi::{c_char, CStr, CString};
use std::ptr;

use axe_ffi::*;
use serde_json::Value;

const PAGE: &str = "<html><body><nav><a href='/'>Home</a> <a href='/deals'>Deals</a></nav>\
    <div class='product'><h1>Acme Phone</h1><p><b>Price:</b> <span>$199.00</span></p>\
    <p><b>Color:</b> <span>Midnight Blue</span></p></div><footer>Contact us</footer></body></html>";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    axe_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = axe_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

unsafe fn oracle_pipeline(extra: &str) -> *mut AxePipeline {
    let mut p = ptr::null_mut();
    let cfg = c(&format!("client = \"oracle\"\n{extra}"));
    assert_eq!(axe_pipeline_new(cfg.as_ptr(), &mut p), AxeStatus::Ok);
    p
}

#[test]
fn document_parse_text_and_ground() {
    unsafe {
        let mut doc = ptr::null_mut();
        assert_eq!(axe_document_parse(c(PAGE).as_ptr(), &mut doc), AxeStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(axe_document_visible_text(doc, &mut out), AxeStatus::Ok);
        assert_eq!(take(out), "Home DealsAcme PhonePrice: $199.00Color: Midnight BlueContact us");

        assert_eq!(axe_document_ground(doc, c("Midnight Blu").as_ptr(), false, &mut out), AxeStatus::Ok);
        let m: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(m["found"], true);
        assert_eq!(m["text"], "Midnight Blue");
        assert_eq!(m["xpath"], "/html[1]/body[1]/div[1]/p[2]/span[1]");

        assert_eq!(axe_document_ground(doc, c("zzz").as_ptr(), true, &mut out), AxeStatus::Ok);
        let m: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(m["found"], false);
        axe_document_free(doc);
    }
}

#[test]
fn extract_qa_and_prune() {
    unsafe {
        let p = oracle_pipeline("");
        let mut out = ptr::null_mut();
        let schema = c(r#"{"Price": "", "Color": ""}"#);
        assert_eq!(axe_pipeline_extract(p, c(PAGE).as_ptr(), schema.as_ptr(), &mut out), AxeStatus::Ok);
        let v: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["Price"], "$199.00");
        assert_eq!(v["Color"], "Midnight Blue");
        assert_eq!(v["_grounding"]["Price"]["xpath"], "/html[1]/body[1]/div[1]/p[1]/span[1]");

        assert_eq!(axe_pipeline_qa(p, c(PAGE).as_ptr(), c("What is the price?").as_ptr(), &mut out), AxeStatus::Ok);
        let v: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v, serde_json::json!({"answer": "$199.00"}));

        assert_eq!(axe_pipeline_prune(p, c(PAGE).as_ptr(), c("Price").as_ptr(), &mut out), AxeStatus::Ok);
        let v: Value = serde_json::from_str(&take(out)).unwrap();
        assert!(v["tokens_after"].as_u64() < v["tokens_before"].as_u64());
        let html = v["distilled_html"].as_str().unwrap();
        assert!(html.contains("$199.00"));
        assert!(!html.contains("Contact us"));
        axe_pipeline_free(p);
    }
}

#[test]
fn pipeline_handle_is_shareable_across_threads() {
    struct Shared(*mut AxePipeline);
    unsafe impl Send for Shared {}
    unsafe impl Sync for Shared {}
    impl Shared {
        fn get(&self) -> *mut AxePipeline {
            self.0
        }
    }
    let p = Shared(unsafe { oracle_pipeline("no_gxr = true") });
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| unsafe {
                let mut out = ptr::null_mut();
                let schema = c(r#"{"Color": ""}"#);
                assert_eq!(axe_pipeline_extract(p.get(), c(PAGE).as_ptr(), schema.as_ptr(), &mut out), AxeStatus::Ok);
                assert_eq!(take(out), r#"{"Color":"Midnight Blue"}"#);
            });
        }
    });
    unsafe { axe_pipeline_free(p.0) };
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut doc = ptr::null_mut();
        assert_eq!(axe_document_parse(ptr::null(), &mut doc), AxeStatus::NullPointer);
        assert!(doc.is_null());
        assert_eq!(last_error(), "html is null");

        assert_eq!(axe_document_parse(c("   ").as_ptr(), &mut doc), AxeStatus::Parse);
        assert!(doc.is_null());

        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(axe_document_parse(bad.as_ptr().cast(), &mut doc), AxeStatus::InvalidUtf8);

        let mut p = ptr::null_mut();
        assert_eq!(axe_pipeline_new(c("chunk_budget = 10").as_ptr(), &mut p), AxeStatus::Config);
        assert!(p.is_null());
        assert!(last_error().contains("64"));
        assert_eq!(axe_pipeline_new(c("nonsense = 1").as_ptr(), &mut p), AxeStatus::Config);

        let p = oracle_pipeline("");
        let mut out = ptr::null_mut();
        let nested = c(r#"{"a": {"b": ""}}"#);
        assert_eq!(axe_pipeline_extract(p, c(PAGE).as_ptr(), nested.as_ptr(), &mut out), AxeStatus::InvalidArgument);
        assert!(out.is_null());
        assert!(last_error().contains("schema"));
        assert_eq!(axe_pipeline_qa(p, c(PAGE).as_ptr(), c(" ").as_ptr(), &mut out), AxeStatus::InvalidArgument);
        assert_eq!(axe_pipeline_qa(ptr::null(), c(PAGE).as_ptr(), c("q").as_ptr(), &mut out), AxeStatus::NullPointer);
        axe_pipeline_free(p);
    }
}

#[test]
fn scripted_client_without_fixture_response_is_a_client_error() {
    unsafe {
        let dir = std::env::temp_dir().join(format!("axe-ffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let fixture = dir.join("empty.jsonl");
        std::fs::write(&fixture, "").unwrap();
        let cfg = c(&format!("client = \"scripted\"\nfixture = {:?}\n", fixture.to_str().unwrap()));
        let mut p = ptr::null_mut();
        assert_eq!(axe_pipeline_new(cfg.as_ptr(), &mut p), AxeStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(axe_pipeline_qa(p, c(PAGE).as_ptr(), c("q").as_ptr(), &mut out), AxeStatus::Client);
        axe_pipeline_free(p);
        std::fs::remove_dir_all(dir).unwrap();
    }
}

#[test]
fn numeric_helpers() {
    unsafe {
        let mut r = 0.0;
        assert_eq!(axe_gestalt_ratio(c("abcd").as_ptr(), c("bcde").as_ptr(), &mut r), AxeStatus::Ok);
        assert_eq!(r, 0.75);
        let mut f = 0.0;
        assert_eq!(axe_token_f1(c("Apple iPhone 16").as_ptr(), c("iPhone 16 Pro").as_ptr(), &mut f), AxeStatus::Ok);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(axe_token_f1(ptr::null(), ptr::null(), &mut f), AxeStatus::Ok);
        assert_eq!(f, 1.0);
        assert_eq!(axe_gestalt_ratio(c("a").as_ptr(), c("b").as_ptr(), ptr::null_mut()), AxeStatus::NullPointer);
        assert_eq!(
            CStr::from_ptr(axe_version()).to_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
        axe_string_free(ptr::null_mut());
    }
}
