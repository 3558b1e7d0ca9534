use std::ffi::{CStr, CString};
use std::ptr;

use mdt_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = mdt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const TRANSCRIPT: &str = r#"{"speaker":"A","text":"shall we start"}
{"speaker":"B","text":"yes"}
{"speaker":"A","text":"we decided to ship friday"}
"#;

#[test]
fn meeting_handle_and_windows() {
    let mut m = ptr::null_mut();
    let st = unsafe { mdt_meeting_parse_jsonl(c(TRANSCRIPT).as_ptr(), c("m1").as_ptr(), &mut m) };
    assert_eq!(st, MdtStatus::Ok);
    assert_eq!(unsafe { mdt_meeting_len(m) }, 3);

    let mut idx = [0i64; 4];
    assert_eq!(unsafe { mdt_meeting_window(m, 0, 4, idx.as_mut_ptr()) }, MdtStatus::Ok);
    assert_eq!(idx, [-1, -1, 0, 1]);
    assert_eq!(unsafe { mdt_meeting_window(m, 2, 4, idx.as_mut_ptr()) }, MdtStatus::Ok);
    assert_eq!(idx, [0, 1, 2, -1]);
    assert_eq!(unsafe { mdt_meeting_window(m, 3, 4, idx.as_mut_ptr()) }, MdtStatus::OutOfRange);
    assert_eq!(unsafe { mdt_meeting_window(m, 0, 1, idx.as_mut_ptr()) }, MdtStatus::ConfigError);
    unsafe { mdt_meeting_free(m) };
    unsafe { mdt_meeting_free(ptr::null_mut()) };
}

#[test]
fn parse_errors_carry_line_numbers() {
    let mut m = ptr::null_mut();
    let bad = "{\"speaker\":\"A\",\"text\":\"ok\"}\nnot json\n";
    let st = unsafe { mdt_meeting_parse_jsonl(c(bad).as_ptr(), c("m").as_ptr(), &mut m) };
    assert_eq!(st, MdtStatus::ParseError);
    assert!(m.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());

    let st = unsafe { mdt_meeting_parse_jsonl(c("").as_ptr(), c("m").as_ptr(), &mut m) };
    assert_eq!(st, MdtStatus::EmptyTranscript);
    let st = unsafe { mdt_meeting_parse_jsonl(ptr::null(), c("m").as_ptr(), &mut m) };
    assert_eq!(st, MdtStatus::NullPointer);
}

#[test]
fn metrics() {
    let mut score = -1.0;
    let st = unsafe {
        mdt_rouge_n(c("a b c").as_ptr(), c("a b d").as_ptr(), 1, MdtTokenizer::Whitespace, &mut score)
    };
    assert_eq!(st, MdtStatus::Ok);
    assert!((score - 2.0 / 3.0).abs() < 1e-12);

    let st = unsafe { mdt_bleu(c("a b c d").as_ptr(), c("a b c d").as_ptr(), MdtTokenizer::Whitespace, &mut score) };
    assert_eq!(st, MdtStatus::Ok);
    assert!((score - 1.0).abs() < 1e-12);

    let st = unsafe { mdt_rouge_n(c("a").as_ptr(), c("").as_ptr(), 1, MdtTokenizer::Whitespace, &mut score) };
    assert_eq!(st, MdtStatus::ContractViolation);

    let mut skipped = false;
    let st = unsafe {
        mdt_restoration_f(
            c("we ship at osaka").as_ptr(),
            c("we ship at osaka").as_ptr(),
            c("we ship there").as_ptr(),
            1,
            MdtTokenizer::Whitespace,
            &mut score,
            &mut skipped,
        )
    };
    assert_eq!(st, MdtStatus::Ok);
    assert!(!skipped);
    assert!((score - 1.0).abs() < 1e-12);

    let st = unsafe {
        mdt_restoration_f(
            c("x").as_ptr(),
            c("same").as_ptr(),
            c("same").as_ptr(),
            1,
            MdtTokenizer::Whitespace,
            &mut score,
            &mut skipped,
        )
    };
    assert_eq!(st, MdtStatus::Ok);
    assert!(skipped);

    let st = unsafe {
        mdt_rouge_n(c("札幌の拠点").as_ptr(), c("札幌で").as_ptr(), 1, MdtTokenizer::ScriptRun, &mut score)
    };
    assert_eq!(st, MdtStatus::Ok);
    assert!((score - 0.4).abs() < 1e-12);
}

#[test]
fn kappa() {
    let a = [1u8, 0, 0, 1];
    let mut k = 0.0;
    assert_eq!(unsafe { mdt_cohen_kappa(a.as_ptr(), a.as_ptr(), 4, &mut k) }, MdtStatus::Ok);
    assert!((k - 1.0).abs() < 1e-12);
    let b = [0u8, 1, 1, 0];
    assert_eq!(unsafe { mdt_cohen_kappa(a.as_ptr(), b.as_ptr(), 4, &mut k) }, MdtStatus::Ok);
    assert!((k + 1.0).abs() < 1e-12);
    assert_eq!(unsafe { mdt_cohen_kappa(ptr::null(), b.as_ptr(), 4, &mut k) }, MdtStatus::NullPointer);
}

#[test]
fn score_sheet() {
    let csv = "sample_id,evaluator_id,criterion,score\n\
               s1,e1,effectiveness,5\n\
               s1,e2,effectiveness,2\n\
               s2,e1,effectiveness,4\n\
               s1,e1,text_flow,3\n";
    let mut sheet = ptr::null_mut();
    assert_eq!(unsafe { mdt_score_sheet_parse_csv(c(csv).as_ptr(), &mut sheet) }, MdtStatus::Ok);
    let mut s = MdtCriterionSummary::default();
    assert_eq!(
        unsafe { mdt_score_sheet_summary(sheet, MdtCriterion::Effectiveness, &mut s) },
        MdtStatus::Ok
    );
    assert_eq!(s.count, 3);
    assert_eq!(s.histogram, [0, 1, 0, 1, 1]);
    assert!((s.mean - 11.0 / 3.0).abs() < 1e-12);
    assert!((s.share_at_least_4 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        unsafe { mdt_score_sheet_summary(sheet, MdtCriterion::Understandability, &mut s) },
        MdtStatus::OutOfRange
    );
    unsafe { mdt_score_sheet_free(sheet) };

    let bad = "sample_id,evaluator_id,criterion,score\ns1,e1,text_flow,4\n";
    assert_eq!(
        unsafe { mdt_score_sheet_parse_csv(c(bad).as_ptr(), &mut sheet) },
        MdtStatus::ValidationError
    );
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(mdt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mdt.h")).unwrap();
    for sym in [
        "mdt_meeting_parse_jsonl",
        "mdt_meeting_window",
        "mdt_restoration_f",
        "mdt_score_sheet_summary",
        "MDT_STATUS_OK",
    ] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"mdt.h\"\n\
         int main(void) {\n\
           MdtMeeting *m = 0;\n\
           MdtStatus st = mdt_meeting_parse_jsonl(\"{}\", \"m\", &m);\n\
           MdtCriterionSummary s;\n\
           (void)s; mdt_meeting_free(m);\n\
           return st == MDT_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = match std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(status.success());
}
