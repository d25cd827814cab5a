use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use opguide_ffi::*;

const FIXTURE_CSV: &str = "video_id,verb,noun,start_s,end_s\n\
v1,a,x,0,1\nv1,b,x,1,2\nv1,c,x,2,3\nv1,a,x,3,4\nv1,b,x,4,5\n\
v1,d,x,5,6\nv1,a,x,6,7\nv1,b,x,7,8\nv1,c,x,8,9\n";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn fixture() -> *mut OpgGraph {
    let mut graph = ptr::null_mut();
    let status = unsafe {
        opg_graph_from_annotations(c(FIXTURE_CSV).as_ptr(), c("verb").as_ptr(), &mut graph)
    };
    assert_eq!(status, OpgStatus::Ok);
    graph
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(opg_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn graph_lifecycle_and_queries() {
    let graph = fixture();
    unsafe {
        let mut total = 0;
        assert_eq!(
            opg_graph_total_transitions(graph, &mut total),
            OpgStatus::Ok
        );
        assert_eq!(total, 8);

        let mut h = 0.0;
        assert_eq!(
            opg_graph_row_entropy(graph, c("b").as_ptr(), &mut h),
            OpgStatus::Ok
        );
        assert!((h - 0.636514).abs() < 1e-6);

        let mut json = ptr::null_mut();
        assert_eq!(opg_graph_to_json(graph, &mut json), OpgStatus::Ok);
        let mut copy = ptr::null_mut();
        assert_eq!(opg_graph_from_json(json, &mut copy), OpgStatus::Ok);
        let mut copy_json = ptr::null_mut();
        assert_eq!(opg_graph_to_json(copy, &mut copy_json), OpgStatus::Ok);
        assert_eq!(CStr::from_ptr(json), CStr::from_ptr(copy_json));
        opg_string_free(json);
        opg_string_free(copy_json);
        opg_graph_free(copy);
        opg_graph_free(graph);
    }
}

#[test]
fn assessment_matches_fixture() {
    let graph = fixture();
    let mut out = OpgAssessment::default();
    unsafe {
        let status = opg_assess_transition(
            graph,
            c("b").as_ptr(),
            c("d").as_ptr(),
            true,
            false,
            &mut out,
        );
        assert_eq!(status, OpgStatus::Ok);
        assert_eq!(out.rank, 2);
        assert!((out.score - 0.212336).abs() < 1e-5);

        opg_assess_transition(
            graph,
            c("b").as_ptr(),
            c("q").as_ptr(),
            true,
            false,
            &mut out,
        );
        assert_eq!((out.rank, out.score), (0, 1.0));

        opg_assess_transition(
            graph,
            c("zz").as_ptr(),
            c("a").as_ptr(),
            true,
            false,
            &mut out,
        );
        assert!(out.unknown_state);
        opg_graph_free(graph);
    }
}

#[test]
fn guidance_outcomes() {
    let graph = fixture();
    let labels: Vec<CString> = ["d", "c"].iter().map(|s| c(s)).collect();
    let ptrs: Vec<_> = labels.iter().map(|s| s.as_ptr()).collect();
    let mut out = OpgGuidance {
        kind: OpgGuidanceKind::Repeat,
        graph_rank: 0,
        model_rank: 0,
        rank_sum: 0,
    };
    unsafe {
        let status = opg_recommend_next(
            graph,
            c("b").as_ptr(),
            ptrs.as_ptr(),
            2,
            ptr::null(),
            0,
            &mut out,
            ptr::null_mut(),
        );
        assert_eq!(status, OpgStatus::Ok);
        // c: graph 1 + model 2, d: graph 2 + model 1, tie goes to graph rank
        assert_eq!(out.kind, OpgGuidanceKind::Recommend);
        assert_eq!((out.graph_rank, out.model_rank, out.rank_sum), (1, 2, 3));

        let dict = [c("a")];
        let dict_ptrs: Vec<_> = dict.iter().map(|s| s.as_ptr()).collect();
        let mut json = ptr::null_mut();
        let status = opg_recommend_next(
            graph,
            c("b").as_ptr(),
            ptrs.as_ptr(),
            2,
            dict_ptrs.as_ptr(),
            1,
            &mut out,
            &mut json,
        );
        assert_eq!(status, OpgStatus::Ok);
        assert_eq!(out.kind, OpgGuidanceKind::Repeat);
        assert_eq!(
            CStr::from_ptr(json).to_str().unwrap(),
            r#"{"kind":"repeat","suggestions":[]}"#
        );
        opg_string_free(json);

        let status = opg_recommend_next(
            graph,
            c("zz").as_ptr(),
            ptrs.as_ptr(),
            2,
            ptr::null(),
            0,
            &mut out,
            ptr::null_mut(),
        );
        assert_eq!(status, OpgStatus::UnknownState);
        assert!(last_error().contains("zz"));
        opg_graph_free(graph);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut graph = ptr::null_mut();
        assert_eq!(
            opg_graph_from_json(c("{\"edges\":").as_ptr(), &mut graph),
            OpgStatus::MalformedInput
        );
        assert!(last_error().contains("line"));
        assert!(graph.is_null());
        assert_eq!(
            opg_graph_from_json(ptr::null(), &mut graph),
            OpgStatus::NullPointer
        );
        let bad_csv = "video_id,verb,noun,start_s,end_s\nv,a,x,1,1\n";
        assert_eq!(
            opg_graph_from_annotations(c(bad_csv).as_ptr(), c("verb").as_ptr(), &mut graph),
            OpgStatus::MalformedInput
        );
        let lonely = "video_id,verb,noun,start_s,end_s\nv,a,x,0,1\n";
        assert_eq!(
            opg_graph_from_annotations(c(lonely).as_ptr(), c("verb").as_ptr(), &mut graph),
            OpgStatus::EmptyGraph
        );
        assert_eq!(
            opg_graph_from_annotations(c(lonely).as_ptr(), c("phrase").as_ptr(), &mut graph),
            OpgStatus::InvalidArgument
        );
        let mut twsa = 0.0;
        assert_eq!(opg_step_twsa(1.0, 2.0, true, &mut twsa), OpgStatus::Ok);
        assert_eq!(twsa, 0.5);
        assert!(last_error().is_empty());
        assert_eq!(
            opg_step_twsa(1.0, -2.0, true, &mut twsa),
            OpgStatus::NonPositiveDuration
        );
        assert_eq!(
            opg_step_twsa(1.0, 2.0, true, ptr::null_mut()),
            OpgStatus::NullPointer
        );
        opg_graph_free(ptr::null_mut());
        opg_string_free(ptr::null_mut());
    }
}

/// Compiles the C smoke test against the generated header and static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = deps.parent().unwrap().join("libopguide_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("opguide_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke test failed to compile");
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
