use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ghost_core::corpus::Utterance;
use ghost_core::pipeline::{cmd_build, cmd_train_ngram, BuildConfig, NGramConfig};
use ghost_ffi::*;

fn corpus() -> Vec<Utterance> {
    let mut v = Vec::new();
    for i in 0..20 {
        v.push(Utterance::new(format!("a{i}"), "how are you", vec![]));
        v.push(Utterance::new(format!("b{i}"), "how is work", vec![]));
    }
    v
}

fn build_indices(dir: &Path, with_ngram: bool) -> PathBuf {
    let utts = corpus();
    cmd_build(
        &utts,
        dir,
        &BuildConfig {
            max_len: 500,
            min_suffix_freq: 2,
        },
    )
    .unwrap();
    if with_ngram {
        let cfg = NGramConfig {
            order: 3,
            vocab_size: 30,
            prune: vec![0, 0, 0],
        };
        cmd_train_ngram(&utts, dir, &cfg).unwrap();
    }
    dir.to_path_buf()
}

fn open(dir: &Path) -> *mut GhostEngine {
    let p = CString::new(dir.to_str().unwrap()).unwrap();
    let paths = [p.as_ptr()];
    let mut engine = ptr::null_mut();
    let st = unsafe { ghost_engine_open(paths.as_ptr(), 1, &mut engine) };
    assert_eq!(st, GhostStatus::Ok);
    assert!(!engine.is_null());
    engine
}

fn request(prefix: &CStr, model: GhostModel) -> GhostRequest {
    GhostRequest {
        prefix: prefix.as_ptr(),
        context: ptr::null(),
        context_len: 0,
        model,
        rerank: false,
        stop: GhostStop::None,
        stop_value: 0.0,
        has_min_confidence: false,
        min_confidence: 0.0,
    }
}

fn suggest(engine: *const GhostEngine, req: &GhostRequest) -> (GhostStatus, Option<(String, f64, bool, String)>) {
    let mut out = GhostSuggestion {
        text: ptr::null_mut(),
        score: 0.0,
        shown: false,
        source: ptr::null(),
        abstain_reason: ptr::null_mut(),
    };
    let st = unsafe { ghost_suggest(engine, req, &mut out) };
    if st != GhostStatus::Ok {
        assert!(out.text.is_null());
        return (st, None);
    }
    let r = unsafe {
        (
            CStr::from_ptr(out.text).to_str().unwrap().to_string(),
            out.score,
            out.shown,
            CStr::from_ptr(out.source).to_str().unwrap().to_string(),
        )
    };
    unsafe {
        ghost_suggestion_clear(&mut out);
        ghost_suggestion_clear(&mut out);
    }
    assert!(out.text.is_null());
    (st, Some(r))
}

fn last_error() -> String {
    let p = ghost_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn suggestions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    build_indices(dir.path(), true);
    let engine = open(dir.path());
    let lib = ghost_core::Engine::load(&[dir.path().to_path_buf()]).unwrap();

    for model in [GhostModel::Mpc, GhostModel::Mpcpp, GhostModel::Qb] {
        assert!(unsafe { ghost_engine_has_model(engine, model) });
        for prefix in ["how a", "how i", "h", "w"] {
            let c = CString::new(prefix).unwrap();
            let (st, got) = suggest(engine, &request(&c, model));
            assert_eq!(st, GhostStatus::Ok);
            let (text, score, shown, source) = got.unwrap();
            let want = lib
                .suggest(&ghost_core::SuggestRequest::new(prefix, model.into()))
                .unwrap();
            assert_eq!(text, want.text);
            assert_eq!(shown, want.is_shown());
            assert_eq!(source, want.source.to_string());
            assert!(score == want.score || (score.is_infinite() && want.score.is_infinite()));
        }
    }
    let c = CString::new("how ar").unwrap();
    assert_eq!(suggest(engine, &request(&c, GhostModel::Mpc)).1.unwrap().0, "e you");

    let fp = unsafe { CStr::from_ptr(ghost_engine_fingerprint(engine)) };
    assert_eq!(fp.to_str().unwrap(), lib.fingerprint().unwrap());
    unsafe { ghost_engine_free(engine) };
}

#[test]
fn policies_and_gating() {
    let dir = tempfile::tempdir().unwrap();
    build_indices(dir.path(), true);
    let engine = open(dir.path());
    let c = CString::new("how").unwrap();

    let mut req = request(&c, GhostModel::Qb);
    req.stop = GhostStop::MaxWords;
    req.stop_value = 1.0;
    let (_, got) = suggest(engine, &req);
    assert_eq!(got.unwrap().0, " are");

    req.stop_value = 1.5;
    assert_eq!(suggest(engine, &req).0, GhostStatus::InvalidArgument);
    req.stop = GhostStop::Entropy;
    req.stop_value = -1.0;
    assert_eq!(suggest(engine, &req).0, GhostStatus::InvalidArgument);

    let mut req = request(&c, GhostModel::Mpc);
    req.has_min_confidence = true;
    req.min_confidence = 2.0;
    let (st, got) = suggest(engine, &req);
    assert_eq!(st, GhostStatus::Ok);
    let (text, score, shown, _) = got.unwrap();
    assert_eq!((text.as_str(), shown), ("", false));
    assert_eq!(score, f64::NEG_INFINITY);

    let ctx = [CString::new("is work ok").unwrap()];
    let ctx_ptrs: Vec<_> = ctx.iter().map(|s| s.as_ptr()).collect();
    let mut req = request(&c, GhostModel::Mpc);
    req.rerank = true;
    req.context = ctx_ptrs.as_ptr();
    req.context_len = 1;
    assert!(unsafe { ghost_engine_can_rerank(engine) });
    assert_eq!(suggest(engine, &req).1.unwrap().3, "RERANKED");
    unsafe { ghost_engine_free(engine) };
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    build_indices(dir.path(), false);
    let engine = open(dir.path());
    let c = CString::new("how").unwrap();

    let (st, _) = suggest(engine, &request(&c, GhostModel::Qb));
    assert_eq!(st, GhostStatus::ModelNotLoaded);
    assert!(last_error().contains("qb"));

    let (st, _) = suggest(engine, &request(&c, GhostModel::Mpc));
    assert_eq!(st, GhostStatus::Ok);
    assert!(ghost_last_error().is_null());

    let mut req = request(&c, GhostModel::Mpc);
    req.prefix = ptr::null();
    assert_eq!(suggest(engine, &req).0, GhostStatus::NullPointer);

    let bad = [0x66u8, 0xff, 0];
    req.prefix = bad.as_ptr().cast();
    assert_eq!(suggest(engine, &req).0, GhostStatus::InvalidUtf8);

    let req = request(&c, GhostModel::Mpc);
    assert_eq!(suggest(ptr::null(), &req).0, GhostStatus::NullPointer);
    unsafe { ghost_engine_free(engine) };
    unsafe { ghost_engine_free(ptr::null_mut()) };

    let missing = CString::new(dir.path().join("nope.ghst").to_str().unwrap()).unwrap();
    let paths = [missing.as_ptr()];
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { ghost_engine_open(paths.as_ptr(), 1, &mut out) },
        GhostStatus::Io
    );
    assert!(out.is_null());

    let junk = dir.path().join("junk.ghst");
    std::fs::write(&junk, b"not an index").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    let paths = [junk.as_ptr()];
    assert_eq!(
        unsafe { ghost_engine_open(paths.as_ptr(), 1, &mut out) },
        GhostStatus::Format
    );
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ghost_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C client against the generated header and the static library.
/// Skipped when no C compiler is on PATH.
#[test]
fn c_client_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let lib = [
        deps.join("libghost_ffi.a"),
        deps.parent().unwrap().join("libghost_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists());
    let (Some(lib), Ok(_)) = (lib, Command::new("cc").arg("--version").output()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());

    let idx = build_indices(&dir.path().join("idx"), false);
    let out = Command::new(&bin).arg(&idx).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = stdout.lines().collect();
    assert_eq!(lines, ["e you|MPC|1", "|0|1", "6|err"]);
}
