use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use avgproc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(avg_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn graph_handles() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(avg_graph_hypercube(5, &mut g), AvgStatus::Ok);
        let (mut n, mut e) = (0usize, 0usize);
        assert_eq!(avg_graph_size(g, &mut n, &mut e), AvgStatus::Ok);
        assert_eq!((n, e), (32, 80));
        avg_graph_free(g);

        assert_eq!(avg_graph_complete_bipartite(3, 2, &mut g), AvgStatus::InvalidParameter);
        assert!(last_error().contains("m <= k"));
        assert_eq!(avg_graph_complete(1, &mut g), AvgStatus::InvalidParameter);
        assert_eq!(avg_graph_complete(4, ptr::null_mut()), AvgStatus::NullPointer);
        assert_eq!(avg_graph_size(ptr::null(), &mut n, &mut e), AvgStatus::NullPointer);
        avg_graph_free(ptr::null_mut());
    }
}

#[test]
fn simulation_is_reproducible_and_matches_exact() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(avg_graph_complete_bipartite(2, 5, &mut g), AvgStatus::Ok);
        let (mut m1, mut s1, mut m2, mut s2) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(avg_mean_lp(g, 2, 0.8, 2, 4000, 17, &mut m1, &mut s1), AvgStatus::Ok);
        assert_eq!(avg_mean_lp(g, 2, 0.8, 2, 4000, 17, &mut m2, &mut s2), AvgStatus::Ok);
        assert_eq!((m1, s1), (m2, s2));
        let mut exact = 0.0;
        assert_eq!(avg_bipartite_exact_l2(2, 7, AvgSide::C2, 0.8, &mut exact), AvgStatus::Ok);
        assert!((m1 - exact).abs() <= 4.0 * s1);
        assert_eq!(avg_mean_lp(g, 2, 0.8, 3, 10, 1, &mut m1, &mut s1), AvgStatus::InvalidParameter);
        assert_eq!(avg_mean_lp(g, 99, 0.8, 2, 10, 1, &mut m1, &mut s1), AvgStatus::InvalidParameter);
        avg_graph_free(g);
    }
}

#[test]
fn exact_quantities() {
    unsafe {
        let (mut t, mut exact, mut predicted) = (0.0, 0.0, 0.0);
        assert_eq!(avg_bipartite_profile(500, 1000, 0.0, &mut t, &mut exact, &mut predicted), AvgStatus::Ok);
        assert!(t > 0.0 && (exact / predicted - 1.0).abs() < 0.02);
        let mut rho = 0.0;
        assert_eq!(avg_bipartite_rho1(500, 1000, &mut rho), AvgStatus::Ok);
        assert!((rho - 250.0).abs() < 10.0);
        let (mut v, mut l) = (0.0, 0.0);
        assert_eq!(avg_hypercube_exact_l2(6, 0.0, &mut v, &mut l), AvgStatus::Ok);
        assert!((v - 63.0).abs() < 1e-9 && (l - 64f64.ln()).abs() < 1e-12);
        assert_eq!(avg_hypercube_exact_l2(2000, 0.0, &mut v, &mut l), AvgStatus::Ok);
        assert!(v.is_infinite() && l.is_finite());
        let mut c = 0.0;
        assert_eq!(avg_hardy_constant(2, 1, &mut c), AvgStatus::Ok);
        assert!((c - 0.5).abs() < 1e-15);
        assert_eq!(avg_hardy_constant(10, 6, &mut c), AvgStatus::InvalidParameter);
        assert_eq!(avg_hardy_constant(10, 1, ptr::null_mut()), AvgStatus::NullPointer);
        assert!(last_error().contains("null"));
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(avg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/avgproc.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["avg_graph_hypercube", "avg_mean_lp", "avg_last_error_message", "AVG_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = std::env::temp_dir().join(format!("avgproc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include <stdio.h>\n#include \"avgproc.h\"\nint main(void) {\n  AvgGraph *g = NULL;\n  double m, s;\n  \
         if (avg_graph_hypercube(4, &g) != AVG_STATUS_OK) return 1;\n  avg_mean_lp(g, 0, 1.0, 2, 10, 1, &m, &s);\n  \
         avg_graph_free(g);\n  puts(avg_version());\n  return 0;\n}\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I", include])
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => panic!("{compiler} not runnable: {e}"),
        }
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
