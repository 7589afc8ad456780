mod common;

use common::{five_regions, fuzz_to_dir, plain_seeds};
use compass_core::sim::fixtures::{magic_regions, magic_seed, MagicRegion};
use compass_core::sim::{execute, FuzzRunConfig, SimSpec};
use compass_core::{
    attribute_corpus, run_pipeline, AnalysisConfig, CompartmentKind, CompartmentReport, Error,
    Status, Workspace,
};

fn three_regions() -> Vec<MagicRegion> {
    vec![
        MagicRegion::new("small", b"SMAL", 120),
        MagicRegion::new("large", b"LARG", 480),
        MagicRegion::new("medium", b"MEDI", 260),
    ]
}

#[test]
fn magic_regions_rank_by_size() {
    let (_d, paths, _) = fuzz_to_dir(
        &magic_regions(&three_regions()),
        &FuzzRunConfig::new(plain_seeds(), 2000, 42),
    );
    let report = run_pipeline(&paths, AnalysisConfig::default()).unwrap();
    let got: Vec<(String, u64, u64, u64)> = report
        .entries
        .iter()
        .map(|c| {
            assert!(matches!(c.kind, CompartmentKind::Frontier { .. }));
            (
                c.id(),
                c.weight.total(),
                c.weight.block_weight(),
                c.weight.calls_weight(),
            )
        })
        .collect();
    assert_eq!(
        got,
        vec![
            ("main:r1".into(), 480, 240, 240),
            ("main:r2".into(), 260, 130, 130),
            ("main:r0".into(), 120, 60, 60),
        ]
    );
    for c in &report.entries {
        assert_eq!(c.labels.to_string(), "I");
        assert!(c.conditional_count > 50);
        assert!(c.input.starts_with("plain_"), "{}", c.input);
        assert_eq!(c.solution, "");
    }
    assert_eq!(report.entries[0].conditional_loc, "main.c:20");
    assert_eq!(report.entries[0].entry_loc, "main.c:21");
}

#[test]
fn labels_are_optional() {
    let (_d, mut paths, _) = fuzz_to_dir(
        &magic_regions(&three_regions()),
        &FuzzRunConfig::new(plain_seeds(), 100, 1),
    );
    paths.labels = None;
    let report = run_pipeline(&paths, AnalysisConfig::default()).unwrap();
    assert_eq!(report.entries.len(), 3);
    assert!(report.entries.iter().all(|c| c.labels.is_empty()));
}

#[test]
fn top_one_is_the_global_maximum() {
    let (_d, paths, _) = fuzz_to_dir(
        &magic_regions(&three_regions()),
        &FuzzRunConfig::new(plain_seeds(), 100, 1),
    );
    let full = run_pipeline(&paths, AnalysisConfig::default()).unwrap();
    let one = run_pipeline(
        &paths,
        AnalysisConfig {
            top_k: 1,
            ..AnalysisConfig::default()
        },
    )
    .unwrap();
    let max = full.entries.iter().map(|c| c.weight.total()).max().unwrap();
    assert_eq!(one.entries.len(), 1);
    assert_eq!(one.entries[0].weight.total(), max);
    assert_eq!(one.entries[0], full.entries[0]);
}

#[test]
fn repeated_runs_export_identical_bytes() {
    let (_d, paths, _) = fuzz_to_dir(
        &magic_regions(&five_regions()),
        &FuzzRunConfig::new(plain_seeds(), 1000, 42),
    );
    let a = run_pipeline(&paths, AnalysisConfig::default()).unwrap().to_json();
    let b = run_pipeline(&paths, AnalysisConfig::default()).unwrap().to_json();
    assert_eq!(a, b);
    let back = CompartmentReport::from_json(&a).unwrap();
    assert_eq!(back.to_json(), a);
    assert_eq!(back.sources.as_ref(), Some(&paths));
}

#[test]
fn errors_name_the_file() {
    let (dir, paths, _) = fuzz_to_dir(
        &magic_regions(&three_regions()),
        &FuzzRunConfig::new(plain_seeds(), 10, 1),
    );
    let text = std::fs::read_to_string(&paths.icfg).unwrap();
    std::fs::write(&paths.icfg, text.replacen("\"chk1\"", "\"nowhere\"", 1)).unwrap();
    let err = run_pipeline(&paths, AnalysisConfig::default()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with(&paths.icfg.display().to_string()), "{msg}");
    assert!(msg.contains("dangling successor main:"), "{msg}");

    let bad_profile = dir.path().join("bad.jsonl");
    std::fs::write(&bad_profile, "{\"fn\":\"main\",\"block\":\"start\",\"count\":1}\n{\"fn\":\"main\"\n").unwrap();
    let mut p2 = paths.clone();
    p2.icfg = dir.path().join("icfg.json.orig");
    std::fs::write(&p2.icfg, text).unwrap();
    p2.profiles = vec![bad_profile.clone()];
    let err = run_pipeline(&p2, AnalysisConfig::default()).unwrap_err();
    assert!(matches!(err.root(), Error::Malformed { line: 2, .. }), "{err}");
    assert!(err.to_string().contains("bad.jsonl"), "{err}");
}

#[test]
fn solutions_then_whatif_empty_the_ranking() {
    let regions = five_regions();
    let doc = magic_regions(&regions);
    let (_d, paths, _) = fuzz_to_dir(&doc, &FuzzRunConfig::new(plain_seeds(), 5000, 42));
    let ws = Workspace::from_paths(&paths, AnalysisConfig::default()).unwrap();
    let report = ws.report().unwrap();
    let ids: Vec<String> = report.entries.iter().map(|c| c.id()).collect();
    assert_eq!(ids, ["main:r0", "main:r1", "main:r2", "main:r3", "main:r4"]);

    let spec = SimSpec::from_doc(&doc).unwrap();
    let solutions: Vec<_> = (0..regions.len())
        .map(|i| {
            let s = magic_seed(&regions, i);
            execute(&spec, &s.bytes, 0, 10_000).coverage(&spec, &s.name)
        })
        .collect();
    let attributed = attribute_corpus(&report, &solutions);
    for (i, c) in attributed.entries.iter().enumerate() {
        assert_eq!(c.solution, format!("solution_{}", regions[i].name));
    }

    let mut current = attributed;
    while let Some(top) = current.entries.first() {
        let id = top.id();
        let next = ws.retire(&current, &[(&id, Status::Resolved)]).unwrap();
        assert_eq!(next.entries.len(), current.entries.len() - 1);
        assert!(next.find(&id).is_some_and(|c| c.status == Status::Resolved));
        current = next;
    }
    assert_eq!(current.retired.len(), 5);
    let err = ws
        .retire(&current, &[("main:r0", Status::Resolved)])
        .unwrap_err();
    assert!(matches!(err, Error::AlreadyRetired(_)));
    let err = ws.retire(&current, &[("main:zz", Status::Resolved)]).unwrap_err();
    assert!(matches!(err, Error::UnknownCompartment(_)));
}

#[test]
fn resolving_the_top_promotes_the_runner_up() {
    let (_d, paths, _) = fuzz_to_dir(
        &magic_regions(&three_regions()),
        &FuzzRunConfig::new(plain_seeds(), 100, 1),
    );
    let ws = Workspace::from_paths(&paths, AnalysisConfig::default()).unwrap();
    let r = ws.report().unwrap();
    let second = r.entries[1].clone();
    let next = ws.retire(&r, &[(&r.entries[0].id(), Status::Resolved)]).unwrap();
    assert_eq!(next.entries[0], second);
    assert_eq!(next.retired[0].id(), r.entries[0].id());
}
