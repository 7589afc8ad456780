//! Ready-made sim specs: magic-gated regions and an indirect dispatch table.

use std::collections::BTreeMap;

use super::spec::{GuardDoc, SimBlockDoc, SimCallDoc, SimFunctionDoc, SimSpecDoc};
use super::Seed;

/// One region behind a 4-byte magic guard.
#[derive(Debug, Clone)]
pub struct MagicRegion {
    pub name: String,
    pub magic: [u8; 4],
    /// Instructions exposed by unlocking the region; at least 4.
    pub weight: u64,
}

impl MagicRegion {
    pub fn new(name: &str, magic: &[u8; 4], weight: u64) -> Self {
        MagicRegion {
            name: name.into(),
            magic: *magic,
            weight,
        }
    }
}

fn block(id: &str, size: u64, succs: &[&str], loc: &str) -> SimBlockDoc {
    SimBlockDoc {
        id: id.into(),
        size,
        succs: succs.iter().map(|s| s.to_string()).collect(),
        loc: loc.into(),
        calls: Vec::new(),
        guard: None,
    }
}

fn function(name: &str, entry: &str, blocks: Vec<SimBlockDoc>) -> SimFunctionDoc {
    SimFunctionDoc {
        name: name.into(),
        size: blocks.iter().map(|b| b.size).sum(),
        entry: entry.into(),
        blocks,
    }
}

/// `main` checks region `i`'s magic at input offset `4 * i`, one after
/// another. Each guard's taken branch enters a two-block region in `main`
/// that calls a helper only it calls; the region's blocks and helper together
/// hold exactly `weight` instructions.
///
/// Region `i` is entered at block `r{i}` of `main`, so its compartment id is
/// `main:r{i}`.
pub fn magic_regions(regions: &[MagicRegion]) -> SimSpecDoc {
    let mut main = vec![block("start", 2, &["chk0"], "main.c:1")];
    let mut helpers = Vec::new();
    for (i, r) in regions.iter().enumerate() {
        assert!(r.weight >= 4, "region weight too small");
        let next = if i + 1 == regions.len() {
            "done".to_string()
        } else {
            format!("chk{}", i + 1)
        };
        let entry = format!("r{i}");
        let tail = format!("r{i}_tail");
        let line = 10 * (i + 1);

        let mut chk = block(&format!("chk{i}"), 3, &[&entry, &next], &format!("main.c:{line}"));
        chk.guard = Some(GuardDoc::Bytes {
            offset: 4 * i,
            value: hex::encode(r.magic),
        });
        main.push(chk);

        let helper_size = r.weight / 2;
        let head_size = (r.weight - helper_size) / 2;
        let tail_size = r.weight - helper_size - head_size;
        let mut head = block(&entry, head_size, &[&tail], &format!("main.c:{}", line + 1));
        head.calls.push(SimCallDoc::Direct {
            target: r.name.clone(),
        });
        main.push(head);
        main.push(block(&tail, tail_size, &[&next], &format!("main.c:{}", line + 2)));
        helpers.push(function(
            &r.name,
            "e",
            vec![block("e", helper_size, &[], &format!("{}.c:1", r.name))],
        ));
    }
    main.push(block("done", 1, &[], "main.c:99"));

    let mut functions = vec![function("main", "start", main)];
    functions.extend(helpers);
    SimSpecDoc {
        entry: Some("main".into()),
        max_input_len: Some(64),
        flag_bits: Some(8),
        functions,
    }
}

/// A seed that passes exactly region `index`'s guard.
pub fn magic_seed(regions: &[MagicRegion], index: usize) -> Seed {
    let mut bytes = vec![b'.'; 4 * regions.len()];
    bytes[4 * index..4 * index + 4].copy_from_slice(&regions[index].magic);
    Seed::new(format!("solution_{}", regions[index].name), bytes)
}

/// `main` dispatches on input byte 0 through indirect site `dispatch` to one
/// projection function per `(key, name, size)`. Nothing calls a projection
/// directly.
pub fn projection_dispatch(projections: &[(char, &str, u64)]) -> SimSpecDoc {
    let mut start = block("start", 4, &["done"], "proj.c:10");
    start.calls.push(SimCallDoc::Indirect {
        site: "dispatch".into(),
        byte: 0,
        table: projections
            .iter()
            .map(|(k, name, _)| (k.to_string(), name.to_string()))
            .collect::<BTreeMap<_, _>>(),
        default: None,
    });
    let mut functions = vec![function(
        "main",
        "start",
        vec![start, block("done", 1, &[], "proj.c:11")],
    )];
    for (_, name, size) in projections {
        assert!(*size >= 2, "projection size too small");
        functions.push(function(
            name,
            "setup",
            vec![
                block("setup", size / 2, &["fwd"], &format!("PJ_{name}.c:1")),
                block("fwd", size - size / 2, &[], &format!("PJ_{name}.c:2")),
            ],
        ));
    }
    SimSpecDoc {
        entry: Some("main".into()),
        max_input_len: Some(16),
        flag_bits: Some(8),
        functions,
    }
}
