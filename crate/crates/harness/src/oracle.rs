//! Brute-force leak oracle.
//!
//! Enumerates every entry-to-exit path of a method CFG in which each DFS back
//! edge is taken at most once, and decides per source whether some path
//! suffix starting at the source node reaches exit without passing a
//! discharging node or edge. It shares only the sink classification with the
//! checker, not the reachability search.

use std::collections::BTreeSet;

use mustcall_core::cfg::{Cfg, EdgeKind, NodeId};
use mustcall_core::frontend::Span;
use mustcall_core::leakcheck::{Blockers, MethodAnalysis, SourceKind, SourceObligation};
use thiserror::Error;

/// Maximum number of paths enumerated per method.
pub const PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("more than {cap} paths in `{method}`")]
    PathExplosion { method: String, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    /// Index into [`MethodAnalysis::sources`].
    pub source: usize,
    pub kind: SourceKind,
    pub span: Span,
    pub leaking: bool,
    /// Leaking suffix, from the source node to exit.
    pub witness: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub paths: usize,
    pub verdicts: Vec<OracleVerdict>,
}

/// Edges that close a cycle in a depth-first search from entry.
pub fn back_edges(cfg: &Cfg) -> BTreeSet<(NodeId, NodeId, EdgeKind)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color = vec![Color::White; cfg.len()];
    let mut out = BTreeSet::new();
    let mut stack = vec![(cfg.entry, 0usize)];
    color[cfg.entry.0] = Color::Gray;
    while let Some(&mut (n, ref mut i)) = stack.last_mut() {
        let edges = cfg.out_edges(n);
        if *i == edges.len() {
            color[n.0] = Color::Black;
            stack.pop();
            continue;
        }
        let (m, k) = edges[*i];
        *i += 1;
        match color[m.0] {
            Color::White => {
                color[m.0] = Color::Gray;
                stack.push((m, 0));
            }
            Color::Gray => {
                out.insert((n, m, k));
            }
            Color::Black => {}
        }
    }
    out
}

/// Calls `visit(nodes, kinds)` for every bounded entry-to-exit path, where
/// `kinds[i]` labels the edge from `nodes[i]` to `nodes[i + 1]`. Stops with
/// `false` once more than `cap` paths were seen.
pub fn for_each_path(cfg: &Cfg, cap: usize, mut visit: impl FnMut(&[NodeId], &[EdgeKind])) -> bool {
    let back = back_edges(cfg);
    let mut used = BTreeSet::new();
    let mut nodes = vec![cfg.entry];
    let mut kinds = Vec::new();
    let mut count = 0;
    walk(cfg, &back, &mut used, &mut nodes, &mut kinds, &mut count, cap, &mut visit)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    cfg: &Cfg,
    back: &BTreeSet<(NodeId, NodeId, EdgeKind)>,
    used: &mut BTreeSet<(NodeId, NodeId, EdgeKind)>,
    nodes: &mut Vec<NodeId>,
    kinds: &mut Vec<EdgeKind>,
    count: &mut usize,
    cap: usize,
    visit: &mut impl FnMut(&[NodeId], &[EdgeKind]),
) -> bool {
    let n = *nodes.last().expect("path is never empty");
    if n == cfg.exit {
        *count += 1;
        if *count > cap {
            return false;
        }
        visit(nodes, kinds);
        return true;
    }
    for &(m, k) in cfg.out_edges(n) {
        let edge = (n, m, k);
        let is_back = back.contains(&edge);
        if is_back && !used.insert(edge) {
            continue;
        }
        nodes.push(m);
        kinds.push(k);
        let ok = walk(cfg, back, used, nodes, kinds, count, cap, visit);
        nodes.pop();
        kinds.pop();
        if is_back {
            used.remove(&edge);
        }
        if !ok {
            return false;
        }
    }
    true
}

/// Start of a clean suffix of `nodes` beginning at `at`, if there is one.
/// Occurrences of `at` itself are never blocking.
fn leaking_suffix(nodes: &[NodeId], kinds: &[EdgeKind], at: NodeId, b: &Blockers) -> Option<usize> {
    let last = nodes.len() - 1;
    let mut clean = true;
    let mut found = None;
    for i in (0..last).rev() {
        let next = nodes[i + 1];
        clean = clean && !b.blocks_edge(nodes[i], kinds[i]) && (next == at || !b.nodes.contains(&next));
        if !clean {
            // a blocked step cannot be skipped by any earlier start
            break;
        }
        if nodes[i] == at {
            found = Some(i);
        }
    }
    found
}

/// Verdicts for every source of `analysis`.
pub fn oracle_all(analysis: &MethodAnalysis<'_>) -> Result<OracleResult, OracleError> {
    let blockers: Vec<Blockers> = analysis.sources.iter().map(|s| analysis.blockers(s)).collect();
    let mut witness: Vec<Option<Vec<NodeId>>> = vec![None; analysis.sources.len()];
    let mut paths = 0;
    let complete = for_each_path(&analysis.cfg, PATH_CAP, |nodes, kinds| {
        paths += 1;
        for (i, src) in analysis.sources.iter().enumerate() {
            if witness[i].is_some() {
                continue;
            }
            if let Some(start) = leaking_suffix(nodes, kinds, src.at, &blockers[i]) {
                witness[i] = Some(nodes[start..].to_vec());
            }
        }
    });
    if !complete {
        return Err(OracleError::PathExplosion { method: analysis.method.qualified_name(), cap: PATH_CAP });
    }
    let verdicts = analysis
        .sources
        .iter()
        .zip(witness)
        .enumerate()
        .map(|(i, (s, w))| OracleVerdict { source: i, kind: s.kind, span: s.span, leaking: w.is_some(), witness: w })
        .collect();
    Ok(OracleResult { paths, verdicts })
}

/// Verdict for one source.
pub fn path_oracle(analysis: &MethodAnalysis<'_>, src: &SourceObligation) -> Result<OracleVerdict, OracleError> {
    match analysis.sources.iter().position(|s| s == src) {
        Some(i) => Ok(oracle_all(analysis)?.verdicts.swap_remove(i)),
        None => {
            let b = analysis.blockers(src);
            let mut w = None;
            let complete = for_each_path(&analysis.cfg, PATH_CAP, |nodes, kinds| {
                if w.is_none() {
                    w = leaking_suffix(nodes, kinds, src.at, &b).map(|s| nodes[s..].to_vec());
                }
            });
            if !complete {
                return Err(OracleError::PathExplosion { method: analysis.method.qualified_name(), cap: PATH_CAP });
            }
            Ok(OracleVerdict { source: usize::MAX, kind: src.kind, span: src.span, leaking: w.is_some(), witness: w })
        }
    }
}

/// Whether `path` is a CFG path from `src.at` to exit that avoids every
/// blocker of `src`.
pub fn is_valid_witness(analysis: &MethodAnalysis<'_>, src: &SourceObligation, path: &[NodeId]) -> bool {
    let cfg = &analysis.cfg;
    let b = analysis.blockers(src);
    if path.first() != Some(&src.at) || path.last() != Some(&cfg.exit) {
        return false;
    }
    path.windows(2).all(|w| {
        let (a, c) = (w[0], w[1]);
        let step = cfg.out_edges(a).iter().any(|&(m, k)| m == c && !b.blocks_edge(a, k));
        step && (c == src.at || !b.nodes.contains(&c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mustcall_core::diagnostics::build;
    use mustcall_core::frontend::SourceUnit;
    use mustcall_core::leakcheck::CheckMode;

    fn with_analysis(src: &str, f: impl FnOnce(&MethodAnalysis<'_>)) {
        let (model, errors) = build(&[SourceUnit::new("o.moo", src)], &[]);
        assert!(errors.is_empty(), "{errors:?}");
        let m = model.user_methods().next().unwrap();
        f(&MethodAnalysis::new(&model, m.id, CheckMode::Full).unwrap());
    }

    #[test]
    fn branch_without_release_leaks() {
        with_analysis(
            "class A { void m(bool c) {\n Socket a = new Socket();\n if (c) { int x = 1; } else { a.Close(); }\n} }",
            |a| {
                let r = oracle_all(a).unwrap();
                assert_eq!(r.paths, 2);
                assert!(r.verdicts[0].leaking);
                let w = r.verdicts[0].witness.as_ref().unwrap();
                assert!(is_valid_witness(a, &a.sources[0], w));
                assert_eq!(path_oracle(a, &a.sources[0]).unwrap(), r.verdicts[0]);
            },
        );
    }

    #[test]
    fn released_everywhere_is_clean() {
        with_analysis(
            "class A { void m(bool c) {\n Socket a = new Socket();\n if (c) { a.Dispose(); } else { a.Close(); }\n} }",
            |a| {
                let r = oracle_all(a).unwrap();
                assert!(!r.verdicts[0].leaking);
                assert!(r.verdicts[0].witness.is_none());
            },
        );
    }

    #[test]
    fn loops_are_bounded_by_back_edges() {
        with_analysis(
            "class A { void m(int n) {\n while (n > 0) {\n  Socket s = new Socket();\n  s.Close();\n  n = n - 1;\n }\n} }",
            |a| {
                assert_eq!(back_edges(&a.cfg).len(), 1);
                let r = oracle_all(a).unwrap();
                // skip the loop, or run it once
                assert_eq!(r.paths, 2);
                assert!(!r.verdicts[0].leaking);
            },
        );
    }

    #[test]
    fn cap_is_reported() {
        with_analysis("class A { void m(bool c) {\n if (c) { int x = 1; }\n} }", |a| {
            assert!(!for_each_path(&a.cfg, 1, |_, _| {}));
            assert!(for_each_path(&a.cfg, 2, |_, _| {}));
        });
    }
}
