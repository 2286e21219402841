//! Finite abstraction of the workspace: one state per region, an edge
//! between every pair of intersecting regions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::automata::format_letter;
use crate::error::{Error, Result};
use crate::geometry::{LabeledRegion, CONTAINMENT_TOL};
use crate::ltl::LabelSet;

#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub regions: Vec<LabeledRegion>,
    /// Regions containing the start configuration.
    pub initial: Vec<usize>,
    /// `adjacency[s]` lists every `s'` with `s -> s'`, including `s` itself.
    pub adjacency: Vec<Vec<usize>>,
}

impl TransitionSystem {
    pub fn num_states(&self) -> usize {
        self.regions.len()
    }

    pub fn label_of(&self, s: usize) -> &LabelSet {
        &self.regions[s].label
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.adjacency[s].binary_search(&t).is_ok()
    }

    /// Distinct labels of all regions: the automaton alphabet.
    pub fn observed_alphabet(&self) -> Vec<LabelSet> {
        let set: BTreeSet<LabelSet> = self.regions.iter().map(|r| r.label.clone()).collect();
        set.into_iter().collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ts {\n");
        for (s, r) in self.regions.iter().enumerate() {
            let style = if self.initial.contains(&s) {
                ", penwidth=2"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  s{s} [label=\"{}\\n{}\"{style}];",
                r.name,
                format_letter(&r.label)
            );
        }
        for (s, succ) in self.adjacency.iter().enumerate() {
            for &t in succ {
                if s < t {
                    let _ = writeln!(out, "  s{s} -> s{t} [dir=both];");
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Build the abstraction. Every region holding `q0` is an initial state.
pub fn build_ts(regions: Vec<LabeledRegion>, q0: &[f64]) -> Result<TransitionSystem> {
    let n = q0.len();
    for r in &regions {
        if r.polytope.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.polytope.dim(),
            });
        }
    }
    let initial: Vec<usize> = regions
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r.polytope.contains(q0, CONTAINMENT_TOL) {
            Ok(true) => Some(Ok(i)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    if initial.is_empty() {
        return Err(Error::NoInitialRegion);
    }
    let mut adjacency = vec![Vec::new(); regions.len()];
    for i in 0..regions.len() {
        adjacency[i].push(i);
        for j in i + 1..regions.len() {
            if regions[i].polytope.intersects(&regions[j].polytope)? {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    for succ in &mut adjacency {
        succ.sort_unstable();
    }
    Ok(TransitionSystem {
        regions,
        initial,
        adjacency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HPolytope;
    use crate::ltl::label_set;

    fn region(name: &str, atoms: &[&str], lo: [f64; 2], hi: [f64; 2]) -> LabeledRegion {
        LabeledRegion::new(
            name,
            label_set(atoms.iter().copied()),
            HPolytope::from_box(&lo, &hi).unwrap(),
        )
    }

    #[test]
    fn overlapping_boxes() {
        let ts = build_ts(
            vec![
                region("r1", &[], [0.0, 0.0], [1.0, 1.0]),
                region("r2", &["a"], [0.5, 0.0], [1.5, 1.0]),
            ],
            &[0.2, 0.5],
        )
        .unwrap();
        assert_eq!(ts.initial, vec![0]);
        assert_eq!(ts.adjacency, vec![vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn disjoint_boxes_only_self_loops() {
        let ts = build_ts(
            vec![
                region("r1", &[], [0.0, 0.0], [1.0, 1.0]),
                region("r2", &["a"], [2.0, 0.0], [3.0, 1.0]),
            ],
            &[0.2, 0.5],
        )
        .unwrap();
        assert_eq!(ts.adjacency, vec![vec![0], vec![1]]);
    }

    #[test]
    fn start_on_shared_face_is_in_both() {
        let ts = build_ts(
            vec![
                region("r1", &[], [0.0, 0.0], [1.0, 1.0]),
                region("r2", &["a"], [1.0, 0.0], [2.0, 1.0]),
            ],
            &[1.0, 0.5],
        )
        .unwrap();
        assert_eq!(ts.initial, vec![0, 1]);
    }

    #[test]
    fn start_outside_everything() {
        let err =
            build_ts(vec![region("r1", &[], [0.0, 0.0], [1.0, 1.0])], &[5.0, 5.0]).unwrap_err();
        assert!(matches!(err, Error::NoInitialRegion));
    }

    #[test]
    fn dimension_mismatch() {
        let err = build_ts(vec![region("r1", &[], [0.0, 0.0], [1.0, 1.0])], &[0.5]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
