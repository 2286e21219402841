#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use ltlgcs::automata::powerset_alphabet;
use ltlgcs::gcs::{product, CostSpec, Gcs, ProductOptions};
use ltlgcs::geometry::{HPolytope, LabeledRegion};
use ltlgcs::ltl::label_set;
use ltlgcs::solver::{enumerate_simple_paths, seeded_rng};
use ltlgcs::{
    build_ts, ltlf_to_dfa, parse, Automaton, Formula, LabelSet, Scenario, TransitionSystem,
};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(scenario_dir().join(format!("{name}.json"))).unwrap()
}

/// Every shipped scenario that is expected to plan.
pub const CORPUS: [&str; 9] = [
    "shortest_path",
    "key_door_simple",
    "key_door_3",
    "key_door_5",
    "kl_loop",
    "multitarget",
    "chain_n7",
    "chain_n30",
    "bad",
];

pub fn plannable() -> impl Iterator<Item = &'static str> {
    CORPUS.into_iter().filter(|&n| n != "bad")
}

pub fn atoms(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn alphabet(names: &[&str]) -> Vec<LabelSet> {
    powerset_alphabet(&atoms(names))
}

/// All words of length `1..=max_len` over `alphabet`.
pub fn all_words(alphabet: &[LabelSet], max_len: usize) -> Vec<Vec<LabelSet>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<LabelSet>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |a| {
                    let mut w = w.clone();
                    w.push(a.clone());
                    w
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn boxed(f: Formula) -> Box<Formula> {
    Box::new(f)
}

/// Surface-syntax formulas (no Release).
pub fn formula_strategy(atom_names: &'static [&'static str]) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        proptest::sample::select(atom_names).prop_map(Formula::atom),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(boxed(f))),
            inner.clone().prop_map(|f| Formula::Next(boxed(f))),
            inner.clone().prop_map(|f| Formula::Eventually(boxed(f))),
            inner.clone().prop_map(|f| Formula::Always(boxed(f))),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::And(boxed(l), boxed(r))),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::Or(boxed(l), boxed(r))),
            (inner.clone(), inner).prop_map(|(l, r)| Formula::Until(boxed(l), boxed(r))),
        ]
    })
}

pub fn letter_strategy(atom_names: &'static [&'static str]) -> impl Strategy<Value = LabelSet> {
    proptest::sample::subsequence(atom_names, 0..=atom_names.len()).prop_map(|v| label_set(v))
}

/// `(prefix, cycle)` with a nonempty cycle.
pub fn lasso_strategy(
    atom_names: &'static [&'static str],
) -> impl Strategy<Value = (Vec<LabelSet>, Vec<LabelSet>)> {
    (
        proptest::collection::vec(letter_strategy(atom_names), 0..4),
        proptest::collection::vec(letter_strategy(atom_names), 1..4),
    )
}

fn random_literal(rng: &mut ChaCha8Rng, names: &[&str]) -> Formula {
    let a = Formula::atom(names[rng.gen_range(0..names.len())]);
    match rng.gen_range(0..5) {
        0 => Formula::True,
        1 | 2 => Formula::not(a),
        _ => a,
    }
}

/// A random co-safe formula in negation normal form with at most
/// `temporal` temporal operators and at most `depth` levels.
pub fn random_cosafe(
    rng: &mut ChaCha8Rng,
    names: &[&str],
    temporal: usize,
    depth: usize,
) -> Formula {
    if depth == 0 {
        return random_literal(rng, names);
    }
    let choice = if temporal == 0 {
        rng.gen_range(0..3)
    } else {
        rng.gen_range(0..7)
    };
    match choice {
        0 => random_literal(rng, names),
        1 | 2 => {
            let split = rng.gen_range(0..=temporal);
            let l = random_cosafe(rng, names, split, depth - 1);
            let r = random_cosafe(rng, names, temporal - split, depth - 1);
            if choice == 1 {
                Formula::and(l, r)
            } else {
                Formula::or(l, r)
            }
        }
        3 => Formula::next(random_cosafe(rng, names, temporal - 1, depth - 1)),
        4 => Formula::eventually(random_cosafe(rng, names, temporal - 1, depth - 1)),
        _ => {
            let rest = temporal - 1;
            let split = rng.gen_range(0..=rest);
            Formula::until(
                random_cosafe(rng, names, split, depth - 1),
                random_cosafe(rng, names, rest - split, depth - 1),
            )
        }
    }
}

/// Distinct co-safe formulas over `names`: a fixed list of named patterns
/// followed by seeded random ones, `count` in total.
pub fn cosafe_corpus(names: &[&str], count: usize, seed: u64) -> Vec<Formula> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for text in [
        "true",
        "a",
        "!a",
        "F a",
        "X a",
        "a U b",
        "!b U a",
        "F a & F b",
        "F (a & F b)",
        "F (a | b)",
        "(!c U a) & F b",
        "X X a",
        "F (a & X b)",
        "a U (b U c)",
        "(a U b) U c",
        "F a & !b U c",
    ] {
        let f = parse(text).unwrap();
        if f.atoms().iter().all(|a| names.contains(&a.as_str())) && seen.insert(f.clone()) {
            out.push(f);
        }
    }
    let mut rng = seeded_rng(seed);
    let mut tries = 0;
    while out.len() < count && tries < count * 50 {
        tries += 1;
        let f = random_cosafe(&mut rng, names, 3, 4);
        if f.temporal_depth_count() <= 3 && seen.insert(f.clone()) {
            out.push(f);
        }
    }
    out
}

pub struct Instance {
    pub ts: TransitionSystem,
    pub aut: Automaton,
    pub g: Gcs,
}

/// A small random planar instance: boxes on a grid with labels from
/// `{a, b}` and a co-safe task. `None` when the product is empty.
pub fn random_instance(seed: u64) -> Option<Instance> {
    let mut rng = seeded_rng(seed);
    let n_boxes = rng.gen_range(4..7);
    let mut regions = Vec::new();
    for i in 0..n_boxes {
        let x = rng.gen_range(0..5) as f64;
        let y = rng.gen_range(0..5) as f64;
        let w = rng.gen_range(1..3) as f64;
        let h = rng.gen_range(1..3) as f64;
        let label = match (i, rng.gen_range(0..4)) {
            (0, _) => LabelSet::new(),
            (_, 0) => label_set(["a"]),
            (_, 1) => label_set(["b"]),
            _ => LabelSet::new(),
        };
        regions.push(LabeledRegion::new(
            format!("r{i}"),
            label,
            HPolytope::from_box(&[x, y], &[x + w, y + h]).unwrap(),
        ));
    }
    let tasks = [
        "F a",
        "F b",
        "F (a | b)",
        "!b U a",
        "F a & F b",
        "F (a & F b)",
    ];
    let f = parse(tasks[rng.gen_range(0..tasks.len())]).unwrap();
    let c = regions[0].polytope.chebyshev_center().ok()?.0;
    let q0 = vec![c[0], c[1]];
    let ts = build_ts(regions, &q0).ok()?;
    let aut = ltlf_to_dfa(&f, &ts.observed_alphabet()).ok()?;
    let opts = ProductOptions {
        order: 2,
        smoothness: 1,
        cost: CostSpec::default(),
        strict_def5: false,
    };
    let g = product(&ts, &aut, &opts, &q0).ok()?;
    Some(Instance { ts, aut, g })
}

/// Random instances with at most `max_paths` simple source-target paths,
/// together with those paths.
pub fn random_products(count: usize, max_paths: usize) -> Vec<(u64, Gcs, Vec<Vec<usize>>)> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        if let Some(inst) = random_instance(seed) {
            if let Ok(paths) = enumerate_simple_paths(&inst.g, max_paths) {
                out.push((seed, inst.g, paths));
            }
        }
        seed += 1;
    }
    out
}
