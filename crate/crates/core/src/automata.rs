//! Deterministic automata over an explicit alphabet of label sets.
//!
//! Co-safe formulas become DFAs by formula progression. A fragment of full
//! LTL becomes a deterministic Buchi automaton: the formula is turned into a
//! very weak alternating automaton, that is made into a generalized Buchi
//! automaton over configurations, and the result is degeneralized with a
//! counter. Whenever a letter leaves more than one undominated successor the
//! construction gives up with [`Error::UnsupportedFormula`].

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ltl::{is_syntactically_cosafe, to_nnf, Formula, LabelSet, Word};

/// Upper bound on explored automaton states before giving up.
pub const STATE_LIMIT: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutomatonKind {
    Dfa,
    Dba,
}

/// `(Q, q0, Sigma, delta, F)` with `Q = 0..num_states`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Automaton {
    pub kind: AutomatonKind,
    pub num_states: usize,
    pub initial: usize,
    /// Sorted, duplicate free.
    pub alphabet: Vec<LabelSet>,
    /// `transitions[q][i]` is the successor of `q` on `alphabet[i]`.
    pub transitions: Vec<Vec<usize>>,
    pub accepting: Vec<bool>,
    /// Human readable description of each state, for DOT output.
    pub state_labels: Vec<String>,
}

impl Automaton {
    pub fn states(&self) -> std::ops::Range<usize> {
        0..self.num_states
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> BTreeSet<usize> {
        self.states().filter(|&q| self.accepting[q]).collect()
    }

    pub fn letter_index(&self, letter: &LabelSet) -> Result<usize> {
        self.alphabet
            .binary_search(letter)
            .map_err(|_| Error::UnknownLetter(letter.iter().cloned().collect()))
    }

    pub fn step(&self, q: usize, letter: &LabelSet) -> Result<usize> {
        Ok(self.transitions[q][self.letter_index(letter)?])
    }

    /// State reached after reading `letters` from `from`.
    pub fn run_from(&self, from: usize, letters: &[LabelSet]) -> Result<usize> {
        letters.iter().try_fold(from, |q, a| self.step(q, a))
    }

    pub fn run(&self, letters: &[LabelSet]) -> Result<usize> {
        self.run_from(self.initial, letters)
    }

    /// Finite-word acceptance: the run ends in an accepting state.
    pub fn accepts_finite(&self, letters: &[LabelSet]) -> Result<bool> {
        Ok(self.accepting[self.run(letters)?])
    }

    /// Acceptance of `prefix . cycle^omega`.
    ///
    /// For a DBA the cycle is iterated until the state at its start repeats
    /// and the periodic part must visit an accepting state. A DFA only looks
    /// at the state reached after the prefix.
    pub fn accepts_lasso(&self, prefix: &[LabelSet], cycle: &[LabelSet]) -> Result<bool> {
        if cycle.is_empty() {
            return Err(Error::InvalidRequest("lasso cycle must be nonempty".into()));
        }
        let mut q = self.run(prefix)?;
        if self.kind == AutomatonKind::Dfa {
            return Ok(self.accepting[q]);
        }
        let letters: Vec<usize> = cycle
            .iter()
            .map(|a| self.letter_index(a))
            .collect::<Result<_>>()?;
        // first_seen: state at the start of an iteration -> iteration index.
        // hits[i]: whether iteration i visited an accepting state.
        let mut first_seen: HashMap<usize, usize> = HashMap::new();
        let mut hits = Vec::new();
        loop {
            if let Some(&i) = first_seen.get(&q) {
                return Ok(hits[i..].iter().any(|&h| h));
            }
            first_seen.insert(q, hits.len());
            let mut hit = false;
            for &a in &letters {
                q = self.transitions[q][a];
                hit |= self.accepting[q];
            }
            hits.push(hit);
        }
    }

    /// Acceptance of a [`Word`]: lasso words by [`Self::accepts_lasso`],
    /// finite words by final state.
    pub fn accepts(&self, w: &Word) -> Result<bool> {
        match w.lasso {
            Some(_) => self.accepts_lasso(w.prefix(), w.cycle()),
            None => self.accepts_finite(&w.letters),
        }
    }

    /// Structural sanity: one in-range successor per state and letter.
    pub fn is_well_formed(&self) -> bool {
        self.initial < self.num_states
            && self.accepting.len() == self.num_states
            && self.transitions.len() == self.num_states
            && self.transitions.iter().all(|row| {
                row.len() == self.alphabet.len() && row.iter().all(|&t| t < self.num_states)
            })
            && self.alphabet.windows(2).all(|w| w[0] < w[1])
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n  rankdir=LR;\n  init [shape=point];\n");
        for q in self.states() {
            let shape = if self.accepting[q] {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(
                out,
                "  q{q} [shape={shape}, label=\"q{q}\\n{}\"];",
                escape_dot(&self.state_labels[q])
            );
        }
        let _ = writeln!(out, "  init -> q{};", self.initial);
        for q in self.states() {
            for (i, &t) in self.transitions[q].iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  q{q} -> q{t} [label=\"{}\"];",
                    format_letter(&self.alphabet[i])
                );
            }
        }
        out.push_str("}\n");
        out
    }
}

pub fn format_letter(letter: &LabelSet) -> String {
    let atoms: Vec<&str> = letter.iter().map(String::as_str).collect();
    format!("{{{}}}", atoms.join(","))
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn normalize_alphabet(alphabet: &[LabelSet]) -> Result<Vec<LabelSet>> {
    let set: BTreeSet<LabelSet> = alphabet.iter().cloned().collect();
    if set.is_empty() {
        return Err(Error::InvalidRequest("automaton alphabet is empty".into()));
    }
    Ok(set.into_iter().collect())
}

// ---------------------------------------------------------------------------
// Hash-consed formulas

type NodeId = usize;

const TRUE: NodeId = 0;
const FALSE: NodeId = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(Vec<NodeId>),
    Or(Vec<NodeId>),
    Next(NodeId),
    Until(NodeId, NodeId),
    Release(NodeId, NodeId),
    Eventually(NodeId),
    Always(NodeId),
}

struct Arena {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
    atoms: Vec<String>,
    atom_index: HashMap<String, usize>,
}

impl Arena {
    fn new() -> Self {
        let mut a = Arena {
            nodes: Vec::new(),
            index: HashMap::new(),
            atoms: Vec::new(),
            atom_index: HashMap::new(),
        };
        a.intern(Node::True);
        a.intern(Node::False);
        a
    }

    fn intern(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    fn atom(&mut self, name: &str) -> usize {
        if let Some(&i) = self.atom_index.get(name) {
            return i;
        }
        let i = self.atoms.len();
        self.atoms.push(name.to_string());
        self.atom_index.insert(name.to_string(), i);
        i
    }

    fn junction(&mut self, conj: bool, parts: impl IntoIterator<Item = NodeId>) -> NodeId {
        let (unit, zero) = if conj { (TRUE, FALSE) } else { (FALSE, TRUE) };
        let mut flat = Vec::new();
        let mut stack: Vec<NodeId> = parts.into_iter().collect();
        while let Some(p) = stack.pop() {
            match &self.nodes[p] {
                Node::And(xs) if conj => stack.extend(xs.iter().copied()),
                Node::Or(xs) if !conj => stack.extend(xs.iter().copied()),
                _ if p == unit => {}
                _ if p == zero => return zero,
                _ => flat.push(p),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        let lits: HashSet<(usize, bool)> = flat
            .iter()
            .filter_map(|&p| match self.nodes[p] {
                Node::Lit(a, pos) => Some((a, pos)),
                _ => None,
            })
            .collect();
        if lits.iter().any(|&(a, pos)| lits.contains(&(a, !pos))) {
            return zero;
        }
        match flat.len() {
            0 => unit,
            1 => flat[0],
            _ if conj => self.intern(Node::And(flat)),
            _ => self.intern(Node::Or(flat)),
        }
    }

    fn and(&mut self, parts: impl IntoIterator<Item = NodeId>) -> NodeId {
        self.junction(true, parts)
    }

    fn or(&mut self, parts: impl IntoIterator<Item = NodeId>) -> NodeId {
        self.junction(false, parts)
    }

    /// Intern an NNF formula.
    fn from_formula(&mut self, f: &Formula) -> NodeId {
        match f {
            Formula::True => TRUE,
            Formula::False => FALSE,
            Formula::Atom(a) => {
                let i = self.atom(a);
                self.intern(Node::Lit(i, true))
            }
            Formula::Not(g) => match &**g {
                Formula::Atom(a) => {
                    let i = self.atom(a);
                    self.intern(Node::Lit(i, false))
                }
                _ => unreachable!("interned formulas are in NNF"),
            },
            Formula::And(l, r) => {
                let (l, r) = (self.from_formula(l), self.from_formula(r));
                self.and([l, r])
            }
            Formula::Or(l, r) => {
                let (l, r) = (self.from_formula(l), self.from_formula(r));
                self.or([l, r])
            }
            Formula::Next(g) => {
                let g = self.from_formula(g);
                self.intern(Node::Next(g))
            }
            Formula::Until(l, r) => {
                let (l, r) = (self.from_formula(l), self.from_formula(r));
                if r == TRUE || r == FALSE {
                    return r;
                }
                self.intern(Node::Until(l, r))
            }
            Formula::Release(l, r) => {
                let (l, r) = (self.from_formula(l), self.from_formula(r));
                if r == TRUE || r == FALSE {
                    return r;
                }
                self.intern(Node::Release(l, r))
            }
            Formula::Eventually(g) => {
                let g = self.from_formula(g);
                if g == TRUE || g == FALSE {
                    return g;
                }
                self.intern(Node::Eventually(g))
            }
            Formula::Always(g) => {
                let g = self.from_formula(g);
                if g == TRUE || g == FALSE {
                    return g;
                }
                self.intern(Node::Always(g))
            }
        }
    }

    fn show(&self, id: NodeId) -> String {
        match &self.nodes[id] {
            Node::True => "true".into(),
            Node::False => "false".into(),
            Node::Lit(a, true) => self.atoms[*a].clone(),
            Node::Lit(a, false) => format!("!{}", self.atoms[*a]),
            Node::And(xs) => format!(
                "({})",
                xs.iter()
                    .map(|&x| self.show(x))
                    .collect::<Vec<_>>()
                    .join(" & ")
            ),
            Node::Or(xs) => format!(
                "({})",
                xs.iter()
                    .map(|&x| self.show(x))
                    .collect::<Vec<_>>()
                    .join(" | ")
            ),
            Node::Next(g) => format!("X {}", self.show(*g)),
            Node::Until(l, r) => format!("({} U {})", self.show(*l), self.show(*r)),
            Node::Release(l, r) => format!("({} R {})", self.show(*l), self.show(*r)),
            Node::Eventually(g) => format!("F {}", self.show(*g)),
            Node::Always(g) => format!("G {}", self.show(*g)),
        }
    }

    /// Letters as truth assignments over the formula's atoms.
    fn valuations(&self, alphabet: &[LabelSet]) -> Vec<Vec<bool>> {
        alphabet
            .iter()
            .map(|l| self.atoms.iter().map(|a| l.contains(a)).collect())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// DFA by progression

impl Arena {
    /// Whether a word whose last letter is `val` satisfies `f` at that letter.
    fn last(&self, f: NodeId, val: &[bool]) -> bool {
        match &self.nodes[f] {
            Node::True => true,
            Node::False => false,
            Node::Lit(a, pos) => val[*a] == *pos,
            Node::And(xs) => xs.iter().all(|&x| self.last(x, val)),
            Node::Or(xs) => xs.iter().any(|&x| self.last(x, val)),
            Node::Next(_) => false,
            Node::Until(_, r) | Node::Release(_, r) => self.last(*r, val),
            Node::Eventually(g) | Node::Always(g) => self.last(*g, val),
        }
    }

    /// Satisfaction by the empty word.
    fn nullable(&self, f: NodeId) -> bool {
        match &self.nodes[f] {
            Node::True | Node::Always(_) | Node::Release(..) => true,
            Node::And(xs) => xs.iter().all(|&x| self.nullable(x)),
            Node::Or(xs) => xs.iter().any(|&x| self.nullable(x)),
            _ => false,
        }
    }

    fn show_dnf(&self, dnf: &[Config]) -> String {
        match dnf {
            [] => "false".into(),
            [c] if c.is_empty() => "true".into(),
            _ => dnf
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|&x| self.show(x))
                        .collect::<Vec<_>>()
                        .join(" & ")
                })
                .collect::<Vec<_>>()
                .join(" | "),
        }
    }
}

/// Drop every clause that contains another one; sorted result.
fn absorb(mut xs: Vec<Config>) -> Vec<Config> {
    xs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut out: Vec<Config> = Vec::new();
    for c in xs {
        if !out.iter().any(|o| o.is_subset(&c)) {
            out.push(c);
        }
    }
    out.sort();
    out
}

/// Compile a co-safe formula into a minimal DFA over `alphabet`.
///
/// A state is the remaining obligation, kept in disjunctive normal form
/// over subformulas of `f` with subsumed clauses removed, together with a
/// flag recording whether the word read so far already satisfies the
/// formula. Acceptance of the empty word follows finite-trace semantics but
/// is otherwise not relied on by the planner.
pub fn ltlf_to_dfa(f: &Formula, alphabet: &[LabelSet]) -> Result<Automaton> {
    let nnf = to_nnf(f);
    if !is_syntactically_cosafe(&nnf) {
        return Err(Error::NotCoSafe(f.to_string()));
    }
    let alphabet = normalize_alphabet(alphabet)?;
    let mut arena = Arena::new();
    let root = arena.from_formula(&nnf);
    let vals = arena.valuations(&alphabet);
    let nullable = arena.nullable(root);
    let mut alt = Alternating {
        arena: &arena,
        memo: HashMap::new(),
    };

    let start = (absorb(alt.conf(root)), nullable);
    let mut ids: HashMap<(Vec<Config>, bool), usize> = HashMap::from([(start.clone(), 0)]);
    let mut states = vec![start];
    let mut transitions: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let psi = states[s].0.clone();
        let mut row = Vec::with_capacity(alphabet.len());
        for (i, val) in vals.iter().enumerate() {
            let mut succ = Vec::new();
            for clause in &psi {
                let mut acc = vec![Config::new()];
                for &x in clause {
                    let d = alt.delta(x, i, val);
                    acc = absorb(product(&acc, &d));
                    if acc.is_empty() {
                        break;
                    }
                }
                succ.extend(acc);
            }
            let done = psi
                .iter()
                .any(|c| c.iter().all(|&x| alt.arena.last(x, val)));
            let next = (absorb(succ), done);
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= STATE_LIMIT {
                        return Err(Error::UnsupportedFormula {
                            formula: f.to_string(),
                            reason: format!("DFA exceeds {STATE_LIMIT} states"),
                        });
                    }
                    ids.insert(next.clone(), id);
                    states.push(next);
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        // Breadth-first order: ids are popped in increasing order.
        debug_assert_eq!(transitions.len(), s);
        transitions.push(row);
    }

    let accepting: Vec<bool> = states.iter().map(|(_, acc)| *acc).collect();
    let labels: Vec<String> = states.iter().map(|(psi, _)| arena.show_dnf(psi)).collect();
    Ok(minimize(
        AutomatonKind::Dfa,
        alphabet,
        0,
        transitions,
        accepting,
        labels,
    ))
}

// ---------------------------------------------------------------------------
// Minimization

/// Coarsest partition refining `{accepting, rejecting}` that is stable under
/// every letter (Hopcroft). Returns a block id per state.
pub(crate) fn hopcroft(transitions: &[Vec<usize>], accepting: &[bool], sigma: usize) -> Vec<usize> {
    let n = transitions.len();
    let mut inverse = vec![vec![Vec::new(); n]; sigma];
    for (q, row) in transitions.iter().enumerate() {
        for (a, &t) in row.iter().enumerate() {
            inverse[a][t].push(q);
        }
    }

    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let acc: Vec<usize> = (0..n).filter(|&q| accepting[q]).collect();
    let rej: Vec<usize> = (0..n).filter(|&q| !accepting[q]).collect();
    for part in [acc, rej] {
        if !part.is_empty() {
            blocks.push(part);
        }
    }
    let mut block_of = vec![0; n];
    for (b, members) in blocks.iter().enumerate() {
        for &q in members {
            block_of[q] = b;
        }
    }

    let mut work: Vec<(usize, usize)> = Vec::new();
    let mut in_work: HashSet<(usize, usize)> = HashSet::new();
    if blocks.len() == 2 {
        let smaller = if blocks[0].len() <= blocks[1].len() {
            0
        } else {
            1
        };
        for a in 0..sigma {
            work.push((smaller, a));
            in_work.insert((smaller, a));
        }
    }

    let mut mark = vec![false; n];
    while let Some((splitter, a)) = work.pop() {
        in_work.remove(&(splitter, a));
        let mut touched: Vec<usize> = Vec::new();
        let mut preds: Vec<usize> = Vec::new();
        for &t in &blocks[splitter] {
            for &q in &inverse[a][t] {
                if !mark[q] {
                    mark[q] = true;
                    preds.push(q);
                    touched.push(block_of[q]);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for y in touched {
            let (inside, outside): (Vec<usize>, Vec<usize>) =
                blocks[y].iter().partition(|&&q| mark[q]);
            if outside.is_empty() {
                continue;
            }
            let new_id = blocks.len();
            let (keep, moved) = if inside.len() <= outside.len() {
                (outside, inside)
            } else {
                (inside, outside)
            };
            for &q in &moved {
                block_of[q] = new_id;
            }
            blocks[y] = keep;
            blocks.push(moved);
            // Whether or not (y, c) is pending, queueing the smaller half
            // suffices; `moved` is the smaller half by construction.
            for c in 0..sigma {
                if in_work.insert((new_id, c)) {
                    work.push((new_id, c));
                }
            }
        }
        for q in preds {
            mark[q] = false;
        }
    }
    block_of
}

/// Quotient by [`hopcroft`] and renumber in breadth-first order from the
/// initial state. Unreachable states are dropped.
fn minimize(
    kind: AutomatonKind,
    alphabet: Vec<LabelSet>,
    initial: usize,
    transitions: Vec<Vec<usize>>,
    accepting: Vec<bool>,
    labels: Vec<String>,
) -> Automaton {
    let block_of = hopcroft(&transitions, &accepting, alphabet.len());
    let mut order: HashMap<usize, usize> = HashMap::new();
    let mut reps: Vec<usize> = Vec::new();
    let mut queue = VecDeque::from([initial]);
    order.insert(block_of[initial], 0);
    reps.push(initial);
    while let Some(q) = queue.pop_front() {
        for &t in &transitions[q] {
            let b = block_of[t];
            if let std::collections::hash_map::Entry::Vacant(e) = order.entry(b) {
                e.insert(reps.len());
                reps.push(t);
                queue.push_back(t);
            }
        }
    }
    let new_transitions = reps
        .iter()
        .map(|&q| {
            transitions[q]
                .iter()
                .map(|&t| order[&block_of[t]])
                .collect()
        })
        .collect();
    Automaton {
        kind,
        num_states: reps.len(),
        initial: 0,
        alphabet,
        transitions: new_transitions,
        accepting: reps.iter().map(|&q| accepting[q]).collect(),
        state_labels: reps.iter().map(|&q| labels[q].clone()).collect(),
    }
}

// ---------------------------------------------------------------------------
// DBA through a very weak alternating automaton

type Config = BTreeSet<NodeId>;

struct Alternating<'a> {
    arena: &'a Arena,
    memo: HashMap<(NodeId, usize), Vec<Config>>,
}

fn product(xs: &[Config], ys: &[Config]) -> Vec<Config> {
    let mut out: BTreeSet<Config> = BTreeSet::new();
    for x in xs {
        for y in ys {
            out.insert(x.union(y).copied().collect());
        }
    }
    out.into_iter().collect()
}

fn union(mut xs: Vec<Config>, ys: Vec<Config>) -> Vec<Config> {
    xs.extend(ys);
    xs.sort();
    xs.dedup();
    xs
}

impl Alternating<'_> {
    /// Disjunctive normal form of `f` with temporal subformulas and
    /// literals as states.
    fn conf(&self, f: NodeId) -> Vec<Config> {
        match &self.arena.nodes[f] {
            Node::True => vec![Config::new()],
            Node::False => Vec::new(),
            Node::And(xs) => xs
                .iter()
                .fold(vec![Config::new()], |acc, &x| product(&acc, &self.conf(x))),
            Node::Or(xs) => xs
                .iter()
                .fold(Vec::new(), |acc, &x| union(acc, self.conf(x))),
            _ => vec![Config::from([f])],
        }
    }

    /// Successor configurations of state `f` on a letter.
    fn delta(&mut self, f: NodeId, letter: usize, val: &[bool]) -> Vec<Config> {
        if let Some(r) = self.memo.get(&(f, letter)) {
            return r.clone();
        }
        let me = || vec![Config::from([f])];
        let r = match self.arena.nodes[f].clone() {
            Node::True => vec![Config::new()],
            Node::False => Vec::new(),
            Node::Lit(a, pos) => {
                if val[a] == pos {
                    vec![Config::new()]
                } else {
                    Vec::new()
                }
            }
            Node::And(xs) => {
                let mut acc = vec![Config::new()];
                for x in xs {
                    let d = self.delta(x, letter, val);
                    acc = product(&acc, &d);
                }
                acc
            }
            Node::Or(xs) => {
                let mut acc = Vec::new();
                for x in xs {
                    let d = self.delta(x, letter, val);
                    acc = union(acc, d);
                }
                acc
            }
            Node::Next(g) => self.conf(g),
            Node::Until(l, r) => {
                let dr = self.delta(r, letter, val);
                let dl = self.delta(l, letter, val);
                union(dr, product(&dl, &me()))
            }
            Node::Eventually(g) => {
                let dg = self.delta(g, letter, val);
                union(dg, me())
            }
            Node::Always(g) => {
                let dg = self.delta(g, letter, val);
                product(&dg, &me())
            }
            Node::Release(l, r) => {
                let dr = self.delta(r, letter, val);
                let dl = self.delta(l, letter, val);
                product(&dr, &union(dl, me()))
            }
        };
        self.memo.insert((f, letter), r.clone());
        r
    }
}

/// Compile an LTL formula into a deterministic Buchi automaton over
/// `alphabet`, or report that this construction cannot make it deterministic.
pub fn ltl_to_dba(f: &Formula, alphabet: &[LabelSet]) -> Result<Automaton> {
    let nnf = to_nnf(f);
    let alphabet = normalize_alphabet(alphabet)?;
    let mut arena = Arena::new();
    let root = arena.from_formula(&nnf);
    let vals = arena.valuations(&alphabet);

    // Until and Eventually states must eventually be left on every branch.
    let until_states: Vec<NodeId> = (0..arena.nodes.len())
        .filter(|&i| matches!(arena.nodes[i], Node::Until(..) | Node::Eventually(_)))
        .collect();
    let m = until_states.len();

    let mut alt = Alternating {
        arena: &arena,
        memo: HashMap::new(),
    };

    // Generalized Buchi successor of a configuration (or of the root formula
    // for the initial step): the unique undominated (config, acceptance) pair.
    let mut successor = |source: Option<&Config>,
                         letter: usize|
     -> std::result::Result<Option<(Config, Vec<bool>)>, String> {
        let val = &vals[letter];
        let options = match source {
            None => alt.delta(root, letter, val),
            Some(c) => {
                let mut acc = vec![Config::new()];
                for &s in c {
                    let d = alt.delta(s, letter, val);
                    acc = product(&acc, &d);
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
        };
        if options.is_empty() {
            return Ok(None);
        }
        let scored: Vec<(Config, Vec<bool>)> = options
            .into_iter()
            .map(|e| {
                let acc = until_states
                    .iter()
                    .map(|&u| {
                        !e.contains(&u)
                            || alt
                                .delta(u, letter, val)
                                .iter()
                                .any(|c| !c.contains(&u) && c.is_subset(&e))
                    })
                    .collect();
                (e, acc)
            })
            .collect();
        let undominated: Vec<&(Config, Vec<bool>)> = scored
            .iter()
            .filter(|(e, a)| {
                !scored.iter().any(|(e2, a2)| {
                    (e2 != e || a2 != a)
                        && e2.is_subset(e)
                        && a2.iter().zip(a.iter()).all(|(x, y)| *x || !*y)
                })
            })
            .collect();
        if undominated.len() != 1 {
            return Err(format!(
                "letter {} leaves {} incomparable successors",
                format_letter(&alphabet[letter]),
                undominated.len()
            ));
        }
        Ok(Some(undominated[0].clone()))
    };

    // Degeneralized states. Index 0 is the dedicated initial state, index 1
    // the rejecting sink.
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Key {
        Init,
        Sink,
        Conf(Config, usize, bool),
    }
    let mut ids: HashMap<Key, usize> = HashMap::from([(Key::Init, 0), (Key::Sink, 1)]);
    let mut keys = vec![Key::Init, Key::Sink];
    let mut transitions: Vec<Vec<usize>> = vec![Vec::new(), vec![1; alphabet.len()]];
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let (source, level) = match &keys[s] {
            Key::Init => (None, 0),
            Key::Sink => continue,
            Key::Conf(c, level, _) => (Some(c.clone()), *level),
        };
        let mut row = Vec::with_capacity(alphabet.len());
        for letter in 0..alphabet.len() {
            let next =
                successor(source.as_ref(), letter).map_err(|reason| Error::UnsupportedFormula {
                    formula: f.to_string(),
                    reason,
                })?;
            let key = match next {
                None => Key::Sink,
                Some((conf, acc)) => {
                    let mut j = level;
                    while j < m && acc[j] {
                        j += 1;
                    }
                    if j == m {
                        Key::Conf(conf, 0, true)
                    } else {
                        Key::Conf(conf, j, false)
                    }
                }
            };
            let id = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = keys.len();
                    if id >= STATE_LIMIT {
                        return Err(Error::UnsupportedFormula {
                            formula: f.to_string(),
                            reason: format!("DBA exceeds {STATE_LIMIT} states"),
                        });
                    }
                    ids.insert(key.clone(), id);
                    keys.push(key);
                    transitions.push(Vec::new());
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        transitions[s] = row;
    }

    let accepting: Vec<bool> = keys
        .iter()
        .map(|k| matches!(k, Key::Conf(_, _, true)))
        .collect();
    let labels: Vec<String> = keys
        .iter()
        .map(|k| match k {
            Key::Init => "init".to_string(),
            Key::Sink => "sink".to_string(),
            Key::Conf(c, level, _) => {
                let parts: Vec<String> = c.iter().map(|&x| arena.show(x)).collect();
                format!("{{{}}} #{level}", parts.join(", "))
            }
        })
        .collect();
    Ok(minimize(
        AutomatonKind::Dba,
        alphabet,
        0,
        transitions,
        accepting,
        labels,
    ))
}

/// All subsets of `atoms`, as an alphabet.
pub fn powerset_alphabet(atoms: &BTreeSet<String>) -> Vec<LabelSet> {
    let atoms: Vec<&String> = atoms.iter().collect();
    (0..1usize << atoms.len())
        .map(|mask| {
            atoms
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, a)| (*a).clone())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{check_word, label_set, parse};

    fn ls(atoms: &[&str]) -> LabelSet {
        label_set(atoms.iter().copied())
    }

    fn sigma(atoms: &[&str]) -> Vec<LabelSet> {
        powerset_alphabet(&atoms.iter().map(|s| s.to_string()).collect())
    }

    fn words(alphabet: &[LabelSet], max_len: usize) -> Vec<Vec<LabelSet>> {
        let mut out = vec![Vec::new()];
        let mut layer = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &layer {
                for a in alphabet {
                    let mut w2: Vec<LabelSet> = w.clone();
                    w2.push(a.clone());
                    next.push(w2);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn until_dfa_has_three_states() {
        let f = parse("!b U a").unwrap();
        let dfa = ltlf_to_dfa(&f, &sigma(&["a", "b"])).unwrap();
        assert_eq!(dfa.num_states, 3);
        assert!(dfa.accepts_finite(&[ls(&["a"])]).unwrap());
        assert!(!dfa.accepts_finite(&[ls(&["b"])]).unwrap());
        assert!(!dfa.accepts_finite(&[ls(&[])]).unwrap());
        assert!(dfa.is_well_formed());
    }

    #[test]
    fn true_dfa_has_one_state() {
        let dfa = ltlf_to_dfa(&Formula::True, &sigma(&["a"])).unwrap();
        assert_eq!(dfa.num_states, 1);
        assert!(dfa.accepts_finite(&[ls(&[])]).unwrap());
        assert!(dfa.accepts_finite(&[ls(&["a"]), ls(&[])]).unwrap());
    }

    #[test]
    fn key_door_dfa_matches_semantics() {
        let f = parse("(!door1 U key1) & (!door2 U key2) & F goal").unwrap();
        let alphabet = vec![
            ls(&[]),
            ls(&["key1"]),
            ls(&["key2"]),
            ls(&["door1"]),
            ls(&["door2"]),
            ls(&["goal"]),
        ];
        let dfa = ltlf_to_dfa(&f, &alphabet).unwrap();
        let mut count = 0;
        for w in words(&alphabet, 4).into_iter().filter(|w| !w.is_empty()) {
            let expected = check_word(&f, &Word::finite(w.clone())).unwrap();
            assert_eq!(dfa.accepts_finite(&w).unwrap(), expected, "{w:?}");
            count += 1;
        }
        assert_eq!(count, 6 + 36 + 216 + 1296);
    }

    #[test]
    fn dfa_rejects_non_cosafe() {
        let f = parse("G a").unwrap();
        assert!(matches!(
            ltlf_to_dfa(&f, &sigma(&["a"])),
            Err(Error::NotCoSafe(_))
        ));
    }

    #[test]
    fn dfa_rejects_unknown_letter() {
        let dfa = ltlf_to_dfa(&parse("F a").unwrap(), &[ls(&[]), ls(&["a"])]).unwrap();
        assert!(matches!(
            dfa.accepts_finite(&[ls(&["b"])]),
            Err(Error::UnknownLetter(_))
        ));
    }

    #[test]
    fn recurrence_dba() {
        let f = parse("G F a").unwrap();
        let dba = ltl_to_dba(&f, &sigma(&["a"])).unwrap();
        assert!(dba.accepts_lasso(&[], &[ls(&["a"])]).unwrap());
        assert!(!dba.accepts_lasso(&[], &[ls(&[])]).unwrap());
        assert!(dba
            .accepts_lasso(&[ls(&[])], &[ls(&[]), ls(&["a"])])
            .unwrap());
    }

    #[test]
    fn visit_both_infinitely_often() {
        let f = parse("G (F a & F b)").unwrap();
        let dba = ltl_to_dba(&f, &sigma(&["a", "b"])).unwrap();
        assert!(dba.is_well_formed());
        assert!(dba.accepts_lasso(&[], &[ls(&["a"]), ls(&["b"])]).unwrap());
        assert!(dba
            .accepts_lasso(&[ls(&[]), ls(&["a"])], &[ls(&["b"]), ls(&["a"])])
            .unwrap());
        assert!(!dba.accepts_lasso(&[ls(&["b"])], &[ls(&["a"])]).unwrap());
    }

    #[test]
    fn safety_and_reach_dba() {
        let f = to_nnf(&parse("G !b & F a").unwrap());
        let dba = ltl_to_dba(&f, &sigma(&["a", "b"])).unwrap();
        assert!(dba.accepts_lasso(&[], &[ls(&["a"])]).unwrap());
        for w in [
            (vec![ls(&["b"])], vec![ls(&["a"])]),
            (vec![ls(&["a"])], vec![ls(&["a", "b"])]),
            (vec![], vec![ls(&["a"]), ls(&["b"])]),
        ] {
            assert!(!dba.accepts_lasso(&w.0, &w.1).unwrap());
        }
    }

    #[test]
    fn persistence_is_unsupported() {
        let f = parse("F G a").unwrap();
        assert!(matches!(
            ltl_to_dba(&f, &sigma(&["a"])),
            Err(Error::UnsupportedFormula { .. })
        ));
    }

    #[test]
    fn dfa_kind_lasso_looks_at_prefix() {
        let dfa = ltlf_to_dfa(&parse("F a").unwrap(), &sigma(&["a"])).unwrap();
        assert!(dfa.accepts_lasso(&[ls(&["a"])], &[ls(&[])]).unwrap());
        assert!(!dfa.accepts_lasso(&[ls(&[])], &[ls(&["a"])]).unwrap());
    }

    #[test]
    fn dot_has_one_line_per_transition() {
        let dfa = ltlf_to_dfa(&parse("!b U a").unwrap(), &sigma(&["a", "b"])).unwrap();
        let dot = dfa.to_dot();
        let edges = dot
            .lines()
            .filter(|l| l.contains(" -> q") && !l.contains("init"))
            .count();
        assert_eq!(edges, dfa.num_states * dfa.alphabet.len());
        assert!(dot.contains("doublecircle"));
    }
}
