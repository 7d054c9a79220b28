//! Brute-force deciders for code equivalence and seeded instance generators.
//!
//! Two deciders are provided. `Exhaustive` walks every permutation in
//! lexicographic order and, for each, every diagonal in lexicographic order of
//! encodings; the first verifying candidate is returned, so the witness is
//! canonical. `Backtracking` assigns a source column to one position of `H` at
//! a time and keeps the partial assignment linearly consistent, which makes it
//! fast on structured inputs but returns a witness that depends on its search
//! order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ce_core::{verify_witness, CEInstance, ProblemTag, Witness};
use crate::ff::{Elem, Field};
use crate::matf::{find_change_of_basis, IncrementalSpan, Mat, MonoMat, PermMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchMode {
    Exhaustive,
    Backtracking,
}

impl SearchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::Backtracking => "backtracking",
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "backtracking" => Ok(SearchMode::Backtracking),
            _ => Err(format!("unknown search mode `{s}`")),
        }
    }
}

/// Limits for one call to [`decide`]. A node is one candidate monomial
/// matrix in exhaustive mode and one partial assignment in backtracking mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBudget {
    max_nodes: u64,
    pub time_limit: Option<Duration>,
    pub mode: SearchMode,
    /// Threads for exhaustive search; results do not depend on this.
    pub workers: usize,
}

impl SearchBudget {
    pub fn new(mode: SearchMode) -> SearchBudget {
        SearchBudget { max_nodes: u64::MAX, time_limit: None, mode, workers: 1 }
    }

    pub fn exhaustive() -> SearchBudget {
        SearchBudget::new(SearchMode::Exhaustive)
    }

    pub fn backtracking() -> SearchBudget {
        SearchBudget::new(SearchMode::Backtracking)
    }

    /// Panics if `max_nodes` is zero.
    pub fn with_max_nodes(mut self, max_nodes: u64) -> SearchBudget {
        assert!(max_nodes >= 1, "max_nodes must be at least 1");
        self.max_nodes = max_nodes;
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> SearchBudget {
        self.time_limit = Some(limit);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> SearchBudget {
        self.workers = workers.max(1);
        self
    }

    pub fn max_nodes(&self) -> u64 {
        self.max_nodes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Limit {
    Nodes,
    Time,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limit::Nodes => "node budget",
            Limit::Time => "time limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchStats {
    pub mode: SearchMode,
    pub nodes: u64,
    pub elapsed: Duration,
    /// Which limit stopped the search, if any.
    pub exhausted: Option<Limit>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Yes(Witness),
    No,
    /// The budget ran out before the question was settled.
    Unknown(SearchStats),
}

impl Decision {
    pub fn is_yes(&self) -> bool {
        matches!(self, Decision::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Decision::No)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Decision::Unknown(_))
    }

    /// `Some(true)` for YES, `Some(false)` for NO.
    pub fn answer(&self) -> Option<bool> {
        match self {
            Decision::Yes(_) => Some(true),
            Decision::No => Some(false),
            Decision::Unknown(_) => None,
        }
    }
}

/// Decides whether `S*G*M = H` for an invertible `S` and `M` in the group named
/// by the instance tag. Every YES carries a witness that passed `verify_witness`.
pub fn decide(inst: &CEInstance, budget: &SearchBudget) -> Decision {
    decide_with_stats(inst, budget).0
}

pub fn decide_with_stats(inst: &CEInstance, budget: &SearchBudget) -> (Decision, SearchStats) {
    let meter = Meter::new(budget);
    let found = if inst.g().rank() != inst.h().rank() {
        Found::No
    } else {
        match budget.mode {
            SearchMode::Exhaustive => exhaustive(inst, &meter, budget.workers),
            SearchMode::Backtracking => Backtracker::new(inst, &meter).map_or(Found::No, |mut b| b.run()),
        }
    };
    let stats = meter.stats(budget.mode);
    let decision = match found {
        Found::Yes(w) => {
            assert!(verify_witness(inst, &w).unwrap_or(false), "decider produced a non-verifying witness");
            Decision::Yes(w)
        }
        Found::No => Decision::No,
        Found::Limit => Decision::Unknown(stats.clone()),
    };
    (decision, stats)
}

enum Found {
    Yes(Witness),
    No,
    Limit,
}

/// Shared node counter and clock.
struct Meter {
    start: Instant,
    max_nodes: u64,
    time_limit: Option<Duration>,
    nodes: AtomicU64,
    hit: AtomicU64,
}

const HIT_NONE: u64 = 0;
const HIT_NODES: u64 = 1;
const HIT_TIME: u64 = 2;

impl Meter {
    fn new(budget: &SearchBudget) -> Meter {
        Meter {
            start: Instant::now(),
            max_nodes: budget.max_nodes,
            time_limit: budget.time_limit,
            nodes: AtomicU64::new(0),
            hit: AtomicU64::new(HIT_NONE),
        }
    }

    /// Counts one node; false once any limit has been reached.
    fn tick(&self) -> bool {
        if self.hit.load(Ordering::Relaxed) != HIT_NONE {
            return false;
        }
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.max_nodes {
            self.nodes.fetch_sub(1, Ordering::Relaxed);
            self.hit.store(HIT_NODES, Ordering::Relaxed);
            return false;
        }
        if n % 1024 == 0 {
            if let Some(limit) = self.time_limit {
                if self.start.elapsed() > limit {
                    self.hit.store(HIT_TIME, Ordering::Relaxed);
                    return false;
                }
            }
        }
        true
    }

    fn stats(&self, mode: SearchMode) -> SearchStats {
        SearchStats {
            mode,
            nodes: self.nodes.load(Ordering::Relaxed),
            elapsed: self.start.elapsed(),
            exhausted: match self.hit.load(Ordering::Relaxed) {
                HIT_NODES => Some(Limit::Nodes),
                HIT_TIME => Some(Limit::Time),
                _ => None,
            },
        }
    }
}

fn witness_for(inst: &CEInstance, sigma: Vec<usize>, diag: Vec<Elem>) -> Option<Witness> {
    let m = MonoMat::new(PermMat::from_sigma(sigma).ok()?, diag).ok()?;
    let gm = inst.g().apply_mono(&m).ok()?;
    let s = find_change_of_basis(&gm, inst.h()).ok()??;
    Some(Witness::new(s, m))
}

// ---------------------------------------------------------------- exhaustive

struct Exhaustive<'a> {
    inst: &'a CEInstance,
    field: &'a Field,
    /// RREF rows of `H` with their pivot columns.
    h_rows: Vec<(usize, Vec<Elem>)>,
    scalars: Vec<Elem>,
    meter: &'a Meter,
}

enum Prefix {
    Yes(Vec<usize>, Vec<Elem>),
    No,
    Limit,
    Cancelled,
}

impl Exhaustive<'_> {
    /// True iff every row of `G*M` lies in the row space of `H`; with equal
    /// ranks this is row-space equality.
    fn accepts(&self, sigma: &[usize], diag: &[Elem], buf: &mut [Elem]) -> bool {
        let f = self.field;
        let g = self.inst.g();
        for r in 0..g.rows() {
            let row = g.row(r);
            for (i, &s) in sigma.iter().enumerate() {
                buf[i] = f.mul(diag[s], row[s]);
            }
            for (p, h) in &self.h_rows {
                let c = buf[*p];
                if c.is_zero() {
                    continue;
                }
                for (x, &y) in buf.iter_mut().zip(h) {
                    *x = f.sub(*x, f.mul(c, y));
                }
            }
            if buf.iter().any(|x| !x.is_zero()) {
                return false;
            }
        }
        true
    }

    /// All permutations with `sigma[0] = first`, lexicographically.
    fn run_prefix(&self, first: usize, best: &AtomicUsize) -> Prefix {
        let n = self.inst.n();
        let mut sigma: Vec<usize> = std::iter::once(first).chain((0..n).filter(|&x| x != first)).collect();
        let mut buf = vec![Elem::ZERO; n];
        let mut idx = vec![0usize; n];
        let mut diag = vec![self.scalars[0]; n];
        loop {
            if best.load(Ordering::Relaxed) < first {
                return Prefix::Cancelled;
            }
            idx.iter_mut().for_each(|x| *x = 0);
            diag.iter_mut().for_each(|x| *x = self.scalars[0]);
            loop {
                if !self.meter.tick() {
                    return Prefix::Limit;
                }
                if self.accepts(&sigma, &diag, &mut buf) {
                    return Prefix::Yes(sigma, diag);
                }
                if !advance_odometer(&mut idx, &mut diag, &self.scalars) {
                    break;
                }
            }
            if !next_permutation(&mut sigma[1..]) {
                return Prefix::No;
            }
        }
    }
}

fn advance_odometer(idx: &mut [usize], diag: &mut [Elem], scalars: &[Elem]) -> bool {
    for j in (0..idx.len()).rev() {
        idx[j] += 1;
        if idx[j] < scalars.len() {
            diag[j] = scalars[idx[j]];
            return true;
        }
        idx[j] = 0;
        diag[j] = scalars[0];
    }
    false
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let Some(i) = (0..a.len() - 1).rev().find(|&i| a[i] < a[i + 1]) else {
        return false;
    };
    let j = (i + 1..a.len()).rev().find(|&j| a[j] > a[i]).expect("successor exists");
    a.swap(i, j);
    a[i + 1..].reverse();
    true
}

fn exhaustive(inst: &CEInstance, meter: &Meter, workers: usize) -> Found {
    let n = inst.n();
    if n == 0 {
        if !meter.tick() {
            return Found::Limit;
        }
        return witness_for(inst, vec![], vec![]).map_or(Found::No, Found::Yes);
    }
    let rref = inst.h().rref();
    let h_rows = (0..rref.rank).map(|r| (rref.pivots[r], rref.matrix.row(r).to_vec())).collect();
    let search =
        Exhaustive { inst, field: inst.field(), h_rows, scalars: inst.tag().scalars(inst.field()), meter };
    let best = AtomicUsize::new(usize::MAX);
    let run = |first: usize| {
        let r = search.run_prefix(first, &best);
        if matches!(r, Prefix::Yes(..)) {
            best.fetch_min(first, Ordering::Relaxed);
        }
        r
    };
    let results: Vec<Prefix> = if workers <= 1 {
        let mut out = Vec::new();
        for first in 0..n {
            let r = run(first);
            let stop = !matches!(r, Prefix::No);
            out.push(r);
            if stop {
                break;
            }
        }
        out
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(run).collect()),
            Err(_) => (0..n).map(run).collect(),
        }
    };
    // Ordered reduction: the first prefix that did not answer NO decides.
    for r in results {
        match r {
            Prefix::No => continue,
            Prefix::Yes(sigma, diag) => {
                return witness_for(inst, sigma, diag).map_or(Found::No, Found::Yes);
            }
            Prefix::Limit => return Found::Limit,
            Prefix::Cancelled => unreachable!("a prefix is only cancelled after an earlier YES"),
        }
    }
    Found::No
}

// -------------------------------------------------------------- backtracking

/// Column class under the tag: equal (PCE), equal up to sign (SPCE),
/// proportional (LCE).
fn class_key(field: &Field, tag: ProblemTag, v: &[Elem]) -> Vec<Elem> {
    match tag {
        ProblemTag::Pce => v.to_vec(),
        ProblemTag::Spce => {
            let neg: Vec<Elem> = v.iter().map(|&x| field.neg(x)).collect();
            neg.min(v.to_vec())
        }
        ProblemTag::Lce => direction(field, v).map_or_else(|| v.to_vec(), |(key, _)| key),
    }
}

/// `(u, c)` with `v = c*u` and the first non-zero entry of `u` equal to 1.
fn direction(field: &Field, v: &[Elem]) -> Option<(Vec<Elem>, Elem)> {
    let c = *v.iter().find(|x| !x.is_zero())?;
    let inv = field.inv(c).expect("non-zero");
    Some((v.iter().map(|&x| field.mul(inv, x)).collect(), c))
}

/// `(is_zero, class size)` for every column.
fn signatures(field: &Field, tag: ProblemTag, cols: &[Vec<Elem>]) -> Vec<(bool, usize)> {
    let keys: Vec<Vec<Elem>> = cols.iter().map(|c| class_key(field, tag, c)).collect();
    let mut counts: HashMap<&[Elem], usize> = HashMap::new();
    for k in &keys {
        *counts.entry(k.as_slice()).or_default() += 1;
    }
    cols.iter().zip(&keys).map(|(c, k)| (c.iter().all(|x| x.is_zero()), counts[k.as_slice()])).collect()
}

struct Backtracker<'a> {
    inst: &'a CEInstance,
    field: &'a Field,
    k: usize,
    g_cols: Vec<Vec<Elem>>,
    h_cols: Vec<Vec<Elem>>,
    g_sig: Vec<(bool, usize)>,
    h_sig: Vec<(bool, usize)>,
    scalars: Vec<Elem>,
    /// Direction of each non-zero source column to the ascending list of such sources.
    by_direction: HashMap<Vec<Elem>, Vec<usize>>,
    order: Vec<usize>,
    meter: &'a Meter,
    used: Vec<bool>,
    sigma: Vec<usize>,
    diag: Vec<Elem>,
    span_g: IncrementalSpan,
    span_h: IncrementalSpan,
    /// Span of the stacked vectors `(h_i, image_i)`; its rank equals both of
    /// the others exactly when a linear map sends every image to its `h_i`.
    span_joint: IncrementalSpan,
}

impl<'a> Backtracker<'a> {
    /// `None` when the class-size multisets already differ.
    fn new(inst: &'a CEInstance, meter: &'a Meter) -> Option<Backtracker<'a>> {
        let field = inst.field();
        let (k, n, tag) = (inst.k(), inst.n(), inst.tag());
        let g_cols = inst.g().columns();
        let h_cols = inst.h().columns();
        let g_sig = signatures(field, tag, &g_cols);
        let h_sig = signatures(field, tag, &h_cols);
        let (mut a, mut b) = (g_sig.clone(), h_sig.clone());
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return None;
        }

        let mut by_direction: HashMap<Vec<Elem>, Vec<usize>> = HashMap::new();
        for (j, c) in g_cols.iter().enumerate() {
            if let Some((key, _)) = direction(field, c) {
                by_direction.entry(key).or_default().push(j);
            }
        }

        // Fewest candidate sources first, then positions that grow the span of H.
        let candidates = |i: usize| g_sig.iter().filter(|&&s| s == h_sig[i]).count();
        let mut sorted: Vec<usize> = (0..n).collect();
        sorted.sort_by_key(|&i| (candidates(i), i));
        let mut span = IncrementalSpan::new(field, k);
        let mut order = Vec::with_capacity(n);
        while let Some(pos) = sorted.iter().position(|&i| !span.contains(&h_cols[i])) {
            let i = sorted.remove(pos);
            span.insert(&h_cols[i]);
            order.push(i);
        }
        order.extend(sorted);

        Some(Backtracker {
            inst,
            field,
            k,
            g_cols,
            h_cols,
            g_sig,
            h_sig,
            scalars: tag.scalars(field),
            by_direction,
            order,
            meter,
            used: vec![false; n],
            sigma: vec![0; n],
            diag: vec![Elem::ONE; n],
            span_g: IncrementalSpan::new(field, k),
            span_h: IncrementalSpan::new(field, k),
            span_joint: IncrementalSpan::new(field, 2 * k),
        })
    }

    fn run(&mut self) -> Found {
        self.dfs(0)
    }

    fn joint(&self, h: &[Elem], v: &[Elem]) -> Vec<Elem> {
        h.iter().chain(v).copied().collect()
    }

    fn assign(&mut self, depth: usize, i: usize, j: usize, d: Elem) -> Found {
        self.used[j] = true;
        self.sigma[i] = j;
        self.diag[j] = d;
        let r = self.dfs(depth + 1);
        self.used[j] = false;
        r
    }

    fn dfs(&mut self, depth: usize) -> Found {
        if !self.meter.tick() {
            return Found::Limit;
        }
        let n = self.order.len();
        if depth == n {
            return witness_for(self.inst, self.sigma.clone(), self.diag.clone()).map_or(Found::No, Found::Yes);
        }
        let i = self.order[depth];
        let h = self.h_cols[i].clone();
        let sig = self.h_sig[i];

        if sig.0 {
            // Zero columns are interchangeable; take the first free one.
            let j = (0..n).find(|&j| !self.used[j] && self.g_sig[j] == sig);
            return match j {
                Some(j) => self.assign(depth, i, j, Elem::ONE),
                None => Found::No,
            };
        }

        if self.span_h.contains(&h) {
            // The image is forced: reduce (h, 0) in the joint span to (0, -v).
            let mut x = self.joint(&h, &vec![Elem::ZERO; self.k]);
            self.span_joint.reduce(&mut x);
            debug_assert!(x[..self.k].iter().all(|e| e.is_zero()));
            let v: Vec<Elem> = x[self.k..].iter().map(|&e| self.field.neg(e)).collect();
            let Some((key, c)) = direction(self.field, &v) else {
                return Found::No;
            };
            // Sources with the same image are interchangeable, so the first fits.
            let pick = self.by_direction.get(&key).and_then(|js| {
                js.iter().find_map(|&j| {
                    if self.used[j] || self.g_sig[j] != sig {
                        return None;
                    }
                    let lead = *self.g_cols[j].iter().find(|e| !e.is_zero()).expect("non-zero column");
                    let d = self.field.div(c, lead).expect("non-zero");
                    self.scalars.contains(&d).then_some((j, d))
                })
            });
            return match pick {
                Some((j, d)) => self.assign(depth, i, j, d),
                None => Found::No,
            };
        }

        let ranks = (self.span_g.rank(), self.span_h.rank(), self.span_joint.rank());
        let mut seen: HashSet<Vec<Elem>> = HashSet::new();
        for j in 0..n {
            if self.used[j] || self.g_sig[j] != sig {
                continue;
            }
            for t in 0..self.scalars.len() {
                let d = self.scalars[t];
                let v: Vec<Elem> = self.g_cols[j].iter().map(|&x| self.field.mul(d, x)).collect();
                if self.span_g.contains(&v) || !seen.insert(v.clone()) {
                    continue;
                }
                self.span_g.insert(&v);
                self.span_h.insert(&h);
                let joint = self.joint(&h, &v);
                self.span_joint.insert(&joint);
                let r = self.assign(depth, i, j, d);
                self.span_g.truncate(ranks.0);
                self.span_h.truncate(ranks.1);
                self.span_joint.truncate(ranks.2);
                match r {
                    Found::No => continue,
                    other => return other,
                }
            }
        }
        Found::No
    }
}

// ---------------------------------------------------------------- generation

/// The generator's random source: ChaCha20 (`rand_chacha`), keyed with
/// `seed_from_u64(seed)` and split into independent sub-streams by
/// `set_stream`. Frozen: changing it changes every generated instance.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_elem<R: Rng>(field: &Field, rng: &mut R) -> Elem {
    field.elem(rng.gen_range(0..field.q() as u64)).expect("in range")
}

pub fn random_nonzero<R: Rng>(field: &Field, rng: &mut R) -> Elem {
    field.elem(rng.gen_range(1..field.q() as u64)).expect("in range")
}

pub fn random_matrix<R: Rng>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Mat {
    let data = (0..rows * cols).map(|_| random_elem(field, rng)).collect();
    Mat::from_elems(field, rows, cols, data)
}

pub fn random_invertible<R: Rng>(field: &Field, k: usize, rng: &mut R) -> Mat {
    loop {
        let s = random_matrix(field, k, k, rng);
        if s.is_invertible() {
            return s;
        }
    }
}

/// Uniform element of the monomial group named by `tag`.
pub fn random_group_element<R: Rng>(field: &Field, tag: ProblemTag, n: usize, rng: &mut R) -> MonoMat {
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.shuffle(rng);
    let scalars = tag.scalars(field);
    let diag = (0..n).map(|_| *scalars.choose(rng).expect("non-empty")).collect();
    MonoMat::new(PermMat::from_sigma(sigma).expect("shuffled identity"), diag).expect("non-zero scalars")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Planted {
    Yes,
    No,
    Unlabeled,
}

impl Planted {
    pub fn as_str(self) -> &'static str {
        match self {
            Planted::Yes => "yes",
            Planted::No => "no",
            Planted::Unlabeled => "unlabeled",
        }
    }
}

impl FromStr for Planted {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "yes" => Ok(Planted::Yes),
            "no" => Ok(Planted::No),
            "unlabeled" => Ok(Planted::Unlabeled),
            _ => Err(format!("unknown label `{s}` (expected yes, no or unlabeled)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub field: Field,
    pub k: usize,
    pub n: usize,
    pub tag: ProblemTag,
    pub planted: Planted,
    pub seed: u64,
    /// Column multiplicities of the generator, e.g. `[2, 1, 1]` for `n = 4`:
    /// three distinct non-zero columns, one of them repeated.
    pub profile: Option<Vec<usize>>,
}

impl GenSpec {
    pub fn new(field: &Field, k: usize, n: usize, tag: ProblemTag, planted: Planted, seed: u64) -> GenSpec {
        GenSpec { field: field.clone(), k, n, tag, planted, seed, profile: None }
    }

    pub fn with_profile(mut self, profile: Vec<usize>) -> GenSpec {
        self.profile = Some(profile);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub instance: CEInstance,
    /// The planted witness of a YES instance.
    pub witness: Option<Witness>,
    pub label: Planted,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

/// Largest blocklength for which NO labels are certified by exhaustive search.
pub fn no_certification_cap(field: &Field, tag: ProblemTag) -> Option<usize> {
    let q = field.q();
    match tag {
        ProblemTag::Pce => (q <= 16).then_some(6),
        ProblemTag::Spce if field.p() == 2 => (q <= 16).then_some(6),
        ProblemTag::Spce => Some(5),
        ProblemTag::Lce => (q <= 5).then_some(4),
    }
}

const NO_ATTEMPTS: usize = 64;
const NO_CERT_NODES: u64 = 10_000_000;

fn check_spec(spec: &GenSpec) -> Result<(), GenError> {
    let invalid = |m: String| Err(GenError::InvalidSpec(m));
    if spec.k > spec.n {
        return invalid(format!("k = {} exceeds n = {}; full row rank is impossible", spec.k, spec.n));
    }
    if let Some(p) = &spec.profile {
        if p.iter().any(|&c| c == 0) {
            return invalid("profile entries must be positive".into());
        }
        if p.iter().sum::<usize>() != spec.n {
            return invalid(format!("profile sums to {}, expected n = {}", p.iter().sum::<usize>(), spec.n));
        }
        if p.len() < spec.k {
            return invalid(format!("profile has {} distinct columns, fewer than k = {}", p.len(), spec.k));
        }
        let available = (spec.field.q() as u128).checked_pow(spec.k as u32).map_or(u128::MAX, |x| x - 1);
        if p.len() as u128 > available {
            return invalid(format!("profile needs {} distinct non-zero columns, only {available} exist", p.len()));
        }
    }
    Ok(())
}

/// Full-rank `k x n` matrix, honoring the multiplicity profile when given.
fn random_full_rank<R: Rng>(field: &Field, k: usize, n: usize, profile: Option<&[usize]>, rng: &mut R) -> Mat {
    loop {
        let m = match profile {
            None => random_matrix(field, k, n, rng),
            Some(counts) => {
                let mut distinct: Vec<Vec<Elem>> = Vec::with_capacity(counts.len());
                while distinct.len() < counts.len() {
                    let c: Vec<Elem> = (0..k).map(|_| random_elem(field, rng)).collect();
                    if c.iter().any(|x| !x.is_zero()) && !distinct.contains(&c) {
                        distinct.push(c);
                    }
                }
                let mut cols: Vec<Vec<Elem>> =
                    distinct.iter().zip(counts).flat_map(|(c, &t)| std::iter::repeat(c.clone()).take(t)).collect();
                cols.shuffle(rng);
                Mat::from_columns(field, k, &cols)
            }
        };
        if m.has_full_row_rank() {
            return m;
        }
    }
}

/// Seeded instance generator. Identical specs give identical instances.
pub fn generate(spec: &GenSpec) -> Result<Generated, GenError> {
    check_spec(spec)?;
    let (f, k, n, tag) = (&spec.field, spec.k, spec.n, spec.tag);
    let profile = spec.profile.as_deref();
    let mut rng = rng_for(spec.seed, 0);
    match spec.planted {
        Planted::Yes => {
            let g = random_full_rank(f, k, n, profile, &mut rng);
            let s = random_invertible(f, k, &mut rng);
            let m = random_group_element(f, tag, n, &mut rng);
            let h = s.mul(&g).and_then(|sg| sg.apply_mono(&m)).expect("shapes agree");
            let instance = CEInstance::new(g, h, tag).expect("shapes agree");
            let witness = Witness::new(s, m);
            debug_assert!(verify_witness(&instance, &witness).unwrap_or(false));
            Ok(Generated { instance, witness: Some(witness), label: Planted::Yes })
        }
        Planted::Unlabeled => {
            let g = random_full_rank(f, k, n, profile, &mut rng);
            let h = random_full_rank(f, k, n, profile, &mut rng);
            let instance = CEInstance::new(g, h, tag).expect("shapes agree");
            Ok(Generated { instance, witness: None, label: Planted::Unlabeled })
        }
        Planted::No => {
            let cap = no_certification_cap(f, tag);
            if cap.map_or(true, |c| n > c) {
                return Err(GenError::BudgetExceeded(format!(
                    "NO certification of {tag} over GF({}) is limited to n <= {}",
                    f.q(),
                    cap.map_or(0, |c| c)
                )));
            }
            let budget = SearchBudget::exhaustive().with_max_nodes(NO_CERT_NODES);
            for _ in 0..NO_ATTEMPTS {
                let g = random_full_rank(f, k, n, profile, &mut rng);
                let h = random_full_rank(f, k, n, profile, &mut rng);
                let instance = CEInstance::new(g, h, tag).expect("shapes agree");
                match decide(&instance, &budget) {
                    Decision::No => return Ok(Generated { instance, witness: None, label: Planted::No }),
                    Decision::Yes(_) => continue,
                    Decision::Unknown(_) => {
                        return Err(GenError::BudgetExceeded("exhaustive certification ran out of nodes".into()))
                    }
                }
            }
            Err(GenError::BudgetExceeded(format!("no NO instance found in {NO_ATTEMPTS} attempts")))
        }
    }
}

/// Re-randomizes the presentation: `(S1*G*M1, S2*H*M2)` for fresh invertible
/// `S1`, `S2` and group elements `M1`, `M2` of the instance's tag.
pub fn rerandomize<R: Rng>(inst: &CEInstance, rng: &mut R) -> CEInstance {
    let (f, k, n, tag) = (inst.field(), inst.k(), inst.n(), inst.tag());
    let mut side = |a: &Mat| {
        let s = random_invertible(f, k, rng);
        let m = random_group_element(f, tag, n, rng);
        s.mul(a).and_then(|x| x.apply_mono(&m)).expect("shapes agree")
    };
    let g = side(inst.g());
    let h = side(inst.h());
    CEInstance::new(g, h, tag).expect("shapes agree")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: u64) -> Field {
        Field::prime(p).unwrap()
    }

    fn mat(field: &Field, rows: &[&[u64]]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.len());
        Mat::from_rows(field, rows.len(), cols, rows).unwrap()
    }

    fn inst(field: &Field, g: &[&[u64]], h: &[&[u64]], tag: ProblemTag) -> CEInstance {
        CEInstance::new(mat(field, g), mat(field, h), tag).unwrap()
    }

    fn both(i: &CEInstance) -> [Decision; 2] {
        [decide(i, &SearchBudget::exhaustive()), decide(i, &SearchBudget::backtracking())]
    }

    #[test]
    fn identity_vs_swap_is_yes_via_swap() {
        let f2 = f(2);
        let i = inst(&f2, &[&[1, 0], &[0, 1]], &[&[0, 1], &[1, 0]], ProblemTag::Pce);
        match decide(&i, &SearchBudget::exhaustive()) {
            // Lexicographically first: sigma = identity with S = swap.
            Decision::Yes(w) => {
                assert_eq!(w.m.perm().sigma(), &[0, 1]);
                assert_eq!(w.s, mat(&f2, &[&[0, 1], &[1, 0]]));
            }
            d => panic!("expected YES, got {d:?}"),
        }
        assert!(both(&i).iter().all(Decision::is_yes));
    }

    #[test]
    fn different_weights_is_no() {
        let f2 = f(2);
        let i = inst(&f2, &[&[1, 0]], &[&[1, 1]], ProblemTag::Pce);
        assert!(both(&i).iter().all(Decision::is_no));
    }

    #[test]
    fn spce_negation() {
        let f3 = f(3);
        let i = inst(&f3, &[&[1, 2]], &[&[2, 1]], ProblemTag::Spce);
        match decide(&i, &SearchBudget::exhaustive()) {
            Decision::Yes(w) => {
                assert!(verify_witness(&i, &w).unwrap());
                // First in lexicographic order: sigma = identity, diag (1, 1) with S = [2].
                assert_eq!(w.m.perm().sigma(), &[0, 1]);
            }
            d => panic!("expected YES, got {d:?}"),
        }
        // The witness from the example also verifies.
        let w = Witness::new(
            mat(&f3, &[&[1]]),
            MonoMat::new(PermMat::identity(2), vec![f3.from_int(2), f3.from_int(2)]).unwrap(),
        );
        assert!(verify_witness(&i, &w).unwrap());
        assert!(decide(&i, &SearchBudget::backtracking()).is_yes());
    }

    #[test]
    fn tag_matters() {
        // [1,1] vs [1,2] over F_3: proportional columns only under LCE.
        let f3 = f(3);
        let g: &[&[u64]] = &[&[1, 1]];
        let h: &[&[u64]] = &[&[1, 2]];
        for (tag, yes) in [(ProblemTag::Pce, false), (ProblemTag::Spce, true), (ProblemTag::Lce, true)] {
            let i = inst(&f3, g, h, tag);
            for d in both(&i) {
                assert_eq!(d.answer(), Some(yes), "{tag}");
            }
        }
        let f5 = f(5);
        let i = inst(&f5, &[&[1, 1]], &[&[1, 2]], ProblemTag::Spce);
        assert!(both(&i).iter().all(Decision::is_no));
    }

    #[test]
    fn degenerate_shapes() {
        let f2 = f(2);
        let e = CEInstance::new(Mat::zeros(&f2, 0, 0), Mat::zeros(&f2, 0, 0), ProblemTag::Lce).unwrap();
        assert!(both(&e).iter().all(Decision::is_yes));
        let z = CEInstance::new(Mat::zeros(&f2, 2, 3), Mat::zeros(&f2, 2, 3), ProblemTag::Pce).unwrap();
        assert!(both(&z).iter().all(Decision::is_yes));
        let r = inst(&f2, &[&[1, 0, 0], &[0, 0, 0]], &[&[0, 0, 1], &[0, 0, 1]], ProblemTag::Pce);
        assert!(both(&r).iter().all(Decision::is_yes));
    }

    #[test]
    fn budget_gives_unknown() {
        let f2 = f(2);
        let i = inst(&f2, &[&[1, 0, 1, 1, 0]], &[&[1, 1, 1, 0, 1]], ProblemTag::Pce);
        let (d, stats) = decide_with_stats(&i, &SearchBudget::exhaustive().with_max_nodes(3));
        assert!(d.is_unknown());
        assert_eq!(stats.nodes, 3);
        assert_eq!(stats.exhausted, Some(Limit::Nodes));
        assert!(decide(&i, &SearchBudget::exhaustive()).is_no());
    }

    #[test]
    #[should_panic(expected = "max_nodes")]
    fn zero_node_budget_rejected() {
        let _ = SearchBudget::exhaustive().with_max_nodes(0);
    }

    #[test]
    fn workers_do_not_change_the_witness() {
        let f3 = f(3);
        for seed in 0..20 {
            let g = generate(&GenSpec::new(&f3, 2, 5, ProblemTag::Lce, Planted::Yes, seed)).unwrap();
            let one = decide(&g.instance, &SearchBudget::exhaustive());
            let four = decide(&g.instance, &SearchBudget::exhaustive().with_workers(4));
            assert!(one.is_yes());
            assert_eq!(one, four);
        }
    }

    #[test]
    fn exhaustive_and_backtracking_agree() {
        for seed in 0..150u64 {
            let mut rng = rng_for(seed, 1);
            let q = [2u64, 3, 4, 5][rng.gen_range(0..4)];
            let field = if q == 4 { Field::new(2, 2, None).unwrap() } else { f(q) };
            let n = rng.gen_range(1..=5);
            let k = rng.gen_range(1..=n.min(3));
            let tag = [ProblemTag::Pce, ProblemTag::Spce, ProblemTag::Lce][rng.gen_range(0..3)];
            let planted = if rng.gen_bool(0.5) { Planted::Yes } else { Planted::Unlabeled };
            let g = generate(&GenSpec::new(&field, k, n, tag, planted, seed)).unwrap();
            let [a, b] = both(&g.instance);
            assert_eq!(a.answer(), b.answer(), "seed {seed}");
            if planted == Planted::Yes {
                assert!(a.is_yes());
            }
        }
    }

    #[test]
    fn decision_is_invariant_under_rerandomization() {
        for seed in 0..60u64 {
            let field = f([2u64, 3, 5][(seed % 3) as usize]);
            let tag = [ProblemTag::Pce, ProblemTag::Spce, ProblemTag::Lce][(seed / 3 % 3) as usize];
            let planted = if seed % 2 == 0 { Planted::Yes } else { Planted::Unlabeled };
            let g = generate(&GenSpec::new(&field, 2, 4, tag, planted, seed)).unwrap();
            let base = decide(&g.instance, &SearchBudget::backtracking()).answer();
            let mut rng = rng_for(seed, 7);
            let moved = rerandomize(&g.instance, &mut rng);
            assert_eq!(decide(&moved, &SearchBudget::exhaustive()).answer(), base);
            assert_eq!(decide(&moved, &SearchBudget::backtracking()).answer(), base);
        }
    }

    #[test]
    fn planted_yes_verifies() {
        let f2 = f(2);
        let g = generate(&GenSpec::new(&f2, 1, 2, ProblemTag::Pce, Planted::Yes, 7)).unwrap();
        assert!(verify_witness(&g.instance, g.witness.as_ref().unwrap()).unwrap());
    }

    #[test]
    fn certified_no_is_no() {
        let f2 = f(2);
        for seed in 0..10 {
            let g = generate(&GenSpec::new(&f2, 1, 2, ProblemTag::Pce, Planted::No, seed)).unwrap();
            assert_eq!(g.label, Planted::No);
            assert!(g.witness.is_none());
            assert!(decide(&g.instance, &SearchBudget::exhaustive()).is_no());
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let f5 = f(5);
        let spec = GenSpec::new(&f5, 2, 4, ProblemTag::Lce, Planted::Yes, 42).with_profile(vec![2, 1, 1]);
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        assert_eq!(a.instance.g().column_multiplicity_profile().counts, vec![2, 1, 1]);
        let other = generate(&GenSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.instance, other.instance);
    }

    #[test]
    fn no_certification_caps() {
        let f2 = f(2);
        let f7 = f(7);
        assert_eq!(no_certification_cap(&f2, ProblemTag::Pce), Some(6));
        assert_eq!(no_certification_cap(&f(17), ProblemTag::Pce), None);
        assert_eq!(no_certification_cap(&f7, ProblemTag::Spce), Some(5));
        assert_eq!(no_certification_cap(&f(5), ProblemTag::Lce), Some(4));
        assert_eq!(no_certification_cap(&f7, ProblemTag::Lce), None);
        let too_long = GenSpec::new(&f2, 1, 7, ProblemTag::Pce, Planted::No, 0);
        assert!(matches!(generate(&too_long), Err(GenError::BudgetExceeded(_))));
        let lce = GenSpec::new(&f7, 1, 2, ProblemTag::Lce, Planted::No, 0);
        assert!(matches!(generate(&lce), Err(GenError::BudgetExceeded(_))));
    }

    #[test]
    fn invalid_specs() {
        let f2 = f(2);
        let bad = [
            GenSpec::new(&f2, 3, 2, ProblemTag::Pce, Planted::Yes, 0),
            GenSpec::new(&f2, 2, 3, ProblemTag::Pce, Planted::Yes, 0).with_profile(vec![1, 1]),
            GenSpec::new(&f2, 2, 3, ProblemTag::Pce, Planted::Yes, 0).with_profile(vec![3]),
            GenSpec::new(&f2, 1, 3, ProblemTag::Pce, Planted::Yes, 0).with_profile(vec![1, 2]),
            GenSpec::new(&f2, 1, 3, ProblemTag::Pce, Planted::Yes, 0).with_profile(vec![1, 1, 1]),
        ];
        for s in bad {
            assert!(matches!(generate(&s), Err(GenError::InvalidSpec(_))), "{s:?}");
        }
    }

    #[test]
    fn lexicographic_helpers() {
        let mut a = [0, 1, 2];
        let mut seen = vec![a.to_vec()];
        while next_permutation(&mut a) {
            seen.push(a.to_vec());
        }
        assert_eq!(seen, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]);
        let f3 = f(3);
        let sc = ProblemTag::Lce.scalars(&f3);
        let mut idx = vec![0, 0];
        let mut diag = vec![sc[0]; 2];
        let mut out = vec![diag.iter().map(|e| e.value()).collect::<Vec<_>>()];
        while advance_odometer(&mut idx, &mut diag, &sc) {
            out.push(diag.iter().map(|e| e.value()).collect());
        }
        assert_eq!(out, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }
}
