//! Edge statistics, backbone extraction and graph contraction.
//!
//! Edges whose sample frequency reaches `tau` are fixed. The fixed set is
//! repaired into disjoint simple paths, each path becomes a super-node, and the
//! reduced distance between two entities is the cheapest distance between
//! their endpoints. Expanding a reduced tour picks every chain's orientation
//! by dynamic programming around the entity cycle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tsp::{cycle_length, order_edges, DistanceMatrix, EdgeKey, Tour, TspError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractionError {
    #[error("edge frequencies need at least one sampled tour")]
    EmptySample,
    #[error("sampled tours disagree on size: expected {expected}, found {found}")]
    MixedDimensions { expected: usize, found: usize },
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("contraction leaves {n_sub} entities; raise the threshold")]
    TooFewEntities { n_sub: usize },
    #[error("sub-tour has {found} entities, contracted instance has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Tour(#[from] TspError),
}

/// Occurrence counts of undirected edges over a sample of tours.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFrequencyTable {
    counts: BTreeMap<EdgeKey, usize>,
    sample_size: usize,
    n: usize,
}

impl EdgeFrequencyTable {
    pub fn count(&self, e: EdgeKey) -> usize {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    /// `count / sample_size`, in `[0, 1]`.
    pub fn frequency(&self, e: EdgeKey) -> f64 {
        self.count(e) as f64 / self.sample_size as f64
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges with a non-zero count, in key order.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeKey, usize)> + '_ {
        self.counts.iter().map(|(&e, &c)| (e, c))
    }

    /// Edges with `frequency >= tau`, before any repair.
    pub fn raw_fixed_edges(&self, tau: f64) -> Vec<EdgeKey> {
        let need = tau * self.sample_size as f64 - 1e-9;
        self.iter()
            .filter(|&(_, c)| c as f64 >= need)
            .map(|(e, _)| e)
            .collect()
    }
}

pub fn edge_frequencies<'a, T, I>(sample: I) -> Result<EdgeFrequencyTable, ContractionError>
where
    T: Scalar,
    I: IntoIterator<Item = &'a Tour<T>>,
{
    let mut counts = BTreeMap::new();
    let mut sample_size = 0;
    let mut n = None;
    for t in sample {
        match n {
            None => n = Some(t.len()),
            Some(m) if m != t.len() => {
                return Err(ContractionError::MixedDimensions {
                    expected: m,
                    found: t.len(),
                })
            }
            _ => {}
        }
        sample_size += 1;
        // a 3-cycle lists no edge twice; larger tours never repeat edges either
        for e in order_edges(t.order()).collect::<BTreeSet<_>>() {
            *counts.entry(e).or_insert(0) += 1;
        }
    }
    let n = n.ok_or(ContractionError::EmptySample)?;
    Ok(EdgeFrequencyTable {
        counts,
        sample_size,
        n,
    })
}

/// A fixed path, stored in walk order from `head` to `tail`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain<T> {
    nodes: Vec<usize>,
    internal_length: T,
}

impl<T: Scalar> Chain<T> {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn head(&self) -> usize {
        self.nodes[0]
    }

    pub fn tail(&self) -> usize {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn internal_length(&self) -> T {
        self.internal_length
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Repaired fixed-edge set: node degree at most 2 and no cycles.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone<T> {
    edges: BTreeSet<EdgeKey>,
    chains: Vec<Chain<T>>,
    n: usize,
}

impl<T: Scalar> Backbone<T> {
    pub fn edges(&self) -> &BTreeSet<EdgeKey> {
        &self.edges
    }

    pub fn chains(&self) -> &[Chain<T>] {
        &self.chains
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nodes covered by some chain.
    pub fn covered_nodes(&self) -> usize {
        self.chains.iter().map(Chain::len).sum()
    }

    /// Text dump: `chain: v0 v1 ...` per chain, then `freq: a b count` per fixed edge.
    pub fn dump(&self, freqs: &EdgeFrequencyTable) -> String {
        let mut out = String::new();
        for c in &self.chains {
            let nodes: Vec<String> = c.nodes.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "chain: {}", nodes.join(" "));
        }
        for &e in &self.edges {
            let _ = writeln!(out, "freq: {} {} {}", e.a, e.b, freqs.count(e));
        }
        out
    }
}

/// Weakest-first ordering: lower count, then longer, then smaller key.
fn weaker<T: Scalar>(
    x: EdgeKey,
    y: EdgeKey,
    freqs: &EdgeFrequencyTable,
    d: &DistanceMatrix<T>,
) -> Ordering {
    freqs
        .count(x)
        .cmp(&freqs.count(y))
        .then_with(|| {
            d.get(y.a, y.b)
                .partial_cmp(&d.get(x.a, x.b))
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| x.cmp(&y))
}

pub fn build_backbone<T: Scalar>(
    freqs: &EdgeFrequencyTable,
    tau: f64,
    d: &DistanceMatrix<T>,
) -> Result<Backbone<T>, ContractionError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(ContractionError::InvalidThreshold(tau));
    }
    let n = freqs.n();
    if d.n() != n {
        return Err(ContractionError::MixedDimensions {
            expected: d.n(),
            found: n,
        });
    }
    let mut edges: BTreeSet<EdgeKey> = freqs.raw_fixed_edges(tau).into_iter().collect();

    let mut incident: Vec<Vec<EdgeKey>> = vec![Vec::new(); n];
    for &e in &edges {
        incident[e.a].push(e);
        incident[e.b].push(e);
    }
    // degree repair; removals only lower degrees so one sweep suffices
    for v in 0..n {
        while incident[v].len() > 2 {
            let weakest = *incident[v]
                .iter()
                .min_by(|&&x, &&y| weaker(x, y, freqs, d))
                .expect("non-empty");
            edges.remove(&weakest);
            for end in [weakest.a, weakest.b] {
                incident[end].retain(|&e| e != weakest);
            }
        }
    }

    // remaining components are paths or cycles; open each cycle at its weakest edge
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] || incident[start].is_empty() {
            continue;
        }
        let mut comp_nodes = Vec::new();
        let mut comp_edges = BTreeSet::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            comp_nodes.push(v);
            for &e in &incident[v] {
                comp_edges.insert(e);
                let w = e.other(v);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if comp_edges.len() == comp_nodes.len() {
            let weakest = *comp_edges
                .iter()
                .min_by(|&&x, &&y| weaker(x, y, freqs, d))
                .expect("non-empty");
            edges.remove(&weakest);
            for end in [weakest.a, weakest.b] {
                incident[end].retain(|&e| e != weakest);
            }
        }
    }

    // walk each path from its smaller-index endpoint
    let mut chains = Vec::new();
    let mut used = vec![false; n];
    for v in 0..n {
        if used[v] || incident[v].len() != 1 {
            continue;
        }
        let mut nodes = vec![v];
        used[v] = true;
        let mut prev = v;
        let mut cur = incident[v][0].other(v);
        let mut length = d.get(v, cur);
        loop {
            nodes.push(cur);
            used[cur] = true;
            let next = incident[cur]
                .iter()
                .map(|e| e.other(cur))
                .find(|&w| w != prev);
            match next {
                Some(w) => {
                    length += d.get(cur, w);
                    prev = cur;
                    cur = w;
                }
                None => break,
            }
        }
        chains.push(Chain {
            nodes,
            internal_length: length,
        });
    }
    chains.sort_by_key(|c| *c.nodes.iter().min().expect("chain has nodes"));

    Ok(Backbone { edges, chains, n })
}

/// A city of the reduced instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Free(usize),
    /// Index into [`ContractedInstance::chains`].
    Super(usize),
}

#[derive(Clone, Debug)]
pub struct ContractedInstance<T> {
    entities: Vec<Entity>,
    chains: Vec<Chain<T>>,
    entity_of: Vec<usize>,
    d_sub: DistanceMatrix<T>,
}

impl<T: Scalar> ContractedInstance<T> {
    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn chains(&self) -> &[Chain<T>] {
        &self.chains
    }

    pub fn d_sub(&self) -> &DistanceMatrix<T> {
        &self.d_sub
    }

    pub fn n_sub(&self) -> usize {
        self.entities.len()
    }

    /// Size of the original instance.
    pub fn n(&self) -> usize {
        self.entity_of.len()
    }

    /// Entity index holding original node `v`.
    pub fn entity_of(&self, v: usize) -> usize {
        self.entity_of[v]
    }

    /// `(head, tail)` of an entity; a free node is both.
    pub fn endpoints(&self, entity: usize) -> (usize, usize) {
        match self.entities[entity] {
            Entity::Free(v) => (v, v),
            Entity::Super(c) => (self.chains[c].head(), self.chains[c].tail()),
        }
    }
}

/// Reduced instance over free nodes and super-nodes, ordered by smallest member.
pub fn contract<T: Scalar>(
    d: &DistanceMatrix<T>,
    bb: &Backbone<T>,
) -> Result<ContractedInstance<T>, ContractionError> {
    let n = d.n();
    if bb.n() != n {
        return Err(ContractionError::MixedDimensions {
            expected: n,
            found: bb.n(),
        });
    }
    let mut chain_of = vec![None; n];
    for (c, chain) in bb.chains.iter().enumerate() {
        for &v in &chain.nodes {
            chain_of[v] = Some(c);
        }
    }
    let mut entities = Vec::new();
    let mut entity_of = vec![usize::MAX; n];
    for v in 0..n {
        if entity_of[v] != usize::MAX {
            continue;
        }
        let idx = entities.len();
        match chain_of[v] {
            None => {
                entities.push(Entity::Free(v));
                entity_of[v] = idx;
            }
            Some(c) => {
                entities.push(Entity::Super(c));
                for &w in &bb.chains[c].nodes {
                    entity_of[w] = idx;
                }
            }
        }
    }
    let n_sub = entities.len();
    if n_sub < 3 {
        return Err(ContractionError::TooFewEntities { n_sub });
    }
    // keep chain ids aligned with entity order
    let mut chains = Vec::with_capacity(bb.chains.len());
    for e in entities.iter_mut() {
        if let Entity::Super(c) = e {
            chains.push(bb.chains[*c].clone());
            *c = chains.len() - 1;
        }
    }
    let ends: Vec<[usize; 2]> = entities
        .iter()
        .map(|e| match *e {
            Entity::Free(v) => [v, v],
            Entity::Super(c) => [chains[c].head(), chains[c].tail()],
        })
        .collect();
    let d_sub = DistanceMatrix::from_fn(n_sub, |x, y| {
        let mut best = d.get(ends[x][0], ends[y][0]);
        for &p in &ends[x] {
            for &q in &ends[y] {
                let v = d.get(p, q);
                if v < best {
                    best = v;
                }
            }
        }
        best
    })?;
    Ok(ContractedInstance {
        entities,
        chains,
        entity_of,
        d_sub,
    })
}

/// Entry and exit node of entity `e` in orientation `s` (0 = head first).
fn entry_exit<T: Scalar>(ci: &ContractedInstance<T>, e: usize, s: usize) -> (usize, usize) {
    let (h, t) = ci.endpoints(e);
    if s == 0 {
        (h, t)
    } else {
        (t, h)
    }
}

fn states<T: Scalar>(ci: &ContractedInstance<T>, e: usize) -> usize {
    match ci.entities[e] {
        Entity::Free(_) => 1,
        Entity::Super(_) => 2,
    }
}

/// Expands a tour over entities into a full tour, choosing chain orientations
/// that minimise the total connection length.
pub fn expand_tour<T: Scalar>(
    sub: &Tour<T>,
    ci: &ContractedInstance<T>,
    d: &DistanceMatrix<T>,
) -> Result<Tour<T>, ContractionError> {
    let orientation = best_orientations(sub.order(), ci, d)?;
    expand_with_orientations(sub.order(), &orientation, ci, d)
}

/// Optimal orientation per position of `order` (0 for free nodes).
pub fn best_orientations<T: Scalar>(
    order: &[usize],
    ci: &ContractedInstance<T>,
    d: &DistanceMatrix<T>,
) -> Result<Vec<usize>, ContractionError> {
    let m = ci.n_sub();
    if order.len() != m {
        return Err(ContractionError::DimensionMismatch {
            expected: m,
            found: order.len(),
        });
    }
    crate::tsp::check_permutation(order, m)?;
    if d.n() != ci.n() {
        return Err(ContractionError::MixedDimensions {
            expected: ci.n(),
            found: d.n(),
        });
    }

    let mut best_total: Option<T> = None;
    let mut best_choice = vec![0; m];
    for s0 in 0..states(ci, order[0]) {
        // cost[p][s]: cheapest connections from entity 0 (state s0) to position p in state s
        let mut cost = vec![[T::zero(); 2]; m];
        let mut parent = vec![[0usize; 2]; m];
        cost[0] = [T::zero(), T::zero()];
        for p in 1..m {
            let (e_prev, e) = (order[p - 1], order[p]);
            for s in 0..states(ci, e) {
                let (entry, _) = entry_exit(ci, e, s);
                let mut best: Option<(T, usize)> = None;
                let prev_states: Vec<usize> = if p == 1 {
                    vec![s0]
                } else {
                    (0..states(ci, e_prev)).collect()
                };
                for ps in prev_states {
                    let (_, exit) = entry_exit(ci, e_prev, ps);
                    let c = cost[p - 1][ps] + d.get(exit, entry);
                    if best.map_or(true, |(b, _)| c < b) {
                        best = Some((c, ps));
                    }
                }
                let (c, ps) = best.expect("at least one predecessor state");
                cost[p][s] = c;
                parent[p][s] = ps;
            }
        }
        let (entry0, _) = entry_exit(ci, order[0], s0);
        let last = order[m - 1];
        for s in 0..states(ci, last) {
            let (_, exit) = entry_exit(ci, last, s);
            let total = cost[m - 1][s] + d.get(exit, entry0);
            if best_total.map_or(true, |b| total < b) {
                best_total = Some(total);
                let mut choice = vec![0; m];
                choice[m - 1] = s;
                for p in (1..m).rev() {
                    choice[p - 1] = parent[p][choice[p]];
                }
                choice[0] = s0;
                best_choice = choice;
            }
        }
    }
    Ok(best_choice)
}

/// Expansion under explicit orientations (one per position of `order`).
pub fn expand_with_orientations<T: Scalar>(
    order: &[usize],
    orientation: &[usize],
    ci: &ContractedInstance<T>,
    d: &DistanceMatrix<T>,
) -> Result<Tour<T>, ContractionError> {
    let m = ci.n_sub();
    if order.len() != m || orientation.len() != m {
        return Err(ContractionError::DimensionMismatch {
            expected: m,
            found: order.len().min(orientation.len()),
        });
    }
    crate::tsp::check_permutation(order, m)?;
    let mut full = Vec::with_capacity(ci.n());
    for (&e, &s) in order.iter().zip(orientation) {
        match ci.entities[e] {
            Entity::Free(v) => full.push(v),
            Entity::Super(c) => {
                let nodes = &ci.chains[c].nodes;
                if s == 0 {
                    full.extend_from_slice(nodes);
                } else {
                    full.extend(nodes.iter().rev());
                }
            }
        }
    }
    let length = cycle_length(&full, d);
    Ok(Tour::from_parts(full, length))
}

/// Warm-start tour over entities: entities in order of first appearance along
/// `reference`. When `reference` breaks some backbone edge, the shorter of that
/// order and a nearest-neighbour tour over the reduced matrix is used.
pub fn derive_seed_subtour<T: Scalar>(
    reference: &Tour<T>,
    ci: &ContractedInstance<T>,
) -> Result<Tour<T>, ContractionError> {
    if reference.len() != ci.n() {
        return Err(ContractionError::DimensionMismatch {
            expected: ci.n(),
            found: reference.len(),
        });
    }
    let mut placed = vec![false; ci.n_sub()];
    let mut order = Vec::with_capacity(ci.n_sub());
    for &v in reference.order() {
        let e = ci.entity_of(v);
        if !placed[e] {
            placed[e] = true;
            order.push(e);
        }
    }
    let first = Tour::new(order, ci.d_sub())?;
    if contains_backbone(reference, ci) {
        return Ok(first);
    }
    let nn = nearest_neighbour_tour(ci.d_sub(), ci.entity_of(reference.order()[0]));
    Ok(if nn.length() < first.length() {
        nn
    } else {
        first
    })
}

/// True when every chain of `ci` is traversed contiguously by `t`.
pub fn contains_backbone<T: Scalar>(t: &Tour<T>, ci: &ContractedInstance<T>) -> bool {
    let edges = t.edges();
    ci.chains().iter().all(|c| {
        c.nodes()
            .windows(2)
            .all(|w| edges.contains(&EdgeKey::new(w[0], w[1])))
    })
}

/// Greedy nearest-neighbour tour from `start`.
pub fn nearest_neighbour_tour<T: Scalar>(d: &DistanceMatrix<T>, start: usize) -> Tour<T> {
    let n = d.n();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let mut best: Option<(T, usize)> = None;
        for (w, seen) in visited.iter().enumerate() {
            if !seen && best.map_or(true, |(b, _)| d.get(cur, w) < b) {
                best = Some((d.get(cur, w), w));
            }
        }
        let (_, w) = best.expect("unvisited node remains");
        visited[w] = true;
        order.push(w);
        cur = w;
    }
    let length = cycle_length(&order, d);
    Tour::from_parts(order, length)
}

/// Percentage of nodes removed by contraction.
pub fn compression_rate(n: usize, n_sub: usize) -> f64 {
    assert!(n_sub >= 1 && n_sub <= n, "need 1 <= n_sub <= n");
    100.0 * (n - n_sub) as f64 / n as f64
}
