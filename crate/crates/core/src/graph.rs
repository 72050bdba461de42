//! Security graphs and minimum spanning security trees.
//!
//! Vertices are agents `0..n`. An edge is an available pairwise secure channel
//! carrying an exact rational cost, a per-bit flip probability and a correlation
//! sign. Every edge must touch at least one agent of the source set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for AgentId {
    fn from(v: usize) -> Self {
        AgentId(v)
    }
}

/// Unordered edge identity, stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub a: AgentId,
    pub b: AgentId,
}

impl EdgeKey {
    pub fn new(x: AgentId, y: AgentId) -> Self {
        if x <= y {
            EdgeKey { a: x, b: y }
        } else {
            EdgeKey { a: y, b: x }
        }
    }

    pub fn touches(&self, v: AgentId) -> bool {
        self.a == v || self.b == v
    }

    /// The endpoint that is not `v`. Panics if `v` is not an endpoint.
    pub fn other(&self, v: AgentId) -> AgentId {
        if self.a == v {
            self.b
        } else if self.b == v {
            self.a
        } else {
            panic!("agent {v} is not an endpoint of {self}")
        }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEdge {
    pub a: AgentId,
    pub b: AgentId,
    pub weight: Rational,
    /// Probability that the b-side copy of a position is flipped.
    pub flip_prob: f64,
    /// The raw pairwise outcomes are complements of each other.
    pub anti_correlated: bool,
}

impl WeightedEdge {
    /// Builds an edge with endpoints normalised to `(min, max)`.
    pub fn new(
        x: usize,
        y: usize,
        weight: Rational,
        flip_prob: f64,
        anti_correlated: bool,
    ) -> Self {
        let key = EdgeKey::new(AgentId(x), AgentId(y));
        WeightedEdge {
            a: key.a,
            b: key.b,
            weight,
            flip_prob,
            anti_correlated,
        }
    }

    /// Noiseless, correlated edge with the given integer weight.
    pub fn simple(x: usize, y: usize, weight: u64) -> Self {
        Self::new(x, y, Rational::from_integer(weight), 0.0, false)
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewAgents {
        n: usize,
    },
    EmptySources,
    SourceOutOfRange {
        source: AgentId,
    },
    EndpointOutOfRange {
        edge: usize,
        key: EdgeKey,
    },
    SelfLoop {
        edge: usize,
        agent: AgentId,
    },
    DuplicateEdge {
        first: usize,
        second: usize,
        key: EdgeKey,
    },
    NoSourceEndpoint {
        edge: usize,
        key: EdgeKey,
    },
    FlipProbOutOfRange {
        edge: usize,
        key: EdgeKey,
        flip_prob: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewAgents { n } => write!(f, "need at least 2 agents, got {n}"),
            Violation::EmptySources => write!(f, "source set is empty"),
            Violation::SourceOutOfRange { source } => {
                write!(f, "source {source} is not an agent")
            }
            Violation::EndpointOutOfRange { edge, key } => {
                write!(
                    f,
                    "edge #{edge} {key} has an endpoint outside the agent range"
                )
            }
            Violation::SelfLoop { edge, agent } => {
                write!(f, "edge #{edge} is a self-loop on agent {agent}")
            }
            Violation::DuplicateEdge { first, second, key } => {
                write!(f, "edge #{second} duplicates edge #{first} {key}")
            }
            Violation::NoSourceEndpoint { edge, key } => {
                write!(f, "edge #{edge} {key} has no endpoint in the source set")
            }
            Violation::FlipProbOutOfRange {
                edge,
                key,
                flip_prob,
            } => write!(
                f,
                "edge #{edge} {key} has flip probability {flip_prob} outside [0, 0.5)"
            ),
        }
    }
}

/// Outcome of [`SecurityGraph::validate`]; violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid security graph:\n{0}")]
    Invalid(ValidationReport),
    #[error("security graph is disconnected; components: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<AgentId>> },
    #[error("root {root} out of range for {n} agents")]
    RootOutOfRange { root: AgentId, n: usize },
    #[error("edges do not form a spanning tree on {n} agents")]
    NotATree { n: usize },
}

pub fn format_components(components: &[Vec<AgentId>]) -> String {
    components
        .iter()
        .map(|c| {
            let ids: Vec<String> = c.iter().map(|a| a.to_string()).collect();
            format!("{{{}}}", ids.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityGraph {
    pub n: usize,
    pub edges: Vec<WeightedEdge>,
    /// Agents able to originate pairwise key material.
    pub sources: BTreeSet<AgentId>,
}

impl SecurityGraph {
    pub fn new(
        n: usize,
        edges: Vec<WeightedEdge>,
        sources: impl IntoIterator<Item = usize>,
    ) -> Self {
        SecurityGraph {
            n,
            edges,
            sources: sources.into_iter().map(AgentId).collect(),
        }
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n).map(AgentId)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.n < 2 {
            violations.push(Violation::TooFewAgents { n: self.n });
        }
        if self.sources.is_empty() {
            violations.push(Violation::EmptySources);
        }
        for &s in &self.sources {
            if s.0 >= self.n {
                violations.push(Violation::SourceOutOfRange { source: s });
            }
        }
        let mut seen: BTreeMap<EdgeKey, usize> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            let key = e.key();
            if key.b.0 >= self.n {
                violations.push(Violation::EndpointOutOfRange { edge: i, key });
            }
            if key.a == key.b {
                violations.push(Violation::SelfLoop {
                    edge: i,
                    agent: key.a,
                });
            }
            match seen.get(&key) {
                Some(&first) => violations.push(Violation::DuplicateEdge {
                    first,
                    second: i,
                    key,
                }),
                None => {
                    seen.insert(key, i);
                }
            }
            if !self.sources.contains(&key.a) && !self.sources.contains(&key.b) {
                violations.push(Violation::NoSourceEndpoint { edge: i, key });
            }
            if !(0.0..0.5).contains(&e.flip_prob) {
                violations.push(Violation::FlipProbOutOfRange {
                    edge: i,
                    key,
                    flip_prob: e.flip_prob,
                });
            }
        }
        ValidationReport { violations }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            if e.a.0 < self.n && e.b.0 < self.n && e.a != e.b {
                adj[e.a.0].push(e.b.0);
                adj[e.b.0].push(e.a.0);
            }
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<AgentId>> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![];
            let mut queue = VecDeque::from([start]);
            label[start] = id;
            while let Some(v) = queue.pop_front() {
                members.push(AgentId(v));
                for &u in &adj[v] {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        queue.push_back(u);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out
    }

    /// Every agent reachable from agent 0.
    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components().len() == 1
    }

    fn require_spannable(&self) -> Result<(), GraphError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(GraphError::Invalid(report));
        }
        let components = self.components();
        if components.len() != 1 {
            return Err(GraphError::Disconnected { components });
        }
        Ok(())
    }

    /// Edge indices ordered by `(weight, index)`, the tie-breaking order of both MST routes.
    fn by_cost(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&i, &j| {
            self.edges[i]
                .weight
                .cmp(&self.edges[j].weight)
                .then(i.cmp(&j))
        });
        order
    }

    /// Minimum spanning security tree by Kruskal's algorithm.
    ///
    /// Equal weights are broken by the lower index in `self.edges`, so the result is
    /// the unique minimum under the strict `(weight, index)` order.
    pub fn mst_kruskal(&self) -> Result<SpanningTree, GraphError> {
        self.require_spannable()?;
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        let mut chosen = Vec::with_capacity(self.n - 1);
        for i in self.by_cost() {
            let e = &self.edges[i];
            let (ra, rb) = (find(&mut parent, e.a.0), find(&mut parent, e.b.0));
            if ra != rb {
                parent[ra] = rb;
                chosen.push(e.clone());
                if chosen.len() == self.n - 1 {
                    break;
                }
            }
        }
        SpanningTree::from_edges(self.n, chosen)
    }

    /// Minimum spanning security tree grown from `root` by Prim's algorithm, with the
    /// same `(weight, index)` tie-breaking as [`SecurityGraph::mst_kruskal`].
    pub fn mst_prim(&self, root: AgentId) -> Result<SpanningTree, GraphError> {
        if root.0 >= self.n {
            return Err(GraphError::RootOutOfRange { root, n: self.n });
        }
        self.require_spannable()?;
        let order = self.by_cost();
        let mut in_tree = vec![false; self.n];
        in_tree[root.0] = true;
        let mut chosen = Vec::with_capacity(self.n - 1);
        while chosen.len() < self.n - 1 {
            // First crossing edge in cost order is the cheapest.
            let next = order
                .iter()
                .copied()
                .find(|&i| {
                    let e = &self.edges[i];
                    in_tree[e.a.0] != in_tree[e.b.0]
                })
                .ok_or(GraphError::NotATree { n: self.n })?;
            let e = &self.edges[next];
            in_tree[e.a.0] = true;
            in_tree[e.b.0] = true;
            chosen.push(e.clone());
        }
        SpanningTree::from_edges(self.n, chosen)
    }
}

/// A spanning tree, edges sorted by [`EdgeKey`].
///
/// The position of an edge in [`SpanningTree::edges`] is its tree edge index, used to
/// key random substreams and edge assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub n: usize,
    pub edges: Vec<WeightedEdge>,
    pub total_weight: Rational,
    /// Per agent: `(neighbor, tree edge index)` sorted by neighbor.
    neighbors: Vec<Vec<(AgentId, usize)>>,
}

impl SpanningTree {
    /// Checks that `edges` form a spanning tree on `n` agents.
    pub fn from_edges(n: usize, mut edges: Vec<WeightedEdge>) -> Result<Self, GraphError> {
        if n < 2 || edges.len() != n - 1 {
            return Err(GraphError::NotATree { n });
        }
        edges.sort_by_key(|e| e.key());
        let mut neighbors = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.b.0 >= n || e.a == e.b {
                return Err(GraphError::NotATree { n });
            }
            neighbors[e.a.0].push((e.b, i));
            neighbors[e.b.0].push((e.a, i));
        }
        for list in &mut neighbors {
            list.sort();
        }
        // n-1 edges + connected => acyclic.
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &neighbors[v] {
                if !seen[u.0] {
                    seen[u.0] = true;
                    count += 1;
                    queue.push_back(u.0);
                }
            }
        }
        if count != n {
            return Err(GraphError::NotATree { n });
        }
        let total_weight = edges.iter().map(|e| e.weight).sum();
        Ok(SpanningTree {
            n,
            edges,
            total_weight,
            neighbors,
        })
    }

    pub fn keys(&self) -> Vec<EdgeKey> {
        self.edges.iter().map(|e| e.key()).collect()
    }

    pub fn edge_index(&self, key: EdgeKey) -> Option<usize> {
        self.edges.binary_search_by_key(&key, |e| e.key()).ok()
    }

    /// Neighbors of `v` with the connecting edge index, ascending by neighbor.
    pub fn neighbors(&self, v: AgentId) -> &[(AgentId, usize)] {
        &self.neighbors[v.0]
    }

    /// Incident edge indices of `v`, ascending by edge key.
    pub fn incident(&self, v: AgentId) -> Vec<usize> {
        let mut idx: Vec<usize> = self.neighbors[v.0].iter().map(|&(_, i)| i).collect();
        idx.sort();
        idx
    }

    pub fn degree(&self, v: AgentId) -> usize {
        self.neighbors[v.0].len()
    }

    pub fn is_terminal(&self, v: AgentId) -> bool {
        self.degree(v) == 1
    }

    /// Vertices of degree exactly one.
    pub fn terminal_agents(&self) -> BTreeSet<AgentId> {
        (0..self.n)
            .map(AgentId)
            .filter(|&v| self.is_terminal(v))
            .collect()
    }

    /// Vertices of degree at least two, in ascending order.
    pub fn non_terminal_agents(&self) -> Vec<AgentId> {
        (0..self.n)
            .map(AgentId)
            .filter(|&v| self.degree(v) >= 2)
            .collect()
    }

    /// The unique simple path from `from` to `to`, in walking order.
    pub fn path(&self, from: AgentId, to: AgentId) -> Vec<&WeightedEdge> {
        if from == to {
            return Vec::new();
        }
        let mut via: Vec<Option<(AgentId, usize)>> = vec![None; self.n];
        let mut seen = vec![false; self.n];
        seen[from.0] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &(u, e) in &self.neighbors[v.0] {
                if !seen[u.0] {
                    seen[u.0] = true;
                    via[u.0] = Some((v, e));
                    queue.push_back(u);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = to;
        while let Some((prev, e)) = via[cur.0] {
            out.push(&self.edges[e]);
            cur = prev;
        }
        out.reverse();
        out
    }
}
