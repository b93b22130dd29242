//! Causal diagrams with latent confounders (bidirected edges), d-separation,
//! and the back-door / front-door criteria.
//!
//! Every bidirected edge `a <-> b` is expanded into a fresh latent vertex
//! `L` with edges `L -> a` and `L -> b`; all path reasoning runs on that
//! expanded DAG. Latent vertices are never observable and never conditioned on.

mod criteria;
mod dsep;
pub mod fixtures;

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use criteria::{Criterion, CriterionReport};
pub(crate) use criteria::Combinations;

/// Largest candidate pool accepted by [`CausalDiagram::find_adjustment_set`].
pub const MAX_ADJUSTMENT_CANDIDATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("invalid vertex name {0:?} (must be non-empty and contain no commas)")]
    InvalidName(String),
    #[error("vertex {0:?} declared twice")]
    DuplicateVertex(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge {0:?} - {1:?}")]
    DuplicateEdge(String, String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{0} adjustment candidates exceed the exhaustive-search limit")]
    TooManyCandidates(usize),
    #[error("diagram JSON: {0}")]
    Json(String),
}

/// Wire format: `{"vertices":[...],"directed":[["X","Y"]],"bidirected":[["X","Y"]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramJson {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub directed: Vec<(String, String)>,
    #[serde(default)]
    pub bidirected: Vec<(String, String)>,
}

/// Validated acyclic mixed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDiagram {
    names: Vec<String>,
    index: HashMap<String, usize>,
    directed: Vec<(usize, usize)>,
    bidirected: Vec<(usize, usize)>,
    /// Expanded DAG: observed vertices `0..n`, then one latent per bidirected edge.
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl CausalDiagram {
    pub fn new<S: AsRef<str>>(
        vertices: &[S],
        directed: &[(S, S)],
        bidirected: &[(S, S)],
    ) -> Result<Self, GraphError> {
        let mut names = Vec::with_capacity(vertices.len());
        let mut index = HashMap::new();
        for v in vertices {
            let v = v.as_ref();
            if v.is_empty() || v.contains(',') {
                return Err(GraphError::InvalidName(v.to_string()));
            }
            if index.insert(v.to_string(), names.len()).is_some() {
                return Err(GraphError::DuplicateVertex(v.to_string()));
            }
            names.push(v.to_string());
        }
        let lookup = |v: &S| {
            index
                .get(v.as_ref())
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(v.as_ref().to_string()))
        };

        let mut seen = HashSet::new();
        let mut dir = Vec::with_capacity(directed.len());
        for (a, b) in directed {
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                return Err(GraphError::SelfLoop(names[a].clone()));
            }
            if !seen.insert((a, b)) {
                return Err(GraphError::DuplicateEdge(names[a].clone(), names[b].clone()));
            }
            dir.push((a, b));
        }
        let mut seen = HashSet::new();
        let mut bi = Vec::with_capacity(bidirected.len());
        for (a, b) in bidirected {
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                return Err(GraphError::SelfLoop(names[a].clone()));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(names[a].clone(), names[b].clone()));
            }
            bi.push(key);
        }

        let n = names.len();
        let total = n + bi.len();
        let mut parents = vec![Vec::new(); total];
        let mut children = vec![Vec::new(); total];
        for &(a, b) in &dir {
            parents[b].push(a);
            children[a].push(b);
        }
        for (i, &(a, b)) in bi.iter().enumerate() {
            let latent = n + i;
            children[latent] = vec![a, b];
            parents[a].push(latent);
            parents[b].push(latent);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        let g = CausalDiagram {
            names,
            index,
            directed: dir,
            bidirected: bi,
            parents,
            children,
        };
        if let Some(cycle) = g.find_cycle() {
            return Err(GraphError::Cycle(cycle.iter().map(|&v| g.names[v].clone()).collect()));
        }
        Ok(g)
    }

    pub fn from_json(json: &DiagramJson) -> Result<Self, GraphError> {
        Self::new(&json.vertices, &json.directed, &json.bidirected)
    }

    pub fn parse_json(text: &str) -> Result<Self, GraphError> {
        let json: DiagramJson = serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        Self::from_json(&json)
    }

    pub fn to_json(&self) -> DiagramJson {
        let pair = |&(a, b): &(usize, usize)| (self.names[a].clone(), self.names[b].clone());
        DiagramJson {
            vertices: self.names.clone(),
            directed: self.directed.iter().map(pair).collect(),
            bidirected: self.bidirected.iter().map(pair).collect(),
        }
    }

    pub fn vertices(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn has_bidirected(&self) -> bool {
        !self.bidirected.is_empty()
    }

    /// Directed parents of an observed vertex, in declaration order.
    pub fn parents(&self, v: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.id(v)?;
        Ok(self.parents[i]
            .iter()
            .filter(|&&p| p < self.names.len())
            .map(|&p| self.names[p].as_str())
            .collect())
    }

    /// Proper descendants along directed edges only.
    pub fn descendants(&self, v: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.id(v)?;
        let mut out: Vec<usize> = self.reach_down(&[i]).into_iter().filter(|&d| d != i).collect();
        out.sort_unstable();
        Ok(out.into_iter().map(|d| self.names[d].as_str()).collect())
    }

    pub fn is_descendant(&self, v: &str, of: &str) -> Result<bool, GraphError> {
        let (v, of) = (self.id(v)?, self.id(of)?);
        Ok(v != of && self.reach_down(&[of]).contains(&v))
    }

    pub(crate) fn id(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    pub(crate) fn ids<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, GraphError> {
        names.iter().map(|n| self.id(n.as_ref())).collect()
    }

    pub(crate) fn observed_count(&self) -> usize {
        self.names.len()
    }

    pub(crate) fn expanded_len(&self) -> usize {
        self.parents.len()
    }

    pub(crate) fn expanded_parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub(crate) fn expanded_children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Vertices reachable from `start` along directed edges, including `start`.
    pub(crate) fn reach_down(&self, start: &[usize]) -> HashSet<usize> {
        let mut seen: HashSet<usize> = start.iter().copied().collect();
        let mut queue: VecDeque<usize> = start.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for &c in &self.children[v] {
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    /// Ancestors of `set`, including the set itself.
    pub(crate) fn ancestors_of(&self, set: &[usize]) -> HashSet<usize> {
        let mut seen: HashSet<usize> = set.iter().copied().collect();
        let mut queue: VecDeque<usize> = set.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for &p in &self.parents[v] {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// A shortest directed path `from -> ... -> to` avoiding `avoid` (endpoints excepted).
    pub(crate) fn directed_path(&self, from: usize, to: usize, avoid: &HashSet<usize>) -> Option<Vec<usize>> {
        let mut prev: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = HashSet::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while let Some(&p) = prev.get(&cur) {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for &c in &self.children[v] {
                if (c == to || !avoid.contains(&c)) && seen.insert(c) {
                    prev.insert(c, v);
                    queue.push_back(c);
                }
            }
        }
        None
    }

    pub(crate) fn name_of(&self, v: usize) -> &str {
        &self.names[v]
    }

    /// Kahn's algorithm; returns one directed cycle if the graph has any.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        let total = self.parents.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..total).filter(|&v| indeg[v] == 0).collect();
        let mut removed = vec![false; total];
        while let Some(v) = queue.pop_front() {
            removed[v] = true;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        let start = (0..total).find(|&v| !removed[v])?;
        // Walk parents inside the residual graph until a vertex repeats.
        let mut order = vec![start];
        let mut pos = HashMap::from([(start, 0usize)]);
        let mut cur = start;
        loop {
            let p = *self.parents[cur].iter().find(|&&p| !removed[p])?;
            if let Some(&at) = pos.get(&p) {
                let mut cycle: Vec<usize> = order[at..].to_vec();
                cycle.reverse();
                cycle.push(cycle[0]);
                return Some(cycle);
            }
            pos.insert(p, order.len());
            order.push(p);
            cur = p;
        }
    }
}
