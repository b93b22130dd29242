//! Brute-force d-separation: enumerate simple paths of the mixed graph and
//! apply the blocking rules directly. Bidirected edges carry arrowheads at
//! both ends and never create descendants.

use latentid::CausalDiagram;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Mixed {
    pub n: usize,
    pub directed: Vec<(usize, usize)>,
    pub bidirected: Vec<(usize, usize)>,
}

impl Mixed {
    pub fn names(&self) -> Vec<String> {
        (0..self.n).map(|i| format!("V{i}")).collect()
    }

    pub fn diagram(&self) -> CausalDiagram {
        let names = self.names();
        let pair = |&(a, b): &(usize, usize)| (names[a].clone(), names[b].clone());
        let d: Vec<_> = self.directed.iter().map(pair).collect();
        let b: Vec<_> = self.bidirected.iter().map(pair).collect();
        CausalDiagram::new(&names, &d, &b).unwrap()
    }

    /// `v` or a directed descendant of `v` lies in `c`.
    fn opens(&self, v: usize, c: &[bool]) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut seen[u], true) {
                continue;
            }
            if c[u] {
                return true;
            }
            stack.extend(self.directed.iter().filter(|e| e.0 == u).map(|e| e.1));
        }
        false
    }

    /// Edges at `v` as `(other end, arrowhead at v, arrowhead at other)`.
    fn incident(&self, v: usize) -> Vec<(usize, bool, bool)> {
        let mut out = Vec::new();
        for &(a, b) in &self.directed {
            if a == v {
                out.push((b, false, true));
            } else if b == v {
                out.push((a, true, false));
            }
        }
        for &(a, b) in &self.bidirected {
            if a == v {
                out.push((b, true, true));
            } else if b == v {
                out.push((a, true, true));
            }
        }
        out
    }

    /// Some simple path from a vertex of `a` to a vertex of `b` is open given `c`.
    pub fn connected(&self, a: &[bool], b: &[bool], c: &[bool]) -> bool {
        (0..self.n).filter(|&s| a[s]).any(|s| {
            let mut on = vec![false; self.n];
            on[s] = true;
            self.incident(s).into_iter().any(|(w, _, head_w)| self.step(w, head_w, &mut on, b, c))
        })
    }

    /// Arrive at `v` (arrowhead at `v` iff `head_in`) and continue.
    fn step(&self, v: usize, head_in: bool, on: &mut [bool], b: &[bool], c: &[bool]) -> bool {
        if on[v] {
            return false;
        }
        if b[v] {
            return true;
        }
        on[v] = true;
        let found = self.incident(v).into_iter().any(|(w, head_v, head_w)| {
            let collider = head_in && head_v;
            let open = if collider { self.opens(v, c) } else { !c[v] };
            open && self.step(w, head_w, on, b, c)
        });
        on[v] = false;
        found
    }
}

pub fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut done = 0;
    while let Some(v) = ready.pop() {
        done += 1;
        for &(a, b) in edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    done == n
}

/// Every DAG on `n` labeled vertices.
pub fn all_dags(n: usize) -> Vec<Mixed> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut c = code;
        let mut directed = Vec::new();
        for &(a, b) in &pairs {
            match c % 3 {
                1 => directed.push((a, b)),
                2 => directed.push((b, a)),
                _ => {}
            }
            c /= 3;
        }
        if is_acyclic(n, &directed) {
            out.push(Mixed { n, directed, bidirected: vec![] });
        }
    }
    out
}

pub fn agrees(g: &Mixed, d: &CausalDiagram, roles: &[u8]) -> bool {
    let names = g.names();
    let pick = |r: u8| -> Vec<&str> { (0..g.n).filter(|&v| roles[v] == r).map(|v| names[v].as_str()).collect() };
    let mask = |r: u8| -> Vec<bool> { roles.iter().map(|&x| x == r).collect() };
    let fast = d.d_separated(&pick(1), &pick(2), &pick(3)).unwrap();
    let slow = !g.connected(&mask(1), &mask(2), &mask(3));
    fast == slow
}

pub fn random_mixed(rng: &mut ChaCha8Rng, n: usize) -> Mixed {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let density = rng.random_range(0.15..0.6);
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                directed.push((order[i], order[j]));
            }
            if rng.random_bool(0.1) {
                bidirected.push((order[i], order[j]));
            }
        }
    }
    Mixed { n, directed, bidirected }
}

