use std::collections::HashSet;

use super::{CausalDiagram, GraphError};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Arrival {
    /// Reached the vertex by walking against an edge (came up from a child).
    FromChild,
    /// Reached the vertex along an edge (came down from a parent).
    FromParent,
}

impl CausalDiagram {
    /// Whether `c` d-separates `a` from `b`. Sets must be pairwise disjoint.
    pub fn d_separated<S: AsRef<str>>(&self, a: &[S], b: &[S], c: &[S]) -> Result<bool, GraphError> {
        let (a, b, c) = (self.ids(a)?, self.ids(b)?, self.ids(c)?);
        ensure_disjoint(self, &[&a, &b, &c])?;
        let cond: HashSet<usize> = c.into_iter().collect();
        let reach = self.active_reach(&a, &cond, false);
        Ok(!b.iter().any(|v| reach.contains(v)))
    }

    /// Every vertex joined to some source by a path that `cond` leaves open.
    ///
    /// With `first_edge_into_source`, only paths whose first edge points into
    /// the source are considered and the sources may not be revisited.
    pub(crate) fn active_reach(
        &self,
        sources: &[usize],
        cond: &HashSet<usize>,
        first_edge_into_source: bool,
    ) -> HashSet<usize> {
        let cond_vec: Vec<usize> = cond.iter().copied().collect();
        let opens_collider = self.ancestors_of(&cond_vec);
        let forbidden: HashSet<usize> = if first_edge_into_source {
            sources.iter().copied().collect()
        } else {
            HashSet::new()
        };

        let mut stack: Vec<(usize, Arrival)> = Vec::new();
        for &s in sources {
            if first_edge_into_source {
                stack.extend(self.expanded_parents(s).iter().map(|&p| (p, Arrival::FromChild)));
            } else {
                stack.push((s, Arrival::FromChild));
            }
        }
        let mut visited: HashSet<(usize, Arrival)> = HashSet::new();
        let mut reach = HashSet::new();
        while let Some((v, arrival)) = stack.pop() {
            if forbidden.contains(&v) || !visited.insert((v, arrival)) {
                continue;
            }
            let conditioned = cond.contains(&v);
            if !conditioned {
                reach.insert(v);
            }
            match arrival {
                Arrival::FromChild if !conditioned => {
                    stack.extend(self.expanded_parents(v).iter().map(|&p| (p, Arrival::FromChild)));
                    stack.extend(self.expanded_children(v).iter().map(|&c| (c, Arrival::FromParent)));
                }
                Arrival::FromChild => {}
                Arrival::FromParent => {
                    if !conditioned {
                        stack.extend(self.expanded_children(v).iter().map(|&c| (c, Arrival::FromParent)));
                    }
                    if opens_collider.contains(&v) {
                        stack.extend(self.expanded_parents(v).iter().map(|&p| (p, Arrival::FromChild)));
                    }
                }
            }
        }
        reach.retain(|&v| v < self.observed_count());
        reach
    }

    /// A simple path from `from` to some target that `cond` leaves open.
    ///
    /// Depth-first over simple paths; only used to produce witnesses after
    /// [`Self::active_reach`] has already established that one exists.
    pub(crate) fn open_path(
        &self,
        from: usize,
        targets: &HashSet<usize>,
        cond: &HashSet<usize>,
        first_edge_into_source: bool,
    ) -> Option<Vec<usize>> {
        let cond_vec: Vec<usize> = cond.iter().copied().collect();
        let opens_collider = self.ancestors_of(&cond_vec);
        let mut path = vec![from];
        let mut on_path = vec![false; self.expanded_len()];
        on_path[from] = true;
        // (vertex, arrived with arrowhead at it)
        let first: Vec<(usize, bool)> = self
            .expanded_parents(from)
            .iter()
            .map(|&p| (p, false))
            .chain(
                self.expanded_children(from)
                    .iter()
                    .filter(|_| !first_edge_into_source)
                    .map(|&c| (c, true)),
            )
            .collect();
        for (next, head_at_next) in first {
            if self.extend_open(next, head_at_next, targets, cond, &opens_collider, &mut path, &mut on_path) {
                return Some(path);
            }
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_open(
        &self,
        v: usize,
        head_at_v: bool,
        targets: &HashSet<usize>,
        cond: &HashSet<usize>,
        opens_collider: &HashSet<usize>,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
    ) -> bool {
        if on_path[v] {
            return false;
        }
        path.push(v);
        if targets.contains(&v) {
            return true;
        }
        on_path[v] = true;
        let steps = self
            .expanded_parents(v)
            .iter()
            .map(|&p| (p, true))
            .chain(self.expanded_children(v).iter().map(|&c| (c, false)));
        for (next, head_at_v_again) in steps {
            let collider = head_at_v && head_at_v_again;
            let passes = if collider {
                opens_collider.contains(&v)
            } else {
                !cond.contains(&v)
            };
            if passes {
                // Leaving toward a parent means the arrowhead is at `v`, not `next`.
                let head_at_next = !head_at_v_again;
                if self.extend_open(next, head_at_next, targets, cond, opens_collider, path, on_path) {
                    return true;
                }
            }
        }
        on_path[v] = false;
        path.pop();
        false
    }

    /// Observed vertices of an expanded path; latent vertices are dropped.
    pub(crate) fn observed_names(&self, path: &[usize]) -> Vec<String> {
        path.iter()
            .filter(|&&v| v < self.observed_count())
            .map(|&v| self.name_of(v).to_string())
            .collect()
    }

    /// Renders an expanded path as `X <- Z -> Y`, with `<->` for latent forks.
    pub(crate) fn render_path(&self, path: &[usize]) -> String {
        let n = self.observed_count();
        let mut out = String::new();
        let mut i = 0;
        while i < path.len() {
            let v = path[i];
            if v >= n {
                i += 1;
                continue;
            }
            out.push_str(self.name_of(v));
            if i + 1 < path.len() {
                let next = path[i + 1];
                if next >= n {
                    out.push_str(" <-> ");
                } else if self.expanded_children(v).contains(&next) {
                    out.push_str(" -> ");
                } else {
                    out.push_str(" <- ");
                }
            }
            i += 1;
        }
        out
    }
}

pub(crate) fn ensure_disjoint(g: &CausalDiagram, sets: &[&[usize]]) -> Result<(), GraphError> {
    let mut seen = HashSet::new();
    for set in sets {
        let mut local = HashSet::new();
        for &v in *set {
            if !local.insert(v) {
                continue;
            }
            if !seen.insert(v) {
                return Err(GraphError::Precondition(format!(
                    "vertex {:?} appears in more than one set",
                    g.name_of(v)
                )));
            }
        }
    }
    Ok(())
}
