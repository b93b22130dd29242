use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::dsep::ensure_disjoint;
use super::{CausalDiagram, GraphError, MAX_ADJUSTMENT_CANDIDATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    DSeparation,
    BackDoor,
    FrontDoor,
}

/// Outcome of a graphical check, with a witness when it fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub holds: bool,
    /// 1-based clause of the definition that failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_clause: Option<u8>,
    /// Observed vertices along the violating path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_path: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_display: Option<String>,
}

impl CriterionReport {
    fn pass(criterion: Criterion) -> Self {
        CriterionReport {
            criterion,
            holds: true,
            failing_clause: None,
            failing_path: None,
            path_display: None,
        }
    }

    fn fail(criterion: Criterion, clause: u8, g: &CausalDiagram, path: Option<Vec<usize>>) -> Self {
        CriterionReport {
            criterion,
            holds: false,
            failing_clause: Some(clause),
            failing_path: path.as_ref().map(|p| g.observed_names(p)),
            path_display: path.as_ref().map(|p| g.render_path(p)),
        }
    }
}

impl CausalDiagram {
    /// d-separation as a report, with an open path as witness when it fails.
    pub fn d_separation_report<S: AsRef<str>>(&self, a: &[S], b: &[S], c: &[S]) -> Result<CriterionReport, GraphError> {
        if self.d_separated(a, b, c)? {
            return Ok(CriterionReport::pass(Criterion::DSeparation));
        }
        let (a, b, c) = (self.ids(a)?, self.ids(b)?, self.ids(c)?);
        let cond: HashSet<usize> = c.into_iter().collect();
        let targets: HashSet<usize> = b.into_iter().collect();
        let path = a.iter().find_map(|&s| self.open_path(s, &targets, &cond, false));
        Ok(CriterionReport::fail(Criterion::DSeparation, 1, self, path))
    }

    /// Back-door criterion relative to the ordered pair `(x, y)`:
    /// (1) no member of `z` descends from `x`; (2) `z` blocks every path
    /// between `x` and `y` whose first edge points into `x`.
    pub fn satisfies_backdoor<S: AsRef<str>>(&self, x: &str, y: &str, z: &[S]) -> Result<CriterionReport, GraphError> {
        let (xi, yi, zs) = self.pair_preconditions(x, y, z)?;
        let below_x = self.reach_down(&[xi]);
        if let Some(&bad) = zs.iter().find(|v| below_x.contains(v)) {
            let path = self.directed_path(xi, bad, &HashSet::new());
            return Ok(CriterionReport::fail(Criterion::BackDoor, 1, self, path));
        }
        let cond: HashSet<usize> = zs.iter().copied().collect();
        if self.active_reach(&[xi], &cond, true).contains(&yi) {
            let path = self.open_path(xi, &HashSet::from([yi]), &cond, true);
            return Ok(CriterionReport::fail(Criterion::BackDoor, 2, self, path));
        }
        Ok(CriterionReport::pass(Criterion::BackDoor))
    }

    /// Front-door criterion relative to `(x, y)`:
    /// (1) `z` intercepts every directed path from `x` to `y`;
    /// (2) no member of `z` is reachable from `x` by an unconditionally open
    ///     path whose first edge points into `x`;
    /// (3) for each member `m` of `z`, conditioning on `x` blocks every path
    ///     between `m` and `y` whose first edge points into `m`.
    pub fn satisfies_frontdoor<S: AsRef<str>>(&self, x: &str, y: &str, z: &[S]) -> Result<CriterionReport, GraphError> {
        let (xi, yi, zs) = self.pair_preconditions(x, y, z)?;
        let zset: HashSet<usize> = zs.iter().copied().collect();
        if let Some(path) = self.directed_path(xi, yi, &zset) {
            return Ok(CriterionReport::fail(Criterion::FrontDoor, 1, self, Some(path)));
        }

        let reach = self.active_reach(&[xi], &HashSet::new(), true);
        if let Some(&m) = zs.iter().find(|m| reach.contains(m)) {
            let path = self.open_path(xi, &HashSet::from([m]), &HashSet::new(), true);
            return Ok(CriterionReport::fail(Criterion::FrontDoor, 2, self, path));
        }

        let given_x = HashSet::from([xi]);
        for &m in &zs {
            if self.active_reach(&[m], &given_x, true).contains(&yi) {
                let path = self.open_path(m, &HashSet::from([yi]), &given_x, true);
                return Ok(CriterionReport::fail(Criterion::FrontDoor, 3, self, path));
            }
        }
        Ok(CriterionReport::pass(Criterion::FrontDoor))
    }

    /// Smallest subset of `candidates` satisfying the criterion; ties go to
    /// the lexicographically smallest sorted name list.
    pub fn find_adjustment_set<S: AsRef<str>>(
        &self,
        x: &str,
        y: &str,
        candidates: &[S],
        criterion: Criterion,
    ) -> Result<Option<Vec<String>>, GraphError> {
        let mut pool: Vec<String> = candidates.iter().map(|c| c.as_ref().to_string()).collect();
        pool.sort();
        pool.dedup();
        for c in &pool {
            self.id(c)?;
            if c == x || c == y {
                return Err(GraphError::Precondition(format!("candidate {c:?} is the exposure or outcome")));
            }
        }
        if pool.len() > MAX_ADJUSTMENT_CANDIDATES {
            return Err(GraphError::TooManyCandidates(pool.len()));
        }
        for size in 0..=pool.len() {
            for combo in Combinations::new(pool.len(), size) {
                let subset: Vec<&str> = combo.iter().map(|&i| pool[i].as_str()).collect();
                let report = match criterion {
                    Criterion::BackDoor => self.satisfies_backdoor(x, y, &subset)?,
                    Criterion::FrontDoor => self.satisfies_frontdoor(x, y, &subset)?,
                    Criterion::DSeparation => self.d_separation_report(&[x], &[y], &subset)?,
                };
                if report.holds {
                    return Ok(Some(subset.into_iter().map(str::to_string).collect()));
                }
            }
        }
        Ok(None)
    }

    fn pair_preconditions<S: AsRef<str>>(
        &self,
        x: &str,
        y: &str,
        z: &[S],
    ) -> Result<(usize, usize, Vec<usize>), GraphError> {
        let (xi, yi) = (self.id(x)?, self.id(y)?);
        let zs = self.ids(z)?;
        if xi == yi {
            return Err(GraphError::Precondition("exposure and outcome coincide".into()));
        }
        ensure_disjoint(self, &[&[xi], &[yi], &zs])?;
        if self.is_descendant(x, y)? {
            return Err(GraphError::Precondition(format!("{x:?} is a descendant of {y:?}")));
        }
        Ok((xi, yi, zs))
    }
}

/// Lexicographic `k`-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
