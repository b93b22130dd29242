//! Random discrete Bayesian networks with exact conditional tables.

use latentid::rational::{int, Rational};
use latentid::table::Odometer;
use latentid::{JointTable, Variable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Net {
    pub vars: Vec<Variable>,
    pub parents: Vec<Vec<usize>>,
    /// `cpt[v][parent configuration][value]`.
    pub cpt: Vec<Vec<Vec<Rational>>>,
}

/// Conditional rows drawn from integer weights in `1..=9`.
pub fn random_net(rng: &mut ChaCha8Rng, names: &[String], edges: &[(usize, usize)], max_card: usize) -> Net {
    let n = names.len();
    let vars: Vec<Variable> = names
        .iter()
        .map(|name| {
            let card = rng.random_range(2..=max_card);
            let lower = name.to_lowercase();
            Variable::new(name.as_str(), (0..card).map(|c| format!("{lower}{c}")))
        })
        .collect();
    let parents: Vec<Vec<usize>> = (0..n).map(|v| edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()).collect();
    let cpt = (0..n)
        .map(|v| {
            let configs: usize = parents[v].iter().map(|&p| vars[p].card()).product();
            (0..configs)
                .map(|_| {
                    let w: Vec<i64> = (0..vars[v].card()).map(|_| rng.random_range(1..=9)).collect();
                    let total: i64 = w.iter().sum();
                    w.iter().map(|&x| int(x) / int(total)).collect()
                })
                .collect()
        })
        .collect();
    Net { vars, parents, cpt }
}

impl Net {
    fn config(&self, v: usize, idx: &[usize]) -> usize {
        self.parents[v].iter().fold(0, |acc, &p| acc * self.vars[p].card() + idx[p])
    }

    pub fn joint(&self) -> JointTable {
        let shape: Vec<usize> = self.vars.iter().map(Variable::card).collect();
        let probs = Odometer::new(&shape)
            .map(|idx| {
                (0..self.vars.len()).fold(int(1), |acc, v| acc * &self.cpt[v][self.config(v, &idx)][idx[v]])
            })
            .collect();
        JointTable::new(self.vars.clone(), probs).unwrap()
    }

    /// `P(v = value | set(x = xv))` by forcing `x` and multiplying out.
    pub fn intervene(&self, x: usize, xv: usize, y: usize) -> Vec<Rational> {
        let shape: Vec<usize> = self.vars.iter().map(Variable::card).collect();
        let mut out = vec![int(0); self.vars[y].card()];
        for idx in Odometer::new(&shape) {
            if idx[x] != xv {
                continue;
            }
            let p = (0..self.vars.len())
                .filter(|&v| v != x)
                .fold(int(1), |acc, v| acc * &self.cpt[v][self.config(v, &idx)][idx[v]]);
            out[idx[y]] += p;
        }
        out
    }
}
