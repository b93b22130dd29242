use nalgebra::DMatrix;
use serde::Serialize;

use super::{IdentifyError, Tolerances, MAX_LATENT_CARD};

/// Solutions of `|Q - lambda P| = 0` with eigenvectors of both
/// `(Q - lambda P) x = 0` (columns of `a1`) and its transpose (`a2`).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Ascending.
    pub lambdas: Vec<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
}

/// Proxy conditionals, prior and `f(w | u)` for one stratum. Row `i` of every
/// matrix and entry `i` of every vector refer to the same latent category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredFactors {
    /// Rows `[1, f(t_1 | u_i), ..., f(t_{k-1} | u_i)]`.
    #[serde(serialize_with = "ser_matrix")]
    pub p1: DMatrix<f64>,
    /// Rows `[1, f(s_1 | u_i), ..., f(s_{k-1} | u_i)]`.
    #[serde(serialize_with = "ser_matrix")]
    pub p2: DMatrix<f64>,
    /// `f(w | u_i)` for the selected `w`.
    pub delta: Vec<f64>,
    /// `f(u_i | z)`.
    pub m: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    /// Largest off-diagonal magnitude of `P2'^-1 P P1^-1`.
    pub off_diagonal: f64,
    /// `max |P2' M P1 - P|`.
    pub residual_p: f64,
    /// `max |P2' M Delta P1 - Q|`.
    pub residual_q: f64,
}

impl RecoveredFactors {
    /// Reorders the latent categories: new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> RecoveredFactors {
        let rows = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], j)]);
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        RecoveredFactors {
            p1: rows(&self.p1),
            p2: rows(&self.p2),
            delta: pick(&self.delta),
            m: pick(&self.m),
            e1: pick(&self.e1),
            e2: pick(&self.e2),
            ..self.clone()
        }
    }
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        seq.serialize_element(&m.row(i).iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

pub(crate) fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn check_nonsingular(m: &DMatrix<f64>, name: &str, tol: &Tolerances) -> Result<(), IdentifyError> {
    let sv = m.singular_values();
    if sv.max() == 0.0 || sv.min() <= tol.singular * sv.max() {
        return Err(IdentifyError::SingularMatrix(name.to_string()));
    }
    Ok(())
}

/// Unit vector spanning the (numerical) null space of `m`.
fn null_vector(m: &DMatrix<f64>) -> (nalgebra::DVector<f64>, f64) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (i, &smallest) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    (v_t.row(i).transpose(), smallest)
}

/// Eigenvalues of `P^-1 Q` (which must be real, positive and pairwise
/// separated) and the eigenvector matrices of both characteristic equations.
pub fn generalized_eigs(p: &DMatrix<f64>, q: &DMatrix<f64>, tol: &Tolerances) -> Result<EigenSystem, IdentifyError> {
    let k = p.nrows();
    if !p.is_square() || p.shape() != q.shape() || k < 2 {
        return Err(IdentifyError::Design("P and Q must be square matrices of equal size, k >= 2".into()));
    }
    if k > MAX_LATENT_CARD {
        return Err(IdentifyError::Design(format!("k = {k} exceeds {MAX_LATENT_CARD}")));
    }
    check_nonsingular(p, "P", tol)?;
    check_nonsingular(q, "Q", tol)?;

    let r = p.clone().lu().solve(q).ok_or_else(|| IdentifyError::SingularMatrix("P".into()))?;
    let mut lambdas = Vec::with_capacity(k);
    for c in r.complex_eigenvalues().iter() {
        if c.im.abs() > tol.gap {
            return Err(IdentifyError::ComplexEigenvalue { re: c.re, im: c.im });
        }
        lambdas.push(c.re);
    }
    lambdas.sort_by(f64::total_cmp);
    for w in lambdas.windows(2) {
        if w[1] - w[0] <= tol.gap {
            return Err(IdentifyError::DegenerateSpectrum { a: w[0], b: w[1] });
        }
    }
    if lambdas[0] <= 0.0 {
        return Err(IdentifyError::NonPositiveEigenvalue(lambdas[0]));
    }

    let (pt, qt) = (p.transpose(), q.transpose());
    let mut a1 = DMatrix::zeros(k, k);
    let mut a2 = DMatrix::zeros(k, k);
    for (i, &l) in lambdas.iter().enumerate() {
        for (a, pm, qm) in [(&mut a1, p, q), (&mut a2, &pt, &qt)] {
            let pencil = qm - pm * l;
            let (v, _) = null_vector(&pencil);
            let residual = (&pencil * &v).amax();
            if residual > tol.residual * (1.0 + inf_norm(qm) + l.abs() * inf_norm(pm)) {
                return Err(IdentifyError::Residual(format!("eigenvector residual {residual:e} for lambda = {l}")));
            }
            a.set_column(i, &v);
        }
    }
    Ok(EigenSystem { lambdas, a1, a2 })
}

/// Rows of `A^-1` scaled so the leading column is one, with the scale factors.
fn normalize_rows(a: &DMatrix<f64>, which: &str, tol: &Tolerances) -> Result<(DMatrix<f64>, Vec<f64>), IdentifyError> {
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| IdentifyError::Pivot(format!("{which} is not invertible")))?;
    let k = inv.nrows();
    let mut out = DMatrix::zeros(k, k);
    let mut scale = Vec::with_capacity(k);
    for i in 0..k {
        let pivot = inv[(i, 0)];
        let row_norm = inv.row(i).amax();
        if pivot.abs() < tol.pivot * row_norm.max(1.0) {
            return Err(IdentifyError::Pivot(format!("leading entry of row {i} of {which}^-1 is {pivot:e}")));
        }
        for j in 0..k {
            out[(i, j)] = inv[(i, j)] / pivot;
        }
        scale.push(1.0 / pivot);
    }
    Ok((out, scale))
}

/// Checks a recovered probability against `[-prob_tol, 1 + prob_tol]` and
/// clamps it into `[0, 1]`.
pub(crate) fn clamp_prob(x: f64, what: &str, tol: &Tolerances) -> Result<f64, IdentifyError> {
    if !x.is_finite() || x < -tol.prob || x > 1.0 + tol.prob {
        return Err(IdentifyError::Range(format!("{what} = {x}")));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// `P1 = E1 A1^-1`, `P2 = E2 A2^-1`, `Delta = diag(lambda)` and
/// `M = P2'^-1 P P1^-1`, in eigenvalue order.
pub fn recover_factors(
    sys: &EigenSystem,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<RecoveredFactors, IdentifyError> {
    let k = sys.lambdas.len();
    let (mut p1, e1) = normalize_rows(&sys.a1, "A1", tol)?;
    let (mut p2, e2) = normalize_rows(&sys.a2, "A2", tol)?;

    let p1_inv = p1.clone().try_inverse().ok_or_else(|| IdentifyError::SingularMatrix("P1".into()))?;
    let p2t_inv = p2
        .transpose()
        .try_inverse()
        .ok_or_else(|| IdentifyError::SingularMatrix("P2".into()))?;
    let m_full = &p2t_inv * p * &p1_inv;
    let off_diagonal = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .fold(0.0_f64, |a, ij| a.max(m_full[ij].abs()));
    if off_diagonal > tol.diag {
        return Err(IdentifyError::NonDiagonal(off_diagonal));
    }

    for i in 0..k {
        for j in 1..k {
            p1[(i, j)] = clamp_prob(p1[(i, j)], "f(t | u)", tol)?;
            p2[(i, j)] = clamp_prob(p2[(i, j)], "f(s | u)", tol)?;
        }
    }
    let m = (0..k)
        .map(|i| clamp_prob(m_full[(i, i)], "f(u | z)", tol))
        .collect::<Result<Vec<_>, _>>()?;
    let delta = sys
        .lambdas
        .iter()
        .map(|&l| clamp_prob(l, "f(w | u)", tol))
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = m.iter().sum();
    if total > 1.0 + tol.prob {
        return Err(IdentifyError::Range(format!("sum of f(u | z) = {total}")));
    }

    let mm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(m.clone()));
    let dd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(delta.clone()));
    let residual_p = max_abs(&(p2.transpose() * &mm * &p1 - p));
    let residual_q = max_abs(&(p2.transpose() * &mm * &dd * &p1 - q));
    Ok(RecoveredFactors {
        p1,
        p2,
        delta,
        m,
        e1,
        e2,
        off_diagonal,
        residual_p,
        residual_q,
    })
}
