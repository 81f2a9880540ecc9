//! Quasiprobability decompositions of ideal observables and gates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gst::checked_inverse;
use crate::ptm::{PtmMap, PtmObservable};

/// Largest reconstruction residual accepted for an emitted decomposition.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Relative singular-value threshold separating the range from the nullspace.
const RANK_TOL: f64 = 1e-10;

const REFINE_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Row-vector solve against the readout estimate.
    Solve,
    /// Unique solution of a full-column-rank system.
    Unique,
    /// Exact minimization along a one-dimensional nullspace.
    Breakpoint,
    /// Linear program for higher-dimensional nullspaces.
    LinearProgram,
}

/// `target = sum_i q_i basis_i`, with `cost = sum_i |q_i|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiDecomposition {
    pub target: String,
    pub basis: Vec<String>,
    pub q: Vec<f64>,
    pub cost: f64,
    /// `max |M q - t|` of the reconstruction.
    pub residual: f64,
    pub method: Method,
}

impl QuasiDecomposition {
    fn build(target: String, basis: Vec<String>, q: Vec<f64>, residual: f64, method: Method) -> Result<Self> {
        if basis.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), actual: q.len() });
        }
        if !(residual < RESIDUAL_TOL) {
            return Err(Error::Numerical(format!(
                "decomposition of {target} leaves residual {residual:e}"
            )));
        }
        let cost = q.iter().map(|x| x.abs()).sum();
        Ok(QuasiDecomposition { target, basis, q, cost, residual, method })
    }

    /// Sampling probabilities `|q_i| / cost`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.q.iter().map(|x| x.abs() / self.cost).collect()
    }

    /// Decomposition with a single basis element and coefficient 1.
    pub fn trivial(label: impl Into<String>) -> Self {
        let label = label.into();
        QuasiDecomposition { target: label.clone(), basis: vec![label], q: vec![1.0], cost: 1.0, residual: 0.0, method: Method::Unique }
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `q = Q B_hat^-1`: the ideal observable as a combination of the noisy effects
/// whose estimates are the rows of `b_hat`. Basis labels name those effects.
pub fn decompose_observable(
    target: &PtmObservable,
    b_hat: &DMatrix<f64>,
    labels: &[String],
) -> Result<QuasiDecomposition> {
    let dim = target.entries().len();
    if b_hat.shape() != (dim, dim) || labels.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: b_hat.nrows() });
    }
    let inv = checked_inverse(b_hat)?;
    let q = target.entries().transpose() * inv;
    let residual = inf_norm(&(&q * b_hat - target.entries().transpose()).transpose());
    let name = format!("observable {:?}", target.entries().as_slice());
    QuasiDecomposition::build(name, labels.to_vec(), q.iter().copied().collect(), residual, Method::Solve)
}

/// Minimum-L1 decomposition of `target` over the PTMs in `basis`.
pub fn decompose_gate(
    target: &PtmMap,
    basis: &[PtmMap],
    labels: &[String],
    target_label: &str,
) -> Result<QuasiDecomposition> {
    if basis.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), actual: labels.len() });
    }
    if let Some(b) = basis.iter().find(|b| b.n_qubits() != target.n_qubits()) {
        return Err(Error::DimensionMismatch { expected: target.n_qubits(), actual: b.n_qubits() });
    }
    let rows = target.vectorize().len();
    let m = DMatrix::from_columns(&basis.iter().map(|b| b.vectorize()).collect::<Vec<_>>());
    let t = target.vectorize();
    let (q, method) = min_l1(&m, &t)?;
    let residual = inf_norm(&(&m * &q - &t));
    debug_assert_eq!(m.nrows(), rows);
    QuasiDecomposition::build(target_label.to_string(), labels.to_vec(), q.iter().copied().collect(), residual, method)
}

/// Exact minimum of `sum |q_k|` subject to `M q = t`, for full-row-rank `M`.
pub fn min_l1(m: &DMatrix<f64>, t: &DVector<f64>) -> Result<(DVector<f64>, Method)> {
    let (rows, cols) = m.shape();
    if t.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, actual: t.len() });
    }
    if cols < rows {
        return Err(Error::Infeasible(format!("{cols} basis operations cannot span a {rows}-dimensional space")));
    }
    // Pad to square so the SVD exposes a full right-singular basis.
    let mut padded = DMatrix::zeros(cols, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = padded.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let sv = &svd.singular_values;
    let max_sv = sv.max();
    let range: Vec<usize> = (0..cols).filter(|&k| sv[k] > RANK_TOL * max_sv).collect();
    if range.len() < rows {
        return Err(Error::Infeasible(format!(
            "basis has rank {} but the target space has dimension {rows}",
            range.len()
        )));
    }
    let null: Vec<usize> = (0..cols).filter(|k| !range.contains(k)).collect();

    // Minimum-norm particular solution.
    let mut t_pad = DVector::zeros(cols);
    t_pad.rows_mut(0, rows).copy_from(t);
    let mut q0 = DVector::zeros(cols);
    for &k in &range {
        let coeff = u.column(k).dot(&t_pad) / sv[k];
        q0 += v_t.row(k).transpose() * coeff;
    }

    // Iterative refinement against the range pseudo-inverse; the SVD of large
    // bases is not always accurate to working precision.
    let refine = |mut q: DVector<f64>| {
        for _ in 0..REFINE_STEPS {
            let residual = t - m * &q;
            if inf_norm(&residual) < 1e-3 * RESIDUAL_TOL {
                break;
            }
            let mut r = DVector::zeros(cols);
            r.rows_mut(0, rows).copy_from(&residual);
            for &k in &range {
                let coeff = u.column(k).dot(&r) / sv[k];
                q += v_t.row(k).transpose() * coeff;
            }
        }
        q
    };

    match null.len() {
        0 => Ok((refine(q0), Method::Unique)),
        1 => {
            let n = v_t.row(null[0]).transpose();
            Ok((refine(breakpoint_minimum(&q0, &n)), Method::Breakpoint))
        }
        _ => {
            let q = lp_minimum(m, t)?;
            Ok((polish(m, t, q), Method::LinearProgram))
        }
    }
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// `argmin_s |q0 + s n|_1`. The objective is convex and piecewise linear, so
/// the minimum sits at one of the points where a coordinate crosses zero.
fn breakpoint_minimum(q0: &DVector<f64>, n: &DVector<f64>) -> DVector<f64> {
    let scale = n.amax();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for k in 0..n.len() {
        if n[k].abs() <= 1e-14 * scale {
            continue;
        }
        let s = -q0[k] / n[k];
        let mut q = q0 + n * s;
        q[k] = 0.0;
        let cost = l1(&q);
        let better = match &best {
            None => true,
            Some((c, bq)) => {
                let tie = (cost - c).abs() <= 1e-12 * c.max(1.0);
                (!tie && cost < *c) || (tie && lex_less(&q, bq))
            }
        };
        if better {
            best = Some((cost, q));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| q0.clone())
}

/// `min sum (u + v)` s.t. `M (u - v) = t`, `u, v >= 0`.
fn lp_minimum(m: &DMatrix<f64>, t: &DVector<f64>) -> Result<DVector<f64>> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let (rows, cols) = m.shape();
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let u: Vec<_> = (0..cols).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let v: Vec<_> = (0..cols).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for r in 0..rows {
        let mut expr = minilp::LinearExpr::empty();
        for c in 0..cols {
            let a = m[(r, c)];
            if a != 0.0 {
                expr.add(u[c], a);
                expr.add(v[c], -a);
            }
        }
        problem.add_constraint(expr, ComparisonOp::Eq, t[r]);
    }
    let solution = problem
        .solve()
        .map_err(|e| Error::Infeasible(format!("linear program failed: {e}")))?;
    Ok(DVector::from_fn(cols, |c, _| solution[u[c]] - solution[v[c]]))
}

/// Project `q` onto `M q = t` along the least-squares correction.
fn polish(m: &DMatrix<f64>, t: &DVector<f64>, q: DVector<f64>) -> DVector<f64> {
    let r = t - m * &q;
    match m.clone().pseudo_inverse(1e-12) {
        Ok(pinv) => q + pinv * r,
        Err(_) => q,
    }
}
