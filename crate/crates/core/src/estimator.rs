//! Weighted least-squares estimation over one window.
//!
//! Gauss-Newton: `x <- x - (H'WH)^-1 H'W (h(x) - z)` with `W = diag(1/sigma^2)`.
//! The gain matrix is Jacobi-scaled before its Cholesky factorization so the
//! mix of virtual (1e-5) and pseudo (5e-2) sigmas does not hide a rank
//! deficiency; a pivot below `PIVOT_TOL` is reported, not regularized.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::chi2;
use crate::error::{Error, Result};
use crate::measurement::MeasurementModel;
use crate::model::check_len;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10;
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Scaled Cholesky factor of `H'WH` for a fixed Jacobian.
#[derive(Debug, Clone)]
pub struct LinearFactor {
    ht_w: DMatrix<f64>,
    scale: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl LinearFactor {
    /// `None` when the gain matrix is rank deficient.
    pub fn new(hm: DMatrix<f64>, sigma: &DVector<f64>) -> Option<Self> {
        let n = hm.ncols();
        let mut ht_w = hm.transpose();
        for (k, s) in sigma.iter().enumerate() {
            ht_w.column_mut(k).scale_mut(1.0 / (s * s));
        }
        let mut g = &ht_w * &hm;
        let mut scale = DVector::zeros(n);
        for j in 0..n {
            let d = g[(j, j)];
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            scale[j] = 1.0 / d.sqrt();
        }
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] *= scale[i] * scale[j];
            }
        }
        let chol = Cholesky::new(g)?;
        let l = chol.l_dirty();
        if (0..n).any(|i| l[(i, i)] * l[(i, i)] < PIVOT_TOL) {
            return None;
        }
        Some(LinearFactor { ht_w, scale, chol })
    }

    /// Gauss-Newton step `(H'WH)^-1 H'W r`.
    pub fn step(&self, r: &DVector<f64>) -> DVector<f64> {
        let g = &self.ht_w * r;
        let mut b = g.component_mul(&self.scale);
        self.chol.solve_mut(&mut b);
        b.component_mul(&self.scale)
    }

    /// `H'W r`, the gradient of the half objective.
    pub fn gradient(&self, r: &DVector<f64>) -> DVector<f64> {
        &self.ht_w * r
    }
}

/// Outcome of one window estimation.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// Window state estimate (inactive states keep their initial value).
    pub x: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after each iterate, starting with the initial guess.
    pub objective_history: Vec<f64>,
    pub zeta: f64,
    pub nu: usize,
    /// Chi-square confidence; 0 when the solve failed, 1 when `nu = 0`.
    pub confidence: f64,
    /// Enabled row indices, aligned with `residuals`.
    pub rows: Vec<usize>,
    /// Channel id of each enabled row.
    pub row_ids: Vec<String>,
    pub residuals: DVector<f64>,
    pub normalized: DVector<f64>,
    pub diagnostic: Option<String>,
}

impl EstimationResult {
    /// Final objective value `J`.
    pub fn objective(&self) -> f64 {
        self.zeta
    }

    /// Redundancy is present and the statistic is meaningful.
    pub fn testable(&self) -> bool {
        self.converged && self.nu > 0
    }
}

fn weighted_sq(r: &DVector<f64>, sigma: &DVector<f64>) -> f64 {
    r.iter().zip(sigma.iter()).map(|(r, s)| (r / s).powi(2)).sum()
}

/// `zeta = sum ((h_i(x) - z_i) / sigma_i)^2` over enabled rows.
pub fn chi_square_stat(model: &MeasurementModel, z: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    check_len("measurement vector", model.m(), z.len())?;
    let r = model.eval_h(x)? - z;
    Ok(weighted_sq(&r, &model.sigmas()))
}

/// Solve the WLS problem for the enabled rows of `model`.
///
/// `z` holds one value per enabled row. Rank deficiency is not an error:
/// it yields a non-converged result with confidence 0.
pub fn wls_solve(
    model: &MeasurementModel,
    z: &DVector<f64>,
    x0: &DVector<f64>,
    opts: SolverOptions,
) -> Result<EstimationResult> {
    check_len("measurement vector", model.m(), z.len())?;
    check_len("initial state", model.window_state_count(), x0.len())?;
    if opts.max_iter == 0 || !(opts.tol > 0.0) {
        return Err(Error::Config("solver needs max_iter >= 1 and tol > 0".into()));
    }
    let sigma = model.sigmas();
    let active = model.active_states();
    let mut x = x0.clone();
    let mut r = model.eval_h(&x)? - z;
    let mut history = vec![weighted_sq(&r, &sigma)];
    let mut converged = false;
    let mut iterations = 0;
    let mut diagnostic = None;
    let linear = model.linear_factor();

    while iterations < opts.max_iter {
        let owned;
        let factor = match &linear {
            Some(f) => f.as_ref(),
            None => match LinearFactor::new(model.jacobian_active(&x)?, &sigma) {
                Some(f) => {
                    owned = f;
                    &owned
                }
                None => {
                    diagnostic = Some(format!("gain matrix rank deficient at iteration {}", iterations + 1));
                    break;
                }
            },
        };
        let dx = factor.step(&r);
        iterations += 1;
        for (k, &j) in active.iter().enumerate() {
            x[j] -= dx[k];
        }
        r = model.eval_h(&x)? - z;
        history.push(weighted_sq(&r, &sigma));
        if !dx.iter().all(|v| v.is_finite()) {
            diagnostic = Some("non-finite update".into());
            break;
        }
        // a linear model is solved exactly by its first step
        if linear.is_some() || dx.amax() < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence within {} iterations", opts.max_iter));
    }

    let zeta = weighted_sq(&r, &sigma);
    let nu = model.nu();
    let confidence = if !converged {
        0.0
    } else if nu == 0 {
        1.0
    } else {
        chi2::confidence(zeta, nu)?
    };
    let rows = model.enabled_rows().to_vec();
    let row_ids = rows.iter().map(|r| model.row_channel(*r).id.clone()).collect();
    let normalized = r.component_div(&sigma);
    Ok(EstimationResult {
        x,
        converged,
        iterations,
        objective_history: history,
        zeta,
        nu,
        confidence,
        rows,
        row_ids,
        residuals: r,
        normalized,
        diagnostic,
    })
}

/// Per-channel `|r|/sigma` sorted descending; ties by channel id.
///
/// A channel owning several rows reports its largest row.
pub fn normalized_residuals(result: &EstimationResult) -> Vec<(String, f64)> {
    let mut best: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();
    for (id, v) in result.row_ids.iter().zip(result.normalized.iter()) {
        let e = best.entry(id.as_str()).or_insert(0.0);
        *e = e.max(v.abs());
    }
    let mut out: Vec<(String, f64)> = best.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    // stable sort keeps the id order among ties
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{model_from_rows, RawRow};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn identity_model_returns_z() {
        let rows = (0..3)
            .map(|i| {
                let mut y = vec![0.0; 3];
                y[i] = 1.0;
                RawRow::linear(format!("r{i}"), 0.1, y)
            })
            .collect();
        let mm = model_from_rows(3, rows).unwrap();
        let z = dv(&[0.3, -2.0, 7.5]);
        let res = wls_solve(&mm, &z, &dv(&[100.0, 5.0, -3.0]), SolverOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert!((res.x.clone() - z).amax() < 1e-10);
        assert_eq!(res.nu, 0);
    }

    #[test]
    fn weighted_average() {
        let mm = model_from_rows(
            1,
            vec![RawRow::linear("a", 1.0, vec![1.0]), RawRow::linear("b", 1.0, vec![1.0])],
        )
        .unwrap();
        let res = wls_solve(&mm, &dv(&[1.0, 3.0]), &dv(&[0.0]), SolverOptions::default()).unwrap();
        assert!((res.x[0] - 2.0).abs() < 1e-10);
        assert!((res.zeta - 2.0).abs() < 1e-10);

        let mm = model_from_rows(
            1,
            vec![RawRow::linear("a", 1.0, vec![1.0]), RawRow::linear("b", 0.5, vec![1.0])],
        )
        .unwrap();
        let res = wls_solve(&mm, &dv(&[1.0, 3.0]), &dv(&[0.0]), SolverOptions::default()).unwrap();
        assert!((res.x[0] - 2.6).abs() < 1e-10);
    }

    #[test]
    fn single_channel_two_sigma() {
        let mm = model_from_rows(
            1,
            vec![RawRow::linear("a", 0.5, vec![1.0]), RawRow::linear("b", 0.5, vec![0.0])],
        );
        // second row references no state; still a valid model
        let mm = mm.unwrap();
        let x = dv(&[0.0]);
        assert!((chi_square_stat(&mm, &dv(&[1.0, 0.0]), &x).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(chi_square_stat(&mm, &dv(&[0.0, 0.0]), &x).unwrap(), 0.0);
    }

    #[test]
    fn rank_deficient_rows_rejected() {
        let rows = vec![
            RawRow::linear("a", 1.0, vec![1.0, 1.0]),
            RawRow::linear("b", 1.0, vec![2.0, 2.0]),
            RawRow::linear("c", 1.0, vec![-1.0, -1.0]),
        ];
        assert!(matches!(model_from_rows(2, rows), Err(Error::Unobservable { .. })));
    }

    #[test]
    fn nonlinear_converges() {
        // h = [x0, x1, x0*x1]
        let mut f = DMatrix::zeros(2, 2);
        f[(0, 1)] = 1.0;
        let rows = vec![
            RawRow::linear("x0", 0.01, vec![1.0, 0.0]),
            RawRow::linear("x1", 0.01, vec![0.0, 1.0]),
            RawRow {
                f: Some(f),
                ..RawRow::linear("p", 0.01, vec![0.0, 0.0])
            },
        ];
        let mm = model_from_rows(2, rows).unwrap();
        assert!(!mm.is_linear());
        let z = dv(&[2.0, 3.0, 6.0]);
        let res = wls_solve(&mm, &z, &dv(&[1.0, 1.0]), SolverOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations > 1);
        assert!((res.x[0] - 2.0).abs() < 1e-9 && (res.x[1] - 3.0).abs() < 1e-9);
        assert!(res.confidence > 0.999);
    }

    #[test]
    fn normalized_order() {
        let res = EstimationResult {
            x: dv(&[]),
            converged: true,
            iterations: 1,
            objective_history: vec![],
            zeta: 14.0,
            nu: 1,
            confidence: 0.0,
            rows: vec![0, 1, 2],
            row_ids: vec!["a".into(), "b".into(), "c".into()],
            residuals: dv(&[1.0, 3.0, -2.0]),
            normalized: dv(&[1.0, 3.0, -2.0]),
            diagnostic: None,
        };
        let order: Vec<_> = normalized_residuals(&res).into_iter().map(|p| p.0).collect();
        assert_eq!(order, ["b", "c", "a"]);
        let zero = EstimationResult {
            normalized: dv(&[0.0, 0.0, 0.0]),
            row_ids: vec!["c".into(), "a".into(), "b".into()],
            ..res
        };
        let order: Vec<_> = normalized_residuals(&zero).into_iter().map(|p| p.0).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }
}
