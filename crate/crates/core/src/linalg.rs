//! Data preparation, least-squares fitting and Gram-matrix derived quantities.
//!
//! Everything downstream works with `A = (XᵀX)⁻¹` through the Cholesky factor
//! `XᵀX = L Lᵀ` and its inverse `M = L⁻¹`, so that `A = Mᵀ M`. The dense inverse
//! is never formed.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance for both rank repair and the Gram factorization.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub centered: bool,
    /// Original column indices removed by rank repair, ascending.
    pub dropped_columns: Vec<usize>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "response has {} rows but design has {}",
                y.len(),
                x.nrows()
            )));
        }
        Ok(Dataset {
            y,
            x,
            centered: false,
            dropped_columns: Vec::new(),
        })
    }

    /// Optionally center, then drop linearly dependent columns.
    pub fn prepare(y: DVector<f64>, x: DMatrix<f64>, center: bool) -> Result<Self> {
        let raw = Dataset::new(y, x)?;
        let mut ds = if center { center_dataset(&raw)? } else { raw };
        let (x, dropped) = repair_rank(&ds.x, RANK_TOL)?;
        ds.x = x;
        ds.dropped_columns = dropped;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

pub fn center_dataset(raw: &Dataset) -> Result<Dataset> {
    let n = raw.n();
    if n < 2 {
        return Err(Error::Dimension(format!("centering needs at least 2 rows, got {n}")));
    }
    let mut y = raw.y.clone();
    let y_mean = y.mean();
    y.add_scalar_mut(-y_mean);
    let mut x = raw.x.clone();
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    Ok(Dataset {
        y,
        x,
        centered: true,
        dropped_columns: raw.dropped_columns.clone(),
    })
}

/// Greedy in-order incremental Cholesky on `XᵀX`: a column is dropped when its
/// pivot falls to `tol · max diag(XᵀX)` or below, so of any dependent set the
/// later-indexed columns go.
pub fn repair_rank(x: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if x.nrows() == 0 {
        return Err(Error::Dimension("design has no rows".into()));
    }
    let p = x.ncols();
    if p == 0 {
        return Err(Error::DegenerateDesign);
    }
    let gram = x.tr_mul(x);
    let scale = (0..p).map(|j| gram[(j, j)]).fold(0.0_f64, f64::max);
    if !(scale > 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let threshold = tol * scale;

    let mut kept: Vec<usize> = Vec::with_capacity(p);
    let mut dropped = Vec::new();
    // Rows of L for the kept columns, packed lower-triangular.
    let mut l_rows: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut row = Vec::with_capacity(kept.len() + 1);
        for (r, &i) in kept.iter().enumerate() {
            let dot: f64 = (0..r).map(|c| l_rows[r][c] * row[c]).sum();
            row.push((gram[(i, j)] - dot) / l_rows[r][r]);
        }
        let pivot = gram[(j, j)] - row.iter().map(|v| v * v).sum::<f64>();
        if pivot > threshold {
            row.push(pivot.sqrt());
            l_rows.push(row);
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    if dropped.is_empty() {
        return Ok((x.clone(), dropped));
    }
    Ok((x.select_columns(kept.iter()), dropped))
}

/// Factorized Gram matrix of a fixed design; independent of the response so a
/// single instance can serve many responses.
#[derive(Debug)]
pub struct Design {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: DMatrix<f64>,
    chol_inv: DMatrix<f64>,
    traces: [f64; 2],
    trace3: OnceLock<f64>,
}

impl Design {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n <= p {
            return Err(Error::Dimension(format!("need n > p >= 1, got n={n}, p={p}")));
        }
        let gram = x.tr_mul(&x);
        let chol = cholesky(&gram, RANK_TOL)?;
        let chol_inv = chol
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .expect("Cholesky factor has a positive diagonal");
        // tr(A) = ‖M‖²_F, tr(A²) = ‖M Mᵀ‖²_F
        let tr1 = chol_inv.norm_squared();
        let b = &chol_inv * chol_inv.transpose();
        let tr2 = b.norm_squared();
        Ok(Design {
            x,
            gram,
            chol,
            chol_inv,
            traces: [tr1, tr2],
            trace3: OnceLock::new(),
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower-triangular `L` with `L Lᵀ = XᵀX`.
    pub fn gram_chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `L⁻¹`.
    pub fn gram_chol_inv(&self) -> &DMatrix<f64> {
        &self.chol_inv
    }

    pub fn trace_inv(&self) -> f64 {
        self.traces[0]
    }

    pub fn trace_inv2(&self) -> f64 {
        self.traces[1]
    }

    pub fn trace_inv3(&self) -> f64 {
        // tr(A³) = ‖M Mᵀ M‖²_F
        *self.trace3.get_or_init(|| {
            let m = &self.chol_inv;
            (m * m.transpose() * m).norm_squared()
        })
    }

    /// `A v`.
    pub fn apply_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        let mv = &self.chol_inv * v;
        self.chol_inv.tr_mul(&mv)
    }

    /// `M v`, so that `aᵀ A b = (M a)·(M b)`.
    pub fn half_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.chol_inv * v
    }
}

/// Unpivoted Cholesky with a relative pivot check.
fn cholesky(gram: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let p = gram.nrows();
    let scale = (0..p).map(|j| gram[(j, j)]).fold(0.0_f64, f64::max);
    let tolerance = tol * scale;
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut pivot = gram[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > tolerance) {
            return Err(Error::SingularGram {
                column: j,
                pivot,
                tolerance,
            });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..p {
            let mut s = gram[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone)]
pub struct ModelFit {
    design: Arc<Design>,
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    pub sigma2_hat: f64,
    /// `‖Y‖²`
    pub response_sq_norm: f64,
    /// `n⁻¹ Σ Yᵢ⁴`
    pub response_m4: f64,
}

impl ModelFit {
    pub fn new(design: Arc<Design>, y: &DVector<f64>) -> Result<Self> {
        let n = design.n();
        let p = design.p();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        let xty = design.x.tr_mul(y);
        let z = design.chol.solve_lower_triangular(&xty).expect("positive diagonal");
        let beta_hat = design.chol.tr_solve_lower_triangular(&z).expect("positive diagonal");
        let residuals = y - &design.x * &beta_hat;
        let rss = residuals.norm_squared();
        let sigma2_hat = rss / (n - p) as f64;
        let response_m4 = y.iter().map(|v| v.powi(4)).sum::<f64>() / n as f64;
        Ok(ModelFit {
            design,
            beta_hat,
            residuals,
            sigma2_hat,
            response_sq_norm: y.norm_squared(),
            response_m4,
        })
    }

    pub fn design(&self) -> &Arc<Design> {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn gram_chol(&self) -> &DMatrix<f64> {
        self.design.gram_chol()
    }

    pub fn trace_inv(&self) -> f64 {
        self.design.trace_inv()
    }

    pub fn trace_inv2(&self) -> f64 {
        self.design.trace_inv2()
    }

    pub fn trace_inv3(&self) -> f64 {
        self.design.trace_inv3()
    }

    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }

    /// `‖X β̂‖²`
    pub fn fitted_sq_norm(&self) -> f64 {
        (&self.design.x * &self.beta_hat).norm_squared()
    }

    /// `β̂ᵀ A β̂`
    pub fn beta_quad_form(&self) -> f64 {
        self.design.half_inv(&self.beta_hat).norm_squared()
    }
}

pub fn ols_fit(d: &Dataset) -> Result<ModelFit> {
    let design = Arc::new(Design::new(d.x.clone())?);
    ModelFit::new(design, &d.y)
}

/// `tr((XᵀX)⁻ᵏ)` for `k ∈ {1, 2, 3}`.
pub fn trace_inv_power(fit: &ModelFit, k: u32) -> Result<f64> {
    match k {
        1 => Ok(fit.trace_inv()),
        2 => Ok(fit.trace_inv2()),
        3 => Ok(fit.trace_inv3()),
        _ => Err(Error::Domain(format!("inverse power k={k} not in 1..=3"))),
    }
}

/// `aᵀ (XᵀX)⁻ᵏ b` for `k ∈ {1, 2}`.
pub fn quad_form_inv(fit: &ModelFit, a: &DVector<f64>, b: &DVector<f64>, k: u32) -> Result<f64> {
    let p = fit.p();
    if a.len() != p || b.len() != p {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {} against p={p}",
            a.len(),
            b.len()
        )));
    }
    let design = fit.design();
    match k {
        1 => Ok(design.half_inv(a).dot(&design.half_inv(b))),
        2 => Ok(design.apply_inv(a).dot(&design.apply_inv(b))),
        _ => Err(Error::Domain(format!("inverse power k={k} not in 1..=2"))),
    }
}

/// `tr{(XᵀX)⁻¹ (VᵀV)⁻¹} = ‖M_x M_vᵀ‖²_F`.
pub fn cross_trace(a: &ModelFit, b: &ModelFit) -> Result<f64> {
    design_cross_trace(a.design(), b.design())
}

pub fn design_cross_trace(a: &Design, b: &Design) -> Result<f64> {
    if a.p() != b.p() {
        return Err(Error::Dimension(format!(
            "coefficient dimensions differ: {} vs {}",
            a.p(),
            b.p()
        )));
    }
    Ok((a.gram_chol_inv() * b.gram_chol_inv().transpose()).norm_squared())
}
