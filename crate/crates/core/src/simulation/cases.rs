//! Data-generating processes for the four simulation cases.
//!
//! All samples follow `Y = 1 + Xβ₀ + σε` with design means `μⱼ ~ Unif[1, 2]`;
//! both `Y` and `X` are centered before fitting unless centering is disabled.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::config::{AlternativeKind, BetaSpec, Case, SimConfig};
use super::rng::{sample_standard_normal, sample_student_t, stream, uniform, Stream, CONFIG_REP};
use crate::error::{Error, Result};
use crate::linalg::{center_dataset, Dataset, Design, ModelFit};

// Substreams of the configuration stream.
const SUB_MU: u8 = 0;
const SUB_BETA: u8 = 1;
const SUB_SIGMA_FACTOR: u8 = 2;
const SUB_SIGMA_DIAG: u8 = 3;
const SUB_FIXED_X: u8 = 4;
const SUB_MU_SECOND: u8 = 5;
const SUB_FIXED_V: u8 = 6;
// Substreams of a replication stream.
const SUB_X: u8 = 0;
const SUB_EPS: u8 = 1;
const SUB_V: u8 = 2;
const SUB_DELTA: u8 = 3;

const T5_SCALE: f64 = 1.290_994_448_735_805_6; // √(5/3)
const T16_SCALE: f64 = 1.069_044_967_649_697_6; // √(8/7)

/// Scaling of the smallest-eigenvalue direction in case II: 1 for the fixed
/// dimension `p = 4` (and below), 2 while `p/n < 0.3`, 5 beyond.
pub fn case_two_scale(n: usize, p: usize) -> f64 {
    if p <= 4 {
        1.0
    } else if (p as f64) / (n as f64) < 0.3 {
        2.0
    } else {
        5.0
    }
}

/// Exact generating parameters for one point of the alternative grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub beta0: Vec<f64>,
    pub sigma2: f64,
    /// `β₀ᵀΣβ₀`; undefined for a fixed design.
    pub eta0: Option<f64>,
    pub rho0: Option<f64>,
    pub gamma0: Option<Vec<f64>>,
    pub theta0: Option<f64>,
    /// `‖β₀ − γ₀‖²`
    pub diff0: Option<f64>,
}

impl Truth {
    pub fn beta_norm2(&self) -> f64 {
        self.beta0.iter().map(|b| b * b).sum()
    }
}

#[derive(Debug)]
enum DesignLaw {
    /// `X = μ + Z`
    Identity,
    /// `X = μ + Z Lᵀ` with `Σ = L Lᵀ`
    Correlated { chol: DMatrix<f64> },
    /// `X = μ + t₅/√(5/3)`
    StudentT,
    /// Drawn once per configuration.
    Fixed {
        raw: Arc<DMatrix<f64>>,
        design: Arc<Design>,
    },
}

#[derive(Debug)]
struct SampleLaw {
    n: usize,
    mu: DVector<f64>,
    design: DesignLaw,
    heavy_tailed_errors: bool,
}

/// One design and error draw, shared by every point of the alternative grid.
#[derive(Debug, Clone)]
pub struct Draw {
    pub raw: Arc<DMatrix<f64>>,
    pub design: Arc<Design>,
    pub eps: DVector<f64>,
}

impl Draw {
    /// Response `1 + Xβ + σε`, centered when requested.
    pub fn response(&self, beta: &DVector<f64>, sigma: f64, center: bool) -> DVector<f64> {
        let mut y = &*self.raw * beta + &self.eps * sigma;
        y.add_scalar_mut(1.0);
        if center {
            let m = y.mean();
            y.add_scalar_mut(-m);
        }
        y
    }

    pub fn fit(&self, beta: &DVector<f64>, sigma: f64, center: bool) -> Result<ModelFit> {
        ModelFit::new(self.design.clone(), &self.response(beta, sigma, center))
    }
}

/// Parameters fixed for a whole configuration.
#[derive(Debug)]
pub struct Scenario {
    cfg: SimConfig,
    first: SampleLaw,
    second: Option<SampleLaw>,
    beta0: DVector<f64>,
    gamma0: Option<DVector<f64>>,
    /// Population design covariance for `η₀`; `None` for a fixed design.
    covariance: Option<DMatrix<f64>>,
}

/// Point of the alternative grid resolved to concrete parameters.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub delta: f64,
    pub beta: DVector<f64>,
    pub gamma: Option<DVector<f64>>,
    pub sigma2: f64,
    pub truth: Truth,
}

fn draw_mu(rng: &mut Stream, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| uniform(rng, 1.0, 2.0))
}

fn gaussian_matrix(rng: &mut Stream, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| sample_standard_normal(rng))
}

fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    c
}

/// Eigenvector with the first nonzero entry made positive.
fn oriented(v: DVector<f64>) -> DVector<f64> {
    let first = v.iter().copied().find(|x| *x != 0.0).unwrap_or(1.0);
    if first < 0.0 {
        -v
    } else {
        v
    }
}

fn extreme_eigenvector(m: DMatrix<f64>, largest: bool) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m);
    let pick = |a: &f64, b: &f64| if largest { a > b } else { a < b };
    let mut idx = 0;
    for i in 1..eig.eigenvalues.len() {
        if pick(&eig.eigenvalues[i], &eig.eigenvalues[idx]) {
            idx = i;
        }
    }
    let v = eig.eigenvectors.column(idx).into_owned();
    (eig.eigenvalues[idx], oriented(v.normalize()))
}

impl Scenario {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, p, seed) = (cfg.n, cfg.p, cfg.seed);
        let config_stream = |sub| stream(seed, CONFIG_REP, sub);

        let mut covariance = Some(DMatrix::identity(p, p));
        let mut case_beta = None;
        let heavy = cfg.case == Case::III;

        let make_law = |n_rows: usize, mu_sub: u8, fixed_sub: u8, chol: Option<&DMatrix<f64>>| -> Result<SampleLaw> {
            let mu = draw_mu(&mut config_stream(mu_sub), p);
            let design = match cfg.case {
                Case::I => DesignLaw::Identity,
                Case::II => DesignLaw::Correlated {
                    chol: chol.expect("case II covariance").clone(),
                },
                Case::III => DesignLaw::StudentT,
                Case::IV => {
                    let mut rng = config_stream(fixed_sub);
                    let mut raw = gaussian_matrix(&mut rng, n_rows, p);
                    for mut row in raw.row_iter_mut() {
                        row += mu.transpose();
                    }
                    let x = if cfg.center { center_columns(&raw) } else { raw.clone() };
                    DesignLaw::Fixed {
                        raw: Arc::new(raw),
                        design: Arc::new(Design::new(x)?),
                    }
                }
            };
            Ok(SampleLaw {
                n: n_rows,
                mu,
                design,
                heavy_tailed_errors: heavy,
            })
        };

        let chol = if cfg.case == Case::II {
            let mut rf = config_stream(SUB_SIGMA_FACTOR);
            let factor = DMatrix::from_fn(p, p, |_, _| uniform(&mut rf, -0.5, 0.5));
            let gram = factor.tr_mul(&factor);
            let lambda_max = SymmetricEigen::new(gram.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let mut rd = config_stream(SUB_SIGMA_DIAG);
            let mut sigma = gram / lambda_max;
            for j in 0..p {
                sigma[(j, j)] += uniform(&mut rd, 0.4, 1.0);
            }
            let (_, v) = extreme_eigenvector(sigma.clone(), false);
            case_beta = Some(v * case_two_scale(n, p));
            let chol = sigma
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Config("case II covariance is not positive definite".into()))?
                .l();
            covariance = Some(sigma);
            Some(chol)
        } else {
            None
        };

        let first = make_law(n, SUB_MU, SUB_FIXED_X, chol.as_ref())?;

        match cfg.case {
            Case::I => {
                let mut rb = config_stream(SUB_BETA);
                let tilde = DVector::from_fn(p, |_, _| uniform(&mut rb, 1.0, 2.0));
                case_beta = Some(tilde.normalize());
            }
            Case::III => {
                case_beta = Some(DVector::from_fn(p, |j, _| if j < 3 { 1.0 } else { 0.0 }));
            }
            Case::IV => {
                covariance = None;
                if let DesignLaw::Fixed { raw, .. } = &first.design {
                    let c = center_columns(raw);
                    let (_, v) = extreme_eigenvector(c.tr_mul(&c), true);
                    case_beta = Some(v);
                }
            }
            Case::II => {}
        }

        let beta0 = match cfg.beta {
            BetaSpec::CaseDefault => case_beta.expect("every case defines a coefficient vector"),
            BetaSpec::Zero => DVector::zeros(p),
            BetaSpec::UniformEntries => {
                let mut rb = config_stream(SUB_BETA);
                DVector::from_fn(p, |_, _| uniform(&mut rb, 0.0, 1.0))
            }
        };

        let (second, gamma0) = if cfg.test.is_two_sample() {
            let law = make_law(cfg.second_n(), SUB_MU_SECOND, SUB_FIXED_V, chol.as_ref())?;
            let gamma = match cfg.theta {
                None => beta0.clone(),
                Some(theta) => rotated(&beta0, theta)?,
            };
            (Some(law), Some(gamma))
        } else {
            (None, None)
        };

        Ok(Scenario {
            cfg: cfg.clone(),
            first,
            second,
            beta0,
            gamma0,
            covariance,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn beta0(&self) -> &DVector<f64> {
        &self.beta0
    }

    fn draw_from(&self, law: &SampleLaw, rep: u64, sub_x: u8, sub_e: u8) -> Result<Draw> {
        let (n, p) = (law.n, self.cfg.p);
        let seed = self.cfg.seed;
        let (raw, design) = match &law.design {
            DesignLaw::Fixed { raw, design } => (raw.clone(), design.clone()),
            other => {
                let mut rng = stream(seed, rep, sub_x);
                let mut x = match other {
                    DesignLaw::Identity => gaussian_matrix(&mut rng, n, p),
                    DesignLaw::Correlated { chol } => gaussian_matrix(&mut rng, n, p) * chol.transpose(),
                    DesignLaw::StudentT => DMatrix::from_fn(n, p, |_, _| sample_student_t(&mut rng, 5.0, T5_SCALE)),
                    DesignLaw::Fixed { .. } => unreachable!(),
                };
                for mut row in x.row_iter_mut() {
                    row += law.mu.transpose();
                }
                let fitted = if self.cfg.center { center_columns(&x) } else { x.clone() };
                (Arc::new(x), Arc::new(Design::new(fitted)?))
            }
        };
        let mut re = stream(seed, rep, sub_e);
        let eps = if law.heavy_tailed_errors {
            DVector::from_fn(n, |_, _| sample_student_t(&mut re, 16.0, T16_SCALE))
        } else {
            DVector::from_fn(n, |_, _| sample_standard_normal(&mut re))
        };
        Ok(Draw { raw, design, eps })
    }

    /// Design and error draws of replication `rep`: the first sample, and the
    /// second when the test needs one.
    pub fn draw(&self, rep: u64) -> Result<(Draw, Option<Draw>)> {
        let first = self.draw_from(&self.first, rep, SUB_X, SUB_EPS)?;
        let second = match &self.second {
            Some(law) => Some(self.draw_from(law, rep, SUB_V, SUB_DELTA)?),
            None => None,
        };
        Ok((first, second))
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        self.cfg.deltas().into_iter().map(|d| self.grid_point(d)).collect()
    }

    pub fn grid_point(&self, delta: f64) -> GridPoint {
        let cfg = &self.cfg;
        let (n, p) = (cfg.n as f64, cfg.p as f64);
        let mut beta = self.beta0.clone();
        let mut gamma = self.gamma0.clone();
        let mut sigma2 = cfg.sigma2;
        if let Some(alt) = &cfg.alternative {
            match alt.kind {
                AlternativeKind::Signal => {
                    let entry = delta * cfg.sigma2.sqrt() / (n.sqrt() * p.powf(0.25));
                    beta = DVector::from_element(cfg.p, entry);
                    if gamma.is_some() {
                        gamma = Some(beta.clone());
                    }
                }
                AlternativeKind::ErrorVariance => sigma2 = cfg.sigma2 + delta / n.sqrt(),
                AlternativeKind::Difference => {
                    let n2 = cfg.second_n() as f64;
                    let target = delta * cfg.sigma2 * p.sqrt() * (1.0 / n + 1.0 / n2);
                    let shift = (target / p).sqrt();
                    gamma = Some(&beta - DVector::from_element(cfg.p, shift));
                }
            }
        }
        let eta0 = self.covariance.as_ref().map(|s| (s * &beta).dot(&beta));
        let rho0 = eta0.map(|e| e / (e + sigma2));
        let (theta0, diff0) = match &gamma {
            Some(g) => {
                let denom = beta.norm() * g.norm();
                let theta = if denom > 0.0 { Some(g.dot(&beta) / denom) } else { None };
                (theta, Some((&beta - g).norm_squared()))
            }
            None => (None, None),
        };
        GridPoint {
            delta,
            truth: Truth {
                beta0: beta.iter().copied().collect(),
                sigma2,
                eta0,
                rho0,
                gamma0: gamma.as_ref().map(|g| g.iter().copied().collect()),
                theta0,
                diff0,
            },
            beta,
            gamma,
            sigma2,
        }
    }
}

/// Vector with the norm of `beta` at angle `acos(theta)` from it.
fn rotated(beta: &DVector<f64>, theta: f64) -> Result<DVector<f64>> {
    let norm = beta.norm();
    if !(norm > 0.0) {
        return Err(Error::Config(
            "a designed angle needs a nonzero coefficient vector".into(),
        ));
    }
    let unit = beta / norm;
    if theta.abs() == 1.0 {
        return Ok(beta * theta);
    }
    // Alternating-sign direction made orthogonal to β₀; falls back to basis
    // vectors if it happens to be parallel.
    let p = beta.len();
    let candidates = std::iter::once(DVector::from_fn(p, |j, _| if j % 2 == 0 { 1.0 } else { -1.0 }))
        .chain((0..p).map(|j| DVector::from_fn(p, |i, _| if i == j { 1.0 } else { 0.0 })));
    for c in candidates {
        let w = &c - &unit * unit.dot(&c);
        let wn = w.norm();
        if wn > 1e-8 * c.norm() {
            return Ok((unit * theta + w / wn * (1.0 - theta * theta).sqrt()) * norm);
        }
    }
    Err(Error::Config("could not construct an orthogonal direction".into()))
}

/// Dataset and truth of replication `rep` at the first grid point.
pub fn generate_case(cfg: &SimConfig, rep: u64) -> Result<(Dataset, Truth)> {
    let scenario = Scenario::new(cfg)?;
    let (draw, _) = scenario.draw(rep)?;
    let point = scenario.grid().swap_remove(0);
    let y = draw.response(&point.beta, point.sigma2.sqrt(), false);
    let raw = Dataset::new(y, (*draw.raw).clone())?;
    let ds = if cfg.center { center_dataset(&raw)? } else { raw };
    Ok((ds, point.truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::config::TestKind;

    #[test]
    fn case_one_beta_has_unit_norm() {
        let s = Scenario::new(&SimConfig::new(Case::I, 50, 5)).unwrap();
        assert!((s.beta0().norm() - 1.0).abs() < 1e-15);
        assert!(s.beta0().iter().all(|b| *b > 0.0));
    }

    #[test]
    fn fixed_design_is_shared() {
        let cfg = SimConfig::new(Case::IV, 30, 4);
        let (a, _) = generate_case(&cfg, 0).unwrap();
        let (b, _) = generate_case(&cfg, 1).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.y, b.y);
    }

    #[test]
    fn generated_data_are_centered() {
        for case in Case::ALL {
            let (ds, _) = generate_case(&SimConfig::new(case, 40, 6), 3).unwrap();
            assert!(ds.y.mean().abs() < 1e-12);
            for col in ds.x.column_iter() {
                assert!(col.mean().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn case_two_truth_uses_covariance() {
        let cfg = SimConfig::new(Case::II, 400, 66);
        let s = Scenario::new(&cfg).unwrap();
        let point = s.grid_point(0.0);
        assert!((s.beta0().norm() - 2.0).abs() < 1e-12);
        let sigma = s.covariance.as_ref().unwrap();
        let eta = (sigma * s.beta0()).dot(s.beta0());
        assert_eq!(point.truth.eta0, Some(eta));
        // the smallest eigenvalue of Σ is at least the smallest added diagonal
        assert!(eta / 4.0 >= 0.4 - 1e-12);
    }

    #[test]
    fn case_three_beta() {
        let s = Scenario::new(&SimConfig::new(Case::III, 40, 6)).unwrap();
        assert_eq!(s.beta0().as_slice(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn case_two_scale_schedule() {
        assert_eq!(case_two_scale(400, 4), 1.0);
        assert_eq!(case_two_scale(400, 66), 2.0);
        assert_eq!(case_two_scale(400, 100), 2.0);
        assert_eq!(case_two_scale(400, 160), 5.0);
        assert_eq!(case_two_scale(800, 133), 2.0);
        assert_eq!(case_two_scale(800, 320), 5.0);
    }

    #[test]
    fn designed_angle() {
        let mut cfg = SimConfig::new(Case::I, 60, 8);
        cfg.test = TestKind::Coheritability;
        for theta in [0.0, 0.5, -0.3] {
            cfg.theta = Some(theta);
            let s = Scenario::new(&cfg).unwrap();
            let t = s.grid_point(0.0).truth.theta0.unwrap();
            assert!((t - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn difference_alternative_hits_target() {
        let mut cfg = SimConfig::new(Case::I, 400, 66);
        cfg.test = TestKind::TwoSampleEquality;
        cfg.alternative = Some(crate::simulation::config::Alternative {
            kind: AlternativeKind::Difference,
            deltas: vec![0.0, 3.0],
        });
        let s = Scenario::new(&cfg).unwrap();
        let g = s.grid();
        assert_eq!(g[0].truth.diff0, Some(0.0));
        let target = 3.0 * 66f64.sqrt() * (2.0 / 400.0);
        assert!((g[1].truth.diff0.unwrap() - target).abs() < 1e-12);
    }

    #[test]
    fn case_three_design_has_unit_variance() {
        let mut rng = stream(5, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_student_t(&mut rng, 5.0, T5_SCALE)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "var = {var}");
    }
}
