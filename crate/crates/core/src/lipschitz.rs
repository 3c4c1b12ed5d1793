//! Loss functions and closed-form Lipschitz constants of their gradients.
//!
//! Every constructor returns a [`LipschitzEstimate`] whose `alpha` is the
//! adaptive learning rate `1 / L`. `m` is always the number of examples the
//! gradient is averaged over, i.e. the batch size.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{frobenius_norm, matmul, matmul_tn, vector_2norm, Matrix};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LeastSquares,
    BinaryCrossEntropy,
    MulticlassCrossEntropy,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::LeastSquares => "least_squares",
            LossKind::BinaryCrossEntropy => "binary_cross_entropy",
            LossKind::MulticlassCrossEntropy => "multiclass_cross_entropy",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum Regularization {
    #[default]
    None,
    /// Adds `(λ/2)‖w‖²` to the loss.
    L2(f64),
    /// Adds `‖Γw‖²` to the loss, `w` being the flattened weights.
    Tikhonov(Matrix),
}

impl Regularization {
    pub fn validate(&self, n_params: Option<usize>) -> Result<()> {
        match self {
            Regularization::None => Ok(()),
            Regularization::L2(l) if *l >= 0.0 && l.is_finite() => Ok(()),
            Regularization::L2(l) => Err(Error::Config(format!("L2 strength {l} must be >= 0"))),
            Regularization::Tikhonov(g) => {
                if g.rows() != g.cols() || g.is_empty() {
                    return Err(Error::Dimension(format!(
                        "Tikhonov matrix must be square and non-empty, got {}x{}",
                        g.rows(),
                        g.cols()
                    )));
                }
                match n_params {
                    Some(n) if n != g.rows() => Err(Error::Dimension(format!(
                        "Tikhonov matrix side {} does not match {n} parameters",
                        g.rows()
                    ))),
                    _ => Ok(()),
                }
            }
        }
    }

    /// Value of the penalty term at the flattened weights `w`.
    pub fn penalty(&self, w: &[f64]) -> Result<f64> {
        match self {
            Regularization::None => Ok(0.0),
            Regularization::L2(l) => Ok(0.5 * l * w.iter().map(|x| x * x).sum::<f64>()),
            Regularization::Tikhonov(g) => {
                let gw = tikhonov_apply(g, w)?;
                Ok(gw.iter().map(|x| x * x).sum())
            }
        }
    }

    /// Gradient of [`Self::penalty`] with respect to `w`.
    pub fn penalty_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            Regularization::None => Ok(vec![0.0; w.len()]),
            Regularization::L2(l) => Ok(w.iter().map(|x| l * x).collect()),
            Regularization::Tikhonov(g) => {
                // d/dw ‖Γw‖² = 2 Γᵀ Γ w
                let gw = tikhonov_apply(g, w)?;
                let gtgw = matmul_tn(g, &Matrix::column_vector(&gw))?;
                Ok(gtgw.as_slice().iter().map(|x| 2.0 * x).collect())
            }
        }
    }
}

fn tikhonov_apply(g: &Matrix, w: &[f64]) -> Result<Vec<f64>> {
    if g.cols() != w.len() {
        return Err(Error::Dimension(format!(
            "Tikhonov matrix has {} columns but there are {} parameters",
            g.cols(),
            w.len()
        )));
    }
    Ok(matmul(g, &Matrix::column_vector(w))?.into_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub regularization: Regularization,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec {
            kind,
            regularization: Regularization::None,
        }
    }

    pub fn with_regularization(mut self, regularization: Regularization) -> Self {
        self.regularization = regularization;
        self
    }
}

/// The quantities a constant was built from. Unused entries are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ingredients {
    /// Bound on the weight norm.
    pub k: Option<f64>,
    /// Bound on the penultimate activations.
    pub kz: Option<f64>,
    /// Bound on the output activations.
    pub ka: Option<f64>,
    pub norm_x: Option<f64>,
    pub norm_y: Option<f64>,
    pub m: usize,
    pub n_classes: Option<usize>,
    pub reg_increment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// The constant before regularization.
    pub base: f64,
    /// `base + ingredients.reg_increment`.
    pub l: f64,
    /// `1 / l`.
    pub alpha: f64,
    pub ingredients: Ingredients,
}

impl LipschitzEstimate {
    fn new(base: f64, ingredients: Ingredients) -> Result<Self> {
        let l = base + ingredients.reg_increment;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidBound(format!("Lipschitz constant {l} is not positive and finite")));
        }
        Ok(LipschitzEstimate {
            base,
            l,
            alpha: 1.0 / l,
            ingredients,
        })
    }

    /// Adds the increment of `reg` for weight bound `k`, replacing any
    /// previous increment.
    pub fn with_regularization(self, reg: &Regularization, k: f64) -> Result<Self> {
        let inc = reg_increment(reg, k)?;
        let ingredients = Ingredients {
            reg_increment: inc,
            k: self.ingredients.k.or(Some(k)),
            ..self.ingredients
        };
        LipschitzEstimate::new(self.base, ingredients)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBound(format!("{name} = {v} must be positive and finite")))
    }
}

fn nonzero_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::Dimension("batch size m must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `L = (K/m)‖XᵀX‖_F + (1/m)‖yᵀX‖₂`.
pub fn lc_linear_regression(x: &Matrix, y: &[f64], k: f64, m: usize) -> Result<LipschitzEstimate> {
    positive("K", k)?;
    nonzero_m(m)?;
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "X has {} rows but y has {} entries",
            x.rows(),
            y.len()
        )));
    }
    let xtx = matmul_tn(x, x)?;
    let ytx = matmul_tn(&Matrix::column_vector(y), x)?;
    let mf = m as f64;
    let base = k / mf * frobenius_norm(&xtx)? + vector_2norm(ytx.as_slice())? / mf;
    LipschitzEstimate::new(
        base,
        Ingredients {
            k: Some(k),
            norm_x: Some(frobenius_norm(x)?),
            norm_y: Some(vector_2norm(y)?),
            m,
            ..Default::default()
        },
    )
}

/// `L = (1/m)(K_a + ‖y‖)·K_z`.
pub fn lc_nn_regression(ka: f64, y: &[f64], kz: f64, m: usize) -> Result<LipschitzEstimate> {
    positive("K_a", ka)?;
    positive("K_z", kz)?;
    nonzero_m(m)?;
    let norm_y = vector_2norm(y)?;
    LipschitzEstimate::new(
        (ka + norm_y) * kz / m as f64,
        Ingredients {
            ka: Some(ka),
            kz: Some(kz),
            norm_y: Some(norm_y),
            m,
            ..Default::default()
        },
    )
}

/// `L = K_z / (2m)`.
pub fn lc_binary(kz: f64, m: usize) -> Result<LipschitzEstimate> {
    positive("K_z", kz)?;
    nonzero_m(m)?;
    LipschitzEstimate::new(
        kz / (2.0 * m as f64),
        Ingredients {
            kz: Some(kz),
            m,
            n_classes: Some(2),
            ..Default::default()
        },
    )
}

/// `L = (k-1)/(km) · K_z`.
pub fn lc_multiclass(kz: f64, k: usize, m: usize) -> Result<LipschitzEstimate> {
    if k < 2 {
        return Err(Error::InvalidClassCount(k));
    }
    if k == 2 {
        return lc_binary(kz, m).map(|mut e| {
            e.ingredients.n_classes = Some(2);
            e
        });
    }
    positive("K_z", kz)?;
    nonzero_m(m)?;
    let kf = k as f64;
    LipschitzEstimate::new(
        (kf - 1.0) / (kf * m as f64) * kz,
        Ingredients {
            kz: Some(kz),
            m,
            n_classes: Some(k),
            ..Default::default()
        },
    )
}

/// Increase of the constant due to regularization: `λK` for L2 and
/// `2K‖ΓΓ‖_F` for Tikhonov.
pub fn reg_increment(reg: &Regularization, k: f64) -> Result<f64> {
    positive("K", k)?;
    reg.validate(None)?;
    match reg {
        Regularization::None => Ok(0.0),
        Regularization::L2(lambda) => Ok(lambda * k),
        Regularization::Tikhonov(g) => Ok(2.0 * k * frobenius_norm(&matmul(g, g)?)?),
    }
}

/// Frobenius norm of the whole penultimate-activation matrix.
pub fn compute_kz(penultimate: &Matrix) -> Result<f64> {
    frobenius_norm(penultimate)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean loss over `m` examples plus the regularization penalty at `weights`.
///
/// Binary predictions are m×1 probabilities; multiclass predictions are m×k
/// probability rows against one-hot targets.
pub fn loss_value(spec: &LossSpec, predictions: &Matrix, targets: &Matrix, weights: &[f64], m: usize) -> Result<f64> {
    nonzero_m(m)?;
    if predictions.shape() != targets.shape() {
        return Err(Error::Dimension(format!(
            "predictions {:?} vs targets {:?}",
            predictions.shape(),
            targets.shape()
        )));
    }
    let (p, y) = (predictions.as_slice(), targets.as_slice());
    let mf = m as f64;
    let data = match spec.kind {
        LossKind::LeastSquares => p.iter().zip(y).map(|(a, t)| (a - t) * (a - t)).sum::<f64>() / (2.0 * mf),
        LossKind::BinaryCrossEntropy => {
            if predictions.cols() != 1 {
                return Err(Error::Dimension("binary predictions must have one column".into()));
            }
            -p.iter()
                .zip(y)
                .map(|(&a, &t)| {
                    let a = clamp_prob(a);
                    t * a.ln() + (1.0 - t) * (1.0 - a).ln()
                })
                .sum::<f64>()
                / mf
        }
        LossKind::MulticlassCrossEntropy => {
            -p.iter()
                .zip(y)
                .filter(|(_, &t)| t != 0.0)
                .map(|(&a, &t)| t * clamp_prob(a).ln())
                .sum::<f64>()
                / mf
        }
    };
    Ok(data + spec.regularization.penalty(weights)?)
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least_squares" | "mse" | "least-squares" => Ok(LossKind::LeastSquares),
            "binary_cross_entropy" | "bce" | "binary" => Ok(LossKind::BinaryCrossEntropy),
            "multiclass_cross_entropy" | "ce" | "multiclass" => Ok(LossKind::MulticlassCrossEntropy),
            other => Err(Error::UnsupportedMetric(format!("unknown loss `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn linear_regression_examples() {
        let e = lc_linear_regression(&Matrix::identity(2), &[1.0, 1.0], 1.0, 2).unwrap();
        assert!(close(e.l, 2f64.sqrt(), 1e-15));
        assert_eq!(e.alpha, 1.0 / e.l);

        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let e = lc_linear_regression(&x, &[0.0, 0.0], 2.0, 2).unwrap();
        let xtx = frobenius_norm(&matmul_tn(&x, &x).unwrap()).unwrap();
        assert!(close(e.l, xtx, 1e-15));

        let unit = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_eq!(lc_linear_regression(&unit, &[0.0], 1.0, 1).unwrap().l, 1.0);
    }

    #[test]
    fn linear_regression_errors() {
        let x = Matrix::identity(2);
        assert!(matches!(lc_linear_regression(&x, &[1.0, 1.0], 0.0, 2), Err(Error::InvalidBound(_))));
        assert!(matches!(lc_linear_regression(&x, &[1.0, 1.0], 1.0, 0), Err(Error::Dimension(_))));
        assert!(matches!(lc_linear_regression(&x, &[1.0], 1.0, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn nn_regression_examples() {
        assert_eq!(lc_nn_regression(1.0, &[0.0], 1.0, 1).unwrap().l, 1.0);
        // ‖y‖ = 3 with y = [3]
        assert_eq!(lc_nn_regression(2.0, &[3.0], 4.0, 10).unwrap().l, 2.0);
        assert!(lc_nn_regression(0.0, &[1.0], 1.0, 1).is_err());
        assert!(lc_nn_regression(1.0, &[1.0], -1.0, 1).is_err());
    }

    #[test]
    fn classification_examples() {
        let kz = frobenius_norm(&Matrix::identity(2)).unwrap();
        assert!(close(lc_binary(kz, 2).unwrap().l, 2f64.sqrt() / 4.0, 1e-15));
        assert_eq!(lc_binary(1.0, 1).unwrap().l, 0.5);
        assert!(close(lc_multiclass(2f64.sqrt(), 3, 2).unwrap().l, 2f64.sqrt() / 3.0, 1e-15));
        assert_eq!(lc_multiclass(1.7, 2, 9).unwrap().l, lc_binary(1.7, 9).unwrap().l);
        assert!(matches!(lc_multiclass(1.0, 1, 1), Err(Error::InvalidClassCount(1))));
        assert!(lc_binary(0.0, 1).is_err());
    }

    #[test]
    fn multiclass_increases_with_k_towards_kz_over_m() {
        let mut prev = 0.0;
        for k in 2..50 {
            let l = lc_multiclass(3.0, k, 4).unwrap().l;
            assert!(l > prev && l < 0.75);
            prev = l;
        }
    }

    #[test]
    fn regularization_increments() {
        assert!(close(reg_increment(&Regularization::L2(0.1), 2.0).unwrap(), 0.2, 1e-15));
        assert_eq!(reg_increment(&Regularization::None, 2.0).unwrap(), 0.0);
        let g = Matrix::from_diagonal(&[1.0, 2.0]);
        let inc = reg_increment(&Regularization::Tikhonov(g), 1.0).unwrap();
        assert!(close(inc, 2.0 * 17f64.sqrt(), 1e-15));
        let bad = Matrix::zeros(2, 3);
        assert!(reg_increment(&Regularization::Tikhonov(bad), 1.0).is_err());
    }

    #[test]
    fn regularization_is_additive() {
        let plain = lc_binary(3.0, 10).unwrap();
        let reg = plain.clone().with_regularization(&Regularization::L2(0.01), 5.0).unwrap();
        assert_eq!(reg.l, plain.l + 0.05);
        assert_eq!(reg.base, plain.l);
        assert_eq!(reg.alpha, 1.0 / reg.l);
    }

    #[test]
    fn kz_examples() {
        assert_eq!(compute_kz(&Matrix::from_rows(&[[3.0, 4.0]]).unwrap()).unwrap(), 5.0);
        assert_eq!(compute_kz(&Matrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(compute_kz(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn loss_examples() {
        let ls = LossSpec::new(LossKind::LeastSquares);
        let y = Matrix::column_vector(&[1.0, -2.0]);
        assert_eq!(loss_value(&ls, &y, &y, &[1.0], 2).unwrap(), 0.0);
        let l2 = ls.clone().with_regularization(Regularization::L2(0.5));
        // (0.5/2)(1 + 4)
        assert_eq!(loss_value(&l2, &y, &y, &[1.0, 2.0], 2).unwrap(), 1.25);

        let bce = LossSpec::new(LossKind::BinaryCrossEntropy);
        let p = Matrix::column_vector(&[0.5, 0.5]);
        let t = Matrix::column_vector(&[0.0, 1.0]);
        assert!(close(loss_value(&bce, &p, &t, &[], 2).unwrap(), 2f64.ln(), 1e-15));

        let ce = LossSpec::new(LossKind::MulticlassCrossEntropy);
        let p = Matrix::filled(3, 4, 0.25);
        let t = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]).unwrap();
        assert!(close(loss_value(&ce, &p, &t, &[], 3).unwrap(), 4f64.ln(), 1e-15));
    }

    #[test]
    fn loss_is_finite_at_saturated_predictions() {
        let bce = LossSpec::new(LossKind::BinaryCrossEntropy);
        let p = Matrix::column_vector(&[0.0, 1.0]);
        let t = Matrix::column_vector(&[1.0, 0.0]);
        let v = loss_value(&bce, &p, &t, &[], 2).unwrap();
        assert!(v.is_finite() && v > 27.0);
    }

    #[test]
    fn tikhonov_penalty_and_gradient() {
        let g = Matrix::from_rows(&[[1.0, 1.0], [0.0, 2.0]]).unwrap();
        let reg = Regularization::Tikhonov(g);
        let w = [1.0, -1.0];
        // Γw = [0, -2]
        assert_eq!(reg.penalty(&w).unwrap(), 4.0);
        // 2 Γᵀ Γ w = 2 [0, -4]
        assert_eq!(reg.penalty_gradient(&w).unwrap(), [0.0, -8.0]);
        assert!(reg.penalty(&[1.0]).is_err());
    }
}
