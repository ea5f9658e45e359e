use nalgebra::DVector;
use rand::Rng;

use super::{DataModel, Dataset, LossKind, LossModel};
use crate::geometry::GaussianMeasure;
use crate::stats::mean_and_std_error;
use crate::{Error, Result};

/// `R_S(h) = (1/m) sum_i l(h, z_i)`.
pub fn empirical_risk(loss: &LossModel, h: &DVector<f64>, s: &Dataset) -> f64 {
    s.points().iter().map(|z| loss.evaluate(h, z)).sum::<f64>() / s.len() as f64
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Nested Monte Carlo estimate of the generalisation gap
/// `E_{h~Q}[R(h) - R_S(h)]`.
///
/// Each of the `n_h` predictors drawn from `q` gets its own fresh batch of
/// `n_test` points from `data`, so the per-predictor gaps are i.i.d. given `S`
/// and the standard error is their sample deviation over `sqrt(n_h)`.
pub fn gap_estimate<R: Rng + ?Sized>(
    loss: &LossModel,
    q: &GaussianMeasure,
    s: &Dataset,
    data: &DataModel,
    n_h: usize,
    n_test: usize,
    rng: &mut R,
) -> Result<GapEstimate> {
    if n_h == 0 || n_test == 0 {
        return Err(Error::invalid("gap_estimate needs n_h >= 1 and n_test >= 1"));
    }
    loss.check_dims(q.dim(), s.z_dim())?;
    loss.check_dims(q.dim(), data.z_dim())?;
    let gaps: Vec<f64> = (0..n_h)
        .map(|_| {
            let h = q.sample_point(rng);
            let test: f64 = (0..n_test)
                .map(|_| loss.evaluate(&h, &data.sample(rng)))
                .sum::<f64>()
                / n_test as f64;
            test - empirical_risk(loss, &h, s)
        })
        .collect();
    let (value, std_error) = mean_and_std_error(&gaps);
    Ok(GapEstimate { value, std_error })
}

fn plain_gaussian_parts<'a>(loss: &LossModel, data: &'a DataModel) -> Result<(&'a [f64], f64)> {
    match (loss.kind(), data) {
        (LossKind::QuadraticPlain { .. }, DataModel::Gaussian { mean, std }) => Ok((mean, *std)),
        _ => Err(Error::Unsupported(
            "closed-form population risk needs quadratic_plain with gaussian data".into(),
        )),
    }
}

/// Population risk of `quadratic_plain` at `h` under `N(mu, s^2 I)` data:
/// `(|h - mu|^2 + d s^2) / 2`.
pub fn quadratic_plain_population_risk(
    loss: &LossModel,
    h: &DVector<f64>,
    data: &DataModel,
) -> Result<f64> {
    let (mean, std) = plain_gaussian_parts(loss, data)?;
    loss.check_dims(h.len(), mean.len())?;
    let mu = DVector::from_column_slice(mean);
    Ok(loss.scale() * 0.5 * ((h - mu).norm_squared() + mean.len() as f64 * std * std))
}

/// Exact gap `E_Q[R(h) - R_S(h)]` for `quadratic_plain` with Gaussian data.
/// The covariance of `Q` cancels.
pub fn quadratic_plain_gap(
    loss: &LossModel,
    q: &GaussianMeasure,
    s: &Dataset,
    data: &DataModel,
) -> Result<f64> {
    let m = q.mean();
    let population = quadratic_plain_population_risk(loss, m, data)?;
    loss.check_dims(q.dim(), s.z_dim())?;
    Ok(population - empirical_risk(loss, m, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{builtin_loss, LossParams};
    use crate::rng_stream;

    fn plain() -> LossModel {
        builtin_loss("quadratic_plain", &LossParams::new()).unwrap()
    }

    fn gaussian_data(d: usize) -> DataModel {
        DataModel::Gaussian {
            mean: (0..d).map(|i| 0.5 * i as f64).collect(),
            std: 1.0,
        }
    }

    #[test]
    fn risk_of_constant_loss() {
        let z = DVector::from_vec(vec![1.0, 2.0]);
        let s = Dataset::new(vec![z.clone(); 4]).unwrap();
        let h = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(empirical_risk(&plain(), &h, &s), 2.5);
    }

    #[test]
    fn risk_with_one_point() {
        let s = Dataset::new(vec![DVector::from_vec(vec![3.0])]).unwrap();
        let h = DVector::from_vec(vec![1.0]);
        assert_eq!(empirical_risk(&plain(), &h, &s), plain().evaluate(&h, &s.points()[0]));
    }

    #[test]
    fn risk_of_three_points() {
        let s = Dataset::new(vec![
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![-2.0]),
            DVector::from_vec(vec![4.0]),
        ])
        .unwrap();
        let h = DVector::from_vec(vec![0.5]);
        // (0.25 + 6.25 + 12.25) / 2 / 3
        assert!((empirical_risk(&plain(), &h, &s) - 3.125).abs() < 1e-15);
    }

    #[test]
    fn risk_is_linear_in_scale() {
        let s = Dataset::new(vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![0.0, 2.0])]).unwrap();
        let h = DVector::from_vec(vec![0.3, -0.7]);
        let base = empirical_risk(&plain(), &h, &s);
        let scaled = empirical_risk(&plain().scaled(3.5).unwrap(), &h, &s);
        assert!((scaled - 3.5 * base).abs() < 1e-14);
    }

    #[test]
    fn degenerate_data_gives_exact_zero_gap() {
        let data = DataModel::Gaussian {
            mean: vec![1.0, -1.0],
            std: 0.0,
        };
        let mut rng = rng_stream(21);
        let s = data.sample_dataset(10, &mut rng).unwrap();
        let q = GaussianMeasure::standard(2).unwrap();
        let g = gap_estimate(&plain(), &q, &s, &data, 20, 5, &mut rng).unwrap();
        assert!(g.value.abs() < 1e-14 && g.std_error < 1e-14, "{g:?}");
    }

    #[test]
    fn gap_matches_closed_form() {
        let d = 3;
        let data = gaussian_data(d);
        let mut rng = rng_stream(22);
        let s = data.sample_dataset(25, &mut rng).unwrap();
        let q = GaussianMeasure::isotropic(DVector::from_vec(vec![0.2, -0.1, 0.4]), 0.5).unwrap();
        let exact = quadratic_plain_gap(&plain(), &q, &s, &data).unwrap();
        let g = gap_estimate(&plain(), &q, &s, &data, 2000, 50, &mut rng).unwrap();
        assert!((g.value - exact).abs() <= 3.0 * g.std_error, "{g:?} vs {exact}");
    }

    #[test]
    fn gap_is_unbiased_over_resampled_datasets() {
        let d = 2;
        let data = gaussian_data(d);
        let q = GaussianMeasure::isotropic(DVector::from_vec(vec![1.0, 0.0]), 0.3).unwrap();
        let mut rng = rng_stream(23);
        let gaps: Vec<f64> = (0..200)
            .map(|_| {
                let s = data.sample_dataset(10, &mut rng).unwrap();
                gap_estimate(&plain(), &q, &s, &data, 20, 20, &mut rng).unwrap().value
            })
            .collect();
        let (mean, se) = mean_and_std_error(&gaps);
        assert!(mean.abs() <= 3.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn closed_form_rejects_other_losses() {
        let l = builtin_loss("logistic_margin", &[("x_bound".to_string(), 1.0)].into()).unwrap();
        let h = DVector::zeros(2);
        assert!(quadratic_plain_population_risk(&l, &h, &gaussian_data(2)).is_err());
    }

    #[test]
    fn gap_checks_dimensions() {
        let data = gaussian_data(2);
        let mut rng = rng_stream(24);
        let s = data.sample_dataset(5, &mut rng).unwrap();
        let q = GaussianMeasure::standard(3).unwrap();
        assert!(gap_estimate(&plain(), &q, &s, &data, 1, 1, &mut rng).is_err());
        let q = GaussianMeasure::standard(2).unwrap();
        assert!(gap_estimate(&plain(), &q, &s, &data, 0, 1, &mut rng).is_err());
    }
}
