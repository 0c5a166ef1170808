//! Selection quality curves and LDA test error on selected variables.

use nalgebra::{DMatrix, DVector};

use crate::data::{Class, LabeledMatrix};
use crate::error::{Error, Result};
use crate::simdata::GroundTruth;

/// Ridge added to a singular pooled covariance, relative to its mean diagonal.
pub const LDA_RIDGE: f64 = 1e-6;

/// `|top-k ∩ non-null|` for `k = 1..=max_k` (capped at the ranking length).
pub fn true_nonnull_curve(ranked: &[usize], truth: &GroundTruth, max_k: usize) -> Vec<usize> {
    let mut hits = 0;
    ranked
        .iter()
        .take(max_k)
        .map(|&v| {
            hits += usize::from(truth.is_non_null(v));
            hits
        })
        .collect()
}

/// False discovery proportion `1 - true_nonnull(k) / k` for `k = 1..=max_k`.
pub fn fdp_curve(ranked: &[usize], truth: &GroundTruth, max_k: usize) -> Vec<f64> {
    true_nonnull_curve(ranked, truth, max_k)
        .iter()
        .enumerate()
        .map(|(k, &hits)| 1.0 - hits as f64 / (k + 1) as f64)
        .collect()
}

/// Pooled-covariance linear discriminant fitted on selected columns.
#[derive(Debug, Clone)]
pub struct Lda {
    selected: Vec<usize>,
    weights: DVector<f64>,
    offset: f64,
}

impl Lda {
    pub fn fit(train: &LabeledMatrix, selected: &[usize]) -> Result<Lda> {
        if selected.is_empty() {
            return Err(Error::InvalidArgument("LDA needs at least one variable".into()));
        }
        if let Some(&bad) = selected.iter().find(|&&v| v >= train.d()) {
            return Err(Error::InvalidArgument(format!("variable {bad} out of range")));
        }
        let k = selected.len();
        let (n1, n2) = (train.n1() as f64, train.n2() as f64);
        let labels = train.labels();
        let mut mean1 = DVector::<f64>::zeros(k);
        let mut mean2 = DVector::<f64>::zeros(k);
        for (a, &v) in selected.iter().enumerate() {
            for (&x, &c) in train.column(v).iter().zip(labels) {
                match c {
                    Class::Positive => mean1[a] += x / n1,
                    Class::Negative => mean2[a] += x / n2,
                }
            }
        }
        let n = train.n();
        let mut centered = DMatrix::<f64>::zeros(n, k);
        for (a, &v) in selected.iter().enumerate() {
            for (r, (&x, &c)) in train.column(v).iter().zip(labels).enumerate() {
                centered[(r, a)] = x - if c == Class::Positive { mean1[a] } else { mean2[a] };
            }
        }
        let mut cov = centered.tr_mul(&centered) / (n - 2) as f64;

        if k > n - 2 {
            log::warn!("{k} variables with {n} samples; pooled covariance is regularized");
        }
        let diff = &mean1 - &mean2;
        let solved = match (k <= n - 2).then(|| cov.clone().cholesky()).flatten() {
            Some(chol) => chol.solve(&diff),
            None => {
                let ridge = LDA_RIDGE * cov.trace() / k as f64;
                let ridge = if ridge > 0.0 { ridge } else { LDA_RIDGE };
                for a in 0..k {
                    cov[(a, a)] += ridge;
                }
                cov.cholesky()
                    .ok_or_else(|| Error::IllPosed("regularized covariance is not positive definite".into()))?
                    .solve(&diff)
            }
        };
        let mid = (&mean1 + &mean2) / 2.0;
        let offset = -solved.dot(&mid) + (n1 / n2).ln();
        Ok(Lda {
            selected: selected.to_vec(),
            weights: solved,
            offset,
        })
    }

    pub fn predict(&self, data: &LabeledMatrix) -> Vec<Class> {
        let mut score = vec![self.offset; data.n()];
        for (a, &v) in self.selected.iter().enumerate() {
            let w = self.weights[a];
            for (s, x) in score.iter_mut().zip(data.column(v)) {
                *s += w * x;
            }
        }
        score
            .into_iter()
            .map(|s| if s > 0.0 { Class::Positive } else { Class::Negative })
            .collect()
    }
}

/// Misclassification rate on `test` of an LDA fitted on `train[selected]`.
pub fn lda_error(train: &LabeledMatrix, test: &LabeledMatrix, selected: &[usize]) -> Result<f64> {
    if train.d() != test.d() {
        return Err(Error::InvalidArgument(format!(
            "train has {} variables, test has {}",
            train.d(),
            test.d()
        )));
    }
    let lda = Lda::fit(train, selected)?;
    let wrong = lda
        .predict(test)
        .iter()
        .zip(test.labels())
        .filter(|(p, y)| p != y)
        .count();
    Ok(wrong as f64 / test.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn labels(n1: usize, n2: usize) -> Vec<Class> {
        let mut l = vec![Class::Positive; n1];
        l.extend(std::iter::repeat_n(Class::Negative, n2));
        l
    }

    #[test]
    fn perfect_ranking_curves() {
        let truth = GroundTruth::standard(100);
        let ranked: Vec<usize> = (0..100).collect();
        let c = true_nonnull_curve(&ranked, &truth, 60);
        assert_eq!(c[..50], (1..=50).collect::<Vec<_>>()[..]);
        assert_eq!(c[59], 50);
        assert!(fdp_curve(&ranked, &truth, 50).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn all_null_selection() {
        let truth = GroundTruth::standard(100);
        let ranked: Vec<usize> = (50..100).collect();
        assert!(true_nonnull_curve(&ranked, &truth, 20).iter().all(|&c| c == 0));
        assert!(fdp_curve(&ranked, &truth, 20).iter().all(|&f| f == 1.0));
    }

    #[test]
    fn fdp_identity() {
        let truth = GroundTruth::standard(80);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ranked: Vec<usize> = (0..80).collect();
        rand::seq::SliceRandom::shuffle(ranked.as_mut_slice(), &mut rng);
        let tn = true_nonnull_curve(&ranked, &truth, 80);
        let fdp = fdp_curve(&ranked, &truth, 80);
        for k in 1..=80 {
            assert_eq!(fdp[k - 1], 1.0 - tn[k - 1] as f64 / k as f64);
        }
    }

    #[test]
    fn random_ranking_hypergeometric_mean() {
        // d = 500 with 50 non-nulls: E[count in top k] = k / 10
        let truth = GroundTruth::standard(500);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (reps, k) = (2000, 30);
        let mut counts = Vec::with_capacity(reps);
        for _ in 0..reps {
            let mut ranked: Vec<usize> = (0..500).collect();
            rand::seq::SliceRandom::shuffle(ranked.as_mut_slice(), &mut rng);
            counts.push(true_nonnull_curve(&ranked, &truth, k)[k - 1] as f64);
        }
        let mean = counts.iter().sum::<f64>() / reps as f64;
        // hypergeometric variance k p (1-p) (N-k)/(N-1)
        let var = k as f64 * 0.1 * 0.9 * (500.0 - k as f64) / 499.0;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn separated_data_has_zero_error() {
        let v = DMatrix::from_row_slice(6, 2, &[5.0, 0.3, 6.0, -1.0, 5.5, 0.2, -5.0, 0.9, -6.0, 0.0, -5.5, -0.4]);
        let train = LabeledMatrix::new(v, labels(3, 3)).unwrap();
        assert_eq!(lda_error(&train, &train, &[0]).unwrap(), 0.0);
        assert!(lda_error(&train, &train, &[]).is_err());
    }

    fn gaussian(rng: &mut ChaCha8Rng, n1: usize, n2: usize, d: usize, shift: f64) -> LabeledMatrix {
        let n = n1 + n2;
        let mut v = DMatrix::<f64>::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                v[(r, c)] = z + if r < n1 && c < 3 { shift } else { 0.0 };
            }
        }
        LabeledMatrix::new(v, labels(n1, n2)).unwrap()
    }

    #[test]
    fn no_signal_error_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut errs = vec![];
        for _ in 0..20 {
            let train = gaussian(&mut rng, 50, 50, 5, 0.0);
            let test = gaussian(&mut rng, 500, 500, 5, 0.0);
            errs.push(lda_error(&train, &test, &[0, 1, 2, 3, 4]).unwrap());
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!((mean - 0.5).abs() < 0.05, "mean null error {mean}");
    }

    #[test]
    fn more_variables_than_samples_is_regularized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let train = gaussian(&mut rng, 4, 4, 12, 3.0);
        let test = gaussian(&mut rng, 100, 100, 12, 3.0);
        let sel: Vec<usize> = (0..12).collect();
        let e = lda_error(&train, &test, &sel).unwrap();
        assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn affine_rescaling_keeps_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let train = gaussian(&mut rng, 20, 20, 4, 1.0);
        let test = gaussian(&mut rng, 100, 100, 4, 1.0);
        let sel = [0, 1, 3];
        let base = Lda::fit(&train, &sel).unwrap().predict(&test);
        let scales: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0))).collect();
        let rescale = |m: &LabeledMatrix| {
            let mut v = m.values().clone();
            for (c, &(a, b)) in scales.iter().enumerate() {
                for r in 0..v.nrows() {
                    v[(r, c)] = a * v[(r, c)] + b;
                }
            }
            LabeledMatrix::new(v, m.labels().to_vec()).unwrap()
        };
        let moved = Lda::fit(&rescale(&train), &sel).unwrap().predict(&rescale(&test));
        assert_eq!(base, moved);
    }
}
