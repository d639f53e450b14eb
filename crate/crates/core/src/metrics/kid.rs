use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{FeatureSet, MetricsError};

/// Cubic polynomial kernel `(a.b / d + 1)^3`.
pub fn polynomial_kernel(a: &[f64], b: &[f64]) -> f64 {
    let d = a.len() as f64;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / d + 1.0).powi(3)
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sum of `k(a_i, b_j)` over all pairs, skipping `i == j` when `skip_diagonal`.
///
/// Rows are reduced independently and then combined in row order, so the
/// result does not depend on how rayon splits the work.
fn kernel_sum(a: &[Vec<f64>], b: &[Vec<f64>], skip_diagonal: bool) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .enumerate()
        .map(|(i, ai)| {
            compensated_sum(
                b.iter()
                    .enumerate()
                    .filter(|(j, _)| !(skip_diagonal && *j == i))
                    .map(|(_, bj)| polynomial_kernel(ai, bj)),
            )
        })
        .collect();
    compensated_sum(rows)
}

fn check_pair(x: &FeatureSet, y: &FeatureSet) -> Result<(), MetricsError> {
    if x.dim() != y.dim() {
        return Err(MetricsError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    for set in [x, y] {
        if set.len() < 2 {
            return Err(MetricsError::TooFewVectors {
                tag: set.source_tag.clone(),
                count: set.len(),
            });
        }
    }
    Ok(())
}

/// Unbiased estimate of the squared maximum mean discrepancy. Can be negative.
pub fn mmd2_unbiased(x: &FeatureSet, y: &FeatureSet) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    let (m, n) = (x.len() as f64, y.len() as f64);
    let kxx = kernel_sum(&x.vectors, &x.vectors, true) / (m * (m - 1.0));
    let kyy = kernel_sum(&y.vectors, &y.vectors, true) / (n * (n - 1.0));
    let kxy = kernel_sum(&x.vectors, &y.vectors, false) / (m * n);
    Ok(kxx + kyy - 2.0 * kxy)
}

/// Kernel Inception Distance between a perturbed and a clean feature set,
/// estimated once over the full sets.
pub fn kid(perturbed: &FeatureSet, clean: &FeatureSet) -> Result<f64, MetricsError> {
    mmd2_unbiased(perturbed, clean)
}

/// Optional subset averaging for KID.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsetOptions {
    pub subset_size: usize,
    pub subsets: usize,
    pub seed: u64,
}

/// KID averaged over `subsets` random subsets drawn without replacement.
pub fn kid_subsampled(
    perturbed: &FeatureSet,
    clean: &FeatureSet,
    opts: SubsetOptions,
) -> Result<f64, MetricsError> {
    check_pair(perturbed, clean)?;
    if opts.subsets == 0 {
        return Err(MetricsError::InvalidSubsets(
            "zero subsets requested".into(),
        ));
    }
    let size = opts.subset_size;
    if size < 2 || size > perturbed.len() || size > clean.len() {
        return Err(MetricsError::InvalidSubsets(format!(
            "subset size {size} must be in [2, {}]",
            perturbed.len().min(clean.len())
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut estimates = Vec::with_capacity(opts.subsets);
    for _ in 0..opts.subsets {
        let pick = |set: &FeatureSet, rng: &mut ChaCha8Rng| FeatureSet {
            vectors: index::sample(rng, set.len(), size)
                .iter()
                .map(|i| set.vectors[i].clone())
                .collect(),
            source_tag: set.source_tag.clone(),
        };
        let a = pick(perturbed, &mut rng);
        let b = pick(clean, &mut rng);
        estimates.push(mmd2_unbiased(&a, &b)?);
    }
    Ok(compensated_sum(estimates.iter().copied()) / opts.subsets as f64)
}

/// `(KID(a_i) - KID(a_{i-1})) / KID(a_max)`.
pub fn delta_kid_normalized(kid_at: f64, kid_prev: f64, kid_max: f64) -> Result<f64, MetricsError> {
    if !(kid_max > 0.0) {
        return Err(MetricsError::NonDegrading(kid_max));
    }
    Ok((kid_at - kid_prev) / kid_max)
}

/// Accuracy drop `MA(a_{i-1}) - MA(a_i)`; negative when accuracy recovers.
pub fn delta_ma(ma_prev: f64, ma_at: f64) -> Result<f64, MetricsError> {
    for v in [ma_prev, ma_at] {
        if !(0.0..=1.0).contains(&v) {
            return Err(MetricsError::AccuracyOutOfRange(v));
        }
    }
    Ok(ma_prev - ma_at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn set(vs: Vec<Vec<f64>>) -> FeatureSet {
        FeatureSet::new(vs, "t").unwrap()
    }

    /// Straight double loop over every pair.
    fn brute_force(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
        let k = |a: &Vec<f64>, b: &Vec<f64>| {
            let mut dot = 0.0;
            for i in 0..a.len() {
                dot += a[i] * b[i];
            }
            let base = dot / a.len() as f64 + 1.0;
            base * base * base
        };
        let (m, n) = (x.len(), y.len());
        let mut sxx = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    sxx += k(&x[i], &x[j]);
                }
            }
        }
        let mut syy = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    syy += k(&y[i], &y[j]);
                }
            }
        }
        let mut sxy = 0.0;
        for xi in x {
            for yj in y {
                sxy += k(xi, yj);
            }
        }
        sxx / (m * (m - 1)) as f64 + syy / (n * (n - 1)) as f64 - 2.0 * sxy / (m * n) as f64
    }

    #[test]
    fn repeated_vector_gives_zero() {
        let v = vec![0.3, -1.2, 4.0];
        let x = set(vec![v.clone(), v.clone()]);
        assert_eq!(mmd2_unbiased(&x, &x.clone()).unwrap(), 0.0);
    }

    #[test]
    fn unit_basis_pair() {
        // k(e1,e1) = 1.5^3 = 3.375 (diagonal D), k(e1,e2) = 1 (off-diagonal A).
        // Within-set means use only off-diagonal pairs (A = 1); the cross mean
        // averages D and A: (3.375 + 1) / 2. Result 2A - 2(A + D)/2 = A - D.
        let x = set(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let got = mmd2_unbiased(&x, &x.clone()).unwrap();
        assert!((got - (1.0 - 3.375)).abs() < 1e-12);
        assert!((got - brute_force(&x.vectors, &x.vectors)).abs() < 1e-12);
    }

    #[test]
    fn five_vector_fixture_matches_double_loop() {
        let x = vec![
            vec![0.1, 0.5, -0.3],
            vec![1.2, -0.4, 0.0],
            vec![0.7, 0.7, 0.7],
            vec![-1.0, 0.2, 0.9],
            vec![0.0, 0.0, 2.0],
        ];
        let y = vec![
            vec![0.3, 0.1, 0.2],
            vec![-0.5, 1.5, 0.4],
            vec![2.0, 0.0, -1.0],
            vec![0.9, 0.9, 0.1],
            vec![0.2, -0.8, 1.1],
        ];
        let got = mmd2_unbiased(&set(x.clone()), &set(y.clone())).unwrap();
        assert!((got - brute_force(&x, &y)).abs() < 1e-9);
    }

    #[test]
    fn identical_distinct_sets_are_non_positive() {
        let x = set(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]);
        let got = kid(&x, &x.clone()).unwrap();
        assert!(got <= 0.0);
        assert!((got - brute_force(&x.vectors, &x.vectors)).abs() < 1e-12);
    }

    #[test]
    fn shifted_set_is_positive() {
        let clean = set(vec![
            vec![0.0, 1.0, 0.5],
            vec![1.0, 0.0, 0.2],
            vec![0.3, 0.3, 0.3],
        ]);
        let shifted = set(clean
            .vectors
            .iter()
            .map(|v| v.iter().map(|x| x + 10.0).collect())
            .collect());
        let got = kid(&shifted, &clean).unwrap();
        assert!(got > 0.0);
        let oracle = brute_force(&shifted.vectors, &clean.vectors);
        assert!((got - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn errors() {
        let a = set(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let b = set(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]]);
        assert!(matches!(
            mmd2_unbiased(&a, &b),
            Err(MetricsError::DimensionMismatch { .. })
        ));
        let one = set(vec![vec![0.0, 1.0]]);
        assert!(matches!(
            mmd2_unbiased(&a, &one),
            Err(MetricsError::TooFewVectors { .. })
        ));
    }

    #[test]
    fn increments() {
        assert_eq!(delta_kid_normalized(0.3, 0.3, 1.0).unwrap(), 0.0);
        assert_eq!(delta_kid_normalized(0.8, 0.0, 0.8).unwrap(), 1.0);
        assert!((delta_kid_normalized(0.6, 0.2, 0.8).unwrap() - 0.5).abs() < 1e-15);
        assert!(delta_kid_normalized(0.6, 0.2, 0.0).is_err());
        assert!((delta_ma(0.9, 0.7).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(delta_ma(0.4, 0.4).unwrap(), 0.0);
        assert!((delta_ma(0.95, 1.0).unwrap() + 0.05).abs() < 1e-15);
        assert!(delta_ma(1.2, 0.5).is_err());
    }

    #[test]
    fn subset_kid_with_full_subsets_equals_full_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = set((0..6)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect());
        let y = set((0..6)
            .map(|_| (0..4).map(|_| rng.random::<f64>() + 0.2).collect())
            .collect());
        let opts = SubsetOptions {
            subset_size: 6,
            subsets: 3,
            seed: 4,
        };
        let full = kid(&x, &y).unwrap();
        assert!((kid_subsampled(&x, &y, opts).unwrap() - full).abs() < 1e-12);
        let bad = SubsetOptions {
            subset_size: 7,
            ..opts
        };
        assert!(kid_subsampled(&x, &y, bad).is_err());
    }

    fn feature_sets() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        (1usize..=8, 2usize..=10, 2usize..=10).prop_flat_map(|(d, m, n)| {
            (
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), m),
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_brute_force((x, y) in feature_sets()) {
            let (fx, fy) = (set(x.clone()), set(y.clone()));
            let xy = mmd2_unbiased(&fx, &fy).unwrap();
            let yx = mmd2_unbiased(&fy, &fx).unwrap();
            prop_assert!((xy - yx).abs() <= 1e-12 * xy.abs().max(1.0));
            prop_assert!((xy - brute_force(&x, &y)).abs() <= 1e-9);
        }
    }
}
