//! Sampling policy over solved levels and the training loop that keeps it
//! current.

mod learner;
mod training;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::augment::{AugmentationKind, AugmentationSpec};
use crate::sensitivity::LevelSet;

pub use learner::{KindDynamics, LearnerConfig, SimulatedLearner};
pub use training::{
    offline_copies, training_loop, LogEvent, LogRecord, LoopConfig, LoopError, LoopOutcome,
    MemoryProbe, TrackedImage, Trainer, TrainerError, TrainingImage,
};

pub const DEFAULT_A: f64 = 0.75;
pub const DEFAULT_B: f64 = 1.0;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("beta-binomial parameters out of domain: n = {n}, k = {k}, a = {a}, b = {b}")]
    Domain { n: u64, k: u64, a: f64, b: f64 },
    #[error("no levels to build a policy from")]
    Empty,
    #[error("{kind}: {levels} levels but {ma} accuracies")]
    MissingAccuracy {
        kind: AugmentationKind,
        levels: usize,
        ma: usize,
    },
    #[error("invalid policy: {0}")]
    Invalid(String),
}

/// `C(n, k) B(k + a, n - k + b) / B(a, b)`, evaluated through log-gamma.
pub fn beta_binomial_pmf(n: u64, k: u64, a: f64, b: f64) -> Result<f64, PolicyError> {
    if k > n || !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(PolicyError::Domain { n, k, a, b });
    }
    let (n, k) = (n as f64, k as f64);
    let ln_choose = ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0);
    let ln_beta = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    Ok((ln_choose + ln_beta(k + a, n - k + b) - ln_beta(a, b)).exp())
}

/// The full pmf over `0..=n`, rescaled so it sums to one.
pub fn beta_binomial_weights(n: u64, a: f64, b: f64) -> Result<Vec<f64>, PolicyError> {
    let raw = (0..=n)
        .map(|k| beta_binomial_pmf(n, k, a, b))
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|p| p / total).collect())
}

/// Order of entries before pmf mass is assigned by index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    /// Lowest accuracy first, so the hardest levels get the most mass.
    #[default]
    Ascending,
    Descending,
}

impl std::str::FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ascending" => Ok(SortOrder::Ascending),
            "descending" => Ok(SortOrder::Descending),
            other => Err(format!(
                "sort order must be ascending or descending, got {other:?}"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOptions {
    pub a: f64,
    pub b: f64,
    pub order: SortOrder,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        Self {
            a: DEFAULT_A,
            b: DEFAULT_B,
            order: SortOrder::Ascending,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub kind: AugmentationKind,
    pub alpha: f64,
    pub ma: f64,
}

#[derive(Serialize, Deserialize)]
struct PolicyRepr {
    entries: Vec<PolicyEntry>,
    pmf: Vec<f64>,
}

/// Categorical distribution over `(kind, level)` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr", into = "PolicyRepr")]
pub struct AugmentationPolicy {
    entries: Vec<PolicyEntry>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl TryFrom<PolicyRepr> for AugmentationPolicy {
    type Error = PolicyError;

    fn try_from(r: PolicyRepr) -> Result<Self, PolicyError> {
        Self::from_parts(r.entries, r.pmf)
    }
}

impl From<AugmentationPolicy> for PolicyRepr {
    fn from(p: AugmentationPolicy) -> Self {
        PolicyRepr {
            entries: p.entries,
            pmf: p.pmf,
        }
    }
}

impl AugmentationPolicy {
    pub fn from_parts(entries: Vec<PolicyEntry>, pmf: Vec<f64>) -> Result<Self, PolicyError> {
        if entries.is_empty() {
            return Err(PolicyError::Empty);
        }
        if entries.len() != pmf.len() {
            return Err(PolicyError::Invalid(format!(
                "{} entries but {} probabilities",
                entries.len(),
                pmf.len()
            )));
        }
        if pmf.iter().any(|p| !(*p >= 0.0)) || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(PolicyError::Invalid(
                "probabilities must be non-negative and sum to 1".into(),
            ));
        }
        let cdf = pmf
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { entries, pmf, cdf })
    }

    pub fn entries(&self) -> &[PolicyEntry] {
        &self.entries
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inverse-CDF draw. Consumes one `f64` for the entry and one `u64` for
    /// the augmentation's own seed.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> AugmentationSpec {
        let u: f64 = rng.random();
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.entries.len() - 1);
        let e = self.entries[i];
        AugmentationSpec {
            kind: e.kind,
            magnitude: e.alpha,
            seed: rng.next_u64(),
        }
    }
}

/// [`build_policy_with`] using `BetaBinom(n, 0.75, 1.0)` and ascending order.
pub fn build_policy(level_sets: &[LevelSet]) -> Result<AugmentationPolicy, PolicyError> {
    build_policy_with(level_sets, &PolicyOptions::default())
}

/// Flattens every `(kind, level)` pair, sorts by measured accuracy and gives
/// the entry at index `k` the mass `BetaBinom(k; n, a, b)`. Ties in accuracy
/// fall back to kind order, then alpha.
pub fn build_policy_with(
    level_sets: &[LevelSet],
    opts: &PolicyOptions,
) -> Result<AugmentationPolicy, PolicyError> {
    let mut entries = Vec::new();
    for set in level_sets {
        if set.level_ma.len() != set.levels.len() {
            return Err(PolicyError::MissingAccuracy {
                kind: set.kind,
                levels: set.levels.len(),
                ma: set.level_ma.len(),
            });
        }
        entries.extend(
            set.levels
                .iter()
                .zip(&set.level_ma)
                .map(|(&alpha, &ma)| PolicyEntry {
                    kind: set.kind,
                    alpha,
                    ma,
                }),
        );
    }
    if entries.is_empty() {
        return Err(PolicyError::Empty);
    }
    entries.sort_by(|x, y| {
        let by_ma = x.ma.total_cmp(&y.ma);
        let by_ma = match opts.order {
            SortOrder::Ascending => by_ma,
            SortOrder::Descending => by_ma.reverse(),
        };
        by_ma
            .then(x.kind.cmp(&y.kind))
            .then(x.alpha.total_cmp(&y.alpha))
    });
    let pmf = beta_binomial_weights(entries.len() as u64 - 1, opts.a, opts.b)?;
    AugmentationPolicy::from_parts(entries, pmf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// `C(n,k) (a)_k (b)_{n-k} / (a+b)_n` with rising factorials, no gamma.
    fn rising_oracle(n: u64, k: u64, a: f64, b: f64) -> f64 {
        let mut choose = 1.0;
        for i in 0..k {
            choose = choose * (n - i) as f64 / (i + 1) as f64;
        }
        let rising = |x: f64, m: u64| (0..m).fold(1.0, |acc, j| acc * (x + j as f64));
        choose * rising(a, k) * rising(b, n - k) / rising(a + b, n)
    }

    #[test]
    fn trivial_cases() {
        assert!((beta_binomial_pmf(0, 0, 0.3, 4.0).unwrap() - 1.0).abs() < 1e-14);
        for k in 0..=7 {
            assert!((beta_binomial_pmf(7, k, 1.0, 1.0).unwrap() - 1.0 / 8.0).abs() < 1e-14);
        }
        assert!(beta_binomial_pmf(3, 4, 1.0, 1.0).is_err());
        assert!(beta_binomial_pmf(3, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn four_trials_reference_values() {
        let want = [0.2800, 0.2100, 0.1838, 0.1684, 0.1579];
        let got: Vec<f64> = (0..=4)
            .map(|k| beta_binomial_pmf(4, k, 0.75, 1.0).unwrap())
            .collect();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 5e-4, "{got:?}");
        }
        assert!(got.windows(2).all(|w| w[0] > w[1]));
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_rising_factorial_oracle() {
        for n in 0..=64 {
            for k in 0..=n {
                let got = beta_binomial_pmf(n, k, 0.75, 1.0).unwrap();
                assert!(
                    (got - rising_oracle(n, k, 0.75, 1.0)).abs() < 1e-12,
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn raw_pmf_is_normalised() {
        for n in 0..=64u64 {
            let total: f64 = (0..=n)
                .map(|k| beta_binomial_pmf(n, k, 0.75, 1.0).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn weights_sum_to_one_and_decrease() {
        for n in (1..=1024u64).step_by(17).chain([95, 1024]) {
            let w = beta_binomial_weights(n, 0.75, 1.0).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.windows(2).all(|p| p[0] > p[1]), "n={n}");
        }
        let two = beta_binomial_weights(1, 0.75, 1.0).unwrap();
        assert!((two[0] - 4.0 / 7.0).abs() < 1e-15 && (two[1] - 3.0 / 7.0).abs() < 1e-15);
    }

    fn level_set(kind: AugmentationKind, levels: &[f64], ma: &[f64]) -> LevelSet {
        LevelSet {
            kind,
            levels: levels.to_vec(),
            uncertainties: vec![0.0; levels.len()],
            level_ma: ma.to_vec(),
            evaluations_used: 0,
            samples: vec![],
            converged: true,
            fallback: false,
        }
    }

    #[test]
    fn worst_level_gets_the_most_mass() {
        let p = build_policy(&[level_set(
            AugmentationKind::Blur,
            &[0.2, 0.5, 0.8],
            &[0.9, 0.5, 0.7],
        )])
        .unwrap();
        let ma: Vec<f64> = p.entries().iter().map(|e| e.ma).collect();
        assert_eq!(ma, vec![0.5, 0.7, 0.9]);
        assert_eq!(p.entries()[0].alpha, 0.5);
        let want = beta_binomial_weights(2, 0.75, 1.0).unwrap();
        assert_eq!(p.pmf(), want.as_slice());
        let d = build_policy_with(
            &[level_set(
                AugmentationKind::Blur,
                &[0.2, 0.5, 0.8],
                &[0.9, 0.5, 0.7],
            )],
            &PolicyOptions {
                order: SortOrder::Descending,
                ..PolicyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(d.entries()[0].ma, 0.9);
    }

    #[test]
    fn ties_follow_kind_then_alpha() {
        let sets = [
            level_set(AugmentationKind::Noise, &[0.3, 0.1], &[0.6, 0.6]),
            level_set(AugmentationKind::RLighter, &[0.4], &[0.6]),
        ];
        let p = build_policy(&sets).unwrap();
        let order: Vec<(AugmentationKind, f64)> =
            p.entries().iter().map(|e| (e.kind, e.alpha)).collect();
        assert_eq!(
            order,
            vec![
                (AugmentationKind::RLighter, 0.4),
                (AugmentationKind::Noise, 0.1),
                (AugmentationKind::Noise, 0.3)
            ]
        );
    }

    #[test]
    fn all_kinds_policy_cardinality() {
        let sets: Vec<LevelSet> = AugmentationKind::ALL
            .iter()
            .map(|&k| level_set(k, &[0.2, 0.4, 0.6, 0.8], &[0.8, 0.7, 0.6, 0.5]))
            .collect();
        let p = build_policy(&sets).unwrap();
        assert_eq!(p.len(), 96);
        assert!((p.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(build_policy(&[]), Err(PolicyError::Empty)));
        assert!(matches!(
            build_policy(&[level_set(AugmentationKind::Blur, &[0.2, 0.4], &[0.5])]),
            Err(PolicyError::MissingAccuracy { .. })
        ));
    }

    #[test]
    fn sampling_frequencies_follow_pmf() {
        let p =
            build_policy(&[level_set(AugmentationKind::Blur, &[0.2, 0.6], &[0.9, 0.4])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| p.sample(&mut rng).magnitude == 0.6)
            .count();
        assert!((hits as f64 / draws as f64 - 4.0 / 7.0).abs() < 0.01);
    }

    #[test]
    fn single_entry_and_determinism() {
        let p = build_policy(&[level_set(AugmentationKind::Noise, &[0.3], &[0.5])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = p.sample(&mut rng);
            assert_eq!((s.kind, s.magnitude), (AugmentationKind::Noise, 0.3));
        }
        let p = build_policy(&[level_set(
            AugmentationKind::Blur,
            &[0.2, 0.5, 0.8],
            &[0.9, 0.5, 0.7],
        )])
        .unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| p.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn json_snapshot_round_trips() {
        let p =
            build_policy(&[level_set(AugmentationKind::Blur, &[0.2, 0.5], &[0.9, 0.5])]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.starts_with(r#"{"entries":[{"kind":"blur","alpha":0.5,"ma":0.5}"#));
        let back: AugmentationPolicy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<AugmentationPolicy>(r#"{"entries":[],"pmf":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn scaling_accuracy_keeps_order(ma in prop::collection::vec(0.01f64..1.0, 1..12), c in 0.1f64..10.0) {
            let levels: Vec<f64> = (0..ma.len()).map(|i| (i + 1) as f64 / (ma.len() + 1) as f64).collect();
            let scaled: Vec<f64> = ma.iter().map(|m| m * c).collect();
            let a = build_policy(&[level_set(AugmentationKind::Blur, &levels, &ma)]).unwrap();
            let b = build_policy(&[level_set(AugmentationKind::Blur, &levels, &scaled)]).unwrap();
            let alphas = |p: &AugmentationPolicy| p.entries().iter().map(|e| e.alpha).collect::<Vec<_>>();
            prop_assert_eq!(alphas(&a), alphas(&b));
        }
    }
}
