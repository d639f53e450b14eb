use std::str::FromStr;

use crate::augment::AugmentationKind;

use super::{EvalError, Evaluator, Measurement};

/// Closed-form g curves for exercising the solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticFamily {
    /// `g(alpha) = 2 * alpha^p` on `[0, 1]`.
    Power { p: f64 },
}

impl AnalyticFamily {
    pub fn g(&self, alpha: f64) -> f64 {
        match *self {
            AnalyticFamily::Power { p } => 2.0 * alpha.powf(p),
        }
    }

    /// Exact preimage of `y` under `g`.
    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            AnalyticFamily::Power { p } => (y / 2.0).powf(1.0 / p),
        }
    }
}

impl FromStr for AnalyticFamily {
    type Err = String;

    /// `power:<p>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "power" => {
                let p: f64 = params.parse().map_err(|_| {
                    format!("power family needs a numeric exponent, got {params:?}")
                })?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(format!("power exponent must be positive, got {p}"));
                }
                Ok(AnalyticFamily::Power { p })
            }
            other => Err(format!("unknown analytic family {other:?}")),
        }
    }
}

/// Synthesises `(ma, kid)` pairs whose g curve (with lambda = 2, alpha_max = 1)
/// is exactly the family's `g`.
///
/// With `h = g(alpha) - 2 alpha`, the normalised accuracy drop is
/// `alpha + max(h, 0)` and the normalised KID is `alpha + max(-h, 0)`, so
/// their difference is `h` and both vanish at 0 and reach 1 at alpha = 1.
#[derive(Clone, Debug)]
pub struct AnalyticEvaluator {
    pub family: AnalyticFamily,
    pub ma_clean: f64,
    pub ma_max: f64,
    pub kid_max: f64,
}

impl AnalyticEvaluator {
    pub fn new(family: AnalyticFamily) -> Self {
        Self {
            family,
            ma_clean: 0.9,
            ma_max: 0.3,
            kid_max: 0.05,
        }
    }

    pub fn power(p: f64) -> Self {
        Self::new(AnalyticFamily::Power { p })
    }
}

impl Evaluator for AnalyticEvaluator {
    fn evaluate(&self, _kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(format!("alpha {alpha} outside [0, 1]").into());
        }
        let h = self.family.g(alpha) - 2.0 * alpha;
        let drop = alpha + h.max(0.0);
        let ratio = alpha + (-h).max(0.0);
        Ok(Measurement {
            ma: self.ma_clean - (self.ma_clean - self.ma_max) * drop,
            kid: self.kid_max * ratio,
        })
    }

    fn concurrent(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensitivity::{g_value, SAConfig};

    #[test]
    fn measurements_reproduce_the_family() {
        let cfg = SAConfig::default();
        for p in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let ev = AnalyticEvaluator::power(p);
            let k = AugmentationKind::Blur;
            let m0 = ev.evaluate(k, 0.0).unwrap();
            let m1 = ev.evaluate(k, 1.0).unwrap();
            assert_eq!((m0.ma, m0.kid), (0.9, 0.0));
            for i in 0..=50 {
                let a = i as f64 / 50.0;
                let m = ev.evaluate(k, a).unwrap();
                assert!((0.0..=1.0).contains(&m.ma) && m.kid >= 0.0);
                let g = g_value(m0.ma, m.ma, m1.ma, m.kid, m1.kid, &cfg, a).unwrap();
                assert!((g - 2.0 * a.powf(p)).abs() < 1e-12, "p={p} a={a}");
            }
        }
    }

    #[test]
    fn parse_family() {
        assert_eq!(
            "power:2".parse::<AnalyticFamily>().unwrap(),
            AnalyticFamily::Power { p: 2.0 }
        );
        assert!("power:-1".parse::<AnalyticFamily>().is_err());
        assert!("power".parse::<AnalyticFamily>().is_err());
        assert!("sine:1".parse::<AnalyticFamily>().is_err());
    }
}
