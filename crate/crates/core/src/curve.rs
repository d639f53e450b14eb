//! Monotone piecewise-cubic curves (PCHIP) with inversion and the
//! lower/upper refit bracketing used to score candidate levels.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default x-bracket width at which inversion stops.
pub const DEFAULT_INVERT_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot x-values must be strictly increasing (knot {0})")]
    NotIncreasing(usize),
    #[error("knot {0} is not finite")]
    NonFinite(usize),
    #[error("x = {x} outside the knot span [{lo}, {hi}]")]
    OutOfSpan { x: f64, lo: f64, hi: f64 },
    #[error("target {target} outside the curve range [{lo}, {hi}]")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },
    #[error("curve is not monotone non-decreasing at knot {0}")]
    NonMonotone(usize),
    #[error("candidate x = {0} coincides with an evaluated knot")]
    CandidateOnKnot(f64),
}

/// A sampled point `(x, y)`; serialises as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub y: f64,
}

impl Knot {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl Serialize for Knot {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Knot {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Knot { x, y })
    }
}

/// Fitted PCHIP interpolant. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveEstimate {
    knots: Vec<Knot>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    knots: Vec<Knot>,
}

impl Serialize for CurveEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CurveRepr {
            knots: self.knots.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CurveEstimate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CurveRepr::deserialize(d)?;
        pchip_fit(&repr.knots).map_err(serde::de::Error::custom)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Fritsch-Carlson slopes: weighted harmonic means of neighbouring secants in
/// the interior (zero at local extrema) and shape-preserving one-sided
/// three-point estimates at the ends.
fn pchip_slopes(knots: &[Knot]) -> Vec<f64> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1].x - w[0].x).collect();
    let delta: Vec<f64> = knots
        .windows(2)
        .zip(&h)
        .map(|(w, h)| (w[1].y - w[0].y) / h)
        .collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    let end = |h0: f64, h1: f64, m0: f64, m1: f64| {
        let s = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if sign(s) != sign(m0) {
            0.0
        } else if sign(m0) != sign(m1) && s.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Fits a monotonicity-preserving cubic Hermite interpolant.
pub fn pchip_fit(knots: &[Knot]) -> Result<CurveEstimate, CurveError> {
    if knots.len() < 2 {
        return Err(CurveError::TooFewKnots(knots.len()));
    }
    for (i, k) in knots.iter().enumerate() {
        if !k.x.is_finite() || !k.y.is_finite() {
            return Err(CurveError::NonFinite(i));
        }
        if i > 0 && k.x <= knots[i - 1].x {
            return Err(CurveError::NotIncreasing(i));
        }
    }
    Ok(CurveEstimate {
        slopes: pchip_slopes(knots),
        knots: knots.to_vec(),
    })
}

impl CurveEstimate {
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn x_span(&self) -> (f64, f64) {
        (self.knots[0].x, self.knots[self.knots.len() - 1].x)
    }

    pub fn y_span(&self) -> (f64, f64) {
        (self.knots[0].y, self.knots[self.knots.len() - 1].y)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].y >= w[0].y)
    }

    /// Cubic Hermite value on the segment containing `x`.
    pub fn eval(&self, x: f64) -> Result<f64, CurveError> {
        let (lo, hi) = self.x_span();
        if !(x >= lo && x <= hi) {
            return Err(CurveError::OutOfSpan { x, lo, hi });
        }
        let last = self.knots.len() - 2;
        let k = self
            .knots
            .partition_point(|k| k.x <= x)
            .saturating_sub(1)
            .min(last);
        Ok(self.segment_value(k, x))
    }

    fn segment_value(&self, k: usize, x: f64) -> f64 {
        let (a, b) = (self.knots[k], self.knots[k + 1]);
        let h = b.x - a.x;
        let t = (x - a.x) / h;
        let u = 1.0 - t;
        let h10 = t * u * u;
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        // offset form: flat segments with zero slopes evaluate to a.y exactly
        a.y + (b.y - a.y) * h01 + h * (self.slopes[k] * h10 + self.slopes[k + 1] * h11)
    }

    /// Leftmost `x` with `eval(x) == target`, found by bisection to within
    /// `tol`. Targets equal to a knot's `y` return that knot's `x` exactly.
    pub fn invert(&self, target: f64, tol: f64) -> Result<f64, CurveError> {
        if let Some(i) = self.knots.windows(2).position(|w| w[1].y < w[0].y) {
            return Err(CurveError::NonMonotone(i + 1));
        }
        let (lo, hi) = self.y_span();
        if !(target >= lo && target <= hi) {
            return Err(CurveError::TargetOutOfRange { target, lo, hi });
        }
        if let Some(k) = self.knots.iter().find(|k| k.y == target) {
            return Ok(k.x);
        }
        // first segment whose right knot reaches the target
        let k = self.knots.partition_point(|k| k.y < target) - 1;
        let (mut a, mut b) = (self.knots[k].x, self.knots[k + 1].x);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.segment_value(k, mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

pub fn pchip_eval(curve: &CurveEstimate, x: f64) -> Result<f64, CurveError> {
    curve.eval(x)
}

pub fn invert(curve: &CurveEstimate, y_target: f64, tol: f64) -> Result<f64, CurveError> {
    curve.invert(y_target, tol)
}

/// Spread of plausible preimages of `y_target` around a candidate level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub x_lower: f64,
    pub x_upper: f64,
    pub half_width: f64,
}

fn with_inserted(points: &[Knot], knot: Knot) -> Vec<Knot> {
    let mut out = points.to_vec();
    let at = out.partition_point(|k| k.x < knot.x);
    out.insert(at, knot);
    out
}

/// Bounds the preimage of `y_target` near `candidate_x`.
///
/// The true curve is monotone, so between the evaluated knots left and right
/// of the candidate it lies between their ordinates `y_l` and `y_u`. Refitting
/// with `(candidate_x, y_l)` gives the lowest plausible curve (largest
/// preimage, `x_upper`); refitting with `(candidate_x, y_u)` gives the highest
/// (smallest preimage, `x_lower`).
pub fn bracket_uncertainty(
    points: &[Knot],
    candidate_x: f64,
    y_target: f64,
    tol: f64,
) -> Result<Bracket, CurveError> {
    let base = pchip_fit(points)?;
    let (lo, hi) = base.x_span();
    if !(candidate_x > lo && candidate_x < hi) {
        return Err(CurveError::OutOfSpan {
            x: candidate_x,
            lo,
            hi,
        });
    }
    if points.iter().any(|k| k.x == candidate_x) {
        return Err(CurveError::CandidateOnKnot(candidate_x));
    }
    let right = points.partition_point(|k| k.x < candidate_x);
    let (y_l, y_u) = (points[right - 1].y, points[right].y);
    let lower_curve = pchip_fit(&with_inserted(points, Knot::new(candidate_x, y_l)))?;
    let upper_curve = pchip_fit(&with_inserted(points, Knot::new(candidate_x, y_u)))?;
    let x_upper = lower_curve.invert(y_target, tol)?;
    let x_lower = upper_curve.invert(y_target, tol)?;
    Ok(Bracket {
        x_lower,
        x_upper,
        half_width: (x_upper - x_lower).abs() / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn knots(pts: &[(f64, f64)]) -> Vec<Knot> {
        pts.iter().map(|&(x, y)| Knot::new(x, y)).collect()
    }

    /// Hermite evaluation written against the basis definition directly.
    fn hermite_oracle(xs: &[f64], ys: &[f64], ds: &[f64], x: f64) -> f64 {
        let mut k = 0;
        while k + 2 < xs.len() && x >= xs[k + 1] {
            k += 1;
        }
        let h = xs[k + 1] - xs[k];
        let t = (x - xs[k]) / h;
        let p0 = 2.0 * t.powi(3) - 3.0 * t.powi(2) + 1.0;
        let m0 = t.powi(3) - 2.0 * t.powi(2) + t;
        let p1 = -2.0 * t.powi(3) + 3.0 * t.powi(2);
        let m1 = t.powi(3) - t.powi(2);
        p0 * ys[k] + m0 * h * ds[k] + p1 * ys[k + 1] + m1 * h * ds[k + 1]
    }

    #[test]
    fn two_knots_make_a_line() {
        let c = pchip_fit(&knots(&[(0.0, 0.0), (1.0, 2.0)])).unwrap();
        assert_eq!(c.eval(0.5).unwrap(), 1.0);
    }

    #[test]
    fn collinear_knots_reproduce_the_line() {
        let c = pchip_fit(&knots(&[
            (0.0, 1.0),
            (0.2, 1.6),
            (0.5, 2.5),
            (0.9, 3.7),
            (1.0, 4.0),
        ]))
        .unwrap();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            assert!((c.eval(x).unwrap() - (1.0 + 3.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn three_knot_fixture_is_monotone_and_bounded() {
        let c = pchip_fit(&knots(&[(0.0, 0.0), (0.3, 1.4), (1.0, 2.0)])).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..1000 {
            let y = c.eval(i as f64 / 999.0).unwrap();
            assert!(y >= prev && (0.0..=2.0).contains(&y));
            prev = y;
        }
    }

    #[test]
    fn eval_matches_hermite_basis() {
        let pts = knots(&[(0.0, 0.0), (0.15, 0.4), (0.4, 0.55), (0.7, 1.5), (1.0, 2.0)]);
        let c = pchip_fit(&pts).unwrap();
        let xs: Vec<f64> = pts.iter().map(|k| k.x).collect();
        let ys: Vec<f64> = pts.iter().map(|k| k.y).collect();
        for i in 0..97 {
            let x = (i as f64 * 0.61803).fract();
            let want = hermite_oracle(&xs, &ys, c.slopes(), x);
            assert!((c.eval(x).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn knots_are_hit_exactly() {
        let pts = knots(&[(0.0, 0.0), (0.15, 0.4), (0.4, 0.55), (0.7, 1.5), (1.0, 2.0)]);
        let c = pchip_fit(&pts).unwrap();
        for k in &pts {
            assert_eq!(c.eval(k.x).unwrap(), k.y);
            assert_eq!(c.invert(k.y, DEFAULT_INVERT_TOL).unwrap(), k.x);
        }
    }

    #[test]
    fn fit_and_eval_errors() {
        assert_eq!(
            pchip_fit(&knots(&[(0.0, 0.0)])),
            Err(CurveError::TooFewKnots(1))
        );
        assert_eq!(
            pchip_fit(&knots(&[(0.0, 0.0), (0.5, 1.0), (0.5, 1.2)])),
            Err(CurveError::NotIncreasing(2))
        );
        let c = pchip_fit(&knots(&[(0.0, 0.0), (1.0, 2.0)])).unwrap();
        assert!(matches!(c.eval(1.01), Err(CurveError::OutOfSpan { .. })));
        assert!(matches!(c.eval(-0.01), Err(CurveError::OutOfSpan { .. })));
    }

    #[test]
    fn invert_line() {
        let c = pchip_fit(&knots(&[(0.0, 0.0), (1.0, 2.0)])).unwrap();
        assert!((c.invert(0.8, DEFAULT_INVERT_TOL).unwrap() - 0.4).abs() <= DEFAULT_INVERT_TOL);
        assert!(matches!(
            c.invert(2.5, 1e-6),
            Err(CurveError::TargetOutOfRange { .. })
        ));
        let wavy = pchip_fit(&knots(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.8)])).unwrap();
        assert!(matches!(
            wavy.invert(0.5, 1e-6),
            Err(CurveError::NonMonotone(2))
        ));
    }

    #[test]
    fn invert_quadratic_samples() {
        let pts: Vec<Knot> = (0..6)
            .map(|i| i as f64 / 5.0)
            .map(|x| Knot::new(x, 2.0 * x * x))
            .collect();
        let c = pchip_fit(&pts).unwrap();
        let x = c.invert(1.0, DEFAULT_INVERT_TOL).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() <= 0.02, "{x}");
    }

    #[test]
    fn invert_returns_leftmost_on_flats() {
        let c = pchip_fit(&knots(&[(0.0, 0.0), (0.3, 1.0), (0.6, 1.0), (1.0, 2.0)])).unwrap();
        assert_eq!(c.invert(1.0, 1e-9).unwrap(), 0.3);
        for i in 0..=100 {
            let x = 0.3 + 0.3 * i as f64 / 100.0;
            assert!((c.eval(x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_with_equal_neighbours_is_zero() {
        let pts = knots(&[(0.0, 0.0), (0.3, 1.0), (0.6, 1.0), (1.0, 2.0)]);
        let b = bracket_uncertainty(&pts, 0.45, 1.0, 1e-9).unwrap();
        assert_eq!(b.half_width, 0.0);
    }

    #[test]
    fn bracket_on_a_line_composes_fit_and_invert() {
        let pts = knots(&[(0.0, 0.0), (1.0, 2.0)]);
        let b = bracket_uncertainty(&pts, 0.5, 1.0, 1e-9).unwrap();
        let low = pchip_fit(&knots(&[(0.0, 0.0), (0.5, 0.0), (1.0, 2.0)])).unwrap();
        let high = pchip_fit(&knots(&[(0.0, 0.0), (0.5, 2.0), (1.0, 2.0)])).unwrap();
        let x_upper = low.invert(1.0, 1e-9).unwrap();
        let x_lower = high.invert(1.0, 1e-9).unwrap();
        assert_eq!(b.x_upper, x_upper);
        assert_eq!(b.x_lower, x_lower);
        assert!(x_lower < 0.5 && x_upper > 0.5);
        assert!((b.half_width - (x_upper - x_lower) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bracket_rejects_bad_candidates() {
        let pts = knots(&[(0.0, 0.0), (0.5, 1.0), (1.0, 2.0)]);
        assert!(matches!(
            bracket_uncertainty(&pts, 1.0, 1.0, 1e-9),
            Err(CurveError::OutOfSpan { .. })
        ));
        assert!(matches!(
            bracket_uncertainty(&pts, 0.5, 1.0, 1e-9),
            Err(CurveError::CandidateOnKnot(_))
        ));
    }

    #[test]
    fn refinement_shrinks_uncertainty() {
        let g = |x: f64| 2.0 * x * x;
        let mut pts = knots(&[(0.0, 0.0), (1.0, 2.0)]);
        for target in [1.0, 0.4, 1.6] {
            let c = pchip_fit(&pts).unwrap();
            let cand = c.invert(target, 1e-9).unwrap();
            let before = bracket_uncertainty(&pts, cand, target, 1e-9).unwrap();
            pts = with_inserted(&pts, Knot::new(cand, g(cand)));
            let c2 = pchip_fit(&pts).unwrap();
            let cand2 = c2.invert(target, 1e-9).unwrap();
            let after = match bracket_uncertainty(&pts, cand2, target, 1e-9) {
                Ok(b) => b.half_width,
                Err(CurveError::CandidateOnKnot(_)) => 0.0,
                Err(e) => panic!("{e}"),
            };
            assert!(
                after < before.half_width,
                "{target}: {after} !< {}",
                before.half_width
            );
        }
    }

    #[test]
    fn json_form_recomputes_slopes() {
        let c = pchip_fit(&knots(&[(0.0, 0.0), (0.3, 1.4), (1.0, 2.0)])).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"knots":[[0.0,0.0],[0.3,1.4],[1.0,2.0]]}"#);
        let back: CurveEstimate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<CurveEstimate>(r#"{"knots":[[0.0,0.0]]}"#).is_err());
    }

    fn monotone_knots() -> impl Strategy<Value = Vec<Knot>> {
        prop::collection::vec((0.01f64..1.0, 0.0f64..1.0), 2..12).prop_map(|steps| {
            let (mut x, mut y) = (0.0, 0.0);
            steps
                .into_iter()
                .map(|(dx, dy)| {
                    let k = Knot::new(x, y);
                    x += dx;
                    // flat steps are common in clamped data
                    y += if dy < 0.2 { 0.0 } else { dy };
                    k
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn monotone_interpolation_without_overshoot(pts in monotone_knots()) {
            let c = pchip_fit(&pts).unwrap();
            for k in &pts {
                prop_assert!((c.eval(k.x).unwrap() - k.y).abs() <= 1e-12);
            }
            let (lo, hi) = c.x_span();
            let (ymin, ymax) = c.y_span();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..1000 {
                let y = c.eval((lo + (hi - lo) * i as f64 / 999.0).min(hi)).unwrap();
                prop_assert!(y >= prev - 1e-12);
                prop_assert!(y >= ymin - 1e-12 && y <= ymax + 1e-12);
                prev = y;
            }
        }

        #[test]
        fn invert_round_trips(pts in monotone_knots(), frac in 0.0f64..=1.0) {
            let c = pchip_fit(&pts).unwrap();
            let (ylo, yhi) = c.y_span();
            let target = ylo + frac * (yhi - ylo);
            let tol = 1e-9;
            let x = c.invert(target, tol).unwrap();
            // the slope is bounded by 3x the steepest secant on monotone data
            prop_assert!((c.eval(x).unwrap() - target).abs() <= 10.0 * tol * (1.0 + 3.0 * max_secant(&pts)));
        }
    }

    fn max_secant(pts: &[Knot]) -> f64 {
        pts.windows(2)
            .map(|w| (w[1].y - w[0].y) / (w[1].x - w[0].x))
            .fold(0.0, f64::max)
    }
}
