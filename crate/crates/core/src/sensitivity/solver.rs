use rayon::prelude::*;

use crate::augment::AugmentationKind;
use crate::curve::{bracket_uncertainty, pchip_fit, CurveError, CurveEstimate, Knot};

use super::{
    g_value, Evaluator, GSample, LevelSet, Measurement, SAConfig, SensitivityError, MONOTONE_SLACK,
};

/// Clamps knot ordinates to `[0, g_max]` and projects them onto the nearest
/// non-decreasing sequence (pool-adjacent-violators). Drops larger than
/// [`MONOTONE_SLACK`] are reported instead of smoothed over.
pub fn isotonic_clamp(knots: &[Knot], g_max: f64) -> Result<Vec<Knot>, SensitivityError> {
    let ys: Vec<f64> = knots.iter().map(|k| k.y.clamp(0.0, g_max)).collect();
    let mut peak = 0;
    for j in 1..ys.len() {
        if ys[j] >= ys[peak] {
            peak = j;
        } else if ys[peak] - ys[j] > MONOTONE_SLACK {
            return Err(SensitivityError::NonMonotone {
                left_alpha: knots[peak].x,
                left_g: knots[peak].y,
                right_alpha: knots[j].x,
                right_g: knots[j].y,
            });
        }
    }
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(ys.len());
    for &y in &ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(knots.len());
    let mut i = 0;
    for (sum, n) in blocks {
        let mean = if n == 1 { sum } else { sum / n as f64 };
        for _ in 0..n {
            out.push(Knot::new(knots[i].x, mean));
            i += 1;
        }
    }
    Ok(out)
}

/// Per-kind measurement state: caches every `(alpha, measurement)` so each
/// point is evaluated once, and holds the anchors g is normalised by.
struct Probe<'a, E: ?Sized> {
    evaluator: &'a E,
    kind: AugmentationKind,
    cfg: &'a SAConfig,
    samples: Vec<GSample>,
    evaluations: usize,
    clean: Measurement,
    max: Measurement,
}

impl<'a, E: Evaluator + ?Sized> Probe<'a, E> {
    /// Evaluates alpha = 0 then alpha_max.
    fn new(
        evaluator: &'a E,
        kind: AugmentationKind,
        cfg: &'a SAConfig,
    ) -> Result<Self, SensitivityError> {
        let clean = raw_measure(evaluator, kind, 0.0)?;
        let max = raw_measure(evaluator, kind, cfg.alpha_max)?;
        g_value(clean.ma, clean.ma, max.ma, 0.0, max.kid, cfg, 0.0)?;
        Ok(Self {
            evaluator,
            kind,
            cfg,
            samples: vec![
                GSample {
                    alpha: 0.0,
                    ma: clean.ma,
                    kid: clean.kid,
                    g: 0.0,
                },
                GSample {
                    alpha: cfg.alpha_max,
                    ma: max.ma,
                    kid: max.kid,
                    g: cfg.g_max,
                },
            ],
            evaluations: 2,
            clean,
            max,
        })
    }

    fn find(&self, alpha: f64, within: f64) -> Option<&GSample> {
        self.samples
            .iter()
            .find(|s| (s.alpha - alpha).abs() <= within)
    }

    fn sample(&mut self, alpha: f64) -> Result<GSample, SensitivityError> {
        if let Some(s) = self.find(alpha, 0.0) {
            return Ok(*s);
        }
        let m = raw_measure(self.evaluator, self.kind, alpha)?;
        self.evaluations += 1;
        let g = g_value(
            self.clean.ma,
            m.ma,
            self.max.ma,
            m.kid,
            self.max.kid,
            self.cfg,
            alpha,
        )?;
        let s = GSample {
            alpha,
            ma: m.ma,
            kid: m.kid,
            g,
        };
        self.samples.push(s);
        Ok(s)
    }

    fn knots(&self) -> Vec<Knot> {
        let mut k: Vec<Knot> = self.samples.iter().map(GSample::knot).collect();
        k.sort_by(|a, b| a.x.total_cmp(&b.x));
        k
    }

    /// Accuracy at each level, reusing a sample that sits on the level.
    fn level_ma(&mut self, levels: &[f64]) -> Result<Vec<f64>, SensitivityError> {
        let near = 2.0 * self.cfg.invert_tol;
        levels
            .iter()
            .map(|&a| match self.find(a, near) {
                Some(s) => Ok(s.ma),
                None => self.sample(a).map(|s| s.ma),
            })
            .collect()
    }

    fn finish(
        self,
        levels: Vec<f64>,
        uncertainties: Vec<f64>,
        level_ma: Vec<f64>,
        converged: bool,
    ) -> LevelSet {
        LevelSet {
            kind: self.kind,
            levels,
            uncertainties,
            level_ma,
            evaluations_used: self.evaluations,
            samples: self.samples,
            converged,
            fallback: false,
        }
    }
}

fn raw_measure<E: Evaluator + ?Sized>(
    evaluator: &E,
    kind: AugmentationKind,
    alpha: f64,
) -> Result<Measurement, SensitivityError> {
    let m = evaluator
        .evaluate(kind, alpha)
        .map_err(|source| SensitivityError::Evaluator {
            kind,
            alpha,
            source,
        })?;
    if !(0.0..=1.0).contains(&m.ma) || !m.kid.is_finite() {
        return Err(SensitivityError::BadMeasurement {
            kind,
            alpha,
            ma: m.ma,
            kid: m.kid,
        });
    }
    Ok(m)
}

/// Candidate levels on `curve` and the bracket half-width of each.
fn candidates(
    curve: &CurveEstimate,
    knots: &[Knot],
    cfg: &SAConfig,
) -> Result<(Vec<f64>, Vec<f64>), SensitivityError> {
    let mut levels = Vec::with_capacity(cfg.levels - 1);
    let mut widths = Vec::with_capacity(cfg.levels - 1);
    for target in cfg.targets() {
        let x = curve.invert(target, cfg.invert_tol)?;
        let w = match bracket_uncertainty(knots, x, target, cfg.invert_tol) {
            Ok(b) => b.half_width,
            Err(CurveError::CandidateOnKnot(_)) => 0.0,
            Err(e) => return Err(e.into()),
        };
        levels.push(x);
        widths.push(w);
    }
    Ok((levels, widths))
}

/// Adaptive level search: refine a PCHIP estimate of g by sampling, each
/// round, the candidate level whose preimage is least certain.
pub fn solve_levels_adaptive<E: Evaluator + ?Sized>(
    evaluator: &E,
    kind: AugmentationKind,
    cfg: &SAConfig,
) -> Result<LevelSet, SensitivityError> {
    cfg.validate()?;
    let mut probe = Probe::new(evaluator, kind, cfg)?;
    let mut refinements = 0;
    loop {
        let knots = isotonic_clamp(&probe.knots(), cfg.g_max)?;
        let curve = pchip_fit(&knots)?;
        let (levels, widths) = candidates(&curve, &knots, cfg)?;
        let (worst, &width) = widths
            .iter()
            .enumerate()
            .fold(
                (0, &widths[0]),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        let converged = width < cfg.epsilon;
        if converged || refinements == cfg.max_refinements {
            let level_ma = probe.level_ma(&levels)?;
            return Ok(probe.finish(levels, widths, level_ma, converged));
        }
        probe.sample(levels[worst])?;
        refinements += 1;
    }
}

/// Grid baseline: evaluates g at `alpha_max * j / grid_n` for `j = 1..=grid_n`
/// (plus the clean anchor) and picks, per target ordinate, the interior grid
/// point with the nearest g (ties go to the smaller alpha). Uncertainty is
/// half a grid step. `evaluations_used` counts the grid only.
pub fn solve_levels_dense<E: Evaluator + ?Sized>(
    evaluator: &E,
    kind: AugmentationKind,
    cfg: &SAConfig,
    grid_n: usize,
) -> Result<LevelSet, SensitivityError> {
    cfg.validate()?;
    if grid_n < cfg.levels {
        return Err(SensitivityError::Config(format!(
            "grid of {grid_n} points cannot resolve {} levels",
            cfg.levels
        )));
    }
    let mut probe = Probe::new(evaluator, kind, cfg)?;
    let grid: Vec<f64> = (1..=grid_n)
        .map(|j| {
            if j == grid_n {
                cfg.alpha_max
            } else {
                cfg.alpha_max * j as f64 / grid_n as f64
            }
        })
        .collect();
    let mut interior = Vec::with_capacity(grid_n - 1);
    for &a in &grid {
        let s = probe.sample(a)?;
        if a < cfg.alpha_max {
            interior.push(s);
        }
    }
    isotonic_clamp(&probe.knots(), cfg.g_max)?;
    let mut levels = Vec::new();
    let mut level_ma = Vec::new();
    for target in cfg.targets() {
        let mut best = &interior[0];
        for s in &interior[1..] {
            if (s.g - target).abs() < (best.g - target).abs() {
                best = s;
            }
        }
        levels.push(best.alpha);
        level_ma.push(best.ma);
    }
    let half_step = cfg.alpha_max / grid_n as f64 / 2.0;
    let uncertainties = vec![half_step; levels.len()];
    let mut set = probe.finish(levels, uncertainties, level_ma, true);
    set.evaluations_used = grid_n;
    Ok(set)
}

/// Uniform levels for kinds whose g is undefined. Accuracy is still measured
/// at each level so the policy can rank them.
fn fallback_levels<E: Evaluator + ?Sized>(
    evaluator: &E,
    kind: AugmentationKind,
    cfg: &SAConfig,
) -> Result<LevelSet, SensitivityError> {
    let clean = raw_measure(evaluator, kind, 0.0)?;
    let max = raw_measure(evaluator, kind, cfg.alpha_max)?;
    let mut samples = vec![
        GSample {
            alpha: 0.0,
            ma: clean.ma,
            kid: clean.kid,
            g: 0.0,
        },
        GSample {
            alpha: cfg.alpha_max,
            ma: max.ma,
            kid: max.kid,
            g: cfg.g_max,
        },
    ];
    let levels = cfg.uniform_levels();
    let mut level_ma = Vec::with_capacity(levels.len());
    for &a in &levels {
        let m = raw_measure(evaluator, kind, a)?;
        level_ma.push(m.ma);
        samples.push(GSample {
            alpha: a,
            ma: m.ma,
            kid: m.kid,
            g: cfg.lambda * a,
        });
    }
    Ok(LevelSet {
        kind,
        uncertainties: vec![0.0; levels.len()],
        evaluations_used: samples.len(),
        levels,
        level_ma,
        samples,
        converged: true,
        fallback: true,
    })
}

fn analyse_one<E: Evaluator + ?Sized>(
    evaluator: &E,
    kind: AugmentationKind,
    cfg: &SAConfig,
) -> Result<LevelSet, SensitivityError> {
    match solve_levels_adaptive(evaluator, kind, cfg) {
        Err(SensitivityError::NonDegrading(_)) => fallback_levels(evaluator, kind, cfg),
        other => other,
    }
}

/// Solves every kind independently. Results keep the input order; a failing
/// kind yields an `Err` in its slot without stopping the others.
pub fn run_sensitivity_analysis<E: Evaluator + ?Sized>(
    evaluator: &E,
    kinds: &[AugmentationKind],
    cfg: &SAConfig,
) -> Result<Vec<Result<LevelSet, SensitivityError>>, SensitivityError> {
    if kinds.is_empty() {
        return Err(SensitivityError::NoKinds);
    }
    cfg.validate()?;
    Ok(if evaluator.concurrent() {
        kinds
            .par_iter()
            .map(|&k| analyse_one(evaluator, k, cfg))
            .collect()
    } else {
        kinds
            .iter()
            .map(|&k| analyse_one(evaluator, k, cfg))
            .collect()
    })
}
