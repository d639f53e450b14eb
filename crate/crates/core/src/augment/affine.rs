//! Affine warps with padding-free zoom cropping.
//!
//! Coordinates are continuous: the image covers `[0, w] x [0, h]` and pixel
//! `(i, j)` has its centre at `(i + 0.5, j + 0.5)`. A matrix maps input
//! positions to output positions; resampling walks the inverse map.

use super::{check_magnitude, AugmentError, Geometric, Sign};
use crate::image::ImageBuffer;

/// Largest shear factor, reached at magnitude 1.
pub const MAX_SHEAR: f64 = 0.3;
/// Largest translation as a fraction of the image side.
pub const MAX_TRANSLATE_FRACTION: f64 = 0.3;
/// Largest rotation in degrees.
pub const MAX_ROTATE_DEGREES: f64 = 30.0;

/// 3x3 homogeneous 2-D affine transform with bottom row `(0, 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMatrix {
    m: [[f64; 3]; 3],
}

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Builds a matrix from its top two rows.
    pub fn from_rows(top: [f64; 3], middle: [f64; 3]) -> Result<Self, AugmentError> {
        let m = AffineMatrix {
            m: [top, middle, [0.0, 0.0, 1.0]],
        };
        let det = m.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(AugmentError::SingularMatrix(det));
        }
        Ok(m)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineMatrix {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[row][col]
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// `self * rhs`: applies `rhs` first, then `self`.
    pub fn compose(&self, rhs: &AffineMatrix) -> AffineMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        AffineMatrix { m: out }
    }

    pub fn inverse(&self) -> Result<AffineMatrix, AugmentError> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(AugmentError::SingularMatrix(det));
        }
        let [[a, b, tx], [c, d, ty], _] = self.m;
        let ia = d / det;
        let ib = -b / det;
        let ic = -c / det;
        let id = a / det;
        Ok(AffineMatrix {
            m: [
                [ia, ib, -(ia * tx + ib * ty)],
                [ic, id, -(ic * tx + id * ty)],
                [0.0, 0.0, 1.0],
            ],
        })
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.m[0][0] * x + self.m[0][1] * y + self.m[0][2],
            self.m[1][0] * x + self.m[1][1] * y + self.m[1][2],
        )
    }
}

/// Matrix for a signed geometric kind at magnitude `alpha`.
///
/// Shear and translation use the plain `[[1, shx, tx], [shy, 1, ty]]` form;
/// rotation turns about the image centre.
pub fn affine_matrix(
    kind: Geometric,
    sign: Sign,
    alpha: f64,
    width: usize,
    height: usize,
) -> Result<AffineMatrix, AugmentError> {
    check_magnitude(alpha)?;
    let s = match sign {
        Sign::Positive => 1.0,
        Sign::Negative => -1.0,
    };
    let (w, h) = (width as f64, height as f64);
    let m = match kind {
        Geometric::ShearX => AffineMatrix {
            m: [
                [1.0, s * MAX_SHEAR * alpha, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
        },
        Geometric::ShearY => AffineMatrix {
            m: [
                [1.0, 0.0, 0.0],
                [s * MAX_SHEAR * alpha, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
        },
        Geometric::TranslateX => {
            AffineMatrix::translation(s * MAX_TRANSLATE_FRACTION * alpha * w, 0.0)
        }
        Geometric::TranslateY => {
            AffineMatrix::translation(0.0, s * MAX_TRANSLATE_FRACTION * alpha * h)
        }
        Geometric::Rotate => {
            let theta = (s * MAX_ROTATE_DEGREES * alpha).to_radians();
            let (sin, cos) = theta.sin_cos();
            let rot = AffineMatrix {
                m: [[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]],
            };
            AffineMatrix::translation(w / 2.0, h / 2.0)
                .compose(&rot)
                .compose(&AffineMatrix::translation(-w / 2.0, -h / 2.0))
        }
    };
    Ok(m)
}

/// Axis-aligned crop window in output coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl CropRect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

type Point = (f64, f64);

fn clip(
    poly: &[Point],
    inside: impl Fn(Point) -> bool,
    cross: impl Fn(Point, Point) -> Point,
) -> Vec<Point> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for (i, &cur) in poly.iter().enumerate() {
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        match (inside(prev), inside(cur)) {
            (true, true) => out.push(cur),
            (true, false) => out.push(cross(prev, cur)),
            (false, true) => {
                out.push(cross(prev, cur));
                out.push(cur);
            }
            (false, false) => {}
        }
    }
    out
}

fn at_x(a: Point, b: Point, x: f64) -> Point {
    let t = (x - a.0) / (b.0 - a.0);
    (x, a.1 + t * (b.1 - a.1))
}

fn at_y(a: Point, b: Point, y: f64) -> Point {
    let t = (y - a.1) / (b.1 - a.1);
    (a.0 + t * (b.0 - a.0), y)
}

/// Region of the output canvas covered by the warped input frame.
fn covered_polygon(m: &AffineMatrix, w: f64, h: f64) -> Vec<Point> {
    let mut poly: Vec<Point> = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
        .iter()
        .map(|&(x, y)| m.apply(x, y))
        .collect();
    poly = clip(&poly, |p| p.0 >= 0.0, |a, b| at_x(a, b, 0.0));
    if poly.is_empty() {
        return poly;
    }
    poly = clip(&poly, |p| p.0 <= w, |a, b| at_x(a, b, w));
    if poly.is_empty() {
        return poly;
    }
    poly = clip(&poly, |p| p.1 >= 0.0, |a, b| at_y(a, b, 0.0));
    if poly.is_empty() {
        return poly;
    }
    clip(&poly, |p| p.1 <= h, |a, b| at_y(a, b, h))
}

fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Horizontal extent `(left, right)` of a convex polygon at height `y`.
fn extent(poly: &[Point], y: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (ymin, ymax) = (a.1.min(b.1), a.1.max(b.1));
        if y < ymin || y > ymax {
            continue;
        }
        if a.1 == b.1 {
            lo = lo.min(a.0.min(b.0));
            hi = hi.max(a.0.max(b.0));
        } else {
            let x = at_y(a, b, y).0;
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo, hi)
}

fn ternary_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..80 {
        if hi - lo < 1e-10 {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    (lo + hi) / 2.0
}

/// Largest-area axis-aligned rectangle inside a convex polygon.
///
/// Over a band `[y0, y1]` the usable width is
/// `min(R(y0), R(y1)) - max(L(y0), L(y1))` because the right boundary is
/// concave and the left convex. Band area is then log-concave in `(y0, y1)`,
/// so nested ternary searches find the optimum.
fn largest_inscribed(poly: &[Point]) -> CropRect {
    let ymin = poly.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = poly.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let band = |y0: f64, y1: f64| {
        let (l0, r0) = extent(poly, y0);
        let (l1, r1) = extent(poly, y1);
        let width = r0.min(r1) - l0.max(l1);
        (width, l0.max(l1), r0.min(r1))
    };
    let area = |y0: f64, y1: f64| (y1 - y0) * band(y0, y1).0;
    let best_top = |y0: f64| ternary_max(y0, ymax, |y1| area(y0, y1));
    let y0 = ternary_max(ymin, ymax, |y0| area(y0, best_top(y0)));
    let y1 = best_top(y0);
    let (_, x0, x1) = band(y0, y1);
    CropRect { x0, y0, x1, y1 }
}

/// Crop window that keeps only samples mapped from inside the input frame.
pub fn valid_crop_rect(
    m: &AffineMatrix,
    width: usize,
    height: usize,
) -> Result<CropRect, AugmentError> {
    let (w, h) = (width as f64, height as f64);
    let poly = covered_polygon(m, w, h);
    let full = CropRect {
        x0: 0.0,
        y0: 0.0,
        x1: w,
        y1: h,
    };
    if poly.len() < 3 {
        return Err(AugmentError::DegenerateCrop {
            width: 0.0,
            height: 0.0,
        });
    }
    if (polygon_area(&poly) - w * h).abs() <= 1e-9 * w * h {
        return Ok(full);
    }
    let rect = largest_inscribed(&poly);
    if !(rect.width() >= 1.0 && rect.height() >= 1.0) {
        return Err(AugmentError::DegenerateCrop {
            width: rect.width().max(0.0),
            height: rect.height().max(0.0),
        });
    }
    Ok(rect)
}

fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64, out: &mut [u8]) {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let data = img.data();
    let at = |px: usize, py: usize, c: usize| data[(py * w + px) * 3 + c] as f64;
    for (c, slot) in out.iter_mut().enumerate() {
        let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
        let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
        *slot = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
}

/// Warps `img` by `m`, crops away padded borders and rescales the crop back to
/// the input size using bilinear sampling.
pub fn apply_affine(img: &ImageBuffer, m: &AffineMatrix) -> Result<ImageBuffer, AugmentError> {
    let inv = m.inverse()?;
    let (w, h) = (img.width(), img.height());
    let rect = valid_crop_rect(m, w, h)?;
    let sx = rect.width() / w as f64;
    let sy = rect.height() / h as f64;
    let mut data = vec![0u8; w * h * 3];
    for v in 0..h {
        let oy = rect.y0 + (v as f64 + 0.5) * sy;
        for u in 0..w {
            let ox = rect.x0 + (u as f64 + 0.5) * sx;
            let (ix, iy) = inv.apply(ox, oy);
            let i = (v * w + u) * 3;
            sample_bilinear(img, ix - 0.5, iy - 0.5, &mut data[i..i + 3]);
        }
    }
    Ok(ImageBuffer::from_raw(w, h, data).expect("dimensions preserved"))
}
