use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_magnitude, AugmentError};
use crate::image::ImageBuffer;

/// Kernel size reached at magnitude 1.
pub const MAX_BLUR_KERNEL: usize = 49;
/// Noise standard deviation (in 8-bit units) reached at magnitude 1.
pub const MAX_NOISE_SIGMA: f64 = 50.0;

/// Odd kernel size nearest to `1 + 48 * alpha`.
pub fn blur_kernel_size(alpha: f64) -> Result<usize, AugmentError> {
    check_magnitude(alpha)?;
    let half = ((MAX_BLUR_KERNEL - 1) as f64 / 2.0 * alpha).round() as usize;
    Ok(2 * half + 1)
}

/// Standard deviation for a kernel of size `k` (the usual size-to-sigma rule).
pub fn blur_sigma(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

pub fn noise_sigma(alpha: f64) -> Result<f64, AugmentError> {
    check_magnitude(alpha)?;
    Ok(MAX_NOISE_SIGMA * alpha)
}

fn gaussian_kernel(k: usize) -> Vec<f64> {
    let sigma = blur_sigma(k);
    let r = (k / 2) as f64;
    let raw: Vec<f64> = (0..k)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Mirror index without repeating the edge sample (`dcb|abcd|cba`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_blur(img: &ImageBuffer, alpha: f64) -> Result<ImageBuffer, AugmentError> {
    let k = blur_kernel_size(alpha)?;
    if k == 1 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(k);
    let r = (k / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.data();

    let mut horizontal = vec![0.0f64; w * h * 3];
    horizontal
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                for c in 0..3 {
                    row[x * 3 + c] = kernel
                        .iter()
                        .enumerate()
                        .map(|(t, kv)| {
                            let sx = reflect(x as isize + t as isize - r, w);
                            kv * src[(y * w + sx) * 3 + c] as f64
                        })
                        .sum();
                }
            }
        });

    let mut out = vec![0u8; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for c in 0..3 {
                let v: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(t, kv)| {
                        let sy = reflect(y as isize + t as isize - r, h);
                        kv * horizontal[(sy * w + x) * 3 + c]
                    })
                    .sum();
                row[x * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    Ok(ImageBuffer::from_raw(w, h, out).expect("dimensions preserved"))
}

/// Standard normal deviate for sample `index` of the stream keyed by `seed`.
///
/// Each sample owns four 32-bit words of the ChaCha keystream, so the value
/// depends only on `(seed, index)` and never on visiting order.
pub fn normal_at(rng: &mut ChaCha8Rng, index: u64) -> f64 {
    rng.set_word_pos(index as u128 * 4);
    let a = rng.next_u64();
    let b = rng.next_u64();
    // (0, 1] so the logarithm stays finite.
    let u1 = ((a >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Adds zero-mean Gaussian noise with standard deviation `50 * alpha`.
pub fn gaussian_noise(
    img: &ImageBuffer,
    alpha: f64,
    seed: u64,
) -> Result<ImageBuffer, AugmentError> {
    let sigma = noise_sigma(alpha)?;
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (img.width(), img.height());
    let row_len = w * 3;
    let mut out = img.data().to_vec();
    out.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| {
            let mut rng = base.clone();
            for (i, v) in row.iter_mut().enumerate() {
                let index = (y * row_len + i) as u64;
                let noisy = *v as f64 + sigma * normal_at(&mut rng, index);
                *v = noisy.round().clamp(0.0, 255.0) as u8;
            }
        });
    Ok(ImageBuffer::from_raw(w, h, out).expect("dimensions preserved"))
}
