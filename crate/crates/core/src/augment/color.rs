use super::{check_magnitude, AugmentError, Channel, Tone};
use crate::image::ImageBuffer;

/// Channel value range `(v_min, v_max)` used by the linear blend.
///
/// Hue spans `[0, 180]` and value is floored at 10 so that full darkening
/// never yields a black frame.
pub fn channel_range(channel: Channel) -> (f64, f64) {
    match channel {
        Channel::H => (0.0, 180.0),
        Channel::V => (10.0, 255.0),
        _ => (0.0, 255.0),
    }
}

/// Floating point HSV raster: `h` in `[0, 180)`, `s` and `v` in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsvImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

fn blend(value: f64, alpha: f64, toward: f64) -> f64 {
    alpha * toward + (1.0 - alpha) * value
}

fn quantize(value: f64) -> u8 {
    // f64::round rounds half away from zero.
    value.round().clamp(0.0, 255.0) as u8
}

pub fn rgb_to_hsv(img: &ImageBuffer) -> HsvImage {
    let data = img
        .pixels()
        .map(|[r, g, b]| {
            let (r, g, b) = (r as f64, g as f64, b as f64);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let chroma = max - min;
            let hue_deg = if chroma == 0.0 {
                0.0
            } else if max == r {
                60.0 * ((g - b) / chroma).rem_euclid(6.0)
            } else if max == g {
                60.0 * ((b - r) / chroma + 2.0)
            } else {
                60.0 * ((r - g) / chroma + 4.0)
            };
            let s = if max == 0.0 {
                0.0
            } else {
                255.0 * chroma / max
            };
            [hue_deg / 2.0, s, max]
        })
        .collect();
    HsvImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}

pub fn hsv_to_rgb(hsv: &HsvImage) -> ImageBuffer {
    let mut out = Vec::with_capacity(hsv.data.len() * 3);
    for &[h, s, v] in &hsv.data {
        let s = (s / 255.0).clamp(0.0, 1.0);
        let v = v.clamp(0.0, 255.0);
        let hue = (h * 2.0).rem_euclid(360.0) / 60.0;
        let chroma = v * s;
        let x = chroma * (1.0 - ((hue % 2.0) - 1.0).abs());
        let (r, g, b) = match hue as u32 {
            0 => (chroma, x, 0.0),
            1 => (x, chroma, 0.0),
            2 => (0.0, chroma, x),
            3 => (0.0, x, chroma),
            4 => (x, 0.0, chroma),
            _ => (chroma, 0.0, x),
        };
        let m = v - chroma;
        out.extend_from_slice(&[quantize(r + m), quantize(g + m), quantize(b + m)]);
    }
    ImageBuffer::from_raw(hsv.width, hsv.height, out).expect("dimensions preserved")
}

/// Blends one HSV channel toward its range limit in place.
pub fn scale_hsv_channel(
    hsv: &mut HsvImage,
    channel: Channel,
    tone: Tone,
    alpha: f64,
) -> Result<(), AugmentError> {
    check_magnitude(alpha)?;
    let idx = match channel {
        Channel::H => 0,
        Channel::S => 1,
        Channel::V => 2,
        _ => unreachable!("RGB channel passed to HSV scaling"),
    };
    let (lo, hi) = channel_range(channel);
    let toward = match tone {
        Tone::Lighter => hi,
        Tone::Darker => lo,
    };
    for px in &mut hsv.data {
        px[idx] = blend(px[idx], alpha, toward);
    }
    Ok(())
}

/// Linear blend of one channel toward `v_max` (lighter) or `v_min` (darker).
///
/// HSV channels go through a floating point HSV round trip; quantisation
/// happens once, on the way back to RGB.
pub fn channel_scale(
    img: &ImageBuffer,
    channel: Channel,
    tone: Tone,
    alpha: f64,
) -> Result<ImageBuffer, AugmentError> {
    check_magnitude(alpha)?;
    if alpha == 0.0 {
        return Ok(img.clone());
    }
    if channel.is_hsv() {
        let mut hsv = rgb_to_hsv(img);
        scale_hsv_channel(&mut hsv, channel, tone, alpha)?;
        return Ok(hsv_to_rgb(&hsv));
    }
    let offset = match channel {
        Channel::R => 0,
        Channel::G => 1,
        _ => 2,
    };
    let (lo, hi) = channel_range(channel);
    let toward = match tone {
        Tone::Lighter => hi,
        Tone::Darker => lo,
    };
    let mut data = img.data().to_vec();
    for px in data.chunks_exact_mut(3) {
        px[offset] = quantize(blend(px[offset] as f64, alpha, toward));
    }
    Ok(ImageBuffer::from_raw(img.width(), img.height(), data).expect("dimensions preserved"))
}
