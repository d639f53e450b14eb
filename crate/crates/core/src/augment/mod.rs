//! The 24 basis perturbations.
//!
//! Every perturbation is driven by a single magnitude in `[0, 1]`; magnitude
//! zero is the identity for every kind. Photometric kinds blend one RGB or HSV
//! channel toward its range limit, geometric kinds warp with an affine map and
//! zoom-crop the padded border away, and the remaining two add Gaussian blur or
//! Gaussian noise.

mod affine;
mod color;
mod filter;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageBuffer;

pub use affine::{affine_matrix, apply_affine, valid_crop_rect, AffineMatrix, CropRect};
pub use color::{
    channel_range, channel_scale, hsv_to_rgb, rgb_to_hsv, scale_hsv_channel, HsvImage,
};
pub use filter::{blur_kernel_size, blur_sigma, gaussian_blur, gaussian_noise, noise_sigma};

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("magnitude {0} outside [0, 1]")]
    MagnitudeOutOfRange(f64),
    #[error("affine matrix is singular (det = {0})")]
    SingularMatrix(f64),
    #[error("no padding-free crop remains ({width:.3} x {height:.3} px); magnitude too large")]
    DegenerateCrop { width: f64, height: f64 },
    #[error("unknown augmentation kind {0:?}")]
    UnknownKind(String),
}

pub(crate) fn check_magnitude(alpha: f64) -> Result<(), AugmentError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(AugmentError::MagnitudeOutOfRange(alpha))
    }
}

/// Channels perturbed by the photometric kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    R,
    G,
    B,
    H,
    S,
    V,
}

impl Channel {
    pub fn is_hsv(self) -> bool {
        matches!(self, Channel::H | Channel::S | Channel::V)
    }
}

/// Direction of a photometric blend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tone {
    Lighter,
    Darker,
}

/// Geometric transform families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Geometric {
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
    Rotate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// How a kind is realised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KindFamily {
    Channel(Channel, Tone),
    Affine(Geometric, Sign),
    Blur,
    Noise,
}

macro_rules! kinds {
    ($($variant:ident => $name:literal, $family:expr;)*) => {
        /// One of the 24 basis perturbations. Declaration order is the canonical
        /// order used for tie-breaking.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum AugmentationKind {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl AugmentationKind {
            pub const ALL: [AugmentationKind; 24] = [$(AugmentationKind::$variant,)*];

            /// Canonical snake_case name, e.g. `r_lighter` or `shear_x_neg`.
            pub fn name(self) -> &'static str {
                match self {
                    $(AugmentationKind::$variant => $name,)*
                }
            }

            pub fn family(self) -> KindFamily {
                use Channel::*;
                use Geometric::*;
                use Sign::*;
                use Tone::*;
                match self {
                    $(AugmentationKind::$variant => $family,)*
                }
            }
        }
    };
}

kinds! {
    RLighter => "r_lighter", KindFamily::Channel(R, Lighter);
    RDarker => "r_darker", KindFamily::Channel(R, Darker);
    GLighter => "g_lighter", KindFamily::Channel(G, Lighter);
    GDarker => "g_darker", KindFamily::Channel(G, Darker);
    BLighter => "b_lighter", KindFamily::Channel(B, Lighter);
    BDarker => "b_darker", KindFamily::Channel(B, Darker);
    HLighter => "h_lighter", KindFamily::Channel(H, Lighter);
    HDarker => "h_darker", KindFamily::Channel(H, Darker);
    SLighter => "s_lighter", KindFamily::Channel(S, Lighter);
    SDarker => "s_darker", KindFamily::Channel(S, Darker);
    VLighter => "v_lighter", KindFamily::Channel(V, Lighter);
    VDarker => "v_darker", KindFamily::Channel(V, Darker);
    ShearXPos => "shear_x_pos", KindFamily::Affine(ShearX, Positive);
    ShearXNeg => "shear_x_neg", KindFamily::Affine(ShearX, Negative);
    ShearYPos => "shear_y_pos", KindFamily::Affine(ShearY, Positive);
    ShearYNeg => "shear_y_neg", KindFamily::Affine(ShearY, Negative);
    TranslateXPos => "translate_x_pos", KindFamily::Affine(TranslateX, Positive);
    TranslateXNeg => "translate_x_neg", KindFamily::Affine(TranslateX, Negative);
    TranslateYPos => "translate_y_pos", KindFamily::Affine(TranslateY, Positive);
    TranslateYNeg => "translate_y_neg", KindFamily::Affine(TranslateY, Negative);
    RotatePos => "rotate_pos", KindFamily::Affine(Rotate, Positive);
    RotateNeg => "rotate_neg", KindFamily::Affine(Rotate, Negative);
    Blur => "blur", KindFamily::Blur;
    Noise => "noise", KindFamily::Noise;
}

impl AugmentationKind {
    /// Position in [`AugmentationKind::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_photometric(self) -> bool {
        matches!(self.family(), KindFamily::Channel(..))
    }

    pub fn is_geometric(self) -> bool {
        matches!(self.family(), KindFamily::Affine(..))
    }

    /// Parses a comma-separated list of kind names; `all` expands to every kind.
    pub fn parse_list(list: &str) -> Result<Vec<AugmentationKind>, AugmentError> {
        if list.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for AugmentationKind {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == wanted)
            .ok_or_else(|| AugmentError::UnknownKind(s.to_string()))
    }
}

/// A perturbation kind at a given magnitude. `seed` only affects noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub kind: AugmentationKind,
    pub magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Concrete kernel parameters a spec resolves to, for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelParams {
    ChannelBlend { weight: f64, toward: f64 },
    Affine { matrix: [[f64; 3]; 3] },
    Blur { kernel_size: usize, sigma: f64 },
    Noise { sigma: f64 },
}

impl AugmentationSpec {
    pub fn new(kind: AugmentationKind, magnitude: f64) -> Result<Self, AugmentError> {
        check_magnitude(magnitude)?;
        Ok(Self {
            kind,
            magnitude,
            seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parameters of the kernel this spec runs on an image of the given size.
    pub fn kernel_params(&self, width: usize, height: usize) -> Result<KernelParams, AugmentError> {
        check_magnitude(self.magnitude)?;
        Ok(match self.kind.family() {
            KindFamily::Channel(channel, tone) => {
                let (lo, hi) = channel_range(channel);
                let toward = match tone {
                    Tone::Lighter => hi,
                    Tone::Darker => lo,
                };
                KernelParams::ChannelBlend {
                    weight: self.magnitude,
                    toward,
                }
            }
            KindFamily::Affine(geo, sign) => KernelParams::Affine {
                matrix: affine_matrix(geo, sign, self.magnitude, width, height)?.rows(),
            },
            KindFamily::Blur => {
                let k = blur_kernel_size(self.magnitude)?;
                KernelParams::Blur {
                    kernel_size: k,
                    sigma: blur_sigma(k),
                }
            }
            KindFamily::Noise => KernelParams::Noise {
                sigma: noise_sigma(self.magnitude)?,
            },
        })
    }
}

/// Runs the kernel selected by `spec.kind`.
pub fn apply(spec: &AugmentationSpec, img: &ImageBuffer) -> Result<ImageBuffer, AugmentError> {
    check_magnitude(spec.magnitude)?;
    if spec.magnitude == 0.0 {
        return Ok(img.clone());
    }
    match spec.kind.family() {
        KindFamily::Channel(channel, tone) => channel_scale(img, channel, tone, spec.magnitude),
        KindFamily::Affine(geo, sign) => {
            let m = affine_matrix(geo, sign, spec.magnitude, img.width(), img.height())?;
            apply_affine(img, &m)
        }
        KindFamily::Blur => gaussian_blur(img, spec.magnitude),
        KindFamily::Noise => gaussian_noise(img, spec.magnitude, spec.seed),
    }
}
