use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::smallmat::erf;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// The four test profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `1 + exp(-100((x-½)² + (y-¾)²))` on the unit square.
    VortexGaussian,
    /// Radius 0.15 disc at (½, ¾) with a 0.05-wide, 0.25-deep slot cut up
    /// from its lowest point.
    SlottedCylinder,
    /// `exp(-x² - y²)` on `[-2, 2]²`.
    AccuracyGaussian,
    /// `1 + exp(-x² - y²)` inside `x² + y² < ½`, else 0.25, on `[-1, 1]²`.
    AlphaDemo,
}

/// Mean of `exp(-k (x - c)²)` over `[a, b]`.
pub fn gaussian_average_1d(a: f64, b: f64, c: f64, k: f64) -> f64 {
    let s = k.sqrt();
    SQRT_PI / (2.0 * s) * (erf(s * (b - c)) - erf(s * (a - c))) / (b - a)
}

impl Profile {
    pub fn domain(self) -> ([f64; 2], [f64; 2]) {
        match self {
            Self::VortexGaussian | Self::SlottedCylinder => ([0.0, 0.0], [1.0, 1.0]),
            Self::AccuracyGaussian => ([-2.0, -2.0], [2.0, 2.0]),
            Self::AlphaDemo => ([-1.0, -1.0], [1.0, 1.0]),
        }
    }

    /// Default refinement threshold on the advected value.
    pub fn tag_threshold(self) -> f64 {
        match self {
            Self::VortexGaussian => 1.01,
            _ => 0.5,
        }
    }

    pub fn value(self, x: [f64; 2]) -> f64 {
        match self {
            Self::VortexGaussian => 1.0 + (-100.0 * ((x[0] - 0.5).powi(2) + (x[1] - 0.75).powi(2))).exp(),
            Self::SlottedCylinder => {
                let (dx, dy) = (x[0] - 0.5, x[1] - 0.75);
                let in_disc = dx * dx + dy * dy <= 0.15 * 0.15;
                let in_slot = dx.abs() < 0.025 && x[1] < 0.75 - 0.15 + 0.25;
                if in_disc && !in_slot {
                    1.0
                } else {
                    0.0
                }
            }
            Self::AccuracyGaussian => (-(x[0] * x[0] + x[1] * x[1])).exp(),
            Self::AlphaDemo => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2 < 0.5 {
                    1.0 + (-r2).exp()
                } else {
                    0.25
                }
            }
        }
    }

    /// Cell value over `[lo, hi]`: exact averages for the advected and
    /// accuracy Gaussians, 4×4 sub-samples for the slotted cylinder and the
    /// centre value for the α demonstration.
    pub fn cell_value(self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        match self {
            Self::VortexGaussian => {
                1.0 + gaussian_average_1d(lo[0], hi[0], 0.5, 100.0) * gaussian_average_1d(lo[1], hi[1], 0.75, 100.0)
            }
            Self::AccuracyGaussian => {
                gaussian_average_1d(lo[0], hi[0], 0.0, 1.0) * gaussian_average_1d(lo[1], hi[1], 0.0, 1.0)
            }
            Self::SlottedCylinder => {
                let mut s = 0.0;
                for b in 0..4 {
                    for a in 0..4 {
                        let x = lo[0] + (a as f64 + 0.5) * 0.25 * (hi[0] - lo[0]);
                        let y = lo[1] + (b as f64 + 0.5) * 0.25 * (hi[1] - lo[1]);
                        s += self.value([x, y]);
                    }
                }
                s / 16.0
            }
            Self::AlphaDemo => self.value([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]),
        }
    }
}

/// `ψ = sin²(πx) sin²(πy) cos(πt/2) / π`; the velocity is its curl.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamFunctionField;

impl StreamFunctionField {
    pub fn psi(&self, x: f64, y: f64, t: f64) -> f64 {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        sx * sx * sy * sy * (0.5 * PI * t).cos() / PI
    }

    /// `(∂ψ/∂y, -∂ψ/∂x)` at a point.
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let c = (0.5 * PI * t).cos();
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        [sx * sx * (2.0 * PI * y).sin() * c, -sy * sy * (2.0 * PI * x).sin() * c]
    }

    /// Normal velocity at the centre of a face. `axis` is the face normal;
    /// `at` is the face coordinate along it and `mid` the centre coordinate
    /// along the face.
    pub fn face_velocity(&self, axis: usize, at: f64, mid: f64, t: f64) -> f64 {
        match axis {
            0 => self.velocity(at, mid, t)[0],
            _ => self.velocity(mid, at, t)[1],
        }
    }

    /// Exact mean normal velocity over the face spanning `[a, b]`. Faces
    /// around any cell sum to zero up to round-off.
    pub fn face_average(&self, axis: usize, at: f64, a: f64, b: f64, t: f64) -> f64 {
        match axis {
            0 => (self.psi(at, b, t) - self.psi(at, a, t)) / (b - a),
            _ => -(self.psi(b, at, t) - self.psi(a, at, t)) / (b - a),
        }
    }

    /// Upper bound of `|v|` over the unit square for all times.
    pub fn max_speed(&self) -> f64 {
        1.0
    }
}
