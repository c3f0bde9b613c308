//! Texture plate geometry: the 16 height profiles mounted around the drum.
//!
//! One smooth control plate plus three ridge families (circular ridges,
//! rectangular ridges, waves), each in five variants: base geometry,
//! double height, double spacing, half height, half spacing. Profiles are
//! deterministic closed forms of the scan position.

use alloc::vec::Vec;

use crate::math;

/// Surface family of a plate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TextureGroup {
    /// Featureless control plate.
    Smooth,
    /// Semicircular bump train.
    CircularRidges,
    /// Square pulse train, 50% duty cycle.
    RectangularRidges,
    /// Raised sinusoid.
    Waves,
}

/// Geometry of one texture plate.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TextureSpec {
    /// Plate label, `'A'` through `'P'`.
    pub id: char,
    /// Surface family.
    pub group: TextureGroup,
    /// Ridge height factor relative to [`Self::base_height`] (0.5, 1, or 2).
    pub height_scale: f64,
    /// Ridge spacing factor relative to [`Self::base_spacing`] (0.5, 1, or 2).
    pub space_scale: f64,
    /// Base ridge height in mm.
    pub base_height: f64,
    /// Base ridge period in mm.
    pub base_spacing: f64,
}

/// Default base ridge height (mm).
pub const BASE_HEIGHT_MM: f64 = 1.0;
/// Default base ridge period (mm).
pub const BASE_SPACING_MM: f64 = 6.0;

/// Number of plates in the standard set.
pub const N_TEXTURES: usize = 16;

/// (height_scale, space_scale) for the five variants of each ridge family,
/// in set order: base, double height, double space, half height, half space.
const VARIANTS: [(f64, f64); 5] = [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (0.5, 1.0), (1.0, 0.5)];

impl TextureSpec {
    /// Plate `index` (0–15) of the standard set: A = smooth, B–F = circular
    /// ridges, G–K = rectangular ridges, L–P = waves, each family in variant
    /// order base, double height, double space, half height, half space.
    pub fn plate(index: usize) -> Self {
        assert!(index < N_TEXTURES, "plate index {index} out of range");
        let id = (b'A' + index as u8) as char;
        let (group, variant) = match index {
            0 => (TextureGroup::Smooth, (1.0, 1.0)),
            1..=5 => (TextureGroup::CircularRidges, VARIANTS[index - 1]),
            6..=10 => (TextureGroup::RectangularRidges, VARIANTS[index - 6]),
            _ => (TextureGroup::Waves, VARIANTS[index - 11]),
        };
        Self {
            id,
            group,
            height_scale: variant.0,
            space_scale: variant.1,
            base_height: BASE_HEIGHT_MM,
            base_spacing: BASE_SPACING_MM,
        }
    }

    /// The full standard set of 16 plates, A through P.
    pub fn standard_set() -> Vec<Self> {
        (0..N_TEXTURES).map(Self::plate).collect()
    }

    /// Plate index (0–15) within the standard set.
    pub fn index(&self) -> usize {
        (self.id as u8 - b'A') as usize
    }

    /// Effective ridge height in mm.
    pub fn height(&self) -> f64 {
        self.base_height * self.height_scale
    }

    /// Effective ridge period in mm, or `None` for the smooth plate.
    pub fn period(&self) -> Option<f64> {
        match self.group {
            TextureGroup::Smooth => None,
            _ => Some(self.base_spacing * self.space_scale),
        }
    }

    /// Surface height (mm) at scan position `position` (mm).
    ///
    /// Total in `position`; non-smooth profiles are periodic with period
    /// [`Self::period`] and peak at [`Self::height`].
    pub fn profile(&self, position: f64) -> f64 {
        let h = self.height();
        match self.group {
            TextureGroup::Smooth => 0.0,
            TextureGroup::Waves => {
                let s = self.base_spacing * self.space_scale;
                0.5 * h * (1.0 + math::sin(2.0 * core::f64::consts::PI * position / s))
            }
            TextureGroup::RectangularRidges => {
                let s = self.base_spacing * self.space_scale;
                let phase = math::rem_euclid(position, s);
                if phase < 0.5 * s {
                    h
                } else {
                    0.0
                }
            }
            TextureGroup::CircularRidges => {
                // One semicircular bump per period, centered mid-period. The
                // half-width equals the height (a true semicircle) unless the
                // period is too short, in which case it is capped at a half
                // period so bumps never overlap.
                let s = self.base_spacing * self.space_scale;
                let w = h.min(0.5 * s);
                let dx = math::rem_euclid(position, s) - 0.5 * s;
                let t = 1.0 - (dx / w) * (dx / w);
                if t > 0.0 {
                    h * math::sqrt(t)
                } else {
                    0.0
                }
            }
        }
    }
}
