//! Axis-aligned boxes, binary masks and the overlap primitives built on them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got [{0}, {1}, {2}, {3}]")]
    NonFinite(f64, f64, f64, f64),
    #[error("malformed box [{x1}, {y1}, {x2}, {y2}]: expected x1 <= x2 and y1 <= y2")]
    Inverted { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("mask dimensions must be positive, got {width}x{height}")]
    EmptyCanvas { width: u32, height: u32 },
    #[error("mask pixel (row {row}, col {col}) lies outside {width}x{height}")]
    PixelOutOfBounds {
        row: u32,
        col: u32,
        width: u32,
        height: u32,
    },
}

/// Axis-aligned box in pixel coordinates, `(x1, y1)` top-left and `(x2, y2)`
/// bottom-right.
///
/// A value of this type always satisfies `x1 <= x2` and `y1 <= y2` with finite
/// coordinates; the only way to build one is through [`BoundingBox::new`].
/// Serialized as the array `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(GeometryError::NonFinite(x1, y1, x2, y2));
        }
        if x1 > x2 || y1 > y2 {
            return Err(GeometryError::Inverted { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Shift by `(dx, dy)`. Fails only if the result overflows to a
    /// non-finite coordinate.
    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// True when `other` lies entirely inside `self` (edges may touch).
    pub fn contains(&self, other: &Self) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
///
/// Zero-area boxes are accepted and simply contribute no intersection; a pair
/// whose union has zero area yields 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Foreground pixels of a `width x height` raster, stored as `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    pixels: BTreeSet<(u32, u32)>,
}

impl BinaryMask {
    pub fn new(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyCanvas { width, height });
        }
        let pixels: BTreeSet<(u32, u32)> = pixels.into_iter().collect();
        if let Some(&(row, col)) = pixels.iter().find(|&&(r, c)| r >= height || c >= width) {
            return Err(GeometryError::PixelOutOfBounds {
                row,
                col,
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Build from a row-major boolean raster of `width * height` entries.
    pub fn from_raster(width: u32, height: u32, raster: &[bool]) -> Result<Self, GeometryError> {
        let w = width as usize;
        let pixels = raster
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| ((i / w.max(1)) as u32, (i % w.max(1)) as u32));
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pixels.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Tight box around the mask foreground. The max side is extended by one
/// pixel so a single pixel covers unit area. `None` for an empty mask.
pub fn mask_to_box(mask: &BinaryMask) -> Option<BoundingBox> {
    let mut it = mask.pixels();
    let (r0, c0) = it.next()?;
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (r0, r0, c0, c0);
    for (r, c) in it {
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    BoundingBox::new(
        f64::from(cmin),
        f64::from(rmin),
        f64::from(cmax) + 1.0,
        f64::from(rmax) + 1.0,
    )
    .ok()
}
