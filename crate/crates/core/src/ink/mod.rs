//! Ink extraction: binarization, connected components, fraglets and their
//! contour descriptors.
//!
//! Pixel coordinates are `(x, y)` pairs with `y` growing downwards, as in the
//! image files. Contour descriptors flip to a `y`-up frame so that
//! "counter-clockwise" means what it does on paper.

mod binarize;
mod components;
mod contour;
mod fragment;
mod io;

pub use binarize::{binarize, otsu_threshold, Threshold};
pub use components::{extract_components, ConnectedComponent, Rect};
pub use contour::{contour_descriptor, trace_boundary, DescriptorParams, Encoding, Fraglet};
pub use fragment::{fragment_on_y_minima, FragmentParams};
pub use io::{load_image, save_image, save_overlay};

use crate::error::{Error, Result};

/// A pixel position `(x, y)`.
pub type Point = (i32, i32);

/// Rectangular grid of ink / background pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitonalImage {
    width: usize,
    height: usize,
    ink: Vec<bool>,
}

impl BitonalImage {
    /// Blank (all background) image.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::from_ink(width, height, vec![false; width * height])
    }

    pub fn from_ink(width: usize, height: usize, ink: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if ink.len() != width * height {
            return Err(Error::Input(format!(
                "pixel buffer has {} entries for a {width}x{height} image",
                ink.len()
            )));
        }
        Ok(BitonalImage { width, height, ink })
    }

    /// Build an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut ink = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                ink.push(f(x, y));
            }
        }
        Self::from_ink(width, height, ink)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.ink[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, ink: bool) {
        self.ink[y * self.width + x] = ink;
    }

    /// Ink test that treats everything outside the image as background.
    pub fn is_ink(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.ink[y as usize * self.width + x as usize]
    }

    pub fn ink_count(&self) -> usize {
        self.ink.iter().filter(|&&b| b).count()
    }

    /// Row-major ink mask.
    pub fn as_slice(&self) -> &[bool] {
        &self.ink
    }

    /// Rotate the content by 90 degrees counter-clockwise (as seen on screen).
    pub fn rotate_ccw(&self) -> Self {
        let (w, h) = (self.width, self.height);
        // old (x, y) lands on new (y, w - 1 - x) in an h-wide, w-tall image
        let mut ink = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if self.get(x, y) {
                    ink[(w - 1 - x) * h + y] = true;
                }
            }
        }
        BitonalImage {
            width: h,
            height: w,
            ink,
        }
    }

    /// Copy out a sub-rectangle; used as the manual-crop hook.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self> {
        if x + width > self.width || y + height > self.height {
            return Err(Error::Input(format!(
                "crop {width}x{height}+{x}+{y} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        Self::from_fn(width, height, |cx, cy| self.get(x + cx, y + cy))
    }
}

/// Knobs for turning an image into fraglets.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FragletParams {
    pub descriptor: DescriptorParams,
    /// Profile smoothing half-window for the Y-minima search.
    pub smoothing: usize,
    /// Minimum dip depth, as a fraction of component height, for a cut.
    pub min_depth: f64,
    /// Override for the character-width estimate; median component height
    /// when `None`.
    pub char_width: Option<f64>,
}

impl Default for FragletParams {
    fn default() -> Self {
        FragletParams {
            descriptor: DescriptorParams::default(),
            smoothing: 1,
            min_depth: 0.2,
            char_width: None,
        }
    }
}

/// Components → Y-minima fragments → contour descriptors.
///
/// Fragments whose contour degenerates to a point are skipped with a warning.
pub fn fraglets_from_image(img: &BitonalImage, params: &FragletParams) -> Vec<Fraglet> {
    let components = extract_components(img);
    let char_width = params
        .char_width
        .unwrap_or_else(|| median_height(&components));
    let frag = FragmentParams {
        char_width,
        smoothing: params.smoothing,
        min_depth: params.min_depth,
    };
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for c in &components {
        for piece in fragment_on_y_minima(c, &frag) {
            match contour_descriptor(&piece, &params.descriptor) {
                Ok(f) => out.push(f),
                Err(_) => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} single-pixel fragments");
    }
    out
}

fn median_height(components: &[ConnectedComponent]) -> f64 {
    if components.is_empty() {
        return 0.0;
    }
    let mut h: Vec<usize> = components.iter().map(|c| c.bbox().height()).collect();
    h.sort_unstable();
    let n = h.len();
    if n % 2 == 1 {
        h[n / 2] as f64
    } else {
        (h[n / 2 - 1] + h[n / 2]) as f64 / 2.0
    }
}
