use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use super::{binarize, BitonalImage, Fraglet, Threshold};
use crate::error::{Error, Result};

/// Read a PNG or PGM file and binarize it with `policy`.
pub fn load_image(path: &Path, policy: Threshold) -> Result<BitonalImage> {
    let img = image::open(path)
        .map_err(|e| Error::from(e).in_file(path))?
        .to_luma8();
    binarize(&img, policy).map_err(|e| e.in_file(path))
}

/// Write black ink on white paper. The format follows the file extension.
pub fn save_image(path: &Path, img: &BitonalImage) -> Result<()> {
    let out = GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Luma([if img.get(x as usize, y as usize) {
            0
        } else {
            255
        }])
    });
    out.save(path).map_err(|e| Error::from(e).in_file(path))
}

const PALETTE: [[u8; 3]; 6] = [
    [220, 40, 40],
    [30, 120, 220],
    [20, 160, 60],
    [200, 120, 0],
    [150, 40, 180],
    [0, 150, 150],
];

/// Debug overlay: ink in light grey, each fraglet contour in its own colour.
pub fn save_overlay(path: &Path, img: &BitonalImage, fraglets: &[Fraglet]) -> Result<()> {
    let mut out = RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        if img.get(x as usize, y as usize) {
            Rgb([190, 190, 190])
        } else {
            Rgb([255, 255, 255])
        }
    });
    for (i, f) in fraglets.iter().enumerate() {
        let colour = Rgb(PALETTE[i % PALETTE.len()]);
        for &(x, y) in &f.contour {
            if x >= 0 && y >= 0 && (x as u32) < out.width() && (y as u32) < out.height() {
                out.put_pixel(x as u32, y as u32, colour);
            }
        }
    }
    out.save(path).map_err(|e| Error::from(e).in_file(path))
}
