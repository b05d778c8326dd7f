use super::components::split_connected;
use super::{ConnectedComponent, Point};

/// Parameters of the Y-minima cutter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FragmentParams {
    /// Components no wider than this pass through uncut.
    pub char_width: f64,
    /// Half-window of the moving average applied to the height profile.
    pub smoothing: usize,
    /// A dip is cut only if it is at least this fraction of the component
    /// height below the lower of the two surrounding maxima.
    pub min_depth: f64,
}

/// Split a component at the valleys of its upper contour.
///
/// The upper contour is read as a height profile (`y`-up) per column. Every
/// local-minimum plateau that is deep enough yields a vertical cut at its
/// centre column; the resulting slabs are relabelled into 8-connected
/// pieces so that each fragment has a single outer boundary.
pub fn fragment_on_y_minima(c: &ConnectedComponent, p: &FragmentParams) -> Vec<ConnectedComponent> {
    let bbox = c.bbox();
    if (bbox.width() as f64) <= p.char_width {
        return vec![c.clone()];
    }
    let cuts = cut_columns(c, p);
    if cuts.is_empty() {
        return vec![c.clone()];
    }
    let mut slabs: Vec<Vec<Point>> = vec![Vec::new(); cuts.len() + 1];
    for &(x, y) in c.pixels() {
        let slab = cuts.partition_point(|&cx| cx <= x);
        slabs[slab].push((x, y));
    }
    slabs.into_iter().flat_map(split_connected).collect()
}

/// Height of the upper contour above the bounding-box floor, per column.
pub(crate) fn upper_profile(c: &ConnectedComponent) -> Vec<f64> {
    let bbox = c.bbox();
    let mut top = vec![i32::MAX; bbox.width()];
    for &(x, y) in c.pixels() {
        let i = (x - bbox.x0) as usize;
        top[i] = top[i].min(y);
    }
    top.into_iter()
        .map(|t| {
            if t == i32::MAX {
                0.0
            } else {
                (bbox.y1 - t + 1) as f64
            }
        })
        .collect()
}

fn smooth(profile: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return profile.to_vec();
    }
    let n = profile.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            profile[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn cut_columns(c: &ConnectedComponent, p: &FragmentParams) -> Vec<i32> {
    let h = smooth(&upper_profile(c), p.smoothing);
    let n = h.len();
    let min_depth = p.min_depth * c.bbox().height() as f64;
    let eq = |a: f64, b: f64| (a - b).abs() < 1e-9;

    let mut cuts = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(h[i] < h[i - 1]) || eq(h[i], h[i - 1]) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && eq(h[j + 1], h[i]) {
            j += 1;
        }
        if j + 1 < n && h[j + 1] > h[i] {
            let left = h[..i].iter().cloned().fold(f64::MIN, f64::max);
            let right = h[j + 1..].iter().cloned().fold(f64::MIN, f64::max);
            if left.min(right) - h[i] >= min_depth {
                cuts.push(c.bbox().x0 + ((i + j) / 2) as i32);
            }
        }
        i = j + 1;
    }
    cuts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{extract_components, BitonalImage};
    use proptest::prelude::*;

    fn params(char_width: f64) -> FragmentParams {
        FragmentParams {
            char_width,
            smoothing: 0,
            min_depth: 0.2,
        }
    }

    fn component(img: &BitonalImage) -> ConnectedComponent {
        let mut cs = extract_components(img);
        assert_eq!(cs.len(), 1);
        cs.remove(0)
    }

    #[test]
    fn convex_blob_passes_through() {
        let img = BitonalImage::from_fn(30, 20, |x, y| {
            ((x as f64 - 15.0) / 13.0).powi(2) + ((y as f64 - 10.0) / 8.0).powi(2) <= 1.0
        })
        .unwrap();
        let c = component(&img);
        let frags = fragment_on_y_minima(&c, &params(5.0));
        assert_eq!(frags, vec![c]);
    }

    /// Brute-force oracle: scan every column pair for a strict interior
    /// minimum of the column tops and count the resulting pieces.
    #[test]
    fn bridged_blobs_split_in_two() {
        let img = BitonalImage::from_fn(27, 12, |x, y| {
            let blob_a = (1..11).contains(&x) && (1..11).contains(&y);
            let bridge = (11..16).contains(&x) && y == 10;
            let blob_b = (16..26).contains(&x) && (1..11).contains(&y);
            blob_a || bridge || blob_b
        })
        .unwrap();
        let c = component(&img);

        let tops: Vec<i32> = (1..26)
            .map(|x| {
                c.pixels()
                    .iter()
                    .filter(|p| p.0 == x)
                    .map(|p| p.1)
                    .min()
                    .unwrap()
            })
            .collect();
        let interior_minima = (1..tops.len() - 1)
            .filter(|&i| {
                let lowest = tops[i];
                tops[..i].iter().any(|&t| t < lowest)
                    && tops[i + 1..].iter().any(|&t| t < lowest)
                    && tops.iter().all(|&t| t <= lowest)
            })
            .count();
        assert!(interior_minima > 0);

        let frags = fragment_on_y_minima(&c, &params(10.0));
        assert_eq!(frags.len(), 2);
        let total: usize = frags.iter().map(|f| f.len()).sum();
        assert_eq!(total, c.len());
    }

    #[test]
    fn narrow_components_are_not_cut() {
        let img = BitonalImage::from_fn(27, 12, |x, y| {
            ((1..11).contains(&x) || (16..26).contains(&x)) && (1..11).contains(&y)
                || (11..16).contains(&x) && y == 10
        })
        .unwrap();
        let c = component(&img);
        assert_eq!(fragment_on_y_minima(&c, &params(40.0)).len(), 1);
    }

    #[test]
    fn shallow_dips_are_ignored() {
        // a bar with a one-pixel notch in a 10-pixel-high component
        let img = BitonalImage::from_fn(30, 12, |x, y| {
            (1..29).contains(&x) && (1..11).contains(&y) && !(x == 15 && y == 1)
        })
        .unwrap();
        let c = component(&img);
        assert_eq!(fragment_on_y_minima(&c, &params(5.0)).len(), 1);
    }

    proptest! {
        #[test]
        fn fragments_cover_component_exactly(bits in proptest::collection::vec(any::<bool>(), 16 * 6)) {
            let img = BitonalImage::from_ink(16, 6, bits).unwrap();
            for c in extract_components(&img) {
                let frags = fragment_on_y_minima(&c, &params(2.0));
                prop_assert!(frags.iter().all(|f| !f.is_empty()));
                let mut union: Vec<Point> = frags.iter().flat_map(|f| f.pixels().to_vec()).collect();
                union.sort_unstable_by_key(|&(x, y)| (y, x));
                prop_assert_eq!(union.as_slice(), c.pixels());
            }
        }
    }
}
