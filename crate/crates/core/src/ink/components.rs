use super::{BitonalImage, Point};

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Rect {
    pub fn width(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.y1 - self.y0 + 1) as usize
    }

    fn bounding(points: &[Point]) -> Rect {
        let mut r = Rect {
            x0: i32::MAX,
            y0: i32::MAX,
            x1: i32::MIN,
            y1: i32::MIN,
        };
        for &(x, y) in points {
            r.x0 = r.x0.min(x);
            r.y0 = r.y0.min(y);
            r.x1 = r.x1.max(x);
            r.y1 = r.y1.max(y);
        }
        r
    }
}

/// An 8-connected set of ink pixels, stored in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectedComponent {
    pixels: Vec<Point>,
    bbox: Rect,
}

impl ConnectedComponent {
    /// Wrap a pixel set. Pixels are sorted and deduplicated; the caller is
    /// responsible for connectivity.
    pub fn from_pixels(mut pixels: Vec<Point>) -> Option<Self> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        let bbox = Rect::bounding(&pixels);
        Some(ConnectedComponent { pixels, bbox })
    }

    pub fn pixels(&self) -> &[Point] {
        &self.pixels
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Local mask over the bounding box padded by one pixel on every side.
    pub(crate) fn mask(&self) -> Mask {
        Mask::new(&self.pixels, self.bbox)
    }
}

/// Dense membership test for a pixel set.
pub(crate) struct Mask {
    ox: i32,
    oy: i32,
    w: i32,
    h: i32,
    bits: Vec<bool>,
}

impl Mask {
    fn new(pixels: &[Point], bbox: Rect) -> Mask {
        let ox = bbox.x0 - 1;
        let oy = bbox.y0 - 1;
        let w = bbox.width() as i32 + 2;
        let h = bbox.height() as i32 + 2;
        let mut bits = vec![false; (w * h) as usize];
        for &(x, y) in pixels {
            bits[((y - oy) * w + (x - ox)) as usize] = true;
        }
        Mask { ox, oy, w, h, bits }
    }

    pub(crate) fn contains(&self, (x, y): Point) -> bool {
        let lx = x - self.ox;
        let ly = y - self.oy;
        lx >= 0 && ly >= 0 && lx < self.w && ly < self.h && self.bits[(ly * self.w + lx) as usize]
    }
}

pub(crate) const NEIGHBOURS_8: [Point; 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Label 8-connected ink components.
///
/// Components come out ordered by their first pixel in row-major order.
pub fn extract_components(img: &BitonalImage) -> Vec<ConnectedComponent> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !img.get(x, y) || seen[i] {
                continue;
            }
            seen[i] = true;
            stack.push((x as i32, y as i32));
            let mut pixels = Vec::new();
            while let Some((px, py)) = stack.pop() {
                pixels.push((px, py));
                for (dx, dy) in NEIGHBOURS_8 {
                    let (nx, ny) = (px + dx, py + dy);
                    if img.is_ink(nx as i64, ny as i64) {
                        let j = ny as usize * w + nx as usize;
                        if !seen[j] {
                            seen[j] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            out.extend(ConnectedComponent::from_pixels(pixels));
        }
    }
    out
}

/// Split an arbitrary pixel set into its 8-connected parts.
pub(crate) fn split_connected(pixels: Vec<Point>) -> Vec<ConnectedComponent> {
    let Some(all) = ConnectedComponent::from_pixels(pixels) else {
        return Vec::new();
    };
    let mask = all.mask();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for &p in all.pixels() {
        if !seen.insert(p) {
            continue;
        }
        let mut stack = vec![p];
        let mut part = Vec::new();
        while let Some(q) = stack.pop() {
            part.push(q);
            for (dx, dy) in NEIGHBOURS_8 {
                let n = (q.0 + dx, q.1 + dy);
                if mask.contains(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        out.extend(ConnectedComponent::from_pixels(part));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn squares() -> BitonalImage {
        BitonalImage::from_fn(12, 6, |x, y| {
            (1..4).contains(&y) && ((1..4).contains(&x) || (7..10).contains(&x))
        })
        .unwrap()
    }

    #[test]
    fn blank_image_has_no_components() {
        let img = BitonalImage::new(5, 5).unwrap();
        assert!(extract_components(&img).is_empty());
    }

    #[test]
    fn two_disjoint_squares() {
        let cs = extract_components(&squares());
        assert_eq!(cs.len(), 2);
        assert!(cs.iter().all(|c| c.len() == 9));
        assert_eq!(cs[0].pixels()[0], (1, 1));
        assert_eq!(cs[1].pixels()[0], (7, 1));
    }

    /// 4-connected flood fill over the ring's complement: the ring is a
    /// single piece iff every ink pixel is reached from one seed.
    #[test]
    fn ring_is_one_component() {
        let img = BitonalImage::from_fn(21, 21, |x, y| {
            let d = ((x as f64 - 10.0).powi(2) + (y as f64 - 10.0).powi(2)).sqrt();
            (6.0..=8.5).contains(&d)
        })
        .unwrap();
        let cs = extract_components(&img);
        assert_eq!(cs.len(), 1);

        // oracle: breadth-first fill from the first ink pixel
        let start = (0..21 * 21)
            .map(|i| (i % 21, i / 21))
            .find(|&(x, y)| img.get(x, y))
            .unwrap();
        let mut seen = vec![false; 21 * 21];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start.1 * 21 + start.0] = true;
        let mut reached = 0;
        while let Some((x, y)) = queue.pop_front() {
            reached += 1;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if img.is_ink(nx, ny) && !seen[ny as usize * 21 + nx as usize] {
                        seen[ny as usize * 21 + nx as usize] = true;
                        queue.push_back((nx as usize, ny as usize));
                    }
                }
            }
        }
        assert_eq!(reached, img.ink_count());
        assert_eq!(cs[0].len(), img.ink_count());
    }

    #[test]
    fn diagonal_touch_is_connected() {
        let img = BitonalImage::from_fn(4, 4, |x, y| x == y).unwrap();
        assert_eq!(extract_components(&img).len(), 1);
    }

    proptest! {
        #[test]
        fn components_partition_ink(bits in proptest::collection::vec(any::<bool>(), 9 * 7)) {
            let img = BitonalImage::from_ink(9, 7, bits).unwrap();
            let cs = extract_components(&img);
            let total: usize = cs.iter().map(|c| c.len()).sum();
            prop_assert_eq!(total, img.ink_count());
            let mut all: Vec<Point> = cs.iter().flat_map(|c| c.pixels().to_vec()).collect();
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), total);
            // idempotent: re-rendering one component gives back exactly it
            for c in &cs {
                let single = BitonalImage::from_fn(9, 7, |x, y| c.pixels().contains(&(x as i32, y as i32))).unwrap();
                let again = extract_components(&single);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0], c);
            }
        }
    }
}
