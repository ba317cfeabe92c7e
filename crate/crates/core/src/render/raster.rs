//! Aliased scanline rasterization into an RGB8 buffer.
//!
//! Pixel `(i, j)` is covered when its center `(i + 0.5, j + 0.5)` is inside
//! the shape.

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Canvas {
    pub fn new(width: u32, height: u32, background: Rgb) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&background);
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, c: Rgb) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn span(&mut self, y: u32, lo: f64, hi: f64, c: Rgb) {
        // Centers in [lo, hi].
        let first = (lo - 0.5).ceil().max(0.0);
        let last = (hi - 0.5).floor().min(self.width as f64 - 1.0);
        if !(first <= last) {
            return;
        }
        for x in first as u32..=last as u32 {
            self.put(x, y, c);
        }
    }

    fn rows(&self, ymin: f64, ymax: f64) -> std::ops::RangeInclusive<u32> {
        let first = (ymin - 0.5).ceil().max(0.0);
        let last = (ymax - 0.5).floor().min(self.height as f64 - 1.0);
        if !(first <= last) {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        first as u32..=last as u32
    }

    /// Even-odd fill of a closed polygon.
    pub fn fill_polygon(&mut self, pts: &[(f64, f64)], c: Rgb) {
        if pts.len() < 3 || pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return;
        }
        let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let mut xs = Vec::new();
        for y in self.rows(ymin, ymax) {
            let yc = y as f64 + 0.5;
            xs.clear();
            for i in 0..pts.len() {
                let (x0, y0) = pts[i];
                let (x1, y1) = pts[(i + 1) % pts.len()];
                if (y0 <= yc && yc < y1) || (y1 <= yc && yc < y0) {
                    xs.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                // Half-open on the right so shared edges are not drawn twice.
                let first = (pair[0] - 0.5).ceil().max(0.0);
                let end = (pair[1] - 0.5).ceil().min(self.width as f64);
                if first < end {
                    for x in first as u32..end as u32 {
                        self.put(x, y, c);
                    }
                }
            }
        }
    }

    /// Segment of the given width with round caps: every pixel center within
    /// `width / 2` of the segment.
    pub fn draw_segment(&mut self, a: (f64, f64), b: (f64, f64), width: f64, c: Rgb) {
        if !(width > 0.0) || ![a.0, a.1, b.0, b.1].iter().all(|v| v.is_finite()) {
            return;
        }
        let r = 0.5 * width;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = dx.hypot(dy);
        let rect: Option<[(f64, f64); 4]> = (len > 0.0).then(|| {
            let (nx, ny) = (-dy / len * r, dx / len * r);
            [
                (a.0 + nx, a.1 + ny),
                (b.0 + nx, b.1 + ny),
                (b.0 - nx, b.1 - ny),
                (a.0 - nx, a.1 - ny),
            ]
        });
        let ymin = a.1.min(b.1) - r;
        let ymax = a.1.max(b.1) + r;
        for y in self.rows(ymin, ymax) {
            let yc = y as f64 + 0.5;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (cx, cy) in [a, b] {
                let d = yc - cy;
                if d.abs() <= r {
                    let h = (r * r - d * d).sqrt();
                    lo = lo.min(cx - h);
                    hi = hi.max(cx + h);
                }
            }
            if let Some(q) = rect {
                for i in 0..4 {
                    let (x0, y0) = q[i];
                    let (x1, y1) = q[(i + 1) % 4];
                    if (y0 - yc) * (y1 - yc) <= 0.0 {
                        if y0 == y1 {
                            lo = lo.min(x0.min(x1));
                            hi = hi.max(x0.max(x1));
                        } else {
                            let x = x0 + (yc - y0) * (x1 - x0) / (y1 - y0);
                            lo = lo.min(x);
                            hi = hi.max(x);
                        }
                    }
                }
            }
            if lo <= hi {
                self.span(y, lo, hi, c);
            }
        }
    }
}
