//! RGBA raster with a z-buffered triangle fill and overlay primitives.

use std::io;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGBA, top row first.
    pub data: Vec<u8>,
}

pub type Rgba = [u8; 4];

impl Image {
    pub fn new(width: usize, height: usize, fill: Rgba) -> Self {
        let mut data = Vec::with_capacity(width * height * 4);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgba {
        let i = 4 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgba) {
        let i = 4 * (y * self.width + x);
        self.data[i..i + 4].copy_from_slice(&c);
    }

    fn set_signed(&mut self, x: i64, y: i64, c: Rgba) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, c);
        }
    }

    pub fn to_png(&self) -> io::Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(io::Error::other)?;
            w.write_image_data(&self.data).map_err(io::Error::other)?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> io::Result<Self> {
        let mut dec = png::Decoder::new(io::Cursor::new(bytes));
        dec.set_transformations(png::Transformations::EXPAND);
        let mut reader = dec.read_info().map_err(io::Error::other)?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| io::Error::other("image too large"))?];
        let info = reader.next_frame(&mut buf).map_err(io::Error::other)?;
        if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "expected 8-bit RGBA"));
        }
        buf.truncate(info.buffer_size());
        Ok(Self { width: info.width as usize, height: info.height as usize, data: buf })
    }
}

/// Depth buffer paired with an image; smaller depth wins.
pub struct Canvas<'a> {
    pub image: &'a mut Image,
    depth: Vec<f64>,
    /// Pixel columns `[0, viewport_w)` receive geometry.
    viewport_w: usize,
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

impl<'a> Canvas<'a> {
    pub fn new(image: &'a mut Image, viewport_w: usize) -> Self {
        let n = image.width * image.height;
        Self { image, depth: vec![f64::INFINITY; n], viewport_w }
    }

    /// Fills a screen-space triangle (`[x, y, depth]` per vertex) with a flat
    /// colour, testing pixel centres.
    pub fn fill_triangle(&mut self, v: [[f64; 3]; 3], color: Rgba) {
        let p = v.map(|q| [q[0], q[1]]);
        let area = edge(p[0], p[1], p[2]);
        if area.abs() < 1e-12 {
            return;
        }
        let xmin = v.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let ymin = v.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let xmax = (v.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).min(self.viewport_w as i64 - 1);
        let ymax = (v.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).min(self.image.height as i64 - 1);
        if xmax < 0 || ymax < 0 {
            return;
        }
        for y in ymin..=ymax as usize {
            for x in xmin..=xmax as usize {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                let w0 = edge(p[1], p[2], c) / area;
                let w1 = edge(p[2], p[0], c) / area;
                let w2 = edge(p[0], p[1], c) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * v[0][2] + w1 * v[1][2] + w2 * v[2][2];
                let i = y * self.image.width + x;
                if z < self.depth[i] {
                    self.depth[i] = z;
                    self.image.set(x, y, color);
                }
            }
        }
    }
}

/// Thick line by stamping squares along a DDA walk.
pub fn draw_line(img: &mut Image, a: [f64; 2], b: [f64; 2], half_width: i64, c: Rgba) {
    let steps = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil() as i64).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a[0] + t * (b[0] - a[0])).floor() as i64;
        let y = (a[1] + t * (b[1] - a[1])).floor() as i64;
        for dy in -half_width..=half_width {
            for dx in -half_width..=half_width {
                img.set_signed(x + dx, y + dy, c);
            }
        }
    }
}

/// Overlay triangle without depth test.
pub fn fill_overlay_triangle(img: &mut Image, p: [[f64; 2]; 3], c: Rgba) {
    let area = edge(p[0], p[1], p[2]);
    if area.abs() < 1e-12 {
        return;
    }
    let xmin = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min).floor() as i64;
    let xmax = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
    let ymin = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min).floor() as i64;
    let ymax = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
    for y in ymin..=ymax {
        for x in xmin..=xmax {
            let q = [x as f64 + 0.5, y as f64 + 0.5];
            let w = [edge(p[1], p[2], q) / area, edge(p[2], p[0], q) / area, edge(p[0], p[1], q) / area];
            if w.iter().all(|w| *w >= 0.0) {
                img.set_signed(x, y, c);
            }
        }
    }
}

pub fn draw_ring(img: &mut Image, center: [f64; 2], radius: f64, c: Rgba) {
    let r = radius.ceil() as i64 + 1;
    let (cx, cy) = (center[0].floor() as i64, center[1].floor() as i64);
    for dy in -r..=r {
        for dx in -r..=r {
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            if (d - radius).abs() <= 1.0 {
                img.set_signed(cx + dx, cy + dy, c);
            }
        }
    }
}

pub fn fill_rect(img: &mut Image, x0: usize, y0: usize, x1: usize, y1: usize, c: Rgba) {
    for y in y0..y1.min(img.height) {
        for x in x0..x1.min(img.width) {
            img.set(x, y, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let mut img = Image::new(5, 3, [1, 2, 3, 255]);
        img.set(4, 2, [200, 100, 50, 255]);
        let back = Image::from_png(&img.to_png().unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn nearer_triangle_wins_regardless_of_order() {
        let tri = |z: f64| [[0.0, 0.0, z], [10.0, 0.0, z], [0.0, 10.0, z]];
        for order in [[1.0, 2.0], [2.0, 1.0]] {
            let mut img = Image::new(10, 10, [0; 4]);
            let mut canvas = Canvas::new(&mut img, 10);
            for z in order {
                canvas.fill_triangle(tri(z), if z == 1.0 { [255, 0, 0, 255] } else { [0, 0, 255, 255] });
            }
            assert_eq!(img.pixel(2, 2), [255, 0, 0, 255]);
            assert_eq!(img.pixel(9, 9), [0; 4]);
        }
    }

    #[test]
    fn covers_exactly_the_pixel_centres_inside() {
        let mut img = Image::new(8, 8, [0; 4]);
        let mut canvas = Canvas::new(&mut img, 8);
        let quad = [[2.0, 2.0, 0.0], [6.0, 2.0, 0.0], [6.0, 5.0, 0.0], [2.0, 5.0, 0.0]];
        canvas.fill_triangle([quad[0], quad[1], quad[2]], [9; 4]);
        canvas.fill_triangle([quad[0], quad[2], quad[3]], [9; 4]);
        let covered: usize = (0..8).flat_map(|y| (0..8).map(move |x| (x, y))).filter(|&(x, y)| img.pixel(x, y) == [9; 4]).count();
        assert_eq!(covered, 4 * 3);
    }
}
