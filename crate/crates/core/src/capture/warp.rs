use super::homography::Homography;
use super::CaptureError;

/// Value written where the inverse map leaves the source image.
pub const FILL: u8 = 0;

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, CaptureError> {
        if channels != 1 && channels != 3 {
            return Err(CaptureError::InvalidImage("channels must be 1 or 3"));
        }
        if data.len() != width * height * channels {
            return Err(CaptureError::InvalidImage("sample count does not match dimensions"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("channel count checked by caller")
    }

    /// Builds an image from a per-pixel function returning one value per channel.
    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data).expect("dimensions are consistent")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Bilinear sample at continuous pixel coordinates; `None` outside the
    /// pixel-center hull `[0, w−1] × [0, h−1]`.
    pub fn sample(&self, x: f64, y: f64, c: usize) -> Option<f64> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let v = |xx, yy| self.get(xx, yy, c) as f64;
        let top = v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx;
        let bottom = v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

/// Resamples `src` into an `out_width × out_height` image where output pixel
/// `p` takes the source value at `h⁻¹·p`.
pub fn warp_image(src: &RasterImage, h: &Homography, out_width: usize, out_height: usize) -> RasterImage {
    let inv = h.inverse();
    let mut data = vec![FILL; out_width * out_height * src.channels];
    for y in 0..out_height {
        for x in 0..out_width {
            let Some([sx, sy]) = inv.apply([x as f64, y as f64]) else {
                continue;
            };
            // snap values within rounding noise of an integer so exact maps stay exact
            let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
            let (sx, sy) = (snap(sx), snap(sy));
            for c in 0..src.channels {
                if let Some(v) = src.sample(sx, sy, c) {
                    data[(y * out_width + x) * src.channels + c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    RasterImage::new(out_width, out_height, src.channels, data).expect("output dimensions are consistent")
}
