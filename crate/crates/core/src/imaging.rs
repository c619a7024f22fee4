//! Grayscale images, coordinate grids and reconstruction metrics.

use std::io::Cursor;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Largest accepted side length for decoded images.
pub const MAX_SIDE: usize = 1 << 14;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::usage("image dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(Error::usage(format!(
                "{} pixels do not fill a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::usage(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Image { height, width, pixels })
    }

    /// Model outputs clamped into `[0, 1]`; non-finite values become 0.
    pub fn from_predictions(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|&v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Image::new(height, width, pixels)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Image::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Nearest-neighbour enlargement by an integer factor.
    pub fn replicate(&self, factor: usize) -> Result<Image> {
        if factor == 0 {
            return Err(Error::usage("replication factor must be at least 1"));
        }
        let (h, w) = (self.height * factor, self.width * factor);
        let pixels = (0..h * w)
            .map(|k| self.get(k / w / factor, k % w / factor))
            .collect();
        Image::new(h, w, pixels)
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        self.to_pgm_with_comment("")
    }

    /// PGM with each line of `comment` as a `#` header comment.
    pub fn to_pgm_with_comment(&self, comment: &str) -> Vec<u8> {
        let mut head = String::from("P5\n");
        for line in comment.lines() {
            head.push_str("# ");
            head.push_str(line);
            head.push('\n');
        }
        head.push_str(&format!("{} {}\n255\n", self.width, self.height));
        let mut out = head.into_bytes();
        out.extend(self.pixels.iter().map(|v| (v * 255.0).round() as u8));
        out
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Luma of raw samples, weighted in integers so that white maps to exactly 1.
fn luma(r: u32, g: u32, b: u32, maxval: u32) -> f64 {
    let weighted = 299 * r as u64 + 587 * g as u64 + 114 * b as u64;
    (weighted as f64 / (1000 * maxval as u64) as f64).min(1.0)
}

/// Decodes binary PGM (P5), binary PPM (P6) or PNG; colour is reduced to luma.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(Error::Format(
            "unrecognized image: expected binary PGM (magic P5), PPM (P6) or PNG".into(),
        ))
    }
}

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        // whitespace and comments between header fields
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!("PNM header: missing {name}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        fields[i] = text
            .parse()
            .map_err(|_| Error::Format(format!("PNM header: {name} '{text}' out of range")))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("PNM header: expected whitespace after maxval".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::Format(format!("PNM: unsupported dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PNM: maxval {maxval} outside 1..=65535")));
    }
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let need = width * height * channels * sample_bytes;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "PNM: truncated payload, {} of {need} bytes",
            payload.len()
        )));
    }
    let sample = |k: usize| -> u32 {
        let v = if sample_bytes == 2 {
            u16::from_be_bytes([payload[2 * k], payload[2 * k + 1]]) as u32
        } else {
            payload[k] as u32
        };
        v.min(maxval as u32)
    };
    let m = maxval as u32;
    let pixels = (0..width * height)
        .map(|p| {
            if channels == 3 {
                luma(sample(3 * p), sample(3 * p + 1), sample(3 * p + 2), m)
            } else {
                sample(p) as f64 / maxval as f64
            }
        })
        .collect();
    Image::new(height, width, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let fmt = |e: png::DecodingError| Error::Format(format!("PNG: {e}"));
    let mut decoder = png::Decoder::new_with_limits(Cursor::new(bytes), png::Limits { bytes: 64 << 20 });
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(fmt)?;
    let (w, h) = (reader.info().width as usize, reader.info().height as usize);
    if w > MAX_SIDE || h > MAX_SIDE {
        return Err(Error::Format(format!("PNG: unsupported dimensions {w}x{h}")));
    }
    let size = reader
        .output_buffer_size()
        .filter(|&n| n <= 64 << 20)
        .ok_or_else(|| Error::Format(format!("PNG: {w}x{h} image too large")))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(fmt)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Format("PNG: palette was not expanded".into()));
        }
    };
    let mut pixels = Vec::with_capacity(w * h);
    for row in 0..h {
        let line = &buf[row * info.line_size..];
        for col in 0..w {
            let px = &line[col * channels..];
            pixels.push(if channels >= 3 {
                luma(px[0] as u32, px[1] as u32, px[2] as u32, 255)
            } else {
                px[0] as f64 / 255.0
            });
        }
    }
    Image::new(h, w, pixels)
}

/// Overlap of source cells with output cell `i` when `n_in` cells map onto
/// `n_out`; weights are fractions of one output cell.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let (lo, hi) = (i as f64 * ratio, (i + 1) as f64 * ratio);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            (first..last)
                .map(|s| {
                    let overlap = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                    (s, overlap / ratio)
                })
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Area-average resampling to a smaller (or equal) size.
pub fn downsample(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::usage("output dimensions must be positive"));
    }
    if out_h > img.height || out_w > img.width {
        return Err(Error::usage(format!(
            "cannot downsample {}x{} to larger {out_h}x{out_w}; query the model on a denser grid instead",
            img.height, img.width
        )));
    }
    let rows = area_weights(img.height, out_h);
    let cols = area_weights(img.width, out_w);
    let mut tmp = vec![0.0; out_h * img.width];
    for (i, ws) in rows.iter().enumerate() {
        for &(s, w) in ws {
            for c in 0..img.width {
                tmp[i * img.width + c] += w * img.get(s, c);
            }
        }
    }
    let mut pixels = vec![0.0; out_h * out_w];
    for i in 0..out_h {
        for (j, ws) in cols.iter().enumerate() {
            pixels[i * out_w + j] = ws
                .iter()
                .map(|&(s, w)| w * tmp[i * img.width + s])
                .sum::<f64>()
                .clamp(0.0, 1.0);
        }
    }
    Image::new(out_h, out_w, pixels)
}

/// Pixel-centre coordinates `(x_j, y_i)` in `(−1, 1)²`, row-major.
pub fn make_grid(h: usize, w: usize) -> Matrix {
    let mut data = Vec::with_capacity(2 * h * w);
    for i in 0..h {
        let y = (2 * i + 1) as f64 / h as f64 - 1.0;
        for j in 0..w {
            data.push((2 * j + 1) as f64 / w as f64 - 1.0);
            data.push(y);
        }
    }
    Matrix::from_vec(h * w, 2, data).expect("grid shape")
}

/// Training pairs: every pixel centre with its intensity.
#[derive(Debug, Clone)]
pub struct ImageGrid {
    pub height: usize,
    pub width: usize,
    pub coords: Matrix,
    pub targets: Vec<f64>,
}

impl ImageGrid {
    pub fn from_image(img: &Image) -> Self {
        ImageGrid {
            height: img.height,
            width: img.width,
            coords: make_grid(img.height, img.width),
            targets: img.pixels.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

fn check_same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::usage(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// `10·log10(1/MSE)` for unit data range; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_same_dims(a, b)?;
    let mse = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.pixels.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / s).collect();
    g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect()
}

/// Mean SSIM over all window positions fully inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_same_dims(a, b)?;
    if a.height < SSIM_WINDOW || a.width < SSIM_WINDOW {
        return Err(Error::usage(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            a.height, a.width
        )));
    }
    let win = gaussian_window();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let (nh, nw) = (a.height - SSIM_WINDOW + 1, a.width - SSIM_WINDOW + 1);
    let mut total = 0.0;
    for i in 0..nh {
        for j in 0..nw {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for di in 0..SSIM_WINDOW {
                for dj in 0..SSIM_WINDOW {
                    let w = win[di * SSIM_WINDOW + dj];
                    let (x, y) = (a.get(i + di, j + dj), b.get(i + di, j + dj));
                    ma += w * x;
                    mb += w * y;
                    saa += w * x * x;
                    sbb += w * y * y;
                    sab += w * x * y;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total += s;
        }
    }
    Ok((total / (nh * nw) as f64).clamp(-1.0, 1.0))
}

/// Ellipse `(intensity, a, b, x0, y0, angle in degrees)`, modified
/// Shepp-Logan layout.
const PHANTOM_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Relative width of the soft ellipse boundary.
const PHANTOM_EDGE: f64 = 0.04;

const TEXTURE_BLOBS: usize = 160;
const TEXTURE_SEED: u64 = 0;

/// Blob `(x0, y0, sigma, amplitude)` list for the tissue texture.
fn texture_blobs() -> &'static [(f64, f64, f64, f64)] {
    static BLOBS: OnceLock<Vec<(f64, f64, f64, f64)>> = OnceLock::new();
    BLOBS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(TEXTURE_SEED);
        let (_, a, b, x0, y0, _) = PHANTOM_ELLIPSES[1];
        let mut blobs = Vec::with_capacity(TEXTURE_BLOBS);
        while blobs.len() < TEXTURE_BLOBS {
            let u: f64 = rng.random_range(-1.0..1.0);
            let w: f64 = rng.random_range(-1.0..1.0);
            if u * u + w * w > 1.0 {
                continue;
            }
            let sigma = rng.random_range(0.03..0.07);
            let amp = rng.random_range(-0.06..0.06);
            blobs.push((x0 + a * u, y0 + b * w, sigma, amp));
        }
        blobs
    })
}

fn soft_ellipse(x: f64, y: f64, e: &(f64, f64, f64, f64, f64, f64)) -> f64 {
    let &(_, a, b, x0, y0, deg) = e;
    let (s, c) = deg.to_radians().sin_cos();
    let (dx, dy) = (x - x0, y - y0);
    let u = (c * dx + s * dy) / a;
    let w = (-s * dx + c * dy) / b;
    let r = (u * u + w * w).sqrt();
    0.5 * (1.0 - ((r - 1.0) / PHANTOM_EDGE).tanh())
}

/// Phantom intensity at `(x, y)`, with `y` pointing up. Smooth Gaussian
/// blobs inside the skull add tissue-like texture to the flat ellipses.
pub fn phantom_value(x: f64, y: f64) -> f64 {
    let mut v: f64 = PHANTOM_ELLIPSES.iter().map(|e| e.0 * soft_ellipse(x, y, e)).sum();
    let mut tex = 0.0;
    for &(bx, by, sigma, amp) in texture_blobs() {
        let d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (sigma * sigma);
        if d2 < 32.0 {
            tex += amp * (-0.5 * d2).exp();
        }
    }
    v += tex * soft_ellipse(x, y, &PHANTOM_ELLIPSES[1]);
    v.clamp(0.0, 1.0)
}

/// Soft-edged head phantom rendered at `size × size` with 4×4 supersampling.
pub fn phantom(size: usize) -> Result<Image> {
    if size == 0 {
        return Err(Error::usage("phantom size must be positive"));
    }
    let ss = 4;
    let n = (size * ss) as f64;
    let mut pixels = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let mut acc = 0.0;
            for si in 0..ss {
                for sj in 0..ss {
                    let x = (2 * (j * ss + sj) + 1) as f64 / n - 1.0;
                    let y = 1.0 - (2 * (i * ss + si) + 1) as f64 / n;
                    acc += phantom_value(x, y);
                }
            }
            pixels[i * size + j] = acc / (ss * ss) as f64;
        }
    }
    Image::new(size, size, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_bytes_scale_by_255() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let img = decode_image(&bytes).unwrap();
        let expect = [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0];
        for (a, b) in img.pixels().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((img.pixels()[2] - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn pgm_header_comments_and_round_trip() {
        let mut bytes = b"P5 # note\n3 1\n# another\n255\n".to_vec();
        bytes.extend([10, 20, 30]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!((img.height(), img.width()), (1, 3));
        assert_eq!(decode_image(&img.to_pgm()).unwrap(), img);
    }

    #[test]
    fn white_rgb_is_one() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend([255, 255, 255]);
        assert_eq!(decode_image(&bytes).unwrap().pixels(), &[1.0]);
    }

    #[test]
    fn bad_magic_names_formats() {
        let err = decode_image(b"P7\n1 1\n255\n\0").unwrap_err().to_string();
        assert!(err.contains("PGM") && err.contains("PNG"), "{err}");
    }

    #[test]
    fn truncated_pgm_is_rejected() {
        let err = decode_image(b"P5\n4 4\n255\n\x01\x02").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn png_gray_and_rgb() {
        let encode = |color, data: &[u8], w, h| {
            let mut out = Vec::new();
            let mut enc = png::Encoder::new(&mut out, w, h);
            enc.set_color(color);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().unwrap();
            writer.write_image_data(data).unwrap();
            writer.finish().unwrap();
            out
        };
        let gray = decode_image(&encode(png::ColorType::Grayscale, &[0, 255, 51, 102], 2, 2)).unwrap();
        assert_eq!(gray.pixels(), &[0.0, 1.0, 0.2, 0.4]);
        let rgb = decode_image(&encode(png::ColorType::Rgb, &[255, 255, 255, 255, 0, 0], 2, 1)).unwrap();
        assert!((rgb.pixels()[0] - 1.0).abs() < 1e-12);
        assert!((rgb.pixels()[1] - 0.299).abs() < 1e-12);
    }

    #[test]
    fn downsample_examples() {
        let c = Image::constant(6, 9, 0.3).unwrap();
        let d = downsample(&c, 4, 5).unwrap();
        assert!(d.pixels().iter().all(|v| (v - 0.3).abs() < 1e-12));

        let checker = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(downsample(&checker, 1, 1).unwrap().pixels(), &[0.5]);

        let ramp: Vec<f64> = (0..16).map(|k| k as f64 / 15.0).collect();
        let ramp = Image::new(4, 4, ramp).unwrap();
        let d = downsample(&ramp, 2, 2).unwrap();
        // blocks {0,1,4,5}, {2,3,6,7}, {8,9,12,13}, {10,11,14,15}
        let expect = [2.5 / 15.0, 4.5 / 15.0, 10.5 / 15.0, 12.5 / 15.0];
        for (a, b) in d.pixels().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(downsample(&ramp, 8, 8), Err(Error::Usage(_))));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(make_grid(1, 1).data(), &[0.0, 0.0]);
        assert_eq!(make_grid(2, 2).data(), &[-0.5, -0.5, 0.5, -0.5, -0.5, 0.5, 0.5, 0.5]);
        let g = make_grid(32, 32);
        assert_eq!(g.row(0), &[-31.0 / 32.0, -31.0 / 32.0]);
    }

    #[test]
    fn psnr_examples() {
        let a = Image::constant(4, 4, 0.5).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Image::constant(4, 4, 0.6).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let c = Image::constant(4, 4, 0.0).unwrap();
        assert!((psnr(&a, &c).unwrap() - 6.020599913279624).abs() < 1e-12);
        assert!(matches!(psnr(&a, &Image::constant(4, 5, 0.0).unwrap()), Err(Error::Usage(_))));
    }

    #[test]
    fn ssim_examples() {
        let half = Image::constant(16, 16, 0.5).unwrap();
        assert!((ssim(&half, &half).unwrap() - 1.0).abs() < 1e-12);
        let bin: Vec<f64> = (0..256).map(|k| ((k / 16 + k % 16) % 3 == 0) as u8 as f64).collect();
        let a = Image::new(16, 16, bin.clone()).unwrap();
        let inv = Image::new(16, 16, bin.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&a, &inv).unwrap() < 0.0);
        assert!(matches!(ssim(&Image::constant(8, 8, 0.0).unwrap(), &Image::constant(8, 8, 0.0).unwrap()), Err(Error::Usage(_))));
    }

    #[test]
    fn phantom_is_valid_and_structured() {
        let p = phantom(64).unwrap();
        assert!(p.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        // skull rim is bright, the corners are empty
        assert!(p.get(0, 0) < 1e-12);
        assert!((p.get(32, 32) - 0.2).abs() < 0.05);
        let max = p.pixels().iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.5);
    }
}
