//! Grayscale images as discrete measures and back.
//!
//! Pixel intensities become atom weights on the unit square [0,1]², with
//! coordinates normalized independently of resolution and the y-axis pointing
//! up (row 0 is the top of the image and maps to the highest y). The
//! normalization makes SW₂ values between image measures comparable across
//! resolutions. I/O covers 8-bit grayscale PNG and ASCII PGM (P2); color
//! input is rejected.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Row-major nonnegative intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::MalformedInput {
                format: "image",
                detail: format!(
                    "{}x{} image needs {} pixels, got {}",
                    width,
                    height,
                    width * height,
                    pixels.len()
                ),
            });
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::MalformedInput {
                format: "image",
                detail: "intensities must be finite and nonnegative".into(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(width, height, pixels.iter().map(|&p| f64::from(p)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn total_intensity(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Rescales to a max of 255 and rounds to 8-bit values.
    pub fn to_u8_scaled(&self) -> Vec<u8> {
        let max = self.pixels.iter().cloned().fold(0.0f64, f64::max);
        if max <= 0.0 {
            return vec![0; self.pixels.len()];
        }
        self.pixels
            .iter()
            .map(|&p| (p / max * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Reads a PNG or PGM file, dispatching on the extension.
    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => {
                parse_pgm(&std::fs::read_to_string(path)?)
            }
            _ => read_png(path),
        }
    }

    /// Writes a PNG or PGM file (scaled to 8 bits), dispatching on the
    /// extension.
    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => {
                Ok(std::fs::write(path, format_pgm(self))?)
            }
            _ => write_png(path, self),
        }
    }
}

fn read_png(path: &Path) -> Result<GrayImage> {
    let dynimg = image::open(path)?;
    match dynimg {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            GrayImage::from_u8(w, h, img.as_raw())
        }
        other => Err(Error::NotGrayscale(format!("{:?}", other.color()))),
    }
}

fn write_png(path: &Path, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_raw(
        img.width as u32,
        img.height as u32,
        img.to_u8_scaled(),
    )
    .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Parses an ASCII PGM (P2) file; `#` comments are allowed anywhere.
pub fn parse_pgm(text: &str) -> Result<GrayImage> {
    let malformed = |detail: String| Error::MalformedInput {
        format: "pgm",
        detail,
    };
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>());
    let magic = tokens.next().ok_or_else(|| malformed("empty file".into()))?;
    if magic != "P2" {
        return Err(malformed(format!("expected magic P2, got {magic}")));
    }
    let mut next_usize = |name: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(format!("missing or invalid {name}")))
    };
    let width = next_usize("width")?;
    let height = next_usize("height")?;
    let maxval = next_usize("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(format!("invalid maxval {maxval}")));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        pixels.push(next_usize("pixel value")? as f64);
    }
    if pixels.iter().any(|&p| p > maxval as f64) {
        return Err(malformed("pixel value exceeds maxval".into()));
    }
    GrayImage::new(width, height, pixels)
}

pub fn format_pgm(img: &GrayImage) -> String {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for (i, v) in img.to_u8_scaled().iter().enumerate() {
        out.push_str(&v.to_string());
        out.push(if (i + 1) % img.width == 0 { '\n' } else { ' ' });
    }
    out
}

/// How an image becomes a measure.
#[derive(Debug, Clone)]
pub enum ConversionMode {
    /// one atom per positive pixel, centered in its cell, weight proportional
    /// to intensity
    WeightedGrid,
    /// `count` uniform-weight atoms drawn with probability proportional to
    /// intensity, jittered uniformly inside their pixel
    Sampled { count: usize, seed: u64 },
}

/// Converts to a 2D measure supported on [0,1]². Pixel (row, col) occupies
/// x ∈ [col/W, (col+1)/W) and y ∈ [(H−1−row)/H, (H−row)/H).
pub fn image_to_measure(img: &GrayImage, mode: &ConversionMode) -> Result<DiscreteMeasure> {
    let total = img.total_intensity();
    if total <= 0.0 {
        return Err(Error::ZeroImage);
    }
    let (w, h) = (img.width as f64, img.height as f64);
    match mode {
        ConversionMode::WeightedGrid => {
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            for row in 0..img.height {
                for col in 0..img.width {
                    let p = img.pixel(row, col);
                    if p > 0.0 {
                        coords.push((col as f64 + 0.5) / w);
                        coords.push(((img.height - 1 - row) as f64 + 0.5) / h);
                        weights.push(p / total);
                    }
                }
            }
            Ok(DiscreteMeasure::from_normalized_parts(
                2,
                coords,
                weights,
            ))
        }
        ConversionMode::Sampled { count, seed } => {
            if *count == 0 {
                return Err(Error::MissingSampleCount);
            }
            // cumulative intensity over pixels, inverted per draw
            let mut cum = Vec::with_capacity(img.pixels.len());
            let mut acc = 0.0;
            for &p in &img.pixels {
                acc += p;
                cum.push(acc);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut coords = Vec::with_capacity(count * 2);
            for _ in 0..*count {
                let u = rng.gen::<f64>() * total;
                let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                let (row, col) = (idx / img.width, idx % img.width);
                coords.push((col as f64 + rng.gen::<f64>()) / w);
                coords.push(((img.height - 1 - row) as f64 + rng.gen::<f64>()) / h);
            }
            Ok(DiscreteMeasure::from_normalized_parts(
                2,
                coords,
                vec![1.0 / *count as f64; *count],
            ))
        }
    }
}

/// How a measure becomes an image.
#[derive(Debug, Clone)]
pub enum RenderStyle {
    /// bin atom weights into pixels
    Histogram,
    /// deposit each atom's weight through an isotropic Gaussian kernel with
    /// the given bandwidth in pixel units
    GaussianSplat { bandwidth: f64 },
}

/// A rendered image plus how many atoms fell outside [0,1]² and were
/// clipped to the boundary bins.
#[derive(Debug, Clone)]
pub struct RenderReport {
    pub image: GrayImage,
    pub clipped_atoms: usize,
    pub clipped_mass: f64,
}

/// Renders a 2D measure to a width×height intensity grid. Rendered mass
/// equals 1 before intensity scaling; callers get raw (unscaled) intensities
/// in `image` and can export via [`GrayImage::write`], which scales to 8 bits.
pub fn measure_to_image(
    m: &DiscreteMeasure,
    width: usize,
    height: usize,
    style: &RenderStyle,
) -> Result<RenderReport> {
    if m.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: m.dim(),
        });
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedInput {
            format: "image",
            detail: "render target must be non-empty".into(),
        });
    }
    let mut pixels = vec![0.0f64; width * height];
    let mut clipped_atoms = 0;
    let mut clipped_mass = 0.0;
    let bin = |x: f64, cells: usize| -> (usize, bool) {
        let raw = (x * cells as f64).floor();
        let clipped = raw < 0.0 || raw >= cells as f64;
        (raw.clamp(0.0, cells as f64 - 1.0) as usize, clipped)
    };
    match style {
        RenderStyle::Histogram => {
            for (p, &wgt) in m.points().zip(m.weights()) {
                let (col, cx) = bin(p[0], width);
                let (row_up, cy) = bin(p[1], height);
                let row = height - 1 - row_up;
                if cx || cy {
                    clipped_atoms += 1;
                    clipped_mass += wgt;
                }
                pixels[row * width + col] += wgt;
            }
        }
        RenderStyle::GaussianSplat { bandwidth } => {
            let bw = bandwidth.max(1e-6);
            let radius = (3.0 * bw).ceil() as isize;
            for (p, &wgt) in m.points().zip(m.weights()) {
                // atom position in pixel units, y flipped to row coordinates
                let px = p[0] * width as f64;
                let py = (1.0 - p[1]) * height as f64;
                let (col, cx) = bin(p[0], width);
                let (row_up, cy) = bin(p[1], height);
                let row = height - 1 - row_up;
                if cx || cy {
                    clipped_atoms += 1;
                    clipped_mass += wgt;
                }
                let mut kernel = Vec::new();
                let mut ksum = 0.0;
                for dr in -radius..=radius {
                    for dc in -radius..=radius {
                        let r = row as isize + dr;
                        let c = col as isize + dc;
                        if r < 0 || c < 0 || r >= height as isize || c >= width as isize {
                            continue;
                        }
                        let dx = c as f64 + 0.5 - px;
                        let dy = r as f64 + 0.5 - py;
                        let k = (-(dx * dx + dy * dy) / (2.0 * bw * bw)).exp();
                        kernel.push((r as usize * width + c as usize, k));
                        ksum += k;
                    }
                }
                // per-atom normalization keeps total mass at exactly the
                // atom's weight even near the boundary
                for (idx, k) in kernel {
                    pixels[idx] += wgt * k / ksum;
                }
            }
        }
    }
    Ok(RenderReport {
        image: GrayImage::new(width, height, pixels)?,
        clipped_atoms,
        clipped_mass,
    })
}
