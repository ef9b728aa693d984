//! Grayscale image folders (ice types) and a procedural texture stand-in.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{load_dataset, split, LabeledDataset, Provenance, Sample, Task, DEFAULT_FRACTIONS};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, seeded};

pub const ICE_CLASSES: usize = 8;
pub const ICE_IMAGE_SIZE: usize = 256;

/// Grayscale image with pixel values scaled to `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

fn image_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads a binary (`P5`) portable graymap with 8- or 16-bit samples.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|reason| image_err(path, reason))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Whitespace and '#' comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("expected a number in header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "header number out of range".to_string())?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after header".into());
    }
    pos += 1;
    let n = width * height;
    let bps = if maxval < 256 { 1 } else { 2 };
    let data = &bytes[pos..];
    if data.len() < n * bps {
        return Err(format!("pixel data has {} bytes, expected {}", data.len(), n * bps));
    }
    let scale = maxval as f32;
    let pixels = if bps == 1 {
        data[..n].iter().map(|&v| v.min(maxval as u8) as f32 / scale).collect()
    } else {
        data[..2 * n]
            .chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as usize).min(maxval) as f32 / scale)
            .collect()
    };
    Ok(GrayImage { width, height, pixels })
}

/// Writes `img` as a binary PGM, quantizing to `maxval` levels.
pub fn write_pgm(path: &Path, img: &GrayImage, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return Err(invalid("maxval must be positive"));
    }
    if img.pixels.len() != img.width * img.height {
        return Err(Error::ShapeMismatch("pixel count does not match dimensions".into()));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &p in &img.pixels {
        let q = (p.clamp(0.0, 1.0) * maxval as f32).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

fn class_dir(root: &Path, label: usize) -> Result<PathBuf> {
    let dir = root.join(label.to_string());
    if !dir.is_dir() {
        return Err(Error::Dataset(format!("missing class directory {}", dir.display())));
    }
    Ok(dir)
}

/// Image files of one class directory (`.pgm` or `.sard`), sorted by name.
fn class_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm") | Some("sard")) && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_images(path: &Path, size: usize) -> Result<Vec<Vec<f32>>> {
    let is_sard = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("sard"));
    if is_sard {
        let d = load_dataset(path)?;
        if d.input_size() != size {
            return Err(image_err(
                path,
                format!("holds {0}x{0} images, expected {size}x{size}", d.input_size()),
            ));
        }
        return Ok(d.samples().iter().map(|s| s.input.clone()).collect());
    }
    let img = read_pgm(path)?;
    if img.width != size || img.height != size {
        return Err(image_err(
            path,
            format!("is {}x{}, expected {size}x{size}", img.width, img.height),
        ));
    }
    Ok(vec![img.pixels])
}

/// Number of image files in each class directory `root/1 … root/8`.
pub fn ice_class_counts(root: &Path) -> Result<Vec<usize>> {
    (1..=ICE_CLASSES)
        .map(|k| Ok(class_files(&class_dir(root, k)?)?.len()))
        .collect()
}

/// Loads `n_per_class` randomly chosen images from each of the eight class
/// directories under `root`.
pub fn load_ice_dataset(root: &Path, n_per_class: usize, seed: u64) -> Result<LabeledDataset> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!(
            "ice dataset not found at {}; obtain the Sentinel-1 sea-ice imagery separately and \
             arrange it as one directory per class named 1..8 holding 256x256 PGM images",
            root.display()
        )));
    }
    load_image_dataset(root, ICE_CLASSES, n_per_class, ICE_IMAGE_SIZE, seed, Task::Ice)
}

/// Generic form of [`load_ice_dataset`]. `.sard` files contribute every image they contain.
pub fn load_image_dataset(
    root: &Path,
    classes: usize,
    n_per_class: usize,
    size: usize,
    seed: u64,
    task: Task,
) -> Result<LabeledDataset> {
    if n_per_class == 0 {
        return Err(invalid("need at least one image per class"));
    }
    if classes == 0 || classes > 255 {
        return Err(invalid(format!("class count must be in 1..=255, got {classes}")));
    }
    let mut samples = Vec::with_capacity(classes * n_per_class);
    for k in 1..=classes {
        let dir = class_dir(root, k)?;
        let files = class_files(&dir)?;
        let per_file = files
            .par_iter()
            .map(|f| read_images(f, size).map(|imgs| (f, imgs)))
            .collect::<Result<Vec<_>>>()?;
        let mut pool: Vec<(String, Vec<f32>)> = per_file
            .into_iter()
            .flat_map(|(f, imgs)| {
                let many = imgs.len() > 1;
                imgs.into_iter().enumerate().map(move |(i, img)| {
                    let name = if many {
                        format!("{}#{i}", f.display())
                    } else {
                        f.display().to_string()
                    };
                    (name, img)
                })
            })
            .collect();
        if pool.len() < n_per_class {
            return Err(Error::Dataset(format!(
                "class {k} ({}) has {} images, {n_per_class} requested",
                dir.display(),
                pool.len()
            )));
        }
        let mut rng = seeded(derive_seed(seed, k as u64));
        pool.shuffle(&mut rng);
        pool.truncate(n_per_class);
        pool.sort_by(|a, b| a.0.cmp(&b.0));
        for (name, input) in pool {
            samples.push(Sample {
                input,
                label: k as u8,
                provenance: Some(Provenance {
                    task,
                    seed,
                    height: None,
                    mode: None,
                    shapes: Vec::new(),
                    source: Some(name),
                }),
            });
        }
    }
    let d = LabeledDataset::new(task, classes, size, samples)?;
    split(d, DEFAULT_FRACTIONS, seed)
}

const TEXTURE_NAMES: [&str; ICE_CLASSES] = [
    "flat",
    "horizontal-stripes",
    "vertical-stripes",
    "checkerboard",
    "diagonal-stripes",
    "wide-stripes",
    "speckle",
    "sparse-dots",
];

/// Eight procedurally distinct texture classes with random phase and additive
/// noise, used in place of the ice imagery when it is not available.
pub fn synthetic_textures(n_per_class: usize, size: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_class == 0 || size == 0 {
        return Err(invalid("need at least one texture per class and a positive size"));
    }
    let samples: Vec<Sample> = (0..ICE_CLASSES * n_per_class)
        .into_par_iter()
        .map(|g| {
            let label = g / n_per_class + 1;
            let s = derive_seed(derive_seed(seed, label as u64), (g % n_per_class) as u64);
            Sample {
                input: texture(label, size, s),
                label: label as u8,
                provenance: Some(Provenance {
                    task: Task::Ice,
                    seed: s,
                    height: None,
                    mode: None,
                    shapes: Vec::new(),
                    source: Some(format!("synthetic:{}", TEXTURE_NAMES[label - 1])),
                }),
            }
        })
        .collect();
    let d = LabeledDataset::new(Task::Ice, ICE_CLASSES, size, samples)?;
    split(d, DEFAULT_FRACTIONS, seed)
}

fn texture(label: usize, size: usize, seed: u64) -> Vec<f32> {
    use std::f64::consts::TAU;
    let mut rng = seeded(seed);
    let phase = rng.gen_range(0.0..TAU);
    let shift = rng.gen_range(0..16usize);
    let stripe = |v: f64, period: f64| 0.5 + 0.4 * (TAU * v / period + phase).sin();
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (y, x) = (i as f64, j as f64);
            let base = match label {
                1 => 0.5,
                2 => stripe(y, 8.0),
                3 => stripe(x, 8.0),
                4 => {
                    if ((i + shift) / 8 + (j + shift) / 8) % 2 == 0 {
                        0.85
                    } else {
                        0.15
                    }
                }
                5 => stripe(x + y, 8.0 * std::f64::consts::SQRT_2),
                6 => stripe(y, 32.0),
                7 => rng.gen_range(0.0..1.0),
                _ => {
                    if rng.gen_bool(0.02) {
                        1.0
                    } else {
                        0.1
                    }
                }
            };
            let noisy: f64 = base + rng.gen_range(-0.05..0.05);
            out.push(noisy.clamp(0.0, 1.0) as f32);
        }
    }
    out
}
