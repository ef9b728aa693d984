//! Generators for the simulated experiments.

use rayon::prelude::*;

use super::{normalize_unit, split, LabeledDataset, Mode, Provenance, Sample, Task, DEFAULT_FRACTIONS};
use crate::backprojection::{backproject, DEFAULT_TOLERANCE};
use crate::error::{invalid, Error, Result};
use crate::forward::{default_time_axis, simulate, smooth, FastTimeAxis, FlightTrack};
use crate::rng::{derive_seed, seeded, SimRng};
use crate::scene::{render, sample_center, RoiGrid, ShapeKind, ShapeSpec};

/// Both center coordinates of the shape and radius experiments are drawn from this range.
pub const SHAPE_CENTER_RANGE: (f64, f64) = (3.0, 6.0);
pub const MULTI_HEIGHT: f64 = 5.0;
const MULTI_FIRST_RANGE: (f64, f64) = (0.0, 5.0);
const MULTI_SECOND_RANGE: (f64, f64) = (-4.0, -1.0);
/// Largest radius for which the two bumps of a class-2 scene are kept apart.
const MULTI_SEPARATE_UP_TO: f64 = 2.0;
pub const RADIUS_CLASSES: [f64; 4] = [1.0, 2.0, 5.0, 10.0];
pub const RADIUS_HEIGHT: f64 = 0.0;
pub const COUNT_RADIUS: f64 = 2.0;
pub const COUNT_HEIGHT: f64 = 0.0;
const MAX_REJECTIONS: usize = 1000;

/// Simulation settings shared by all generators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: RoiGrid,
    pub track_radius: f64,
    pub n_positions: usize,
    pub c0: f64,
    pub n_t: usize,
    /// Use the fixed fast-time interval `[5, 23]` instead of the one derived
    /// from the scene geometry.
    pub paper_times: bool,
    pub tolerance: f64,
    /// Min-max normalize raw inputs per sample.
    pub normalize_raw: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: RoiGrid::default(),
            track_radius: 20.0,
            n_positions: 100,
            c0: 1.0,
            n_t: 100,
            paper_times: false,
            tolerance: DEFAULT_TOLERANCE,
            normalize_raw: true,
        }
    }
}

impl SimConfig {
    pub fn track(&self, height: f64) -> Result<FlightTrack> {
        FlightTrack::new(self.track_radius, height, self.n_positions, self.c0)
    }

    pub fn time_axis(&self, track: &FlightTrack) -> Result<FastTimeAxis> {
        if self.paper_times {
            FastTimeAxis::new(5.0, 23.0, self.n_t)
        } else {
            default_time_axis(track, &self.grid, self.n_t)
        }
    }

    /// Side of the square network input produced in `mode`.
    pub fn input_size(&self, mode: Mode) -> Result<usize> {
        match mode {
            Mode::Backprojected => Ok(self.grid.n()),
            Mode::Raw if self.n_t == self.n_positions => Ok(self.n_t),
            Mode::Raw => Err(invalid(format!(
                "raw inputs must be square, got {} fast-time samples and {} positions",
                self.n_t, self.n_positions
            ))),
        }
    }

    pub fn simulator(&self, height: f64) -> Result<Simulator<'_>> {
        let track = self.track(height)?;
        let axis = self.time_axis(&track)?;
        Ok(Simulator { cfg: self, track, axis })
    }
}

/// A [`SimConfig`] bound to one flight height.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    cfg: &'a SimConfig,
    track: FlightTrack,
    axis: FastTimeAxis,
}

impl Simulator<'_> {
    pub fn track(&self) -> &FlightTrack {
        &self.track
    }

    pub fn axis(&self) -> &FastTimeAxis {
        &self.axis
    }

    /// Renders, simulates and smooths the scene; backprojects in image mode.
    pub fn input(&self, shapes: &[ShapeSpec], mode: Mode) -> Result<Vec<f32>> {
        Ok(self.inputs(shapes, &[mode])?.pop().unwrap())
    }

    /// One input per entry of `modes`, all from a single simulation.
    pub fn inputs(&self, shapes: &[ShapeSpec], modes: &[Mode]) -> Result<Vec<Vec<f32>>> {
        let map = render(&self.cfg.grid, shapes)?;
        let data = smooth(&simulate(&map, &self.track, &self.axis)?)?;
        modes
            .iter()
            .map(|&mode| match mode {
                Mode::Raw => {
                    self.cfg.input_size(mode)?;
                    let mut v: Vec<f32> = data.values().as_slice().iter().map(|&x| x as f32).collect();
                    if self.cfg.normalize_raw {
                        normalize_unit(&mut v);
                    }
                    Ok(v)
                }
                Mode::Backprojected => {
                    let img = backproject(&data, &self.cfg.grid, self.cfg.tolerance)?;
                    Ok(img.values().as_slice().iter().map(|&x| x as f32).collect())
                }
            })
            .collect()
    }
}

/// Rebuilds a simulated sample's input from its provenance.
pub fn regenerate(prov: &Provenance, cfg: &SimConfig) -> Result<Vec<f32>> {
    let (Some(h), Some(mode)) = (prov.height, prov.mode) else {
        return Err(invalid("provenance lacks height or mode"));
    };
    cfg.simulator(h)?.input(&prov.shapes, mode)
}

/// Table of shapes: circle 1, square 2, ellipse 3, rhombus 4.
pub fn shape_for_label(label: u8, center: (f64, f64)) -> Result<ShapeSpec> {
    let kind = match label {
        1 => ShapeKind::Circle { radius: 2.0 },
        2 => ShapeKind::Square { side: 5.5 },
        3 => ShapeKind::Ellipse { a: 1.5, b: 3.0 },
        4 => ShapeKind::Rhombus { half_diagonal: 3.0 },
        _ => return Err(invalid(format!("shape label must be 1..=4, got {label}"))),
    };
    Ok(ShapeSpec::new(kind, center))
}

/// Draws scenes for every `(label, index)` in parallel and simulates them,
/// producing one dataset per mode. Each sample's randomness comes only from
/// its own derived seed.
#[allow(clippy::too_many_arguments)]
fn generate(
    task: Task,
    classes: usize,
    n_per_class: usize,
    height: f64,
    modes: &[Mode],
    seed: u64,
    cfg: &SimConfig,
    scene: impl Fn(u8, &mut SimRng) -> Result<Vec<ShapeSpec>> + Sync,
) -> Result<Vec<LabeledDataset>> {
    if n_per_class == 0 {
        return Err(invalid("need at least one sample per class"));
    }
    if !(height >= 0.0 && height.is_finite()) {
        return Err(invalid(format!("height must be non-negative, got {height}")));
    }
    let sizes = modes.iter().map(|&m| cfg.input_size(m)).collect::<Result<Vec<_>>>()?;
    let sim = cfg.simulator(height)?;
    let per_sample = (0..classes * n_per_class)
        .into_par_iter()
        .map(|g| {
            let label = (g / n_per_class + 1) as u8;
            let sample_seed = derive_seed(derive_seed(seed, label as u64), (g % n_per_class) as u64);
            let shapes = scene(label, &mut seeded(sample_seed))?;
            let inputs = sim.inputs(&shapes, modes)?;
            Ok((label, sample_seed, shapes, inputs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns: Vec<Vec<Sample>> = modes.iter().map(|_| Vec::with_capacity(per_sample.len())).collect();
    for (label, sample_seed, shapes, inputs) in per_sample {
        for ((col, input), &mode) in columns.iter_mut().zip(inputs).zip(modes) {
            col.push(Sample {
                input,
                label,
                provenance: Some(Provenance {
                    task,
                    seed: sample_seed,
                    height: Some(height),
                    mode: Some(mode),
                    shapes: shapes.clone(),
                    source: None,
                }),
            });
        }
    }
    columns
        .into_iter()
        .zip(sizes)
        .map(|(samples, size)| {
            split(
                LabeledDataset::new(task, classes, size, samples)?,
                DEFAULT_FRACTIONS,
                seed,
            )
        })
        .collect()
}

fn single(mut v: Vec<LabeledDataset>) -> Result<LabeledDataset> {
    Ok(v.pop().expect("one mode requested"))
}

/// Four shape classes with centers in [`SHAPE_CENTER_RANGE`]. Datasets with
/// the same seed hold the same scenes in both modes.
pub fn gen_shape_dataset(
    n_per_class: usize,
    height: f64,
    mode: Mode,
    seed: u64,
    cfg: &SimConfig,
) -> Result<LabeledDataset> {
    single(gen_shape_datasets(n_per_class, height, &[mode], seed, cfg)?)
}

/// [`gen_shape_dataset`] for several modes at once, simulating each scene once.
pub fn gen_shape_datasets(
    n_per_class: usize,
    height: f64,
    modes: &[Mode],
    seed: u64,
    cfg: &SimConfig,
) -> Result<Vec<LabeledDataset>> {
    let (lo, hi) = SHAPE_CENTER_RANGE;
    generate(Task::Shape, 4, n_per_class, height, modes, seed, cfg, |label, rng| {
        Ok(vec![shape_for_label(label, sample_center(lo, hi, rng)?)?])
    })
}

/// Class 1: one circular bump of radius `r`; class 2: two. Raw data at
/// [`MULTI_HEIGHT`].
pub fn gen_multiscatterer_dataset(r: f64, n_per_class: usize, seed: u64, cfg: &SimConfig) -> Result<LabeledDataset> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("bump radius must be positive, got {r}")));
    }
    single(generate(
        Task::Multi,
        2,
        n_per_class,
        MULTI_HEIGHT,
        &[Mode::Raw],
        seed,
        cfg,
        |label, rng| {
            let first = sample_center(MULTI_FIRST_RANGE.0, MULTI_FIRST_RANGE.1, rng)?;
            let mut shapes = vec![ShapeSpec::circle(r, first)];
            if label == 2 {
                let second = if r <= MULTI_SEPARATE_UP_TO {
                    draw_apart(rng, MULTI_SECOND_RANGE, &[first], 2.0 * r)?
                } else {
                    sample_center(MULTI_SECOND_RANGE.0, MULTI_SECOND_RANGE.1, rng)?
                };
                shapes.push(ShapeSpec::circle(r, second));
            }
            Ok(shapes)
        },
    )?)
}

/// Four classes of single circular bumps with radii [`RADIUS_CLASSES`], at
/// height [`RADIUS_HEIGHT`].
pub fn gen_radius_dataset(n_per_class: usize, seed: u64, cfg: &SimConfig) -> Result<LabeledDataset> {
    let (lo, hi) = SHAPE_CENTER_RANGE;
    single(generate(
        Task::Radius,
        4,
        n_per_class,
        RADIUS_HEIGHT,
        &[Mode::Raw],
        seed,
        cfg,
        |label, rng| {
            let r = RADIUS_CLASSES[label as usize - 1];
            Ok(vec![ShapeSpec::circle(r, sample_center(lo, hi, rng)?)])
        },
    )?)
}

/// Scenes with 1, 2 or 3 disjoint bumps of radius [`COUNT_RADIUS`] placed
/// anywhere inside the region of interest.
pub fn gen_count_dataset(n_total: usize, seed: u64, cfg: &SimConfig) -> Result<LabeledDataset> {
    if n_total == 0 || !n_total.is_multiple_of(3) {
        return Err(invalid(format!(
            "count dataset size must be a positive multiple of 3, got {n_total}"
        )));
    }
    let r = COUNT_RADIUS;
    let range = (cfg.grid.z_min() + r, cfg.grid.z_max() - r);
    single(generate(
        Task::Count,
        3,
        n_total / 3,
        COUNT_HEIGHT,
        &[Mode::Raw],
        seed,
        cfg,
        |label, rng| {
            let mut centers = Vec::with_capacity(label as usize);
            for _ in 0..label {
                let c = draw_apart(rng, range, &centers, 2.0 * r)?;
                centers.push(c);
            }
            Ok(centers.into_iter().map(|c| ShapeSpec::circle(r, c)).collect())
        },
    )?)
}

/// Rejection-samples a center in `range²` farther than `min_dist` from all of `others`.
fn draw_apart(rng: &mut SimRng, range: (f64, f64), others: &[(f64, f64)], min_dist: f64) -> Result<(f64, f64)> {
    for _ in 0..MAX_REJECTIONS {
        let c = sample_center(range.0, range.1, rng)?;
        if others
            .iter()
            .all(|o| ((c.0 - o.0).powi(2) + (c.1 - o.1).powi(2)).sqrt() > min_dist)
        {
            return Ok(c);
        }
    }
    Err(Error::Generation(format!(
        "could not place a center {min_dist} away from {} others after {MAX_REJECTIONS} tries",
        others.len()
    )))
}
