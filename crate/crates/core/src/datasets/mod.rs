//! Labeled datasets: the simulated experiments, image folders, stratified
//! splitting and the SARD container.

mod images;
mod sard;
mod simulated;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scene::ShapeSpec;

pub use images::{
    ice_class_counts, load_ice_dataset, load_image_dataset, read_pgm, synthetic_textures, write_pgm, GrayImage,
    ICE_CLASSES, ICE_IMAGE_SIZE,
};
pub use sard::{
    load_checkpoint, load_dataset, read_checkpoint, read_dataset, save_checkpoint, save_dataset, write_checkpoint,
    write_dataset, SARD_MAGIC, SARD_VERSION,
};
pub use simulated::{
    gen_count_dataset, gen_multiscatterer_dataset, gen_radius_dataset, gen_shape_dataset, gen_shape_datasets,
    regenerate, shape_for_label, SimConfig, Simulator, COUNT_HEIGHT, COUNT_RADIUS, MULTI_HEIGHT, RADIUS_CLASSES,
    RADIUS_HEIGHT, SHAPE_CENTER_RANGE,
};

/// Train / validation / test fractions used by every experiment.
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Seed stream reserved for splitting.
const SPLIT_STREAM: u64 = 0x5917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Shape,
    Multi,
    Radius,
    Count,
    Ice,
    Custom,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Shape,
        Task::Multi,
        Task::Radius,
        Task::Count,
        Task::Ice,
        Task::Custom,
    ];

    /// Identifier stored in SARD headers.
    pub fn id(self) -> u8 {
        match self {
            Task::Shape => 1,
            Task::Multi => 2,
            Task::Radius => 3,
            Task::Count => 4,
            Task::Ice => 5,
            Task::Custom => 6,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.id() == id)
            .ok_or_else(|| Error::Format(format!("unknown task id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Shape => "shape",
            Task::Multi => "multi",
            Task::Radius => "radius",
            Task::Count => "count",
            Task::Ice => "ice",
            Task::Custom => "custom",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| invalid(format!("unknown task {s:?}")))
    }
}

/// Whether a sample holds smoothed raw data or its backprojected image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Raw,
    Backprojected,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Raw => "raw",
            Mode::Backprojected => "backprojected",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Mode::Raw),
            "backprojected" | "image" => Ok(Mode::Backprojected),
            _ => Err(invalid(format!("unknown mode {s:?} (expected raw or backprojected)"))),
        }
    }
}

/// Where a sample came from. For simulated samples the shapes, height and
/// mode are enough to rebuild the input exactly (see [`regenerate`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub task: Task,
    pub seed: u64,
    pub height: Option<f64>,
    pub mode: Option<Mode>,
    pub shapes: Vec<ShapeSpec>,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Row-major `P × P` input.
    pub input: Vec<f32>,
    /// Class label, `1..=O`.
    pub label: u8,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    task: Task,
    class_count: usize,
    input_size: usize,
    samples: Vec<Sample>,
    splits: Splits,
}

impl LabeledDataset {
    /// Builds a dataset with every sample in the training split.
    pub fn new(task: Task, class_count: usize, input_size: usize, samples: Vec<Sample>) -> Result<Self> {
        let train = (0..samples.len()).collect();
        Self::with_splits(
            task,
            class_count,
            input_size,
            samples,
            Splits {
                train,
                ..Splits::default()
            },
        )
    }

    pub fn with_splits(
        task: Task,
        class_count: usize,
        input_size: usize,
        samples: Vec<Sample>,
        splits: Splits,
    ) -> Result<Self> {
        if !(1..=255).contains(&class_count) {
            return Err(invalid(format!("class count must be in 1..=255, got {class_count}")));
        }
        if input_size == 0 {
            return Err(invalid("input size must be positive"));
        }
        let n_px = input_size * input_size;
        for (i, s) in samples.iter().enumerate() {
            if s.label == 0 || s.label as usize > class_count {
                return Err(Error::Dataset(format!(
                    "sample {i} has label {} outside 1..={class_count}",
                    s.label
                )));
            }
            if s.input.len() != n_px {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has {} values, expected {n_px}",
                    s.input.len()
                )));
            }
            if s.input.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("sample {i} has non-finite input")));
            }
        }
        let mut seen = vec![false; samples.len()];
        for &i in splits.train.iter().chain(&splits.validation).chain(&splits.test) {
            match seen.get_mut(i) {
                None => return Err(Error::Dataset(format!("split index {i} out of range"))),
                Some(true) => return Err(Error::Dataset(format!("sample {i} appears in two splits"))),
                Some(s) => *s = true,
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Dataset("splits do not cover every sample".into()));
        }
        Ok(Self {
            task,
            class_count,
            input_size,
            samples,
            splits,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    /// Samples per class, index 0 = label 1.
    pub fn class_counts(&self) -> Vec<usize> {
        self.counts_of(0..self.samples.len())
    }

    pub fn class_counts_in(&self, indices: &[usize]) -> Vec<usize> {
        self.counts_of(indices.iter().copied())
    }

    fn counts_of(&self, it: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut c = vec![0; self.class_count];
        for i in it {
            c[self.samples[i].label as usize - 1] += 1;
        }
        c
    }

    /// Reassigns the splits; see [`split`].
    pub fn split(self, fractions: (f64, f64, f64), seed: u64) -> Result<Self> {
        split(self, fractions, seed)
    }
}

/// Stratified split: each class is shuffled and cut at
/// `round(n·f_train)` and `round(n·(f_train + f_val))`. Index lists are sorted.
pub fn split(dataset: LabeledDataset, fractions: (f64, f64, f64), seed: u64) -> Result<LabeledDataset> {
    let (a, b, c) = fractions;
    for f in [a, b, c] {
        if !(0.0..=1.0).contains(&f) {
            return Err(invalid(format!(
                "split fractions must lie in [0, 1], got {fractions:?}"
            )));
        }
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("split fractions must sum to 1, got {fractions:?}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label as usize - 1].push(i);
    }
    let mut splits = Splits::default();
    for (k, mut members) in by_class.into_iter().enumerate() {
        let mut rng = seeded(derive_seed(derive_seed(seed, SPLIT_STREAM), k as u64));
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let b1 = ((n * a).round() as usize).min(members.len());
        let b2 = ((n * (a + b)).round() as usize).clamp(b1, members.len());
        splits.train.extend_from_slice(&members[..b1]);
        splits.validation.extend_from_slice(&members[b1..b2]);
        splits.test.extend_from_slice(&members[b2..]);
    }
    splits.train.sort_unstable();
    splits.validation.sort_unstable();
    splits.test.sort_unstable();
    LabeledDataset::with_splits(
        dataset.task,
        dataset.class_count,
        dataset.input_size,
        dataset.samples,
        splits,
    )
}

/// Min-max normalizes `values` into `[0, 1]`; a constant input becomes zeros.
pub fn normalize_unit(values: &mut [f32]) {
    let (lo, hi) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = hi - lo;
    if !(span > 0.0) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v - lo) / span);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n_per_class: usize, classes: usize) -> LabeledDataset {
        let samples = (0..classes)
            .flat_map(|k| {
                (0..n_per_class).map(move |i| Sample {
                    input: vec![i as f32],
                    label: k as u8 + 1,
                    provenance: None,
                })
            })
            .collect();
        LabeledDataset::new(Task::Custom, classes, 1, samples).unwrap()
    }

    #[test]
    fn full_size_split() {
        let d = toy(1000, 4).split(DEFAULT_FRACTIONS, 1).unwrap();
        assert_eq!(d.splits().sizes(), (3200, 400, 400));
        assert_eq!(d.class_counts_in(&d.splits().train), vec![800; 4]);
    }

    #[test]
    fn all_train_split() {
        let d = toy(7, 3).split((1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(d.splits().sizes(), (21, 0, 0));
    }

    #[test]
    fn bad_fractions_rejected() {
        assert!(toy(5, 2).split((0.5, 0.5, 0.5), 1).is_err());
        assert!(toy(5, 2).split((1.2, -0.1, -0.1), 1).is_err());
    }

    #[test]
    fn overlapping_splits_rejected() {
        let d = toy(2, 2);
        let samples = d.samples().to_vec();
        let splits = Splits {
            train: vec![0, 1, 2],
            validation: vec![2, 3],
            test: vec![],
        };
        assert!(LabeledDataset::with_splits(Task::Custom, 2, 1, samples, splits).is_err());
    }

    #[test]
    fn task_and_mode_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
            assert_eq!(Task::from_id(t.id()).unwrap(), t);
        }
        assert_eq!("backprojected".parse::<Mode>().unwrap(), Mode::Backprojected);
        assert!("sideways".parse::<Mode>().is_err());
    }

    #[test]
    fn normalize_handles_constant_input() {
        let mut v = vec![3.0f32; 4];
        normalize_unit(&mut v);
        assert_eq!(v, vec![0.0; 4]);
        let mut w = vec![1.0f32, 3.0, 2.0];
        normalize_unit(&mut w);
        assert_eq!(w, vec![0.0, 1.0, 0.5]);
    }

    proptest! {
        #[test]
        fn stratified_split_is_exhaustive_and_balanced(
            n in 1usize..40, classes in 2usize..6, seed in any::<u64>(),
            a in 0.0f64..1.0, b_frac in 0.0f64..1.0,
        ) {
            let b = (1.0 - a) * b_frac;
            let c = (1.0 - a - b).max(0.0);
            let d = toy(n, classes).split((a, b, c), seed).unwrap();
            prop_assert_eq!(d.splits().total(), n * classes);
            for part in [&d.splits().train, &d.splits().validation, &d.splits().test] {
                let counts = d.class_counts_in(part);
                let lo = *counts.iter().min().unwrap();
                let hi = *counts.iter().max().unwrap();
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
