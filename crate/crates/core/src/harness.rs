//! Experiment drivers and plain-text reports.
//!
//! A report is a sequence of `[section]` blocks. Scalar sections hold
//! `key = value` lines; table sections hold comma-separated rows with a
//! header line.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::cnn::{evaluate, train, ConfusionMatrix, EpochMetrics, Hyper, ModelParams, TrainConfig};
use crate::datasets::{
    gen_count_dataset, gen_multiscatterer_dataset, gen_radius_dataset, gen_shape_datasets, load_ice_dataset,
    synthetic_textures, LabeledDataset, Mode, SimConfig,
};
use crate::error::{invalid, Result};
use crate::rng::derive_seed;

/// Sample counts and epoch budgets for the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub shape_per_class: usize,
    pub multi_per_class: usize,
    pub radius_per_class: usize,
    pub count_total: usize,
    pub ice_per_class: usize,
    pub epochs: usize,
    pub ice_epochs: usize,
}

impl Scale {
    /// Small enough to run every experiment on a laptop.
    pub fn desk() -> Self {
        Self {
            shape_per_class: 200,
            multi_per_class: 500,
            radius_per_class: 200,
            count_total: 600,
            ice_per_class: 100,
            epochs: 15,
            ice_epochs: 100,
        }
    }

    /// The sample counts of the original experiments.
    pub fn full() -> Self {
        Self {
            shape_per_class: 1000,
            multi_per_class: 2500,
            radius_per_class: 1250,
            count_total: 6000,
            ice_per_class: 1170,
            epochs: 30,
            ice_epochs: 100,
        }
    }
}

impl Default for Scale {
    fn default() -> Self {
        Self::desk()
    }
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scale: Scale,
    pub sim: SimConfig,
    /// Optimizer settings; `max_epochs` and `seed` are set per experiment.
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            scale: Scale::desk(),
            sim: SimConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Training settings for one run: `epochs` epochs, seed derived from `stream`.
    pub fn train_config(&self, epochs: usize, stream: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: epochs,
            seed: derive_seed(self.seed, stream),
            ..self.train.clone()
        }
    }

    /// Key/value echo of every setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        let s = &self.sim;
        let t = &self.train;
        let sc = &self.scale;
        let mut v: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            (
                "grid",
                format!("{}..{} x{}", s.grid.z_min(), s.grid.z_max(), s.grid.n()),
            ),
            ("track_radius", s.track_radius.to_string()),
            ("n_positions", s.n_positions.to_string()),
            ("c0", s.c0.to_string()),
            ("n_t", s.n_t.to_string()),
            ("paper_times", s.paper_times.to_string()),
            ("tolerance", s.tolerance.to_string()),
            ("normalize_raw", s.normalize_raw.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("adam_beta1", t.adam_beta1.to_string()),
            ("adam_beta2", t.adam_beta2.to_string()),
            ("adam_epsilon", t.adam_epsilon.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("validate_every", t.validate_every.to_string()),
            ("keep_best", t.keep_best.to_string()),
            ("shape_per_class", sc.shape_per_class.to_string()),
            ("multi_per_class", sc.multi_per_class.to_string()),
            ("radius_per_class", sc.radius_per_class.to_string()),
            ("count_total", sc.count_total.to_string()),
            ("ice_per_class", sc.ice_per_class.to_string()),
            ("epochs", sc.epochs.to_string()),
            ("ice_epochs", sc.ice_epochs.to_string()),
        ];
        v.sort_by_key(|(k, _)| *k);
        v.into_iter().map(|(k, val)| (k.to_string(), val)).collect()
    }
}

/// Outcome of training and testing one model.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub id: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub confusion: ConfusionMatrix,
    pub wall_clock: Duration,
    pub params: ModelParams,
}

impl ExperimentReport {
    /// Test accuracy, `trace / total` of the confusion matrix.
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[report]");
        let _ = writeln!(out, "experiment = {}", self.id);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "accuracy = {}", percent(self.accuracy()));
        let _ = writeln!(out, "best_epoch = {}", self.best_epoch);
        let _ = writeln!(out, "wall_clock_s = {:.3}", self.wall_clock.as_secs_f64());
        let _ = writeln!(out, "\n[config]");
        for (k, v) in &self.config {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "\n[epochs]");
        out.push_str(&metrics_csv(&self.metrics));
        let _ = writeln!(out, "\n[confusion]");
        out.push_str(&self.confusion.to_csv());
        out
    }
}

/// Accuracy as a percentage with two decimals.
pub fn percent(acc: f64) -> String {
    format!("{:.2}", 100.0 * acc)
}

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,train_accuracy,validation_accuracy\n");
    for m in metrics {
        let val = m.validation_accuracy.map(percent).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:.6},{},{}",
            m.epoch,
            m.train_loss,
            percent(m.train_accuracy),
            val
        );
    }
    out
}

/// Trains on the dataset's training split and tests on its test split.
pub fn train_and_test(
    id: &str,
    dataset: &LabeledDataset,
    hyper: Hyper,
    train_cfg: &TrainConfig,
    mut config: Vec<(String, String)>,
    started: Instant,
) -> Result<ExperimentReport> {
    log::info!("{id}: training on {} samples", dataset.splits().train.len());
    let outcome = train(dataset, hyper, train_cfg)?;
    let confusion = evaluate(&outcome.params, dataset, derive_seed(train_cfg.seed, 99))?;
    config.push(("dataset_sizes".into(), format!("{:?}", dataset.splits().sizes())));
    config.push(("max_epochs".into(), train_cfg.max_epochs.to_string()));
    config.push(("train_seed".into(), train_cfg.seed.to_string()));
    log::info!("{id}: test accuracy {}", percent(confusion.accuracy()));
    Ok(ExperimentReport {
        id: id.to_string(),
        seed: train_cfg.seed,
        config,
        metrics: outcome.metrics,
        best_epoch: outcome.best_epoch,
        confusion,
        wall_clock: started.elapsed(),
        params: outcome.params,
    })
}

fn with_extra(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut v = cfg.echo();
    v.extend(extra.iter().map(|(k, val)| (k.to_string(), val.clone())));
    v
}

/// One height of the raw-versus-image comparison.
#[derive(Debug, Clone)]
pub struct ShapeRow {
    pub height: f64,
    pub raw: ExperimentReport,
    pub backprojected: ExperimentReport,
}

#[derive(Debug, Clone)]
pub struct ShapeComparison {
    pub rows: Vec<ShapeRow>,
}

impl ShapeComparison {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("height,raw_accuracy,backprojected_accuracy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.height,
                percent(r.raw.accuracy()),
                percent(r.backprojected.accuracy())
            );
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::from("[shape_comparison]\n");
        out.push_str(&self.table_csv());
        for r in &self.rows {
            out.push('\n');
            out.push_str(&r.raw.render());
            out.push('\n');
            out.push_str(&r.backprojected.render());
        }
        out
    }
}

/// Trains the shape classifier on raw data and on backprojected images of
/// the same scenes at each height.
pub fn run_shape_comparison(heights: &[f64], cfg: &ExperimentConfig) -> Result<ShapeComparison> {
    if heights.is_empty() {
        return Err(invalid("need at least one height"));
    }
    let mut rows = Vec::with_capacity(heights.len());
    for (i, &h) in heights.iter().enumerate() {
        let started = Instant::now();
        let data_seed = derive_seed(cfg.seed, 100 + i as u64);
        let mut pair = gen_shape_datasets(
            cfg.scale.shape_per_class,
            h,
            &[Mode::Raw, Mode::Backprojected],
            data_seed,
            &cfg.sim,
        )?;
        let image = pair.pop().unwrap();
        let raw = pair.pop().unwrap();
        let sim_time = started.elapsed();
        let mut reports = Vec::with_capacity(2);
        for (mode, d) in [(Mode::Raw, &raw), (Mode::Backprojected, &image)] {
            let started = Instant::now();
            let tc = cfg.train_config(cfg.scale.epochs, 200 + i as u64);
            let extra = [
                ("task", "shape".to_string()),
                ("height", h.to_string()),
                ("mode", mode.to_string()),
                ("data_seed", data_seed.to_string()),
                ("simulation_s", format!("{:.3}", sim_time.as_secs_f64())),
            ];
            let id = format!("shape-{mode}-h{h}");
            reports.push(train_and_test(
                &id,
                d,
                Hyper::simulated(4)?,
                &tc,
                with_extra(cfg, &extra),
                started,
            )?);
        }
        let backprojected = reports.pop().unwrap();
        let raw = reports.pop().unwrap();
        rows.push(ShapeRow {
            height: h,
            raw,
            backprojected,
        });
    }
    Ok(ShapeComparison { rows })
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<(f64, ExperimentReport)>,
}

impl Sweep {
    /// Widest run of consecutive radii (in ascending order) classified with
    /// 100% test accuracy.
    pub fn perfect_band(&self) -> Option<(f64, f64)> {
        let mut rows: Vec<(f64, f64)> = self.rows.iter().map(|(r, rep)| (*r, rep.accuracy())).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<(f64, f64)> = None;
        let mut start: Option<f64> = None;
        for &(r, acc) in &rows {
            if acc == 1.0 {
                let s = *start.get_or_insert(r);
                if best.is_none_or(|(lo, hi)| r - s > hi - lo) {
                    best = Some((s, r));
                }
            } else {
                start = None;
            }
        }
        best
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("radius,accuracy\n");
        for (r, rep) in &self.rows {
            let _ = writeln!(out, "{r},{}", percent(rep.accuracy()));
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::from("[multiscatterer_sweep]\n");
        out.push_str(&self.table_csv());
        out.push_str("\n[perfect_band]\n");
        match self.perfect_band() {
            Some((lo, hi)) => {
                let _ = writeln!(out, "r_min = {lo}\nr_max = {hi}");
            }
            None => out.push_str("none\n"),
        }
        for (_, rep) in &self.rows {
            out.push('\n');
            out.push_str(&rep.render());
        }
        out
    }
}

/// Default radii of the one-versus-two scatterer sweep.
pub const MULTI_RADII: [f64; 7] = [1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 15.0];

/// Trains one single-versus-double scatterer classifier per radius.
pub fn run_multiscatterer_sweep(radii: &[f64], cfg: &ExperimentConfig) -> Result<Sweep> {
    if radii.is_empty() {
        return Err(invalid("need at least one radius"));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for (i, &r) in radii.iter().enumerate() {
        let started = Instant::now();
        let data_seed = derive_seed(cfg.seed, 300 + i as u64);
        let d = gen_multiscatterer_dataset(r, cfg.scale.multi_per_class, data_seed, &cfg.sim)?;
        let tc = cfg.train_config(cfg.scale.epochs, 400 + i as u64);
        let extra = [
            ("task", "multi".to_string()),
            ("radius", r.to_string()),
            ("data_seed", data_seed.to_string()),
        ];
        let rep = train_and_test(
            &format!("multi-r{r}"),
            &d,
            Hyper::simulated(2)?,
            &tc,
            with_extra(cfg, &extra),
            started,
        )?;
        rows.push((r, rep));
    }
    Ok(Sweep { rows })
}

/// Radius classification (4 classes) and scatterer counting (3 classes).
pub fn run_radius_and_count(cfg: &ExperimentConfig) -> Result<(ExperimentReport, ExperimentReport)> {
    let started = Instant::now();
    let seed_r = derive_seed(cfg.seed, 500);
    let d = gen_radius_dataset(cfg.scale.radius_per_class, seed_r, &cfg.sim)?;
    let extra = [("task", "radius".to_string()), ("data_seed", seed_r.to_string())];
    let radius = train_and_test(
        "radius",
        &d,
        Hyper::simulated(4)?,
        &cfg.train_config(cfg.scale.epochs, 501),
        with_extra(cfg, &extra),
        started,
    )?;

    let started = Instant::now();
    let seed_c = derive_seed(cfg.seed, 600);
    let d = gen_count_dataset(cfg.scale.count_total, seed_c, &cfg.sim)?;
    let extra = [("task", "count".to_string()), ("data_seed", seed_c.to_string())];
    let count = train_and_test(
        "count",
        &d,
        Hyper::simulated(3)?,
        &cfg.train_config(cfg.scale.epochs, 601),
        with_extra(cfg, &extra),
        started,
    )?;
    Ok((radius, count))
}

/// Ice-type classification with 16 filters on 256×256 images under `root`.
pub fn run_ice(root: &Path, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, 700);
    let d = load_ice_dataset(root, cfg.scale.ice_per_class, seed)?;
    let extra = [
        ("task", "ice".to_string()),
        ("root", root.display().to_string()),
        ("data_seed", seed.to_string()),
    ];
    train_and_test(
        "ice",
        &d,
        Hyper::ice()?,
        &cfg.train_config(cfg.scale.ice_epochs, 701),
        with_extra(cfg, &extra),
        started,
    )
}

/// Stand-in for [`run_ice`]: eight procedural texture classes, 16 filters.
/// Also reports the accuracy on the training split after training.
/// Texture stand-in size: images per class and image side.
pub const STANDIN_PER_CLASS: usize = 10;
pub const STANDIN_SIZE: usize = 48;

pub fn run_texture_standin(n_per_class: usize, size: usize, cfg: &ExperimentConfig) -> Result<(ExperimentReport, f64)> {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, 800);
    let d = synthetic_textures(n_per_class, size, seed)?;
    let hyper = Hyper::new(size, 13, 16, 8)?;
    let extra = [
        ("task", "ice-standin".to_string()),
        ("image_size", size.to_string()),
        ("n_per_class", n_per_class.to_string()),
        ("data_seed", seed.to_string()),
    ];
    let tc = cfg.train_config(cfg.scale.ice_epochs, 801);
    let rep = train_and_test("ice-standin", &d, hyper, &tc, with_extra(cfg, &extra), started)?;
    let train_cm = crate::cnn::evaluate_indices(&rep.params, &d, &d.splits().train, derive_seed(tc.seed, 98))?;
    Ok((rep, train_cm.accuracy()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_report(acc_hits: u64) -> ExperimentReport {
        let cm = ConfusionMatrix::from_counts(2, vec![acc_hits, 10 - acc_hits, 0, 10]).unwrap();
        ExperimentReport {
            id: "x".into(),
            seed: 1,
            config: vec![("a".into(), "b".into())],
            metrics: vec![EpochMetrics {
                epoch: 1,
                train_loss: 0.5,
                train_accuracy: 0.75,
                validation_accuracy: Some(0.5),
            }],
            best_epoch: 1,
            confusion: cm,
            wall_clock: Duration::from_millis(1500),
            params: ModelParams::init(Hyper::new(20, 5, 1, 2).unwrap(), 0).unwrap(),
        }
    }

    #[test]
    fn band_picks_widest_perfect_run() {
        let s = Sweep {
            rows: vec![
                (1.0, fake_report(9)),
                (2.0, fake_report(10)),
                (3.0, fake_report(10)),
                (4.0, fake_report(10)),
                (5.0, fake_report(8)),
                (10.0, fake_report(10)),
            ],
        };
        assert_eq!(s.perfect_band(), Some((2.0, 4.0)));
        let single = Sweep {
            rows: vec![(2.0, fake_report(9))],
        };
        assert_eq!(single.perfect_band(), None);
        assert_eq!(single.table_csv().lines().count(), 2);
    }

    #[test]
    fn report_renders_sections() {
        let r = fake_report(9);
        let text = r.render();
        assert!(text.contains("accuracy = 95.00"));
        assert!(text.contains("[epochs]\nepoch,train_loss"));
        assert!(text.contains("1,0.500000,75.00,50.00"));
        assert!(text.contains("[confusion]"));
        assert!(text.contains("wall_clock_s = 1.500"));
    }

    #[test]
    fn echo_is_sorted_and_complete() {
        let e = ExperimentConfig::default().echo();
        let keys: Vec<&str> = e.iter().map(|(k, _)| k.as_str()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(keys.contains(&"paper_times") && keys.contains(&"learning_rate"));
    }
}
