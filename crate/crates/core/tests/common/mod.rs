//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use rand::Rng;
use sarcnn::backprojection::backproject;
use sarcnn::cnn::layers::maxpool_with_argmax;
use sarcnn::cnn::{relu, BnMode, Group, Hyper, ModelParams, Tensor};
use sarcnn::datasets::SimConfig;
use sarcnn::forward::{circle_integral, simulate, smooth, CircleIntegrator};
use sarcnn::rng::seeded;
use sarcnn::scene::{render, sample_center, ReflectivityMap, RoiGrid, ShapeSpec};

pub const FD_STEP: f64 = 1e-3;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Entries where both gradients are below this are zero up to rounding; the
/// convolution bias gradient is identically zero under training-mode batch norm.
pub const FD_ZERO: f64 = 1e-9;

/// The four-sample problem on the `P=20, K_f=5, K=2, O=3` network.
pub fn tiny_problem(seed: u64) -> (ModelParams, Vec<Tensor>, Vec<usize>) {
    let h = Hyper::new(20, 5, 2, 3).unwrap();
    let mut p = ModelParams::init(h, seed).unwrap();
    let mut rng = seeded(seed ^ 0xabc);
    for g in [Group::ConvBias, Group::BnScale, Group::BnOffset, Group::FcBias] {
        for v in p.group_mut(g) {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
    let inputs = (0..4)
        .map(|_| {
            let px: Vec<f32> = (0..400).map(|_| rng.gen_range(0.0..1.0)).collect();
            Tensor::from_image(20, &px).unwrap()
        })
        .collect();
    (p, inputs, vec![1, 2, 3, 2])
}

/// ReLU signs and pooling winners for a training-mode pass over the batch.
fn pattern(p: &ModelParams, batch: &[Tensor]) -> (Vec<bool>, Vec<u32>) {
    let mut q = p.clone();
    let conv: Vec<Tensor> = batch.iter().map(|t| q.conv_forward(t).unwrap()).collect();
    let bn = q.batchnorm_forward(&conv, BnMode::Train).unwrap();
    let mut signs = Vec::new();
    let mut winners = Vec::new();
    for t in &bn {
        signs.extend(t.as_slice().iter().map(|&v| v > 0.0));
        winners.extend(maxpool_with_argmax(&relu(t)).unwrap().1);
    }
    (signs, winners)
}

/// True when no ReLU or pooling decision flips under any `±step` parameter
/// perturbation, so central differences see a smooth function.
pub fn is_smooth_at(p: &ModelParams, batch: &[Tensor], step: f64) -> bool {
    let base = pattern(p, batch);
    for g in [Group::ConvWeights, Group::ConvBias, Group::BnScale, Group::BnOffset] {
        for i in 0..p.group_len(g) {
            for s in [step, -step] {
                let mut q = p.clone();
                q.group_mut(g)[i] += s;
                if pattern(&q, batch) != base {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub seed: u64,
    pub entries: usize,
    pub failures: usize,
    pub worst_rel: f64,
    pub worst_group: &'static str,
}

/// Compares every analytic gradient entry with central differences on the
/// first tiny problem (seed 0, 1, …) that is smooth within the step.
pub fn gradient_check() -> GradCheck {
    let (seed, (p, x, y)) = (0..200u64)
        .map(|s| (s, tiny_problem(s)))
        .find(|(_, (p, x, _))| is_smooth_at(p, x, FD_STEP))
        .expect("no smooth problem among 200 seeds");
    let refs: Vec<&Tensor> = x.iter().collect();
    let pass = p.loss_and_gradients(&refs, &y).unwrap();
    let mut out = GradCheck {
        seed,
        entries: 0,
        failures: 0,
        worst_rel: 0.0,
        worst_group: "",
    };
    for g in Group::ALL {
        for i in 0..p.group_len(g) {
            let mut q = p.clone();
            q.group_mut(g)[i] += FD_STEP;
            let up = q.batch_loss(&refs, &y).unwrap();
            q.group_mut(g)[i] -= 2.0 * FD_STEP;
            let down = q.batch_loss(&refs, &y).unwrap();
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = pass.gradients.group(g)[i];
            let scale = numeric.abs().max(analytic.abs());
            let rel = if scale < FD_ZERO {
                0.0
            } else {
                (numeric - analytic).abs() / scale
            };
            out.entries += 1;
            if rel > FD_TOLERANCE {
                out.failures += 1;
            }
            if rel >= out.worst_rel {
                out.worst_rel = rel;
                out.worst_group = g.name();
            }
        }
    }
    out
}

/// Circle integral by brute force: `n` uniform angles, nearest-pixel lookup.
pub fn dense_circle_integral(map: &ReflectivityMap, center: (f64, f64), r: f64, n: usize) -> f64 {
    let g = map.grid();
    let d = g.spacing();
    let last = g.n() as i64 - 1;
    let mut acc = 0.0;
    for k in 0..n {
        let phi = std::f64::consts::TAU * k as f64 / n as f64;
        let i = ((center.0 + r * phi.cos() - g.z_min()) / d).round() as i64;
        let j = ((center.1 + r * phi.sin() - g.z_min()) / d).round() as i64;
        if (0..=last).contains(&i) && (0..=last).contains(&j) {
            acc += map.get(i as usize, j as usize);
        }
    }
    std::f64::consts::TAU * r / n as f64 * acc
}

/// The same brute force with bilinear lookup, the interpolant the quadrature uses.
pub fn dense_bilinear_integral(map: &ReflectivityMap, center: (f64, f64), r: f64, n: usize) -> f64 {
    let ci = CircleIntegrator::new(map);
    let mut acc = 0.0;
    for k in 0..n {
        let phi = std::f64::consts::TAU * k as f64 / n as f64;
        acc += ci.interpolate(center.0 + r * phi.cos(), center.1 + r * phi.sin());
    }
    std::f64::consts::TAU * r / n as f64 * acc
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub configurations: usize,
    /// Configurations within [`ORACLE_TOLERANCE`] of the nearest-pixel oracle.
    pub within: usize,
    pub worst_rel: f64,
    /// Largest difference from the nearest-pixel oracle in units of `Δ`.
    pub worst_abs_spacings: f64,
    /// Largest relative difference from the bilinear brute force.
    pub worst_bilinear_rel: f64,
}

pub const ORACLE_TOLERANCE: f64 = 0.02;
pub const ORACLE_SAMPLES: usize = 1_000_000;

/// Random disk bumps crossed by circles whose arc passes near the disk
/// center, so the crossing is never a grazing one.
pub fn forward_oracle(configurations: usize, seed: u64) -> OracleRun {
    let g = RoiGrid::default();
    let mut rng = seeded(seed);
    let mut out = OracleRun {
        configurations,
        within: 0,
        worst_rel: 0.0,
        worst_abs_spacings: 0.0,
        worst_bilinear_rel: 0.0,
    };
    for _ in 0..configurations {
        let rb = rng.gen_range(1.0..3.0);
        let bc = (rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
        let map = render(&g, &[ShapeSpec::circle(rb, bc)]).unwrap();
        let cc = (rng.gen_range(-25.0..25.0), rng.gen_range(-25.0..25.0));
        let dist = ((cc.0 - bc.0).powi(2) + (cc.1 - bc.1).powi(2)).sqrt();
        let r = (dist + rng.gen_range(-0.6..0.6) * rb).max(0.5);
        let fast = circle_integral(&map, cc, r).unwrap();
        let nearest = dense_circle_integral(&map, cc, r, ORACLE_SAMPLES);
        let bilinear = dense_bilinear_integral(&map, cc, r, ORACLE_SAMPLES);
        let rel = (fast - nearest).abs() / nearest.abs().max(f64::MIN_POSITIVE);
        if rel <= ORACLE_TOLERANCE {
            out.within += 1;
        }
        out.worst_rel = out.worst_rel.max(rel);
        out.worst_abs_spacings = out.worst_abs_spacings.max((fast - nearest).abs() / g.spacing());
        out.worst_bilinear_rel = out
            .worst_bilinear_rel
            .max((fast - bilinear).abs() / bilinear.abs().max(f64::MIN_POSITIVE));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub scenes: usize,
    pub hits: usize,
    pub worst_error: f64,
    pub spacing: f64,
}

/// Single disks of radius 2 seen from height 5 on the geometric time axis;
/// a hit is a bright-pixel centroid within two grid spacings of the center.
pub fn localization(scenes: usize, seed: u64) -> Localization {
    let cfg = SimConfig::default();
    let sim = cfg.simulator(5.0).unwrap();
    let g = cfg.grid;
    let mut rng = seeded(seed);
    let mut out = Localization {
        scenes,
        hits: 0,
        worst_error: 0.0,
        spacing: g.spacing(),
    };
    for _ in 0..scenes {
        let c = sample_center(-7.0, 7.0, &mut rng).unwrap();
        let map = render(&g, &[ShapeSpec::circle(2.0, c)]).unwrap();
        let raw = smooth(&simulate(&map, sim.track(), sim.axis()).unwrap()).unwrap();
        let img = backproject(&raw, &g, cfg.tolerance).unwrap();
        let (c1, c2) = img.bright_centroid(0.05);
        let err = ((c1 - c.0).powi(2) + (c2 - c.1).powi(2)).sqrt();
        if err <= 2.0 * g.spacing() {
            out.hits += 1;
        }
        out.worst_error = out.worst_error.max(err);
    }
    out
}

/// Layer-by-layer shapes of one inference pass, ending with the class label.
pub fn dimension_chain(p: usize, k: usize, o: usize) -> Vec<(usize, usize, usize)> {
    let params = ModelParams::init(Hyper::new(p, 13, k, o).unwrap(), 5).unwrap();
    let mut rng = seeded(9);
    let px: Vec<f32> = (0..p * p).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::from_image(p, &px).unwrap();
    let mut q = params.clone();
    // Inference mode needs running statistics.
    let conv = q.conv_forward(&x).unwrap();
    let plane = conv.height() * conv.width();
    let mean: Vec<f64> = (0..k)
        .map(|c| conv.plane(c).iter().sum::<f64>() / plane as f64)
        .collect();
    q.set_running_stats(mean, vec![1.0; k]).unwrap();
    let t = q.trace(&x, BnMode::Infer).unwrap();
    let label = sarcnn::cnn::classify(&t.probabilities, &mut rng);
    assert!((1..=o).contains(&label));
    vec![
        x.shape(),
        t.conv.shape(),
        t.normalized.shape(),
        t.rectified.shape(),
        t.pooled.shape(),
        (t.logits.len(), 1, 1),
        (t.probabilities.len(), 1, 1),
        (1, 1, 1),
    ]
}

/// The expected chain for a `P × P` input, `K_f = 13`.
pub fn expected_chain(p: usize, k: usize, o: usize) -> Vec<(usize, usize, usize)> {
    let m = p - 12;
    vec![
        (p, p, 1),
        (m, m, k),
        (m, m, k),
        (m, m, k),
        (m / 2, m / 2, k),
        (o, 1, 1),
        (o, 1, 1),
        (1, 1, 1),
    ]
}
