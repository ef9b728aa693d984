//! Raw data simulation: circular integrals of the reflectivity map around a
//! circular flight track, and the fast-time smoothing window.
//!
//! Raw data is an `n_t × n_s` matrix; row `i` is fast-time sample `t_i`,
//! column `j` is antenna position `j` on the track.

use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::scene::{ReflectivityMap, RoiGrid};

/// Minimum number of arc samples per circle.
pub const MIN_ARC_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightTrack {
    radius: f64,
    height: f64,
    n_positions: usize,
    c0: f64,
}

impl FlightTrack {
    pub fn new(radius: f64, height: f64, n_positions: usize, c0: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("track radius must be positive, got {radius}")));
        }
        if !(height >= 0.0 && height.is_finite()) {
            return Err(invalid(format!("track height must be non-negative, got {height}")));
        }
        if n_positions == 0 {
            return Err(invalid("track needs at least one antenna position"));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(invalid(format!("wave speed must be positive, got {c0}")));
        }
        Ok(Self {
            radius,
            height,
            n_positions,
            c0,
        })
    }

    /// Default geometry (radius 20, 100 positions, unit wave speed) at the given height.
    pub fn at_height(height: f64) -> Result<Self> {
        Self::new(20.0, height, 100, 1.0)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn n_positions(&self) -> usize {
        self.n_positions
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Angle of position `k`: `2πk / n_positions`, so `2π` is never duplicated.
    pub fn angle(&self, k: usize) -> f64 {
        TAU * k as f64 / self.n_positions as f64
    }

    /// Horizontal `(x, y)` of position `k`.
    pub fn horizontal(&self, k: usize) -> (f64, f64) {
        let th = self.angle(k);
        (self.radius * th.cos(), self.radius * th.sin())
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.n_positions)
            .map(|k| {
                let (x, y) = self.horizontal(k);
                [x, y, self.height]
            })
            .collect()
    }
}

impl Default for FlightTrack {
    fn default() -> Self {
        Self {
            radius: 20.0,
            height: 0.0,
            n_positions: 100,
            c0: 1.0,
        }
    }
}

pub fn flight_positions(track: &FlightTrack) -> Vec<[f64; 3]> {
    track.positions()
}

/// Evenly spaced fast-time samples on `[t_min, t_max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastTimeAxis {
    t_min: f64,
    t_max: f64,
    n_t: usize,
}

impl FastTimeAxis {
    pub fn new(t_min: f64, t_max: f64, n_t: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) || t_min >= t_max {
            return Err(invalid(format!(
                "fast-time axis must satisfy t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if n_t < 2 {
            return Err(invalid(format!("fast-time axis needs at least 2 samples, got {n_t}")));
        }
        Ok(Self { t_min, t_max, n_t })
    }

    /// The literal `[5, 23]` axis with 100 samples.
    pub fn literal() -> Self {
        Self {
            t_min: 5.0,
            t_max: 23.0,
            n_t: 100,
        }
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_t - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.n_t {
            return self.t_max;
        }
        self.t_min + (self.t_max - self.t_min) * i as f64 / (self.n_t - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_t).map(|i| self.value(i)).collect()
    }
}

/// Radius of the intersection of the sphere `|x - γ| = c₀t/2` with the ground,
/// or `None` when the sphere does not reach it.
pub fn ground_circle_radius(t: f64, h: f64, c0: f64) -> Option<f64> {
    if !(t > 0.0) {
        return None;
    }
    let half = c0 * t / 2.0;
    let q = half * half - h * h;
    (q > 0.0).then(|| q.sqrt())
}

/// Fast-time axis spanning exactly the travel times between the track and the grid.
pub fn default_time_axis(track: &FlightTrack, grid: &RoiGrid, n_t: usize) -> Result<FastTimeAxis> {
    let coords = grid.coords();
    let h2 = track.height() * track.height();
    let mut d_min = f64::INFINITY;
    let mut d_min_positive = f64::INFINITY;
    let mut d_max: f64 = 0.0;
    for k in 0..track.n_positions() {
        let (ax, ay) = track.horizontal(k);
        for &z1 in &coords {
            let dx = z1 - ax;
            for &z2 in &coords {
                let dy = z2 - ay;
                let d = (dx * dx + dy * dy + h2).sqrt();
                d_min = d_min.min(d);
                d_max = d_max.max(d);
                if d > 0.0 {
                    d_min_positive = d_min_positive.min(d);
                }
            }
        }
    }
    // An antenna sitting on a pixel would give t_min = 0, which carries no ground circle.
    if d_min == 0.0 {
        d_min = d_min_positive;
    }
    FastTimeAxis::new(2.0 * d_min / track.c0(), 2.0 * d_max / track.c0(), n_t)
}

/// Smoothing window `exp(-((t - t_min)^-2 + (t_max - t)^-2))`, zero at and beyond the endpoints.
pub fn smoothing_window(t: f64, t_min: f64, t_max: f64) -> f64 {
    if !(t > t_min && t < t_max) {
        return 0.0;
    }
    let a = t - t_min;
    let b = t_max - t;
    (-(1.0 / (a * a) + 1.0 / (b * b))).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSarData {
    values: Matrix,
    axis: FastTimeAxis,
    track: FlightTrack,
    smoothed: bool,
}

impl RawSarData {
    pub fn new(values: Matrix, axis: FastTimeAxis, track: FlightTrack, smoothed: bool) -> Result<Self> {
        if values.rows() != axis.len() || values.cols() != track.n_positions() {
            return Err(Error::ShapeMismatch(format!(
                "raw data is {}x{}, expected {}x{} (fast time x positions)",
                values.rows(),
                values.cols(),
                axis.len(),
                track.n_positions()
            )));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(invalid("raw data must be finite"));
        }
        Ok(Self {
            values,
            axis,
            track,
            smoothed,
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn axis(&self) -> &FastTimeAxis {
        &self.axis
    }

    pub fn track(&self) -> &FlightTrack {
        &self.track
    }

    pub fn is_smoothed(&self) -> bool {
        self.smoothed
    }

    /// Sum of squared entries.
    pub fn energy(&self) -> f64 {
        self.values.as_slice().iter().map(|v| v * v).sum()
    }
}

/// Line integrals of one reflectivity map over arbitrary circles.
///
/// The map's support box is computed once; circles that miss it return an
/// exact zero, and arc samples that cannot touch it are skipped. Skipped
/// samples would contribute exactly `0.0`, so the result is bit-identical to
/// the plain loop over all samples.
pub struct CircleIntegrator<'a> {
    map: &'a ReflectivityMap,
    // Open box outside of which bilinear interpolation is exactly zero.
    support: Option<[f64; 4]>,
}

impl<'a> CircleIntegrator<'a> {
    pub fn new(map: &'a ReflectivityMap) -> Self {
        let grid = map.grid();
        let d = grid.spacing();
        let margin = 1e-6 * d;
        let support = map.support_box().map(|(il, ih, jl, jh)| {
            [
                grid.z_min() + (il as f64 - 1.0) * d - margin,
                grid.z_min() + (ih as f64 + 1.0) * d + margin,
                grid.z_min() + (jl as f64 - 1.0) * d - margin,
                grid.z_min() + (jh as f64 + 1.0) * d + margin,
            ]
        });
        Self { map, support }
    }

    pub fn arc_samples(&self, r: f64) -> usize {
        let half_step = self.map.grid().spacing() / 2.0;
        let n = (TAU * r / half_step).ceil();
        MIN_ARC_SAMPLES.max(n as usize)
    }

    /// Bilinear interpolation of the map at `(z1, z2)`; zero outside the grid.
    pub fn interpolate(&self, z1: f64, z2: f64) -> f64 {
        let grid = self.map.grid();
        let n = grid.n();
        let last = (n - 1) as f64;
        let d = grid.spacing();
        let u = (z1 - grid.z_min()) / d;
        let w = (z2 - grid.z_min()) / d;
        if !(u >= 0.0 && u <= last && w >= 0.0 && w <= last) {
            return 0.0;
        }
        let i0 = (u.floor() as usize).min(n - 2);
        let j0 = (w.floor() as usize).min(n - 2);
        let fu = u - i0 as f64;
        let fw = w - j0 as f64;
        let v = self.map.values();
        (1.0 - fu) * (1.0 - fw) * v[(i0, j0)]
            + fu * (1.0 - fw) * v[(i0 + 1, j0)]
            + (1.0 - fu) * fw * v[(i0, j0 + 1)]
            + fu * fw * v[(i0 + 1, j0 + 1)]
    }

    fn sample(&self, center: (f64, f64), r: f64, k: usize, n: usize) -> f64 {
        let phi = TAU * k as f64 / n as f64;
        self.interpolate(center.0 + r * phi.cos(), center.1 + r * phi.sin())
    }

    pub fn integrate(&self, center: (f64, f64), r: f64) -> Result<f64> {
        check_radius(r)?;
        let Some([xl, xh, yl, yh]) = self.support else {
            return Ok(0.0);
        };
        let n = self.arc_samples(r);
        let (cx, cy) = center;

        let dx = (xl - cx).max(cx - xh).max(0.0);
        let dy = (yl - cy).max(cy - yh).max(0.0);
        let d_near = (dx * dx + dy * dy).sqrt();
        let corners = [(xl, yl), (xl, yh), (xh, yl), (xh, yh)];
        let d_far = corners
            .iter()
            .map(|&(x, y)| ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt())
            .fold(0.0, f64::max);
        if r < d_near || r > d_far {
            return Ok(0.0);
        }

        let mut acc = 0.0;
        if d_near > 0.0 {
            // Center outside the box: the box subtends less than π.
            let phi_c = ((yl + yh) / 2.0 - cy).atan2((xl + xh) / 2.0 - cx);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(x, y) in &corners {
                let off = wrap_angle((y - cy).atan2(x - cx) - phi_c);
                lo = lo.min(off);
                hi = hi.max(off);
            }
            let step = TAU / n as f64;
            let k_start = ((phi_c + lo) / step).floor() as i64 - 1;
            let k_end = ((phi_c + hi) / step).ceil() as i64 + 1;
            let len = (k_end - k_start + 1) as usize;
            if len < n {
                let s = k_start.rem_euclid(n as i64) as usize;
                // Ascending sample order, identical to the plain loop.
                if s + len <= n {
                    for k in s..s + len {
                        acc += self.sample(center, r, k, n);
                    }
                } else {
                    for k in 0..(s + len - n) {
                        acc += self.sample(center, r, k, n);
                    }
                    for k in s..n {
                        acc += self.sample(center, r, k, n);
                    }
                }
                return Ok(TAU * r / n as f64 * acc);
            }
        }
        for k in 0..n {
            acc += self.sample(center, r, k, n);
        }
        Ok(TAU * r / n as f64 * acc)
    }

    /// Plain loop over every arc sample; reference for [`Self::integrate`].
    pub fn integrate_all_samples(&self, center: (f64, f64), r: f64) -> Result<f64> {
        check_radius(r)?;
        let n = self.arc_samples(r);
        let mut acc = 0.0;
        for k in 0..n {
            acc += self.sample(center, r, k, n);
        }
        Ok(TAU * r / n as f64 * acc)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("circle radius must be positive, got {r}")));
    }
    Ok(())
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(TAU);
    if a > std::f64::consts::PI {
        a -= TAU;
    }
    a
}

/// Line integral of `map` over the circle of radius `r` about `center`.
pub fn circle_integral(map: &ReflectivityMap, center: (f64, f64), r: f64) -> Result<f64> {
    CircleIntegrator::new(map).integrate(center, r)
}

/// Raw data `data(t_i, s_j)`: the integral over the ground circle seen by
/// antenna `j` at fast time `t_i`, zero where the sphere misses the ground.
pub fn simulate(map: &ReflectivityMap, track: &FlightTrack, axis: &FastTimeAxis) -> Result<RawSarData> {
    let integrator = CircleIntegrator::new(map);
    let radii: Vec<Option<f64>> = axis
        .values()
        .into_iter()
        .map(|t| ground_circle_radius(t, track.height(), track.c0()))
        .collect();
    let mut values = Matrix::zeros(axis.len(), track.n_positions());
    for j in 0..track.n_positions() {
        let center = track.horizontal(j);
        for (i, r) in radii.iter().enumerate() {
            if let Some(r) = *r {
                values[(i, j)] = integrator.integrate(center, r)?;
            }
        }
    }
    RawSarData::new(values, *axis, *track, false)
}

/// Multiplies every row by the smoothing window at its fast time.
pub fn smooth(raw: &RawSarData) -> Result<RawSarData> {
    if raw.smoothed {
        return Err(Error::InvalidState("raw data is already smoothed".into()));
    }
    let axis = raw.axis;
    let mut values = raw.values.clone();
    let cols = values.cols();
    for (i, row) in values.as_mut_slice().chunks_mut(cols).enumerate() {
        let mu = smoothing_window(axis.value(i), axis.t_min(), axis.t_max());
        for v in row {
            *v *= mu;
        }
    }
    Ok(RawSarData {
        values,
        axis,
        track: raw.track,
        smoothed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{render, ShapeSpec};
    use proptest::prelude::*;

    fn ones_map() -> ReflectivityMap {
        let g = RoiGrid::default();
        ReflectivityMap::from_values(g, Matrix::filled(g.n(), g.n(), 1.0)).unwrap()
    }

    #[test]
    fn positions_on_the_circle() {
        let t5 = FlightTrack::new(20.0, 5.0, 100, 1.0).unwrap();
        assert_eq!(t5.positions()[0], [20.0, 0.0, 5.0]);
        let t0 = FlightTrack::at_height(0.0).unwrap();
        let q = t0.positions()[25];
        assert!(q[0].abs() < 1e-12 && (q[1] - 20.0).abs() < 1e-12 && q[2] == 0.0);
        for p in t5.positions() {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn track_rejects_degenerate() {
        assert!(FlightTrack::new(0.0, 0.0, 100, 1.0).is_err());
        assert!(FlightTrack::new(20.0, -1.0, 100, 1.0).is_err());
        assert!(FlightTrack::new(20.0, 0.0, 0, 1.0).is_err());
        assert!(FlightTrack::new(20.0, 0.0, 10, 0.0).is_err());
    }

    #[test]
    fn ground_circle_examples() {
        assert_eq!(ground_circle_radius(26.0, 5.0, 1.0), Some(12.0));
        assert_eq!(ground_circle_radius(4.0, 5.0, 1.0), None);
        assert_eq!(ground_circle_radius(10.0, 0.0, 1.0), Some(5.0));
        assert_eq!(ground_circle_radius(10.0, 5.0, 1.0), None);
    }

    #[test]
    fn constant_map_gives_circumference() {
        let m = ones_map();
        let v = circle_integral(&m, (0.0, 0.0), 2.0).unwrap();
        assert!((v - 4.0 * std::f64::consts::PI).abs() < 1e-6, "{v}");
    }

    #[test]
    fn zero_map_gives_zero() {
        let m = ReflectivityMap::zeros(RoiGrid::default());
        assert_eq!(circle_integral(&m, (1.0, 2.0), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_radius_rejected() {
        let m = ones_map();
        assert!(circle_integral(&m, (0.0, 0.0), 0.0).is_err());
        assert!(circle_integral(&m, (0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn arc_sample_count_rule() {
        let m = ones_map();
        let it = CircleIntegrator::new(&m);
        assert_eq!(it.arc_samples(0.01), 64);
        let d = RoiGrid::default().spacing();
        assert_eq!(it.arc_samples(10.0), (TAU * 10.0 / (d / 2.0)).ceil() as usize);
    }

    #[test]
    fn smoothing_window_values() {
        let mu = smoothing_window(14.0, 5.0, 23.0);
        assert!((mu - (-2.0f64 / 81.0).exp()).abs() < 1e-15);
        assert!((mu - 0.975_610).abs() < 1e-6);
        assert_eq!(smoothing_window(5.0, 5.0, 23.0), 0.0);
        assert_eq!(smoothing_window(23.0, 5.0, 23.0), 0.0);
        for u in [0.5, 1.0, 3.0, 7.0, 8.9] {
            assert_eq!(
                smoothing_window(5.0 + u, 5.0, 23.0),
                smoothing_window(23.0 - u, 5.0, 23.0)
            );
        }
    }

    #[test]
    fn smoothing_window_is_bounded_and_peaks_at_midpoint() {
        let mid = smoothing_window(14.0, 5.0, 23.0);
        for i in 1..1000 {
            let t = 5.0 + 18.0 * i as f64 / 1000.0;
            let mu = smoothing_window(t, 5.0, 23.0);
            assert!((0.0..1.0).contains(&mu));
            assert!(mu <= mid);
        }
    }

    #[test]
    fn smooth_rejects_double_application() {
        let g = RoiGrid::default();
        let map = render(&g, &[ShapeSpec::circle(2.0, (4.0, 4.0))]).unwrap();
        let track = FlightTrack::at_height(5.0).unwrap();
        let axis = default_time_axis(&track, &g, 100).unwrap();
        let raw = simulate(&map, &track, &axis).unwrap();
        let s = smooth(&raw).unwrap();
        assert!(s.is_smoothed());
        assert!(smooth(&s).is_err());
    }

    #[test]
    fn time_axis_from_geometry() {
        let g = RoiGrid::default();
        let s2 = std::f64::consts::SQRT_2;
        let t0 = default_time_axis(&FlightTrack::at_height(0.0).unwrap(), &g, 100).unwrap();
        // Continuous-geometry oracle; the discrete track can only be slightly farther.
        let lo = 2.0 * (20.0 - 10.0 * s2);
        let hi = 2.0 * (20.0 + 10.0 * s2);
        assert!(
            t0.t_min() >= lo - 1e-9 && (t0.t_min() - lo) / lo < 0.01,
            "{}",
            t0.t_min()
        );
        assert!(
            t0.t_max() <= hi + 1e-9 && (hi - t0.t_max()) / hi < 0.01,
            "{}",
            t0.t_max()
        );
        let t10 = default_time_axis(&FlightTrack::at_height(10.0).unwrap(), &g, 100).unwrap();
        let lo10 = 2.0 * ((20.0 - 10.0 * s2).powi(2) + 100.0).sqrt();
        assert!((t10.t_min() - lo10).abs() / lo10 < 0.01, "{}", t10.t_min());
    }

    #[test]
    fn time_axis_clamps_when_antenna_sits_on_a_pixel() {
        // Antenna 0 at (10, 0, 0) coincides with a grid point of {-10, 0, 10}².
        let g = RoiGrid::new(-10.0, 10.0, 3).unwrap();
        let track = FlightTrack::new(10.0, 0.0, 4, 1.0).unwrap();
        let axis = default_time_axis(&track, &g, 10).unwrap();
        assert!(axis.t_min() > 0.0);
    }

    #[test]
    fn zero_map_simulates_to_zero() {
        let g = RoiGrid::default();
        let track = FlightTrack::at_height(5.0).unwrap();
        let axis = default_time_axis(&track, &g, 100).unwrap();
        let raw = simulate(&ReflectivityMap::zeros(g), &track, &axis).unwrap();
        assert_eq!(raw.values().rows(), 100);
        assert_eq!(raw.values().cols(), 100);
        assert!(raw.values().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn literal_axis_misses_the_bumps() {
        // With the literal [5, 23] axis the largest ground circle has radius 11.5,
        // which cannot reach a bump whose far edge stays within 6.5 of the origin.
        let g = RoiGrid::default();
        let map = render(&g, &[ShapeSpec::circle(2.0, (3.5, 3.0))]).unwrap();
        let raw = simulate(&map, &FlightTrack::at_height(0.0).unwrap(), &FastTimeAxis::literal()).unwrap();
        assert!(raw.values().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn windowed_matches_plain_loop_on_shapes() {
        let g = RoiGrid::default();
        let map = render(&g, &[ShapeSpec::circle(3.0, (4.0, 5.0))]).unwrap();
        let it = CircleIntegrator::new(&map);
        let track = FlightTrack::at_height(0.0).unwrap();
        for k in (0..100).step_by(7) {
            let c = track.horizontal(k);
            for r in [10.0, 14.0, 15.5, 18.0, 21.0, 25.0] {
                assert_eq!(
                    it.integrate(c, r).unwrap().to_bits(),
                    it.integrate_all_samples(c, r).unwrap().to_bits()
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn windowed_matches_plain_loop(
            cx in -30.0..30.0f64, cy in -30.0..30.0f64, r in 0.2..40.0f64,
            bx in -8.0..8.0f64, by in -8.0..8.0f64, br in 0.3..4.0f64,
        ) {
            let g = RoiGrid::default();
            let map = render(&g, &[ShapeSpec::circle(br, (bx, by))]).unwrap();
            let it = CircleIntegrator::new(&map);
            prop_assert_eq!(
                it.integrate((cx, cy), r).unwrap().to_bits(),
                it.integrate_all_samples((cx, cy), r).unwrap().to_bits()
            );
        }
    }
}
