//! Image formation by backprojection: every smoothed data value is spread
//! over the pixels lying on its ground circle (within `± tol`), each pixel is
//! averaged over the number of contributions it received, and the result is
//! rescaled to `[0, 1]`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::forward::{ground_circle_radius, RawSarData};
use crate::matrix::Matrix;
use crate::scene::RoiGrid;

pub const DEFAULT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BackprojectedImage {
    grid: RoiGrid,
    values: Matrix,
    tol: f64,
}

impl BackprojectedImage {
    pub fn grid(&self) -> &RoiGrid {
        &self.grid
    }

    /// Same orientation as [`crate::scene::ReflectivityMap`]: rows along `z1`.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Intensity-weighted centroid `(z1, z2)` of the brightest `fraction` of pixels.
    pub fn bright_centroid(&self, fraction: f64) -> (f64, f64) {
        let vals = self.values.as_slice();
        let mut sorted: Vec<f64> = vals.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let keep = ((vals.len() as f64 * fraction).ceil() as usize).clamp(1, vals.len());
        let threshold = sorted[keep - 1];
        let n = self.grid.n();
        let (mut s1, mut s2, mut w) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let v = self.values[(i, j)];
                if v >= threshold && v > 0.0 {
                    s1 += v * self.grid.coord(i);
                    s2 += v * self.grid.coord(j);
                    w += v;
                }
            }
        }
        if w == 0.0 {
            return (f64::NAN, f64::NAN);
        }
        (s1 / w, s2 / w)
    }
}

/// Backprojects smoothed raw data onto `grid`.
pub fn backproject(data: &RawSarData, grid: &RoiGrid, tol: f64) -> Result<BackprojectedImage> {
    if !data.is_smoothed() {
        return Err(Error::InvalidState("backprojection expects smoothed raw data".into()));
    }
    backproject_any(data, grid, tol)
}

/// Same as [`backproject`] but accepts unsmoothed data, for comparing the
/// effect of the smoothing window.
pub fn backproject_any(data: &RawSarData, grid: &RoiGrid, tol: f64) -> Result<BackprojectedImage> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let track = data.track();
    let axis = data.axis();
    let raw = data.values();

    // Ground radius per fast-time sample. Radii grow with t, so the reachable
    // samples form a suffix starting at `first`.
    let radii: Vec<Option<f64>> = (0..axis.len())
        .map(|i| ground_circle_radius(axis.value(i), track.height(), track.c0()))
        .collect();
    let first = radii.iter().position(Option::is_some).unwrap_or(radii.len());
    let reach: Vec<f64> = radii[first..].iter().map(|r| r.unwrap_or(0.0)).collect();

    let antennas: Vec<(f64, f64)> = (0..track.n_positions()).map(|k| track.horizontal(k)).collect();
    let coords = grid.coords();
    let n = grid.n();

    let mut image = Matrix::zeros(n, n);
    // Each pixel accumulates in (antenna, fast time) order regardless of
    // how rows are distributed over workers.
    image.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let z1 = coords[i];
        for (j, px) in row.iter_mut().enumerate() {
            let z2 = coords[j];
            let mut sum = 0.0;
            let mut count = 0u32;
            for (s, &(ax, ay)) in antennas.iter().enumerate() {
                let dx = z1 - ax;
                let dy = z2 - ay;
                let d = (dx * dx + dy * dy).sqrt();
                let lo = reach.partition_point(|&r| r < d - tol).saturating_sub(1);
                for (off, &r) in reach[lo..].iter().enumerate() {
                    if r > d + tol {
                        break;
                    }
                    if (d - r).abs() <= tol {
                        sum += raw[(first + lo + off, s)];
                        count += 1;
                    }
                }
            }
            *px = if count == 0 { 0.0 } else { sum / count as f64 };
        }
    });

    Ok(BackprojectedImage {
        grid: *grid,
        values: image.rescaled_unit(),
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{default_time_axis, simulate, smooth, FastTimeAxis, FlightTrack};
    use crate::scene::{render, ReflectivityMap, ShapeKind, ShapeSpec};

    fn smoothed_scene(shapes: &[ShapeSpec], h: f64) -> (RoiGrid, RawSarData) {
        let g = RoiGrid::default();
        let map = render(&g, shapes).unwrap();
        let track = FlightTrack::at_height(h).unwrap();
        let axis = default_time_axis(&track, &g, 100).unwrap();
        (g, smooth(&simulate(&map, &track, &axis).unwrap()).unwrap())
    }

    /// Direct transcription of the pixel loop: antennas outer, fast time inner.
    fn reference(data: &RawSarData, grid: &RoiGrid, tol: f64) -> Matrix {
        let n = grid.n();
        let mut img = Matrix::zeros(n, n);
        let mut cnt = Matrix::zeros(n, n);
        let track = data.track();
        for s in 0..track.n_positions() {
            let (ax, ay) = track.horizontal(s);
            for t in 0..data.axis().len() {
                let Some(r) = ground_circle_radius(data.axis().value(t), track.height(), track.c0()) else {
                    continue;
                };
                for i in 0..n {
                    for j in 0..n {
                        let dx = grid.coord(i) - ax;
                        let dy = grid.coord(j) - ay;
                        let d = (dx * dx + dy * dy).sqrt();
                        if (d - r).abs() <= tol {
                            img[(i, j)] += data.values()[(t, s)];
                            cnt[(i, j)] += 1.0;
                        }
                    }
                }
            }
        }
        let avg = Matrix::from_fn(n, n, |i, j| {
            if cnt[(i, j)] == 0.0 {
                0.0
            } else {
                img[(i, j)] / cnt[(i, j)]
            }
        });
        avg.rescaled_unit()
    }

    #[test]
    fn matches_direct_pixel_loop() {
        let (g, data) = smoothed_scene(&[ShapeSpec::circle(2.0, (4.0, 3.5))], 5.0);
        let fast = backproject(&data, &g, 0.1).unwrap();
        assert_eq!(fast.values(), &reference(&data, &g, 0.1));
    }

    #[test]
    fn zero_data_gives_zero_image() {
        let g = RoiGrid::default();
        let track = FlightTrack::at_height(5.0).unwrap();
        let axis = default_time_axis(&track, &g, 100).unwrap();
        let raw = simulate(&ReflectivityMap::zeros(g), &track, &axis).unwrap();
        let img = backproject(&smooth(&raw).unwrap(), &g, 0.1).unwrap();
        assert!(img.values().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_unsmoothed_and_bad_tolerance() {
        let g = RoiGrid::default();
        let track = FlightTrack::at_height(5.0).unwrap();
        let raw = simulate(&ReflectivityMap::zeros(g), &track, &FastTimeAxis::literal()).unwrap();
        assert!(backproject(&raw, &g, 0.1).is_err());
        let s = smooth(&raw).unwrap();
        assert!(backproject(&s, &g, 0.0).is_err());
        assert!(backproject(&s, &g, -1.0).is_err());
    }

    #[test]
    fn output_spans_unit_interval() {
        let (g, data) = smoothed_scene(&[ShapeSpec::circle(2.0, (5.0, 5.0))], 0.0);
        let img = backproject(&data, &g, 0.1).unwrap();
        let v = img.values();
        assert_eq!(v.min(), 0.0);
        assert_eq!(v.max(), 1.0);
        assert!(v.as_slice().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn tiny_tolerance_does_not_divide_by_zero() {
        let (g, data) = smoothed_scene(&[ShapeSpec::circle(2.0, (5.0, 5.0))], 0.0);
        let img = backproject(&data, &g, 1e-4).unwrap();
        assert!(img
            .values()
            .as_slice()
            .iter()
            .all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
    }

    #[test]
    fn locates_a_circular_bump() {
        let center = (4.3, 5.1);
        let (g, data) = smoothed_scene(&[ShapeSpec::circle(2.0, center)], 5.0);
        let img = backproject(&data, &g, 0.1).unwrap();
        let (c1, c2) = img.bright_centroid(0.05);
        let err = ((c1 - center.0).powi(2) + (c2 - center.1).powi(2)).sqrt();
        assert!(err <= 2.0 * g.spacing(), "centroid ({c1}, {c2}) off by {err}");
    }

    #[test]
    fn smoothing_reduces_intensity_off_the_support() {
        let g = RoiGrid::default();
        let square = ShapeSpec::new(ShapeKind::Square { side: 5.5 }, (5.0, -5.0));
        let map = render(&g, &[square]).unwrap();
        let track = FlightTrack::at_height(5.0).unwrap();
        // The fixed interval cuts the echoes off at t = 23, which is where
        // the unsmoothed reconstruction picks up its ring artifacts.
        let raw = simulate(&map, &track, &FastTimeAxis::literal()).unwrap();
        let plain = backproject_any(&raw, &g, 0.1).unwrap();
        let smoothed = backproject(&smooth(&raw).unwrap(), &g, 0.1).unwrap();
        // Support dilated by two grid spacings.
        let dilated = ShapeSpec::new(
            ShapeKind::Square {
                side: 5.5 + 4.0 * g.spacing(),
            },
            (5.0, -5.0),
        );
        let outside = |img: &BackprojectedImage| {
            let mut s = 0.0;
            for i in 0..g.n() {
                for j in 0..g.n() {
                    if !dilated.contains(g.coord(i), g.coord(j)) {
                        s += img.values()[(i, j)];
                    }
                }
            }
            s
        };
        let (a, b) = (outside(&smoothed), outside(&plain));
        assert!(a < b, "smoothed {a} vs unsmoothed {b}");
    }
}
