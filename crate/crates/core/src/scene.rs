//! Region of interest and binary reflectivity maps.
//!
//! Map storage is row-major with the row index running along `z1` and the
//! column index along `z2`, so `values[(i, j)]` is the reflectivity at
//! `(z1_i, z2_j)`.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Square grid of `n × n` points spanning `[z_min, z_max]²`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiGrid {
    z_min: f64,
    z_max: f64,
    n: usize,
}

impl RoiGrid {
    pub fn new(z_min: f64, z_max: f64, n: usize) -> Result<Self> {
        if !(z_min.is_finite() && z_max.is_finite()) || z_min >= z_max {
            return Err(invalid(format!(
                "grid extent must satisfy z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 points per axis, got {n}")));
        }
        Ok(Self { z_min, z_max, n })
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        (self.z_max - self.z_min) / (self.n - 1) as f64
    }

    /// Coordinate of grid index `i`; exact at both endpoints.
    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            return self.z_max;
        }
        self.z_min + (self.z_max - self.z_min) * i as f64 / (self.n - 1) as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

impl Default for RoiGrid {
    fn default() -> Self {
        Self {
            z_min: -10.0,
            z_max: 10.0,
            n: 100,
        }
    }
}

/// Parametric bump shapes. Boundaries are closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    /// Disk of the given radius.
    Circle { radius: f64 },
    /// Axis-aligned square with the given side length.
    Square { side: f64 },
    /// Axis-aligned ellipse; `a` is the semi-axis along `z1`, `b` along `z2`.
    Ellipse { a: f64, b: f64 },
    /// `|dz1| + |dz2| <= d`, i.e. `d` is the center-to-vertex distance.
    Rhombus { half_diagonal: f64 },
}

impl ShapeKind {
    fn parameters(&self) -> Vec<f64> {
        match *self {
            ShapeKind::Circle { radius } => vec![radius],
            ShapeKind::Square { side } => vec![side],
            ShapeKind::Ellipse { a, b } => vec![a, b],
            ShapeKind::Rhombus { half_diagonal } => vec![half_diagonal],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Circle { .. } => "circle",
            ShapeKind::Square { .. } => "square",
            ShapeKind::Ellipse { .. } => "ellipse",
            ShapeKind::Rhombus { .. } => "rhombus",
        }
    }

    /// Exact area of the continuous set.
    pub fn area(&self) -> f64 {
        match *self {
            ShapeKind::Circle { radius } => std::f64::consts::PI * radius * radius,
            ShapeKind::Square { side } => side * side,
            ShapeKind::Ellipse { a, b } => std::f64::consts::PI * a * b,
            ShapeKind::Rhombus { half_diagonal } => 2.0 * half_diagonal * half_diagonal,
        }
    }

    /// Half-widths of the axis-aligned bounding box.
    fn half_extent(&self) -> (f64, f64) {
        match *self {
            ShapeKind::Circle { radius } => (radius, radius),
            ShapeKind::Square { side } => (side / 2.0, side / 2.0),
            ShapeKind::Ellipse { a, b } => (a, b),
            ShapeKind::Rhombus { half_diagonal } => (half_diagonal, half_diagonal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub center: (f64, f64),
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, center: (f64, f64)) -> Self {
        Self { kind, center }
    }

    pub fn circle(radius: f64, center: (f64, f64)) -> Self {
        Self::new(ShapeKind::Circle { radius }, center)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center.0.is_finite() && self.center.1.is_finite()) {
            return Err(invalid(format!("{} center must be finite", self.kind.name())));
        }
        for p in self.kind.parameters() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(invalid(format!(
                    "{} size parameters must be positive, got {p}",
                    self.kind.name()
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, z1: f64, z2: f64) -> bool {
        let d1 = z1 - self.center.0;
        let d2 = z2 - self.center.1;
        match self.kind {
            ShapeKind::Circle { radius } => d1 * d1 + d2 * d2 <= radius * radius,
            ShapeKind::Square { side } => d1.abs() <= side / 2.0 && d2.abs() <= side / 2.0,
            ShapeKind::Ellipse { a, b } => (d1 * d1) / (a * a) + (d2 * d2) / (b * b) <= 1.0,
            ShapeKind::Rhombus { half_diagonal } => d1.abs() + d2.abs() <= half_diagonal,
        }
    }

    /// `(z1_lo, z1_hi, z2_lo, z2_hi)` of the axis-aligned bounding box.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (h1, h2) = self.kind.half_extent();
        (
            self.center.0 - h1,
            self.center.0 + h1,
            self.center.1 - h2,
            self.center.1 + h2,
        )
    }
}

/// Non-negative scene reflectivity sampled on a [`RoiGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityMap {
    grid: RoiGrid,
    values: Matrix,
}

impl ReflectivityMap {
    pub fn zeros(grid: RoiGrid) -> Self {
        Self {
            grid,
            values: Matrix::zeros(grid.n(), grid.n()),
        }
    }

    /// Accepts any finite, non-negative map of the grid's size.
    pub fn from_values(grid: RoiGrid, values: Matrix) -> Result<Self> {
        if values.rows() != grid.n() || values.cols() != grid.n() {
            return Err(Error::ShapeMismatch(format!(
                "reflectivity map is {}x{}, grid is {}x{}",
                values.rows(),
                values.cols(),
                grid.n(),
                grid.n()
            )));
        }
        if let Some(v) = values.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!(
                "reflectivity values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &RoiGrid {
        &self.grid
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Number of pixels with nonzero reflectivity.
    pub fn support_count(&self) -> usize {
        self.values.as_slice().iter().filter(|&&v| v != 0.0).count()
    }

    /// Support area estimate `count · Δ²`.
    pub fn support_area(&self) -> f64 {
        let d = self.grid.spacing();
        self.support_count() as f64 * d * d
    }

    /// Index-space bounding box `(i_lo, i_hi, j_lo, j_hi)` of the nonzero pixels.
    pub fn support_box(&self) -> Option<(usize, usize, usize, usize)> {
        let n = self.grid.n();
        let mut bx: Option<(usize, usize, usize, usize)> = None;
        for i in 0..n {
            for (j, &v) in self.values.row(i).iter().enumerate() {
                if v != 0.0 {
                    bx = Some(match bx {
                        None => (i, i, j, j),
                        Some((a, b, c, d)) => (a.min(i), b.max(i), c.min(j), d.max(j)),
                    });
                }
            }
        }
        bx
    }

    /// Elementwise maximum of two maps on the same grid.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, f64::max)
    }

    /// Elementwise sum of two maps on the same grid.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_values(self.grid, self.values.map(|v| v * factor))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("maps live on different grids".into()));
        }
        let data = self
            .values
            .as_slice()
            .iter()
            .zip(other.values.as_slice())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid, Matrix::from_vec(self.grid.n(), self.grid.n(), data))
    }
}

/// What [`render_with`] does with a shape that covers no grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyShapePolicy {
    #[default]
    Warn,
    Reject,
}

pub fn render(grid: &RoiGrid, shapes: &[ShapeSpec]) -> Result<ReflectivityMap> {
    render_with(grid, shapes, EmptyShapePolicy::default())
}

/// Characteristic function of the union of `shapes`, evaluated at the grid
/// coordinates. Overlaps saturate at 1.
pub fn render_with(grid: &RoiGrid, shapes: &[ShapeSpec], policy: EmptyShapePolicy) -> Result<ReflectivityMap> {
    if shapes.is_empty() {
        return Err(invalid("render needs at least one shape"));
    }
    for s in shapes {
        s.validate()?;
    }
    let coords = grid.coords();
    let n = grid.n();
    let mut values = Matrix::zeros(n, n);
    for shape in shapes {
        let mut hits = 0usize;
        for (i, &z1) in coords.iter().enumerate() {
            for (j, &z2) in coords.iter().enumerate() {
                if shape.contains(z1, z2) {
                    values[(i, j)] = 1.0;
                    hits += 1;
                }
            }
        }
        if hits == 0 {
            let msg = format!(
                "{} at ({}, {}) covers no grid point",
                shape.kind.name(),
                shape.center.0,
                shape.center.1
            );
            match policy {
                EmptyShapePolicy::Warn => log::warn!("{msg}"),
                EmptyShapePolicy::Reject => return Err(invalid(msg)),
            }
        }
    }
    Ok(ReflectivityMap { grid: *grid, values })
}

/// Draws a center with both coordinates independent and uniform on `[lo, hi]`.
pub fn sample_center<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> Result<(f64, f64)> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(invalid(format!("center range must satisfy lo <= hi, got [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok((lo, lo));
    }
    let z1 = rng.gen_range(lo..=hi);
    let z2 = rng.gen_range(lo..=hi);
    Ok((z1, z2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn circle_at_45(r: f64) -> ShapeSpec {
        ShapeSpec::circle(r, (4.5, 4.5))
    }

    fn index_of(grid: &RoiGrid, z: f64) -> usize {
        ((z - grid.z_min()) / grid.spacing()).round() as usize
    }

    #[test]
    fn grid_defaults_and_endpoints() {
        let g = RoiGrid::default();
        assert_eq!(g.n(), 100);
        assert_eq!(g.coord(0), -10.0);
        assert_eq!(g.coord(99), 10.0);
        assert!((g.spacing() - 20.0 / 99.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_extent() {
        assert!(RoiGrid::new(1.0, 1.0, 10).is_err());
        assert!(RoiGrid::new(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn circle_center_is_inside_and_far_corner_is_not() {
        // Grid whose points hit (4.5, 4.5) and (-10, -10) exactly.
        let g = RoiGrid::new(-10.0, 10.0, 81).unwrap();
        let map = render(&g, &[circle_at_45(2.0)]).unwrap();
        let c = index_of(&g, 4.5);
        assert_eq!(g.coord(c), 4.5);
        assert_eq!(map.get(c, c), 1.0);
        assert_eq!(map.get(0, 0), 0.0);
    }

    #[test]
    fn disk_area_within_five_percent() {
        let g = RoiGrid::default();
        let map = render(&g, &[circle_at_45(2.0)]).unwrap();
        let exact = std::f64::consts::PI * 4.0;
        assert!(
            (map.support_area() - exact).abs() / exact < 0.05,
            "{}",
            map.support_area()
        );
    }

    #[test]
    fn values_are_binary() {
        let g = RoiGrid::default();
        let shapes = [
            ShapeSpec::new(ShapeKind::Square { side: 5.5 }, (4.0, 4.0)),
            ShapeSpec::new(ShapeKind::Ellipse { a: 1.5, b: 3.0 }, (5.0, 3.0)),
        ];
        let map = render(&g, &shapes).unwrap();
        assert!(map.values().as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        let g = RoiGrid::default();
        assert!(render(&g, &[]).is_err());
        assert!(render(&g, &[ShapeSpec::circle(0.0, (0.0, 0.0))]).is_err());
        assert!(render(
            &g,
            &[ShapeSpec::new(ShapeKind::Ellipse { a: 1.0, b: -1.0 }, (0.0, 0.0))]
        )
        .is_err());
    }

    #[test]
    fn empty_shape_policy() {
        let g = RoiGrid::default();
        let outside = [ShapeSpec::circle(1.0, (50.0, 50.0))];
        let map = render(&g, &outside).unwrap();
        assert_eq!(map.support_count(), 0);
        assert!(render_with(&g, &outside, EmptyShapePolicy::Reject).is_err());
    }

    #[test]
    fn area_converges_with_resolution() {
        // Lattice counting error of a single placement fluctuates, so compare
        // the mean error over many placements.
        let kinds = [
            ShapeKind::Circle { radius: 2.0 },
            ShapeKind::Square { side: 5.5 },
            ShapeKind::Rhombus { half_diagonal: 3.0 },
            ShapeKind::Ellipse { a: 1.5, b: 3.0 },
        ];
        let mut rng = seeded(21);
        let centers: Vec<(f64, f64)> = (0..24).map(|_| sample_center(-5.0, 5.0, &mut rng).unwrap()).collect();
        for kind in kinds {
            let mean_err = |n| {
                let g = RoiGrid::new(-10.0, 10.0, n).unwrap();
                let total: f64 = centers
                    .iter()
                    .map(|&c| {
                        let m = render(&g, &[ShapeSpec::new(kind, c)]).unwrap();
                        (m.support_area() - kind.area()).abs()
                    })
                    .sum();
                total / centers.len() as f64
            };
            let coarse = mean_err(100);
            let fine = mean_err(400);
            assert!(fine <= coarse / 2.0, "{}: {coarse} -> {fine}", kind.name());
        }
    }

    #[test]
    fn sample_center_degenerate_and_bounds() {
        let mut rng = seeded(1);
        assert_eq!(sample_center(4.0, 4.0, &mut rng).unwrap(), (4.0, 4.0));
        assert!(sample_center(6.0, 3.0, &mut rng).is_err());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let (a, b) = sample_center(3.0, 6.0, &mut rng).unwrap();
            lo = lo.min(a.min(b));
            hi = hi.max(a.max(b));
        }
        assert!(lo >= 3.0 && hi <= 6.0);
    }

    #[test]
    fn sample_center_is_seed_deterministic() {
        let a = sample_center(3.0, 6.0, &mut seeded(42)).unwrap();
        let b = sample_center(3.0, 6.0, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
    }

    fn arb_shape() -> impl Strategy<Value = ShapeSpec> {
        let center = (-9.0..9.0f64, -9.0..9.0f64);
        prop_oneof![
            (0.3..5.0f64, center.clone()).prop_map(|(r, c)| ShapeSpec::circle(r, c)),
            (0.3..6.0f64, center.clone()).prop_map(|(s, c)| ShapeSpec::new(ShapeKind::Square { side: s }, c)),
            (0.3..4.0f64, 0.3..4.0f64, center.clone())
                .prop_map(|(a, b, c)| ShapeSpec::new(ShapeKind::Ellipse { a, b }, c)),
            (0.3..4.0f64, center).prop_map(|(d, c)| ShapeSpec::new(ShapeKind::Rhombus { half_diagonal: d }, c)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn render_is_idempotent(shapes in prop::collection::vec(arb_shape(), 1..4)) {
            let g = RoiGrid::default();
            let a = render(&g, &shapes).unwrap();
            let b = render(&g, &shapes).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn render_of_union_is_elementwise_max(
            a in prop::collection::vec(arb_shape(), 1..3),
            b in prop::collection::vec(arb_shape(), 1..3),
        ) {
            let g = RoiGrid::default();
            let both: Vec<_> = a.iter().chain(b.iter()).copied().collect();
            let joint = render(&g, &both).unwrap();
            let separate = render(&g, &a).unwrap().union(&render(&g, &b).unwrap()).unwrap();
            prop_assert_eq!(joint, separate);
        }
    }
}
