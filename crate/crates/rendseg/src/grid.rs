//! Dense 2D grids with bilinear sampling, 2x upsampling, and point scatter.
//!
//! Coordinate convention used across the crate: a point is a normalized
//! `(x, y)` pair in `[0, 1]^2` where `x` maps to columns and `y` to rows.
//! Cell `(row i, col j)` has its center at `((j + 0.5) / width, (i + 0.5) / height)`
//! (align-corners-false). Queries outside the outer cell-center hull clamp
//! to the border value.

use crate::error::{Error, Result};

/// Dense `height x width x channels` grid of finite f64 values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Grid2D {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("grid dimensions must be >= 1"));
        }
        if values.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "grid value count {} != {}x{}x{}",
                values.len(),
                height,
                width,
                channels
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid contains non-finite values"));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
            .expect("zero grid is always valid")
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width && ch < self.channels);
        self.values[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width && ch < self.channels);
        self.values[(row * self.width + col) * self.channels + ch] = value;
    }

    /// Channel vector at one cell.
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let base = (row * self.width + col) * self.channels;
        &self.values[base..base + self.channels]
    }

    /// Normalized coordinates of the center of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) / self.width as f64,
            (row as f64 + 0.5) / self.height as f64,
        )
    }
}

/// List of continuous normalized `(x, y)` coordinates in `[0, 1]^2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSet {
    points: Vec<(f64, f64)>,
}

impl PointSet {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, y) in &points {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::invalid("non-finite point coordinate"));
            }
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::invalid(format!(
                    "point ({x}, {y}) outside the unit square"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied()
    }

    pub fn as_slice(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Bilinear sample of `grid` at every point, one channel vector per point.
pub fn bilinear_sample(grid: &Grid2D, points: &PointSet) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|(x, y)| bilinear_sample_one(grid, x, y))
        .collect()
}

/// Bilinear sample at a single normalized point.
pub fn bilinear_sample_one(grid: &Grid2D, x: f64, y: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::invalid("non-finite sample coordinate"));
    }
    let (w, h) = (grid.width as f64, grid.height as f64);
    // Continuous cell-index coordinates: cell center (i, j) sits at (j, i).
    let fx = x * w - 0.5;
    let fy = y * h - 0.5;

    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;

    let clamp_col = |j: f64| (j.max(0.0) as usize).min(grid.width - 1);
    let clamp_row = |i: f64| (i.max(0.0) as usize).min(grid.height - 1);
    let (c0, c1) = (clamp_col(x0), clamp_col(x0 + 1.0));
    let (r0, r1) = (clamp_row(y0), clamp_row(y0 + 1.0));

    let mut out = Vec::with_capacity(grid.channels);
    for ch in 0..grid.channels {
        let v00 = grid.get(r0, c0, ch);
        let v01 = grid.get(r0, c1, ch);
        let v10 = grid.get(r1, c0, ch);
        let v11 = grid.get(r1, c1, ch);
        let top = v00 + tx * (v01 - v00);
        let bottom = v10 + tx * (v11 - v10);
        out.push(top + ty * (bottom - top));
    }
    Ok(out)
}

/// Bilinear 2x upsample: output cell values are bilinear samples of the
/// input at the output cell centers.
pub fn upsample2x(grid: &Grid2D) -> Grid2D {
    let (h2, w2) = (grid.height * 2, grid.width * 2);
    let mut values = Vec::with_capacity(h2 * w2 * grid.channels);
    for i in 0..h2 {
        let y = (i as f64 + 0.5) / h2 as f64;
        for j in 0..w2 {
            let x = (j as f64 + 0.5) / w2 as f64;
            let v = bilinear_sample_one(grid, x, y).expect("cell center is finite");
            values.extend_from_slice(&v);
        }
    }
    Grid2D::new(h2, w2, grid.channels, values).expect("upsample preserves validity")
}

/// Index of the cell whose center is nearest to normalized coordinate `t`
/// along an axis with `n` cells. Ties break toward the smaller index.
pub fn nearest_cell(t: f64, n: usize) -> usize {
    // Cell centers sit at integer positions of t*n - 0.5; the midpoint
    // between centers k and k+1 is at t*n = k+1, which must go to k.
    let idx = (t * n as f64 - 1.0).ceil();
    (idx.max(0.0) as usize).min(n - 1)
}

/// Overwrite, for each point, the single nearest cell with the given channel
/// vector. All other cells are unchanged.
pub fn scatter_points(grid: &Grid2D, points: &PointSet, values: &[Vec<f64>]) -> Result<Grid2D> {
    if points.len() != values.len() {
        return Err(Error::invalid(format!(
            "scatter: {} points but {} values",
            points.len(),
            values.len()
        )));
    }
    let mut out = grid.clone();
    for ((x, y), value) in points.iter().zip(values) {
        if value.len() != grid.channels {
            return Err(Error::invalid(format!(
                "scatter: value has {} channels, grid has {}",
                value.len(),
                grid.channels
            )));
        }
        let col = nearest_cell(x, grid.width);
        let row = nearest_cell(y, grid.height);
        for (ch, &v) in value.iter().enumerate() {
            out.set(row, col, ch, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_2x2() -> Grid2D {
        Grid2D::new(2, 2, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn constant_grid_samples_constant() {
        let g = Grid2D::constant(3, 5, 1, 3.0).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (0.123, 0.987)] {
            assert_eq!(bilinear_sample_one(&g, x, y).unwrap(), vec![3.0]);
        }
    }

    #[test]
    fn center_of_2x2_averages_four_cells() {
        let g = grid_2x2();
        assert_eq!(bilinear_sample_one(&g, 0.5, 0.5).unwrap(), vec![1.5]);
    }

    #[test]
    fn fractional_offset_matches_hand_evaluation() {
        // Point (0.75, 0.25) on a 2x2 grid: fx = 0.75*2 - 0.5 = 1.0 (on the
        // right cell center column), fy = 0.25*2 - 0.5 = 0.0 (top row).
        // So the sample is exactly cell (0, 1) = 1.0.
        let g = grid_2x2();
        assert_eq!(bilinear_sample_one(&g, 0.75, 0.25).unwrap(), vec![1.0]);

        // A genuinely fractional point: (0.625, 0.875) -> fx = 0.75, fy = 1.25.
        // x interpolates 3/4 toward col 1, y clamps rows to (1, 1):
        // bottom row only: 2 + 0.75*(3-2) = 2.75.
        let got = bilinear_sample_one(&g, 0.625, 0.875).unwrap()[0];
        assert!((got - 2.75).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn sample_at_cell_center_is_exact() {
        let g = Grid2D::new(3, 4, 2, (0..24).map(|v| v as f64).collect()).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let (x, y) = g.cell_center(i, j);
                let s = bilinear_sample_one(&g, x, y).unwrap();
                assert_eq!(s, g.cell(i, j));
            }
        }
    }

    #[test]
    fn border_clamping() {
        let g = grid_2x2();
        // Corner (0,0) is outside the cell-center hull; clamps to cell (0,0).
        assert_eq!(bilinear_sample_one(&g, 0.0, 0.0).unwrap(), vec![0.0]);
        assert_eq!(bilinear_sample_one(&g, 1.0, 1.0).unwrap(), vec![3.0]);
    }

    #[test]
    fn non_finite_point_rejected() {
        let g = grid_2x2();
        assert!(bilinear_sample_one(&g, f64::NAN, 0.5).is_err());
        assert!(PointSet::new(vec![(f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn upsample_1x1_extends_constant() {
        let g = Grid2D::new(1, 1, 1, vec![7.5]).unwrap();
        let up = upsample2x(&g);
        assert_eq!((up.height(), up.width()), (2, 2));
        assert!(up.values().iter().all(|&v| v == 7.5));
    }

    #[test]
    fn upsample_matches_per_cell_bilinear_oracle() {
        let g = grid_2x2();
        let up = upsample2x(&g);
        assert_eq!((up.height(), up.width()), (4, 4));
        for i in 0..4 {
            for j in 0..4 {
                let (x, y) = up.cell_center(i, j);
                let expect = bilinear_sample_one(&g, x, y).unwrap()[0];
                assert_eq!(up.get(i, j, 0), expect);
            }
        }
    }

    #[test]
    fn scatter_empty_is_noop() {
        let g = grid_2x2();
        let out = scatter_points(&g, &PointSet::empty(), &[]).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn scatter_writes_exact_cell() {
        let g = Grid2D::zeros(4, 4, 1);
        let pts = PointSet::new(vec![(0.125, 0.125)]).unwrap();
        let out = scatter_points(&g, &pts, &[vec![7.0]]).unwrap();
        assert_eq!(out.get(0, 0, 0), 7.0);
        assert_eq!(out.values().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn scatter_tie_breaks_to_smaller_index() {
        // x = 0.25 on a 4-wide grid sits exactly between cols 0 and 1.
        let g = Grid2D::zeros(4, 4, 1);
        let pts = PointSet::new(vec![(0.25, 0.25)]).unwrap();
        let out = scatter_points(&g, &pts, &[vec![5.0]]).unwrap();
        assert_eq!(out.get(0, 0, 0), 5.0);
    }

    #[test]
    fn scatter_length_mismatch_rejected() {
        let g = grid_2x2();
        let pts = PointSet::new(vec![(0.5, 0.5)]).unwrap();
        assert!(scatter_points(&g, &pts, &[]).is_err());
    }

    #[test]
    fn scatter_then_sample_at_centers_returns_values() {
        let g = Grid2D::zeros(3, 3, 1);
        let centers = PointSet::new(vec![g.cell_center(1, 2), g.cell_center(0, 0)]).unwrap();
        let vals = vec![vec![4.0], vec![-2.0]];
        let out = scatter_points(&g, &centers, &vals).unwrap();
        let back = bilinear_sample(&out, &centers).unwrap();
        assert_eq!(back, vals);
    }
}
