//! The finite dyadic grid on `[0,1)^d`, cube addressing, cell-constant
//! functions and the Haar system.
//!
//! Functions are dense vectors over the finest cells in row-major order over
//! the cell index vector. Every integral is a finite sum over cells times the
//! cell volume `2^{-Nd}`, so there is no quadrature error anywhere.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_grid, Error, Result};
use crate::weights::Weight;

pub const MAX_DEPTH_1D: u32 = 24;
pub const MAX_DEPTH_2D: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicGrid {
    dim: u32,
    depth: u32,
}

impl fmt::Display for DyadicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid(d={}, N={})", self.dim, self.depth)
    }
}

/// A dyadic cube `prod_i [k_i 2^{-j}, (k_i+1) 2^{-j})`.
///
/// For `d = 1` the second index component is always zero. The derived
/// ordering is level first, then row-major index order, which is the scan
/// order used everywhere determinism matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: [u32; 2],
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[j={} k=({},{})]", self.level, self.index[0], self.index[1])
    }
}

impl DyadicCube {
    pub const ROOT: DyadicCube = DyadicCube {
        level: 0,
        index: [0, 0],
    };

    pub fn new_1d(level: u32, k: u32) -> Self {
        DyadicCube { level, index: [k, 0] }
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        self.ancestor(1)
    }

    /// The `t`-fold parent `Q^{(t)}`; `None` when `t > level`.
    pub fn ancestor(&self, t: u32) -> Option<DyadicCube> {
        if t > self.level {
            return None;
        }
        Some(DyadicCube {
            level: self.level - t,
            index: [self.index[0] >> t, self.index[1] >> t],
        })
    }

    /// Inclusion `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.level < self.level {
            return false;
        }
        let t = other.level - self.level;
        other.index[0] >> t == self.index[0] && other.index[1] >> t == self.index[1]
    }

    pub fn strictly_contains(&self, other: &DyadicCube) -> bool {
        other.level > self.level && self.contains(other)
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// Smallest dyadic cube containing both.
    pub fn common_ancestor(&self, other: &DyadicCube) -> DyadicCube {
        let mut a = *self;
        let mut b = *other;
        while a.level > b.level {
            a = a.parent().expect("level > 0");
        }
        while b.level > a.level {
            b = b.parent().expect("level > 0");
        }
        while a != b {
            a = a.parent().expect("distinct cubes share the root");
            b = b.parent().expect("distinct cubes share the root");
        }
        a
    }

    /// Side length `2^{-j}`.
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }
}

impl DyadicGrid {
    pub fn new(dim: u32, depth: u32) -> Result<Self> {
        let max = match dim {
            1 => MAX_DEPTH_1D,
            2 => MAX_DEPTH_2D,
            _ => return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}"))),
        };
        if depth == 0 || depth > max {
            return Err(Error::Config(format!(
                "depth must lie in 1..={max} for d={dim}, got {depth}"
            )));
        }
        Ok(DyadicGrid { dim, depth })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn cell_count(&self) -> usize {
        1usize << (self.depth * self.dim)
    }

    /// Volume of one finest cell, `2^{-Nd}`.
    pub fn cell_volume(&self) -> f64 {
        (-((self.depth * self.dim) as f64)).exp2()
    }

    pub fn cubes_at_level(&self, level: u32) -> usize {
        1usize << (level * self.dim)
    }

    pub fn cube_count(&self) -> usize {
        (0..=self.depth).map(|j| self.cubes_at_level(j)).sum()
    }

    pub fn child_count(&self) -> usize {
        1usize << self.dim
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::ROOT
    }

    /// Lebesgue measure `|Q| = 2^{-jd}`.
    pub fn volume(&self, q: DyadicCube) -> f64 {
        (-((q.level * self.dim) as f64)).exp2()
    }

    /// Number of finest cells inside `q`.
    pub fn cells_in(&self, q: DyadicCube) -> usize {
        1usize << ((self.depth - q.level) * self.dim)
    }

    pub fn local_index(&self, q: DyadicCube) -> usize {
        match self.dim {
            1 => q.index[0] as usize,
            _ => ((q.index[0] as usize) << q.level) | q.index[1] as usize,
        }
    }

    pub fn cube_at(&self, level: u32, local: usize) -> DyadicCube {
        match self.dim {
            1 => DyadicCube::new_1d(level, local as u32),
            _ => {
                let side = 1usize << level;
                DyadicCube {
                    level,
                    index: [(local / side) as u32, (local % side) as u32],
                }
            }
        }
    }

    /// Position of `q` in the level-by-level enumeration of all cubes.
    pub fn global_index(&self, q: DyadicCube) -> usize {
        let offset: usize = (0..q.level).map(|j| self.cubes_at_level(j)).sum();
        offset + self.local_index(q)
    }

    pub fn is_valid(&self, q: DyadicCube) -> bool {
        let side = 1u64 << q.level;
        q.level <= self.depth
            && (q.index[0] as u64) < side
            && if self.dim == 1 {
                q.index[1] == 0
            } else {
                (q.index[1] as u64) < side
            }
    }

    pub fn level_cubes(&self, level: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..self.cubes_at_level(level)).map(move |i| self.cube_at(level, i))
    }

    /// All cubes, level by level, row-major within each level.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.depth).flat_map(move |j| self.level_cubes(j))
    }

    /// All cubes contained in `top`, level by level.
    pub fn cubes_within(&self, top: DyadicCube) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.depth - top.level).flat_map(move |t| self.subcubes(top, t))
    }

    /// The `2^{td}` subcubes of `q` at level `level(q) + t`, row-major.
    pub fn subcubes(&self, q: DyadicCube, t: u32) -> impl Iterator<Item = DyadicCube> {
        debug_assert!(q.level + t <= self.depth);
        let dim = self.dim;
        let side = 1u32 << t;
        let count = 1usize << (t * dim);
        (0..count).map(move |s| {
            let s = s as u32;
            match dim {
                1 => DyadicCube::new_1d(q.level + t, (q.index[0] << t) + s),
                _ => DyadicCube {
                    level: q.level + t,
                    index: [(q.index[0] << t) + s / side, (q.index[1] << t) + s % side],
                },
            }
        })
    }

    /// Row-major position of the subcube `sub ⊆ q` among the subcubes of
    /// `q` at the level of `sub`.
    pub fn subcube_offset(&self, q: DyadicCube, sub: DyadicCube) -> usize {
        let t = sub.level - q.level;
        let mask = (1u32 << t) - 1;
        match self.dim {
            1 => (sub.index[0] & mask) as usize,
            _ => (((sub.index[0] & mask) as usize) << t) | (sub.index[1] & mask) as usize,
        }
    }

    pub fn children(&self, q: DyadicCube) -> Result<impl Iterator<Item = DyadicCube>> {
        if q.level >= self.depth {
            return Err(Error::FinestLevel(q));
        }
        Ok(self.subcubes(q, 1))
    }

    /// Contiguous runs of finest-cell indices covering `q`.
    pub fn cell_rows(&self, q: DyadicCube) -> impl Iterator<Item = Range<usize>> {
        let shift = self.depth - q.level;
        let side = 1usize << shift;
        let width = 1usize << self.depth;
        let (rows, row0, col0) = match self.dim {
            1 => (1, 0, (q.index[0] as usize) << shift),
            _ => (side, (q.index[0] as usize) << shift, (q.index[1] as usize) << shift),
        };
        (0..rows).map(move |r| {
            let base = (row0 + r) * width + col0;
            base..base + side
        })
    }

    /// Runs of cells of `sub ⊆ q` in the row-major cell layout local to `q`.
    pub fn local_rows(&self, q: DyadicCube, sub: DyadicCube) -> impl Iterator<Item = Range<usize>> {
        debug_assert!(q.contains(&sub));
        let side = 1usize << (self.depth - q.level);
        let k = 1usize << (self.depth - sub.level);
        let t = sub.level - q.level;
        let mask = (1usize << t) - 1;
        let (rows, row0, col0) = match self.dim {
            1 => (1, 0, (sub.index[0] as usize & mask) * k),
            _ => (
                k,
                (sub.index[0] as usize & mask) * k,
                (sub.index[1] as usize & mask) * k,
            ),
        };
        (0..rows).map(move |r| {
            let base = (row0 + r) * side + col0;
            base..base + k
        })
    }

    /// Finest-cell indices covering `q`, in row-major order.
    pub fn cells(&self, q: DyadicCube) -> impl Iterator<Item = usize> {
        self.cell_rows(q).flatten()
    }

    /// The finest-level cube of a cell index.
    pub fn cell_cube(&self, cell: usize) -> DyadicCube {
        self.cube_at(self.depth, cell)
    }
}

/// Integrals `∫_Q f dx` for every cube, stored per level in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSums {
    levels: Vec<Vec<f64>>,
}

impl CubeSums {
    /// Aggregates cell values bottom-up with a fixed summation order.
    pub fn from_cells(grid: &DyadicGrid, values: &[f64]) -> Self {
        let depth = grid.depth() as usize;
        let h = grid.cell_volume();
        let mut levels = vec![Vec::new(); depth + 1];
        levels[depth] = values.iter().map(|v| v * h).collect();
        for j in (0..depth).rev() {
            let fine = &levels[j + 1];
            let mut coarse = vec![0.0; grid.cubes_at_level(j as u32)];
            match grid.dim() {
                1 => {
                    for (k, c) in coarse.iter_mut().enumerate() {
                        *c = fine[2 * k] + fine[2 * k + 1];
                    }
                }
                _ => {
                    let side = 1usize << j;
                    let fine_side = side << 1;
                    for r in 0..side {
                        for c in 0..side {
                            let a = 2 * r * fine_side + 2 * c;
                            let b = a + fine_side;
                            coarse[r * side + c] = fine[a] + fine[a + 1] + fine[b] + fine[b + 1];
                        }
                    }
                }
            }
            levels[j] = coarse;
        }
        CubeSums { levels }
    }

    pub fn get(&self, grid: &DyadicGrid, q: DyadicCube) -> f64 {
        self.levels[q.level as usize][grid.local_index(q)]
    }

    pub fn level(&self, level: u32) -> &[f64] {
        &self.levels[level as usize]
    }

    pub fn total(&self) -> f64 {
        self.levels[0][0]
    }
}

/// A real function constant on the finest cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: DyadicGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Config(format!(
                "{grid} needs {} cell values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: DyadicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: DyadicGrid, value: f64) -> Self {
        GridFunction {
            grid,
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn indicator(grid: DyadicGrid, q: DyadicCube) -> Self {
        let mut f = Self::zeros(grid);
        for i in grid.cells(q) {
            f.values[i] = 1.0;
        }
        f
    }

    /// Builds a function from a per-cell closure receiving the cell index.
    pub fn from_fn(grid: DyadicGrid, f: impl FnMut(usize) -> f64) -> Self {
        GridFunction {
            grid,
            values: (0..grid.cell_count()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn integral_over(&self, q: DyadicCube) -> f64 {
        let sum: f64 = self.grid.cell_rows(q).map(|r| self.values[r].iter().sum::<f64>()).sum();
        sum * self.grid.cell_volume()
    }

    pub fn average_over(&self, q: DyadicCube) -> f64 {
        self.integral_over(q) / self.grid.volume(q)
    }

    pub fn cube_sums(&self) -> CubeSums {
        CubeSums::from_cells(&self.grid, &self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &GridFunction, s: f64) -> Result<Self> {
        ensure_same_grid(self.grid, other.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        })
    }

    pub fn pointwise_mul(&self, other: &GridFunction) -> Result<Self> {
        ensure_same_grid(self.grid, other.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Restriction `1_Q f`.
    pub fn restricted(&self, q: DyadicCube) -> Self {
        let mut out = Self::zeros(self.grid);
        for r in self.grid.cell_rows(q) {
            out.values[r.clone()].copy_from_slice(&self.values[r]);
        }
        out
    }
}

/// The measure an integral is taken against.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    Lebesgue,
    Weighted(&'a Weight),
}

impl Measure<'_> {
    pub fn grid(&self) -> Option<DyadicGrid> {
        match self {
            Measure::Lebesgue => None,
            Measure::Weighted(w) => Some(w.grid()),
        }
    }

    /// Density value on a finest cell.
    pub fn density(&self, cell: usize) -> f64 {
        match self {
            Measure::Lebesgue => 1.0,
            Measure::Weighted(w) => w.values()[cell],
        }
    }

    /// Measure of a cube.
    pub fn mass(&self, grid: &DyadicGrid, q: DyadicCube) -> f64 {
        match self {
            Measure::Lebesgue => grid.volume(q),
            Measure::Weighted(w) => w.mass(q),
        }
    }

    pub(crate) fn check_grid(&self, grid: DyadicGrid) -> Result<()> {
        match self.grid() {
            Some(g) => ensure_same_grid(g, grid),
            None => Ok(()),
        }
    }

    /// Cell densities as a dense vector (all ones for Lebesgue).
    pub fn densities(&self, grid: &DyadicGrid) -> Vec<f64> {
        match self {
            Measure::Lebesgue => vec![1.0; grid.cell_count()],
            Measure::Weighted(w) => w.values().to_vec(),
        }
    }
}

/// `∫ f g dμ` as an exact sum over finest cells.
pub fn inner_product(f: &GridFunction, g: &GridFunction, mu: Measure<'_>) -> Result<f64> {
    ensure_same_grid(f.grid, g.grid)?;
    mu.check_grid(f.grid)?;
    let sum: f64 = match mu {
        Measure::Lebesgue => f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum(),
        Measure::Weighted(w) => f
            .values
            .iter()
            .zip(&g.values)
            .zip(w.values())
            .map(|((a, b), m)| a * b * m)
            .sum(),
    };
    Ok(sum * f.grid.cell_volume())
}

/// A Haar function on `Q`: constant on the children of `Q`, mean zero, with
/// sup-norm at most `|Q|^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarFunction {
    pub cube: DyadicCube,
    /// Value on each child, in row-major child order.
    pub child_values: Vec<f64>,
}

impl HaarFunction {
    pub fn sup_norm(&self) -> f64 {
        self.child_values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_grid_function(&self, grid: &DyadicGrid) -> GridFunction {
        let mut f = GridFunction::zeros(*grid);
        for (child, v) in grid.subcubes(self.cube, 1).zip(&self.child_values) {
            for r in grid.cell_rows(child) {
                f.values[r].fill(*v);
            }
        }
        f
    }

    /// `⟨f, h⟩` from the child integrals of `f`.
    pub fn pair(&self, grid: &DyadicGrid, sums: &CubeSums) -> f64 {
        grid.subcubes(self.cube, 1)
            .zip(&self.child_values)
            .map(|(c, v)| v * sums.get(grid, c))
            .sum()
    }
}

/// The orthonormal Haar functions of `Q`: `2^d - 1` functions ordered by the
/// sign pattern bitmask `m = 1 .. 2^d - 1`, with value
/// `(-1)^{popcount(m & c)} |Q|^{-1/2}` on child `c`.
pub fn haar_basis(grid: &DyadicGrid, q: DyadicCube) -> Result<Vec<HaarFunction>> {
    if q.level >= grid.depth() {
        return Err(Error::FinestLevel(q));
    }
    let scale = grid.volume(q).sqrt().recip();
    let children = grid.child_count();
    Ok((1..children)
        .map(|mask| HaarFunction {
            cube: q,
            child_values: (0..children)
                .map(|c| {
                    if (mask & c).count_ones() % 2 == 0 {
                        scale
                    } else {
                        -scale
                    }
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = DyadicGrid::new(1, 3).unwrap();
        assert_eq!(g.cell_count(), 8);
        assert_eq!(g.cube_count(), 15);
        let g = DyadicGrid::new(2, 1).unwrap();
        assert_eq!(g.cell_count(), 4);
        assert_eq!(g.cube_count(), 5);
        assert_eq!(DyadicGrid::new(1, 12).unwrap().cell_count(), 4096);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(DyadicGrid::new(3, 2).is_err());
        assert!(DyadicGrid::new(1, 0).is_err());
        assert!(DyadicGrid::new(1, 25).is_err());
        assert!(DyadicGrid::new(2, 13).is_err());
        assert!(DyadicGrid::new(2, 12).is_ok());
    }

    #[test]
    fn parent_child_round_trip() {
        for dim in [1, 2] {
            let g = DyadicGrid::new(dim, 4).unwrap();
            for q in g.cubes().filter(|q| q.level < 4) {
                let kids: Vec<_> = g.children(q).unwrap().collect();
                assert_eq!(kids.len(), g.child_count());
                let total: f64 = kids.iter().map(|c| g.volume(*c)).sum();
                assert_eq!(total, g.volume(q));
                for c in kids {
                    assert_eq!(c.parent(), Some(q));
                    assert!(q.strictly_contains(&c));
                    assert_eq!(g.subcube_offset(q, c), g.subcube_offset(q, c) % g.child_count());
                }
            }
        }
    }

    #[test]
    fn ancestors_and_indices() {
        let g = DyadicGrid::new(2, 3).unwrap();
        let q = DyadicCube {
            level: 3,
            index: [5, 2],
        };
        assert_eq!(q.ancestor(3), Some(DyadicCube::ROOT));
        assert_eq!(q.ancestor(4), None);
        assert_eq!(q.ancestor(1).unwrap().level, 2);
        let mut seen = vec![false; g.cube_count()];
        for c in g.cubes() {
            let id = g.global_index(c);
            assert!(!seen[id]);
            seen[id] = true;
            assert_eq!(g.cube_at(c.level, g.local_index(c)), c);
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn cells_tile_each_level() {
        for dim in [1, 2] {
            let g = DyadicGrid::new(dim, 3).unwrap();
            for j in 0..=3 {
                let mut hit = vec![0u8; g.cell_count()];
                for q in g.level_cubes(j) {
                    for c in g.cells(q) {
                        hit[c] += 1;
                        assert!(q.contains(&g.cell_cube(c)));
                    }
                }
                assert!(hit.iter().all(|&h| h == 1));
            }
        }
    }

    #[test]
    fn cube_sums_match_direct_integrals() {
        let g = DyadicGrid::new(2, 3).unwrap();
        let f = GridFunction::from_fn(g, |i| (i as f64).sin() + 2.0);
        let sums = f.cube_sums();
        for q in g.cubes() {
            assert!((sums.get(&g, q) - f.integral_over(q)).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_examples() {
        let g = DyadicGrid::new(1, 3).unwrap();
        let h = haar_basis(&g, DyadicCube::ROOT).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].child_values, vec![1.0, -1.0]);
        let q = DyadicCube::new_1d(2, 2);
        assert_eq!(haar_basis(&g, q).unwrap()[0].sup_norm(), 2.0);
        assert!(matches!(
            haar_basis(&g, DyadicCube::new_1d(3, 0)),
            Err(Error::FinestLevel(_))
        ));
    }

    #[test]
    fn haar_orthonormal_in_two_dimensions() {
        let g = DyadicGrid::new(2, 3).unwrap();
        for q in g.cubes().filter(|q| q.level < 3) {
            let basis: Vec<_> = haar_basis(&g, q)
                .unwrap()
                .iter()
                .map(|h| h.to_grid_function(&g))
                .collect();
            assert_eq!(basis.len(), 3);
            for (a, fa) in basis.iter().enumerate() {
                assert!(fa.integral().abs() < 1e-12);
                for (b, fb) in basis.iter().enumerate() {
                    let ip = inner_product(fa, fb, Measure::Lebesgue).unwrap();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-12, "{q} {a} {b} {ip}");
                }
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let g = DyadicGrid::new(1, 4).unwrap();
        let one = GridFunction::constant(g, 1.0);
        assert_eq!(inner_product(&one, &one, Measure::Lebesgue).unwrap(), 1.0);
        let h = haar_basis(&g, DyadicCube::new_1d(1, 1)).unwrap()[0].to_grid_function(&g);
        assert!((inner_product(&h, &h, Measure::Lebesgue).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(inner_product(&h, &one, Measure::Lebesgue).unwrap(), 0.0);
        let other = GridFunction::zeros(DyadicGrid::new(1, 3).unwrap());
        assert!(matches!(
            inner_product(&h, &other, Measure::Lebesgue),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn haar_completeness_reconstructs() {
        let g = DyadicGrid::new(1, 6).unwrap();
        let f = GridFunction::from_fn(g, |i| ((i * 37 % 11) as f64) - 3.5 + (i as f64).cos());
        let sums = f.cube_sums();
        let mut rec = GridFunction::constant(g, f.integral());
        for q in g.cubes().filter(|q| q.level < 6) {
            for h in haar_basis(&g, q).unwrap() {
                let c = h.pair(&g, &sums);
                rec = rec.add_scaled(&h.to_grid_function(&g), c).unwrap();
            }
        }
        let err = rec.add_scaled(&f, -1.0).unwrap().sup_norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn common_ancestor_is_minimal() {
        let a = DyadicCube::new_1d(4, 5);
        let b = DyadicCube::new_1d(3, 3);
        let c = a.common_ancestor(&b);
        assert!(c.contains(&a) && c.contains(&b));
        assert_eq!(c, DyadicCube::new_1d(2, 1));
        assert_eq!(a.common_ancestor(&a), a);
    }

    #[test]
    fn local_rows_match_global_cells() {
        for (dim, n) in [(1, 5), (2, 4)] {
            let g = DyadicGrid::new(dim, n).unwrap();
            let q = g.cube_at(1, 1);
            let local: Vec<usize> = g.cells(q).collect();
            for t in 0..=(n - 1) {
                for sub in g.subcubes(q, t) {
                    let via_local: Vec<usize> = g.local_rows(q, sub).flatten().map(|i| local[i]).collect();
                    assert_eq!(via_local, g.cells(sub).collect::<Vec<_>>());
                }
            }
        }
    }
}
