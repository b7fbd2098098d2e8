//! Lattice fields on a 2D torus and the second-order neighbourhood system.
//!
//! Every site has exactly eight neighbours: the 3x3 window around it minus
//! the centre, with indices wrapped at the edges. Patches are that window
//! flattened row-major, so the site itself sits at position 4 and the
//! neighbours occupy positions `0..4` and `5..9`.

use crate::error::{GmrfError, Result};

/// Row/column offsets of the eight neighbours in row-major window order.
const SECOND_ORDER_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Patch positions (0..9) that hold neighbours, in the same order as the
/// offsets.
pub const NEIGHBOR_POSITIONS: [usize; 8] = [0, 1, 2, 3, 5, 6, 7, 8];

/// Patch position of the centre site.
pub const CENTER_POSITION: usize = 4;

/// Number of entries of a patch (centre plus neighbours).
pub const PATCH_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborhoodOrder {
    /// The eight nearest sites of the 3x3 window.
    #[default]
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NeighborhoodSpec {
    order: NeighborhoodOrder,
}

impl NeighborhoodSpec {
    pub const fn second_order() -> Self {
        NeighborhoodSpec {
            order: NeighborhoodOrder::SecondOrder,
        }
    }

    pub fn order(&self) -> NeighborhoodOrder {
        self.order
    }

    /// Number of neighbours of every site (Δ).
    pub fn delta(&self) -> usize {
        match self.order {
            NeighborhoodOrder::SecondOrder => SECOND_ORDER_OFFSETS.len(),
        }
    }

    pub fn offsets(&self) -> &'static [(isize, isize); 8] {
        match self.order {
            NeighborhoodOrder::SecondOrder => &SECOND_ORDER_OFFSETS,
        }
    }

    /// Largest |β| the sampler accepts without the unstable override.
    pub fn stability_bound(&self) -> f64 {
        1.0 / self.delta() as f64
    }
}

#[inline]
fn wrap(i: usize, d: isize, n: usize) -> usize {
    (i as isize + d).rem_euclid(n as isize) as usize
}

/// Site indices of the 3x3 toroidal window around every site, row-major
/// over sites. Entry 4 of each window is the site itself.
pub fn patch_index_table(height: usize, width: usize) -> Vec<[usize; PATCH_LEN]> {
    let mut table = Vec::with_capacity(height * width);
    for row in 0..height {
        for col in 0..width {
            let mut window = [0usize; PATCH_LEN];
            let mut k = 0;
            for dr in -1..=1isize {
                let r = wrap(row, dr, height);
                for dc in -1..=1isize {
                    window[k] = r * width + wrap(col, dc, width);
                    k += 1;
                }
            }
            table.push(window);
        }
    }
    table
}

/// Neighbour site indices of every site, in offset order.
pub fn neighbor_index_table(height: usize, width: usize) -> Vec<[usize; 8]> {
    patch_index_table(height, width)
        .into_iter()
        .map(|w| NEIGHBOR_POSITIONS.map(|p| w[p]))
        .collect()
}

fn check_shape(height: usize, width: usize) -> Result<()> {
    if height < 3 || width < 3 {
        return Err(GmrfError::InvalidField(format!(
            "lattice must be at least 3x3, got {height}x{width}"
        )));
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(GmrfError::InvalidField(format!(
            "non-finite value at index {i}"
        )));
    }
    Ok(())
}

/// A scalar field on an H x W torus, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(height, width)?;
        if values.len() != height * width {
            return Err(GmrfError::InvalidField(format!(
                "expected {} values for a {height}x{width} lattice, got {}",
                height * width,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(LatticeField {
            height,
            width,
            values,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of sites n = H·W.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Result<f64> {
        self.check_site(row, col)?;
        Ok(self.values[row * self.width + col])
    }

    fn check_site(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.height || col >= self.width {
            return Err(GmrfError::IndexError {
                row,
                col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    /// The Δ neighbour values of a site in offset order, wrapping at the
    /// edges.
    pub fn neighbors(&self, row: usize, col: usize, spec: &NeighborhoodSpec) -> Result<Vec<f64>> {
        self.check_site(row, col)?;
        Ok(spec
            .offsets()
            .iter()
            .map(|&(dr, dc)| {
                let r = wrap(row, dr, self.height);
                let c = wrap(col, dc, self.width);
                self.values[r * self.width + c]
            })
            .collect())
    }

    /// One patch per site, row-major over sites.
    pub fn extract_patches(&self, _spec: &NeighborhoodSpec) -> Vec<Patch> {
        patch_index_table(self.height, self.width)
            .iter()
            .map(|w| Patch {
                dim: 1,
                entries: w.iter().map(|&s| self.values[s]).collect(),
            })
            .collect()
    }

    /// Returns a copy with every value passed through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn to_multi(&self) -> MultiLatticeField {
        MultiLatticeField {
            height: self.height,
            width: self.width,
            dim: 1,
            values: self.values.clone(),
        }
    }
}

/// A field of d-vectors on an H x W torus. Values are site-major with the
/// d components of each site contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLatticeField {
    height: usize,
    width: usize,
    dim: usize,
    values: Vec<f64>,
}

impl MultiLatticeField {
    pub fn new(height: usize, width: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(height, width)?;
        if dim == 0 {
            return Err(GmrfError::InvalidField(
                "dimension must be at least 1".into(),
            ));
        }
        if values.len() != height * width * dim {
            return Err(GmrfError::InvalidField(format!(
                "expected {} values for a {height}x{width}x{dim} field, got {}",
                height * width * dim,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(MultiLatticeField {
            height,
            width,
            dim,
            values,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width * dim);
        for r in 0..height {
            for c in 0..width {
                let v = f(r, c);
                if v.len() != dim {
                    return Err(GmrfError::InvalidField(format!(
                        "site ({r}, {c}) has {} components, expected {dim}",
                        v.len()
                    )));
                }
                values.extend(v);
            }
        }
        Self::new(height, width, dim, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sites n = H·W.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn site(&self, row: usize, col: usize) -> Result<&[f64]> {
        self.check_site(row, col)?;
        let s = (row * self.width + col) * self.dim;
        Ok(&self.values[s..s + self.dim])
    }

    fn check_site(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.height || col >= self.width {
            return Err(GmrfError::IndexError {
                row,
                col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    pub fn neighbors(
        &self,
        row: usize,
        col: usize,
        spec: &NeighborhoodSpec,
    ) -> Result<Vec<Vec<f64>>> {
        self.check_site(row, col)?;
        Ok(spec
            .offsets()
            .iter()
            .map(|&(dr, dc)| {
                let s = wrap(row, dr, self.height) * self.width + wrap(col, dc, self.width);
                self.values[s * self.dim..(s + 1) * self.dim].to_vec()
            })
            .collect())
    }

    /// One patch per site; each patch has 9·d entries, position-major.
    pub fn extract_patches(&self, _spec: &NeighborhoodSpec) -> Vec<Patch> {
        let d = self.dim;
        patch_index_table(self.height, self.width)
            .iter()
            .map(|w| {
                let mut entries = Vec::with_capacity(PATCH_LEN * d);
                for &s in w {
                    entries.extend_from_slice(&self.values[s * d..(s + 1) * d]);
                }
                Patch { dim: d, entries }
            })
            .collect()
    }

    /// Extracts component `k` as a scalar field.
    pub fn component(&self, k: usize) -> Result<LatticeField> {
        if k >= self.dim {
            return Err(GmrfError::InvalidField(format!(
                "component {k} out of range for dimension {}",
                self.dim
            )));
        }
        LatticeField::new(
            self.height,
            self.width,
            self.values
                .iter()
                .skip(k)
                .step_by(self.dim)
                .copied()
                .collect(),
        )
    }

    /// Returns the scalar field when d = 1.
    pub fn to_scalar(&self) -> Option<LatticeField> {
        (self.dim == 1).then(|| LatticeField {
            height: self.height,
            width: self.width,
            values: self.values.clone(),
        })
    }
}

/// The 3x3 window around a site, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    dim: usize,
    entries: Vec<f64>,
}

impl Patch {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Values at window position `k` (0..9).
    pub fn position(&self, k: usize) -> &[f64] {
        &self.entries[k * self.dim..(k + 1) * self.dim]
    }

    pub fn center(&self) -> &[f64] {
        self.position(CENTER_POSITION)
    }
}
