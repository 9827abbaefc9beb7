//! Sine-basis discretization of the Dirichlet Laplacian `A = -Δ` on intervals
//! and rectangles.
//!
//! Modal coefficients use the orthonormal convention
//! `φ_k(x) = Π_i sqrt(2/L_i) sin(k_i π x_i / L_i)`, so `A φ_k = λ_k φ_k` with
//! `λ_k = Σ_i (k_i π / L_i)²` and L² inner products are plain coefficient dot
//! products. Pointwise work happens on a padded interior grid
//! `x_j = j L / (M + 1)`, `j = 1..=M`, with `M = ceil(padding · N)` per axis.
//! The discrete sine transform on that grid is exact for every mode `k ≤ M`,
//! so a padding of 2 removes the aliasing of cubic products from the retained
//! band `k ≤ N`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Row-major dense matrix used for the separable transforms.
#[derive(Debug, Clone)]
struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    fn transposed_scaled(&self, s: f64) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| s * self.data[c * self.cols + r])
    }
}

/// Contract `op` against axis `axis` of a row-major tensor of shape `shape`.
fn contract_axis(data: &[f64], shape: &[usize], axis: usize, op: &DenseMat) -> (Vec<f64>, Vec<usize>) {
    debug_assert_eq!(shape[axis], op.cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n_in = shape[axis];
    let mut out = vec![0.0; outer * op.rows * inner];
    for o in 0..outer {
        let src = &data[o * n_in * inner..(o + 1) * n_in * inner];
        let dst = &mut out[o * op.rows * inner..(o + 1) * op.rows * inner];
        for r in 0..op.rows {
            let row = &op.data[r * op.cols..(r + 1) * op.cols];
            let d = &mut dst[r * inner..(r + 1) * inner];
            for (c, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let s = &src[c * inner..(c + 1) * inner];
                for (di, si) in d.iter_mut().zip(s) {
                    *di += w * si;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = op.rows;
    (out, new_shape)
}

fn apply_separable(data: &[f64], shape: &[usize], ops: &[&DenseMat]) -> Vec<f64> {
    let mut cur = data.to_vec();
    let mut cur_shape = shape.to_vec();
    for (axis, op) in ops.iter().enumerate() {
        let (next, next_shape) = contract_axis(&cur, &cur_shape, axis, op);
        cur = next;
        cur_shape = next_shape;
    }
    cur
}

/// Per-axis transform tables.
#[derive(Debug, Clone)]
struct Axis {
    length: f64,
    modes: usize,
    grid: usize,
    /// `k π / L` for `k = 1..=N`.
    wavenumbers: Vec<f64>,
    /// `sqrt(2/L) sin(k π x_j / L)`, shape `M × N`.
    synth: DenseMat,
    /// Discrete inverse of `synth`, shape `N × M`.
    analysis: DenseMat,
    /// x-derivative of the sine basis, shape `M × N`.
    synth_deriv: DenseMat,
    /// Orthonormal cosine basis `k = 0..=N`, shape `M × (N+1)`.
    synth_cos: DenseMat,
}

impl Axis {
    fn new(length: f64, modes: usize, grid: usize) -> Self {
        let h = length / (grid as f64 + 1.0);
        let amp = (2.0 / length).sqrt();
        let wavenumbers: Vec<f64> = (1..=modes).map(|k| k as f64 * PI / length).collect();
        let arg = |j: usize, k: usize| PI * ((j + 1) * k) as f64 / (grid as f64 + 1.0);
        let synth = DenseMat::from_fn(grid, modes, |j, k| amp * arg(j, k + 1).sin());
        let analysis = synth.transposed_scaled(h);
        let synth_deriv = DenseMat::from_fn(grid, modes, |j, k| amp * wavenumbers[k] * arg(j, k + 1).cos());
        let amp0 = (1.0 / length).sqrt();
        let synth_cos = DenseMat::from_fn(grid, modes + 1, |j, k| {
            if k == 0 {
                amp0
            } else {
                amp * arg(j, k).cos()
            }
        });
        Self {
            length,
            modes,
            grid,
            wavenumbers,
            synth,
            analysis,
            synth_deriv,
            synth_cos,
        }
    }

    fn nodes(&self) -> Vec<f64> {
        let h = self.length / (self.grid as f64 + 1.0);
        (1..=self.grid).map(|j| j as f64 * h).collect()
    }
}

/// Sine eigenbasis of the Dirichlet Laplacian on `(0, L_1) × … × (0, L_d)`.
pub struct Basis {
    padding: f64,
    axes: Vec<Axis>,
    eigenvalues: Vec<f64>,
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Basis")
            .field("lengths", &self.lengths())
            .field("modes", &self.modes())
            .field("padding", &self.padding)
            .field("grid", &self.grid())
            .finish()
    }
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.padding == other.padding && self.lengths() == other.lengths() && self.modes() == other.modes()
    }
}

/// Build a basis for `dim ∈ {1, 2}`.
pub fn make_basis(dim: usize, lengths: &[f64], modes: &[usize], padding: f64) -> Result<Arc<Basis>> {
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidBasis(format!("dimension {dim} not in {{1, 2}}")));
    }
    if lengths.len() != dim || modes.len() != dim {
        return Err(Error::InvalidBasis(format!(
            "expected {dim} lengths and modes, got {} and {}",
            lengths.len(),
            modes.len()
        )));
    }
    Basis::new(lengths, modes, padding)
}

impl Basis {
    pub fn new(lengths: &[f64], modes: &[usize], padding: f64) -> Result<Arc<Self>> {
        if lengths.is_empty() || lengths.len() > 2 || lengths.len() != modes.len() {
            return Err(Error::InvalidBasis("need one or two axes with matching modes".into()));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidBasis(format!("non-positive length {l}")));
        }
        if modes.contains(&0) {
            return Err(Error::InvalidBasis("mode count must be at least 1".into()));
        }
        if !(padding.is_finite() && padding >= 1.0) {
            return Err(Error::InvalidBasis(format!("padding {padding} < 1")));
        }
        let axes: Vec<Axis> = lengths
            .iter()
            .zip(modes)
            .map(|(&l, &n)| {
                let grid = ((padding * n as f64) - 1e-9).ceil().max(n as f64) as usize;
                Axis::new(l, n, grid)
            })
            .collect();
        let eigenvalues = match axes.as_slice() {
            [a] => a.wavenumbers.iter().map(|w| w * w).collect(),
            [a, b] => a
                .wavenumbers
                .iter()
                .flat_map(|wa| b.wavenumbers.iter().map(move |wb| wa * wa + wb * wb))
                .collect(),
            _ => unreachable!(),
        };
        Ok(Arc::new(Self {
            padding,
            axes,
            eigenvalues,
        }))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.length).collect()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.modes).collect()
    }

    pub fn padding(&self) -> f64 {
        self.padding
    }

    /// Interior nodal points per axis.
    pub fn grid(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.grid).collect()
    }

    /// Number of modal coefficients.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn nodal_len(&self) -> usize {
        self.axes.iter().map(|a| a.grid).product()
    }

    /// Eigenvalues in lexicographic multi-index order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// 1-based multi-index of the coefficient at flat position `idx`.
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        match self.axes.as_slice() {
            [_] => vec![idx + 1],
            [_, b] => vec![idx / b.modes + 1, idx % b.modes + 1],
            _ => unreachable!(),
        }
    }

    /// Flat position of a 1-based multi-index.
    pub fn flat_index(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.dim() || k.iter().zip(&self.axes).any(|(&ki, a)| ki == 0 || ki > a.modes) {
            return None;
        }
        Some(match self.axes.as_slice() {
            [_] => k[0] - 1,
            [_, b] => (k[0] - 1) * b.modes + (k[1] - 1),
            _ => unreachable!(),
        })
    }

    /// Wavenumbers `k π / L` along `axis`, `k = 1..=N`.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.axes[axis].wavenumbers
    }

    /// Interior grid coordinates along `axis`.
    pub fn nodes(&self, axis: usize) -> Vec<f64> {
        self.axes[axis].nodes()
    }

    /// Quadrature weight of one nodal cell (product of spacings).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length / (a.grid as f64 + 1.0)).product()
    }

    fn modal_shape(&self) -> Vec<usize> {
        self.modes()
    }

    fn flux_shape(&self, component: usize) -> Vec<usize> {
        let mut s = self.modes();
        s[component] += 1;
        s
    }

    /// Wavenumber `k_axis π / L_axis` for every entry of a flux component
    /// array (cosine index `0..=N` along `component`).
    fn flux_wavenumbers(&self, component: usize, axis: usize) -> Vec<f64> {
        let shape = self.flux_shape(component);
        let total: usize = shape.iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let a = &self.axes[axis];
        (0..total)
            .map(|i| {
                let ki = (i / inner) % shape[axis];
                if axis == component {
                    ki as f64 * PI / a.length
                } else {
                    (ki + 1) as f64 * PI / a.length
                }
            })
            .collect()
    }

    /// Map a flux-component flat index to the sine-field flat index with the
    /// same multi-index (`None` for a zero cosine index).
    fn flux_to_modal_index(&self, component: usize, i: usize) -> Option<usize> {
        let shape = self.flux_shape(component);
        match self.dim() {
            1 => (i > 0).then(|| i - 1),
            2 => {
                let (k0, k1) = (i / shape[1], i % shape[1]);
                let (m0, m1) = if component == 0 {
                    if k0 == 0 {
                        return None;
                    }
                    (k0 - 1, k1)
                } else {
                    if k1 == 0 {
                        return None;
                    }
                    (k0, k1 - 1)
                };
                Some(m0 * self.axes[1].modes + m1)
            }
            _ => unreachable!(),
        }
    }
}

fn ensure_same(a: &Arc<Basis>, b: &Arc<Basis>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::BasisMismatch)
    }
}

/// Modal coefficient vector on a [`Basis`].
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        *self.basis == *other.basis && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        Self {
            basis: basis.clone(),
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("modal coefficients"));
        }
        Ok(Self {
            basis: basis.clone(),
            coeffs,
        })
    }

    /// Single basis function with coefficient `value` at flat index `idx`.
    pub fn mode(basis: &Arc<Basis>, idx: usize, value: f64) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[idx] = value;
        f
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn same_basis(&self, other: &Self) -> Result<()> {
        ensure_same(&self.basis, &other.basis)
    }

    /// L² inner product (Parseval).
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.same_basis(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        self.same_basis(other)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
        Ok(())
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    /// Apply the diagonal multiplier `m(λ_k)`.
    pub fn map_eigen(&self, m: impl Fn(f64) -> f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(self.basis.eigenvalues())
                .map(|(c, &l)| c * m(l))
                .collect(),
        }
    }
}

/// Values on the padded interior tensor grid.
#[derive(Debug, Clone)]
pub struct NodalField {
    basis: Arc<Basis>,
    values: Vec<f64>,
}

impl NodalField {
    pub fn from_values(basis: &Arc<Basis>, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.nodal_len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} nodal values, got {}",
                basis.nodal_len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nodal values"));
        }
        Ok(Self {
            basis: basis.clone(),
            values,
        })
    }

    /// Sample `f(x)` at every grid point (`x` has `dim` coordinates).
    pub fn from_fn(basis: &Arc<Basis>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = match basis.dim() {
            1 => basis.nodes(0).iter().map(|&x| f(&[x])).collect(),
            2 => {
                let (xs, ys) = (basis.nodes(0), basis.nodes(1));
                xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| f(&[x, y])).collect()
            }
            _ => unreachable!(),
        };
        Self::from_values(basis, values)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Nodal samples of a modal field.
pub fn to_nodal(u: &SpectralField) -> NodalField {
    let b = &u.basis;
    let ops: Vec<&DenseMat> = b.axes.iter().map(|a| &a.synth).collect();
    NodalField {
        basis: b.clone(),
        values: apply_separable(&u.coeffs, &b.modal_shape(), &ops),
    }
}

/// Discrete sine transform projecting nodal values onto the retained modes.
pub fn to_modal(f: &NodalField) -> SpectralField {
    let b = &f.basis;
    let ops: Vec<&DenseMat> = b.axes.iter().map(|a| &a.analysis).collect();
    SpectralField {
        basis: b.clone(),
        coeffs: apply_separable(&f.values, &b.grid(), &ops),
    }
}

/// `A^s u`, exact diagonal action.
pub fn apply_a_power(u: &SpectralField, s: f64) -> SpectralField {
    if s == 1.0 {
        u.map_eigen(|l| l)
    } else if s == -1.0 {
        u.map_eigen(|l| 1.0 / l)
    } else {
        u.map_eigen(|l| l.powf(s))
    }
}

/// `I_γ = A^{-1} (γ + A^{-1})^{-1}`, multiplier `1 / (γλ + 1)`.
pub fn apply_igamma(u: &SpectralField, gamma: f64) -> Result<SpectralField> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(u.map_eigen(|l| 1.0 / (gamma * l + 1.0)))
}

/// `B = (α/γ) I_γ A`, multiplier `(α/γ) λ / (γλ + 1) ∈ (0, α/γ²]`.
pub fn apply_b(u: &SpectralField, alpha: f64, gamma: f64) -> Result<SpectralField> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(u.map_eigen(|l| alpha / gamma * l / (gamma * l + 1.0)))
}

/// Spectral gradient sampled on the padded grid, one field per axis.
pub fn gradient(u: &SpectralField) -> Vec<NodalField> {
    let b = &u.basis;
    (0..b.dim())
        .map(|i| {
            let ops: Vec<&DenseMat> = b
                .axes
                .iter()
                .enumerate()
                .map(|(d, a)| if d == i { &a.synth_deriv } else { &a.synth })
                .collect();
            NodalField {
                basis: b.clone(),
                values: apply_separable(&u.coeffs, &b.modal_shape(), &ops),
            }
        })
        .collect()
}

/// `( Σ_k (1+λ_k)^order |û_k|² )^{1/2}` for `order ∈ {0,1,2,3}`.
pub fn sobolev_norm(u: &SpectralField, order: u32) -> Result<f64> {
    if order > 3 {
        return Err(Error::Unsupported(format!("Sobolev order {order} (supported: 0..=3)")));
    }
    Ok(sobolev_norm_sq(u, order).sqrt())
}

pub(crate) fn sobolev_norm_sq(u: &SpectralField, order: u32) -> f64 {
    u.coeffs
        .iter()
        .zip(u.basis.eigenvalues())
        .map(|(c, &l)| (1.0 + l).powi(order as i32) * c * c)
        .sum()
}

/// Vector field in the mixed cosine/sine basis that the gradient of a sine
/// series lives in: component `i` expands in `cos(k_i π x_i / L_i)`,
/// `k_i = 0..=N_i` (orthonormal, the `k_i = 0` term is the constant) and in
/// sines along the other axes. Divergence maps it exactly onto the sine basis.
#[derive(Debug, Clone)]
pub struct FluxField {
    basis: Arc<Basis>,
    components: Vec<Vec<f64>>,
}

impl FluxField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        let components = (0..basis.dim())
            .map(|i| vec![0.0; basis.flux_shape(i).iter().product()])
            .collect();
        Self {
            basis: basis.clone(),
            components,
        }
    }

    pub fn from_components(basis: &Arc<Basis>, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != basis.dim() {
            return Err(Error::InvalidParameter("flux component count differs from dimension".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if c.len() != basis.flux_shape(i).iter().product::<usize>() {
                return Err(Error::InvalidParameter(format!("flux component {i} has wrong length")));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("flux coefficients"));
            }
        }
        Ok(Self {
            basis: basis.clone(),
            components,
        })
    }

    /// Exact gradient of a sine series.
    pub fn gradient_of(u: &SpectralField) -> Self {
        let b = u.basis.clone();
        let mut out = Self::zeros(&b);
        for i in 0..b.dim() {
            let wn = b.flux_wavenumbers(i, i);
            for (idx, c) in out.components[i].iter_mut().enumerate() {
                if let Some(m) = b.flux_to_modal_index(i, idx) {
                    *c = wn[idx] * u.coeffs[m];
                }
            }
        }
        out
    }

    /// Exact divergence, a sine series.
    pub fn divergence(&self) -> SpectralField {
        let b = &self.basis;
        let mut out = SpectralField::zeros(b);
        for (i, comp) in self.components.iter().enumerate() {
            let wn = b.flux_wavenumbers(i, i);
            for (idx, c) in comp.iter().enumerate() {
                if let Some(m) = b.flux_to_modal_index(i, idx) {
                    out.coeffs[m] -= wn[idx] * c;
                }
            }
        }
        out
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn to_nodal(&self) -> Vec<NodalField> {
        let b = &self.basis;
        (0..b.dim())
            .map(|i| {
                let ops: Vec<&DenseMat> = b
                    .axes
                    .iter()
                    .enumerate()
                    .map(|(d, a)| if d == i { &a.synth_cos } else { &a.synth })
                    .collect();
                NodalField {
                    basis: b.clone(),
                    values: apply_separable(&self.components[i], &b.flux_shape(i), &ops),
                }
            })
            .collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.components.iter().flatten().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        ensure_same(&self.basis, &other.basis)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(Self {
            basis: self.basis.clone(),
            components,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            components: self.components.iter().map(|c| c.iter().map(|v| s * v).collect()).collect(),
        }
    }

    /// Part with zero divergence: `q + ∇A⁻¹ div q`.
    pub fn solenoidal_part(&self) -> Self {
        let grad = Self::gradient_of(&apply_a_power(&self.divergence(), -1.0));
        self.lincomb(1.0, &grad, 1.0).expect("same basis")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(n: usize) -> Arc<Basis> {
        make_basis(1, &[1.0], &[n], 2.0).unwrap()
    }

    #[test]
    fn eigenvalues_closed_form() {
        let b = make_basis(1, &[1.0], &[4], 1.0).unwrap();
        for (k, l) in b.eigenvalues().iter().enumerate() {
            assert_relative_eq!(*l, ((k + 1) as f64 * PI).powi(2), max_relative = 1e-15);
        }
        let b = make_basis(2, &[1.0, 1.0], &[2, 2], 2.0).unwrap();
        assert_relative_eq!(b.eigenvalues()[0], 2.0 * PI * PI, max_relative = 1e-15);
        let b = make_basis(1, &[2.0], &[1], 2.0).unwrap();
        assert_relative_eq!(b.eigenvalues()[0], PI * PI / 4.0, max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_basis(1, &[0.0], &[4], 2.0).is_err());
        assert!(make_basis(1, &[-1.0], &[4], 2.0).is_err());
        assert!(make_basis(1, &[1.0], &[0], 2.0).is_err());
        assert!(make_basis(1, &[1.0], &[4], 0.5).is_err());
        assert!(make_basis(3, &[1.0; 3], &[4; 3], 2.0).is_err());
    }

    #[test]
    fn grid_size_follows_padding() {
        assert_eq!(make_basis(1, &[1.0], &[8], 2.0).unwrap().grid(), vec![16]);
        assert_eq!(make_basis(1, &[1.0], &[3], 1.5).unwrap().grid(), vec![5]);
        assert_eq!(make_basis(1, &[1.0], &[7], 1.0).unwrap().grid(), vec![7]);
    }

    #[test]
    fn unit_mode_samples_sine() {
        let b = line(8);
        let u = SpectralField::mode(&b, 0, 1.0);
        let f = to_nodal(&u);
        for (x, v) in b.nodes(0).iter().zip(f.values()) {
            assert!((v - 2f64.sqrt() * (PI * x).sin()).abs() < 1e-14);
        }
        let back = to_modal(&f);
        for (a, e) in back.coeffs().iter().zip(u.coeffs()) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_round_trip() {
        let b = make_basis(2, &[1.0, 2.0], &[3, 4], 2.0).unwrap();
        let z = SpectralField::zeros(&b);
        assert!(to_modal(&to_nodal(&z)).coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn power_calculus() {
        let b = line(6);
        let u = SpectralField::from_coeffs(&b, vec![1.0, -0.5, 0.25, 2.0, 0.0, 3.0]).unwrap();
        let a1 = apply_a_power(&SpectralField::mode(&b, 0, 1.0), 1.0);
        assert_relative_eq!(a1.coeffs()[0], PI * PI, max_relative = 1e-15);
        let back = apply_a_power(&apply_a_power(&u, -1.0), 1.0);
        let half = apply_a_power(&apply_a_power(&u, 0.5), 0.5);
        let full = apply_a_power(&u, 1.0);
        for i in 0..6 {
            assert_relative_eq!(back.coeffs()[i], u.coeffs()[i], max_relative = 1e-14, epsilon = 1e-300);
            assert_relative_eq!(half.coeffs()[i], full.coeffs()[i], max_relative = 1e-14, epsilon = 1e-300);
        }
    }

    #[test]
    fn igamma_and_b_multipliers() {
        let b = line(5);
        let e = SpectralField::mode(&b, 0, 1.0);
        assert_relative_eq!(
            apply_igamma(&e, 1.0).unwrap().coeffs()[0],
            1.0 / (PI * PI + 1.0),
            max_relative = 1e-15
        );
        let ones = SpectralField::from_coeffs(&b, vec![1.0; 5]).unwrap();
        let bm = apply_b(&ones, 1.0, 1.0).unwrap();
        let mut prev = 0.0;
        for (m, &l) in bm.coeffs().iter().zip(b.eigenvalues()) {
            assert_relative_eq!(*m, l / (l + 1.0), max_relative = 1e-15);
            assert!(*m > prev && *m < 1.0);
            prev = *m;
        }
        assert!(apply_igamma(&e, 0.0).is_err());
        assert!(apply_b(&e, 1.0, -1.0).is_err());
        // commutes with A^s
        let u = SpectralField::from_coeffs(&b, vec![0.3, -1.0, 2.0, 0.1, 5.0]).unwrap();
        let x = apply_b(&apply_a_power(&u, 0.75), 2.0, 0.3).unwrap();
        let y = apply_a_power(&apply_b(&u, 2.0, 0.3).unwrap(), 0.75);
        for (a, b) in x.coeffs().iter().zip(y.coeffs()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
    }

    #[test]
    fn gradient_matches_analytic() {
        let b = line(8);
        // z = sin(πx) has coefficient 1/√2 on φ_1
        let z = SpectralField::mode(&b, 0, 1.0 / 2f64.sqrt());
        let g = gradient(&z);
        for (x, v) in b.nodes(0).iter().zip(g[0].values()) {
            assert!((v - PI * (PI * x).cos()).abs() < 1e-13);
        }
        let b2 = make_basis(2, &[1.0, 1.0], &[4, 4], 2.0).unwrap();
        let z2 = SpectralField::mode(&b2, 0, 0.5);
        let g2 = gradient(&z2);
        let (xs, ys) = (b2.nodes(0), b2.nodes(1));
        let mut i = 0;
        for x in &xs {
            for y in &ys {
                assert!((g2[0].values()[i] - PI * (PI * x).cos() * (PI * y).sin()).abs() < 1e-13);
                assert!((g2[1].values()[i] - PI * (PI * x).sin() * (PI * y).cos()).abs() < 1e-13);
                i += 1;
            }
        }
        assert!(gradient(&SpectralField::zeros(&b2)).iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn sobolev_weights() {
        let b = line(4);
        let e = SpectralField::mode(&b, 0, 1.0);
        assert_relative_eq!(sobolev_norm(&e, 0).unwrap(), 1.0);
        assert_relative_eq!(sobolev_norm(&e, 2).unwrap(), 1.0 + PI * PI, max_relative = 1e-15);
        let two = SpectralField::from_coeffs(&b, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(sobolev_norm(&two, 0).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
        assert!(sobolev_norm(&e, 4).is_err());
    }

    #[test]
    fn parseval_on_unpadded_grid() {
        let b = make_basis(2, &[1.0, 0.7], &[5, 6], 1.0).unwrap();
        let coeffs: Vec<f64> = (0..b.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let u = SpectralField::from_coeffs(&b, coeffs).unwrap();
        let quad: f64 = to_nodal(&u).values().iter().map(|v| v * v).sum::<f64>() * b.cell_volume();
        let n0 = sobolev_norm(&u, 0).unwrap();
        assert_relative_eq!(quad, n0 * n0, max_relative = 1e-10);
    }

    #[test]
    fn flux_div_grad_is_minus_a() {
        let b = make_basis(2, &[1.0, 1.3], &[4, 3], 2.0).unwrap();
        let u = SpectralField::from_coeffs(&b, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let lap = FluxField::gradient_of(&u).divergence();
        let au = apply_a_power(&u, 1.0);
        for (x, y) in lap.coeffs().iter().zip(au.coeffs()) {
            assert_relative_eq!(*x, -y, max_relative = 1e-13);
        }
        // nodal flux evaluation agrees with the nodal gradient
        let gn = gradient(&u);
        let fn_ = FluxField::gradient_of(&u).to_nodal();
        for (a, c) in gn.iter().zip(&fn_) {
            for (x, y) in a.values().iter().zip(c.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solenoidal_part_is_divergence_free() {
        let b = make_basis(1, &[1.0], &[6], 2.0).unwrap();
        let q = FluxField::from_components(&b, vec![vec![0.5, 1.0, -2.0, 0.3, 0.0, 0.1, 0.7]]).unwrap();
        let s = q.solenoidal_part();
        assert!(s.divergence().max_abs() < 1e-13);
        // in 1D only the constant survives
        assert!(s.components()[0][1..].iter().all(|c| c.abs() < 1e-13));
        assert_relative_eq!(s.components()[0][0], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn mismatched_bases_rejected() {
        let a = SpectralField::zeros(&line(4));
        let b = SpectralField::zeros(&line(5));
        assert_eq!(a.dot(&b), Err(Error::BasisMismatch));
        // structurally equal bases are interchangeable
        let c = SpectralField::zeros(&line(4));
        assert!(a.dot(&c).is_ok());
    }
}
