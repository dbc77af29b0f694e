//! Grid-sampled scalar and form fields on the flat torus ℂⁿ/(ℤ+iℤ)ⁿ.
//!
//! The torus is sampled on a uniform periodic grid with N points per real
//! coordinate axis (2n axes in total, interleaved as x_1, y_1, …, x_n, y_n,
//! all in [0, 1)). Differentiation is discrete Fourier differentiation with
//! ∂/∂z_j = ½(∂_{x_j} − i ∂_{y_j}) and ∂/∂z̄_j = ½(∂_{x_j} + i ∂_{y_j}),
//! exact on trigonometric polynomials of degree below N/2. Integration of a
//! top form is the grid mean of its density against dV_n times ∫ dV_n = 2ⁿ.

use crate::error::{Error, Result};
use crate::multi_index::{binomial, merge_sign, rank_of, subsets};
use crate::pointwise::{wedge_table, PQForm};
use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Soft cap on total grid points (all channels share one grid).
pub const MAX_POINTS: usize = 1 << 20;

/// Uniform periodic sampling of the torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
    points_per_axis: usize,
}

impl TorusGrid {
    pub fn new(n: usize, points_per_axis: usize) -> Result<Self> {
        if n == 0 || n > crate::pointwise::MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "complex dimension {n} outside 1..=4"
            )));
        }
        if points_per_axis < 4 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 4, got {points_per_axis}"
            )));
        }
        match points_per_axis.checked_pow(2 * n as u32) {
            Some(t) if t <= MAX_POINTS => Ok(Self { n, points_per_axis }),
            _ => Err(Error::InvalidGrid(format!(
                "grid {points_per_axis}^{} exceeds the {MAX_POINTS}-point budget",
                2 * n
            ))),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points_per_axis; 2 * self.n]
    }

    pub fn num_points(&self) -> usize {
        self.points_per_axis.pow(2 * self.n as u32)
    }

    /// Real coordinates (x_1, y_1, …, x_n, y_n) of a grid multi-index.
    pub fn coords(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .map(|&i| i as f64 / self.points_per_axis as f64)
            .collect()
    }
}

fn finite(data: &ArrayD<Complex64>) -> bool {
    data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// In-place FFT pass along one axis; `forward = false` includes the 1/N
/// normalization.
fn axis_fft(data: &mut ArrayD<Complex64>, axis: usize, forward: bool) {
    let len = data.shape()[axis];
    let mut planner = FftPlanner::new();
    let fft = if forward {
        planner.plan_fft_forward(len)
    } else {
        planner.plan_fft_inverse(len)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let norm = 1.0 / len as f64;
    for mut lane in data.lanes_mut(Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        if forward {
            for (v, b) in lane.iter_mut().zip(&buf) {
                *v = *b;
            }
        } else {
            for (v, b) in lane.iter_mut().zip(&buf) {
                *v = b * norm;
            }
        }
    }
}

/// Signed integer frequency of FFT bin `t`; the Nyquist bin counts as zero
/// so odd-order derivatives of real fields stay real.
pub(crate) fn frequency(t: usize, len: usize) -> f64 {
    if 2 * t == len {
        0.0
    } else if 2 * t < len {
        t as f64
    } else {
        t as f64 - len as f64
    }
}

/// Spectral d/dθ along one real axis with period 1.
fn axis_derivative(data: &ArrayD<Complex64>, axis: usize) -> ArrayD<Complex64> {
    let len = data.shape()[axis];
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let scratch_len = fwd
        .get_inplace_scratch_len()
        .max(inv.get_inplace_scratch_len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
    let multipliers: Vec<Complex64> = (0..len)
        .map(|t| Complex64::new(0.0, TAU * frequency(t, len)))
        .collect();
    let norm = 1.0 / len as f64;
    let mut out = data.clone();
    for mut lane in out.lanes_mut(Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fwd.process_with_scratch(&mut buf, &mut scratch);
        for (b, m) in buf.iter_mut().zip(&multipliers) {
            *b *= m;
        }
        inv.process_with_scratch(&mut buf, &mut scratch);
        for (v, b) in lane.iter_mut().zip(&buf) {
            *v = b * norm;
        }
    }
    out
}

/// ∂/∂z_j of raw grid data.
fn dz_derivative(data: &ArrayD<Complex64>, j: usize) -> ArrayD<Complex64> {
    let mut out = axis_derivative(data, 2 * j);
    let dy = axis_derivative(data, 2 * j + 1);
    out.zip_mut_with(&dy, |a, b| *a = 0.5 * (*a - Complex64::i() * b));
    out
}

/// ∂/∂z̄_j of raw grid data.
fn dzbar_derivative(data: &ArrayD<Complex64>, j: usize) -> ArrayD<Complex64> {
    let mut out = axis_derivative(data, 2 * j);
    let dy = axis_derivative(data, 2 * j + 1);
    out.zip_mut_with(&dy, |a, b| *a = 0.5 * (*a + Complex64::i() * b));
    out
}

/// Forward FFT over every axis (unnormalized).
pub(crate) fn fft_all(data: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    let mut out = data.clone();
    for axis in 0..data.ndim() {
        axis_fft(&mut out, axis, true);
    }
    out
}

/// Inverse FFT over every axis (normalized).
pub(crate) fn ifft_all(data: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    let mut out = data.clone();
    for axis in 0..data.ndim() {
        axis_fft(&mut out, axis, false);
    }
    out
}

/// Complex scalar field sampled on the torus grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: TorusGrid,
    data: ArrayD<Complex64>,
}

impl ScalarField {
    pub fn zero(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            data: ArrayD::zeros(IxDyn(&grid.shape())),
        }
    }

    pub fn constant(grid: &TorusGrid, value: Complex64) -> Self {
        Self {
            grid: grid.clone(),
            data: ArrayD::from_elem(IxDyn(&grid.shape()), value),
        }
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut data = ArrayD::zeros(IxDyn(&grid.shape()));
        for (idx, v) in data.indexed_iter_mut() {
            *v = f(&grid.coords(idx.slice()));
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn from_data(grid: &TorusGrid, data: ArrayD<Complex64>) -> Result<Self> {
        if data.shape() != grid.shape().as_slice() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn data(&self) -> &ArrayD<Complex64> {
        &self.data
    }

    pub fn check_grid(&self, other: &TorusGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn value_at(&self, flat: usize) -> Complex64 {
        self.data.as_slice().expect("standard layout")[flat]
    }

    pub fn mean(&self) -> Complex64 {
        self.data.sum() / self.grid.num_points() as f64
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn realness_residual(&self) -> f64 {
        self.data.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.realness_residual() <= tol * self.sup_abs().max(1.0)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.mapv(f),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    /// Pointwise e^{field}; used for metric weights.
    pub fn exp(&self) -> Self {
        self.map(|c| c.exp())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.map(|c| c * factor)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(&other.grid)?;
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, b| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(&other.grid)?;
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, b| *a -= b);
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_grid(&other.grid)?;
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, b| *a *= b);
        Ok(out)
    }

    /// Pointwise division; errors on a vanishing denominator.
    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_grid(&other.grid)?;
        if other.data.iter().any(|c| c.norm() < 1e-300) {
            return Err(Error::ZeroVolumeForm);
        }
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, b| *a /= b);
        Ok(out)
    }

    /// ∂/∂z_j of the scalar values (no form factor attached).
    pub fn dz(&self, j: usize) -> Result<Self> {
        if !finite(&self.data) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            grid: self.grid.clone(),
            data: dz_derivative(&self.data, j),
        })
    }

    /// ∂/∂z̄_j of the scalar values.
    pub fn dzbar(&self, j: usize) -> Result<Self> {
        if !finite(&self.data) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            grid: self.grid.clone(),
            data: dzbar_derivative(&self.data, j),
        })
    }

    pub fn as_form(&self) -> FormField {
        FormField {
            grid: self.grid.clone(),
            p: 0,
            q: 0,
            channels: vec![self.data.clone()],
        }
    }

    /// ∂ of the scalar, a (1,0)-form field.
    pub fn d(&self) -> Result<FormField> {
        self.as_form().d()
    }

    /// ∂̄ of the scalar, a (0,1)-form field.
    pub fn d_bar(&self) -> Result<FormField> {
        self.as_form().d_bar()
    }

    /// i∂∂̄ of the scalar, a (1,1)-form field, real for real input.
    pub fn i_ddbar(&self) -> Result<FormField> {
        self.as_form().i_ddbar()
    }
}

/// Field of (p, q)-covectors; one dense grid array per coefficient channel
/// in the same canonical layout as [`PQForm`].
#[derive(Debug, Clone)]
pub struct FormField {
    grid: TorusGrid,
    p: usize,
    q: usize,
    channels: Vec<ArrayD<Complex64>>,
}

impl FormField {
    pub fn zero(grid: &TorusGrid, p: usize, q: usize) -> Result<Self> {
        let n = grid.n();
        if p > n || q > n {
            return Err(Error::DegreeOverflow { n, p, q });
        }
        let count = binomial(n, p) * binomial(n, q);
        Ok(Self {
            grid: grid.clone(),
            p,
            q,
            channels: vec![ArrayD::zeros(IxDyn(&grid.shape())); count],
        })
    }

    pub fn from_constant(grid: &TorusGrid, value: &PQForm) -> Result<Self> {
        if value.n() != grid.n() {
            return Err(Error::ShapeMismatch(
                "form dimension differs from grid dimension".into(),
            ));
        }
        let (p, q) = value.bidegree();
        let mut out = Self::zero(grid, p, q)?;
        for (ch, c) in value.coeffs().iter().enumerate() {
            out.channels[ch].fill(*c);
        }
        Ok(out)
    }

    /// profile(x) · basis, for a constant covector and a scalar profile.
    pub fn from_scalar_times(basis: &PQForm, profile: &ScalarField) -> Result<Self> {
        Self::from_constant(profile.grid(), basis)?.times_scalar(profile)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn channels(&self) -> &[ArrayD<Complex64>] {
        &self.channels
    }

    pub fn channel_mean(&self, ch: usize) -> Complex64 {
        self.channels[ch].sum() / self.grid.num_points() as f64
    }

    pub fn expect_bidegree(&self, p: usize, q: usize) -> Result<()> {
        if self.p != p || self.q != q {
            return Err(Error::BidegreeMismatch {
                expected_p: p,
                expected_q: q,
                got_p: self.p,
                got_q: self.q,
            });
        }
        Ok(())
    }

    pub fn check_grid(&self, other: &TorusGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Pointwise value at a flat grid index.
    pub fn value_at(&self, flat: usize) -> PQForm {
        let coeffs = self
            .channels
            .iter()
            .map(|ch| ch.as_slice().expect("standard layout")[flat])
            .collect();
        PQForm::from_coeffs(self.grid.n(), self.p, self.q, coeffs).expect("consistent layout")
    }

    pub fn sup_abs(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|ch| ch.iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.mapv_inplace(|c| c * factor);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(&other.grid)?;
        other.expect_bidegree(self.p, self.q)?;
        let mut out = self.clone();
        for (a, b) in out.channels.iter_mut().zip(&other.channels) {
            a.zip_mut_with(b, |x, y| *x += y);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    pub fn times_scalar(&self, s: &ScalarField) -> Result<Self> {
        self.check_grid(s.grid())?;
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.zip_mut_with(s.data(), |x, y| *x *= y);
        }
        Ok(out)
    }

    pub fn conjugate(&self) -> Self {
        let n = self.grid.n();
        let sign = if (self.p * self.q) % 2 == 0 { 1.0 } else { -1.0 };
        let cp = binomial(n, self.p);
        let cq = binomial(n, self.q);
        let mut out = Self::zero(&self.grid, self.q, self.p).expect("valid bidegree");
        for ri in 0..cp {
            for rj in 0..cq {
                out.channels[rj * cp + ri] =
                    self.channels[ri * cq + rj].mapv(|c| c.conj() * sign);
            }
        }
        out
    }

    pub fn realness_residual(&self) -> f64 {
        if self.p != self.q {
            return f64::INFINITY;
        }
        self.conjugate()
            .sub(self)
            .map_or(f64::INFINITY, |d| d.sup_abs())
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.realness_residual() <= tol * self.sup_abs().max(1.0)
    }

    /// Pointwise wedge product of two fields.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_grid(&other.grid)?;
        let table = wedge_table(self.grid.n(), (self.p, self.q), (other.p, other.q))?;
        let mut out = Self::zero(&self.grid, self.p + other.p, self.q + other.q)?;
        for e in &table.entries {
            let left = &self.channels[e.left];
            let right = &other.channels[e.right];
            let target = &mut out.channels[e.target];
            ndarray::Zip::from(target)
                .and(left)
                .and(right)
                .for_each(|t, &l, &r| *t += l * r * e.sign);
        }
        Ok(out)
    }

    pub fn wedge_power(&self, k: usize) -> Result<Self> {
        let scalar_one = PQForm::basis(self.grid.n(), 0, 0).expect("scalar basis");
        let mut out = Self::from_constant(&self.grid, &scalar_one)?;
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// ∂ of the field.
    pub fn d(&self) -> Result<Self> {
        let n = self.grid.n();
        if self.p == n {
            // no (n+1, q)-forms on an n-fold: ∂ vanishes identically
            return Self::zero(&self.grid, self.p, self.q);
        }
        if self.channels.iter().any(|ch| !finite(ch)) {
            return Err(Error::NonFiniteInput);
        }
        let mut out = Self::zero(&self.grid, self.p + 1, self.q)?;
        let i_masks = subsets(n, self.p);
        let cq = binomial(n, self.q);
        for (ri, &im) in i_masks.iter().enumerate() {
            for rj in 0..cq {
                let src = ri * cq + rj;
                for j in 0..n {
                    let Some((merged, sign)) = merge_sign(1 << j, im) else {
                        continue;
                    };
                    let dst = rank_of(n, self.p + 1, merged).unwrap() * cq + rj;
                    let deriv = dz_derivative(&self.channels[src], j);
                    out.channels[dst].zip_mut_with(&deriv, |a, b| *a += b * sign);
                }
            }
        }
        Ok(out)
    }

    /// ∂̄ of the field; dz̄_j crosses the dz_I block, hence the (−1)^p.
    pub fn d_bar(&self) -> Result<Self> {
        let n = self.grid.n();
        if self.q == n {
            return Self::zero(&self.grid, self.p, self.q);
        }
        if self.channels.iter().any(|ch| !finite(ch)) {
            return Err(Error::NonFiniteInput);
        }
        let mut out = Self::zero(&self.grid, self.p, self.q + 1)?;
        let j_masks = subsets(n, self.q);
        let cq = binomial(n, self.q);
        let cq_out = binomial(n, self.q + 1);
        let front = if self.p % 2 == 0 { 1.0 } else { -1.0 };
        for ri in 0..binomial(n, self.p) {
            for (rj, &jm) in j_masks.iter().enumerate() {
                let src = ri * cq + rj;
                for j in 0..n {
                    let Some((merged, sign)) = merge_sign(1 << j, jm) else {
                        continue;
                    };
                    let dst = ri * cq_out + rank_of(n, self.q + 1, merged).unwrap();
                    let deriv = dzbar_derivative(&self.channels[src], j);
                    out.channels[dst].zip_mut_with(&deriv, |a, b| *a += b * front * sign);
                }
            }
        }
        Ok(out)
    }

    /// i∂∂̄ of the field.
    pub fn i_ddbar(&self) -> Result<Self> {
        Ok(self.d_bar()?.d()?.scaled(Complex64::i()))
    }

    /// Pointwise density against the reference volume dV_n; top bidegree only.
    pub fn density_reference(&self) -> Result<ScalarField> {
        let n = self.grid.n();
        self.expect_bidegree(n, n)?;
        let dv = PQForm::volume_reference(n)?.coeffs()[0];
        Ok(ScalarField {
            grid: self.grid.clone(),
            data: self.channels[0].mapv(|c| c / dv),
        })
    }

    /// ∫ of a top-degree field over the torus.
    pub fn integrate_top(&self) -> Result<Complex64> {
        let n = self.grid.n();
        self.expect_bidegree(n, n)?;
        let dv = PQForm::volume_reference(n)?.coeffs()[0];
        let mean = self.channels[0].sum() / self.grid.num_points() as f64;
        Ok(mean / dv * 2f64.powi(n as i32))
    }
}

/// L²_ω pairing ∫ φ ψ̄ dV of two scalar fields against a volume form field.
pub fn l2_inner(phi: &ScalarField, psi: &ScalarField, volume: &FormField) -> Result<Complex64> {
    phi.check_grid(psi.grid())?;
    phi.check_grid(volume.grid())?;
    let prod = phi.mul(&psi.conj())?;
    volume.times_scalar(&prod)?.integrate_top()
}

pub fn l2_norm(phi: &ScalarField, volume: &FormField) -> Result<f64> {
    Ok(l2_inner(phi, phi, volume)?.re.max(0.0).sqrt())
}

/// Pointwise Λ_ω γ of a (1,1)-field against a positive (1,1)-field, via the
/// defining identity γ ∧ ω^{n−1} = (Λ_ω γ / n) ω^n.
pub fn lambda_contract_field(gamma: &FormField, omega: &FormField) -> Result<ScalarField> {
    gamma.expect_bidegree(1, 1)?;
    omega.expect_bidegree(1, 1)?;
    gamma.check_grid(omega.grid())?;
    let n = gamma.grid().n();
    let numerator = gamma.wedge(&omega.wedge_power(n - 1)?)?.density_reference()?;
    let denominator = omega.wedge_power(n)?.density_reference()?;
    Ok(numerator
        .div(&denominator)?
        .scaled(Complex64::new(n as f64, 0.0)))
}

/// Field of matrix-valued (p, q)-covectors, stored entrywise.
#[derive(Debug, Clone)]
pub struct MatrixFormField {
    rows: usize,
    cols: usize,
    entries: Vec<FormField>,
}

impl MatrixFormField {
    pub fn zero(grid: &TorusGrid, p: usize, q: usize, rows: usize, cols: usize) -> Result<Self> {
        let proto = FormField::zero(grid, p, q)?;
        Ok(Self {
            rows,
            cols,
            entries: vec![proto; rows * cols],
        })
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<FormField>) -> Result<Self> {
        if entries.len() != rows * cols || entries.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let (p, q) = entries[0].bidegree();
        for e in &entries {
            e.expect_bidegree(p, q)?;
            e.check_grid(entries[0].grid())?;
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn identity_times(grid: &TorusGrid, rank: usize, s: &FormField) -> Result<Self> {
        let (p, q) = s.bidegree();
        let mut out = Self::zero(grid, p, q, rank, rank)?;
        for i in 0..rank {
            *out.entry_mut(i, i) = s.clone();
        }
        Ok(out)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bidegree(&self) -> (usize, usize) {
        self.entries[0].bidegree()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.entries[0].grid()
    }

    pub fn entry(&self, r: usize, c: usize) -> &FormField {
        &self.entries[r * self.cols + c]
    }

    pub fn entry_mut(&mut self, r: usize, c: usize) -> &mut FormField {
        &mut self.entries[r * self.cols + c]
    }

    pub fn sup_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.sup_abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.scaled(factor)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch("matrix field addition".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    /// Matrix wedge: (A ∧ B)_{ik} = Σ_j A_{ij} ∧ B_{jk}.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (pa, qa) = self.bidegree();
        let (pb, qb) = other.bidegree();
        let mut out = Self::zero(self.grid(), pa + pb, qa + qb, self.rows, other.cols)?;
        for i in 0..self.rows {
            for k in 0..other.cols {
                let mut acc = FormField::zero(self.grid(), pa + pb, qa + qb)?;
                for j in 0..self.cols {
                    acc = acc.add(&self.entry(i, j).wedge(other.entry(j, k))?)?;
                }
                *out.entry_mut(i, k) = acc;
            }
        }
        Ok(out)
    }

    /// Entrywise wedge with a scalar-coefficient form on the right.
    pub fn wedge_form(&self, other: &FormField) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.wedge(other))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(self.rows, self.cols, entries)
    }

    pub fn times_scalar(&self, s: &ScalarField) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.times_scalar(s))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(self.rows, self.cols, entries)
    }

    pub fn trace(&self) -> Result<FormField> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "trace of a {}x{} block",
                self.rows, self.cols
            )));
        }
        let (p, q) = self.bidegree();
        let mut out = FormField::zero(self.grid(), p, q)?;
        for i in 0..self.rows {
            out = out.add(self.entry(i, i))?;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.entry(r, c).clone());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Conjugate-transpose with the graded conjugation of each entry;
    /// realizes β ↦ β⋆ = ᵗβ̄.
    pub fn dagger(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.entry(r, c).conjugate());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn d(&self) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.d())
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(self.rows, self.cols, entries)
    }

    pub fn d_bar(&self) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.d_bar())
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(self.rows, self.cols, entries)
    }

    /// Copy a rectangular block.
    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::ShapeMismatch("block out of range".into()));
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(self.entry(row0 + r, col0 + c).clone());
            }
        }
        Self::from_entries(rows, cols, entries)
    }

    /// Paste `other` at the given offset.
    pub fn set_block(&mut self, row0: usize, col0: usize, other: &Self) -> Result<()> {
        if row0 + other.rows > self.rows || col0 + other.cols > self.cols {
            return Err(Error::ShapeMismatch("block out of range".into()));
        }
        for r in 0..other.rows {
            for c in 0..other.cols {
                *self.entry_mut(row0 + r, col0 + c) = other.entry(r, c).clone();
            }
        }
        Ok(())
    }
}

/// Real band-limited test function: a seeded sum of cosines over all modes
/// with frequencies in [-K, K] per axis, normalized to the requested sup
/// amplitude, mean zero.
pub fn random_band_limited(
    grid: &TorusGrid,
    max_freq: i32,
    amplitude: f64,
    rng: &mut impl rand::Rng,
) -> ScalarField {
    let axes = 2 * grid.n();
    let base = (2 * max_freq + 1) as usize;
    let total = base.pow(axes as u32);
    let mut modes: Vec<Vec<i32>> = Vec::new();
    for code in 0..total {
        let mut k = Vec::with_capacity(axes);
        let mut c = code;
        for _ in 0..axes {
            k.push((c % base) as i32 - max_freq);
            c /= base;
        }
        // keep one representative per ±k pair
        match k.iter().find(|&&v| v != 0) {
            Some(&v) if v > 0 => modes.push(k),
            _ => {}
        }
    }
    let coeffs: Vec<(f64, f64)> = modes
        .iter()
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU)))
        .collect();
    let raw = ScalarField::from_fn(grid, |coords| {
        let mut v = 0.0;
        for (mode, (a, phase)) in modes.iter().zip(&coeffs) {
            let arg: f64 = mode
                .iter()
                .zip(coords)
                .map(|(&k, &x)| k as f64 * x)
                .sum();
            v += a * (TAU * arg + phase).cos();
        }
        Complex64::new(v, 0.0)
    });
    let sup = raw.sup_abs().max(1e-12);
    raw.scaled(Complex64::new(amplitude / sup, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid16() -> TorusGrid {
        TorusGrid::new(2, 16).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(2, 16).is_ok());
        assert!(TorusGrid::new(2, 3).is_err());
        assert!(TorusGrid::new(2, 5).is_err());
        assert!(TorusGrid::new(3, 8).is_ok());
        assert!(TorusGrid::new(3, 16).is_err()); // 16^6 points over budget
    }

    #[test]
    fn d_of_cosine_matches_chain_rule() {
        // ∂(cos 2πx_1) = −π sin(2πx_1) dz_1
        let grid = grid16();
        let phi = ScalarField::from_fn(&grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
        let dphi = phi.d().unwrap();
        let expected = FormField::from_scalar_times(
            &PQForm::dz(2, 0).unwrap(),
            &ScalarField::from_fn(&grid, |x| Complex64::new(-PI * (TAU * x[0]).sin(), 0.0)),
        )
        .unwrap();
        assert!(dphi.sub(&expected).unwrap().sup_abs() < 1e-12);
    }

    #[test]
    fn i_ddbar_of_cosine_matches_finite_differences() {
        let grid = grid16();
        let phi = ScalarField::from_fn(&grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
        let lap = phi.i_ddbar().unwrap();
        // closed form −π² cos(2πx_1) i dz_1∧dz̄_1
        let expected = FormField::from_scalar_times(
            &PQForm::idz_dzbar(2, 0, 0).unwrap(),
            &ScalarField::from_fn(&grid, |x| {
                Complex64::new(-PI.powi(2) * (TAU * x[0]).cos(), 0.0)
            }),
        )
        .unwrap();
        assert!(lap.sub(&expected).unwrap().sup_abs() < 1e-10);

        // finite-difference oracle: φ_{z1 z̄1} = ¼(φ_xx + φ_yy), 5 grid points
        let h = 1e-5;
        let f = |x: f64| (TAU * x).cos();
        for ix in [0usize, 3, 7, 10, 14] {
            let x0 = ix as f64 / 16.0;
            let fxx = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
            let flat = ix * 16 * 16 * 16; // x_1 is the slowest axis
            let got = lap.value_at(flat).coefficient(0b01, 0b01).unwrap();
            assert_relative_eq!((got / Complex64::i()).re, 0.25 * fxx, epsilon = 1e-4);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let grid = grid16();
        let c = ScalarField::constant(&grid, Complex64::new(2.5, 0.0));
        assert_eq!(c.d().unwrap().sup_abs(), 0.0);
        assert_eq!(c.d_bar().unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn d_squared_vanishes_on_band_limited_fields() {
        let grid = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let phi = random_band_limited(&grid, 2, 1.0, &mut rng);
            assert!(phi.d_bar().unwrap().d_bar().unwrap().sup_abs() < 1e-12);
            assert!(phi.d().unwrap().d().unwrap().sup_abs() < 1e-12);
            let one_form = phi.d().unwrap();
            assert!(one_form.d().unwrap().sup_abs() < 1e-12);
        }
    }

    #[test]
    fn i_ddbar_of_real_scalar_is_real_one_one_field() {
        let grid = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let phi = random_band_limited(&grid, 2, 1.0, &mut rng);
        let lap = phi.i_ddbar().unwrap();
        assert!(lap.realness_residual() <= 1e-13 * lap.sup_abs().max(1.0));
    }

    #[test]
    fn reference_volume_integrates_to_two_to_the_n() {
        let grid = grid16();
        let dv = FormField::from_constant(&grid, &PQForm::volume_reference(2).unwrap()).unwrap();
        assert_relative_eq!(dv.integrate_top().unwrap().re, 4.0);
    }

    #[test]
    fn stokes_kills_i_ddbar_integrals() {
        let grid = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = random_band_limited(&grid, 2, 1.0, &mut rng);
        let omega0 =
            FormField::from_constant(&grid, &PQForm::idz_dzbar(2, 1, 1).unwrap()).unwrap();
        let t = phi.i_ddbar().unwrap().wedge(&omega0).unwrap();
        assert!(t.integrate_top().unwrap().norm() < 1e-12);
    }

    #[test]
    fn constant_form_integral_closed_form() {
        // ∫ (a idz_1dz̄_1 + b idz_2dz̄_2) ∧ ω_flat = 4(a+b)
        let grid = grid16();
        let (a, b) = (1.25, -0.5);
        let mut f = PQForm::idz_dzbar(2, 0, 0)
            .unwrap()
            .scaled(Complex64::new(a, 0.0));
        f.add_assign(
            &PQForm::idz_dzbar(2, 1, 1)
                .unwrap()
                .scaled(Complex64::new(b, 0.0)),
        )
        .unwrap();
        let field = FormField::from_constant(&grid, &f).unwrap();
        let omega = FormField::from_constant(&grid, &PQForm::omega_flat(2).unwrap()).unwrap();
        let val = field.wedge(&omega).unwrap().integrate_top().unwrap();
        assert_relative_eq!(val.re, 4.0 * (a + b), epsilon = 1e-12);
    }

    #[test]
    fn l2_inner_examples() {
        let grid = grid16();
        let dv = FormField::from_constant(&grid, &PQForm::volume_reference(2).unwrap()).unwrap();
        let one = ScalarField::constant(&grid, Complex64::new(1.0, 0.0));
        assert_relative_eq!(l2_inner(&one, &one, &dv).unwrap().re, 4.0);

        let cos1 = ScalarField::from_fn(&grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
        let cos2 = ScalarField::from_fn(&grid, |x| Complex64::new((2.0 * TAU * x[0]).cos(), 0.0));
        assert!(l2_inner(&cos1, &cos2, &dv).unwrap().norm() < 1e-14);
        assert_relative_eq!(l2_inner(&cos1, &cos1, &dv).unwrap().re, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_convergence_once_bandwidth_resolved() {
        let mut previous = f64::INFINITY;
        for npo in [4usize, 8, 16] {
            let grid = TorusGrid::new(2, npo).unwrap();
            let phi = ScalarField::from_fn(&grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
            let lap = phi.i_ddbar().unwrap();
            let expected = FormField::from_scalar_times(
                &PQForm::idz_dzbar(2, 0, 0).unwrap(),
                &ScalarField::from_fn(&grid, |x| {
                    Complex64::new(-PI.powi(2) * (TAU * x[0]).cos(), 0.0)
                }),
            )
            .unwrap();
            let residual = lap.sub(&expected).unwrap().sup_abs();
            assert!(residual <= previous + 1e-12);
            assert!(residual < 1e-10);
            previous = residual;
        }
    }

    #[test]
    fn matrix_field_trace_antisymmetry() {
        let grid = grid16();
        let dz1 = FormField::from_constant(&grid, &PQForm::dz(2, 0).unwrap()).unwrap();
        let beta = MatrixFormField::from_entries(1, 1, vec![dz1]).unwrap();
        let beta_star = beta.dagger();
        assert_eq!(beta_star.bidegree(), (0, 1));
        let q_part = beta.wedge(&beta_star).unwrap().trace().unwrap();
        let s_part = beta_star.wedge(&beta).unwrap().trace().unwrap();
        // Trace_S(β⋆∧β) = −Trace_Q(β∧β⋆)
        assert!(q_part.add(&s_part).unwrap().sup_abs() < 1e-14);
    }
}
