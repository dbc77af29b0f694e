//! Construction and validation of the pair (ω, Ω): a Kähler form and a
//! weakly positive, ∂∂̄-closed test form of bidegree (n−m, n−m).
//!
//! The base ω stays constant on the flat torus (so dV_ω is constant and the
//! operator symbol is simple); Ω carries all of the generality. Three
//! generators are provided: constant block-diagonal forms, powers ω′^{n−m}
//! of an auxiliary Kähler form ω′ = ω₀ + i∂∂̄ρ, and ∂∂̄-closed perturbations
//! Ω₀ + ε(∂u + ∂̄ū) which are generically not closed — the regime where the
//! adjoint of the operator P picks up its first-order correction.

use crate::error::{Error, Result};
use crate::fields::{FormField, ScalarField, TorusGrid};
use crate::pointwise::{weak_positivity_scan, PQForm};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Stride and direction count for the pointwise positivity sampling pass.
const POSITIVITY_STRIDE: usize = 8;
const POSITIVITY_DIRECTIONS: usize = 32;

/// Residuals recorded while validating a geometry.
#[derive(Debug, Clone)]
pub struct GeometryValidation {
    /// sup |∂∂̄Ω| relative to sup |Ω|.
    pub ddbar_residual: f64,
    /// sup |∂∂̄(ω^{m−1}∧Ω)| relative to scale, the degree-invariance mechanism.
    pub ddbar_weighted_residual: f64,
    /// Smallest sampled positivity density across the subsampled points.
    pub min_sampled_density: f64,
    /// Number of grid points sampled for positivity.
    pub sampled_points: usize,
}

/// Validated geometric data shared by every downstream computation.
#[derive(Debug, Clone)]
pub struct GeometryContext {
    grid: TorusGrid,
    m: usize,
    omega: FormField,
    omega_test: FormField,
    volume: FormField,
    volume_density: ScalarField,
    vol: f64,
    validation: GeometryValidation,
}

impl GeometryContext {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn omega(&self) -> &FormField {
        &self.omega
    }

    pub fn omega_test(&self) -> &FormField {
        &self.omega_test
    }

    /// dV_ω = ω^n / n! as a field.
    pub fn volume_form(&self) -> &FormField {
        &self.volume
    }

    /// Pointwise density of dV_ω against dV_n.
    pub fn volume_density(&self) -> &ScalarField {
        &self.volume_density
    }

    /// Vol_ω(X) = ∫ dV_ω.
    pub fn vol(&self) -> f64 {
        self.vol
    }

    pub fn validation(&self) -> &GeometryValidation {
        &self.validation
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Check ω is real and pointwise positive definite via its coefficient
/// matrix; returns the first offending flat index on failure.
fn check_positive_definite(omega: &FormField) -> Result<()> {
    omega.expect_bidegree(1, 1)?;
    if !omega.is_real(1e-12) {
        return Err(Error::DegenerateMetric(format!(
            "omega is not real (residual {:.3e})",
            omega.realness_residual()
        )));
    }
    for flat in 0..omega.grid().num_points() {
        let w = omega.value_at(flat).hermitian_matrix()?;
        if !crate::pointwise::hermitian_positive_definite(&w) {
            return Err(Error::NotPositiveDefinite {
                point: flat,
                detail: format!("coefficient matrix {w:.4}"),
            });
        }
    }
    Ok(())
}

/// Validate (ω, Ω, m) and assemble a [`GeometryContext`].
pub fn validate_structures(
    omega: &FormField,
    omega_test: &FormField,
    m: usize,
    tol_closed: f64,
    positivity_delta: f64,
    seed: u64,
) -> Result<GeometryContext> {
    let grid = omega.grid().clone();
    omega_test.check_grid(&grid)?;
    let n = grid.n();
    if m == 0 || m > n {
        return Err(Error::InvalidGrid(format!("level m = {m} outside 1..={n}")));
    }
    omega.expect_bidegree(1, 1)?;
    omega_test.expect_bidegree(n - m, n - m)?;
    check_positive_definite(omega)?;
    if !omega_test.is_real(1e-12) {
        return Err(Error::DegenerateMetric(format!(
            "test form is not real (residual {:.3e})",
            omega_test.realness_residual()
        )));
    }

    let scale = omega_test.sup_abs().max(1e-30);
    let ddbar = omega_test.d_bar()?.d()?;
    let ddbar_residual = ddbar.sup_abs() / scale;
    if ddbar_residual > tol_closed {
        return Err(Error::NotDdbarClosed {
            residual: ddbar_residual,
            tolerance: tol_closed,
        });
    }

    let weighted = omega.wedge_power(m - 1)?.wedge(omega_test)?;
    let ddbar_weighted_residual =
        weighted.d_bar()?.d()?.sup_abs() / weighted.sup_abs().max(1e-30);

    // positivity sampling on a strided subset of grid points
    let mut min_density = f64::INFINITY;
    let mut sampled = 0usize;
    for flat in (0..grid.num_points()).step_by(POSITIVITY_STRIDE) {
        let pointwise = omega_test.value_at(flat);
        let (density, _witness) = weak_positivity_scan(
            &pointwise,
            m,
            POSITIVITY_DIRECTIONS,
            seed ^ flat as u64,
        )?;
        if density < positivity_delta {
            return Err(Error::NotWeaklyPositive {
                point: flat,
                density,
                delta: positivity_delta,
            });
        }
        min_density = min_density.min(density);
        sampled += 1;
    }

    let volume = omega
        .wedge_power(n)?
        .scaled(Complex64::new(1.0 / factorial(n), 0.0));
    let volume_density = volume.density_reference()?;
    if volume_density
        .data()
        .iter()
        .any(|c| c.re <= 0.0 || c.im.abs() > 1e-10 * c.re.abs().max(1.0))
    {
        return Err(Error::DegenerateMetric(
            "volume density of omega is not positive".into(),
        ));
    }
    let vol = volume.integrate_top()?.re;
    if vol <= 0.0 {
        return Err(Error::DegenerateMetric(format!(
            "nonpositive total volume {vol}"
        )));
    }

    Ok(GeometryContext {
        grid,
        m,
        omega: omega.clone(),
        omega_test: omega_test.clone(),
        volume,
        volume_density,
        vol,
        validation: GeometryValidation {
            ddbar_residual,
            ddbar_weighted_residual,
            min_sampled_density: min_density,
            sampled_points: sampled,
        },
    })
}

/// The constant flat Kähler form Σ_j i dz_j ∧ dz̄_j as a field.
pub fn flat_omega(grid: &TorusGrid) -> Result<FormField> {
    FormField::from_constant(grid, &PQForm::omega_flat(grid.n())?)
}

/// Constant ω from a Hermitian positive-definite coefficient matrix.
pub fn constant_omega(grid: &TorusGrid, w: &DMatrix<Complex64>) -> Result<FormField> {
    FormField::from_constant(grid, &PQForm::from_hermitian_matrix(grid.n(), w)?)
}

/// Generator modes for the test form Ω.
#[derive(Debug, Clone)]
pub enum TestFormMode {
    /// Σ_K c_K Π_{k∈K} i dz_k∧dz̄_k with coefficients in lexicographic
    /// order of the multi-indices K of size n−m.
    ConstantBlocks { blocks: Vec<f64> },
    /// ω′^{n−m} for ω′ = ω₀ + i∂∂̄ρ, ρ = amplitude·cos(2π θ_axis).
    KahlerPower { amplitude: f64, axis: usize },
    /// Ω₀ + ε(∂u + ∂̄ū) with Ω₀ the blocks form and u a cosine-modulated
    /// (n−m−1, n−m)-form; ∂∂̄-closed by construction, generically not closed.
    Perturbation {
        blocks: Vec<f64>,
        u_amplitude: f64,
        u_axis: usize,
        epsilon: f64,
    },
}

/// Build Ω in the requested mode and validate the resulting pair.
pub fn generate_test_form(
    grid: &TorusGrid,
    omega: &FormField,
    m: usize,
    mode: &TestFormMode,
    tol_closed: f64,
    positivity_delta: f64,
    seed: u64,
) -> Result<GeometryContext> {
    let n = grid.n();
    if m == 0 || m > n {
        return Err(Error::InvalidGrid(format!("level m = {m} outside 1..={n}")));
    }
    let omega_test = match mode {
        TestFormMode::ConstantBlocks { blocks } => {
            FormField::from_constant(grid, &block_diagonal_form(n, n - m, blocks)?)?
        }
        TestFormMode::KahlerPower { amplitude, axis } => {
            if *axis >= 2 * n {
                return Err(Error::InvalidAuxiliaryPotential(format!(
                    "axis {axis} outside 0..{}",
                    2 * n
                )));
            }
            let rho = ScalarField::from_fn(grid, |x| {
                Complex64::new(amplitude * (TAU * x[*axis]).cos(), 0.0)
            });
            let omega_aux = flat_omega(grid)?.add(&rho.i_ddbar()?)?;
            check_positive_definite(&omega_aux).map_err(|e| {
                Error::InvalidAuxiliaryPotential(format!("auxiliary form not positive: {e}"))
            })?;
            omega_aux.wedge_power(n - m)?
        }
        TestFormMode::Perturbation {
            blocks,
            u_amplitude,
            u_axis,
            epsilon,
        } => {
            if n - m == 0 {
                return Err(Error::InvalidAuxiliaryPotential(
                    "perturbation mode needs n - m >= 1".into(),
                ));
            }
            if *u_axis >= 2 * n {
                return Err(Error::InvalidAuxiliaryPotential(format!(
                    "axis {u_axis} outside 0..{}",
                    2 * n
                )));
            }
            let base = FormField::from_constant(grid, &block_diagonal_form(n, n - m, blocks)?)?;
            let profile = ScalarField::from_fn(grid, |x| {
                Complex64::new(u_amplitude * (TAU * x[*u_axis]).cos(), 0.0)
            });
            // u = profile · (first lexicographic basis covector of bidegree
            // (n−m−1, n−m)); ∂u + ∂̄ū is real and ∂∂̄-closed
            let i_mask = crate::multi_index::subsets(n, n - m - 1)[0];
            let j_mask = crate::multi_index::subsets(n, n - m)[0];
            let u = FormField::from_scalar_times(&PQForm::basis(n, i_mask, j_mask)?, &profile)?;
            let du = u.d()?;
            let correction = du.add(&du.conjugate())?.scaled(Complex64::new(*epsilon, 0.0));
            base.add(&correction)?
        }
    };
    let ctx = validate_structures(omega, &omega_test, m, tol_closed, positivity_delta, seed);
    match (&ctx, mode) {
        (Err(Error::NotWeaklyPositive { .. }), TestFormMode::Perturbation { epsilon, .. }) => {
            Err(Error::PositivityLostAtEpsilon { epsilon: *epsilon })
        }
        _ => ctx,
    }
}

/// Σ_K c_K Π_{k∈K} i dz_k ∧ dz̄_k over increasing multi-indices K of size k.
pub fn block_diagonal_form(n: usize, k: usize, blocks: &[f64]) -> Result<PQForm> {
    let masks = crate::multi_index::subsets(n, k);
    if blocks.len() != masks.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} block coefficients for bidegree ({k},{k}) in dimension {n}, got {}",
            masks.len(),
            blocks.len()
        )));
    }
    let mut out = PQForm::zero(n, k, k)?;
    for (&mask, &c) in masks.iter().zip(blocks) {
        let mut term = PQForm::basis(n, 0, 0)?;
        for j in crate::multi_index::indices(mask) {
            term = term.wedge(&PQForm::idz_dzbar(n, j, j)?)?;
        }
        out.add_assign(&term.scaled(Complex64::new(c, 0.0)))?;
    }
    Ok(out)
}
