//! The Laplace-type operator P φ = −(i∂∂̄φ ∧ ω^{m−1} ∧ Ω)/dV_ω, its adjoint
//! defect, and the elliptic solve behind conformal rescaling.
//!
//! On a mode e^{2πi(κ·x + λ·y)} the second-order part acts through the
//! multipliers ∂_{z_j} ↦ π(λ_j + iκ_j), so with constant coefficients P is
//! inverted by exact Fourier-symbol division. With spatially varying Ω the
//! grid operator is solved by restarted GMRES preconditioned by the symbol
//! of the coefficient mean. Constants span the kernel; solutions are pinned
//! to mean zero.

use crate::error::{Error, Result};
use crate::fields::{fft_all, frequency, ifft_all, l2_inner, l2_norm, FormField, ScalarField};
use crate::geometry::GeometryContext;
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Sup-norm target for |P f − g|.
    pub residual_target: f64,
    /// Relative bound on |∫ g dV_ω| for solvability.
    pub compat_tol: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            residual_target: 1e-9,
            compat_tol: 1e-9,
            max_iterations: 600,
            restart: 40,
        }
    }
}

/// Geometry plus the precomputed contraction data of P.
#[derive(Debug, Clone)]
pub struct POperatorContext {
    geometry: GeometryContext,
    /// ω^{m−1} ∧ Ω.
    weight_form: FormField,
    /// Densities (dz_j∧dz̄_k ∧ ω^{m−1} ∧ Ω)/dV_ω, row-major over (j, k).
    pair_densities: Vec<ScalarField>,
    constant_coefficients: bool,
    /// Fourier symbol of the coefficient-mean operator.
    symbol: ArrayD<Complex64>,
    pub settings: SolverSettings,
}

impl POperatorContext {
    pub fn new(geometry: &GeometryContext, settings: SolverSettings) -> Result<Self> {
        let grid = geometry.grid().clone();
        let n = grid.n();
        let weight_form = geometry
            .omega()
            .wedge_power(geometry.m() - 1)?
            .wedge(geometry.omega_test())?;
        let mut pair_densities = Vec::with_capacity(n * n);
        let mut pair_means = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let basis = FormField::from_constant(
                    &grid,
                    &crate::pointwise::PQForm::basis(n, 1 << j, 1 << k)?,
                )?;
                let density = basis
                    .wedge(&weight_form)?
                    .density_reference()?
                    .div(geometry.volume_density())?;
                pair_means.push(density.mean());
                pair_densities.push(density);
            }
        }
        let constant_coefficients = pair_densities
            .iter()
            .zip(&pair_means)
            .all(|(field, mean)| {
                field.sub(&ScalarField::constant(&grid, *mean)).map_or(false, |d| {
                    d.sup_abs() <= 1e-12 * field.sup_abs().max(1.0)
                })
            });

        // symbol of the mean operator: σ = i Σ_{jk} T̄_{jk} w_j conj(w_k)
        let mut symbol = ArrayD::zeros(IxDyn(&grid.shape()));
        let len = grid.points_per_axis();
        for (idx, v) in symbol.indexed_iter_mut() {
            let idx = idx.slice();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let wj = Complex64::new(frequency(idx[2 * j + 1], len), frequency(idx[2 * j], len))
                    * PI;
                for k in 0..n {
                    let wk = Complex64::new(
                        frequency(idx[2 * k + 1], len),
                        frequency(idx[2 * k], len),
                    ) * PI;
                    acc += pair_means[j * n + k] * wj * wk.conj();
                }
            }
            *v = acc * Complex64::i();
        }

        Ok(Self {
            geometry: geometry.clone(),
            weight_form,
            pair_densities,
            constant_coefficients,
            symbol,
            settings,
        })
    }

    pub fn with_defaults(geometry: &GeometryContext) -> Result<Self> {
        Self::new(geometry, SolverSettings::default())
    }

    pub fn geometry(&self) -> &GeometryContext {
        &self.geometry
    }

    /// ω^{m−1} ∧ Ω as a field.
    pub fn weight_form(&self) -> &FormField {
        &self.weight_form
    }

    pub fn constant_coefficients(&self) -> bool {
        self.constant_coefficients
    }

    /// Pointwise (γ ∧ ω^{m−1} ∧ Ω)/dV_ω for a (1,1)-field γ, assembled from
    /// the precomputed pair densities.
    pub fn contract_one_one(&self, gamma: &FormField) -> Result<ScalarField> {
        gamma.expect_bidegree(1, 1)?;
        gamma.check_grid(self.geometry.grid())?;
        let mut out = ScalarField::zero(self.geometry.grid());
        for (ch, weight) in self.pair_densities.iter().enumerate() {
            let channel = ScalarField::from_data(self.geometry.grid(), gamma.channels()[ch].clone())?;
            out = out.add(&channel.mul(weight)?)?;
        }
        Ok(out)
    }

    /// P φ = −(i∂∂̄φ ∧ ω^{m−1} ∧ Ω)/dV_ω.
    pub fn apply_p(&self, phi: &ScalarField) -> Result<ScalarField> {
        phi.check_grid(self.geometry.grid())?;
        let lap = phi.i_ddbar()?;
        Ok(self
            .contract_one_one(&lap)?
            .scaled(Complex64::new(-1.0, 0.0)))
    }

    /// Defect ⟨⟨φ, Pψ⟩⟩ − ⟨⟨Pφ, ψ⟩⟩ against its first-order prediction
    /// ∫ ψ̄ · i(∂̄φ∧∂Ω − ∂φ∧∂̄Ω) ∧ ω^{m−1}; the two numbers are assembled
    /// through independent pipelines.
    pub fn adjoint_defect(
        &self,
        phi: &ScalarField,
        psi: &ScalarField,
    ) -> Result<AdjointDefect> {
        let volume = self.geometry.volume_form();
        let defect = l2_inner(phi, &self.apply_p(psi)?, volume)?
            - l2_inner(&self.apply_p(phi)?, psi, volume)?;

        let omega_test = self.geometry.omega_test();
        let first = phi.d_bar()?.wedge(&omega_test.d()?)?;
        let second = phi.d()?.wedge(&omega_test.d_bar()?)?;
        let correction = first
            .sub(&second)?
            .scaled(Complex64::i())
            .wedge(&self.geometry.omega().wedge_power(self.geometry.m() - 1)?)?;
        let predicted = correction
            .times_scalar(&psi.conj())?
            .integrate_top()?;

        let scale = (l2_norm(phi, volume)? * l2_norm(psi, volume)?).max(1e-300);
        Ok(AdjointDefect {
            defect,
            predicted,
            residual: (defect - predicted).norm() / scale,
        })
    }

    fn divide_by_symbol(&self, data: &ArrayD<Complex64>) -> ArrayD<Complex64> {
        let mut hat = fft_all(data);
        hat.zip_mut_with(&self.symbol, |v, s| {
            if s.norm() < 1e-300 {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v /= s;
            }
        });
        ifft_all(&hat)
    }

    /// Solve P f = g for mean-zero g; f is returned mean zero.
    pub fn solve_p(&self, g: &ScalarField) -> Result<ScalarField> {
        g.check_grid(self.geometry.grid())?;
        let volume = self.geometry.volume_form();
        let g_norm = l2_norm(g, volume)?;
        let weighted_mean = l2_inner(g, &ScalarField::constant(self.geometry.grid(), Complex64::new(1.0, 0.0)), volume)?;
        if weighted_mean.norm() > self.settings.compat_tol * g_norm.max(1e-300) {
            return Err(Error::IncompatibleRightHandSide {
                mean: weighted_mean.norm(),
                tolerance: self.settings.compat_tol * g_norm.max(1e-300),
            });
        }
        if g_norm == 0.0 {
            return Ok(ScalarField::zero(self.geometry.grid()));
        }

        let f = if self.constant_coefficients {
            ScalarField::from_data(self.geometry.grid(), self.divide_by_symbol(g.data()))?
        } else {
            self.solve_gmres(g)?
        };
        let f = f.sub(&ScalarField::constant(self.geometry.grid(), f.mean()))?;

        let residual = self.apply_p(&f)?.sub(g)?.sup_abs();
        if residual > self.settings.residual_target * g.sup_abs().max(1.0) {
            return Err(Error::SolverDiverged {
                iterations: self.settings.max_iterations,
                residual,
            });
        }
        Ok(f)
    }

    fn solve_gmres(&self, g: &ScalarField) -> Result<ScalarField> {
        let grid = self.geometry.grid().clone();
        let shape = grid.shape();
        let to_vec = |f: &ArrayD<Complex64>| -> Vec<Complex64> { f.iter().copied().collect() };
        let to_arr = |v: &[Complex64]| -> ArrayD<Complex64> {
            ArrayD::from_shape_vec(IxDyn(&shape), v.to_vec()).expect("shape")
        };

        let apply = |v: &[Complex64]| -> Result<Vec<Complex64>> {
            let field = ScalarField::from_data(&grid, to_arr(v))?;
            Ok(to_vec(self.apply_p(&field)?.data()))
        };
        let precondition =
            |v: &[Complex64]| -> Vec<Complex64> { to_vec(&self.divide_by_symbol(&to_arr(v))) };

        let b = precondition(&to_vec(g.data()));
        let b_norm = vec_norm(&b);
        let len = b.len();
        let mut x = vec![Complex64::new(0.0, 0.0); len];
        let restart = self.settings.restart.max(2);
        let mut total_iterations = 0usize;
        let tol = 1e-13;

        'outer: while total_iterations < self.settings.max_iterations {
            // r = M^{-1}(g - L x)
            let lx = apply(&x)?;
            let mut r = to_vec(g.data());
            for (ri, li) in r.iter_mut().zip(&lx) {
                *ri -= li;
            }
            let r = precondition(&r);
            let beta = vec_norm(&r);
            if beta <= tol * b_norm {
                break;
            }
            let mut basis: Vec<Vec<Complex64>> = vec![scale_vec(&r, 1.0 / beta)];
            let mut h = vec![vec![Complex64::new(0.0, 0.0); restart]; restart + 1];
            let mut cs = vec![Complex64::new(0.0, 0.0); restart];
            let mut sn = vec![Complex64::new(0.0, 0.0); restart];
            let mut rhs = vec![Complex64::new(0.0, 0.0); restart + 1];
            rhs[0] = Complex64::new(beta, 0.0);
            let mut completed = 0usize;

            for j in 0..restart {
                total_iterations += 1;
                let mut w = precondition(&apply(&basis[j])?);
                for (i, vi) in basis.iter().enumerate() {
                    let hij = vec_inner(&w, vi);
                    h[i][j] = hij;
                    for (wk, vk) in w.iter_mut().zip(vi) {
                        *wk -= hij * vk;
                    }
                }
                let w_norm = vec_norm(&w);
                h[j + 1][j] = Complex64::new(w_norm, 0.0);
                if w_norm > 1e-300 {
                    basis.push(scale_vec(&w, 1.0 / w_norm));
                }
                // apply accumulated Givens rotations to the new column
                for i in 0..j {
                    let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                    h[i + 1][j] = -sn[i].conj() * h[i][j] + cs[i].conj() * h[i + 1][j];
                    h[i][j] = t;
                }
                let (c, s) = givens(h[j][j], h[j + 1][j]);
                cs[j] = c;
                sn[j] = s;
                h[j][j] = c * h[j][j] + s * h[j + 1][j];
                h[j + 1][j] = Complex64::new(0.0, 0.0);
                rhs[j + 1] = -s.conj() * rhs[j];
                rhs[j] = c * rhs[j];
                completed = j + 1;
                let krylov_residual = rhs[j + 1].norm();
                if krylov_residual <= tol * b_norm || w_norm <= 1e-300 {
                    break;
                }
                if total_iterations >= self.settings.max_iterations {
                    break;
                }
            }

            // back substitution for the completed Hessenberg block
            let mut y = vec![Complex64::new(0.0, 0.0); completed];
            for i in (0..completed).rev() {
                let mut acc = rhs[i];
                for k in i + 1..completed {
                    acc -= h[i][k] * y[k];
                }
                y[i] = acc / h[i][i];
            }
            for (i, yi) in y.iter().enumerate() {
                for (xk, vk) in x.iter_mut().zip(&basis[i]) {
                    *xk += yi * vk;
                }
            }

            let final_res = rhs[completed].norm();
            if final_res <= tol * b_norm {
                break 'outer;
            }
        }
        ScalarField::from_data(&grid, to_arr(&x))
    }

    /// Split λ = c + P f along ℝ ⊕ Im P; c is the dV_ω-mean and f is the
    /// mean-zero potential.
    pub fn decompose(&self, lambda: &ScalarField) -> Result<(f64, ScalarField)> {
        lambda.check_grid(self.geometry.grid())?;
        let volume = self.geometry.volume_form();
        let total = l2_inner(
            lambda,
            &ScalarField::constant(self.geometry.grid(), Complex64::new(1.0, 0.0)),
            volume,
        )?;
        let c = total.re / self.geometry.vol();
        let residual_field =
            lambda.sub(&ScalarField::constant(self.geometry.grid(), Complex64::new(c, 0.0)))?;
        let f = self.solve_p(&residual_field)?;
        Ok((c, f))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdjointDefect {
    pub defect: Complex64,
    pub predicted: Complex64,
    pub residual: f64,
}

fn vec_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn scale_vec(a: &[Complex64], s: f64) -> Vec<Complex64> {
    a.iter().map(|x| x * s).collect()
}

/// Complex Givens rotation zeroing the second component.
fn givens(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    if b.norm() < 1e-300 {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    } else if a.norm() < 1e-300 {
        (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    } else {
        let denom = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let c = Complex64::new(a.norm() / denom, 0.0);
        let s = (a / a.norm()) * b.conj() / denom;
        (c, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lambda_contract_field, random_band_limited, TorusGrid};
    use crate::geometry::{flat_omega, generate_test_form, TestFormMode};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn flat_context(npo: usize) -> POperatorContext {
        let grid = TorusGrid::new(2, npo).unwrap();
        let omega = flat_omega(&grid).unwrap();
        let geo = generate_test_form(
            &grid,
            &omega,
            1,
            &TestFormMode::ConstantBlocks {
                blocks: vec![1.0, 1.0],
            },
            1e-10,
            1e-10,
            3,
        )
        .unwrap();
        POperatorContext::with_defaults(&geo).unwrap()
    }

    fn perturbed_context(npo: usize) -> POperatorContext {
        let grid = TorusGrid::new(2, npo).unwrap();
        let omega = flat_omega(&grid).unwrap();
        let geo = generate_test_form(
            &grid,
            &omega,
            1,
            &TestFormMode::Perturbation {
                blocks: vec![1.0, 1.0],
                u_amplitude: 0.02,
                u_axis: 2,
                epsilon: 1.0,
            },
            1e-10,
            1e-10,
            3,
        )
        .unwrap();
        POperatorContext::with_defaults(&geo).unwrap()
    }

    #[test]
    fn apply_p_on_the_reference_cosine() {
        // P(cos 2πx_1) = π² cos(2πx_1) for flat ω = Ω, n = 2, m = 1
        let ctx = flat_context(16);
        let grid = ctx.geometry().grid();
        let phi = ScalarField::from_fn(grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
        let p_phi = ctx.apply_p(&phi).unwrap();
        let expected = ScalarField::from_fn(grid, |x| {
            Complex64::new(std::f64::consts::PI.powi(2) * (TAU * x[0]).cos(), 0.0)
        });
        assert!(p_phi.sub(&expected).unwrap().sup_abs() < 1e-10);
    }

    #[test]
    fn apply_p_annihilates_constants() {
        let ctx = flat_context(16);
        let c = ScalarField::constant(ctx.geometry().grid(), Complex64::new(4.2, 0.0));
        assert!(ctx.apply_p(&c).unwrap().sup_abs() <= 1e-13);
    }

    #[test]
    fn classical_level_reduces_to_lambda_trace() {
        // m = n: P φ = −(n−1)! Λ_ω(i∂∂̄φ) pointwise
        let grid = TorusGrid::new(2, 16).unwrap();
        let omega = flat_omega(&grid).unwrap();
        let geo = generate_test_form(
            &grid,
            &omega,
            2,
            &TestFormMode::ConstantBlocks { blocks: vec![1.0] },
            1e-10,
            1e-10,
            3,
        )
        .unwrap();
        let ctx = POperatorContext::with_defaults(&geo).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi = random_band_limited(&grid, 2, 1.0, &mut rng);
        let p_phi = ctx.apply_p(&phi).unwrap();
        let classical = lambda_contract_field(&phi.i_ddbar().unwrap(), &omega)
            .unwrap()
            .scaled(Complex64::new(-1.0, 0.0)); // (n−1)! = 1 for n = 2
        assert!(p_phi.sub(&classical).unwrap().sup_abs() < 1e-10);
    }

    #[test]
    fn self_adjoint_for_closed_test_forms() {
        let ctx = flat_context(16);
        let grid = ctx.geometry().grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let phi = random_band_limited(grid, 2, 1.0, &mut rng);
            let psi = random_band_limited(grid, 2, 1.0, &mut rng);
            let result = ctx.adjoint_defect(&phi, &psi).unwrap();
            assert!(result.defect.norm() <= 1e-10, "{}", result.defect.norm());
            assert!(result.predicted.norm() <= 1e-10);
        }
    }

    #[test]
    fn adjoint_defect_matches_prediction_for_perturbed_forms() {
        let ctx = perturbed_context(16);
        let grid = ctx.geometry().grid();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let phi = random_band_limited(grid, 2, 1.0, &mut rng);
            let psi = random_band_limited(grid, 2, 1.0, &mut rng);
            let result = ctx.adjoint_defect(&phi, &psi).unwrap();
            assert!(result.defect.norm() > 1e-8, "defect should be visible");
            assert!(result.residual <= 1e-8, "residual {}", result.residual);
        }
    }

    #[test]
    fn defect_vanishes_on_constants() {
        let ctx = perturbed_context(16);
        let grid = ctx.geometry().grid();
        let phi = ScalarField::constant(grid, Complex64::new(1.5, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = random_band_limited(grid, 2, 1.0, &mut rng);
        let result = ctx.adjoint_defect(&phi, &psi).unwrap();
        assert!(result.defect.norm() <= 1e-12);
        assert!(result.predicted.norm() <= 1e-12);
    }

    #[test]
    fn solve_inverts_apply_on_cosine_data() {
        let ctx = flat_context(16);
        let grid = ctx.geometry().grid();
        let g = ScalarField::from_fn(grid, |x| {
            Complex64::new(std::f64::consts::PI.powi(2) * (TAU * x[0]).cos(), 0.0)
        });
        let f = ctx.solve_p(&g).unwrap();
        let expected = ScalarField::from_fn(grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
        assert!(f.sub(&expected).unwrap().sup_abs() < 1e-10);
    }

    #[test]
    fn solve_rejects_nonzero_mean() {
        let ctx = flat_context(16);
        let g = ScalarField::constant(ctx.geometry().grid(), Complex64::new(0.3, 0.0));
        assert!(matches!(
            ctx.solve_p(&g),
            Err(Error::IncompatibleRightHandSide { .. })
        ));
    }

    #[test]
    fn gmres_handles_variable_coefficients() {
        let ctx = perturbed_context(16);
        assert!(!ctx.constant_coefficients());
        let grid = ctx.geometry().grid();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let raw = random_band_limited(grid, 2, 1.0, &mut rng);
        // make the data exactly compatible: subtract the weighted mean
        let volume = ctx.geometry().volume_form();
        let mean = l2_inner(
            &raw,
            &ScalarField::constant(grid, Complex64::new(1.0, 0.0)),
            volume,
        )
        .unwrap()
        .re
            / ctx.geometry().vol();
        let g = raw
            .sub(&ScalarField::constant(grid, Complex64::new(mean, 0.0)))
            .unwrap();
        let f = ctx.solve_p(&g).unwrap();
        let residual = ctx.apply_p(&f).unwrap().sub(&g).unwrap().sup_abs();
        assert!(residual <= 1e-8, "residual {residual}");
        assert!(f.mean().norm() <= 1e-12);
    }

    #[test]
    fn decompose_recovers_constant_and_potential() {
        let ctx = flat_context(16);
        let grid = ctx.geometry().grid();
        // λ = 3 + π² cos(2πx_1) = 3 + P(cos 2πx_1)
        let lambda = ScalarField::from_fn(grid, |x| {
            Complex64::new(3.0 + std::f64::consts::PI.powi(2) * (TAU * x[0]).cos(), 0.0)
        });
        let (c, f) = ctx.decompose(&lambda).unwrap();
        assert_relative_eq!(c, 3.0, epsilon = 1e-10);
        let expected = ScalarField::from_fn(grid, |x| Complex64::new((TAU * x[0]).cos(), 0.0));
        assert!(f.sub(&expected).unwrap().sup_abs() < 1e-9);

        // reconstruction and orthogonality of the image to constants
        let reconstructed = ctx
            .apply_p(&f)
            .unwrap()
            .add(&ScalarField::constant(grid, Complex64::new(c, 0.0)))
            .unwrap();
        assert!(reconstructed.sub(&lambda).unwrap().sup_abs() <= 1e-9);
        let pf_mean = l2_inner(
            &ctx.apply_p(&f).unwrap(),
            &ScalarField::constant(grid, Complex64::new(1.0, 0.0)),
            ctx.geometry().volume_form(),
        )
        .unwrap();
        assert!(pf_mean.norm() <= 1e-10);
    }

    #[test]
    fn decompose_of_constant_gives_zero_potential() {
        let ctx = flat_context(16);
        let lambda = ScalarField::constant(ctx.geometry().grid(), Complex64::new(2.0, 0.0));
        let (c, f) = ctx.decompose(&lambda).unwrap();
        assert_relative_eq!(c, 2.0, epsilon = 1e-12);
        assert!(f.sup_abs() <= 1e-12);
    }

    #[test]
    fn kernel_contains_only_constants() {
        // P f ≈ 0 with mean-zero f forces f ≈ 0
        let ctx = flat_context(16);
        let zero = ScalarField::zero(ctx.geometry().grid());
        let f = ctx.solve_p(&zero).unwrap();
        assert!(f.sup_abs() <= 1e-8);
    }
}
