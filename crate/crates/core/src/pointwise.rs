//! Exact exterior algebra of complex (p, q)-covectors at a single point of ℂⁿ.
//!
//! A (p, q)-form is stored densely: one complex coefficient per pair of
//! increasing multi-indices (I, J), |I| = p, |J| = q, in the canonical basis
//! dz_I ∧ dz̄_J with lexicographic channel order. Ambient dimension is capped
//! at 4, so the largest coefficient block is C(4,2)² = 36 entries.
//!
//! The module also carries the positivity machinery used throughout: the
//! sesquilinear bracket {η, ξ}_h of bundle-valued (1,0)-forms, densities of
//! the form i{η,η}_h ∧ ω^{m−1} ∧ Ω against dV_n, trace densities of second
//! fundamental forms, and a randomized sampler for the weak positivity of an
//! (n−m, n−m)-form (pairing against simple strongly positive (m, m)-forms).

use crate::error::{Error, Result};
use crate::multi_index::{binomial, merge_sign, rank_of, subsets, Mask};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const MAX_DIM: usize = 4;

/// A complex (p, q)-covector at a point of ℂⁿ, n ≤ 4.
#[derive(Debug, Clone, PartialEq)]
pub struct PQForm {
    n: usize,
    p: usize,
    q: usize,
    /// Channel layout: rank(I) * C(n, q) + rank(J).
    coeffs: Vec<Complex64>,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidGrid(format!(
            "ambient complex dimension {n} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

impl PQForm {
    pub fn zero(n: usize, p: usize, q: usize) -> Result<Self> {
        check_dim(n)?;
        if p > n || q > n {
            return Err(Error::DegreeOverflow { n, p, q });
        }
        Ok(Self {
            n,
            p,
            q,
            coeffs: vec![Complex64::new(0.0, 0.0); binomial(n, p) * binomial(n, q)],
        })
    }

    pub fn from_coeffs(n: usize, p: usize, q: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let mut form = Self::zero(n, p, q)?;
        if coeffs.len() != form.coeffs.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                form.coeffs.len(),
                coeffs.len()
            )));
        }
        form.coeffs = coeffs;
        Ok(form)
    }

    /// Basis covector dz_I ∧ dz̄_J with unit coefficient.
    pub fn basis(n: usize, i_mask: Mask, j_mask: Mask) -> Result<Self> {
        let p = i_mask.count_ones() as usize;
        let q = j_mask.count_ones() as usize;
        let mut form = Self::zero(n, p, q)?;
        let ch = form.channel(i_mask, j_mask).expect("valid masks");
        form.coeffs[ch] = Complex64::new(1.0, 0.0);
        Ok(form)
    }

    /// dz_j (0-based index).
    pub fn dz(n: usize, j: usize) -> Result<Self> {
        Self::basis(n, 1 << j, 0)
    }

    /// dz̄_j (0-based index).
    pub fn dzbar(n: usize, j: usize) -> Result<Self> {
        Self::basis(n, 0, 1 << j)
    }

    /// i dz_j ∧ dz̄_k.
    pub fn idz_dzbar(n: usize, j: usize, k: usize) -> Result<Self> {
        let mut form = Self::basis(n, 1 << j, 1 << k)?;
        form.scale_mut(Complex64::i());
        Ok(form)
    }

    /// The reference volume covector dV_n = i dz_1∧dz̄_1 ∧ … ∧ i dz_n∧dz̄_n.
    pub fn volume_reference(n: usize) -> Result<Self> {
        let mut v = Self::basis(n, 0, 0)?;
        for j in 0..n {
            v = v.wedge(&Self::idz_dzbar(n, j, j)?)?;
        }
        Ok(v)
    }

    /// The flat Kähler covector Σ_j i dz_j ∧ dz̄_j.
    pub fn omega_flat(n: usize) -> Result<Self> {
        let mut w = Self::zero(n, 1, 1)?;
        for j in 0..n {
            w.add_assign(&Self::idz_dzbar(n, j, j)?)?;
        }
        Ok(w)
    }

    /// Constant real (1,1)-form i Σ w_{jk} dz_j ∧ dz̄_k from a Hermitian matrix.
    pub fn from_hermitian_matrix(n: usize, w: &DMatrix<Complex64>) -> Result<Self> {
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n}x{n} coefficient matrix, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let mut form = Self::zero(n, 1, 1)?;
        for j in 0..n {
            for k in 0..n {
                let mut basis = Self::idz_dzbar(n, j, k)?;
                basis.scale_mut(w[(j, k)]);
                form.add_assign(&basis)?;
            }
        }
        Ok(form)
    }

    /// Coefficient matrix Γ of a (1,1)-form written as i Σ Γ_{jk} dz_j ∧ dz̄_k.
    pub fn hermitian_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.expect_bidegree(1, 1)?;
        let n = self.n;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let ch = self.channel(1 << j, 1 << k).expect("valid masks");
                out[(j, k)] = self.coeffs[ch] / Complex64::i();
            }
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
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

    fn channel(&self, i_mask: Mask, j_mask: Mask) -> Option<usize> {
        let ri = rank_of(self.n, self.p, i_mask)?;
        let rj = rank_of(self.n, self.q, j_mask)?;
        Some(ri * binomial(self.n, self.q) + rj)
    }

    pub fn coefficient(&self, i_mask: Mask, j_mask: Mask) -> Option<Complex64> {
        self.channel(i_mask, j_mask).map(|ch| self.coeffs[ch])
    }

    pub fn scale_mut(&mut self, factor: Complex64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale_mut(factor);
        out
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch("mixed ambient dimensions".into()));
        }
        other.expect_bidegree(self.p, self.q)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(&other.scaled(Complex64::new(-1.0, 0.0)))?;
        Ok(out)
    }

    pub fn sup_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Graded wedge product.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch("mixed ambient dimensions".into()));
        }
        let table = wedge_table(self.n, (self.p, self.q), (other.p, other.q))?;
        let mut out = Self::zero(self.n, self.p + other.p, self.q + other.q)?;
        for entry in &table.entries {
            let prod = self.coeffs[entry.left] * other.coeffs[entry.right];
            out.coeffs[entry.target] += prod * entry.sign;
        }
        Ok(out)
    }

    /// Wedge power, with a^0 = 1.
    pub fn wedge_power(&self, k: usize) -> Result<Self> {
        let mut out = Self::basis(self.n, 0, 0)?;
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// Complex conjugate form; bidegree (q, p).
    pub fn conjugate(&self) -> Self {
        let mut out = Self::zero(self.n, self.q, self.p).expect("valid bidegree");
        let sign = if (self.p * self.q) % 2 == 0 { 1.0 } else { -1.0 };
        let i_masks = subsets(self.n, self.p);
        let j_masks = subsets(self.n, self.q);
        let cq = binomial(self.n, self.q);
        for (ri, &_im) in i_masks.iter().enumerate() {
            for (rj, &_jm) in j_masks.iter().enumerate() {
                let src = ri * cq + rj;
                // conjugated coefficient lands on the swapped index pair
                let dst = rj * binomial(self.n, self.p) + ri;
                out.coeffs[dst] = self.coeffs[src].conj() * sign;
            }
        }
        out
    }

    /// Residual of the realness condition conj(a) = a; zero only makes sense
    /// for (p, p)-forms.
    pub fn realness_residual(&self) -> f64 {
        if self.p != self.q {
            return f64::INFINITY;
        }
        self.conjugate().sub(self).map_or(f64::INFINITY, |d| d.sup_abs())
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.sup_abs().max(1.0);
        self.realness_residual() <= tol * scale
    }

    /// Ratio t / dV of two top-degree forms.
    pub fn top_ratio(&self, volume: &Self) -> Result<Complex64> {
        self.expect_bidegree(self.n, self.n)?;
        volume.expect_bidegree(self.n, self.n)?;
        let v = volume.coeffs[0];
        if v.norm() == 0.0 {
            return Err(Error::ZeroVolumeForm);
        }
        Ok(self.coeffs[0] / v)
    }

    /// Density of this top form against the reference volume dV_n.
    pub fn density(&self) -> Result<Complex64> {
        self.top_ratio(&Self::volume_reference(self.n)?)
    }
}

pub(crate) struct WedgeEntry {
    pub left: usize,
    pub right: usize,
    pub target: usize,
    pub sign: f64,
}

pub(crate) struct WedgeTable {
    pub entries: Vec<WedgeEntry>,
}

/// Channel-level multiplication table of the wedge product; the cross sign
/// (−1)^{q_a p_b} moves dz̄_{J_a} past dz_{I_b}.
pub(crate) fn wedge_table(
    n: usize,
    (pa, qa): (usize, usize),
    (pb, qb): (usize, usize),
) -> Result<WedgeTable> {
    let (p, q) = (pa + pb, qa + qb);
    if p > n || q > n {
        return Err(Error::DegreeOverflow { n, p, q });
    }
    let cross = if (qa * pb) % 2 == 0 { 1.0 } else { -1.0 };
    let ia = subsets(n, pa);
    let ja = subsets(n, qa);
    let ib = subsets(n, pb);
    let jb = subsets(n, qb);
    let cqa = binomial(n, qa);
    let cqb = binomial(n, qb);
    let cq = binomial(n, q);
    let mut entries = Vec::new();
    for (ria, &ma) in ia.iter().enumerate() {
        for (rja, &mja) in ja.iter().enumerate() {
            for (rib, &mb) in ib.iter().enumerate() {
                let Some((im, si)) = merge_sign(ma, mb) else {
                    continue;
                };
                for (rjb, &mjb) in jb.iter().enumerate() {
                    let Some((jm, sj)) = merge_sign(mja, mjb) else {
                        continue;
                    };
                    entries.push(WedgeEntry {
                        left: ria * cqa + rja,
                        right: rib * cqb + rjb,
                        target: rank_of(n, p, im).unwrap() * cq + rank_of(n, q, jm).unwrap(),
                        sign: cross * si * sj,
                    });
                }
            }
        }
    }
    Ok(WedgeTable { entries })
}

/// A (p, q)-covector with matrix coefficients, e.g. End(E)-valued curvature
/// or a Hom(S, Q)-valued second fundamental form.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPQForm {
    n: usize,
    p: usize,
    q: usize,
    rows: usize,
    cols: usize,
    coeffs: Vec<DMatrix<Complex64>>,
}

impl MatrixPQForm {
    pub fn zero(n: usize, p: usize, q: usize, rows: usize, cols: usize) -> Result<Self> {
        check_dim(n)?;
        if p > n || q > n {
            return Err(Error::DegreeOverflow { n, p, q });
        }
        Ok(Self {
            n,
            p,
            q,
            rows,
            cols,
            coeffs: vec![DMatrix::zeros(rows, cols); binomial(n, p) * binomial(n, q)],
        })
    }

    pub fn from_scalar_forms(rows: usize, cols: usize, entries: &[PQForm]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let first = &entries[0];
        let (p, q) = first.bidegree();
        let mut out = Self::zero(first.n(), p, q, rows, cols)?;
        for r in 0..rows {
            for c in 0..cols {
                let e = &entries[r * cols + c];
                e.expect_bidegree(p, q)?;
                for (ch, v) in e.coeffs().iter().enumerate() {
                    out.coeffs[ch][(r, c)] = *v;
                }
            }
        }
        Ok(out)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn coeff(&self, ch: usize) -> &DMatrix<Complex64> {
        &self.coeffs[ch]
    }

    /// Matrix wedge product: (A ∧ B)_{ik} = Σ_j A_{ij} ∧ B_{jk}.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let table = wedge_table(self.n, (self.p, self.q), (other.p, other.q))?;
        let mut out = Self::zero(
            self.n,
            self.p + other.p,
            self.q + other.q,
            self.rows,
            other.cols,
        )?;
        for entry in &table.entries {
            let prod = &self.coeffs[entry.left] * &other.coeffs[entry.right];
            out.coeffs[entry.target] += prod * Complex64::new(entry.sign, 0.0);
        }
        Ok(out)
    }

    /// Trace over the matrix indices; requires square shape.
    pub fn trace(&self) -> Result<PQForm> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "trace of a {}x{} block",
                self.rows, self.cols
            )));
        }
        let mut out = PQForm::zero(self.n, self.p, self.q)?;
        for (ch, m) in self.coeffs.iter().enumerate() {
            out.coeffs[ch] = m.diagonal().sum();
        }
        Ok(out)
    }

    /// Conjugate form with conjugate-transposed coefficients; realizes
    /// β ↦ β⋆ = ᵗβ̄ (bidegree (p,q) ↦ (q,p), shape transposed).
    pub fn dagger(&self) -> Self {
        let mut out =
            Self::zero(self.n, self.q, self.p, self.cols, self.rows).expect("valid bidegree");
        let sign = if (self.p * self.q) % 2 == 0 { 1.0 } else { -1.0 };
        let cq = binomial(self.n, self.q);
        let cp = binomial(self.n, self.p);
        for ri in 0..cp {
            for rj in 0..cq {
                out.coeffs[rj * cp + ri] =
                    self.coeffs[ri * cq + rj].adjoint() * Complex64::new(sign, 0.0);
            }
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for m in &mut out.coeffs {
            *m *= factor;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch("matrix form addition".into()));
        }
        other_bidegree_check(self, other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sup_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|m| m.iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }
}

fn other_bidegree_check(a: &MatrixPQForm, b: &MatrixPQForm) -> Result<()> {
    if a.bidegree() != b.bidegree() {
        let (p, q) = a.bidegree();
        let (gp, gq) = b.bidegree();
        return Err(Error::BidegreeMismatch {
            expected_p: p,
            expected_q: q,
            got_p: gp,
            got_q: gq,
        });
    }
    Ok(())
}

/// Hermitian positive-definiteness via outer-product elimination: every
/// pivot of the Schur-complement recursion must be a positive real.
pub fn hermitian_positive_definite(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    let herm = (m - m.adjoint()).norm();
    if herm > 1e-10 * m.norm().max(1.0) {
        return false;
    }
    let mut a = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    for k in 0..n {
        let d = a[(k, k)].re;
        if d <= 0.0 {
            return false;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let update = a[(i, k)] * a[(k, j)] / d;
                a[(i, j)] -= update;
            }
        }
    }
    true
}

/// Pointwise Hermitian positive-definite fibre metric.
#[derive(Debug, Clone)]
pub struct FibreMetric {
    mat: DMatrix<Complex64>,
}

impl FibreMetric {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::ShapeMismatch("fibre metric must be square".into()));
        }
        let herm = (&mat - mat.adjoint()).norm();
        if herm > 1e-10 * mat.norm().max(1.0) {
            return Err(Error::DegenerateMetric(format!(
                "fibre metric not Hermitian (residual {herm:.3e})"
            )));
        }
        if !hermitian_positive_definite(&mat) {
            return Err(Error::DegenerateMetric(
                "fibre metric not positive definite".into(),
            ));
        }
        Ok(Self { mat })
    }

    pub fn identity(rank: usize) -> Self {
        Self {
            mat: DMatrix::identity(rank, rank),
        }
    }

    pub fn rank(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }
}

/// Λ_ω γ of a (1,1)-form against a positive (1,1)-form ω, defined by
/// γ ∧ ω^{n−1} = (Λ_ω γ / n) ω^n.
pub fn lambda_contract(gamma: &PQForm, omega: &PQForm) -> Result<Complex64> {
    gamma.expect_bidegree(1, 1)?;
    omega.expect_bidegree(1, 1)?;
    let n = omega.n();
    let top = omega.wedge_power(n)?;
    let vol = top.density()?;
    if vol.norm() < 1e-300 || vol.re <= 0.0 {
        return Err(Error::DegenerateMetric(format!(
            "omega^n density {vol} is not positive"
        )));
    }
    let numerator = gamma.wedge(&omega.wedge_power(n - 1)?)?;
    Ok(numerator.top_ratio(&top)? * n as f64)
}

/// Sesquilinear bracket {η, ξ}_h = Σ_{α,β} η_α ∧ ξ̄_β h(e_α, e_β) of two
/// E-valued (1,0)-forms given by their frame components.
pub fn sesquilinear_bracket(eta: &[PQForm], xi: &[PQForm], h: &FibreMetric) -> Result<PQForm> {
    if eta.len() != h.rank() || xi.len() != h.rank() {
        return Err(Error::RankMismatch(eta.len(), h.rank()));
    }
    let n = eta[0].n();
    let mut out = PQForm::zero(n, 1, 1)?;
    for (alpha, ea) in eta.iter().enumerate() {
        ea.expect_bidegree(1, 0)?;
        for (beta, xb) in xi.iter().enumerate() {
            xb.expect_bidegree(1, 0)?;
            let term = ea.wedge(&xb.conjugate())?;
            out.add_assign(&term.scaled(h.matrix()[(alpha, beta)]))?;
        }
    }
    Ok(out)
}

/// Verdict of the randomized weak-positivity sampler.
#[derive(Debug, Clone)]
pub enum PositivityVerdict {
    PlausiblyPositive,
    CertifiedNegative {
        witness: Vec<PQForm>,
        density: f64,
    },
}

impl PositivityVerdict {
    pub fn is_positive(&self) -> bool {
        matches!(self, PositivityVerdict::PlausiblyPositive)
    }
}

fn random_unit_one_form(n: usize, rng: &mut ChaCha8Rng) -> PQForm {
    // Box-Muller pairs for rotation-invariant directions
    let mut coeffs = Vec::with_capacity(n);
    let mut norm2 = 0.0;
    for _ in 0..n {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (-2.0 * u1.ln()).sqrt();
        let c = Complex64::new(r * u2.cos(), r * u2.sin());
        norm2 += c.norm_sqr();
        coeffs.push(c);
    }
    let scale = 1.0 / norm2.sqrt();
    let mut out = PQForm::zero(n, 1, 0).expect("valid");
    for (j, c) in coeffs.into_iter().enumerate() {
        let basis = PQForm::dz(n, j).expect("valid");
        out.add_assign(&basis.scaled(c * scale)).expect("degree");
    }
    out
}

/// Sample the weak positivity of a real (n−m, n−m)-form by pairing with
/// random simple strongly positive (m, m)-forms iα_1∧ᾱ_1 ∧ … ∧ iα_m∧ᾱ_m.
/// Returns a witness as soon as a sampled density drops below `delta`.
pub fn weak_positivity_sample(
    omega_test: &PQForm,
    m: usize,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<PositivityVerdict> {
    let n = omega_test.n();
    if m == 0 || m > n {
        return Err(Error::InvalidGrid(format!("level m = {m} outside 1..={n}")));
    }
    omega_test.expect_bidegree(n - m, n - m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let alphas: Vec<PQForm> = (0..m).map(|_| random_unit_one_form(n, &mut rng)).collect();
        let mut prod = omega_test.clone();
        for alpha in &alphas {
            let pair = alpha.wedge(&alpha.conjugate())?.scaled(Complex64::i());
            prod = prod.wedge(&pair)?;
        }
        let density = prod.density()?.re;
        if density < delta {
            return Ok(PositivityVerdict::CertifiedNegative {
                witness: alphas,
                density,
            });
        }
    }
    Ok(PositivityVerdict::PlausiblyPositive)
}

/// Exhaustive variant of the sampler: runs every trial and reports the
/// smallest density seen together with its directions.
pub fn weak_positivity_scan(
    omega_test: &PQForm,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, Vec<PQForm>)> {
    let n = omega_test.n();
    if m == 0 || m > n {
        return Err(Error::InvalidGrid(format!("level m = {m} outside 1..={n}")));
    }
    omega_test.expect_bidegree(n - m, n - m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_density = f64::INFINITY;
    let mut argmin = Vec::new();
    for _ in 0..trials {
        let alphas: Vec<PQForm> = (0..m).map(|_| random_unit_one_form(n, &mut rng)).collect();
        let mut prod = omega_test.clone();
        for alpha in &alphas {
            let pair = alpha.wedge(&alpha.conjugate())?.scaled(Complex64::i());
            prod = prod.wedge(&pair)?;
        }
        let density = prod.density()?.re;
        if density < min_density {
            min_density = density;
            argmin = alphas;
        }
    }
    Ok((min_density, argmin))
}

/// Density of i{η,η}_h ∧ ω^{m−1} ∧ Ω against dV_n; nonnegative whenever Ω is
/// weakly positive, zero exactly on η = 0 when the positivity is strict.
pub fn positivity_density(
    eta: &[PQForm],
    h: &FibreMetric,
    omega: &PQForm,
    omega_test: &PQForm,
    m: usize,
) -> Result<f64> {
    let n = omega.n();
    omega.expect_bidegree(1, 1)?;
    omega_test.expect_bidegree(n - m, n - m)?;
    let bracket = sesquilinear_bracket(eta, eta, h)?.scaled(Complex64::i());
    let t = bracket
        .wedge(&omega.wedge_power(m - 1)?)?
        .wedge(omega_test)?;
    Ok(t.density()?.re)
}

/// Densities of Trace_Q(iβ∧β⋆ ∧ ω^{m−1} ∧ Ω) and Trace_S(iβ⋆∧β ∧ ω^{m−1} ∧ Ω)
/// against dV_n, for a Hom(S, Q)-valued (1,0)-form β of shape q×s.
pub fn beta_trace_densities(
    beta: &MatrixPQForm,
    omega: &PQForm,
    omega_test: &PQForm,
    m: usize,
) -> Result<(f64, f64)> {
    let n = omega.n();
    omega.expect_bidegree(1, 1)?;
    omega_test.expect_bidegree(n - m, n - m)?;
    if beta.bidegree() != (1, 0) {
        let (p, q) = beta.bidegree();
        return Err(Error::BidegreeMismatch {
            expected_p: 1,
            expected_q: 0,
            got_p: p,
            got_q: q,
        });
    }
    let beta_star = beta.dagger();
    let wm1 = omega.wedge_power(m - 1)?;
    let q_trace = beta.wedge(&beta_star)?.trace()?.scaled(Complex64::i());
    let s_trace = beta_star.wedge(beta)?.trace()?.scaled(Complex64::i());
    let dq = q_trace.wedge(&wm1)?.wedge(omega_test)?.density()?.re;
    let ds = s_trace.wedge(&wm1)?.wedge(omega_test)?.density()?.re;
    Ok((dq, ds))
}
