//! Spin-s operator algebra, coherent states and Hamiltonians.
//!
//! Conventions: `hbar = 1`, so Hamiltonian coefficients are angular
//! frequencies. Basis vectors are ordered `mu = s, s-1, ..., -s`, so row 0
//! is `|s, n_z>`.

use std::f64::consts::PI;

use nalgebra::QR;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    ensure_hermitian, hermitian_eigendecomposition, max_abs_c, CMatrix, CVector, HermitianEigen,
};
use crate::numerics::numerics;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Spin quantum number, stored doubled so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin {
    two_s: u32,
}

impl Spin {
    pub const fn from_two_s(two_s: u32) -> Self {
        Spin { two_s }
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn s(self) -> f64 {
        f64::from(self.two_s) / 2.0
    }

    /// Hilbert-space dimension `2s + 1`.
    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    /// Number of quorum elements `(2s + 1)^2`.
    pub fn quorum_size(self) -> usize {
        self.dim() * self.dim()
    }

    /// Magnetic quantum number of basis row `k`.
    pub fn mu(self, k: usize) -> f64 {
        self.s() - k as f64
    }

    /// Basis row of magnetic quantum number `mu`, if `mu` is one of `s, ..., -s`.
    pub fn index_of_mu(self, mu: f64) -> Option<usize> {
        let k = self.s() - mu;
        let r = k.round();
        ((k - r).abs() < 1e-9 && r >= 0.0 && r <= f64::from(self.two_s)).then_some(r as usize)
    }
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.two_s.is_multiple_of(2) {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub spin: Spin,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
}

impl SpinOperators {
    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// `n . s` for a unit vector `n`.
    pub fn along(&self, n: [f64; 3]) -> CMatrix {
        self.sx.map(|z| z * n[0]) + self.sy.map(|z| z * n[1]) + self.sz.map(|z| z * n[2])
    }

    pub fn component(&self, i: usize) -> &CMatrix {
        match i {
            0 => &self.sx,
            1 => &self.sy,
            _ => &self.sz,
        }
    }
}

/// Ladder-operator construction in the `s_z` eigenbasis.
pub fn build_spin_operators(spin: Spin) -> SpinOperators {
    let d = spin.dim();
    let s = spin.s();
    let mut raise = CMatrix::zeros(d, d);
    for k in 1..d {
        let mu = spin.mu(k);
        raise[(k - 1, k)] = Complex64::new((s * (s + 1.0) - mu * (mu + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let sx = (&raise + &lower).map(|z| z * 0.5);
    let sy = (&raise - &lower).map(|z| z / (2.0 * I));
    let sz = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(spin.mu(i), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    SpinOperators { spin, sx, sy, sz }
}

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    /// `theta` must lie in `[0, pi]`; `phi` is wrapped into `[0, 2pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidInput(format!(
                "direction (theta = {theta}, phi = {phi}) outside theta in [0, pi]"
            )));
        }
        let phi = phi.rem_euclid(2.0 * PI);
        Ok(Direction { theta, phi })
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Angle between the two unit vectors.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let (a, b) = (self.unit_vector(), other.unit_vector());
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        dot.clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone)]
pub struct CoherentState {
    pub spin: Spin,
    pub direction: Direction,
    /// Components in the `s_z` eigenbasis.
    pub amplitudes: CVector,
}

impl CoherentState {
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// `exp(-i theta m(phi) . s) |s, n_z>` with `m(phi) = (-sin phi, cos phi, 0)`.
pub fn coherent_state(ops: &SpinOperators, dir: Direction) -> Result<CoherentState> {
    let d = ops.dim();
    let mut amplitudes = CVector::zeros(d);
    if dir.theta == 0.0 {
        amplitudes[0] = Complex64::new(1.0, 0.0);
    } else {
        let (sp, cp) = dir.phi.sin_cos();
        let axis = ops.along([-sp, cp, 0.0]);
        let eig = hermitian_eigendecomposition(&axis)?;
        // exp(-i theta A) e_0 = V exp(-i theta Lambda) V^H e_0
        for k in 0..d {
            let w = (-I * dir.theta * eig.values[k]).exp() * eig.vectors[(0, k)].conj();
            for r in 0..d {
                amplitudes[r] += eig.vectors[(r, k)] * w;
            }
        }
    }
    Ok(CoherentState {
        spin: ops.spin,
        direction: dir,
        amplitudes,
    })
}

pub fn coherent_overlap(a: &CoherentState, b: &CoherentState) -> Result<Complex64> {
    if a.amplitudes.len() != b.amplitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: a.amplitudes.len(),
            found: b.amplitudes.len(),
        });
    }
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

/// Static part of a Hamiltonian: `sum_i b_i s_i + sum_ij c_ij (s_i s_j + s_j s_i) / 2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianTerms {
    #[serde(default)]
    pub linear: [f64; 3],
    #[serde(default)]
    pub quadratic: [[f64; 3]; 3],
}

impl HamiltonianTerms {
    pub fn linear(b: [f64; 3]) -> Self {
        HamiltonianTerms {
            linear: b,
            ..Default::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.linear.iter().all(|&x| x == 0.0) && self.quadratic.iter().flatten().all(|&x| x == 0.0)
    }
}

/// Scalar time dependence of a drive term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant {
        value: f64,
    },
    /// `amplitude * cos(frequency * t + phase)`
    Cosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `values[i]` on `[breakpoints[i-1], breakpoints[i])`, with open ends.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        if let Envelope::PiecewiseConstant {
            breakpoints,
            values,
        } = self
        {
            if values.len() != breakpoints.len() + 1 {
                return Err(Error::InvalidInput(format!(
                    "piecewise envelope needs {} values for {} breakpoints, got {}",
                    breakpoints.len() + 1,
                    breakpoints.len(),
                    values.len()
                )));
            }
            if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(
                    "piecewise envelope breakpoints must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { value } => *value,
            Envelope::Cosine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
            Envelope::PiecewiseConstant {
                breakpoints,
                values,
            } => values[breakpoints.partition_point(|&b| b <= t)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    #[serde(default)]
    pub linear: [f64; 3],
    #[serde(default)]
    pub quadratic: [[f64; 3]; 3],
    pub envelope: Envelope,
}

impl Drive {
    pub fn terms(&self) -> HamiltonianTerms {
        HamiltonianTerms {
            linear: self.linear,
            quadratic: self.quadratic,
        }
    }
}

/// `H(t) = H_0 + f(t) H_1`; the drive is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default)]
    pub linear: [f64; 3],
    #[serde(default)]
    pub quadratic: [[f64; 3]; 3],
    #[serde(default)]
    pub drive: Option<Drive>,
}

impl HamiltonianSpec {
    pub fn terms(&self) -> HamiltonianTerms {
        HamiltonianTerms {
            linear: self.linear,
            quadratic: self.quadratic,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.drive.is_some()
    }

    /// `H(t)` as a matrix.
    pub fn at(&self, ops: &SpinOperators, t: f64) -> Result<CMatrix> {
        let h0 = build_hamiltonian(&self.terms(), ops)?;
        match &self.drive {
            None => Ok(h0),
            Some(drive) => {
                let h1 = build_hamiltonian(&drive.terms(), ops)?;
                let f = drive.envelope.eval(t);
                Ok(h0 + h1.map(|z| z * f))
            }
        }
    }
}

pub fn build_hamiltonian(terms: &HamiltonianTerms, ops: &SpinOperators) -> Result<CMatrix> {
    let c = &terms.quadratic;
    let mut asym = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            asym = asym.max((c[i][j] - c[j][i]).abs());
        }
    }
    if asym > 0.0 {
        return Err(Error::NonSymmetricQuadraticCoefficients { deviation: asym });
    }
    if terms
        .linear
        .iter()
        .chain(c.iter().flatten())
        .any(|x| !x.is_finite())
    {
        return Err(Error::InvalidInput(
            "non-finite Hamiltonian coefficient".into(),
        ));
    }
    let d = ops.dim();
    let mut h = CMatrix::zeros(d, d);
    for i in 0..3 {
        if terms.linear[i] != 0.0 {
            h += ops.component(i).map(|z| z * terms.linear[i]);
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            if c[i][j] != 0.0 {
                let (a, b) = (ops.component(i), ops.component(j));
                h += (a * b + b * a).map(|z| z * (0.5 * c[i][j]));
            }
        }
    }
    Ok(h)
}

/// A Hermitian operator on the spin Hilbert space used as a state.
///
/// Hermiticity is enforced on construction; trace and positivity are
/// reported by [`DensityMatrix::trace`] and [`DensityMatrix::min_eigenvalue`]
/// because reconstructions from arbitrary probability vectors may violate them.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    pub fn from_matrix(rho: CMatrix) -> Result<Self> {
        ensure_hermitian(&rho)?;
        Ok(DensityMatrix { rho })
    }

    /// Hermitian part of `rho`, without a tolerance check.
    pub(crate) fn from_matrix_symmetrized(rho: CMatrix) -> Self {
        let h = (&rho + rho.adjoint()).map(|z| z * 0.5);
        DensityMatrix { rho: h }
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm2 = psi.norm_squared();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidInput(
                "zero or non-finite state vector".into(),
            ));
        }
        Ok(DensityMatrix::from_matrix_symmetrized(
            (psi * psi.adjoint()).map(|z| z / norm2),
        ))
    }

    pub fn maximally_mixed(spin: Spin) -> Self {
        let d = spin.dim();
        DensityMatrix {
            rho: CMatrix::identity(d, d).map(|z| z / d as f64),
        }
    }

    /// `|mu><mu|` for basis row `index` (`mu = s - index`).
    pub fn basis_state(spin: Spin, index: usize) -> Result<Self> {
        let d = spin.dim();
        if index >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: index + 1,
            });
        }
        let mut rho = CMatrix::zeros(d, d);
        rho[(index, index)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { rho })
    }

    pub fn coherent(state: &CoherentState) -> Self {
        DensityMatrix::from_matrix_symmetrized(state.projector())
    }

    /// Haar-random pure state.
    pub fn random_pure<R: Rng + ?Sized>(spin: Spin, rng: &mut R) -> Self {
        let psi = gaussian_vector(spin.dim(), rng);
        DensityMatrix::pure(&psi).expect("gaussian vector is nonzero")
    }

    /// `V diag(p) V^H` with `V` Haar-random and `p` uniform on the simplex.
    pub fn random_mixed<R: Rng + ?Sized>(spin: Spin, rng: &mut R) -> Self {
        let d = spin.dim();
        let v = haar_unitary(d, rng);
        let mut p: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let mut vp = v.clone();
        for (k, &pk) in p.iter().enumerate() {
            vp.column_mut(k).iter_mut().for_each(|z| *z *= pk);
        }
        let rho = vp * v.adjoint();
        // V is unitary only to rounding; rescale to unit trace
        let trace = rho.trace().re;
        DensityMatrix::from_matrix_symmetrized(rho.map(|z| z / trace))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigendecomposition(&self.rho)?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Unit trace and eigenvalues >= -`residual_tol`.
    pub fn is_physical(&self) -> Result<bool> {
        let tol = numerics().residual_tol;
        Ok((self.trace() - 1.0).abs() <= tol && self.min_eigenvalue()? >= -tol)
    }

    /// `<psi| rho |psi>`, real part.
    pub fn expectation_in(&self, psi: &CVector) -> f64 {
        psi.dotc(&(&self.rho * psi)).re
    }
}

fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    CVector::from_fn(d, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Haar unitary from the phase-corrected QR of a complex Ginibre matrix.
fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = QR::new(g);
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

/// `U(t) = exp(-i H t)` from one eigendecomposition of `H`.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    eig: HermitianEigen,
}

impl UnitaryPropagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        Ok(UnitaryPropagator {
            eig: hermitian_eigendecomposition(h)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.eig.values.len()
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        self.eig.map_spectrum(|e| (-I * e * t).exp())
    }

    /// `U rho0 U^H`
    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if self.dim() != rho0.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho0.dim(),
                found: self.dim(),
            });
        }
        let u = self.unitary(t);
        Ok(DensityMatrix::from_matrix_symmetrized(
            &u * rho0.matrix() * u.adjoint(),
        ))
    }
}

/// Reference propagator `rho(t) = U rho0 U^H`, `U = exp(-i H t)`.
pub fn oracle_evolve(rho0: &DensityMatrix, h: &CMatrix, t: f64) -> Result<DensityMatrix> {
    UnitaryPropagator::new(h)?.evolve(rho0, t)
}

/// Max deviation of `[s_x, s_y] = i s_z` and cyclic relations.
pub fn commutation_residual(ops: &SpinOperators) -> f64 {
    let c = |a: &CMatrix, b: &CMatrix| a * b - b * a;
    let r1 = max_abs_c(&(c(&ops.sx, &ops.sy) - ops.sz.map(|z| z * I)));
    let r2 = max_abs_c(&(c(&ops.sy, &ops.sz) - ops.sx.map(|z| z * I)));
    let r3 = max_abs_c(&(c(&ops.sz, &ops.sx) - ops.sy.map(|z| z * I)));
    r1.max(r2).max(r3)
}
