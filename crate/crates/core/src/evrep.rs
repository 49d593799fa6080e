//! The expectation-value representation: density matrices as vectors of
//! coherent-state probabilities.
//!
//! `P_n = <n_n|rho|n_n>` and, inversely, `rho = (1/(2s+1)) sum_n P_n D^n`
//! with `D^n` the dual basis of the quorum. A Hermitian operator `A` has two
//! coefficient sets: `A^n = Tr[A D^n]` (expansion over the projectors) and
//! `A_n = Tr[A Q_n]` (expansion over the duals).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{ensure_hermitian, max_abs_c, trace_product, CMatrix, RVector};
use crate::numerics::numerics;
use crate::quorum::Quorum;
use crate::spinalg::DensityMatrix;

/// Coherent-state probabilities on one quorum.
#[derive(Debug, Clone, PartialEq)]
pub struct PVector {
    values: RVector,
    fingerprint: u64,
}

impl PVector {
    pub fn new(values: Vec<f64>, q: &Quorum) -> Result<Self> {
        if values.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "probability vector has a non-finite entry".into(),
            ));
        }
        Ok(PVector {
            values: RVector::from_vec(values),
            fingerprint: q.fingerprint(),
        })
    }

    pub(crate) fn from_raw(values: RVector, fingerprint: u64) -> Self {
        PVector {
            values,
            fingerprint,
        }
    }

    pub fn values(&self) -> &RVector {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn sum(&self) -> f64 {
        self.values.sum()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// `e . P`, equal to `Tr[rho]` for the reconstructed operator.
    pub fn normalization(&self, q: &Quorum) -> Result<f64> {
        self.ensure_on(q)?;
        Ok(q.dual_traces().dot(&self.values))
    }

    pub fn ensure_on(&self, q: &Quorum) -> Result<()> {
        if self.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                found: self.len(),
            });
        }
        if self.fingerprint != q.fingerprint() {
            return Err(Error::QuorumMismatch);
        }
        Ok(())
    }

    fn ensure_same(&self, other: &PVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        if self.fingerprint != other.fingerprint {
            return Err(Error::QuorumMismatch);
        }
        Ok(())
    }
}

pub fn rho_to_pvec(rho: &DensityMatrix, q: &Quorum) -> Result<PVector> {
    if rho.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: rho.dim(),
        });
    }
    let values = RVector::from_iterator(
        q.len(),
        q.states()
            .iter()
            .map(|st| rho.expectation_in(&st.amplitudes)),
    );
    Ok(PVector::from_raw(values, q.fingerprint()))
}

/// Trace, spectrum and bound checks for a reconstructed operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Physicality {
    pub trace: f64,
    pub min_eigenvalue: f64,
    /// `e . P`
    pub normalization: f64,
    /// Every `P_n` in `[0, 1]`.
    pub within_bounds: bool,
    /// Unit trace and positive semidefinite, within `residual_tol`.
    pub physical: bool,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    pub physicality: Physicality,
}

/// `rho = (1/(2s+1)) sum_n P_n D^n`. Never rejects an unphysical `P`; the
/// accompanying [`Physicality`] says whether the result is a state.
pub fn pvec_to_rho(p: &PVector, q: &Quorum) -> Result<Reconstruction> {
    p.ensure_on(q)?;
    let d = q.dim();
    let df = d as f64;
    let mut acc = CMatrix::zeros(d, d);
    for (dual, &pn) in q.duals().iter().zip(p.values.iter()) {
        acc += dual.map(|z| z * (pn / df));
    }
    let rho = DensityMatrix::from_matrix_symmetrized(acc);
    let tol = numerics().residual_tol;
    let trace = rho.trace();
    let min_eigenvalue = rho.min_eigenvalue()?;
    let physicality = Physicality {
        trace,
        min_eigenvalue,
        normalization: q.dual_traces().dot(&p.values),
        within_bounds: p.values.iter().all(|&x| (-tol..=1.0 + tol).contains(&x)),
        physical: (trace - 1.0).abs() <= tol && min_eigenvalue >= -tol,
    };
    Ok(Reconstruction { rho, physicality })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCoefficients {
    /// `A^n = Tr[A D^n]`
    pub primal: RVector,
    /// `A_n = Tr[A Q_n]`
    pub dual: RVector,
    dim: usize,
    fingerprint: u64,
}

impl OperatorCoefficients {
    /// `(1/(2s+1)) sum_n A^n Q_n`
    pub fn reconstruct_from_primal(&self, q: &Quorum) -> Result<CMatrix> {
        self.ensure_on(q)?;
        Ok(weighted_sum(q.projectors(), &self.primal, q.dim()))
    }

    /// `(1/(2s+1)) sum_n A_n D^n`
    pub fn reconstruct_from_dual(&self, q: &Quorum) -> Result<CMatrix> {
        self.ensure_on(q)?;
        Ok(weighted_sum(q.duals(), &self.dual, q.dim()))
    }

    fn ensure_on(&self, q: &Quorum) -> Result<()> {
        if self.fingerprint != q.fingerprint() {
            return Err(Error::QuorumMismatch);
        }
        Ok(())
    }
}

fn weighted_sum(ops: &[CMatrix], w: &RVector, d: usize) -> CMatrix {
    let df = d as f64;
    let mut acc = CMatrix::zeros(d, d);
    for (m, &c) in ops.iter().zip(w.iter()) {
        acc += m.map(|z| z * (c / df));
    }
    acc
}

fn real_part_checked(z: num_complex::Complex64) -> Result<f64> {
    let tol = numerics().imaginary_tol * z.re.abs().max(1.0);
    if z.im.abs() > tol {
        return Err(Error::InvariantViolation {
            what: "operator coefficient must be real",
            deviation: z.im.abs(),
            tolerance: tol,
        });
    }
    Ok(z.re)
}

pub fn expand_operator(a: &CMatrix, q: &Quorum) -> Result<OperatorCoefficients> {
    ensure_hermitian(a)?;
    if a.nrows() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: a.nrows(),
        });
    }
    let primal = q
        .duals()
        .iter()
        .map(|dual| real_part_checked(trace_product(a, dual)))
        .collect::<Result<Vec<_>>>()?;
    let dual = q
        .states()
        .iter()
        .map(|st| real_part_checked(st.amplitudes.dotc(&(a * &st.amplitudes))))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorCoefficients {
        primal: RVector::from_vec(primal),
        dual: RVector::from_vec(dual),
        dim: q.dim(),
        fingerprint: q.fingerprint(),
    })
}

/// `<A> = (1/(2s+1)) sum_n A^n P_n`
pub fn expectation(a: &OperatorCoefficients, p: &PVector) -> Result<f64> {
    if a.primal.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: a.primal.len(),
            found: p.len(),
        });
    }
    if a.fingerprint != p.fingerprint {
        return Err(Error::QuorumMismatch);
    }
    Ok(a.primal.dot(&p.values) / a.dim as f64)
}

/// Max entry of `|rho - pvec_to_rho(rho_to_pvec(rho))|`.
pub fn round_trip_deviation(rho: &DensityMatrix, q: &Quorum) -> Result<f64> {
    let back = pvec_to_rho(&rho_to_pvec(rho, q)?, q)?;
    Ok(max_abs_c(&(back.rho.matrix() - rho.matrix())))
}

/// `P_a + lambda (P_b - P_a)`, evaluated as `(1 - lambda) P_a + lambda P_b`
/// so both endpoints are reproduced exactly.
pub fn convex_mix(pa: &PVector, pb: &PVector, lambda: f64) -> Result<PVector> {
    pa.ensure_same(pb)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    let values = &pa.values * (1.0 - lambda) + &pb.values * lambda;
    Ok(PVector::from_raw(values, pa.fingerprint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::max_abs_c;
    use crate::quorum::{build_quorum, QuorumConfig};
    use crate::spinalg::{coherent_state, Direction, Spin};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn quorum(two_s: u32) -> Quorum {
        build_quorum(QuorumConfig::default_for(Spin::from_two_s(two_s))).unwrap()
    }

    #[test]
    fn maximally_mixed_both_ways() {
        for two_s in 0..=4 {
            let q = quorum(two_s);
            let d = q.dim() as f64;
            let rho = DensityMatrix::maximally_mixed(q.spin());
            let p = rho_to_pvec(&rho, &q).unwrap();
            assert!(p.as_slice().iter().all(|&x| (x - 1.0 / d).abs() < 1e-14));

            let back = pvec_to_rho(&PVector::new(vec![1.0 / d; q.len()], &q).unwrap(), &q).unwrap();
            assert!(max_abs_c(&(back.rho.matrix() - rho.matrix())) < 1e-10);
            assert!(back.physicality.physical);
        }
    }

    #[test]
    fn quorum_projector_state_has_unit_probability() {
        let q = quorum(2);
        let n0 = 4;
        let rho = DensityMatrix::coherent(&q.states()[n0]);
        let p = rho_to_pvec(&rho, &q).unwrap();
        assert!((p.as_slice()[n0] - 1.0).abs() < 1e-14);
        for (n, &x) in p.as_slice().iter().enumerate() {
            if n != n0 {
                assert!(x < 1.0);
                let ov = q.states()[n]
                    .amplitudes
                    .dotc(&q.states()[n0].amplitudes)
                    .norm_sqr();
                assert!((x - ov).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_state_bounds_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = quorum(2);
        for _ in 0..20 {
            let rho = DensityMatrix::random_mixed(q.spin(), &mut rng);
            let p = rho_to_pvec(&rho, &q).unwrap();
            assert!(p.min() >= 0.0 && p.max() <= 1.0);
            assert!((p.normalization(&q).unwrap() - 1.0).abs() < 1e-12);
            let back = pvec_to_rho(&p, &q).unwrap();
            assert!(max_abs_c(&(back.rho.matrix() - rho.matrix())) < 1e-9);
        }
    }

    #[test]
    fn unphysical_vector_is_reported_not_rejected() {
        let q = quorum(2);
        let st = coherent_state(q.operators(), Direction::new(0.9, 0.4).unwrap()).unwrap();
        let p = rho_to_pvec(&DensityMatrix::coherent(&st), &q).unwrap();
        let mut v: Vec<f64> = p.as_slice().to_vec();
        let i = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        v[i] += 0.5;
        let e = q.dual_traces();
        let norm: f64 = v.iter().zip(e.iter()).map(|(a, b)| a * b).sum();
        v.iter_mut().for_each(|x| *x /= norm);
        let bad = PVector::new(v, &q).unwrap();
        let rec = pvec_to_rho(&bad, &q).unwrap();
        assert!((rec.physicality.normalization - 1.0).abs() < 1e-12);
        assert!((rec.physicality.trace - 1.0).abs() < 1e-10);
        assert!(rec.physicality.min_eigenvalue < -1e-3);
        assert!(!rec.physicality.physical);
    }

    #[test]
    fn expand_identity_and_projector() {
        let q = quorum(3);
        let d = q.dim();
        let id = CMatrix::identity(d, d);
        let c = expand_operator(&id, &q).unwrap();
        assert!(c.dual.iter().all(|&x| (x - 1.0).abs() < 1e-13));

        let n0 = 7;
        let c = expand_operator(&q.projectors()[n0], &q).unwrap();
        for (n, &x) in c.primal.iter().enumerate() {
            let target = if n == n0 { d as f64 } else { 0.0 };
            assert!((x - target).abs() < 1e-9, "n = {n}: {x}");
        }
    }

    #[test]
    fn expand_sz_spin_half() {
        let q = quorum(1);
        let sz = q.operators().sz.clone();
        let c = expand_operator(&sz, &q).unwrap();
        for (n, dir) in q.directions().iter().enumerate() {
            assert!((c.dual[n] - dir.theta.cos() / 2.0).abs() < 1e-14);
        }
        assert!(max_abs_c(&(c.reconstruct_from_primal(&q).unwrap() - &sz)) < 1e-9);
        assert!(max_abs_c(&(c.reconstruct_from_dual(&q).unwrap() - &sz)) < 1e-9);
    }

    #[test]
    fn expand_rejects_non_hermitian() {
        let q = quorum(1);
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = num_complex::Complex64::new(1.0, 0.0);
        assert!(matches!(
            expand_operator(&a, &q),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn expectation_examples() {
        let q = quorum(2);
        let d = q.dim();
        let ops = q.operators().clone();
        let rng = &mut ChaCha8Rng::seed_from_u64(4);
        let p = rho_to_pvec(&DensityMatrix::random_mixed(q.spin(), rng), &q).unwrap();
        let id = expand_operator(&CMatrix::identity(d, d), &q).unwrap();
        assert!((expectation(&id, &p).unwrap() - 1.0).abs() < 1e-12);

        let up = rho_to_pvec(&DensityMatrix::basis_state(q.spin(), 0).unwrap(), &q).unwrap();
        let sz = expand_operator(&ops.sz, &q).unwrap();
        assert!((expectation(&sz, &up).unwrap() - 1.0).abs() < 1e-12);

        let x = coherent_state(&ops, Direction::new(PI / 2.0, 0.0).unwrap()).unwrap();
        let px = rho_to_pvec(&DensityMatrix::coherent(&x), &q).unwrap();
        let sx = expand_operator(&ops.sx, &q).unwrap();
        assert!((expectation(&sx, &px).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convex_mix_endpoints_and_errors() {
        let q = quorum(2);
        let rng = &mut ChaCha8Rng::seed_from_u64(8);
        let pa = rho_to_pvec(&DensityMatrix::random_mixed(q.spin(), rng), &q).unwrap();
        let pb = rho_to_pvec(&DensityMatrix::random_pure(q.spin(), rng), &q).unwrap();
        assert_eq!(convex_mix(&pa, &pb, 0.0).unwrap(), pa);
        assert_eq!(convex_mix(&pa, &pb, 1.0).unwrap(), pb);
        assert!(matches!(
            convex_mix(&pa, &pb, 1.5),
            Err(Error::LambdaOutOfRange(_))
        ));

        let other = quorum(1);
        let pc = rho_to_pvec(&DensityMatrix::maximally_mixed(other.spin()), &other).unwrap();
        assert!(convex_mix(&pa, &pc, 0.5).is_err());
    }

    #[test]
    fn vectors_from_other_quorums_are_rejected() {
        let q = quorum(2);
        let mut cfg = QuorumConfig::default_for(Spin::from_two_s(2));
        cfg.azimuth_offsets[0] = 0.05;
        let q2 = build_quorum(cfg).unwrap();
        let p = rho_to_pvec(&DensityMatrix::maximally_mixed(q.spin()), &q).unwrap();
        assert!(matches!(pvec_to_rho(&p, &q2), Err(Error::QuorumMismatch)));
        assert!(matches!(
            PVector::new(vec![0.1; 3], &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
