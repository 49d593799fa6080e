//! Spin-s quantum dynamics in the expectation-value representation.
//!
//! A spin-s state is parameterized by the `(2s+1)^2` probabilities
//! `P_n = <n_n|rho|n_n>` of finding the maximal projection `s` along a
//! fixed set of directions (the quorum). The probabilities determine the
//! density matrix through a dual operator basis, and the von Neumann
//! equation becomes a closed, real, linear flow `dP/dt = M P`.
//!
//! Module map:
//!
//! * [`kernels`]: dense linear algebra contracts (Hermitian eigensolver,
//!   SPD solve, real matrix exponential).
//! * [`spinalg`]: spin operators, coherent states, Hamiltonians, and the
//!   density-matrix reference propagator.
//! * [`quorum`]: measurement directions, projectors, Gram matrix, dual basis.
//! * [`evrep`]: conversions between density matrices, probability vectors and
//!   operator coefficients.
//! * [`dynamics`]: the generator `M`, propagation, fixed points, and the
//!   comparison against density-matrix evolution.

pub mod dynamics;
pub mod error;
pub mod evrep;
pub mod kernels;
pub mod numerics;
pub mod quorum;
pub mod spinalg;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use dynamics::{
    bohr_frequencies, build_generator, fixed_points, oracle_compare, propagate_exact,
    propagate_grid, uniform_grid, DrivenGenerator, FixedPoints, Flow, Generator,
    GeneratorDiagnostics, Method, Monitor, Trajectory,
};
pub use evrep::{
    convex_mix, expand_operator, expectation, pvec_to_rho, rho_to_pvec, round_trip_deviation,
    OperatorCoefficients, PVector, Physicality, Reconstruction,
};
pub use kernels::{CMatrix, CVector, RMatrix, RVector};
pub use quorum::{build_quorum, gram_condition, Quorum, QuorumConfig, QuorumDocument};
pub use spinalg::{
    build_hamiltonian, build_spin_operators, coherent_overlap, coherent_state, oracle_evolve,
    CoherentState, DensityMatrix, Direction, Drive, Envelope, HamiltonianSpec, HamiltonianTerms,
    Spin, SpinOperators, UnitaryPropagator,
};
