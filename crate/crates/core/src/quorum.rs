//! The `(2s+1)^2`-direction measurement quorum and its dual operator basis.
//!
//! Directions sit on `2s+1` cones about the z axis, `2s+1` per cone,
//! equally spaced in azimuth. Element `n = k (2s+1) + j` is direction `j` on
//! cone `k`. The projectors `Q_n = |n_n><n_n|` span the Hermitian operators
//! whenever the Gram matrix `G_nn' = Tr[Q_n Q_n']` is positive definite, and
//! the dual operators satisfy `Tr[Q_n D^n'] / (2s+1) = delta_nn'`.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    from_hermitian_coords, hermitian_coords, max_abs_c, solve_general, symmetric_eigenvalues,
    trace_product, CMatrix, RMatrix, RVector,
};
use crate::numerics::numerics;
use crate::spinalg::{
    build_spin_operators, coherent_state, CoherentState, Direction, Spin, SpinOperators,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuorumConfig {
    pub spin: Spin,
    /// Polar angle of each cone, in `(0, pi)`.
    pub cone_angles: Vec<f64>,
    /// Azimuth of the first direction on each cone.
    pub azimuth_offsets: Vec<f64>,
}

impl QuorumConfig {
    /// Equal-area cones, `cos theta_k = 1 - (2k+1)/(2s+1)`, each twisted by
    /// `k pi / (2s+1)` (half the in-cone spacing) relative to the previous.
    pub fn default_for(spin: Spin) -> Self {
        let d = spin.dim();
        let df = d as f64;
        let cone_angles = (0..d)
            .map(|k| (1.0 - (2 * k + 1) as f64 / df).clamp(-1.0, 1.0).acos())
            .collect();
        let azimuth_offsets = (0..d).map(|k| k as f64 * PI / df).collect();
        QuorumConfig {
            spin,
            cone_angles,
            azimuth_offsets,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.spin.dim();
        for (name, list) in [
            ("cone_angles", &self.cone_angles),
            ("azimuth_offsets", &self.azimuth_offsets),
        ] {
            if list.len() != d {
                return Err(Error::InvalidInput(format!(
                    "{name} must have 2s+1 = {d} entries, got {}",
                    list.len()
                )));
            }
            if list.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} contains a non-finite value"
                )));
            }
        }
        if let Some(bad) = self.cone_angles.iter().find(|&&t| t <= 0.0 || t >= PI) {
            return Err(Error::InvalidInput(format!(
                "cone angle {bad} outside the open interval (0, pi)"
            )));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if self.cone_angles[i] == self.cone_angles[j] {
                    return Err(Error::SingularQuorum {
                        reason: format!(
                            "cone angles {i} and {j} coincide ({}); cones must have distinct opening angles",
                            self.cone_angles[i]
                        ),
                        min_eigenvalue: f64::NAN,
                        condition_number: f64::INFINITY,
                    });
                }
            }
        }
        Ok(())
    }

    /// Direction `j` on cone `k`.
    pub fn direction(&self, k: usize, j: usize) -> Result<Direction> {
        let d = self.spin.dim() as f64;
        Direction::new(
            self.cone_angles[k],
            self.azimuth_offsets[k] + 2.0 * PI * j as f64 / d,
        )
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.spin.hash(&mut h);
        for x in self.cone_angles.iter().chain(&self.azimuth_offsets) {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Residuals of the construction-time self-checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuorumDiagnostics {
    pub projector_residual: f64,
    pub duality_residual: f64,
    pub identity_residual: f64,
    pub gram_relation_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Quorum {
    config: QuorumConfig,
    ops: SpinOperators,
    fingerprint: u64,
    directions: Vec<Direction>,
    states: Vec<CoherentState>,
    projectors: Vec<CMatrix>,
    gram: RMatrix,
    duals: Vec<CMatrix>,
    dual_traces: RVector,
    min_gram_eigenvalue: f64,
    condition_number: f64,
    ill_conditioned: bool,
    diagnostics: QuorumDiagnostics,
}

pub fn build_quorum(config: QuorumConfig) -> Result<Quorum> {
    config.validate()?;
    let settings = numerics();
    let spin = config.spin;
    let d = spin.dim();
    let df = d as f64;
    let n_s = spin.quorum_size();
    let ops = build_spin_operators(spin);

    let mut directions = Vec::with_capacity(n_s);
    let mut states = Vec::with_capacity(n_s);
    for k in 0..d {
        for j in 0..d {
            let dir = config.direction(k, j)?;
            directions.push(dir);
            states.push(coherent_state(&ops, dir)?);
        }
    }
    let projectors: Vec<CMatrix> = states.iter().map(CoherentState::projector).collect();

    let mut gram = RMatrix::zeros(n_s, n_s);
    for a in 0..n_s {
        for b in a..n_s {
            let g = states[a].amplitudes.dotc(&states[b].amplitudes).norm_sqr();
            gram[(a, b)] = g;
            gram[(b, a)] = g;
        }
    }
    let spectrum = symmetric_eigenvalues(&gram)?;
    let (lo, hi) = (spectrum[0], spectrum[n_s - 1]);
    let condition_number = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if lo <= settings.singular_gram_ratio * hi {
        return Err(Error::SingularQuorum {
            reason: format!(
                "Gram matrix is not positive definite (min eigenvalue {lo:e}, max {hi:e})"
            ),
            min_eigenvalue: lo,
            condition_number,
        });
    }
    let ill_conditioned = condition_number > settings.ill_conditioned_above;
    if ill_conditioned {
        log::warn!(
            "quorum for s = {spin} is ill-conditioned: cond(G) = {condition_number:e} > {:e}",
            settings.ill_conditioned_above
        );
    }

    // Duals from the frame in orthonormal operator coordinates:
    // A^T X = (2s+1) I, where column n of A holds the coordinates of Q_n.
    let mut frame = RMatrix::zeros(n_s, n_s);
    for (n, q) in projectors.iter().enumerate() {
        frame.set_column(n, &hermitian_coords(q));
    }
    let rhs = RMatrix::identity(n_s, n_s) * df;
    let dual_coords = solve_general(&frame.transpose(), &rhs).map_err(|e| match e {
        Error::SingularMatrix { condition_estimate } => Error::SingularQuorum {
            reason: "projector frame is singular".into(),
            min_eigenvalue: lo,
            condition_number: condition_estimate * condition_estimate,
        },
        other => other,
    })?;
    let duals: Vec<CMatrix> = (0..n_s)
        .map(|n| from_hermitian_coords(dual_coords.column(n).as_slice(), d))
        .collect();
    let dual_traces = RVector::from_iterator(
        n_s,
        duals
            .iter()
            .map(|q| q.diagonal().iter().map(|z| z.re).sum::<f64>() / df),
    );

    let diagnostics = self_check(&states, &projectors, &gram, &duals, &dual_traces, d)?;

    Ok(Quorum {
        fingerprint: config.fingerprint(),
        config,
        ops,
        directions,
        states,
        projectors,
        gram,
        duals,
        dual_traces,
        min_gram_eigenvalue: lo,
        condition_number,
        ill_conditioned,
        diagnostics,
    })
}

fn self_check(
    states: &[CoherentState],
    projectors: &[CMatrix],
    gram: &RMatrix,
    duals: &[CMatrix],
    dual_traces: &RVector,
    d: usize,
) -> Result<QuorumDiagnostics> {
    let settings = numerics();
    let df = d as f64;
    let n_s = projectors.len();

    let mut projector_residual = 0.0_f64;
    for q in projectors {
        let idem = max_abs_c(&(q * q - q));
        let tr = (q.trace().re - 1.0).abs();
        projector_residual = projector_residual.max(idem).max(tr);
    }
    check(
        "projector idempotence and unit trace",
        projector_residual,
        settings.hermitian_tol,
    )?;

    let mut duality_residual = 0.0_f64;
    for (n, st) in states.iter().enumerate() {
        for (m, dual) in duals.iter().enumerate() {
            let v = st.amplitudes.dotc(&(dual * &st.amplitudes)).re / df;
            let target = if n == m { 1.0 } else { 0.0 };
            duality_residual = duality_residual.max((v - target).abs());
        }
    }
    check(
        "duality (1/(2s+1)) Tr[Q_n D^m] = delta",
        duality_residual,
        settings.duality_tol,
    )?;

    let mut identity = CMatrix::zeros(d, d);
    for (q, &e) in projectors.iter().zip(dual_traces.iter()) {
        identity += q.map(|z| z * (e * df));
    }
    let identity_residual = max_abs_c(&(identity - CMatrix::identity(d, d).map(|z| z * df)));
    check(
        "identity expansion sum Tr[D^n] Q_n = (2s+1) 1",
        identity_residual,
        settings.identity_tol,
    )?;

    // Q_n = (1/(2s+1)) sum_m G_nm D^m, relative to the size of the terms.
    let dual_scale = duals.iter().map(max_abs_c).fold(1.0_f64, f64::max);
    let mut gram_relation_residual = 0.0_f64;
    for (n, q) in projectors.iter().enumerate() {
        let mut acc = CMatrix::zeros(d, d);
        for m in 0..n_s {
            acc += duals[m].map(|z| z * (gram[(n, m)] / df));
        }
        gram_relation_residual = gram_relation_residual.max(max_abs_c(&(acc - q)) / dual_scale);
    }
    check(
        "Gram relation Q_n = (1/(2s+1)) sum G D",
        gram_relation_residual,
        settings.duality_tol,
    )?;

    Ok(QuorumDiagnostics {
        projector_residual,
        duality_residual,
        identity_residual,
        gram_relation_residual,
    })
}

fn check(what: &'static str, deviation: f64, tolerance: f64) -> Result<()> {
    if deviation <= tolerance {
        Ok(())
    } else {
        Err(Error::InvariantViolation {
            what,
            deviation,
            tolerance,
        })
    }
}

/// `(min eigenvalue of G, cond(G))`.
pub fn gram_condition(q: &Quorum) -> (f64, f64) {
    (q.min_gram_eigenvalue, q.condition_number)
}

impl Quorum {
    pub fn config(&self) -> &QuorumConfig {
        &self.config
    }

    pub fn spin(&self) -> Spin {
        self.config.spin
    }

    pub fn dim(&self) -> usize {
        self.config.spin.dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn operators(&self) -> &SpinOperators {
        &self.ops
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn states(&self) -> &[CoherentState] {
        &self.states
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn gram(&self) -> &RMatrix {
        &self.gram
    }

    pub fn duals(&self) -> &[CMatrix] {
        &self.duals
    }

    /// `e_n = Tr[D^n] / (2s+1)`, so that `e . P = Tr[rho]`.
    pub fn dual_traces(&self) -> &RVector {
        &self.dual_traces
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    pub fn diagnostics(&self) -> &QuorumDiagnostics {
        &self.diagnostics
    }

    /// Identifies the configuration; vectors built on different quorums never mix.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Max `|(1/(2s+1)) Tr[Q_n D^m] - delta_nm|` computed from full matrix traces.
    pub fn duality_matrix(&self) -> RMatrix {
        let df = self.dim() as f64;
        RMatrix::from_fn(self.len(), self.len(), |n, m| {
            trace_product(&self.projectors[n], &self.duals[m]).re / df
        })
    }

    pub fn export(&self) -> QuorumDocument {
        QuorumDocument {
            two_s: self.config.spin.two_s(),
            cone_angles: self.config.cone_angles.clone(),
            azimuth_offsets: self.config.azimuth_offsets.clone(),
            condition_number: self.condition_number,
            directions: self.directions.iter().map(|d| [d.theta, d.phi]).collect(),
        }
    }

    /// Rebuild from an exported document. Projectors and duals are always
    /// recomputed; the stored directions must agree with the rebuilt ones.
    pub fn import(doc: &QuorumDocument) -> Result<Quorum> {
        let q = build_quorum(doc.config())?;
        if doc.directions.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                found: doc.directions.len(),
            });
        }
        for (n, (stored, built)) in doc.directions.iter().zip(&q.directions).enumerate() {
            if (stored[0] - built.theta).abs() > 1e-12 || (stored[1] - built.phi).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "direction {n} in document ({}, {}) does not match the configuration ({}, {})",
                    stored[0], stored[1], built.theta, built.phi
                )));
            }
        }
        Ok(q)
    }
}

/// Text form of a quorum: configuration, directions, conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuorumDocument {
    pub two_s: u32,
    pub cone_angles: Vec<f64>,
    pub azimuth_offsets: Vec<f64>,
    pub condition_number: f64,
    /// `[theta, phi]` per element, cone-major.
    pub directions: Vec<[f64; 2]>,
}

impl QuorumDocument {
    pub fn config(&self) -> QuorumConfig {
        QuorumConfig {
            spin: Spin::from_two_s(self.two_s),
            cone_angles: self.cone_angles.clone(),
            azimuth_offsets: self.azimuth_offsets.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("quorum document serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidInput(format!("quorum document: {e}")))
    }
}
