//! The closed linear flow `dP/dt = M P`.
//!
//! Substituting `rho = (1/(2s+1)) sum_n' P_n' D^n'` into the von Neumann
//! equation and taking the expectation in `|n_n>` gives
//!
//! ```text
//! M_n^n' = (i / (2s+1)) <n_n| [D^n', H] |n_n>
//!        = (i / (2s+1)) Tr[H [Q_n, D^n']]
//! ```
//!
//! (`hbar = 1`). `M` is real, `e^T M = 0` with `e_n = Tr[D^n]/(2s+1)`, and its
//! spectrum is the set of Bohr frequencies `i (eps_j - eps_k)` of `H`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evrep::{pvec_to_rho, rho_to_pvec, PVector};
use crate::kernels::{
    ensure_hermitian, general_eigenvalues, hermitian_eigendecomposition, max_abs_c, max_abs_r,
    real_matrix_exponential, CMatrix, RMatrix, RVector,
};
use crate::numerics::numerics;
use crate::quorum::Quorum;
use crate::spinalg::{
    build_hamiltonian, DensityMatrix, Envelope, HamiltonianSpec, UnitaryPropagator,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Residuals of the build-time self-checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorDiagnostics {
    /// Max `|Im M|` of the trace formula before it was dropped.
    pub imaginary_residual: f64,
    /// Max difference between the trace and sandwich forms.
    pub sandwich_residual: f64,
    /// Max `|e^T M|`.
    pub conservation_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Generator {
    matrix: RMatrix,
    hamiltonian: CMatrix,
    quorum: Arc<Quorum>,
    diagnostics: GeneratorDiagnostics,
}

pub fn build_generator(h: &CMatrix, q: &Arc<Quorum>) -> Result<Generator> {
    ensure_hermitian(h)?;
    let d = q.dim();
    if h.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.nrows(),
        });
    }
    let settings = numerics();
    let n_s = q.len();
    let prefactor = I / d as f64;

    // Trace form: Tr[H [Q_n, D]] = Tr[[H, Q_n] D].
    let mut matrix = RMatrix::zeros(n_s, n_s);
    let mut imaginary_residual = 0.0_f64;
    for (n, qn) in q.projectors().iter().enumerate() {
        let c = h * qn - qn * h;
        for (m, dual) in q.duals().iter().enumerate() {
            let z = prefactor * crate::kernels::trace_product(&c, dual);
            imaginary_residual = imaginary_residual.max(z.im.abs());
            matrix[(n, m)] = z.re;
        }
    }

    // Sandwich form: <n|[D, H]|n> = <D n|H n> - <H n|D n>.
    let mut sandwich_residual = 0.0_f64;
    for (n, st) in q.states().iter().enumerate() {
        let hn = h * &st.amplitudes;
        for (m, dual) in q.duals().iter().enumerate() {
            let dn = dual * &st.amplitudes;
            let z = prefactor * (dn.dotc(&hn) - hn.dotc(&dn));
            sandwich_residual = sandwich_residual.max((z - matrix[(n, m)]).norm());
        }
    }

    let conservation = q.dual_traces().transpose() * &matrix;
    let conservation_residual = conservation.iter().fold(0.0_f64, |a, x| a.max(x.abs()));

    let scale = max_abs_c(h).max(1.0);
    let m_scale = max_abs_r(&matrix).max(1.0);
    let checks = [
        (
            "generator must be real",
            imaginary_residual,
            settings.imaginary_tol * scale,
        ),
        (
            "trace and sandwich forms of the generator must agree",
            sandwich_residual,
            settings.residual_tol * m_scale,
        ),
        (
            "e^T M = 0",
            conservation_residual,
            settings.duality_tol * scale,
        ),
    ];
    for (what, deviation, tolerance) in checks {
        if deviation > tolerance {
            return Err(Error::InvariantViolation {
                what,
                deviation,
                tolerance,
            });
        }
    }

    Ok(Generator {
        matrix,
        hamiltonian: h.clone(),
        quorum: Arc::clone(q),
        diagnostics: GeneratorDiagnostics {
            imaginary_residual,
            sandwich_residual,
            conservation_residual,
        },
    })
}

impl Generator {
    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn quorum(&self) -> &Arc<Quorum> {
        &self.quorum
    }

    pub fn diagnostics(&self) -> &GeneratorDiagnostics {
        &self.diagnostics
    }

    /// `M P`
    pub fn apply(&self, p: &PVector) -> Result<PVector> {
        p.ensure_on(&self.quorum)?;
        Ok(PVector::from_raw(
            &self.matrix * p.values(),
            p.fingerprint(),
        ))
    }

    /// Eigenvalues of `M`, sorted by imaginary part then real part.
    pub fn spectrum(&self) -> Result<Vec<Complex64>> {
        let mut ev = general_eigenvalues(&self.matrix)?;
        ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        Ok(ev)
    }

    /// Max distance between the sorted spectrum of `M` and the sorted Bohr
    /// frequencies `i (eps_j - eps_k)` of the Hamiltonian.
    pub fn bohr_spectrum_deviation(&self) -> Result<f64> {
        let spectrum = self.spectrum()?;
        let bohr = bohr_frequencies(&self.hamiltonian)?;
        Ok(spectrum
            .iter()
            .zip(&bohr)
            .map(|(l, &w)| (l - Complex64::new(0.0, w)).norm())
            .fold(0.0, f64::max))
    }
}

/// All `eps_j - eps_k`, ascending.
pub fn bohr_frequencies(h: &CMatrix) -> Result<Vec<f64>> {
    let eps = hermitian_eigendecomposition(h)?.values;
    let mut out: Vec<f64> = eps
        .iter()
        .flat_map(|a| eps.iter().map(move |b| a - b))
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// `P(t) = exp(t M) P0`
pub fn propagate_exact(g: &Generator, p0: &PVector, t: f64) -> Result<PVector> {
    p0.ensure_on(&g.quorum)?;
    let e = real_matrix_exponential(&g.matrix, t)?;
    Ok(PVector::from_raw(e * p0.values(), p0.fingerprint()))
}

/// Generator of `H(t) = H_0 + f(t) H_1`: `M(t) = M_0 + f(t) M_1`.
#[derive(Debug, Clone)]
pub struct DrivenGenerator {
    base: Generator,
    drive: Option<(Generator, Envelope)>,
}

impl DrivenGenerator {
    pub fn new(spec: &HamiltonianSpec, q: &Arc<Quorum>) -> Result<Self> {
        let ops = q.operators();
        let base = build_generator(&build_hamiltonian(&spec.terms(), ops)?, q)?;
        let drive = match &spec.drive {
            None => None,
            Some(d) => {
                d.envelope.validate()?;
                let g = build_generator(&build_hamiltonian(&d.terms(), ops)?, q)?;
                Some((g, d.envelope.clone()))
            }
        };
        Ok(DrivenGenerator { base, drive })
    }

    pub fn base(&self) -> &Generator {
        &self.base
    }

    pub fn is_time_dependent(&self) -> bool {
        self.drive.is_some()
    }

    pub fn matrix_at(&self, t: f64) -> RMatrix {
        match &self.drive {
            None => self.base.matrix.clone(),
            Some((g1, env)) => &self.base.matrix + &g1.matrix * env.eval(t),
        }
    }

    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        match &self.drive {
            None => self.base.hamiltonian.clone(),
            Some((g1, env)) => {
                let f = env.eval(t);
                &self.base.hamiltonian + g1.hamiltonian.map(|z| z * f)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Flow<'a> {
    Autonomous(&'a Generator),
    Driven(&'a DrivenGenerator),
}

impl Flow<'_> {
    fn quorum(&self) -> &Arc<Quorum> {
        match self {
            Flow::Autonomous(g) => &g.quorum,
            Flow::Driven(dg) => &dg.base.quorum,
        }
    }

    fn matrix_at(&self, t: f64) -> RMatrix {
        match self {
            Flow::Autonomous(g) => g.matrix.clone(),
            Flow::Driven(dg) => dg.matrix_at(t),
        }
    }

    fn is_time_dependent(&self) -> bool {
        matches!(self, Flow::Driven(dg) if dg.is_time_dependent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Matrix exponential, one factor per distinct grid spacing.
    ExactExpm,
    /// Classical fourth-order Runge-Kutta with step `min gap / substeps`.
    Rk4 { substeps: usize },
}

impl Method {
    pub const DEFAULT_SUBSTEPS: usize = 10;

    pub fn rk4() -> Self {
        Method::Rk4 {
            substeps: Self::DEFAULT_SUBSTEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monitor {
    /// `e . P`
    pub normalization: f64,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
    pub oracle_deviation: Option<f64>,
}

impl Monitor {
    fn of(p: &PVector, q: &Quorum) -> Self {
        Monitor {
            normalization: q.dual_traces().dot(p.values()),
            min: p.min(),
            max: p.max(),
            sum: p.sum(),
            oracle_deviation: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PVector>,
    pub monitors: Vec<Monitor>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Max `|e.P(t) - e.P(t_0)|` over the grid.
    pub fn normalization_drift(&self) -> f64 {
        let first = self.monitors.first().map_or(0.0, |m| m.normalization);
        self.monitors
            .iter()
            .map(|m| (m.normalization - first).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_oracle_deviation(&self) -> Option<f64> {
        self.monitors
            .iter()
            .map(|m| m.oracle_deviation)
            .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d)))
            .filter(|_| !self.monitors.is_empty())
    }

    /// Fill `oracle_deviation` with `max_n |P_n(t) - <n_n|U rho0 U^H|n_n>|`,
    /// where `U = exp(-i H (t - t_0))`.
    pub fn attach_oracle(&mut self, rho0: &DensityMatrix, h: &CMatrix, q: &Quorum) -> Result<()> {
        let propagator = UnitaryPropagator::new(h)?;
        let t0 = self.times.first().copied().unwrap_or(0.0);
        for ((t, p), mon) in self.times.iter().zip(&self.states).zip(&mut self.monitors) {
            let rho_t = propagator.evolve(rho0, t - t0)?;
            let reference = rho_to_pvec(&rho_t, q)?;
            let dev = (p.values() - reference.values()).amax();
            mon.oracle_deviation = Some(dev);
        }
        Ok(())
    }
}

/// `steps + 1` equally spaced times from `t_start` to `t_end`; the last one is exact.
pub fn uniform_grid(t_start: f64, t_end: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidTimeGrid("steps must be at least 1".into()));
    }
    if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
        return Err(Error::InvalidTimeGrid(format!(
            "need finite t_end > t_start, got [{t_start}, {t_end}]"
        )));
    }
    let span = t_end - t_start;
    let mut times: Vec<f64> = (0..steps)
        .map(|i| t_start + span * (i as f64 / steps as f64))
        .collect();
    times.push(t_end);
    validate_grid(&times)?;
    Ok(times)
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidTimeGrid("no time points".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidTimeGrid("non-finite time".into()));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidTimeGrid(format!(
            "times must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Propagate `p0`, given at `times[0]`, across the grid.
pub fn propagate_grid(
    flow: Flow<'_>,
    p0: &PVector,
    times: &[f64],
    method: Method,
) -> Result<Trajectory> {
    validate_grid(times)?;
    let q = Arc::clone(flow.quorum());
    p0.ensure_on(&q)?;
    let fp = p0.fingerprint();

    let mut states = Vec::with_capacity(times.len());
    states.push(p0.clone());
    let mut current = p0.values().clone();

    match method {
        Method::ExactExpm => {
            if flow.is_time_dependent() {
                return Err(Error::MethodUnsupported(
                    "exact-expm requires a time-independent Hamiltonian; use rk4".into(),
                ));
            }
            let m = flow.matrix_at(times[0]);
            let mut cache: Vec<(f64, RMatrix)> = Vec::new();
            for w in times.windows(2) {
                let gap = w[1] - w[0];
                let idx = match cache
                    .iter()
                    .position(|(g, _)| (g - gap).abs() <= 1e-13 * gap.abs())
                {
                    Some(i) => i,
                    None => {
                        cache.push((gap, real_matrix_exponential(&m, gap)?));
                        cache.len() - 1
                    }
                };
                current = &cache[idx].1 * &current;
                states.push(PVector::from_raw(current.clone(), fp));
            }
        }
        Method::Rk4 { substeps } => {
            if substeps == 0 {
                return Err(Error::InvalidInput(
                    "rk4 substeps must be at least 1".into(),
                ));
            }
            let min_gap = times
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let h_max = min_gap / substeps as f64;
            let autonomous = (!flow.is_time_dependent()).then(|| flow.matrix_at(times[0]));
            let m_at = |t: f64| -> std::borrow::Cow<'_, RMatrix> {
                match &autonomous {
                    Some(m) => std::borrow::Cow::Borrowed(m),
                    None => std::borrow::Cow::Owned(flow.matrix_at(t)),
                }
            };
            for w in times.windows(2) {
                let gap = w[1] - w[0];
                let n = ((gap / h_max) - 1e-9).ceil().max(1.0) as usize;
                let h = gap / n as f64;
                for k in 0..n {
                    let t = w[0] + k as f64 * h;
                    current = rk4_step(&m_at, &current, t, h);
                }
                states.push(PVector::from_raw(current.clone(), fp));
            }
        }
    }

    let monitors = states.iter().map(|p| Monitor::of(p, &q)).collect();
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        monitors,
    })
}

fn rk4_step<'a, F>(m_at: &F, y: &RVector, t: f64, h: f64) -> RVector
where
    F: Fn(f64) -> std::borrow::Cow<'a, RMatrix>,
{
    let m0 = m_at(t);
    let mh = m_at(t + 0.5 * h);
    let m1 = m_at(t + h);
    let k1 = m0.as_ref() * y;
    let k2 = mh.as_ref() * (y + &k1 * (0.5 * h));
    let k3 = mh.as_ref() * (y + &k2 * (0.5 * h));
    let k4 = m1.as_ref() * (y + &k3 * h);
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Stationary vectors of the flow: images of the Hamiltonian eigenprojectors.
#[derive(Debug, Clone)]
pub struct FixedPoints {
    pub points: Vec<PVector>,
    pub energies: Vec<f64>,
    /// Max `|M P^(k)|` per point.
    pub residuals: Vec<f64>,
    /// With a degenerate spectrum the stationary set is a continuum and
    /// `points` is only one basis of it.
    pub degenerate: bool,
}

pub fn fixed_points(h: &CMatrix, q: &Arc<Quorum>) -> Result<FixedPoints> {
    let g = build_generator(h, q)?;
    let eig = hermitian_eigendecomposition(h)?;
    let settings = numerics();
    let scale = eig.values.iter().fold(1.0_f64, |m, e| m.max(e.abs()));
    let degenerate = eig
        .values
        .windows(2)
        .any(|w| (w[1] - w[0]).abs() <= settings.degeneracy_tol * scale);
    if degenerate {
        log::warn!("Hamiltonian spectrum is degenerate; fixed points form a continuum");
    }

    let mut points = Vec::with_capacity(eig.values.len());
    let mut residuals = Vec::with_capacity(eig.values.len());
    for k in 0..eig.values.len() {
        let rho = DensityMatrix::pure(&eig.vectors.column(k).into_owned())?;
        let p = rho_to_pvec(&rho, q)?;
        let r = g.apply(&p)?.values().amax();
        let tol = settings.duality_tol * max_abs_c(h).max(1.0);
        if r > tol {
            return Err(Error::InvariantViolation {
                what: "fixed point must satisfy M P = 0",
                deviation: r,
                tolerance: tol,
            });
        }
        points.push(p);
        residuals.push(r);
    }
    Ok(FixedPoints {
        points,
        energies: eig.values,
        residuals,
        degenerate,
    })
}

/// Max over the grid and over `n` of `|P_n(t) - <n_n|rho_oracle(t)|n_n>|`,
/// with `P` propagated by `exp(t M)` from the image of `rho0`.
pub fn oracle_compare(
    g: &Generator,
    rho0: &DensityMatrix,
    h: &CMatrix,
    times: &[f64],
) -> Result<f64> {
    let q = Arc::clone(&g.quorum);
    let p0 = rho_to_pvec(rho0, &q)?;
    let mut traj = propagate_grid(Flow::Autonomous(g), &p0, times, Method::ExactExpm)?;
    traj.attach_oracle(rho0, h, &q)?;
    Ok(traj.max_oracle_deviation().unwrap_or(0.0))
}

/// Reconstruct the density matrix of every state along a trajectory.
pub fn reconstruct_along(traj: &Trajectory, q: &Quorum) -> Result<Vec<DensityMatrix>> {
    traj.states
        .iter()
        .map(|p| pvec_to_rho(p, q).map(|r| r.rho))
        .collect()
}
