use std::sync::Arc;

use evrep_core::evrep::round_trip_deviation;
use evrep_core::kernels::hermitian_eigendecomposition;
use evrep_core::{
    build_quorum, coherent_state, gram_condition, propagate_grid, pvec_to_rho, rho_to_pvec,
    uniform_grid, CMatrix, Complex64, DensityMatrix, Direction, DrivenGenerator, Error, Flow,
    PVector, Quorum, QuorumConfig, QuorumDocument, Spin,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{InitialState, LoadedConfig};
use crate::table::{Cell, Table};
use crate::CliError;

pub fn load_quorum(cfg: &LoadedConfig) -> Result<Arc<Quorum>, CliError> {
    let spin = Spin::from_two_s(cfg.config.two_s);
    let overrides = cfg.config.quorum.as_ref();
    if let Some(path) = overrides.and_then(|o| o.import.as_ref()) {
        let path = cfg.resolve(path);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc = QuorumDocument::from_toml_str(&text)?;
        if doc.two_s != spin.two_s() {
            return Err(CliError::Config(format!(
                "imported quorum has two_s = {}, configuration has two_s = {}",
                doc.two_s,
                spin.two_s()
            )));
        }
        return Ok(Arc::new(Quorum::import(&doc)?));
    }
    let mut qc = QuorumConfig::default_for(spin);
    if let Some(o) = overrides {
        if let Some(a) = &o.cone_angles {
            qc.cone_angles = a.clone();
        }
        if let Some(a) = &o.azimuth_offsets {
            qc.azimuth_offsets = a.clone();
        }
    }
    Ok(Arc::new(build_quorum(qc)?))
}

/// The initial density matrix and its probability vector. For a `pvector`
/// input the density matrix is the (possibly unphysical) reconstruction.
pub fn initial_state(
    state: &InitialState,
    q: &Quorum,
) -> Result<(DensityMatrix, PVector), CliError> {
    let spin = q.spin();
    let rho = match state {
        InitialState::Coherent { theta, phi } => {
            let dir = Direction::new(*theta, *phi)?;
            DensityMatrix::coherent(&coherent_state(q.operators(), dir)?)
        }
        InitialState::Basis { mu } => {
            let k = spin.index_of_mu(*mu).ok_or_else(|| {
                CliError::Config(format!("mu = {mu} is not an s_z eigenvalue for s = {spin}"))
            })?;
            DensityMatrix::basis_state(spin, k)?
        }
        InitialState::MaximallyMixed => DensityMatrix::maximally_mixed(spin),
        InitialState::Density { re, im } => {
            DensityMatrix::from_matrix(density_entries(re, im.as_deref(), q.dim())?)?
        }
        InitialState::Pvector { values } => {
            let p = PVector::new(values.clone(), q)?;
            let rho = pvec_to_rho(&p, q)?.rho;
            return Ok((rho, p));
        }
        InitialState::RandomPure { seed } => {
            DensityMatrix::random_pure(spin, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
        InitialState::RandomMixed { seed } => {
            DensityMatrix::random_mixed(spin, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
    };
    let p = rho_to_pvec(&rho, q)?;
    Ok((rho, p))
}

fn density_entries(
    re: &[Vec<f64>],
    im: Option<&[Vec<f64>]>,
    d: usize,
) -> Result<CMatrix, CliError> {
    let check = |rows: &[Vec<f64>], name: &str| -> Result<(), CliError> {
        if rows.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rows.len(),
            }
            .into());
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(CliError::Config(format!(
                "initial_state.{name} row {i} has {} entries, expected {d}",
                r.len()
            )));
        }
        Ok(())
    };
    check(re, "re")?;
    if let Some(im) = im {
        check(im, "im")?;
    }
    Ok(CMatrix::from_fn(d, d, |i, j| {
        Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

fn preamble(t: &mut Table, cfg: &LoadedConfig, q: &Quorum) {
    t.meta("config_sha256", cfg.sha256.as_str())
        .meta("two_s", cfg.config.two_s)
        .meta("N_s", q.len());
}

pub struct QuorumReport {
    pub table: Table,
    pub document: QuorumDocument,
}

/// Directions, conditioning and the self-check residuals.
pub fn cmd_quorum(cfg: &LoadedConfig) -> Result<QuorumReport, CliError> {
    let q = load_quorum(cfg)?;
    let (min_eig, cond) = gram_condition(&q);
    let diag = q.diagnostics();
    let mut t = Table::new(["n", "theta", "phi", "dual_trace"]);
    preamble(&mut t, cfg, &q);
    t.meta("condition_number", cond)
        .meta("min_gram_eigenvalue", min_eig)
        .meta("ill_conditioned", q.is_ill_conditioned())
        .meta("projector_residual", diag.projector_residual)
        .meta("duality_residual", diag.duality_residual)
        .meta("identity_residual", diag.identity_residual)
        .meta("gram_relation_residual", diag.gram_relation_residual);
    for (n, (dir, e)) in q
        .directions()
        .iter()
        .zip(q.dual_traces().iter())
        .enumerate()
    {
        t.push(vec![
            n.into(),
            dir.theta.into(),
            dir.phi.into(),
            (*e).into(),
        ]);
    }
    Ok(QuorumReport {
        table: t,
        document: q.export(),
    })
}

pub struct EvolveOutcome {
    pub table: Table,
    pub summary: Value,
}

fn complex_pairs(values: &[Complex64]) -> Value {
    values.iter().map(|z| json!([z.re, z.im])).collect()
}

/// Trajectory table plus the run summary.
pub fn cmd_evolve(cfg: &LoadedConfig, oracle: bool) -> Result<EvolveOutcome, CliError> {
    let c = &cfg.config;
    let q = load_quorum(cfg)?;
    let (rho0, p0) = initial_state(c.initial_state()?, &q)?;
    let grid = c.time()?;
    let times = uniform_grid(grid.t_start, grid.t_end, grid.steps)?;
    let dg = DrivenGenerator::new(&c.hamiltonian, &q)?;
    let flow = if dg.is_time_dependent() {
        Flow::Driven(&dg)
    } else {
        Flow::Autonomous(dg.base())
    };
    let mut traj = propagate_grid(flow, &p0, &times, c.method())?;
    if oracle {
        if dg.is_time_dependent() {
            return Err(Error::MethodUnsupported(
                "oracle comparison requires a time-independent Hamiltonian".into(),
            )
            .into());
        }
        traj.attach_oracle(&rho0, dg.base().hamiltonian(), &q)?;
    }

    let mut columns = vec!["t".to_owned()];
    columns.extend((1..=q.len()).map(|n| format!("P_{n}")));
    columns.extend(["ePdot", "minP", "maxP", "sumP"].map(String::from));
    if oracle {
        columns.push("oracle_dev".into());
    }
    let mut t = Table::new(columns);
    preamble(&mut t, cfg, &q);
    t.meta("method", format!("{:?}", c.method()));
    for ((time, p), m) in traj.times.iter().zip(&traj.states).zip(&traj.monitors) {
        let mut row: Vec<Cell> = Vec::with_capacity(q.len() + 6);
        row.push((*time).into());
        row.extend(p.as_slice().iter().map(|&x| Cell::Num(x)));
        row.extend([m.normalization, m.min, m.max, m.sum].map(Cell::Num));
        if let Some(d) = m.oracle_deviation {
            row.push(d.into());
        }
        t.push(row);
    }

    let g = dg.base();
    let spectrum = g.spectrum()?;
    let bohr = if dg.is_time_dependent() {
        Value::Null
    } else {
        json!(g.bohr_spectrum_deviation()?)
    };
    let (min_eig, cond) = gram_condition(&q);
    let summary = json!({
        "config_sha256": cfg.sha256,
        "inputs": serde_json::to_value(c).map_err(|e| CliError::Io(e.to_string()))?,
        "spin": { "two_s": c.two_s, "dim": q.dim(), "N_s": q.len() },
        "quorum": {
            "condition_number": cond,
            "min_gram_eigenvalue": min_eig,
            "duality_residual": q.diagnostics().duality_residual,
        },
        "generator": {
            "time_dependent": dg.is_time_dependent(),
            "spectrum": complex_pairs(&spectrum),
            "spectrum_of": if dg.is_time_dependent() { "static part" } else { "full generator" },
            "bohr_spectrum_deviation": bohr,
            "diagnostics": g.diagnostics(),
        },
        "trajectory": {
            "rows": traj.len(),
            "method": format!("{:?}", c.method()),
            "normalization_drift": traj.normalization_drift(),
        },
        "oracle_max_deviation": traj.max_oracle_deviation(),
    });
    Ok(EvolveOutcome { table: t, summary })
}

/// Density matrix input: emits `P`. Probability-vector input: emits the
/// reconstructed entries and a physicality report.
pub fn cmd_reconstruct(cfg: &LoadedConfig) -> Result<Table, CliError> {
    let q = load_quorum(cfg)?;
    let state = cfg.config.initial_state()?;
    let (rho, p) = initial_state(state, &q)?;
    if let InitialState::Pvector { .. } = state {
        let rec = pvec_to_rho(&p, &q)?;
        let ph = rec.physicality;
        if !ph.physical {
            log::warn!(
                "reconstructed operator is not a physical state (trace {}, min eigenvalue {})",
                ph.trace,
                ph.min_eigenvalue
            );
        }
        let mut t = Table::new(["i", "j", "re", "im"]);
        preamble(&mut t, cfg, &q);
        t.meta("input", "pvector")
            .meta("trace", ph.trace)
            .meta("min_eigenvalue", ph.min_eigenvalue)
            .meta("normalization", ph.normalization)
            .meta("within_bounds", ph.within_bounds)
            .meta("physical", ph.physical)
            .meta("warning", !ph.physical);
        let m = rec.rho.matrix();
        for i in 0..q.dim() {
            for j in 0..q.dim() {
                t.push(vec![
                    i.into(),
                    j.into(),
                    m[(i, j)].re.into(),
                    m[(i, j)].im.into(),
                ]);
            }
        }
        return Ok(t);
    }
    let mut t = Table::new(["n", "P"]);
    preamble(&mut t, cfg, &q);
    t.meta("input", "density")
        .meta("trace", rho.trace())
        .meta("min_eigenvalue", rho.min_eigenvalue()?)
        .meta("normalization", p.normalization(&q)?)
        .meta("round_trip_deviation", round_trip_deviation(&rho, &q)?);
    for (n, &x) in p.as_slice().iter().enumerate() {
        t.push(vec![n.into(), x.into()]);
    }
    Ok(t)
}

/// Eigenvalues of `H` and of `M`. For a driven configuration only the static
/// part is used.
pub fn cmd_spectrum(cfg: &LoadedConfig) -> Result<Table, CliError> {
    let q = load_quorum(cfg)?;
    let dg = DrivenGenerator::new(&cfg.config.hamiltonian, &q)?;
    let g = dg.base();
    let eps = hermitian_eigendecomposition(g.hamiltonian())?.values;
    let spectrum = g.spectrum()?;
    let mut t = Table::new(["operator", "index", "re", "im"]);
    preamble(&mut t, cfg, &q);
    t.meta("time_dependent", dg.is_time_dependent())
        .meta("bohr_spectrum_deviation", g.bohr_spectrum_deviation()?);
    for (k, e) in eps.iter().enumerate() {
        t.push(vec!["H".into(), k.into(), (*e).into(), 0.0.into()]);
    }
    for (k, z) in spectrum.iter().enumerate() {
        t.push(vec!["M".into(), k.into(), z.re.into(), z.im.into()]);
    }
    Ok(t)
}
