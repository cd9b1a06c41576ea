//! Gauge specifications and the pulse compiler.
//!
//! The instantaneous eigenbasis is generated by a constant Hermitian operator,
//! `|n_lambda> = exp(-i G lambda) |n_0>`, so every gauge-potential element
//! `g_{n,m} = <n_0|G|m_0>` is constant along the path. The compiler applies
//! `H(lambda_j)` at each schedule point for a duration `tau_j` such that every
//! coupled pair of levels gains an odd multiple of `pi` in relative dynamic
//! phase. At the checkpoints `Theta_j` the resulting propagator equals the
//! adiabatic one.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::qla::{self, c, Matrix, Operator, StateVector};
use crate::tol;

/// Energies `E_n(lambda_j)` in angular-frequency units.
#[derive(Clone, Debug, PartialEq)]
pub enum EnergyLaw {
    /// Same energies for every pulse.
    Constant(Vec<f64>),
    /// One row of level energies per pulse index.
    PerPulse(Vec<Vec<f64>>),
    /// `E_n(lambda) = offset_n + sin2_n * sin(2 lambda)`, divided by
    /// `sin(2 lambda)` when `cosecant` is set.
    Modulated { offset: Vec<f64>, sin2: Vec<f64>, cosecant: bool },
}

impl EnergyLaw {
    fn levels(&self) -> Result<usize> {
        match self {
            EnergyLaw::Constant(e) => Ok(e.len()),
            EnergyLaw::PerPulse(rows) => {
                let n = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidArgument("ragged energy table".into()));
                }
                Ok(n)
            }
            EnergyLaw::Modulated { offset, sin2, .. } => {
                if offset.len() != sin2.len() {
                    return Err(Error::InvalidArgument("offset and sin2 rows differ in length".into()));
                }
                Ok(offset.len())
            }
        }
    }

    /// Level energies for pulse `pulse` applied at path point `lambda`.
    pub fn at(&self, lambda: f64, pulse: usize) -> Result<Vec<f64>> {
        match self {
            EnergyLaw::Constant(e) => Ok(e.clone()),
            EnergyLaw::PerPulse(rows) => rows.get(pulse).cloned().ok_or(Error::MissingEnergy { pulse }),
            EnergyLaw::Modulated { offset, sin2, cosecant } => {
                let s = (2.0 * lambda).sin();
                let raw = offset.iter().zip(sin2).map(|(a, b)| a + b * s);
                if *cosecant {
                    if s.abs() < tol::CONSTRUCTION {
                        return Err(Error::SingularPoint { lambda });
                    }
                    Ok(raw.map(|e| e / s).collect())
                } else {
                    Ok(raw.collect())
                }
            }
        }
    }
}

/// Constant generator, initial eigenbasis, energies and declared couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSpec {
    generator: Operator,
    basis: Matrix,
    energies: EnergyLaw,
    pairs: BTreeSet<(usize, usize)>,
}

impl GaugeSpec {
    /// Validates Hermiticity of `G`, orthonormality of the basis and the
    /// Born-Fock gauge `g_{n,n} = 0`. Agreement between `pairs` and the
    /// numeric couplings is checked by [`validate_clusters`].
    pub fn new(
        generator: Operator,
        basis: &[StateVector],
        energies: EnergyLaw,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let dim = generator.dim();
        let generator = if generator.is_hermitian() {
            generator
        } else {
            Operator::hermitian(generator.into_matrix())?
        };
        if basis.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: basis.len() });
        }
        for b in basis {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: b.dim() });
            }
        }
        let basis = Matrix::from_fn(dim, dim, |i, j| basis[j].amplitudes()[i]);
        let gram = basis.adjoint() * &basis;
        let ortho = gram
            .iter()
            .zip(Matrix::identity(dim, dim).iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if ortho > tol::PROPAGATION {
            return Err(Error::InvalidArgument(format!("initial basis not orthonormal ({ortho:.3e})")));
        }
        let levels = energies.levels()?;
        if levels != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: levels });
        }
        let mut set = BTreeSet::new();
        for (n, m) in pairs {
            if n == m {
                return Err(Error::InvalidArgument(format!("self-coupling {{{n},{n}}}")));
            }
            for k in [n, m] {
                if k >= dim {
                    return Err(Error::IndexOutOfRange { index: k, dim });
                }
            }
            set.insert((n.min(m), n.max(m)));
        }
        let spec = GaugeSpec { generator, basis, energies, pairs: set };
        for n in 0..dim {
            let g = spec.coupling(n, n);
            if g.norm() > tol::CONSTRUCTION {
                return Err(Error::InvalidArgument(format!(
                    "generator has diagonal gauge element g_{{{n},{n}}} = {g}"
                )));
            }
        }
        Ok(spec)
    }

    /// Like [`GaugeSpec::new`], declaring every pair with `|g_{n,m}|` above the
    /// construction tolerance as connected.
    pub fn with_inferred_pairs(generator: Operator, basis: &[StateVector], energies: EnergyLaw) -> Result<Self> {
        let mut spec = GaugeSpec::new(generator, basis, energies, [])?;
        let g = spec.coupling_matrix();
        let dim = spec.dim();
        for n in 0..dim {
            for m in n + 1..dim {
                if g[(n, m)].norm() > tol::CONSTRUCTION {
                    spec.pairs.insert((n, m));
                }
            }
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn generator(&self) -> &Operator {
        &self.generator
    }

    pub fn energies(&self) -> &EnergyLaw {
        &self.energies
    }

    pub fn connected_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    /// Columns are the initial eigenstates `|n_0>`.
    pub fn basis_matrix(&self) -> &Matrix {
        &self.basis
    }

    pub fn initial_state(&self, n: usize) -> Result<StateVector> {
        if n >= self.dim() {
            return Err(Error::IndexOutOfRange { index: n, dim: self.dim() });
        }
        StateVector::from_vector(self.basis.column(n).into_owned())
    }

    /// `g_{n,m} = <n_0|G|m_0>`.
    pub fn coupling(&self, n: usize, m: usize) -> C64 {
        (self.basis.column(n).adjoint() * self.generator.matrix() * self.basis.column(m))[(0, 0)]
    }

    pub fn coupling_matrix(&self) -> Matrix {
        self.basis.adjoint() * self.generator.matrix() * &self.basis
    }

    /// Largest `|g_{n,m}|` over connected pairs.
    pub fn g_max(&self) -> f64 {
        let g = self.coupling_matrix();
        self.pairs.iter().map(|&(n, m)| g[(n, m)].norm()).fold(0.0, f64::max)
    }

    /// `exp(-i G lambda) B`: columns are `|n_lambda>`.
    pub fn frame_at(&self, lambda: f64) -> Result<Matrix> {
        if lambda == 0.0 {
            return Ok(self.basis.clone());
        }
        let rot = qla::expm(&self.generator, c(0.0, -lambda))?;
        Ok(rot.matrix() * &self.basis)
    }
}

/// `|n_lambda> = exp(-i G lambda) |n_0>`.
pub fn eigenstate_at(spec: &GaugeSpec, lambda: f64, n: usize) -> Result<StateVector> {
    let n0 = spec.initial_state(n)?;
    if lambda == 0.0 {
        return Ok(n0);
    }
    let rot = qla::expm(spec.generator(), c(0.0, -lambda))?;
    rot.apply(&n0)?.normalize()
}

/// `H(lambda) = sum_n E_n(lambda_j) |n_lambda><n_lambda|` with the energies of
/// pulse `j`.
pub fn hamiltonian_at(spec: &GaugeSpec, lambda: f64, j: usize) -> Result<Operator> {
    let energies = spec.energies.at(lambda, j)?;
    hamiltonian_with(spec, lambda, &energies)
}

fn hamiltonian_with(spec: &GaugeSpec, lambda: f64, energies: &[f64]) -> Result<Operator> {
    let frame = spec.frame_at(lambda)?;
    let mut weighted = frame.clone();
    for (k, &e) in energies.iter().enumerate() {
        weighted.column_mut(k).iter_mut().for_each(|z| *z *= e);
    }
    let h = weighted * frame.adjoint();
    let h = (&h + h.adjoint()) * c(0.5, 0.0);
    Ok(Operator::from_parts(h, true))
}

/// One connected component of the coupling graph with its two-coloring.
/// Singletons have an empty `b` side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Cluster {
    pub fn is_singleton(&self) -> bool {
        self.a.len() + self.b.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPartition {
    pub clusters: Vec<Cluster>,
}

impl ClusterPartition {
    /// `+1` on the `a` side of its cluster, `-1` on the `b` side.
    pub fn parity(&self, level: usize) -> Option<i8> {
        self.clusters.iter().find_map(|cl| {
            if cl.a.contains(&level) {
                Some(1)
            } else if cl.b.contains(&level) {
                Some(-1)
            } else {
                None
            }
        })
    }
}

/// Checks that the declared couplings match the generator and two-colors
/// every connected component of the coupling graph.
pub fn validate_clusters(spec: &GaugeSpec) -> Result<ClusterPartition> {
    let dim = spec.dim();
    let g = spec.coupling_matrix();
    for n in 0..dim {
        for m in n + 1..dim {
            let magnitude = g[(n, m)].norm();
            let declared = spec.pairs.contains(&(n, m));
            if declared != (magnitude > tol::CONSTRUCTION) {
                return Err(Error::InconsistentPairs { n, m, magnitude });
            }
        }
    }
    let mut adjacency = vec![Vec::new(); dim];
    for &(n, m) in &spec.pairs {
        adjacency[n].push(m);
        adjacency[m].push(n);
    }
    let mut color: Vec<Option<bool>> = vec![None; dim];
    let mut clusters = Vec::new();
    for start in 0..dim {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(true);
        let mut cluster = Cluster { a: vec![start], b: Vec::new() };
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            let side = color[n].unwrap();
            for &m in &adjacency[n] {
                match color[m] {
                    None => {
                        color[m] = Some(!side);
                        if side { cluster.b.push(m) } else { cluster.a.push(m) }
                        queue.push_back(m);
                    }
                    Some(s) if s == side => return Err(Error::NotBipartite { level: m }),
                    Some(_) => {}
                }
            }
        }
        cluster.a.sort_unstable();
        cluster.b.sort_unstable();
        clusters.push(cluster);
    }
    Ok(ClusterPartition { clusters })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Spacing {
    Equal,
    Custom(Vec<f64>),
}

/// Path points `lambda_j` and checkpoints `Theta_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    lambdas: Vec<f64>,
    thetas: Vec<f64>,
    equal: bool,
}

/// `Theta_j = 2 sum_{k<=j} (-1)^{j+k} lambda_k`.
pub fn alternating_thetas(lambdas: &[f64]) -> Vec<f64> {
    (0..lambdas.len())
        .map(|j| {
            2.0 * lambdas[..=j]
                .iter()
                .enumerate()
                .map(|(k, l)| if (j + k) % 2 == 0 { *l } else { -*l })
                .sum::<f64>()
        })
        .collect()
}

impl Schedule {
    /// `lambda_j = Theta_N (2j - 1) / (2N)`, `Theta_j = j Theta_N / N`.
    pub fn equal(n: usize, theta_total: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("schedule needs N >= 1".into()));
        }
        if !(theta_total > 0.0 && theta_total.is_finite()) {
            return Err(Error::InvalidArgument(format!("Theta_N must be positive, got {theta_total}")));
        }
        let nf = n as f64;
        let lambdas = (1..=n).map(|j| theta_total * (2 * j - 1) as f64 / (2.0 * nf)).collect();
        let thetas = (1..=n).map(|j| j as f64 * theta_total / nf).collect();
        Ok(Schedule { lambdas, thetas, equal: true })
    }

    pub fn custom(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("schedule needs N >= 1".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidArgument("path points must be finite and non-negative".into()));
        }
        if lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("path points must be strictly increasing".into()));
        }
        let thetas = alternating_thetas(&lambdas);
        Ok(Schedule { lambdas, thetas, equal: false })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn theta_total(&self) -> f64 {
        *self.thetas.last().unwrap()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn is_equal_spacing(&self) -> bool {
        self.equal
    }

    pub fn spacing(&self) -> Spacing {
        if self.equal {
            Spacing::Equal
        } else {
            Spacing::Custom(self.lambdas.clone())
        }
    }

    /// Largest path value reached: the last point or the last checkpoint.
    pub fn path_end(&self) -> f64 {
        self.theta_total().max(*self.lambdas.last().unwrap())
    }
}

pub fn make_schedule(n: usize, theta_total: f64, spacing: Spacing) -> Result<Schedule> {
    match spacing {
        Spacing::Equal => Schedule::equal(n, theta_total),
        Spacing::Custom(lambdas) => {
            if lambdas.len() != n {
                return Err(Error::InvalidArgument(format!("{} custom points for N = {n}", lambdas.len())));
            }
            let s = Schedule::custom(lambdas)?;
            if (s.theta_total() - theta_total).abs() > tol::CONSTRUCTION {
                return Err(Error::InvalidArgument(format!(
                    "custom points give Theta_N = {}, expected {theta_total}",
                    s.theta_total()
                )));
            }
            Ok(s)
        }
    }
}

/// `H(lambda)` held for `duration`. `step` is the schedule index it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    pub step: usize,
    pub lambda: f64,
    pub hamiltonian: Operator,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    schedule: Schedule,
    pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn new(schedule: Schedule, pulses: Vec<Pulse>) -> Result<Self> {
        let dim = pulses.first().map(|p| p.hamiltonian.dim());
        let mut last_step = 0;
        for p in &pulses {
            if Some(p.hamiltonian.dim()) != dim {
                return Err(Error::DimensionMismatch { expected: dim.unwrap(), found: p.hamiltonian.dim() });
            }
            if !p.hamiltonian.is_hermitian() {
                let deviation = p.hamiltonian.hermitian_deviation();
                if deviation > tol::CONSTRUCTION {
                    return Err(Error::NonHermitianInput { deviation });
                }
            }
            if !(p.duration > 0.0 && p.duration.is_finite()) {
                return Err(Error::InvalidArgument(format!("pulse duration {} must be positive", p.duration)));
            }
            if p.step >= schedule.n() || p.step < last_step {
                return Err(Error::InvalidArgument(format!("pulse step {} out of order", p.step)));
            }
            last_step = p.step;
        }
        Ok(PulseSequence { schedule, pulses })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn dim(&self) -> Option<usize> {
        self.pulses.first().map(|p| p.hamiltonian.dim())
    }

    pub fn total_time(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum()
    }

    /// Pulses belonging to schedule steps `0..=step`.
    pub fn through_step(&self, step: usize) -> &[Pulse] {
        let end = self.pulses.iter().position(|p| p.step > step).unwrap_or(self.pulses.len());
        &self.pulses[..end]
    }

    /// Pulses applied once the path has reached `lambda`.
    pub fn until(&self, lambda: f64) -> &[Pulse] {
        let end = self.pulses.iter().position(|p| p.lambda > lambda).unwrap_or(self.pulses.len());
        &self.pulses[..end]
    }
}

/// Accumulated dynamic phases `phi_n = sum_j E_n(lambda_j) tau_j`.
pub fn dynamic_phases(spec: &GaugeSpec, pulses: &[Pulse]) -> Result<Vec<f64>> {
    let mut phi = vec![0.0; spec.dim()];
    for p in pulses {
        let e = spec.energies.at(p.lambda, p.step)?;
        for (acc, en) in phi.iter_mut().zip(e) {
            *acc += en * p.duration;
        }
    }
    Ok(phi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    /// Largest odd multiplier of `pi` used to propose durations.
    pub max_odd_multiplier: u32,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { max_odd_multiplier: 9 }
    }
}

/// True when `phase mod 2pi` lies within the phase-condition tolerance of `pi`.
pub fn is_odd_pi(phase: f64) -> bool {
    (phase.rem_euclid(2.0 * PI) - PI).abs() <= tol::PHASE_CONDITION
}

/// Smallest `tau > 0` with `(E_n - E_m) tau` an odd multiple of `pi` for
/// every connected pair. Candidates come from each pair's odd multipliers up
/// to `max_odd_multiplier`; each candidate is checked against all pairs.
pub fn solve_duration(energies: &[f64], pairs: &BTreeSet<(usize, usize)>, max_odd_multiplier: u32) -> Option<f64> {
    let gaps: Vec<f64> = pairs.iter().map(|&(n, m)| (energies[n] - energies[m]).abs()).collect();
    if gaps.is_empty() || gaps.iter().any(|g| *g <= tol::CONSTRUCTION) {
        return None;
    }
    let mut candidates: Vec<f64> = gaps
        .iter()
        .flat_map(|g| (1..=max_odd_multiplier).step_by(2).map(move |k| k as f64 * PI / g))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.into_iter().find(|tau| gaps.iter().all(|g| is_odd_pi(g * tau)))
}

pub fn compile(spec: &GaugeSpec, sched: &Schedule) -> Result<PulseSequence> {
    compile_with(spec, sched, CompileOptions::default())
}

pub fn compile_with(spec: &GaugeSpec, sched: &Schedule, opts: CompileOptions) -> Result<PulseSequence> {
    validate_clusters(spec)?;
    if spec.pairs.is_empty() {
        return Err(Error::InvalidArgument("no connected pairs to modulate".into()));
    }
    let mut pulses = Vec::with_capacity(sched.n());
    for (j, &lambda) in sched.lambdas().iter().enumerate() {
        let energies = spec.energies.at(lambda, j)?;
        let duration = solve_duration(&energies, &spec.pairs, opts.max_odd_multiplier)
            .ok_or(Error::IncommensurateEnergies { pulse: j })?;
        let hamiltonian = hamiltonian_with(spec, lambda, &energies)?;
        pulses.push(Pulse { step: j, lambda, hamiltonian, duration });
    }
    PulseSequence::new(sched.clone(), pulses)
}

/// Star-shaped generator `G = sum_{n>=2} g_{n,1} |n_0><1_0| + h.c.` in the
/// computational basis, with `E_1 = 0` and `E_n = 1` otherwise.
/// `targets[k]` is `g_{k+2,1}` in one-based level labels.
pub fn explicit_g_spec(targets: &[C64], dim: usize) -> Result<GaugeSpec> {
    if dim < 2 || targets.len() != dim - 1 {
        return Err(Error::InvalidArgument(format!("need {} couplings for dimension {dim}", dim.max(1) - 1)));
    }
    if targets.iter().all(|g| g.norm() <= tol::CONSTRUCTION) {
        return Err(Error::InvalidArgument("at least one coupling must be nonzero".into()));
    }
    let mut g = Matrix::zeros(dim, dim);
    for (k, &t) in targets.iter().enumerate() {
        g[(k + 1, 0)] = t;
        g[(0, k + 1)] = t.conj();
    }
    let basis: Vec<StateVector> = (0..dim).map(|k| StateVector::basis(dim, k)).collect::<Result<_>>()?;
    let mut energies = vec![1.0; dim];
    energies[0] = 0.0;
    GaugeSpec::with_inferred_pairs(Operator::hermitian(g)?, &basis, EnergyLaw::Constant(energies))
}

/// `exp(-i G Theta)|1_0> = cos(g Theta)|1_0> - i sin(g Theta) sum_n (g_{n,1}/g) |n_0>`.
pub fn explicit_g_final_state(targets: &[C64], theta: f64) -> Result<StateVector> {
    let g = targets.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
    if g <= tol::CONSTRUCTION {
        return Err(Error::InvalidArgument("at least one coupling must be nonzero".into()));
    }
    let mut amps = vec![c((g * theta).cos(), 0.0)];
    amps.extend(targets.iter().map(|t| c(0.0, -(g * theta).sin()) * t / g));
    StateVector::new(amps)
}
