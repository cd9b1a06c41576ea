//! Deviation from the adiabatic evolution and its bound.
//!
//! `U_adia(lambda) = exp(-i G lambda) B diag(exp(-i phi_n)) B^dag` follows the
//! instantaneous eigenbasis and carries the dynamic phases accumulated so far.
//! `U_D = U_adia^dag U` is the identity at every checkpoint of a compiled
//! sequence. Between checkpoints its distance from the identity is bounded by
//! `2 lambda L sqrt(eps_ave (g_max^2 L + g'_max) g_max)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::propagator_of;
use crate::error::{Error, Result};
use crate::protocol::{dynamic_phases, hamiltonian_at, EnergyLaw, GaugeSpec, Pulse, PulseSequence, Schedule};
use crate::qla::{self, c, Matrix, Operator, StateVector};
use crate::seeding::child_rng;
use crate::tol;

/// Grid points per constant-phase interval when taking the supremum in
/// [`eps_ave`].
pub const SUP_GRID: usize = 2048;

/// `exp(-i G lambda) B diag(exp(-i phi)) B^dag`.
pub fn u_adia(spec: &GaugeSpec, lambda: f64, phases: &[f64]) -> Result<Operator> {
    if phases.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: phases.len() });
    }
    let mut frame = spec.frame_at(lambda)?;
    for (k, phi) in phases.iter().enumerate() {
        let f = C64::from_polar(1.0, -phi);
        frame.column_mut(k).iter_mut().for_each(|z| *z *= f);
    }
    Operator::new(frame * spec.basis_matrix().adjoint())
}

fn check_path(seq: &PulseSequence, lambda: f64) -> Result<()> {
    let end = seq.schedule().path_end();
    if !(lambda >= 0.0 && lambda <= end + tol::CONSTRUCTION) {
        return Err(Error::OutOfPath { lambda, end });
    }
    Ok(())
}

/// Adiabatic reference for the part of `seq` applied once the path reaches
/// `lambda`.
pub fn adiabatic_reference(spec: &GaugeSpec, seq: &PulseSequence, lambda: f64) -> Result<Operator> {
    check_path(seq, lambda)?;
    u_adia(spec, lambda, &dynamic_phases(spec, seq.until(lambda))?)
}

/// `U_adia(lambda)^dag U(lambda)`, where `U(lambda)` contains the pulses at
/// path points `lambda_k <= lambda`.
pub fn u_deviation(spec: &GaugeSpec, seq: &PulseSequence, lambda: f64) -> Result<Operator> {
    let reference = adiabatic_reference(spec, seq, lambda)?;
    let u = propagator_of(seq.until(lambda), spec.dim())?;
    Ok(&reference.adjoint() * &u)
}

/// `W(lambda) = exp(i G lambda) U(lambda)` in the initial eigenbasis, the
/// evolution with the geometric rotation removed.
pub fn w_operator(spec: &GaugeSpec, seq: &PulseSequence, lambda: f64) -> Result<Operator> {
    check_path(seq, lambda)?;
    let unrotate = qla::expm(spec.generator(), c(0.0, lambda))?;
    let u = propagator_of(seq.until(lambda), spec.dim())?;
    let b = spec.basis_matrix();
    Operator::new(b.adjoint() * unrotate.matrix() * u.matrix() * b)
}

/// `op_fidelity(U(Theta_j), U_adia(Theta_j))` for `j = 1..=N`.
pub fn checkpoint_fidelities(spec: &GaugeSpec, seq: &PulseSequence) -> Result<Vec<(f64, f64)>> {
    seq.schedule()
        .thetas()
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let pulses = seq.through_step(j);
            let u = propagator_of(pulses, spec.dim())?;
            let reference = u_adia(spec, theta, &dynamic_phases(spec, pulses)?)?;
            Ok((theta, qla::op_fidelity(&u, &reference)?))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Phase profiles

/// Relative dynamic phase `phi_n - phi_m` along the path. Piecewise constant,
/// jumping at the pulse positions.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProfile {
    jumps: Vec<(f64, f64)>,
}

impl PhaseProfile {
    /// `jumps` holds `(lambda, phase increment)` pairs in path order.
    pub fn new(jumps: Vec<(f64, f64)>) -> Result<Self> {
        if jumps.iter().any(|(l, p)| !l.is_finite() || !p.is_finite()) {
            return Err(Error::NonFinite("phase profile"));
        }
        if jumps.windows(2).any(|w| w[1].0 < w[0].0) || jumps.first().is_some_and(|j| j.0 < 0.0) {
            return Err(Error::InvalidArgument("phase jumps must be ordered along the path".into()));
        }
        Ok(PhaseProfile { jumps })
    }

    /// No modulation: the integrand is 1 everywhere.
    pub fn constant() -> Self {
        PhaseProfile { jumps: Vec::new() }
    }

    /// Jumps of `pi (1 + delta_e)` at every schedule point.
    pub fn square_wave(schedule: &Schedule, delta_e: f64) -> Self {
        let jump = PI * (1.0 + delta_e);
        PhaseProfile { jumps: schedule.lambdas().iter().map(|&l| (l, jump)).collect() }
    }

    /// Profile of the pair `(n, m)` under `pulses`.
    pub fn from_pulses(spec: &GaugeSpec, pulses: &[Pulse], n: usize, m: usize) -> Result<Self> {
        let law: &EnergyLaw = spec.energies();
        let jumps = pulses
            .iter()
            .map(|p| {
                let e = law.at(p.lambda, p.step)?;
                Ok((p.lambda, (e[n] - e[m]) * p.duration))
            })
            .collect::<Result<Vec<_>>>()?;
        PhaseProfile::new(jumps)
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    /// Phase in effect just after `lambda`.
    pub fn phase_at(&self, lambda: f64) -> f64 {
        self.jumps.iter().take_while(|(l, _)| *l <= lambda).map(|(_, p)| p).sum()
    }

    /// `int_0^lambda exp(i phase)`, exact.
    pub fn integral(&self, lambda: f64) -> C64 {
        let mut acc = C64::default();
        let mut start = 0.0;
        let mut phase = 0.0;
        for &(at, jump) in &self.jumps {
            if at >= lambda {
                break;
            }
            acc += C64::from_polar(at - start, phase);
            start = at;
            phase += jump;
        }
        acc + C64::from_polar((lambda - start).max(0.0), phase)
    }
}

/// `sup_{lambda' <= lambda} |int_0^lambda' exp(i phase)|` on [`SUP_GRID`]
/// points per constant-phase interval.
pub fn eps_ave(profile: &PhaseProfile, lambda: f64) -> f64 {
    eps_ave_on_grid(profile, lambda, SUP_GRID)
}

pub fn eps_ave_on_grid(profile: &PhaseProfile, lambda: f64, per_interval: usize) -> f64 {
    let per_interval = per_interval.max(1);
    let mut edges = vec![0.0];
    edges.extend(profile.jumps.iter().map(|(l, _)| *l).filter(|&l| l > 0.0 && l < lambda));
    edges.push(lambda.max(0.0));
    let mut best = 0.0f64;
    let mut acc = C64::default();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dir = C64::from_polar(1.0, profile.phase_at(a));
        let h = (b - a) / per_interval as f64;
        for k in 1..=per_interval {
            best = best.max((acc + dir * (h * k as f64)).norm());
        }
        acc += dir * (b - a);
    }
    best
}

/// Largest `eps_ave` over the connected pairs of `spec`.
pub fn eps_ave_for(spec: &GaugeSpec, pulses: &[Pulse], lambda: f64) -> Result<f64> {
    spec.connected_pairs()
        .iter()
        .map(|&(n, m)| Ok(eps_ave(&PhaseProfile::from_pulses(spec, pulses, n, m)?, lambda)))
        .try_fold(0.0f64, |best, e: Result<f64>| Ok(best.max(e?)))
}

/// Least-squares fit of `eps_ave / (Theta/2N) - 1 = a |delta_e| + b delta_e^2`
/// for the square-wave profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionFit {
    pub linear: f64,
    pub quadratic: f64,
    pub max_residual: f64,
}

pub fn fit_eps_expansion(schedule: &Schedule, deltas: &[f64]) -> Result<ExpansionFit> {
    if deltas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two detunings to fit".into()));
    }
    let base = schedule.theta_total() / (2.0 * schedule.n() as f64);
    let rows: Vec<(f64, f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let y = eps_ave(&PhaseProfile::square_wave(schedule, d), schedule.theta_total()) / base - 1.0;
            (d.abs(), d * d, y)
        })
        .collect();
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x1, x2, y) in &rows {
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        t1 += x1 * y;
        t2 += x2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-300 {
        return Err(Error::InvalidArgument("degenerate detuning set".into()));
    }
    let linear = (t1 * s22 - t2 * s12) / det;
    let quadratic = (s11 * t2 - s12 * t1) / det;
    let max_residual = rows.iter().map(|&(x1, x2, y)| (y - linear * x1 - quadratic * x2).abs()).fold(0.0, f64::max);
    Ok(ExpansionFit { linear, quadratic, max_residual })
}

// ---------------------------------------------------------------------------
// Bound

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub lambda: f64,
    pub g_max: f64,
    pub g_prime_max: f64,
    pub eps_ave: f64,
    pub l_dim: usize,
    pub bound_value: f64,
    pub actual_infidelity: f64,
}

pub fn deviation_bound(lambda: f64, l_dim: usize, eps_ave: f64, g_max: f64, g_prime_max: f64) -> f64 {
    let l = l_dim as f64;
    2.0 * lambda * l * (eps_ave * (g_max * g_max * l + g_prime_max) * g_max).sqrt()
}

impl BoundReport {
    pub const CSV_HEADER: &'static str = "lambda,g_max,g_prime_max,eps_ave,L_dim,bound,infidelity";

    /// A bound above 1 says nothing about the fidelity.
    pub fn is_vacuous(&self) -> bool {
        self.bound_value > 1.0
    }

    pub fn holds(&self) -> bool {
        self.is_vacuous() || self.actual_infidelity <= self.bound_value
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.11e},{:.11e},{:.11e},{:.11e},{},{:.11e},{:.11e}",
            self.lambda, self.g_max, self.g_prime_max, self.eps_ave, self.l_dim, self.bound_value, self.actual_infidelity
        )
    }
}

/// The generator is constant for every [`GaugeSpec`], so `g'_max = 0`.
pub fn bound_report(spec: &GaugeSpec, seq: &PulseSequence, lambda: f64) -> Result<BoundReport> {
    let deviation = u_deviation(spec, seq, lambda)?;
    let l_dim = spec.dim();
    let actual_infidelity = (1.0 - deviation.trace().norm() / l_dim as f64).max(0.0);
    let g_max = spec.g_max();
    let g_prime_max = 0.0;
    let eps = eps_ave_for(spec, seq.pulses(), lambda)?;
    Ok(BoundReport {
        lambda,
        g_max,
        g_prime_max,
        eps_ave: eps,
        l_dim,
        bound_value: deviation_bound(lambda, l_dim, eps, g_max, g_prime_max),
        actual_infidelity,
    })
}

/// Random constant-generator instance: dimension 2 to `max_dim`, `||G|| <= 2`,
/// zero diagonal, energies in [-2, 2], 1 to 6 equally spaced pulses of random
/// duration and a random cut along the path.
pub fn random_bound_trial(master: u64, index: u64, max_dim: usize) -> Result<BoundReport> {
    let mut rng = child_rng(master, index);
    let dim = rng.random_range(2..=max_dim.max(2));
    let mut g = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i + 1..dim {
            let z = c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    let norm = qla::eig_hermitian(&Operator::hermitian(g.clone())?)?
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let target = rng.random_range(0.05..=2.0);
    let g = Operator::hermitian(g * c(target / norm, 0.0))?;
    let energies: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect();
    let basis: Vec<StateVector> = (0..dim).map(|k| StateVector::basis(dim, k)).collect::<Result<_>>()?;
    let spec = GaugeSpec::with_inferred_pairs(g, &basis, EnergyLaw::Constant(energies))?;

    let n = rng.random_range(1..=6);
    let theta = rng.random_range(0.1..=2.0);
    let schedule = Schedule::equal(n, theta)?;
    let pulses = schedule
        .lambdas()
        .iter()
        .enumerate()
        .map(|(step, &lambda)| {
            Ok(Pulse {
                step,
                lambda,
                hamiltonian: hamiltonian_at(&spec, lambda, step)?,
                duration: rng.random_range(0.05..=2.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seq = PulseSequence::new(schedule, pulses)?;
    let lambda = rng.random_range(0.0..=theta);
    bound_report(&spec, &seq, lambda)
}

#[derive(Clone, Debug)]
pub struct BoundStudy {
    pub reports: Vec<BoundReport>,
    pub violations: usize,
    pub vacuous: usize,
}

pub fn bound_monte_carlo(master: u64, trials: usize, max_dim: usize) -> Result<BoundStudy> {
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|i| random_bound_trial(master, i, max_dim))
        .collect::<Result<Vec<_>>>()?;
    let violations = reports.iter().filter(|r| !r.holds()).count();
    let vacuous = reports.iter().filter(|r| r.is_vacuous()).count();
    Ok(BoundStudy { reports, violations, vacuous })
}
