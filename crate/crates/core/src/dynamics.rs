//! Closed- and open-system propagation.
//!
//! Pulse sequences are piecewise constant, so every segment is exponentiated
//! exactly: `exp(-i H tau)` for states and the vectorized Liouvillian for
//! density matrices. Continuous ramps are sliced with the exponential
//! midpoint rule and checked by step doubling.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::models::lambda_levels::{EXCITED, ONE, ZERO};
use crate::protocol::Pulse;
use crate::qla::{self, c, DensityMatrix, Matrix, Operator, StateVector};
use crate::tol;

/// Trace and positivity slack allowed after every Lindblad segment.
pub const LINDBLAD_TOLERANCE: f64 = 1e-8;

/// Largest change between the two finest ramp solutions that is accepted.
pub const RAMP_TOLERANCE: f64 = 1e-7;

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `exp(-i H t) psi` through the eigenbasis of `H`.
fn evolve_vector(h: &Operator, t: f64, psi: &qla::Vector) -> Result<qla::Vector> {
    let eig = qla::eig_hermitian(h)?;
    let mut coeffs = eig.vectors.adjoint() * psi;
    for (z, e) in coeffs.iter_mut().zip(&eig.values) {
        *z *= C64::from_polar(1.0, -e * t);
    }
    Ok(&eig.vectors * coeffs)
}

/// Ordered product `U_k ... U_1` of the pulse exponentials.
pub fn propagator_of(pulses: &[Pulse], dim: usize) -> Result<Operator> {
    let mut u = Matrix::identity(dim, dim);
    for p in pulses {
        check_dim(dim, p.hamiltonian.dim())?;
        u = qla::evolution(&p.hamiltonian, p.duration)?.matrix() * u;
    }
    Operator::new(u)
}

pub fn propagate_unitary(pulses: &[Pulse], psi0: &StateVector) -> Result<StateVector> {
    let mut v = psi0.as_vector().clone();
    for p in pulses {
        check_dim(psi0.dim(), p.hamiltonian.dim())?;
        v = evolve_vector(&p.hamiltonian, p.duration, &v)?;
    }
    let out = StateVector::from_vector(v)?;
    let drift = (out.norm() - psi0.norm()).abs();
    if drift > tol::PROPAGATION {
        return Err(Error::NonPhysicalState(format!("norm drifted by {drift:.3e}")));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lindblad

/// Collapse operators with their rates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LindbladModel {
    collapse: Vec<(Operator, f64)>,
}

impl LindbladModel {
    pub fn closed() -> Self {
        LindbladModel::default()
    }

    pub fn with(mut self, op: Operator, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidArgument(format!("collapse rate {rate} must be finite and >= 0")));
        }
        if let Some((first, _)) = self.collapse.first() {
            check_dim(first.dim(), op.dim())?;
        }
        self.collapse.push((op, rate));
        Ok(self)
    }

    pub fn collapse_ops(&self) -> &[(Operator, f64)] {
        &self.collapse
    }

    pub fn is_closed(&self) -> bool {
        self.collapse.iter().all(|(_, r)| *r == 0.0)
    }
}

/// Decay of `|e>` into the qubit levels at total rate `gamma_e`, a fraction
/// `to_one` of it ending in `|1>`, plus dephasing `|1><1| - |0><0|` at
/// `gamma_dep`.
pub fn lambda_noise(gamma_e: f64, gamma_dep: f64, to_one: f64) -> Result<LindbladModel> {
    if !(0.0..=1.0).contains(&to_one) {
        return Err(Error::InvalidArgument(format!("branching fraction {to_one} outside [0, 1]")));
    }
    let ket = |k| StateVector::basis(3, k).expect("level index < 3");
    let e = ket(EXCITED);
    LindbladModel::closed()
        .with(Operator::outer(&ket(ONE), &e), gamma_e * to_one)?
        .with(Operator::outer(&ket(ZERO), &e), gamma_e * (1.0 - to_one))?
        .with(Operator::diagonal(&[1.0, -1.0, 0.0]), gamma_dep)
}

/// Column-stacked Liouvillian, `vec(A rho B) = (B^T (x) A) vec(rho)`.
pub fn liouvillian(h: &Operator, noise: &LindbladModel) -> Result<Matrix> {
    let d = h.dim();
    let id = Matrix::identity(d, d);
    let hm = h.matrix();
    let mut l = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * c(0.0, -1.0);
    for (op, rate) in &noise.collapse {
        check_dim(d, op.dim())?;
        if *rate == 0.0 {
            continue;
        }
        let a = op.matrix();
        let ada = a.adjoint() * a;
        let dissipator = a.conjugate().kronecker(a)
            - id.kronecker(&ada) * c(0.5, 0.0)
            - ada.transpose().kronecker(&id) * c(0.5, 0.0);
        l += dissipator * c(*rate, 0.0);
    }
    Ok(l)
}

/// Completely positive map assembled from exact segment exponentials.
#[derive(Clone, Debug)]
pub struct LindbladMap {
    dim: usize,
    superop: Matrix,
}

impl LindbladMap {
    pub fn identity(dim: usize) -> Self {
        LindbladMap { dim, superop: Matrix::identity(dim * dim, dim * dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &Matrix {
        &self.superop
    }

    /// Appends `exp(L tau)`.
    pub fn then(mut self, h: &Operator, tau: f64, noise: &LindbladModel) -> Result<Self> {
        check_dim(self.dim, h.dim())?;
        let step = (liouvillian(h, noise)? * c(tau, 0.0)).exp();
        self.superop = step * &self.superop;
        let leak = self.trace_leak();
        if !leak.is_finite() || leak > LINDBLAD_TOLERANCE {
            return Err(Error::NonPhysicalState(format!("map changes the trace by up to {leak:.3e}")));
        }
        Ok(self)
    }

    /// Largest deviation of `vec(I)^T S` from `vec(I)^T`.
    fn trace_leak(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| {
                let tr: C64 = (0..d).map(|i| self.superop[(i * d + i, col)]).sum();
                let want = if col % (d + 1) == 0 { 1.0 } else { 0.0 };
                (tr - want).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dim(self.dim, rho.dim())?;
        let v = &self.superop * Matrix::from_column_slice(self.dim * self.dim, 1, rho.matrix().as_slice());
        let out = DensityMatrix::from_matrix_unchecked(Matrix::from_column_slice(self.dim, self.dim, v.as_slice()));
        out.check_physical(LINDBLAD_TOLERANCE, LINDBLAD_TOLERANCE)?;
        Ok(out)
    }
}

pub fn lindblad_map(pulses: &[Pulse], dim: usize, noise: &LindbladModel) -> Result<LindbladMap> {
    pulses
        .iter()
        .try_fold(LindbladMap::identity(dim), |map, p| map.then(&p.hamiltonian, p.duration, noise))
}

/// Evolves `rho0` segment by segment, checking trace, Hermiticity and
/// positivity at each boundary.
pub fn propagate_lindblad(pulses: &[Pulse], rho0: &DensityMatrix, noise: &LindbladModel) -> Result<DensityMatrix> {
    rho0.check_physical(LINDBLAD_TOLERANCE, LINDBLAD_TOLERANCE)?;
    let mut rho = rho0.clone();
    for p in pulses {
        rho = LindbladMap::identity(rho.dim()).then(&p.hamiltonian, p.duration, noise)?.apply(&rho)?;
    }
    Ok(rho)
}

/// Lindblad evolution along a ramp at its nominal step count.
pub fn propagate_lindblad_ramp<F>(
    ramp: &RampSpec,
    h_of_s: F,
    rho0: &DensityMatrix,
    noise: &LindbladModel,
) -> Result<DensityMatrix>
where
    F: Fn(f64) -> Result<Operator>,
{
    rho0.check_physical(LINDBLAD_TOLERANCE, LINDBLAD_TOLERANCE)?;
    let m = ramp.nominal_steps();
    let dt = ramp.total_time / m as f64;
    let mut rho = rho0.clone();
    for k in 0..m {
        let h = h_of_s(ramp.s_mid(k, m))?;
        rho = LindbladMap::identity(rho.dim()).then(&h, dt, noise)?.apply(&rho)?;
    }
    Ok(rho)
}

// ---------------------------------------------------------------------------
// Ramps

#[derive(Clone, Debug, PartialEq)]
pub enum RampShape {
    /// `s = t/T`
    Linear,
    /// Piecewise-linear `s(u)` through `(u, s)` knots with `u = t/T`,
    /// starting at `u = 0` and ending at `u = 1`.
    Table(Vec<(f64, f64)>),
}

impl RampShape {
    pub fn s(&self, u: f64) -> f64 {
        match self {
            RampShape::Linear => u,
            RampShape::Table(knots) => {
                let k = knots.partition_point(|&(x, _)| x <= u).clamp(1, knots.len() - 1);
                let (x0, y0) = knots[k - 1];
                let (x1, y1) = knots[k];
                if x1 == x0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (u - x0) / (x1 - x0)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RampSpec {
    pub total_time: f64,
    pub shape: RampShape,
    /// Default 400, i.e. about 2500 steps per period `2 pi / E` at `E = 1`.
    pub steps_per_unit_time: u32,
}

impl RampSpec {
    pub const DEFAULT_STEPS_PER_UNIT_TIME: u32 = 400;
    const MIN_STEPS: usize = 16;
    const MAX_DOUBLINGS: u32 = 8;

    pub fn linear(total_time: f64) -> Result<Self> {
        Self::new(total_time, RampShape::Linear, Self::DEFAULT_STEPS_PER_UNIT_TIME)
    }

    pub fn new(total_time: f64, shape: RampShape, steps_per_unit_time: u32) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidArgument(format!("ramp time {total_time} must be positive")));
        }
        if steps_per_unit_time == 0 {
            return Err(Error::InvalidArgument("steps_per_unit_time must be positive".into()));
        }
        if let RampShape::Table(knots) = &shape {
            let ordered = knots.windows(2).all(|w| w[1].0 >= w[0].0);
            let ends = knots.first().map(|k| k.0) == Some(0.0) && knots.last().map(|k| k.0) == Some(1.0);
            if knots.len() < 2 || !ordered || !ends || knots.iter().any(|(u, s)| !u.is_finite() || !s.is_finite()) {
                return Err(Error::InvalidArgument(
                    "ramp table needs ordered knots spanning u = 0 to u = 1".into(),
                ));
            }
        }
        Ok(RampSpec { total_time, shape, steps_per_unit_time })
    }

    pub fn nominal_steps(&self) -> usize {
        ((self.total_time * self.steps_per_unit_time as f64).ceil() as usize).max(Self::MIN_STEPS)
    }

    fn s_mid(&self, k: usize, m: usize) -> f64 {
        self.shape.s((k as f64 + 0.5) / m as f64)
    }
}

/// Midpoint-rule propagation with a fixed number of steps.
pub fn propagate_ramp_steps<F>(ramp: &RampSpec, h_of_s: &F, psi0: &StateVector, steps: usize) -> Result<StateVector>
where
    F: Fn(f64) -> Result<Operator>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("ramp needs at least one step".into()));
    }
    let dt = ramp.total_time / steps as f64;
    let mut v = psi0.as_vector().clone();
    for k in 0..steps {
        let h = h_of_s(ramp.s_mid(k, steps))?;
        check_dim(psi0.dim(), h.dim())?;
        v = evolve_vector(&h, dt, &v)?;
    }
    let out = StateVector::from_vector(v)?;
    let drift = (out.norm() - psi0.norm()).abs();
    if drift > 1e-9 {
        return Err(Error::NonPhysicalState(format!("norm drifted by {drift:.3e}")));
    }
    Ok(out)
}

/// Propagates along the ramp, doubling the step count until two successive
/// solutions agree within [`RAMP_TOLERANCE`]. Returns the finer one.
pub fn propagate_ramp<F>(ramp: &RampSpec, h_of_s: F, psi0: &StateVector) -> Result<StateVector>
where
    F: Fn(f64) -> Result<Operator>,
{
    let mut steps = ramp.nominal_steps();
    let mut coarse = propagate_ramp_steps(ramp, &h_of_s, psi0, steps)?;
    let mut change = f64::INFINITY;
    for _ in 0..RampSpec::MAX_DOUBLINGS {
        steps *= 2;
        let fine = propagate_ramp_steps(ramp, &h_of_s, psi0, steps)?;
        change = (fine.as_vector() - coarse.as_vector()).norm();
        if change < RAMP_TOLERANCE {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::ConvergenceNotReached { steps, change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lambda_target_gate, CoupledQubitModel, Interpolation, LambdaModel};
    use crate::models::{build_coupled_qubits, build_lambda};
    use crate::protocol::{compile, Schedule};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn lambda_sequence(n: usize, theta: f64, phi: f64) -> Vec<Pulse> {
        let spec = build_lambda(&LambdaModel::resonant(1.0, phi).unwrap()).unwrap();
        compile(&spec, &Schedule::equal(n, theta).unwrap()).unwrap().pulses().to_vec()
    }

    fn pulse(h: Operator, duration: f64) -> Pulse {
        Pulse { step: 0, lambda: 0.0, hamiltonian: h, duration }
    }

    #[test]
    fn empty_sequence_is_identity() {
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        assert_eq!(propagate_unitary(&[], &psi).unwrap(), psi);
        assert_eq!(propagator_of(&[], 3).unwrap().matrix(), Operator::identity(3).matrix());
    }

    #[test]
    fn single_and_commuting_pulses() {
        let h = Operator::diagonal(&[0.3, -1.1, 2.0]);
        let u = propagator_of(&[pulse(h.clone(), 0.7)], 3).unwrap();
        assert!(u.max_abs_diff(&qla::evolution(&h, 0.7).unwrap()) < 1e-14);

        let h2 = h.scaled_re(2.5);
        let u = propagator_of(&[pulse(h.clone(), 0.4), pulse(h2.clone(), 0.9)], 3).unwrap();
        let want = qla::evolution(&(&h.scaled_re(0.4) + &h2.scaled_re(0.9)), 1.0).unwrap();
        assert!(u.max_abs_diff(&want) < 1e-10);
        assert!(u.unitarity_deviation() < 1e-10);
    }

    #[test]
    fn lambda_single_pulse_sends_one_to_minus_zero() {
        let pulses = lambda_sequence(1, PI / 2.0, 0.0);
        let out = propagate_unitary(&pulses, &StateVector::basis(3, ONE).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[ZERO].re, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.amplitudes()[ZERO].im, 0.0, epsilon = 1e-9);
        assert!(out.amplitudes()[ONE].norm() < 1e-9);
    }

    #[test]
    fn lambda_gate_and_excited_return() {
        for n in 1..=4 {
            let pulses = lambda_sequence(n, PI / 4.0, PI / 3.0);
            let u = propagator_of(&pulses, 3).unwrap();
            assert_abs_diff_eq!(u.entry(EXCITED, EXCITED).norm(), 1.0, epsilon = 1e-9);
            let gate = u.restrict(&[ONE, ZERO]).unwrap();
            let want = lambda_target_gate(n, PI / 4.0, PI / 3.0);
            assert!(gate.phase_distance(&want).unwrap() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn coupled_qubit_single_pulse_prepares_psi_plus() {
        let model = CoupledQubitModel::new(1.0, Interpolation::Trig);
        let spec = build_coupled_qubits(&model).unwrap();
        let seq = compile(&spec, &Schedule::equal(1, PI / 4.0).unwrap()).unwrap();
        assert_abs_diff_eq!(seq.total_time(), PI / 2.0, epsilon = 1e-12);
        let out = propagate_unitary(seq.pulses(), &CoupledQubitModel::ket(1, 1)).unwrap();
        assert!(out.phase_distance(&CoupledQubitModel::psi_plus()).unwrap() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let psi = StateVector::basis(2, 0).unwrap();
        let err = propagate_unitary(&[pulse(Operator::identity(3), 1.0)], &psi).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn closed_lindblad_matches_unitary() {
        let pulses = lambda_sequence(3, PI / 2.0, 0.4);
        let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]).unwrap();
        let rho = propagate_lindblad(&pulses, &DensityMatrix::from_pure(&psi).unwrap(), &LindbladModel::closed())
            .unwrap();
        let want = DensityMatrix::from_pure(&propagate_unitary(&pulses, &psi).unwrap()).unwrap();
        let diff = (rho.matrix() - want.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn dephasing_decays_coherence() {
        let gamma = 0.3;
        let noise = LindbladModel::closed().with(Operator::diagonal(&[1.0, -1.0]), gamma).unwrap();
        let plus = StateVector::from_real(&[0.5f64.sqrt(), 0.5f64.sqrt()]).unwrap();
        let rho0 = DensityMatrix::from_pure(&plus).unwrap();
        let h = Operator::zeros(2);
        let mut rho = rho0.clone();
        let mut t = 0.0;
        for tau in [0.2, 0.5, 1.3] {
            rho = propagate_lindblad(&[pulse(h.clone(), tau)], &rho, &noise).unwrap();
            t += tau;
            assert_abs_diff_eq!(rho.matrix()[(0, 1)].re, 0.5 * (-2.0 * gamma * t).exp(), epsilon = 1e-8);
            assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn decay_lowers_transfer() {
        let pulses = lambda_sequence(1, PI / 2.0, 0.0);
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(3, ONE).unwrap()).unwrap();
        let target = StateVector::basis(3, ZERO).unwrap();
        let ideal = propagate_lindblad(&pulses, &rho0, &LindbladModel::closed()).unwrap();
        let noisy = propagate_lindblad(&pulses, &rho0, &lambda_noise(1.5 / (2.0 * PI), 0.0, 0.5).unwrap()).unwrap();
        let (fi, fn_) = (ideal.fidelity_with(&target).unwrap(), noisy.fidelity_with(&target).unwrap());
        assert_abs_diff_eq!(fi, 1.0, epsilon = 1e-9);
        assert!(fn_ < fi - 1e-3, "{fn_} vs {fi}");
    }

    #[test]
    fn map_agrees_with_stepwise_propagation() {
        let pulses = lambda_sequence(2, PI / 3.0, 0.0);
        let noise = lambda_noise(0.2, 0.05, 0.3).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::from_real(&[0.8, 0.6, 0.0]).unwrap()).unwrap();
        let a = lindblad_map(&pulses, 3, &noise).unwrap().apply(&rho0).unwrap();
        let b = propagate_lindblad(&pulses, &rho0, &noise).unwrap();
        let diff = (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(LindbladModel::closed().with(Operator::identity(2), -0.1).is_err());
        assert!(lambda_noise(1.0, 0.0, 1.5).is_err());
    }

    fn qubit_ramp_h(model: &CoupledQubitModel) -> impl Fn(f64) -> Result<Operator> + '_ {
        move |s| Ok(model.linear_hamiltonian(s))
    }

    #[test]
    fn sudden_limit_keeps_initial_state() {
        let model = CoupledQubitModel::new(1.0, Interpolation::Trig);
        let psi0 = CoupledQubitModel::ket(1, 1);
        let out = propagate_ramp(&RampSpec::linear(0.01).unwrap(), qubit_ramp_h(&model), &psi0).unwrap();
        assert!(qla::state_fidelity(&out, &psi0).unwrap() >= 0.999);
    }

    #[test]
    fn slow_ramp_approaches_psi_plus() {
        let model = CoupledQubitModel::new(1.0, Interpolation::Trig);
        let psi0 = CoupledQubitModel::ket(1, 1);
        let out = propagate_ramp(&RampSpec::linear(50.0).unwrap(), qubit_ramp_h(&model), &psi0).unwrap();
        let f = qla::state_fidelity(&out, &CoupledQubitModel::psi_plus()).unwrap();
        assert!(f > 0.9, "{f}");
        assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let model = CoupledQubitModel::new(1.0, Interpolation::Trig);
        let h = qubit_ramp_h(&model);
        let ramp = RampSpec::linear(3.0).unwrap();
        let psi0 = CoupledQubitModel::ket(1, 1);
        let run = |m| propagate_ramp_steps(&ramp, &h, &psi0, m).unwrap().as_vector().clone();
        let reference = (run(2048) * c(4.0, 0.0) - run(1024)) * c(1.0 / 3.0, 0.0);
        let e1 = (run(32) - &reference).norm();
        let e2 = (run(64) - &reference).norm();
        assert!(e1 / e2 >= 3.0, "{e1} {e2}");
    }

    #[test]
    fn table_shape_interpolates() {
        let shape = RampShape::Table(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]);
        assert_abs_diff_eq!(shape.s(0.25), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.s(0.75), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.s(1.0), 1.0, epsilon = 1e-15);
        assert!(RampSpec::new(1.0, RampShape::Table(vec![(0.0, 0.0), (0.9, 1.0)]), 10).is_err());
        assert!(RampSpec::linear(0.0).is_err());
    }

    #[test]
    fn too_coarse_ramp_reports_convergence_failure() {
        let ramp = RampSpec::new(1.0, RampShape::Linear, 1).unwrap();
        let h = |s: f64| {
            let m = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1e5, 0.0), c(1e5, 0.0), c(1e6 * s, 0.0)]);
            Operator::hermitian(m)
        };
        let err = propagate_ramp(&ramp, h, &StateVector::basis(2, 0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ConvergenceNotReached { .. }));
    }
}
