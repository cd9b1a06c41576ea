//! Builders for the three worked systems: a truncated bosonic mode, a
//! Lambda-type three-level system and a pair of coupled qubits.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::protocol::{EnergyLaw, GaugeSpec};
use crate::qla::{c, Matrix, Operator, StateVector, I};
use crate::tol;

/// Population allowed in the top two Fock levels before a bosonic result is
/// flagged as truncation-limited.
pub const LEAKAGE_LIMIT: f64 = 1e-8;

/// Operators the error channels act through.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlLayout {
    /// Operator multiplied by a detuning error or an energy drift.
    pub detuning: Option<Operator>,
    /// Number of qubits when the space is a qubit register.
    pub qubits: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: PauliAxis) -> Operator {
    let z = C64::default();
    let one = c(1.0, 0.0);
    let m = match axis {
        PauliAxis::X => Matrix::from_row_slice(2, 2, &[z, one, one, z]),
        PauliAxis::Y => Matrix::from_row_slice(2, 2, &[z, -I, I, z]),
        PauliAxis::Z => Matrix::from_row_slice(2, 2, &[one, z, z, -one]),
    };
    Operator::hermitian(m).expect("Pauli matrices are Hermitian")
}

/// `op` acting on qubit `site` (0 is the leftmost factor) of an `n`-qubit register.
pub fn single_site(qubits: usize, site: usize, op: &Operator) -> Result<Operator> {
    if site >= qubits {
        return Err(Error::IndexOutOfRange { index: site, dim: qubits });
    }
    let id = Operator::identity(2);
    let mut out = if site == 0 { op.clone() } else { id.clone() };
    for k in 1..qubits {
        out = out.kron(if k == site { op } else { &id });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bosonic mode

#[derive(Clone, Debug, PartialEq)]
pub struct BosonicModel {
    pub truncation: usize,
    pub omega: f64,
    pub alpha: C64,
}

impl BosonicModel {
    pub fn new(truncation: usize, omega: f64, alpha: C64) -> Self {
        BosonicModel { truncation, omega, alpha }
    }

    /// Heuristic cut `truncation >= 8 (1 + |alpha|^2)`.
    pub fn truncation_warning(&self) -> Option<String> {
        let need = 8.0 * (1.0 + self.alpha.norm_sqr());
        ((self.truncation as f64) < need)
            .then(|| format!("truncation {} below the suggested {}", self.truncation, need.ceil()))
    }

    pub fn annihilation(&self) -> Operator {
        annihilation(self.truncation)
    }

    /// `G = i alpha a^dag - i alpha^* a`.
    pub fn generator(&self) -> Operator {
        let a = self.annihilation();
        let g = a.adjoint().matrix() * (I * self.alpha) - a.matrix() * (I * self.alpha.conj());
        Operator::hermitian(g).expect("displacement generator is Hermitian")
    }

    pub fn number(&self) -> Operator {
        Operator::diagonal(&(0..self.truncation).map(|n| n as f64).collect::<Vec<_>>())
    }

    /// `omega a^dag a - lambda omega (alpha a^dag + alpha^* a) + omega |lambda alpha|^2`.
    pub fn displaced_hamiltonian(&self, lambda: f64) -> Operator {
        let a = self.annihilation();
        let n = self.number();
        let drive = a.adjoint().matrix() * self.alpha + a.matrix() * self.alpha.conj();
        let shift = self.omega * (lambda * self.alpha).norm_sqr();
        let m = n.matrix() * c(self.omega, 0.0) - drive * c(lambda * self.omega, 0.0)
            + Matrix::identity(self.truncation, self.truncation) * c(shift, 0.0);
        Operator::hermitian(m).expect("displaced oscillator is Hermitian")
    }

    /// Truncated coherent state from the analytic series (not renormalized).
    pub fn coherent_state(&self) -> Result<StateVector> {
        StateVector::new(coherent_amplitudes(self.alpha, self.truncation))
    }

    pub fn layout(&self) -> ControlLayout {
        ControlLayout { detuning: Some(self.number()), qubits: None }
    }
}

pub fn annihilation(dim: usize) -> Operator {
    let m = Matrix::from_fn(dim, dim, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { C64::default() });
    Operator::new(m).expect("finite ladder operator")
}

/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n < dim`.
pub fn coherent_amplitudes(alpha: C64, dim: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(dim);
    let mut a = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            a = a * alpha / (n as f64).sqrt();
        }
        amps.push(a);
    }
    amps
}

/// Population in the top `levels` basis states.
pub fn top_leakage(psi: &StateVector, levels: usize) -> f64 {
    let d = psi.dim();
    (d.saturating_sub(levels)..d).map(|k| psi.population(k)).sum()
}

pub fn build_bosonic(m: &BosonicModel) -> Result<GaugeSpec> {
    if m.truncation < 4 {
        return Err(Error::InvalidTruncation(m.truncation));
    }
    if let Some(w) = m.truncation_warning() {
        log::warn!("{w}");
    }
    let dim = m.truncation;
    let basis: Vec<StateVector> = (0..dim).map(|k| StateVector::basis(dim, k)).collect::<Result<_>>()?;
    let energies = EnergyLaw::Constant((0..dim).map(|n| n as f64 * m.omega).collect());
    let pairs: Vec<(usize, usize)> =
        if m.alpha.norm() > tol::CONSTRUCTION { (0..dim - 1).map(|n| (n, n + 1)).collect() } else { Vec::new() };
    GaugeSpec::new(m.generator(), &basis, energies, pairs)
}

// ---------------------------------------------------------------------------
// Lambda system

/// Level indices in the order `{|1>, |0>, |e>}`.
pub mod lambda_levels {
    pub const ONE: usize = 0;
    pub const ZERO: usize = 1;
    pub const EXCITED: usize = 2;
    pub const QUBIT: [usize; 2] = [ONE, ZERO];
}

use lambda_levels::{EXCITED, ONE};

/// Lambda system parametrized by the quantization integers and pulse length;
/// coupling, detuning and mixing angle are derived.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaModel {
    k2: u32,
    k3: u32,
    t_p: f64,
    phi: f64,
    xi: f64,
}

impl LambdaModel {
    pub fn new(k2: u32, k3: u32, t_p: f64, phi: f64) -> Result<Self> {
        if !(t_p > 0.0 && t_p.is_finite()) || !phi.is_finite() {
            return Err(Error::InvalidArgument(format!("t_p = {t_p}, phi = {phi}")));
        }
        let mut m = LambdaModel { k2, k3, t_p, phi, xi: 0.0 };
        let (e2, e3) = (m.e2(), m.e3());
        m.xi = 0.5 * ((e3 + e2) / (e3 - e2)).clamp(-1.0, 1.0).acos();
        Ok(m)
    }

    /// Resonant case `k2 = k3 = 0`, `t_p = pi / Omega`.
    pub fn resonant(omega: f64, phi: f64) -> Result<Self> {
        Self::new(0, 0, PI / omega, phi)
    }

    /// Nearest quantized model for the requested coupling and detuning.
    /// Returns the model (exact `Omega`) and `|Delta_model - Delta|`.
    pub fn from_coupling(omega: f64, delta: f64, phi: f64) -> Result<(Self, f64)> {
        if !(omega > 0.0 && omega.is_finite()) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("Omega = {omega}, Delta = {delta}")));
        }
        let target = delta / omega;
        let mut best: Option<(f64, u64, u32, u32)> = None;
        for k2 in 0..64u32 {
            for k3 in 0..64u32 {
                let (a, b) = (2.0 * k2 as f64 + 1.0, 2.0 * k3 as f64 + 1.0);
                let err = ((b - a) / (a * b).sqrt() - target).abs();
                let key = (err, (a * b) as u64, k2, k3);
                if best.map_or(true, |bst| key.0 < bst.0 - 1e-15 || (key.0 <= bst.0 + 1e-15 && key.1 < bst.1)) {
                    best = Some(key);
                }
            }
        }
        let (_, prod, k2, k3) = best.unwrap();
        let m = Self::new(k2, k3, PI * (prod as f64).sqrt() / omega, phi)?;
        let mismatch = (m.detuning() - delta).abs();
        Ok((m, mismatch))
    }

    /// Overrides the derived mixing angle; [`build_lambda`] rejects values
    /// that break `<0|H|1> = 0`.
    pub fn with_mixing_angle(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn k2(&self) -> u32 {
        self.k2
    }

    pub fn k3(&self) -> u32 {
        self.k3
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn e2(&self) -> f64 {
        -(2.0 * self.k2 as f64 + 1.0) * PI / self.t_p
    }

    pub fn e3(&self) -> f64 {
        (2.0 * self.k3 as f64 + 1.0) * PI / self.t_p
    }

    /// `Omega = sqrt(-E2 E3)`.
    pub fn coupling(&self) -> f64 {
        (-self.e2() * self.e3()).sqrt()
    }

    /// `Delta = E2 + E3`.
    pub fn detuning(&self) -> f64 {
        self.e2() + self.e3()
    }

    pub fn stokes(&self, lambda: f64) -> f64 {
        2.0 * self.coupling() * lambda.cos()
    }

    pub fn pump(&self, lambda: f64) -> f64 {
        2.0 * self.coupling() * lambda.sin()
    }

    fn ket(amp_one: C64, amp_zero: C64, amp_e: C64) -> StateVector {
        StateVector::new(vec![amp_one, amp_zero, amp_e]).expect("finite amplitudes")
    }

    /// `sin(lambda)|1> + e^{i phi} cos(lambda)|0>`.
    pub fn bright_state(&self, lambda: f64) -> StateVector {
        Self::ket(c(lambda.sin(), 0.0), C64::from_polar(lambda.cos(), self.phi), C64::default())
    }

    /// `cos(lambda)|1> - e^{i phi} sin(lambda)|0>`.
    pub fn dark_state(&self, lambda: f64) -> StateVector {
        Self::ket(c(lambda.cos(), 0.0), -C64::from_polar(lambda.sin(), self.phi), C64::default())
    }

    /// `Omega (|B><e| + |e><B|) + Delta |e><e|`.
    pub fn reference_hamiltonian(&self, lambda: f64) -> Operator {
        let b = self.bright_state(lambda);
        let e = StateVector::basis(3, EXCITED).unwrap();
        let be = Operator::outer(&b, &e);
        let coupling = (&be + &be.adjoint()).scaled_re(self.coupling());
        let m = coupling.matrix() + Operator::projector(&e).scaled_re(self.detuning()).matrix();
        Operator::hermitian(m).expect("Hermitian by construction")
    }

    pub fn layout(&self) -> ControlLayout {
        ControlLayout { detuning: Some(Operator::diagonal(&[0.0, 0.0, 1.0])), qubits: None }
    }

    fn initial_basis(&self) -> Vec<StateVector> {
        let (s, co) = self.xi.sin_cos();
        let ph = C64::from_polar(1.0, self.phi);
        vec![
            StateVector::basis(3, ONE).unwrap(),
            Self::ket(C64::default(), ph * co, c(-s, 0.0)),
            Self::ket(C64::default(), ph * s, c(co, 0.0)),
        ]
    }
}

/// `g_{1,2} = i cos(xi)`, `g_{1,3} = i sin(xi)`, `g_{2,3} = 0` with
/// energies `(0, E2, E3)`.
pub fn build_lambda(m: &LambdaModel) -> Result<GaugeSpec> {
    let (e2, e3) = (m.e2(), m.e3());
    let residual = ((e3 - e2) * (2.0 * m.xi).cos() - (e3 + e2)).abs();
    if residual > tol::PROPAGATION * (e3 - e2).abs().max(1.0) || (2.0 * m.xi).sin() < 0.0 {
        return Err(Error::InconsistentAngles { residual });
    }
    let basis = m.initial_basis();
    let (s, co) = m.xi.sin_cos();
    let mut g = Matrix::zeros(3, 3);
    for (k, amp) in [(1usize, c(0.0, co)), (2usize, c(0.0, s))] {
        let one = basis[0].as_vector();
        let other = basis[k].as_vector();
        g += one * other.adjoint() * amp + other * one.adjoint() * amp.conj();
    }
    let pairs: Vec<(usize, usize)> = [(0usize, 1usize, co), (0, 2, s)]
        .into_iter()
        .filter(|(_, _, w)| w.abs() > tol::CONSTRUCTION)
        .map(|(a, b, _)| (a, b))
        .collect();
    GaugeSpec::new(Operator::hermitian(g)?, &basis, EnergyLaw::Constant(vec![0.0, e2, e3]), pairs)
}

/// Single-qubit gate realized on `{|1>, |0>}` by an `n`-pulse sequence.
pub fn lambda_target_gate(n: usize, theta: f64, phi: f64) -> Operator {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let (s, co) = theta.sin_cos();
    let m = Matrix::from_row_slice(
        2,
        2,
        &[c(co, 0.0), C64::from_polar(sign * s, -phi), -C64::from_polar(s, phi), c(sign * co, 0.0)],
    );
    Operator::new(m).expect("finite gate")
}

// ---------------------------------------------------------------------------
// Coupled qubits

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// `H = cos(2 lambda) H0 + sin(2 lambda) H1`
    Trig,
    /// `H = cot(2 lambda) H0 + H1`
    Cot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledQubitModel {
    pub energy: f64,
    pub beta_mix: f64,
    pub xi_mix: f64,
    pub interpolation: Interpolation,
}

impl CoupledQubitModel {
    pub fn new(energy: f64, interpolation: Interpolation) -> Self {
        CoupledQubitModel { energy, beta_mix: PI / 4.0, xi_mix: 0.0, interpolation }
    }

    /// Two-qubit basis state `|q1 q2>`.
    pub fn ket(q1: usize, q2: usize) -> StateVector {
        StateVector::basis(4, 2 * q1 + q2).unwrap()
    }

    /// `(|00> - |11>)/sqrt(2)`
    pub fn psi_plus() -> StateVector {
        let h = 0.5f64.sqrt();
        StateVector::from_real(&[h, 0.0, 0.0, -h]).unwrap()
    }

    /// `(|01> - |10>)/sqrt(2)`
    pub fn psi_minus() -> StateVector {
        let h = 0.5f64.sqrt();
        StateVector::from_real(&[0.0, h, -h, 0.0]).unwrap()
    }

    /// `-E/2 (sz1 + sz2)`
    pub fn h0(&self) -> Operator {
        let z = pauli(PauliAxis::Z);
        let sum = &single_site(2, 0, &z).unwrap() + &single_site(2, 1, &z).unwrap();
        sum.scaled_re(-self.energy / 2.0)
    }

    /// `-E sx1 sx2`
    pub fn h1(&self) -> Operator {
        let x = pauli(PauliAxis::X);
        x.kron(&x).scaled_re(-self.energy)
    }

    /// `sz1 sz2`
    pub fn parity() -> Operator {
        let z = pauli(PauliAxis::Z);
        z.kron(&z)
    }

    pub fn reference_hamiltonian(&self, lambda: f64) -> Result<Operator> {
        match self.interpolation {
            Interpolation::Trig => {
                let (s, co) = (2.0 * lambda).sin_cos();
                Ok(&self.h0().scaled_re(co) + &self.h1().scaled_re(s))
            }
            Interpolation::Cot => {
                let s = (2.0 * lambda).sin();
                if s.abs() < tol::CONSTRUCTION {
                    return Err(Error::SingularPoint { lambda });
                }
                Ok(&self.h0().scaled_re((2.0 * lambda).cos() / s) + &self.h1())
            }
        }
    }

    /// Linear interpolation `(1 - s) H0 + s H1`.
    pub fn linear_hamiltonian(&self, s: f64) -> Operator {
        &self.h0().scaled_re(1.0 - s) + &self.h1().scaled_re(s)
    }

    pub fn layout(&self) -> ControlLayout {
        ControlLayout { detuning: Some(self.h0().scaled_re(1.0 / self.energy)), qubits: Some(2) }
    }

    fn initial_basis(&self) -> Vec<StateVector> {
        let (sb, cb) = self.beta_mix.sin_cos();
        let ph = C64::from_polar(1.0, self.xi_mix);
        let z = C64::default();
        vec![
            Self::ket(1, 1),
            StateVector::new(vec![I, z, z, z]).unwrap(),
            StateVector::new(vec![z, ph * cb, c(-sb, 0.0), z]).unwrap(),
            StateVector::new(vec![z, ph * sb, c(cb, 0.0), z]).unwrap(),
        ]
    }
}

/// `g_{1,2} = g_{2,1} = -1`, `|1_0> = |11>`, `|2_0> = i|00>`; energies
/// `(E, -E, E sin 2l, -E sin 2l)`, each divided by `sin 2l` in cot mode.
pub fn build_coupled_qubits(m: &CoupledQubitModel) -> Result<GaugeSpec> {
    if !(m.energy > 0.0 && m.energy.is_finite()) {
        return Err(Error::InvalidArgument(format!("energy scale {} must be positive", m.energy)));
    }
    let basis = m.initial_basis();
    let (one, two) = (basis[0].as_vector(), basis[1].as_vector());
    let g = (one * two.adjoint() + two * one.adjoint()) * c(-1.0, 0.0);
    let e = m.energy;
    let energies = EnergyLaw::Modulated {
        offset: vec![e, -e, 0.0, 0.0],
        sin2: vec![0.0, 0.0, e, -e],
        cosecant: m.interpolation == Interpolation::Cot,
    };
    GaugeSpec::new(Operator::hermitian(g)?, &basis, energies, [(0, 1)])
}

// ---------------------------------------------------------------------------

/// Any of the built-in systems.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Bosonic(BosonicModel),
    Lambda(LambdaModel),
    CoupledQubits(CoupledQubitModel),
}

impl Model {
    pub fn id(&self) -> &'static str {
        match self {
            Model::Bosonic(_) => "bosonic",
            Model::Lambda(_) => "lambda",
            Model::CoupledQubits(_) => "coupled_qubits",
        }
    }

    pub fn spec(&self) -> Result<GaugeSpec> {
        match self {
            Model::Bosonic(m) => build_bosonic(m),
            Model::Lambda(m) => build_lambda(m),
            Model::CoupledQubits(m) => build_coupled_qubits(m),
        }
    }

    pub fn layout(&self) -> ControlLayout {
        match self {
            Model::Bosonic(m) => m.layout(),
            Model::Lambda(m) => m.layout(),
            Model::CoupledQubits(m) => m.layout(),
        }
    }
}
