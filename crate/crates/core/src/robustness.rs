//! Error injection, grid sweeps and pulse-area statistics.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{lindblad_map, propagate_unitary, LindbladMap, LindbladModel};
use crate::error::{Error, Result};
use crate::models::lambda_levels::{ONE, ZERO};
use crate::models::{build_lambda, lambda_target_gate, pauli, single_site, ControlLayout, LambdaModel, PauliAxis};
use crate::protocol::{compile, Pulse, PulseSequence, Schedule};
use crate::qla::{c, DensityMatrix, Matrix, Operator, StateVector, I};
use crate::seeding::{child_rng, child_seed};

/// Sub-segments per pulse used to sample a stochastic drift.
pub const DRIFT_SEGMENTS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum DriftProcess {
    /// `beta(t) = b` throughout.
    Constant(f64),
    /// Stationary Gaussian process with `<beta(t) beta(t')> = variance exp(-|t-t'|/correlation_time)`.
    OrnsteinUhlenbeck { correlation_time: f64, variance: f64 },
}

impl DriftProcess {
    fn validate(&self) -> Result<()> {
        match *self {
            DriftProcess::Constant(b) if !b.is_finite() => Err(Error::NonFinite("drift level")),
            DriftProcess::OrnsteinUhlenbeck { correlation_time, variance } => {
                if !(correlation_time > 0.0 && correlation_time.is_finite()) {
                    return Err(Error::InvalidArgument(format!("correlation time {correlation_time} must be positive")));
                }
                if !(variance >= 0.0 && variance.is_finite()) {
                    return Err(Error::InvalidArgument(format!("drift variance {variance} must be >= 0")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            DriftProcess::Constant(b) => b == 0.0,
            DriftProcess::OrnsteinUhlenbeck { variance, .. } => variance == 0.0,
        }
    }

    /// Draws the value at `t = 0`.
    fn start<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            DriftProcess::Constant(b) => b,
            DriftProcess::OrnsteinUhlenbeck { variance, .. } => {
                variance.sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }
        }
    }

    /// Advances by `h` from value `x`, returning the new value and
    /// `int beta dt` over the step, sampled jointly and exactly.
    fn step<R: Rng>(&self, x: f64, h: f64, rng: &mut R) -> (f64, f64) {
        match *self {
            DriftProcess::Constant(b) => (b, b * h),
            DriftProcess::OrnsteinUhlenbeck { correlation_time: tc, variance } => {
                let r = h / tc;
                let a = -(-r).exp_m1();
                let b = -(-2.0 * r).exp_m1();
                let mean_x = x * (1.0 - a);
                let mean_i = x * tc * a;
                let var_x = variance * b;
                let shape = if r < 1e-3 {
                    r.powi(3) * (2.0 / 3.0 - r / 2.0 + 7.0 * r * r / 30.0)
                } else {
                    2.0 * r - 4.0 * a + b
                };
                let var_i = variance * tc * tc * shape;
                let cov = variance * tc * a * a;
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                if var_x <= 0.0 {
                    return (mean_x, mean_i);
                }
                let sx = var_x.sqrt();
                let k = cov / sx;
                let rest = (var_i - k * k).max(0.0).sqrt();
                (mean_x + sx * z1, mean_i + k * z1 + rest * z2)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ErrorChannel {
    /// Scales the off-diagonal (coupling) part of every pulse by `1 + magnitude`.
    AmplitudeRelative(f64),
    /// Adds `magnitude` times the layout's detuning operator.
    DetuningAdditive(f64),
    /// Scales every duration by `1 + delta_e`.
    PhaseRelative(f64),
    /// Adds `strength * sigma_axis` on qubit `site`.
    LocalPauli { site: usize, axis: PauliAxis, strength: f64 },
    /// Adds a random energy drift along the detuning operator, sampled on
    /// [`DRIFT_SEGMENTS`] sub-segments of every pulse.
    StochasticDrift { process: DriftProcess, seed: u64 },
}

impl ErrorChannel {
    pub fn kind(&self) -> &'static str {
        match self {
            ErrorChannel::AmplitudeRelative(_) => "amplitude_relative",
            ErrorChannel::DetuningAdditive(_) => "detuning_additive",
            ErrorChannel::PhaseRelative(_) => "phase_relative",
            ErrorChannel::LocalPauli { .. } => "local_pauli",
            ErrorChannel::StochasticDrift { .. } => "stochastic_drift",
        }
    }

    fn is_identity(&self) -> bool {
        match self {
            ErrorChannel::AmplitudeRelative(m) | ErrorChannel::DetuningAdditive(m) | ErrorChannel::PhaseRelative(m) => {
                *m == 0.0
            }
            ErrorChannel::LocalPauli { strength, .. } => *strength == 0.0,
            ErrorChannel::StochasticDrift { process, .. } => process.is_zero(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ErrorChannel::AmplitudeRelative(m) | ErrorChannel::DetuningAdditive(m) | ErrorChannel::PhaseRelative(m)
                if !m.is_finite() =>
            {
                Err(Error::NonFinite("channel magnitude"))
            }
            ErrorChannel::LocalPauli { strength, .. } if !strength.is_finite() => Err(Error::NonFinite("channel magnitude")),
            ErrorChannel::PhaseRelative(m) if *m <= -1.0 => {
                Err(Error::InvalidArgument(format!("phase error {m} would make durations non-positive")))
            }
            ErrorChannel::StochasticDrift { process, .. } => process.validate(),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ErrorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorChannel::AmplitudeRelative(m) | ErrorChannel::DetuningAdditive(m) | ErrorChannel::PhaseRelative(m) => {
                write!(f, "{}({m})", self.kind())
            }
            ErrorChannel::LocalPauli { site, axis, strength } => write!(f, "local_pauli({site},{axis:?},{strength})"),
            ErrorChannel::StochasticDrift { process, seed } => write!(f, "stochastic_drift({process:?},seed={seed})"),
        }
    }
}

fn with_hamiltonian(p: &Pulse, m: Matrix) -> Result<Pulse> {
    Ok(Pulse { hamiltonian: Operator::hermitian(m)?, ..p.clone() })
}

fn detuning_of(layout: &ControlLayout, kind: &str) -> Result<Operator> {
    layout
        .detuning
        .clone()
        .ok_or_else(|| Error::ChannelNotApplicable(format!("{kind} needs a detuning operator")))
}

/// Returns the perturbed sequence. A channel of magnitude zero returns an
/// exact copy.
pub fn apply_channel(seq: &PulseSequence, ch: &ErrorChannel, layout: &ControlLayout) -> Result<PulseSequence> {
    ch.validate()?;
    if ch.is_identity() {
        return Ok(seq.clone());
    }
    let pulses = seq.pulses();
    let out: Vec<Pulse> = match ch {
        ErrorChannel::AmplitudeRelative(m) => pulses
            .iter()
            .map(|p| {
                let h = p.hamiltonian.matrix();
                let diag = Matrix::from_diagonal(&h.diagonal());
                with_hamiltonian(p, &diag + (h - &diag) * c(1.0 + m, 0.0))
            })
            .collect::<Result<_>>()?,
        ErrorChannel::DetuningAdditive(m) => {
            let d = detuning_of(layout, ch.kind())?;
            pulses
                .iter()
                .map(|p| with_hamiltonian(p, p.hamiltonian.matrix() + d.matrix() * c(*m, 0.0)))
                .collect::<Result<_>>()?
        }
        ErrorChannel::PhaseRelative(m) => {
            pulses.iter().map(|p| Pulse { duration: p.duration * (1.0 + m), ..p.clone() }).collect()
        }
        ErrorChannel::LocalPauli { site, axis, strength } => {
            let qubits = layout
                .qubits
                .ok_or_else(|| Error::ChannelNotApplicable("local_pauli needs a qubit register".into()))?;
            let op = single_site(qubits, *site, &pauli(*axis))?;
            pulses
                .iter()
                .map(|p| with_hamiltonian(p, p.hamiltonian.matrix() + op.matrix() * c(*strength, 0.0)))
                .collect::<Result<_>>()?
        }
        ErrorChannel::StochasticDrift { process, seed } => {
            let d = detuning_of(layout, ch.kind())?;
            let mut rng = child_rng(*seed, 0);
            let mut x = process.start(&mut rng);
            let mut out = Vec::with_capacity(pulses.len() * DRIFT_SEGMENTS);
            for p in pulses {
                let h = p.duration / DRIFT_SEGMENTS as f64;
                for _ in 0..DRIFT_SEGMENTS {
                    let (next, area) = process.step(x, h, &mut rng);
                    x = next;
                    let mut seg = with_hamiltonian(p, p.hamiltonian.matrix() + d.matrix() * c(area / h, 0.0))?;
                    seg.duration = h;
                    out.push(seg);
                }
            }
            out
        }
    };
    PulseSequence::new(seq.schedule().clone(), out)
}

pub fn apply_channels(seq: &PulseSequence, channels: &[ErrorChannel], layout: &ControlLayout) -> Result<PulseSequence> {
    channels.iter().try_fold(seq.clone(), |s, ch| apply_channel(&s, ch, layout))
}

// ---------------------------------------------------------------------------
// Lambda-system merits

/// `|<0|U|1>|^2` for the `n`-pulse sequence with `Theta_N = pi/2` after the
/// channels are applied in order.
pub fn transfer_efficiency(model: &LambdaModel, n: usize, channels: &[ErrorChannel]) -> Result<f64> {
    let spec = build_lambda(model)?;
    let seq = compile(&spec, &Schedule::equal(n, PI / 2.0)?)?;
    let seq = apply_channels(&seq, channels, &model.layout())?;
    let out = propagate_unitary(seq.pulses(), &StateVector::basis(3, ONE)?)?;
    Ok(out.population(ZERO).min(1.0))
}

/// The six axis states of the qubit subspace embedded in the three levels.
pub fn six_axis_states() -> Vec<StateVector> {
    let h = 0.5f64.sqrt();
    let embed = |a: num_complex::Complex64, b: num_complex::Complex64| {
        let mut v = vec![c(0.0, 0.0); 3];
        v[ONE] = a;
        v[ZERO] = b;
        StateVector::new(v).expect("finite amplitudes")
    };
    vec![
        embed(c(1.0, 0.0), c(0.0, 0.0)),
        embed(c(0.0, 0.0), c(1.0, 0.0)),
        embed(c(h, 0.0), c(h, 0.0)),
        embed(c(h, 0.0), c(-h, 0.0)),
        embed(c(h, 0.0), I * h),
        embed(c(h, 0.0), -I * h),
    ]
}

/// `<psi_ideal|E(rho)|psi_ideal>` for each of the [`six_axis_states`], where
/// `psi_ideal` is the two-level `gate` applied to the input.
pub fn six_state_fidelities(map: &LindbladMap, gate: &Operator) -> Result<Vec<f64>> {
    let g = gate.matrix();
    six_axis_states()
        .iter()
        .map(|psi| {
            let q = [psi.amplitudes()[ONE], psi.amplitudes()[ZERO]];
            let mut ideal = vec![c(0.0, 0.0); 3];
            ideal[ONE] = g[(0, 0)] * q[0] + g[(0, 1)] * q[1];
            ideal[ZERO] = g[(1, 0)] * q[0] + g[(1, 1)] * q[1];
            let rho = map.apply(&DensityMatrix::from_pure(psi)?)?;
            rho.fidelity_with(&StateVector::new(ideal)?)
        })
        .collect()
}

/// Six-state average of [`six_state_fidelities`] for the compiled sequence
/// against its target gate.
pub fn gate_merit(model: &LambdaModel, n: usize, theta: f64, noise: &LindbladModel) -> Result<f64> {
    let spec = build_lambda(model)?;
    let seq = compile(&spec, &Schedule::equal(n, theta)?)?;
    let map = lindblad_map(seq.pulses(), 3, noise)?;
    let f = six_state_fidelities(&map, &lambda_target_gate(n, theta, model.phi()))?;
    Ok((f.iter().sum::<f64>() / f.len() as f64).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Axis { name: name.into(), values }
    }

    /// `count` evenly spaced points from `lo` to `hi` inclusive.
    pub fn linspace(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
        };
        Axis::new(name, values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanMeta {
    pub model: String,
    pub merit: String,
    pub n: usize,
    pub seed: u64,
    pub channels: Vec<String>,
}

/// Merit values on the product grid of the axes, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub meta: ScanMeta,
}

impl ScanResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    /// Axis coordinates of flat index `k`.
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            let len = axis.values.len();
            coords[i] = axis.values[k % len];
            k /= len;
        }
        coords
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.axes.len() {
            return None;
        }
        let mut flat = 0;
        for (i, axis) in index.iter().zip(&self.axes) {
            if *i >= axis.values.len() {
                return None;
            }
            flat = flat * axis.values.len() + i;
        }
        self.values.get(flat).copied()
    }

    pub fn csv_header(&self) -> String {
        let mut cols: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        cols.extend(["merit", "model", "N", "seed"]);
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for (k, v) in self.values.iter().enumerate() {
            for x in self.point(k) {
                out.push_str(&format!("{x:.11e},"));
            }
            out.push_str(&format!("{v:.11e},{},{},{}\n", self.meta.model, self.meta.n, self.meta.seed));
        }
        out
    }
}

/// Evaluates `merit(coords, child_seed)` on every grid point in parallel.
/// Each point's seed depends only on the master seed and its flat index.
pub fn sweep<F>(axes: Vec<Axis>, meta: ScanMeta, merit: F) -> Result<ScanResult>
where
    F: Fn(&[f64], u64) -> Result<f64> + Sync,
{
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut result = ScanResult { axes, values: Vec::new(), meta };
    let seed = result.meta.seed;
    let values = (0..total)
        .into_par_iter()
        .map(|k| merit(&result.point(k), child_seed(seed, k as u64)))
        .collect::<Result<Vec<f64>>>()?;
    result.values = values;
    Ok(result)
}

/// Transfer efficiency over an amplitude-error by detuning-error grid, both
/// in units of the coupling `Omega`.
pub fn transfer_grid(model: &LambdaModel, n: usize, amplitude: &Axis, detuning: &Axis, seed: u64) -> Result<ScanResult> {
    let omega = model.coupling();
    let meta = ScanMeta {
        model: "lambda".into(),
        merit: "transfer_efficiency".into(),
        n,
        seed,
        channels: vec!["amplitude_relative".into(), "detuning_additive".into()],
    };
    sweep(vec![amplitude.clone(), detuning.clone()], meta, |x, _| {
        transfer_efficiency(
            model,
            n,
            &[ErrorChannel::AmplitudeRelative(x[0]), ErrorChannel::DetuningAdditive(x[1] * omega)],
        )
    })
}

// ---------------------------------------------------------------------------
// Pulse-area statistics

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaStatistics {
    pub mean: f64,
    pub variance: f64,
    pub trials: usize,
}

impl AreaStatistics {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.trials as f64).sqrt()
    }
}

/// One realization of `delta = int_0^tau_p beta(t) dt`.
pub fn pulse_area<R: Rng>(process: &DriftProcess, tau_p: f64, rng: &mut R) -> f64 {
    let h = tau_p / DRIFT_SEGMENTS as f64;
    let mut x = process.start(rng);
    let mut area = 0.0;
    for _ in 0..DRIFT_SEGMENTS {
        let (next, a) = process.step(x, h, rng);
        x = next;
        area += a;
    }
    area
}

/// Sample mean and unbiased variance of the pulse-area error over seeded
/// trials.
pub fn pulse_area_statistics(process: &DriftProcess, tau_p: f64, trials: usize, seed: u64) -> Result<AreaStatistics> {
    process.validate()?;
    if trials < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 trials, got {trials}")));
    }
    if !(tau_p > 0.0 && tau_p.is_finite()) {
        return Err(Error::InvalidArgument(format!("pulse duration {tau_p} must be positive")));
    }
    let areas: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|k| pulse_area(process, tau_p, &mut child_rng(seed, k)))
        .collect();
    let mean = areas.iter().sum::<f64>() / trials as f64;
    let variance = areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok(AreaStatistics { mean, variance, trials })
}

/// Stationary variance of the pulse area for the exponential kernel,
/// `2 s^2 tc^2 (x - 1 + e^{-x})` with `x = tau_p / tc`.
pub fn ou_area_variance(correlation_time: f64, variance: f64, tau_p: f64) -> f64 {
    let x = tau_p / correlation_time;
    2.0 * variance * correlation_time * correlation_time * (x + (-x).exp_m1())
}
