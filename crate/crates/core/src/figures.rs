//! Canned sweeps behind the figure data sets.
//!
//! Every function returns [`ScanResult`]s ready for CSV output. Resolutions
//! are defaults that `grid_scale` multiplies.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dynamics::{lambda_noise, propagate_ramp, propagate_unitary, RampSpec};
use crate::error::{Error, Result};
use crate::models::{build_coupled_qubits, pauli, single_site, CoupledQubitModel, Interpolation, LambdaModel, PauliAxis};
use crate::protocol::{compile, Schedule};
use crate::qla::{state_fidelity, Operator};
use crate::robustness::{apply_channel, gate_merit, transfer_grid, Axis, ErrorChannel, ScanMeta, ScanResult};

/// Grid size after applying `grid_scale`, never below two points.
pub fn scaled(points: usize, grid_scale: f64) -> usize {
    ((points as f64 * grid_scale).round() as usize).max(2)
}

/// Joins results that share a header into one CSV document.
pub fn concat_csv(results: &[ScanResult]) -> Result<String> {
    let first = results.first().ok_or_else(|| Error::InvalidArgument("nothing to write".into()))?;
    let header = first.csv_header();
    let mut out = format!("{header}\n");
    for r in results {
        if r.csv_header() != header {
            return Err(Error::InvalidArgument(format!("header {} differs from {header}", r.csv_header())));
        }
        out.extend(r.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lambda system: dissipation versus detuning

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationScan {
    pub omega: f64,
    pub gamma_e_per_omega: f64,
    pub gamma_dep_per_omega: f64,
    /// Fraction of the excited-state decay that lands in `|1>`.
    pub branching_to_one: f64,
    pub n: usize,
    pub theta: f64,
    pub phi: f64,
    /// Largest `k3` of the `k2 = 0` family; `k3 = 12` reaches `Delta = 4.8 Omega`.
    pub k3_max: u32,
}

impl Default for DissipationScan {
    fn default() -> Self {
        DissipationScan {
            omega: 1.0,
            gamma_e_per_omega: 1.5 / (2.0 * PI),
            gamma_dep_per_omega: 0.05 / (2.0 * PI),
            branching_to_one: 0.5,
            n: 1,
            theta: PI / 2.0,
            phi: 0.0,
            k3_max: 12,
        }
    }
}

/// The `k2 = 0` member with coupling `omega`: `t_p = pi sqrt(2 k3 + 1) / omega`
/// and `Delta = 2 k3 omega / sqrt(2 k3 + 1)`.
pub fn lambda_family_member(k3: u32, omega: f64, phi: f64) -> Result<LambdaModel> {
    let t_p = PI * f64::from(2 * k3 + 1).sqrt() / omega;
    LambdaModel::new(0, k3, t_p, phi)
}

/// Six-state gate merit against `Delta / Omega` under decay and dephasing.
pub fn dissipation_scan(p: &DissipationScan, seed: u64) -> Result<ScanResult> {
    let noise = lambda_noise(
        p.gamma_e_per_omega * p.omega,
        p.gamma_dep_per_omega * p.omega,
        p.branching_to_one,
    )?;
    let rows = (0..=p.k3_max)
        .into_par_iter()
        .map(|k3| {
            let m = lambda_family_member(k3, p.omega, p.phi)?;
            Ok((m.detuning() / p.omega, gate_merit(&m, p.n, p.theta, &noise)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (deltas, values): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(ScanResult {
        axes: vec![Axis::new("delta_over_omega", deltas)],
        values,
        meta: ScanMeta {
            model: "lambda".into(),
            merit: "six_state_gate_fidelity".into(),
            n: p.n,
            seed,
            channels: vec!["decay".into(), "dephasing".into()],
        },
    })
}

/// Both branches: with dephasing, then with dephasing switched off.
pub fn fig2c(p: &DissipationScan, seed: u64) -> Result<Vec<ScanResult>> {
    let off = DissipationScan { gamma_dep_per_omega: 0.0, ..p.clone() };
    let mut both = dissipation_scan(p, seed)?;
    both.meta.model = "lambda_decay_dephasing".into();
    let mut decay = dissipation_scan(&off, seed)?;
    decay.meta.model = "lambda_decay_only".into();
    Ok(vec![both, decay])
}

// ---------------------------------------------------------------------------
// Lambda system: amplitude and detuning errors

/// Transfer-efficiency grids over `[-range, range]^2` (units of `Omega`), one
/// per pulse count.
pub fn fig2d(n_list: &[usize], points: usize, range: f64, grid_scale: f64, seed: u64) -> Result<Vec<ScanResult>> {
    let model = LambdaModel::resonant(1.0, 0.0)?;
    let k = scaled(points, grid_scale);
    let amp = Axis::linspace("amplitude_error_over_omega", -range, range, k);
    let det = Axis::linspace("detuning_error_over_omega", -range, range, k);
    n_list.iter().map(|&n| transfer_grid(&model, n, &amp, &det, seed)).collect()
}

// ---------------------------------------------------------------------------
// Coupled qubits: ramp against modulation

fn perturbation(eps: f64) -> Operator {
    single_site(2, 0, &pauli(PauliAxis::X)).expect("site 0 of 2").scaled_re(eps)
}

/// Fidelity to `|psi_+>` after the linear ramp of length `total_time` from
/// `|11>`, with `eps sigma_x` on the first qubit throughout.
pub fn ramp_fidelity(model: &CoupledQubitModel, total_time: f64, eps: f64) -> Result<f64> {
    let v = perturbation(eps);
    let ramp = RampSpec::linear(total_time)?;
    let out = propagate_ramp(&ramp, |s| Ok(&model.linear_hamiltonian(s) + &v), &CoupledQubitModel::ket(1, 1))?;
    state_fidelity(&out, &CoupledQubitModel::psi_plus())
}

/// Same figure of merit for the compiled `n`-pulse sequence, with the
/// perturbation present during the pulses.
pub fn stam_fidelity(model: &CoupledQubitModel, n: usize, eps: f64) -> Result<f64> {
    let spec = build_coupled_qubits(model)?;
    let seq = compile(&spec, &Schedule::equal(n, PI / 4.0)?)?;
    let ch = ErrorChannel::LocalPauli { site: 0, axis: PauliAxis::X, strength: eps };
    let seq = apply_channel(&seq, &ch, &model.layout())?;
    let out = propagate_unitary(seq.pulses(), &CoupledQubitModel::ket(1, 1))?;
    state_fidelity(&out, &CoupledQubitModel::psi_plus())
}

fn qubit_meta(model: &str, n: usize, seed: u64, eps_channel: bool) -> ScanMeta {
    ScanMeta {
        model: model.into(),
        merit: "state_fidelity_psi_plus".into(),
        n,
        seed,
        channels: if eps_channel { vec!["local_pauli".into()] } else { Vec::new() },
    }
}

/// Ramp fidelity over `E T`, followed by the single-pulse row at
/// `T = pi / (2E)`.
pub fn ramp_time_scan(energy: f64, et_max: f64, points: usize, eps_over_e: f64, seed: u64) -> Result<Vec<ScanResult>> {
    let model = CoupledQubitModel::new(energy, Interpolation::Trig);
    let eps = eps_over_e * energy;
    let axis = Axis::linspace("E_T", et_max / points as f64, et_max, points);
    let ramp = crate::robustness::sweep(vec![axis], qubit_meta("coupled_qubits_ramp", 0, seed, eps != 0.0), |x, _| {
        ramp_fidelity(&model, x[0] / energy, eps)
    })?;
    let stam = ScanResult {
        axes: vec![Axis::new("E_T", vec![PI / 2.0])],
        values: vec![stam_fidelity(&model, 1, eps)?],
        meta: qubit_meta("coupled_qubits_stam", 1, seed, eps != 0.0),
    };
    Ok(vec![ramp, stam])
}

pub fn fig3b(grid_scale: f64, seed: u64) -> Result<Vec<ScanResult>> {
    ramp_time_scan(1.0, 100.0, scaled(25, grid_scale), 0.0, seed)
}

/// Fidelity against `eps_x / E` in `[0, 0.1]` for the single pulse and for the
/// ramp at `E T = 100`.
pub fn fig3c(grid_scale: f64, seed: u64) -> Result<Vec<ScanResult>> {
    let model = CoupledQubitModel::new(1.0, Interpolation::Trig);
    let axis = Axis::linspace("epsilon_x_over_E", 0.0, 0.1, scaled(11, grid_scale));
    let stam = crate::robustness::sweep(vec![axis.clone()], qubit_meta("coupled_qubits_stam", 1, seed, true), |x, _| {
        stam_fidelity(&model, 1, x[0])
    })?;
    let ramp = crate::robustness::sweep(vec![axis], qubit_meta("coupled_qubits_ramp", 0, seed, true), |x, _| {
        ramp_fidelity(&model, 100.0, x[0])
    })?;
    Ok(vec![stam, ramp])
}

/// As [`fig3b`] with `eps_x = 0.05 E`.
pub fn fig3d(grid_scale: f64, seed: u64) -> Result<Vec<ScanResult>> {
    ramp_time_scan(1.0, 100.0, scaled(25, grid_scale), 0.05, seed)
}
