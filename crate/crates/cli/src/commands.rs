use std::f64::consts::PI;

use serde_json::{json, Map, Value};
use stam_core::diagnostics::{bound_monte_carlo, bound_report, checkpoint_fidelities, BoundReport};
use stam_core::dynamics::{lambda_noise, lindblad_map, propagate_ramp, propagate_unitary, LindbladModel};
use stam_core::dynamics::{RampShape, RampSpec};
use stam_core::figures::{self, concat_csv, scaled, stam_fidelity, DissipationScan};
use stam_core::format::{sequence_to_string, spec_to_string};
use stam_core::models::{lambda_levels, lambda_target_gate, pauli, single_site, top_leakage};
use stam_core::models::{CoupledQubitModel, Model, PauliAxis, LEAKAGE_LIMIT};
use stam_core::protocol::{compile, eigenstate_at, PulseSequence};
use stam_core::qla::state_fidelity;
use stam_core::robustness::{apply_channels, six_state_fidelities, sweep, transfer_grid, Axis, ScanMeta, ScanResult};

use crate::config::{RunConfig, ScanMerit};
use crate::error::CliError;
use crate::output::{Artifact, Check};

/// Fidelity floor for noiseless, error-free runs.
pub const IDEAL_FIDELITY_FLOOR: f64 = 1.0 - 1e-9;
pub const CHECKPOINT_INFIDELITY_CEILING: f64 = 1e-10;

const SIX_STATE_NAMES: [&str; 6] = ["one", "zero", "plus_x", "minus_x", "plus_y", "minus_y"];

#[derive(Default)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub summary: Map<String, Value>,
}

impl Report {
    fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }
}

pub struct Ctx {
    pub seed: u64,
    pub grid_scale: f64,
}

fn e(x: f64) -> String {
    format!("{x:.11e}")
}

fn merit_range_check(name: &str, values: &[f64]) -> Check {
    let bad = values.iter().filter(|v| !(v.is_finite() && (-1e-12..=1.0 + 1e-12).contains(*v))).count();
    Check { name: name.into(), passed: bad == 0, detail: format!("{bad} of {} values outside [0, 1]", values.len()) }
}

fn compiled(cfg: &RunConfig) -> Result<(Model, stam_core::protocol::GaugeSpec, PulseSequence), CliError> {
    let model = cfg.model()?;
    if let Model::Bosonic(b) = &model {
        if let Some(w) = b.truncation_warning() {
            log::warn!("{w}");
        }
    }
    let spec = model.spec()?;
    let seq = compile(&spec, &cfg.schedule()?)?;
    Ok((model, spec, seq))
}

fn worst_checkpoint(spec: &stam_core::protocol::GaugeSpec, seq: &PulseSequence) -> Result<f64, CliError> {
    Ok(checkpoint_fidelities(spec, seq)?.iter().map(|(_, f)| 1.0 - f).fold(0.0, f64::max))
}

pub fn compile_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let (model, spec, seq) = compiled(cfg)?;
    let extra: &[&str] = match &model {
        Model::Lambda(_) => &["omega_s", "omega_p", "detuning"],
        Model::CoupledQubits(_) => &["h0_coefficient", "h1_coefficient"],
        Model::Bosonic(_) => &["displacement_re", "displacement_im"],
    };
    let mut csv = String::from("step,lambda,theta,duration");
    for col in extra {
        csv.push(',');
        csv.push_str(col);
    }
    csv.push('\n');
    let thetas = seq.schedule().thetas();
    for (j, p) in seq.pulses().iter().enumerate() {
        let l = p.lambda;
        let cols = match &model {
            Model::Lambda(m) => vec![m.stokes(l), m.pump(l), m.detuning()],
            Model::CoupledQubits(m) => match m.interpolation {
                stam_core::models::Interpolation::Trig => vec![(2.0 * l).cos(), (2.0 * l).sin()],
                stam_core::models::Interpolation::Cot => vec![1.0 / (2.0 * l).tan(), 1.0],
            },
            Model::Bosonic(m) => vec![l * m.alpha.re, l * m.alpha.im],
        };
        csv.push_str(&format!("{},{},{},{}", p.step, e(l), e(thetas[j]), e(p.duration)));
        for v in cols {
            csv.push(',');
            csv.push_str(&e(v));
        }
        csv.push('\n');
    }
    let worst = worst_checkpoint(&spec, &seq)?;
    let mut r = Report::default();
    r.checks.push(Check::at_most("checkpoint_infidelity", worst, CHECKPOINT_INFIDELITY_CEILING));
    r.note("model", model.id());
    r.note("pulses", seq.pulses().len());
    r.note("total_time", seq.total_time());
    r.note("worst_checkpoint_infidelity", worst);
    r.artifacts.push(Artifact::new("pulses.csv", csv));
    r.artifacts.push(Artifact::new("sequence.toml", sequence_to_string(&seq)?));
    r.artifacts.push(Artifact::new("spec.toml", spec_to_string(&spec)?));
    Ok(r)
}

pub fn simulate_cmd(cfg: &RunConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let (model, spec, seq) = compiled(cfg)?;
    let level = cfg.simulate.clone().unwrap_or_default().initial_level;
    let channels = cfg.channels(ctx.seed);
    let run = apply_channels(&seq, &channels, &model.layout())?;
    let mut psi = spec.initial_state(level)?;
    let thetas = seq.schedule().thetas();
    let pulses = run.pulses();
    let mut csv = String::from("step,theta,time,state_fidelity\n");
    let (mut time, mut k, mut worst) = (0.0, 0, 0.0f64);
    for (i, p) in pulses.iter().enumerate() {
        psi = propagate_unitary(std::slice::from_ref(p), &psi)?;
        time += p.duration;
        // Drift channels split a pulse into segments sharing its step index.
        if pulses.get(i + 1).is_none_or(|q| q.step != p.step) {
            let target = eigenstate_at(&spec, thetas[k], level)?;
            let f = state_fidelity(&psi, &target)?;
            worst = worst.max(1.0 - f);
            csv.push_str(&format!("{},{},{},{}\n", p.step, e(thetas[k]), e(time), e(f)));
            k += 1;
        }
    }
    let final_target = eigenstate_at(&spec, *thetas.last().expect("non-empty schedule"), level)?;
    let final_fidelity = state_fidelity(&psi, &final_target)?;
    let mut r = Report::default();
    r.note("model", model.id());
    r.note("initial_level", level);
    r.note("channels", channels.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    r.note("final_state_fidelity", final_fidelity);
    match &model {
        Model::CoupledQubits(_) if level == 0 => {
            r.note("psi_plus_fidelity", state_fidelity(&psi, &CoupledQubitModel::psi_plus())?);
        }
        Model::Bosonic(_) => {
            let leak = top_leakage(&psi, 2);
            r.note("top_level_population", leak);
            r.checks.push(Check::at_most("truncation_leakage", leak, LEAKAGE_LIMIT));
        }
        _ => {}
    }
    if channels.is_empty() {
        r.checks.push(Check::at_least("final_state_fidelity", final_fidelity, IDEAL_FIDELITY_FLOOR));
        r.checks.push(Check::at_most("worst_checkpoint_state_infidelity", worst, 1.0 - IDEAL_FIDELITY_FLOOR));
    }
    r.artifacts.push(Artifact::new("simulate.csv", csv));
    Ok(r)
}

pub fn lindblad_cmd(cfg: &RunConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let (model, _, seq) = compiled(cfg)?;
    let Model::Lambda(m) = &model else {
        return Err(CliError::Config("lindblad runs on the lambda model only".into()));
    };
    let noise = match &cfg.noise {
        Some(n) => {
            let omega = m.coupling();
            lambda_noise(n.gamma_e_per_omega * omega, n.gamma_dep_per_omega * omega, n.branching_to_one)?
        }
        None => LindbladModel::closed(),
    };
    let channels = cfg.channels(ctx.seed);
    let run = apply_channels(&seq, &channels, &m.layout())?;
    let map = lindblad_map(run.pulses(), 3, &noise)?;
    let theta = *seq.schedule().thetas().last().expect("non-empty schedule");
    let gate = lambda_target_gate(seq.schedule().n(), theta, m.phi());
    let fids = six_state_fidelities(&map, &gate)?;
    let mean = fids.iter().sum::<f64>() / fids.len() as f64;
    let mut csv = String::from("input_state,fidelity\n");
    for (name, f) in SIX_STATE_NAMES.iter().zip(&fids) {
        csv.push_str(&format!("{name},{}\n", e(*f)));
    }
    csv.push_str(&format!("average,{}\n", e(mean)));
    let mut r = Report::default();
    r.checks.push(merit_range_check("fidelities_in_unit_interval", &fids));
    if noise.is_closed() && channels.is_empty() {
        r.checks.push(Check::at_least("closed_gate_fidelity", mean, IDEAL_FIDELITY_FLOOR));
    }
    r.note("model", model.id());
    r.note("detuning_over_omega", m.detuning() / m.coupling());
    r.note("average_fidelity", mean);
    r.note("excited_level", lambda_levels::EXCITED);
    r.artifacts.push(Artifact::new("lindblad.csv", csv));
    Ok(r)
}

pub fn scan_cmd(cfg: &RunConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let sc = cfg.scan.clone().unwrap_or_default();
    if !cfg.channels.is_empty() {
        log::warn!("scan sweeps its own error axes; configured channels are ignored");
    }
    let k = scaled(sc.points, ctx.grid_scale);
    let model = cfg.model()?;
    let grids = match (&model, sc.merit) {
        (Model::Lambda(m), ScanMerit::TransferEfficiency) => {
            let [a0, a1] = sc.amplitude_range;
            let [d0, d1] = sc.detuning_range_per_omega;
            let amp = Axis::linspace("amplitude_error", a0, a1, k);
            let det = Axis::linspace("detuning_error_over_omega", d0, d1, k);
            sc.n_list.iter().map(|&n| transfer_grid(m, n, &amp, &det, ctx.seed)).collect::<Result<Vec<_>, _>>()?
        }
        (Model::CoupledQubits(m), ScanMerit::PsiPlusFidelity) => {
            let [e0, e1] = sc.epsilon_range_per_energy;
            let axis = Axis::linspace("epsilon_x_over_energy", e0, e1, k);
            sc.n_list
                .iter()
                .map(|&n| {
                    let meta = ScanMeta {
                        model: model.id().into(),
                        merit: "state_fidelity_psi_plus".into(),
                        n,
                        seed: ctx.seed,
                        channels: vec!["local_pauli".into()],
                    };
                    sweep(vec![axis.clone()], meta, |x, _| stam_fidelity(m, n, x[0] * m.energy))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        (_, merit) => {
            return Err(CliError::Config(format!("scan merit {merit:?} does not apply to the {} model", model.id())));
        }
    };
    let mut r = Report::default();
    for g in &grids {
        r.checks.push(merit_range_check(&format!("merit_range_N{}", g.meta.n), &g.values));
        let (lo, hi) = g.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        r.note(&format!("N{}_min", g.meta.n), lo);
        r.note(&format!("N{}_max", g.meta.n), hi);
    }
    r.note("points_per_axis", k);
    r.artifacts.push(Artifact::new("scan.csv", concat_csv(&grids)?));
    Ok(r)
}

pub fn bound_cmd(cfg: &RunConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let (model, spec, seq) = compiled(cfg)?;
    let bc = cfg.bound.clone().unwrap_or_default();
    let points = scaled(bc.lambda_points, ctx.grid_scale);
    let end = seq.schedule().path_end();
    let reports = (0..points)
        .map(|i| bound_report(&spec, &seq, end * i as f64 / (points - 1) as f64))
        .collect::<Result<Vec<BoundReport>, _>>()?;
    let mut r = Report::default();
    r.artifacts.push(Artifact::new("bound.csv", bound_csv(&reports)));
    let violations = reports.iter().filter(|b| !b.holds()).count();
    r.checks.push(Check {
        name: "bound_holds_along_path".into(),
        passed: violations == 0,
        detail: format!("{violations} violations at {points} points"),
    });
    r.note("model", model.id());
    r.note("vacuous_points", reports.iter().filter(|b| b.is_vacuous()).count());
    if bc.random_trials > 0 {
        let study = bound_monte_carlo(ctx.seed, bc.random_trials, bc.random_max_dim)?;
        r.artifacts.push(Artifact::new("bound_random.csv", bound_csv(&study.reports)));
        r.checks.push(Check {
            name: "bound_holds_on_random_systems".into(),
            passed: study.violations == 0,
            detail: format!("{} violations in {} trials", study.violations, bc.random_trials),
        });
        r.note("random_vacuous", study.vacuous);
    }
    Ok(r)
}

fn bound_csv(reports: &[BoundReport]) -> String {
    let mut csv = String::from(BoundReport::CSV_HEADER);
    csv.push('\n');
    for b in reports {
        csv.push_str(&b.csv_row());
        csv.push('\n');
    }
    csv
}

pub fn ramp_cmd(cfg: &RunConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let model = cfg.model()?;
    let Model::CoupledQubits(m) = &model else {
        return Err(CliError::Config("ramp runs on the coupled_qubits model only".into()));
    };
    let rc = cfg.ramp.clone().unwrap_or_default();
    let eps = rc.epsilon_x_per_energy * m.energy;
    let v = single_site(2, 0, &pauli(PauliAxis::X))?.scaled_re(eps);
    let spec = RampSpec::new(rc.e_times_t / m.energy, RampShape::Linear, rc.steps_per_unit_time)?;
    let out = propagate_ramp(&spec, |s| Ok(&m.linear_hamiltonian(s) + &v), &CoupledQubitModel::ket(1, 1))?;
    let ramp_f = state_fidelity(&out, &CoupledQubitModel::psi_plus())?;
    let n = cfg.schedule.n;
    let stam_f = stam_fidelity(m, n, eps)?;
    let row = |label: &str, n: usize, et: f64, f: f64| ScanResult {
        axes: vec![Axis::new("E_T", vec![et])],
        values: vec![f],
        meta: ScanMeta {
            model: label.into(),
            merit: "state_fidelity_psi_plus".into(),
            n,
            seed: ctx.seed,
            channels: Vec::new(),
        },
    };
    let stam_et = n as f64 * PI / 2.0;
    let rows = [row("coupled_qubits_ramp", 0, rc.e_times_t, ramp_f), row("coupled_qubits_stam", n, stam_et, stam_f)];
    let mut r = Report::default();
    r.checks.push(merit_range_check("fidelities_in_unit_interval", &[ramp_f, stam_f]));
    if eps == 0.0 {
        r.checks.push(Check::at_least("stam_fidelity", stam_f, IDEAL_FIDELITY_FLOOR));
    }
    r.note("ramp_fidelity", ramp_f);
    r.note("stam_fidelity", stam_f);
    r.note("nominal_steps", spec.nominal_steps());
    r.artifacts.push(Artifact::new("ramp.csv", concat_csv(&rows)?));
    Ok(r)
}

pub const FIGURES: [&str; 5] = ["fig2c", "fig2d", "fig3b", "fig3c", "fig3d"];

pub fn figure_cmd(tag: &str, ctx: &Ctx) -> Result<Report, CliError> {
    let (s, g) = (ctx.seed, ctx.grid_scale);
    let grids = match tag {
        "fig2c" => figures::fig2c(&DissipationScan::default(), s)?,
        "fig2d" => figures::fig2d(&[1, 2, 3, 4], 51, 0.5, g, s)?,
        "fig3b" => figures::fig3b(g, s)?,
        "fig3c" => figures::fig3c(g, s)?,
        "fig3d" => figures::fig3d(g, s)?,
        other => {
            return Err(CliError::Config(format!("unknown figure {other:?}; expected one of {}", FIGURES.join(", "))))
        }
    };
    let mut r = Report::default();
    let all: Vec<f64> = grids.iter().flat_map(|g| g.values.iter().copied()).collect();
    r.checks.push(merit_range_check("merit_range", &all));
    r.note("figure", tag);
    r.note("series", json!(grids.iter().map(|g| json!({"model": g.meta.model, "N": g.meta.n, "points": g.values.len()})).collect::<Vec<_>>()));
    r.artifacts.push(Artifact::new(format!("{tag}.csv"), concat_csv(&grids)?));
    Ok(r)
}
