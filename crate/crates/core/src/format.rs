//! Text serialization of gauge specifications and pulse sequences.
//!
//! Matrices are written as sparse `(row, col, re, im)` entry lists so the
//! files stay readable. Floats are printed in their shortest round-trip form,
//! which makes parse-after-write exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{EnergyLaw, GaugeSpec, Pulse, PulseSequence, Schedule};
use crate::qla::{c, Matrix, Operator, StateVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

fn entries(m: &Matrix) -> Vec<Entry> {
    let mut out = Vec::new();
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let z = m[(row, col)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push(Entry { row, col, re: z.re, im: z.im });
            }
        }
    }
    out
}

fn matrix(dim: usize, list: &[Entry]) -> Result<Matrix> {
    let mut m = Matrix::zeros(dim, dim);
    for e in list {
        if e.row >= dim || e.col >= dim {
            return Err(Error::Format(format!("entry ({}, {}) outside dimension {dim}", e.row, e.col)));
        }
        m[(e.row, e.col)] = c(e.re, e.im);
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergiesDoc {
    Constant { levels: Vec<f64> },
    PerPulse { rows: Vec<Vec<f64>> },
    Modulated { offset: Vec<f64>, sin2: Vec<f64>, cosecant: bool },
}

impl From<&EnergyLaw> for EnergiesDoc {
    fn from(law: &EnergyLaw) -> Self {
        match law {
            EnergyLaw::Constant(levels) => EnergiesDoc::Constant { levels: levels.clone() },
            EnergyLaw::PerPulse(rows) => EnergiesDoc::PerPulse { rows: rows.clone() },
            EnergyLaw::Modulated { offset, sin2, cosecant } => {
                EnergiesDoc::Modulated { offset: offset.clone(), sin2: sin2.clone(), cosecant: *cosecant }
            }
        }
    }
}

impl From<EnergiesDoc> for EnergyLaw {
    fn from(doc: EnergiesDoc) -> Self {
        match doc {
            EnergiesDoc::Constant { levels } => EnergyLaw::Constant(levels),
            EnergiesDoc::PerPulse { rows } => EnergyLaw::PerPulse(rows),
            EnergiesDoc::Modulated { offset, sin2, cosecant } => EnergyLaw::Modulated { offset, sin2, cosecant },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpecDoc {
    pub dim: usize,
    pub pairs: Vec<[usize; 2]>,
    pub energies: EnergiesDoc,
    pub generator: Vec<Entry>,
    /// Column `k` is `|k_0>`.
    pub basis: Vec<Entry>,
}

impl GaugeSpecDoc {
    pub fn from_spec(spec: &GaugeSpec) -> Self {
        GaugeSpecDoc {
            dim: spec.dim(),
            pairs: spec.connected_pairs().iter().map(|&(a, b)| [a, b]).collect(),
            energies: spec.energies().into(),
            generator: entries(spec.generator().matrix()),
            basis: entries(spec.basis_matrix()),
        }
    }

    pub fn into_spec(self) -> Result<GaugeSpec> {
        let g = Operator::hermitian(matrix(self.dim, &self.generator)?)?;
        let b = matrix(self.dim, &self.basis)?;
        let basis = (0..self.dim)
            .map(|k| StateVector::from_vector(b.column(k).into_owned()))
            .collect::<Result<Vec<_>>>()?;
        GaugeSpec::new(g, &basis, self.energies.into(), self.pairs.into_iter().map(|[a, b]| (a, b)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "spacing", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleDoc {
    Equal { n: usize, theta_total: f64 },
    Custom { lambdas: Vec<f64> },
}

impl ScheduleDoc {
    pub fn from_schedule(s: &Schedule) -> Self {
        if s.is_equal_spacing() {
            ScheduleDoc::Equal { n: s.n(), theta_total: s.theta_total() }
        } else {
            ScheduleDoc::Custom { lambdas: s.lambdas().to_vec() }
        }
    }

    pub fn into_schedule(self) -> Result<Schedule> {
        match self {
            ScheduleDoc::Equal { n, theta_total } => Schedule::equal(n, theta_total),
            ScheduleDoc::Custom { lambdas } => Schedule::custom(lambdas),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseDoc {
    pub step: usize,
    pub lambda: f64,
    pub duration: f64,
    pub hamiltonian: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDoc {
    pub dim: usize,
    pub schedule: ScheduleDoc,
    #[serde(default)]
    pub pulses: Vec<PulseDoc>,
}

impl SequenceDoc {
    pub fn from_sequence(seq: &PulseSequence) -> Self {
        SequenceDoc {
            dim: seq.dim().unwrap_or(0),
            schedule: ScheduleDoc::from_schedule(seq.schedule()),
            pulses: seq
                .pulses()
                .iter()
                .map(|p| PulseDoc {
                    step: p.step,
                    lambda: p.lambda,
                    duration: p.duration,
                    hamiltonian: entries(p.hamiltonian.matrix()),
                })
                .collect(),
        }
    }

    pub fn into_sequence(self) -> Result<PulseSequence> {
        let schedule = self.schedule.into_schedule()?;
        let pulses = self
            .pulses
            .into_iter()
            .map(|p| {
                Ok(Pulse {
                    step: p.step,
                    lambda: p.lambda,
                    duration: p.duration,
                    hamiltonian: Operator::hermitian(matrix(self.dim, &p.hamiltonian)?)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PulseSequence::new(schedule, pulses)
    }
}

fn to_toml<T: Serialize>(doc: &T) -> Result<String> {
    toml::to_string(doc).map_err(|e| Error::Format(e.to_string()))
}

fn from_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

pub fn spec_to_string(spec: &GaugeSpec) -> Result<String> {
    to_toml(&GaugeSpecDoc::from_spec(spec))
}

pub fn spec_from_str(text: &str) -> Result<GaugeSpec> {
    from_toml::<GaugeSpecDoc>(text)?.into_spec()
}

pub fn sequence_to_string(seq: &PulseSequence) -> Result<String> {
    to_toml(&SequenceDoc::from_sequence(seq))
}

pub fn sequence_from_str(text: &str) -> Result<PulseSequence> {
    from_toml::<SequenceDoc>(text)?.into_sequence()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bosonic, build_coupled_qubits, build_lambda, BosonicModel, CoupledQubitModel};
    use crate::models::{Interpolation, LambdaModel};
    use crate::protocol::compile;
    use std::f64::consts::PI;

    fn specs() -> Vec<GaugeSpec> {
        vec![
            build_lambda(&LambdaModel::new(0, 3, 1.7, 0.4).unwrap()).unwrap(),
            build_coupled_qubits(&CoupledQubitModel::new(0.8, Interpolation::Cot)).unwrap(),
            build_bosonic(&BosonicModel::new(8, 1.3, c(0.3, -0.2))).unwrap(),
        ]
    }

    #[test]
    fn spec_round_trip_is_exact() {
        for spec in specs() {
            let text = spec_to_string(&spec).unwrap();
            let back = spec_from_str(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(spec_to_string(&back).unwrap(), text);
        }
    }

    #[test]
    fn sequence_round_trip_is_exact() {
        for spec in specs() {
            let seq = compile(&spec, &Schedule::equal(3, PI / 5.0).unwrap()).unwrap();
            let back = sequence_from_str(&sequence_to_string(&seq).unwrap()).unwrap();
            assert_eq!(back, seq);
        }
        let spec = &specs()[0];
        let seq = compile(spec, &Schedule::custom(vec![0.1, 0.3]).unwrap()).unwrap();
        assert_eq!(sequence_from_str(&sequence_to_string(&seq).unwrap()).unwrap(), seq);
    }

    #[test]
    fn written_keys() {
        let text = spec_to_string(&specs()[0]).unwrap();
        for key in ["dim = 3", "law = \"constant\"", "[[generator]]", "row =", "im ="] {
            assert!(text.contains(key), "{key} missing from\n{text}");
        }
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(spec_from_str("dim = 2\nbogus = 1"), Err(Error::Format(_))));
        let mut doc = GaugeSpecDoc::from_spec(&specs()[0]);
        doc.generator.push(Entry { row: 7, col: 0, re: 1.0, im: 0.0 });
        assert!(matches!(doc.into_spec(), Err(Error::Format(_))));
    }
}
