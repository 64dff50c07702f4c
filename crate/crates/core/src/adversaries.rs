//! Attackers that zero out one group's reward per round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_categorical, AttackVector};

const ROW_TOLERANCE: f64 = 1e-9;

/// Row-stochastic matrix; entry `(i, j)` is the chance of attacking group `j`
/// after group `i` was attacked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MarkovAttackMatrix {
    rows: Vec<Vec<f64>>,
}

/// One problem found in a candidate transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDiagnostic {
    pub row: usize,
    pub message: String,
}

/// Reports every malformed row; an empty list means the matrix is usable.
pub fn validate_matrix(rows: &[Vec<f64>]) -> Vec<MatrixDiagnostic> {
    let mut out = Vec::new();
    if rows.is_empty() {
        out.push(MatrixDiagnostic {
            row: 0,
            message: "matrix has no rows".into(),
        });
    }
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        let label = i + 1;
        if row.len() != n {
            out.push(MatrixDiagnostic {
                row: label,
                message: format!("row {label} has {} entries, expected {n}", row.len()),
            });
        }
        for (j, p) in row.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                out.push(MatrixDiagnostic {
                    row: label,
                    message: format!("row {label} entry {} is {p}", j + 1),
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            out.push(MatrixDiagnostic {
                row: label,
                message: format!("row {label} sums to {sum}"),
            });
        }
    }
    out
}

impl MarkovAttackMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let diags = validate_matrix(&rows);
        if !diags.is_empty() {
            return Err(Error::Validation(diags.into_iter().map(|d| d.message).collect()));
        }
        Ok(Self { rows })
    }

    pub fn groups(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, from: usize) -> Result<&[f64]> {
        self.rows.get(from).map(Vec::as_slice).ok_or_else(|| {
            Error::invalid(
                "attack matrix row",
                format!("{} outside 1..={}", from + 1, self.rows.len()),
            )
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Rows alternate between `odd` (groups 1, 3, ...) and `even`.
    fn alternating(groups: usize, odd: [f64; 4], even: [f64; 4]) -> Self {
        let rows = (0..groups)
            .map(|i| if i % 2 == 0 { odd.to_vec() } else { even.to_vec() })
            .collect();
        Self::new(rows).expect("preset matrices are stochastic")
    }

    /// Default oblivious attacker for four groups.
    pub fn oblivious() -> Self {
        Self::alternating(4, [0.4, 0.1, 0.4, 0.1], [0.35, 0.15, 0.35, 0.15])
    }

    /// Oblivious attacker from an earlier draft of the evaluation.
    pub fn oblivious_alt() -> Self {
        Self::alternating(4, [0.35, 0.15, 0.35, 0.15], [0.3, 0.2, 0.3, 0.2])
    }

    /// Attacker before the regime change: groups 2 and 4 are hit hardest.
    pub fn shift_before() -> Self {
        Self::alternating(4, [0.2, 0.3, 0.2, 0.3], [0.15, 0.35, 0.15, 0.35])
    }

    /// Attacker after the regime change: groups 1 and 3 are hit hardest.
    pub fn shift_after() -> Self {
        Self::alternating(4, [0.35, 0.15, 0.45, 0.05], [0.3, 0.2, 0.4, 0.1])
    }
}

impl TryFrom<Vec<Vec<f64>>> for MarkovAttackMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<MarkovAttackMatrix> for Vec<Vec<f64>> {
    fn from(m: MarkovAttackMatrix) -> Self {
        m.rows
    }
}

fn default_initial() -> usize {
    1
}

/// Attacker model. Group numbers in this type are one-based, as in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackerSpec {
    None,
    ObliviousMarkov {
        matrix: MarkovAttackMatrix,
        #[serde(default = "default_initial")]
        initial: usize,
    },
    Adaptive,
    TimeVarying {
        before: MarkovAttackMatrix,
        after: MarkovAttackMatrix,
        switch_round: u64,
        #[serde(default = "default_initial")]
        initial: usize,
    },
}

pub const ATTACKER_PRESETS: [&str; 6] = [
    "none",
    "oblivious",
    "oblivious-alt",
    "adaptive",
    "time-varying",
    "time-varying-alt",
];

impl AttackerSpec {
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "none" => AttackerSpec::None,
            "oblivious" => AttackerSpec::ObliviousMarkov {
                matrix: MarkovAttackMatrix::oblivious(),
                initial: 1,
            },
            "oblivious-alt" => AttackerSpec::ObliviousMarkov {
                matrix: MarkovAttackMatrix::oblivious_alt(),
                initial: 1,
            },
            "adaptive" => AttackerSpec::Adaptive,
            "time-varying" => AttackerSpec::TimeVarying {
                before: MarkovAttackMatrix::shift_before(),
                after: MarkovAttackMatrix::shift_after(),
                switch_round: 2000,
                initial: 1,
            },
            // The draft pair is printed identically on both sides of the
            // switch, with the leading entry left blank (filled so rows sum
            // to one).
            "time-varying-alt" => AttackerSpec::TimeVarying {
                before: MarkovAttackMatrix::oblivious_alt(),
                after: MarkovAttackMatrix::oblivious_alt(),
                switch_round: 2000,
                initial: 1,
            },
            other => {
                return Err(Error::UnknownName {
                    kind: "attacker",
                    name: other.to_string(),
                    available: ATTACKER_PRESETS.iter().map(|s| s.to_string()).collect(),
                })
            }
        })
    }

    /// Checks the spec against a group count.
    pub fn validate(&self, groups: usize) -> Result<()> {
        let mut problems = Vec::new();
        let mut check_matrix = |label: &str, m: &MarkovAttackMatrix| {
            if m.groups() != groups {
                problems.push(format!(
                    "{label} matrix is {0}x{0}, scenario has {groups} groups",
                    m.groups()
                ));
            }
        };
        match self {
            AttackerSpec::None | AttackerSpec::Adaptive => {}
            AttackerSpec::ObliviousMarkov { matrix, .. } => check_matrix("attack", matrix),
            AttackerSpec::TimeVarying {
                before,
                after,
                switch_round,
                ..
            } => {
                check_matrix("before-switch", before);
                check_matrix("after-switch", after);
                if *switch_round == 0 {
                    problems.push("switch_round must be at least 1".into());
                }
            }
        }
        if let AttackerSpec::ObliviousMarkov { initial, .. } | AttackerSpec::TimeVarying { initial, .. } = self {
            if *initial == 0 || *initial > groups {
                problems.push(format!("initial attacked group {initial} outside 1..={groups}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Whether the attack sequence ignores the learner.
    pub fn is_oblivious(&self) -> bool {
        !matches!(self, AttackerSpec::Adaptive)
    }

    fn matrix_at(&self, t: u64) -> Option<(&MarkovAttackMatrix, usize)> {
        match self {
            AttackerSpec::ObliviousMarkov { matrix, initial } => Some((matrix, *initial)),
            AttackerSpec::TimeVarying {
                before,
                after,
                switch_round,
                initial,
            } => Some((if t < *switch_round { before } else { after }, *initial)),
            _ => None,
        }
    }
}

/// Attack vector for round `t`.
///
/// `last_attacked` and `last_learner` are zero-based; `u` is a uniform
/// quantile in `[0, 1)`. Markov attackers treat the configured initial group
/// as the state preceding round 1.
pub fn attack_step(
    spec: &AttackerSpec,
    groups: usize,
    t: u64,
    last_attacked: Option<usize>,
    last_learner: Option<usize>,
    u: f64,
) -> Result<AttackVector> {
    match spec {
        AttackerSpec::None => Ok(AttackVector::clear(groups)),
        AttackerSpec::Adaptive => {
            let target = if t <= 1 { 0 } else { last_learner.unwrap_or(0) };
            AttackVector::single(groups, target)
        }
        _ => {
            let (matrix, initial) = spec.matrix_at(t).expect("markov kinds carry a matrix");
            let from = last_attacked.unwrap_or(initial.saturating_sub(1));
            let target = sample_categorical(matrix.row(from)?, u);
            AttackVector::single(groups, target)
        }
    }
}

/// Stateful attacker for one run.
#[derive(Clone, Debug)]
pub struct Attacker {
    spec: AttackerSpec,
    groups: usize,
    last_attacked: Option<usize>,
}

impl Attacker {
    pub fn new(spec: AttackerSpec, groups: usize) -> Result<Self> {
        spec.validate(groups)?;
        Ok(Self {
            spec,
            groups,
            last_attacked: None,
        })
    }

    pub fn spec(&self) -> &AttackerSpec {
        &self.spec
    }

    /// `last_learner` is the learner's previous group; the local route maps
    /// to `None`.
    pub fn step<R: Rng + ?Sized>(&mut self, t: u64, last_learner: Option<usize>, rng: &mut R) -> Result<AttackVector> {
        let u: f64 = rng.random();
        let learner = match self.spec {
            AttackerSpec::Adaptive => last_learner,
            _ => None,
        };
        let a = attack_step(&self.spec, self.groups, t, self.last_attacked, learner, u)?;
        self.last_attacked = a.attacked_groups().next();
        Ok(a)
    }
}
