//! Problem specification files.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qduhamel::operators::ForcingSlot;
use qduhamel::propagator::FirstOrderSystem;
use qduhamel::{
    assemble_jackson_dx, assemble_rubin_dx, block_first_order, block_mixed, block_second_order,
    CauchyProblem64, DuhamelOptions, Evaluation, Forcing, LinearOperator, Matrix64, PolynomialForcing,
    QParam64, QuadratureAnchor, SignConvention, SpatialGrid, TimeLattice64, ZeroForcing,
};

use crate::exit::{input_error, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Q,
    Classical,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Q => "q",
            Self::Classical => "classical",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub t_max: f64,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockStructure {
    First,
    Second,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Scalar { lambda: f64 },
    Matrix { rows: Vec<Vec<f64>> },
    JacksonDx { points: Vec<f64> },
    RubinDx { points: Vec<f64> },
    Block {
        structure: BlockStructure,
        l1: Box<OperatorSpec>,
        l2: Box<OperatorSpec>,
        l3: Box<OperatorSpec>,
        l4: Box<OperatorSpec>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedForcing {
    Zero,
    One,
}

/// `"zero"`, `"one"` (every component 1) or `{"poly": [[c0, c1, ...], ...]}`
/// with one coefficient list per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForcingSpec {
    Named(NamedForcing),
    Poly { poly: Vec<Vec<f64>> },
}

/// One forcing for an equation, or `[f, g]` for a block system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForcingField {
    Single(ForcingSpec),
    Pair(Vec<ForcingSpec>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub mode: Mode,
    #[serde(default = "default_order")]
    pub order: usize,
    pub q: f64,
    pub lattice: LatticeSpec,
    #[serde(default = "default_integral_depth")]
    pub integral_depth: usize,
    pub operator: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<String>,
    pub forcing: ForcingField,
    pub initial: Vec<Vec<f64>>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<String>,
    #[serde(default)]
    pub reuse_chains: bool,
}

fn default_order() -> usize {
    1
}

fn default_integral_depth() -> usize {
    50
}

fn default_tolerance() -> f64 {
    1e-8
}

pub const DEFAULT_STEP: f64 = 1e-3;

/// A validated specification plus the hash of its canonical form.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub spec: ProblemSpec,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(input_error)?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<LoadedSpec, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ProblemSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        input_error(anyhow::anyhow!("config field `{path}`: {}", e.into_inner()))
    })?;
    spec.validate().map_err(input_error)?;
    let hash = spec.hash();
    Ok(LoadedSpec { spec, hash })
}

fn finite(field: &str, v: f64) -> anyhow::Result<()> {
    if !v.is_finite() {
        bail!("config field `{field}`: value must be finite, got {v}");
    }
    Ok(())
}

fn all_finite(field: &str, vs: &[f64]) -> anyhow::Result<()> {
    vs.iter().try_for_each(|&v| finite(field, v))
}

impl ProblemSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        finite("q", self.q)?;
        if !(self.q > 0.0 && self.q < 1.0) {
            bail!("config field `q`: q must lie in (0,1), got {}", self.q);
        }
        finite("lattice.t_max", self.lattice.t_max)?;
        if self.lattice.t_max <= 0.0 {
            bail!("config field `lattice.t_max`: must be positive");
        }
        if self.order < 1 {
            bail!("config field `order`: must be at least 1");
        }
        finite("tolerance", self.tolerance)?;
        if self.tolerance <= 0.0 {
            bail!("config field `tolerance`: must be positive");
        }
        if let Some(h) = self.step {
            finite("step", h)?;
            if h <= 0.0 {
                bail!("config field `step`: must be positive");
            }
        }
        self.operator.validate("operator")?;
        for (i, v) in self.initial.iter().enumerate() {
            all_finite(&format!("initial[{i}]"), v)?;
        }
        match &self.forcing {
            ForcingField::Single(f) => f.validate("forcing")?,
            ForcingField::Pair(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    f.validate(&format!("forcing[{i}]"))?;
                }
            }
        }
        if let Some(s) = &self.sign {
            if SignConvention::parse(s).is_none() {
                bail!("config field `sign`: expected \"minus_L\" or \"plus_L\", got {s:?}");
            }
        }
        self.anchor()?;
        self.evaluation()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("spec serialises");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn anchor(&self) -> anyhow::Result<QuadratureAnchor> {
        match self.anchor.as_deref() {
            None | Some("shared") => Ok(QuadratureAnchor::Shared),
            Some("per_point") => Ok(QuadratureAnchor::PerPoint),
            Some(other) => bail!("config field `anchor`: expected \"shared\" or \"per_point\", got {other:?}"),
        }
    }

    pub fn evaluation(&self) -> anyhow::Result<Evaluation> {
        match self.evaluation.as_deref() {
            None | Some("nested") => Ok(Evaluation::Nested),
            Some("explicit") => Ok(Evaluation::Explicit),
            Some(other) => bail!("config field `evaluation`: expected \"nested\" or \"explicit\", got {other:?}"),
        }
    }

    pub fn duhamel_options(&self) -> anyhow::Result<DuhamelOptions> {
        Ok(DuhamelOptions {
            integral_depth: self.integral_depth,
            anchor: self.anchor()?,
            evaluation: self.evaluation()?,
            reuse_chains: self.reuse_chains,
            ..DuhamelOptions::default()
        })
    }

    pub fn q_param(&self) -> QParam64 {
        QParam64::new(self.q).expect("validated")
    }

    pub fn lattice(&self) -> anyhow::Result<TimeLattice64> {
        Ok(TimeLattice64::new(self.lattice.t_max, self.q_param(), self.lattice.depth)?)
    }

    pub fn sign_convention(&self) -> SignConvention {
        self.sign
            .as_deref()
            .and_then(SignConvention::parse)
            .unwrap_or(SignConvention::MinusL)
    }

    pub fn problem(&self) -> anyhow::Result<CauchyProblem64> {
        let lattice = self.lattice()?;
        let q = self.q_param();
        if let OperatorSpec::Block { structure, l1, l2, l3, l4 } = &self.operator {
            let ops = [l1, l2, l3, l4]
                .iter()
                .enumerate()
                .map(|(i, l)| l.leaf(q, &format!("operator.l{}", i + 1)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let block = match structure {
                BlockStructure::First => block_first_order(&ops[0], &ops[1], &ops[2], &ops[3])?,
                BlockStructure::Second => block_second_order(&ops[0], &ops[1], &ops[2], &ops[3])?,
                BlockStructure::Mixed => block_mixed(&ops[0], &ops[1], &ops[2], &ops[3])?,
            };
            if self.sign.is_some() && self.sign_convention() != block.sign() {
                bail!("config field `sign`: block systems use {}", block.sign().as_str());
            }
            let n = block.component_dim();
            let ForcingField::Pair(fs) = &self.forcing else {
                bail!("config field `forcing`: block systems need a pair [f, g]");
            };
            let sources_needed = block
                .forcing_slots()
                .iter()
                .filter_map(|s| match s {
                    ForcingSlot::Source(i) => Some(*i + 1),
                    ForcingSlot::Zero => None,
                })
                .max()
                .unwrap_or(0);
            if fs.len() != sources_needed {
                bail!("config field `forcing`: expected {sources_needed} sources, got {}", fs.len());
            }
            let sources = fs
                .iter()
                .enumerate()
                .map(|(i, f)| f.build(n, &format!("forcing[{i}]")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(CauchyProblem64::coupled(block, sources, self.initial.clone(), lattice)?)
        } else {
            let op = self.operator.leaf(q, "operator")?;
            let ForcingField::Single(f) = &self.forcing else {
                bail!("config field `forcing`: a single equation takes one forcing");
            };
            let forcing = f.build(op.dim(), "forcing")?;
            Ok(CauchyProblem64::equation(
                self.order,
                op,
                self.sign_convention(),
                forcing,
                self.initial.clone(),
                lattice,
            )?)
        }
    }

    pub fn system(&self) -> anyhow::Result<(CauchyProblem64, FirstOrderSystem<f64>)> {
        let problem = self.problem()?;
        let sys = problem.first_order()?;
        Ok((problem, sys))
    }

    pub fn step(&self) -> f64 {
        self.step.unwrap_or(DEFAULT_STEP)
    }

    /// `(lambda, f, u0)` when the spec is a scalar first-order equation with
    /// constant forcing.
    pub fn scalar_family(&self) -> anyhow::Result<(f64, f64, f64)> {
        let OperatorSpec::Scalar { lambda } = self.operator else {
            bail!("config field `operator`: limit study needs a scalar operator");
        };
        if self.order != 1 {
            bail!("config field `order`: limit study needs order 1");
        }
        let f = match &self.forcing {
            ForcingField::Single(ForcingSpec::Named(NamedForcing::Zero)) => 0.0,
            ForcingField::Single(ForcingSpec::Named(NamedForcing::One)) => 1.0,
            ForcingField::Single(ForcingSpec::Poly { poly }) if poly.len() == 1 && poly[0].len() <= 1 => {
                poly[0].first().copied().unwrap_or(0.0)
            }
            _ => bail!("config field `forcing`: limit study needs a constant scalar forcing"),
        };
        let u0 = match self.initial.as_slice() {
            [v] if v.len() == 1 => v[0],
            _ => bail!("config field `initial`: limit study needs one scalar datum"),
        };
        // the family is stated for D u = lambda u + f
        let lambda = match self.sign_convention() {
            SignConvention::MinusL => lambda,
            SignConvention::PlusL => -lambda,
        };
        Ok((lambda, f, u0))
    }
}

impl OperatorSpec {
    fn validate(&self, field: &str) -> anyhow::Result<()> {
        match self {
            Self::Scalar { lambda } => finite(&format!("{field}.lambda"), *lambda),
            Self::Matrix { rows } => {
                for (i, r) in rows.iter().enumerate() {
                    all_finite(&format!("{field}.rows[{i}]"), r)?;
                }
                Ok(())
            }
            Self::JacksonDx { points } | Self::RubinDx { points } => all_finite(&format!("{field}.points"), points),
            Self::Block { l1, l2, l3, l4, .. } => {
                for (i, l) in [l1, l2, l3, l4].iter().enumerate() {
                    if matches!(***l, Self::Block { .. }) {
                        bail!("config field `{field}.l{}`: blocks cannot nest", i + 1);
                    }
                    l.validate(&format!("{field}.l{}", i + 1))?;
                }
                Ok(())
            }
        }
    }

    fn leaf(&self, q: QParam64, field: &str) -> anyhow::Result<LinearOperator<f64>> {
        let ctx = || format!("config field `{field}`");
        Ok(match self {
            Self::Scalar { lambda } => LinearOperator::scalar(*lambda),
            Self::Matrix { rows } => {
                let m = Matrix64::from_rows(rows).with_context(ctx)?;
                LinearOperator::new(m, "matrix").with_context(ctx)?
            }
            Self::JacksonDx { points } => {
                assemble_jackson_dx(&SpatialGrid::new(points.clone(), q).with_context(ctx)?)
            }
            Self::RubinDx { points } => {
                assemble_rubin_dx(&SpatialGrid::new(points.clone(), q).with_context(ctx)?).with_context(ctx)?
            }
            Self::Block { .. } => bail!("{}: blocks cannot nest", ctx()),
        })
    }
}

impl ForcingSpec {
    fn validate(&self, field: &str) -> anyhow::Result<()> {
        if let Self::Poly { poly } = self {
            for (i, c) in poly.iter().enumerate() {
                all_finite(&format!("{field}.poly[{i}]"), c)?;
            }
        }
        Ok(())
    }

    fn build(&self, dim: usize, field: &str) -> anyhow::Result<Arc<dyn Forcing<f64>>> {
        Ok(match self {
            Self::Named(NamedForcing::Zero) => Arc::new(ZeroForcing { dim }),
            Self::Named(NamedForcing::One) => Arc::new(PolynomialForcing::constant(vec![1.0; dim])),
            Self::Poly { poly } => {
                if poly.len() != dim {
                    bail!("config field `{field}.poly`: expected {dim} components, got {}", poly.len());
                }
                Arc::new(PolynomialForcing::new(poly.clone()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"{
        "mode": "q", "order": 1, "q": 0.5,
        "lattice": {"t_max": 1.0, "depth": 60},
        "integral_depth": 50,
        "operator": {"kind": "scalar", "lambda": -1.0},
        "forcing": "one",
        "initial": [[1.0]],
        "tolerance": 1e-8
    }"#;

    #[test]
    fn parses_benchmark() {
        let s = parse(BENCH).unwrap();
        assert_eq!(s.spec.q, 0.5);
        assert_eq!(s.hash.len(), 64);
        assert!(s.spec.problem().is_ok());
    }

    #[test]
    fn hash_ignores_whitespace() {
        let compact: String = BENCH.split_whitespace().collect();
        assert_eq!(parse(BENCH).unwrap().hash, parse(&compact).unwrap().hash);
        let other = BENCH.replace("\"depth\": 60", "\"depth\": 61");
        assert_ne!(parse(BENCH).unwrap().hash, parse(&other).unwrap().hash);
    }

    #[test]
    fn rejects_bad_q_with_message() {
        let err = parse(&BENCH.replace("\"q\": 0.5", "\"q\": 1.2")).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.to_string().contains("q must lie in (0,1)"));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = parse(&BENCH.replace("\"t_max\": 1.0", "\"t_max\": \"one\"")).unwrap_err();
        assert!(err.to_string().contains("lattice.t_max"), "{err}");
        let err = parse(&BENCH.replace("\"tolerance\"", "\"tolerence\"")).unwrap_err();
        assert!(err.to_string().contains("tolerence"), "{err}");
    }

    #[test]
    fn block_spec_builds() {
        let text = r#"{
            "mode": "classical", "q": 0.5,
            "lattice": {"t_max": 1.0, "depth": 10},
            "operator": {"kind": "block", "structure": "first",
                "l1": {"kind": "scalar", "lambda": 0.0}, "l2": {"kind": "scalar", "lambda": 1.0},
                "l3": {"kind": "scalar", "lambda": 0.0}, "l4": {"kind": "scalar", "lambda": 1.0}},
            "forcing": ["zero", "zero"],
            "initial": [[1.0], [0.0]]
        }"#;
        let s = parse(text).unwrap();
        let (_, sys) = s.spec.system().unwrap();
        assert_eq!(sys.a.to_rows(), vec![vec![0.0, -1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn scalar_family_guard() {
        let s = parse(BENCH).unwrap();
        assert_eq!(s.spec.scalar_family().unwrap(), (-1.0, 1.0, 1.0));
        let m = BENCH.replace(
            r#"{"kind": "scalar", "lambda": -1.0}"#,
            r#"{"kind": "matrix", "rows": [[0.0, 1.0], [1.0, 0.0]]}"#,
        );
        let m = m.replace("\"one\"", "{\"poly\": [[1.0], [0.0]]}").replace("[[1.0]]", "[[0.0, 0.0]]");
        assert!(parse(&m).unwrap().spec.scalar_family().is_err());
    }
}
