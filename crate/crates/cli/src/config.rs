//! Run configuration, read from TOML.
//!
//! ```toml
//! [problem]
//! preset = "matrix"        # matrix | scalar | diag | coriolis2d | coriolis3d | periodic2d
//! a = [[0.0]]
//! g = [1.0]
//!
//! [data]
//! family = "tanh1d"        # tanh1d | gauss1d | tanh2d | gauss2d_coriolis | linear | constant | blocks
//! mu = 1.0
//! kappa = 1.0
//!
//! [task]
//! kind = "solve"           # solve | blowup | period | compare
//! times = [0.0, 0.5, 1.0]
//! x_min = [-3.0]
//! x_max = [3.0]
//! points = 61
//! ```

use crate::error::CliError;
use hodograph_core::degenerate::{build_basis, coriolis3d_basis, coriolis3d_spec, zaxis_basis};
use hodograph_core::periodicity::make_periodic_2d;
use hodograph_core::{
    Branch, DegenerateBasis, ForceSpec, HodographProblem, InitialData, Mat, Pipeline, Vect,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub data: DataConfig,
    pub task: TaskConfig,
}

/// Force `g + A·u`. `g` defaults to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Rows of A.
    Matrix {
        a: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<f64>>,
    },
    Scalar {
        a: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<f64>,
    },
    /// `A = diag(a)`.
    Diag {
        a: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<f64>>,
    },
    /// `A = ω[[0,1],[-1,0]]`.
    Coriolis2d {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<f64>>,
    },
    /// `A·u = -ω×u`; a scalar ω means rotation about the z-axis.
    Coriolis3d {
        omega: Omega3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<f64>>,
    },
    /// `λ·[[A11, A12], [A21, -A11]]` with `A² = -λ²I`.
    Periodic2d {
        lambda: f64,
        a11: f64,
        a12: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Omega3 {
    Z(f64),
    Vector([f64; 3]),
}

impl Omega3 {
    pub fn vector(self) -> [f64; 3] {
        match self {
            Omega3::Z(w) => [0.0, 0.0, w],
            Omega3::Vector(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchConfig {
    Plus,
    Minus,
}

impl From<BranchConfig> for Branch {
    fn from(b: BranchConfig) -> Self {
        match b {
            BranchConfig::Plus => Branch::Plus,
            BranchConfig::Minus => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Tanh1d { mu: f64, kappa: f64 },
    Gauss1d { eta: f64, kappa: f64, branch: BranchConfig },
    Tanh2d { epsilon: f64 },
    Gauss2dCoriolis { amplitude: f64, branch: [BranchConfig; 2] },
    /// `u⁰ = R⁻¹x`, rows of R.
    Linear { r: Vec<Vec<f64>> },
    Constant { c: Vec<f64> },
    /// Independent families on consecutive coordinate blocks.
    Blocks { parts: Vec<DataConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskConfig {
    Solve(SolveTask),
    Blowup(BlowupTask),
    Period(PeriodTask),
    Compare(CompareTask),
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Solve(_) => "solve",
            TaskConfig::Blowup(_) => "blowup",
            TaskConfig::Period(_) => "period",
            TaskConfig::Compare(_) => "compare",
        }
    }
}

/// Field on a tensor grid of x, continued in t from 0 at each x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveTask {
    pub times: Vec<f64>,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    /// Points per dimension, endpoints included.
    pub points: usize,
    /// Rows with `|det(φ1 + ∂φ/∂M)| < near_blowup·|det ∂φ/∂M|` are NEAR_BLOWUP.
    #[serde(default = "default_near_blowup")]
    pub near_blowup: f64,
    /// Points per M-dimension for locating the first blow-up.
    #[serde(default = "default_compare_grid")]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupTask {
    /// Points per M-dimension.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Period indices for Coriolis sheets.
    #[serde(default)]
    pub k_min: i64,
    #[serde(default)]
    pub k_max: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodTask {
    #[serde(default = "default_rational_tol")]
    pub rational_tol: f64,
    #[serde(default = "default_max_den")]
    pub max_denominator: i64,
    /// Checks `u(t+T, x) = u(t, x)` at random points when set (g must be 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTask {
    pub points: usize,
    pub t_max: f64,
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Period to test when `e^{tA}` has none of its own (degenerate A).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Sampling box for x; defaults to the data's x-box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<Vec<f64>>,
}

/// Hodograph solution against exact characteristics at random `(x⁰, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareTask {
    pub samples: usize,
    pub t_max: f64,
    /// Gate on the max velocity error over rows before the first blow-up.
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Points per M-dimension for locating the first blow-up.
    #[serde(default = "default_compare_grid")]
    pub grid: usize,
    /// Sampling box for x⁰; defaults to the data's x-box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<Vec<f64>>,
}

fn default_near_blowup() -> f64 {
    1e-3
}
fn default_grid() -> usize {
    201
}
fn default_compare_grid() -> usize {
    101
}
fn default_rational_tol() -> f64 {
    hodograph_core::periodicity::RATIONAL_TOL
}
fn default_max_den() -> i64 {
    hodograph_core::periodicity::MAX_DENOMINATOR
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Overrides every seed in the task.
    pub fn set_seed(&mut self, seed: u64) {
        match &mut self.task {
            TaskConfig::Compare(c) => c.seed = seed,
            TaskConfig::Period(PeriodTask { verify: Some(v), .. }) => v.seed = seed,
            _ => {}
        }
    }

    pub fn problem_dim(&self) -> Result<usize, CliError> {
        Ok(match &self.problem {
            ProblemConfig::Matrix { a, .. } => a.len(),
            ProblemConfig::Scalar { .. } => 1,
            ProblemConfig::Diag { a, .. } => a.len(),
            ProblemConfig::Coriolis2d { .. } | ProblemConfig::Periodic2d { .. } => 2,
            ProblemConfig::Coriolis3d { .. } => 3,
        })
    }

    /// Dimensional consistency across blocks.
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.problem_dim()?;
        if n == 0 {
            return Err(CliError::Config("problem dimension is zero".into()));
        }
        if let ProblemConfig::Matrix { a, .. } = &self.problem {
            if a.iter().any(|row| row.len() != n) {
                return Err(CliError::Config(format!("matrix a must be {n}x{n}")));
            }
        }
        let g_len = match &self.problem {
            ProblemConfig::Scalar { .. } => None,
            ProblemConfig::Matrix { g, .. }
            | ProblemConfig::Diag { g, .. }
            | ProblemConfig::Coriolis2d { g, .. }
            | ProblemConfig::Coriolis3d { g, .. }
            | ProblemConfig::Periodic2d { g, .. } => g.as_ref().map(Vec::len),
        };
        if let Some(len) = g_len.filter(|&l| l != n) {
            return Err(CliError::Config(format!("g has {len} entries, problem dimension is {n}")));
        }
        let d = data_dim(&self.data)?;
        if d != n {
            return Err(CliError::Config(format!("data dimension {d} differs from problem dimension {n}")));
        }
        match &self.task {
            TaskConfig::Solve(s) => {
                if s.x_min.len() != n || s.x_max.len() != n {
                    return Err(CliError::Config(format!("x_min and x_max need {n} entries")));
                }
                if s.points == 0 || s.grid == 0 || s.times.is_empty() {
                    return Err(CliError::Config("solve needs points, grid and times".into()));
                }
            }
            TaskConfig::Blowup(b) => {
                if b.grid == 0 || b.k_min > b.k_max {
                    return Err(CliError::Config("blowup needs grid > 0 and k_min <= k_max".into()));
                }
            }
            TaskConfig::Compare(c) => {
                check_box(&c.x_min, &c.x_max, n)?;
                if c.samples == 0 || !(c.t_max > 0.0) || !(c.tol > 0.0) || c.grid == 0 {
                    return Err(CliError::Config("compare needs samples, t_max, tol and grid positive".into()));
                }
            }
            TaskConfig::Period(p) => {
                if let Some(v) = &p.verify {
                    check_box(&v.x_min, &v.x_max, n)?;
                    if v.points == 0 || !(v.tol > 0.0) {
                        return Err(CliError::Config("verify needs points > 0 and tol > 0".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_box(lo: &Option<Vec<f64>>, hi: &Option<Vec<f64>>, n: usize) -> Result<(), CliError> {
    match (lo, hi) {
        (None, None) => Ok(()),
        (Some(l), Some(h)) if l.len() == n && h.len() == n && l.iter().zip(h).all(|(a, b)| a <= b) => Ok(()),
        _ => Err(CliError::Config(format!("x_min and x_max must both be set, with {n} ordered entries"))),
    }
}

fn data_dim(d: &DataConfig) -> Result<usize, CliError> {
    Ok(match d {
        DataConfig::Tanh1d { .. } | DataConfig::Gauss1d { .. } => 1,
        DataConfig::Tanh2d { .. } | DataConfig::Gauss2dCoriolis { .. } => 2,
        DataConfig::Linear { r } => {
            if r.iter().any(|row| row.len() != r.len()) {
                return Err(CliError::Config("linear r must be square".into()));
            }
            r.len()
        }
        DataConfig::Constant { c } => c.len(),
        DataConfig::Blocks { parts } => parts.iter().map(data_dim).sum::<Result<usize, _>>()?,
    })
}

fn rows(a: &[Vec<f64>]) -> Mat {
    let n = a.len();
    Mat::from_fn(n, n, |i, j| a[i][j])
}

fn g_vec(g: &Option<Vec<f64>>, n: usize) -> Vect {
    g.as_ref().map_or_else(|| Vect::zeros(n), |g| Vect::from_column_slice(g))
}

/// Builds the force specification.
pub fn build_spec(p: &ProblemConfig) -> hodograph_core::Result<ForceSpec> {
    match p {
        ProblemConfig::Matrix { a, g } => ForceSpec::new(rows(a), g_vec(g, a.len())),
        ProblemConfig::Scalar { a, g } => ForceSpec::scalar(*a, g.unwrap_or(0.0)),
        ProblemConfig::Diag { a, g } => ForceSpec::diagonal(a, g_vec(g, a.len())),
        ProblemConfig::Coriolis2d { omega, g } => ForceSpec::coriolis_2d(*omega, g_vec(g, 2)),
        ProblemConfig::Coriolis3d { omega, g } => coriolis3d_spec(omega.vector(), g_vec(g, 3)),
        ProblemConfig::Periodic2d { lambda, a11, a12, g } => {
            ForceSpec::new(make_periodic_2d(*lambda, *a11, *a12)?, g_vec(g, 2))
        }
    }
}

pub fn build_data(d: &DataConfig) -> hodograph_core::Result<InitialData> {
    match d {
        DataConfig::Tanh1d { mu, kappa } => InitialData::tanh_1d(*mu, *kappa),
        DataConfig::Gauss1d { eta, kappa, branch } => InitialData::gauss_1d(*eta, *kappa, (*branch).into()),
        DataConfig::Tanh2d { epsilon } => InitialData::tanh_2d(*epsilon),
        DataConfig::Gauss2dCoriolis { amplitude, branch } => {
            InitialData::gauss_2d_coriolis(*amplitude, [branch[0].into(), branch[1].into()])
        }
        DataConfig::Linear { r } => InitialData::linear(rows(r)),
        DataConfig::Constant { c } => InitialData::constant(Vect::from_column_slice(c)),
        DataConfig::Blocks { parts } => InitialData::blocks(parts.iter().map(build_data).collect::<Result<_, _>>()?),
    }
}

/// A problem together with the rotated basis when A is rank-deficient.
pub struct Built {
    pub problem: HodographProblem,
    pub basis: Option<DegenerateBasis>,
}

pub fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let spec = build_spec(&cfg.problem).map_err(|e| CliError::Config(e.to_string()))?;
    let data = build_data(&cfg.data).map_err(|e| CliError::Config(e.to_string()))?;
    let basis = if spec.pipeline() == Pipeline::Degenerate {
        let b = match &cfg.problem {
            ProblemConfig::Coriolis3d { omega: Omega3::Z(w), .. } => zaxis_basis(*w),
            ProblemConfig::Coriolis3d { omega, .. } if omega.vector()[1] != 0.0 || omega.vector()[2] != 0.0 => {
                coriolis3d_basis(omega.vector())
            }
            _ => build_basis(spec.a()),
        };
        Some(b.map_err(|e| CliError::Config(e.to_string()))?)
    } else {
        None
    };
    let problem = HodographProblem::new(spec, data).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Built { problem, basis })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = r#"
[problem]
preset = "scalar"
a = 0.0
g = 1.0

[data]
family = "tanh1d"
mu = 1.0
kappa = 1.0

[task]
kind = "solve"
times = [0.0, 1.0]
x_min = [-3.0]
x_max = [3.0]
points = 7
"#;

    #[test]
    fn parses_and_defaults() {
        let c = RunConfig::from_toml(SOLVE).unwrap();
        let TaskConfig::Solve(s) = &c.task else { panic!() };
        assert_eq!(s.near_blowup, 1e-3);
        assert_eq!(c.problem_dim().unwrap(), 1);
    }

    #[test]
    fn nested_blocks_and_vector_omega() {
        let text = r#"
[problem]
preset = "coriolis3d"
omega = [0.0, 0.5, 1.0]

[data]
family = "blocks"

[[data.parts]]
family = "gauss2d_coriolis"
amplitude = 0.1
branch = ["plus", "minus"]

[[data.parts]]
family = "constant"
c = [0.3]

[task]
kind = "blowup"
grid = 11
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        let b = build(&c).unwrap();
        assert!(b.basis.is_some());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let bad = SOLVE.replace("x_min = [-3.0]", "x_min = [-3.0, 0.0]");
        assert!(matches!(RunConfig::from_toml(&bad), Err(CliError::Config(_))));
        let bad = SOLVE.replace("family = \"tanh1d\"\nmu = 1.0\nkappa = 1.0", "family = \"tanh2d\"\nepsilon = 0.5");
        assert!(matches!(RunConfig::from_toml(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SOLVE.replace("points = 7", "points = 7\npoint = 3");
        assert!(RunConfig::from_toml(&bad).is_err());
    }
}
