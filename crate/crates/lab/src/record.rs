//! Recording the Hessian-system sequence of a bilevel run, and its on-disk
//! format: `manifest.json` plus one little-endian `f64` file per field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use recycle_core::bilevel::{
    gradient_descent, DescentOptions, HessianSequence, HessianSolveConfig, LinesearchParams, LowerOptions,
    UpperEvaluator,
};
use recycle_core::operators::{FoeParams, ImageShape, InpaintingProblem};
use recycle_core::recycling::StrategyDescriptor;

use crate::error::{LabError, Result};
use crate::problem::RunConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

/// One system `H^(i) w = g^(i)` of the recorded run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRecord {
    pub theta: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// `g = x^ - x_true`.
    pub rhs: Vec<f64>,
    /// Solution of the recorded (non-recycling) solve.
    pub w: Vec<f64>,
    pub theta_next: Vec<f64>,
    /// Initial stepsize handed to the linesearch at this iteration.
    pub stepsize: f64,
    pub upper_cost: f64,
    pub iterations: usize,
    pub w_ref: Option<Vec<f64>>,
    pub hg_ref: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SequenceRecord {
    pub config: RunConfig,
    pub problem: InpaintingProblem,
    pub systems: Vec<SystemRecord>,
    pub converged: bool,
    /// Tolerance the references were computed at, once they exist.
    pub reference_delta: Option<f64>,
    /// Residual norms `||g - H w_ref||` of the references.
    pub reference_residuals: Option<Vec<f64>>,
}

impl SequenceRecord {
    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn x_true(&self) -> &[f64] {
        self.problem.x_true().expect("recorded problems carry the ground truth")
    }

    pub fn params(&self, theta: &[f64]) -> Result<FoeParams> {
        Ok(FoeParams::unflatten(self.config.filters, self.config.kernel_size, theta)?)
    }

    pub fn has_references(&self) -> bool {
        self.systems.iter().all(|s| s.w_ref.is_some() && s.hg_ref.is_some())
    }

    pub fn total_iterations(&self) -> usize {
        self.systems.iter().map(|s| s.iterations).sum()
    }

    pub fn lower_options(&self) -> LowerOptions {
        LowerOptions {
            gtol: self.config.lower_gtol,
            ..LowerOptions::default()
        }
    }
}

/// Runs gradient descent without recycling, residual stop at `cfg.delta`,
/// and keeps every Hessian system it solved.
pub fn record_sequence(cfg: &RunConfig, prob: InpaintingProblem, theta0: &FoeParams) -> Result<SequenceRecord> {
    cfg.validate()?;
    let lower = LowerOptions {
        gtol: cfg.lower_gtol,
        ..LowerOptions::default()
    };
    let eval = UpperEvaluator::new(&prob, lower)?;
    let solve_cfg = HessianSolveConfig::new(StrategyDescriptor::NONE, 0, cfg.delta).with_max_iter(cfg.max_inner);
    let mut seq = HessianSequence::new(solve_cfg);
    let opts = DescentOptions {
        eps_stop: cfg.eps_stop,
        max_iters: cfg.max_upper,
        linesearch: LinesearchParams::default(),
    };
    let x0 = vec![0.0; prob.dim()];
    let trace = gradient_descent(&eval, theta0, &x0, &mut seq, &opts)?;
    let x_true = prob.x_true().expect("evaluator checked the ground truth");
    let thetas: Vec<Vec<f64>> = trace.iterates.iter().map(|it| it.theta.flatten()).collect();
    let systems = trace
        .iterates
        .iter()
        .enumerate()
        .map(|(i, it)| SystemRecord {
            theta: thetas[i].clone(),
            x_hat: it.x_hat.clone(),
            rhs: it.x_hat.iter().zip(x_true).map(|(a, b)| a - b).collect(),
            w: it.solve.result.solution.clone(),
            theta_next: thetas.get(i + 1).cloned().unwrap_or_else(|| trace.theta.flatten()),
            stepsize: it.stepsize,
            upper_cost: it.cost,
            iterations: it.solve.result.iterations,
            w_ref: None,
            hg_ref: None,
        })
        .collect();
    Ok(SequenceRecord {
        config: cfg.clone(),
        problem: prob,
        systems,
        converged: trace.converged,
        reference_delta: None,
        reference_residuals: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub image_rows: usize,
    pub image_cols: usize,
    pub mask_rows: Vec<usize>,
    pub num_params: usize,
    pub systems: usize,
    pub iterations: Vec<usize>,
    pub stepsizes: Vec<f64>,
    pub upper_costs: Vec<f64>,
    pub converged: bool,
    pub reference_delta: Option<f64>,
    pub reference_residuals: Option<Vec<f64>>,
    /// Strategy the sequence was recorded with, in acronym form.
    pub recorded_with: String,
    pub fields: Vec<FieldEntry>,
}

fn write_f64s(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    if bytes.len() != 8 * expected {
        return Err(LabError::format(
            path,
            format!("{} bytes, expected {} values", bytes.len(), expected),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl SequenceRecord {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        let k = self.len();
        let n = self.dim();
        let p = self.systems.first().map_or(0, |s| s.theta.len());
        let mut fields = Vec::new();
        let mut put = |name: &str, rows: usize, cols: usize, data: Vec<&[f64]>| -> Result<()> {
            let file = format!("{name}.f64");
            write_f64s(&dir.join(&file), data.into_iter().flatten().copied())?;
            fields.push(FieldEntry {
                name: name.into(),
                file,
                rows,
                cols,
            });
            Ok(())
        };
        put("x_true", 1, n, vec![self.x_true()])?;
        put("observation", 1, self.problem.observation().len(), vec![self.problem.observation()])?;
        put("theta", k, p, self.systems.iter().map(|s| s.theta.as_slice()).collect())?;
        put("x_hat", k, n, self.systems.iter().map(|s| s.x_hat.as_slice()).collect())?;
        put("rhs", k, n, self.systems.iter().map(|s| s.rhs.as_slice()).collect())?;
        put("w", k, n, self.systems.iter().map(|s| s.w.as_slice()).collect())?;
        put("theta_next", k, p, self.systems.iter().map(|s| s.theta_next.as_slice()).collect())?;
        if self.has_references() && k > 0 {
            put("w_ref", k, n, self.systems.iter().map(|s| s.w_ref.as_deref().unwrap()).collect())?;
            let pr = self.systems[0].hg_ref.as_ref().unwrap().len();
            put("hg_ref", k, pr, self.systems.iter().map(|s| s.hg_ref.as_deref().unwrap()).collect())?;
        }
        let shape = self.problem.shape();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            image_rows: shape.rows,
            image_cols: shape.cols,
            mask_rows: self.problem.mask_rows().to_vec(),
            num_params: p,
            systems: k,
            iterations: self.systems.iter().map(|s| s.iterations).collect(),
            stepsizes: self.systems.iter().map(|s| s.stepsize).collect(),
            upper_costs: self.systems.iter().map(|s| s.upper_cost).collect(),
            converged: self.converged,
            reference_delta: self.reference_delta,
            reference_residuals: self.reference_residuals.clone(),
            recorded_with: StrategyDescriptor::NONE.to_string(),
            fields,
        };
        let path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, json).map_err(|e| LabError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format_version != FORMAT_VERSION {
            return Err(LabError::format(&path, format!("unsupported format version {}", m.format_version)));
        }
        let field = |name: &str| -> Result<Option<Vec<Vec<f64>>>> {
            let Some(entry) = m.fields.iter().find(|f| f.name == name) else {
                return Ok(None);
            };
            let data = read_f64s(&dir.join(&entry.file), entry.rows * entry.cols)?;
            if entry.cols == 0 {
                return Ok(Some(vec![Vec::new(); entry.rows]));
            }
            Ok(Some(data.chunks(entry.cols).map(<[f64]>::to_vec).collect()))
        };
        let required = |name: &str| -> Result<Vec<Vec<f64>>> {
            field(name)?.ok_or_else(|| LabError::format(&path, format!("missing field {name}")))
        };
        let x_true = required("x_true")?.pop().unwrap_or_default();
        let observation = required("observation")?.pop().unwrap_or_default();
        let shape = ImageShape::new(m.image_rows, m.image_cols);
        let problem = InpaintingProblem::new(shape, m.mask_rows.clone(), observation, m.config.ridge, Some(x_true))?;
        let theta = required("theta")?;
        let x_hat = required("x_hat")?;
        let rhs = required("rhs")?;
        let w = required("w")?;
        let theta_next = required("theta_next")?;
        let w_ref = field("w_ref")?;
        let hg_ref = field("hg_ref")?;
        let k = m.systems;
        let lens = [theta.len(), x_hat.len(), rhs.len(), w.len(), theta_next.len()];
        if lens.iter().any(|&l| l != k) || m.iterations.len() != k || m.stepsizes.len() != k || m.upper_costs.len() != k {
            return Err(LabError::format(&path, "field lengths disagree with the system count"));
        }
        let systems = (0..k)
            .map(|i| SystemRecord {
                theta: theta[i].clone(),
                x_hat: x_hat[i].clone(),
                rhs: rhs[i].clone(),
                w: w[i].clone(),
                theta_next: theta_next[i].clone(),
                stepsize: m.stepsizes[i],
                upper_cost: m.upper_costs[i],
                iterations: m.iterations[i],
                w_ref: w_ref.as_ref().map(|v| v[i].clone()),
                hg_ref: hg_ref.as_ref().map(|v| v[i].clone()),
            })
            .collect();
        Ok(SequenceRecord {
            config: m.config,
            problem,
            systems,
            converged: m.converged,
            reference_delta: m.reference_delta,
            reference_residuals: m.reference_residuals,
        })
    }
}
