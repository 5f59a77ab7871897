//! Command implementations. Each returns the text to print or a `Failure`.

use clap::Args;
use serde_json::{json, Value};
use usd_core::families::{self, FamilySpec};
use usd_core::neumark::{self, NeumarkError};
use usd_core::optimizer::{self, OptimizerError};
use usd_core::povm::{self, PovmError};
use usd_core::simulator::{self, SimulationError};
use usd_core::{OptimizerConfig, PovmSet, Priors, StateSet, WeightDiag};

use crate::exit::Failure;
use crate::io::{self, encode_matrix, Loaded, MatrixFile};

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    /// State file or an earlier result document.
    pub input: String,
    /// Comma-separated priors; overrides the file.
    #[arg(long, value_delimiter = ',')]
    pub priors: Option<Vec<f64>>,
    /// Grid points per angle for seeding.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angle convergence tolerance of the simplex refinement.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Skip closed forms and always search numerically.
    #[arg(long)]
    pub no_analytic: bool,
    /// Rescale input states to unit norm instead of rejecting them.
    #[arg(long)]
    pub normalize: bool,
    #[arg(short, long)]
    pub output: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct WeightArgs {
    /// Comma-separated weights x_j; skips the optimizer.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Multiplies the weights by this factor in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub shrink: f64,
}

struct Problem {
    file: MatrixFile,
    states: StateSet,
    priors: Priors,
    loaded: Loaded,
}

fn load(args: &SolveArgs) -> Result<Problem, Failure> {
    let loaded = io::read(&args.input)?;
    let file = loaded.matrix_file().clone();
    let states = file.state_set(args.normalize)?;
    let priors = file.priors(args.priors.as_deref())?;
    Ok(Problem {
        file,
        states,
        priors,
        loaded,
    })
}

fn config(args: &SolveArgs) -> OptimizerConfig {
    let mut cfg = OptimizerConfig {
        grid_density: args.grid,
        restarts: args.restarts,
        seed: args.seed,
        use_analytic: !args.no_analytic,
        ..OptimizerConfig::default()
    };
    if let Some(t) = args.tol {
        cfg.tol_t = t;
    }
    cfg
}

fn optimizer_failure(e: OptimizerError) -> Failure {
    match e {
        ref e if e.is_singular() => Failure::singular(e.to_string()),
        OptimizerError::Config(m) => Failure::parse(format!("config: {m}")),
        OptimizerError::Geometry(g) => Failure::mismatch(g.to_string()),
        other => Failure::invalid(other.to_string()),
    }
}

fn povm_failure(e: PovmError) -> Failure {
    match e {
        PovmError::Infeasible(r) => Failure::invalid(format!(
            "duan-guo: weights infeasible (min eigenvalue {:e})",
            r.gram_form_min_eigenvalue.min(r.reciprocal_form_min_eigenvalue)
        )),
        PovmError::Geometry(g) => Failure::mismatch(g.to_string()),
        PovmError::RankDeficient { .. } | PovmError::BadRotation { .. } => {
            Failure::mismatch(e.to_string())
        }
        PovmError::Linalg(l) => Failure::singular(l.to_string()),
    }
}

fn optimization_json(res: &usd_core::OptimizationResult, p: &Problem) -> Value {
    let mut v = serde_json::to_value(res).expect("plain data serializes");
    let angles: Vec<f64> = res.t_m.angles().iter().map(|a| io::sig12(*a)).collect();
    v["t_m"] = json!(angles);
    let feas = optimizer::feasibility_check(&p.states, &res.weights).ok();
    let chefles = optimizer::chefles_residual(&p.states, &res.weights).ok();
    v["residuals"] = json!({
        "chefles": chefles,
        "duan_guo_min_eigenvalue": feas.map(|f| f.gram_form_min_eigenvalue),
        "reciprocal_min_eigenvalue": feas.map(|f| f.reciprocal_form_min_eigenvalue),
    });
    v["symmetric_point_pm"] = json!(optimizer::symmetric_point_pm(&p.states, &p.priors).ok());
    v
}

fn config_json(args: &SolveArgs, cfg: &OptimizerConfig, extra: Value) -> Value {
    let mut v = json!({
        "optimizer": cfg,
        "priors_override": args.priors,
        "normalize": args.normalize,
        "threads": rayon::current_num_threads(),
    });
    if let (Value::Object(a), Value::Object(b)) = (&mut v, extra) {
        a.extend(b);
    }
    v
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes")
}

pub fn optimize(args: &SolveArgs, dump_grid: Option<&str>) -> Result<String, Failure> {
    let p = load(args)?;
    let cfg = config(args);
    if let Some(path) = dump_grid {
        let samples = optimizer::efficiency_samples(&p.states, &p.priors, cfg.density_for(p.states.n()))
            .map_err(optimizer_failure)?;
        let mut csv = String::new();
        let dims = p.states.n() - 1;
        let header: Vec<String> = (1..=dims).map(|i| format!("t{i}")).collect();
        csv.push_str(&header.join(","));
        csv.push_str(if dims > 0 { ",efficiency\n" } else { "efficiency\n" });
        for (t, e) in samples {
            for a in t.angles() {
                csv.push_str(&format!("{},", io::sig12(*a)));
            }
            csv.push_str(&format!("{e}\n"));
        }
        std::fs::write(path, csv).map_err(|e| Failure::parse(format!("cannot write {path}: {e}")))?;
    }
    let (res, converged) = match optimizer::optimize(&p.states, &p.priors, &cfg) {
        Ok(r) => (r, true),
        Err(OptimizerError::BudgetExceeded { best: Some(b), .. }) => (*b, false),
        Err(e) => return Err(optimizer_failure(e)),
    };
    let doc = io::document(
        "optimize",
        &p.file,
        config_json(args, &cfg, json!({ "dump_grid": dump_grid })),
        cfg.seed,
        optimization_json(&res, &p),
    );
    let text = pretty(&doc);
    if converged && res.converged {
        Ok(text)
    } else {
        Err(Failure::not_converged(
            "optimizer did not converge; best-so-far result attached",
            text,
        ))
    }
}

/// Weights from `--weights`, then from an input result document, then from the optimizer.
fn resolve_weights(
    p: &Problem,
    args: &SolveArgs,
    w: &WeightArgs,
) -> Result<(WeightDiag, &'static str), Failure> {
    if !(w.shrink > 0.0 && w.shrink <= 1.0) {
        return Err(Failure::parse(format!("--shrink {} outside (0, 1]", w.shrink)));
    }
    let (raw, source) = if let Some(x) = &w.weights {
        (x.clone(), "flag")
    } else if let Some(x) = p.loaded.weights() {
        (x, "document")
    } else {
        let res = match optimizer::optimize(&p.states, &p.priors, &config(args)) {
            Ok(r) => r,
            Err(OptimizerError::BudgetExceeded { best: Some(b), .. }) => *b,
            Err(e) => return Err(optimizer_failure(e)),
        };
        (res.weights.values().to_vec(), "optimizer")
    };
    if raw.len() != p.states.n() {
        return Err(Failure::mismatch(format!(
            "weights: expected {} values, got {}",
            p.states.n(),
            raw.len()
        )));
    }
    let x = WeightDiag::new(raw).map_err(|e| Failure::parse(format!("weights: {e}")))?;
    Ok((x.scaled(w.shrink), source))
}

fn povm_set(p: &Problem, x: &WeightDiag) -> Result<PovmSet, Failure> {
    povm::complement(&p.states, x).map_err(povm_failure)
}

fn born_json(p: &Problem, set: &PovmSet) -> Value {
    json!(simulator::born_table(&p.states, set).rows)
}

pub fn povm_cmd(args: &SolveArgs, w: &WeightArgs) -> Result<String, Failure> {
    let p = load(args)?;
    let (x, source) = resolve_weights(&p, args, w)?;
    let set = povm_set(&p, &x)?;
    let residuals = set.residuals(&p.states).map_err(povm_failure)?;
    let result = json!({
        "weights": x.values(),
        "weights_source": source,
        "mean_efficiency": x.mean_efficiency(&p.priors),
        "ancilla_dim": set.ancilla_dim,
        "detectors": set.detectors.iter().map(encode_matrix).collect::<Vec<_>>(),
        "complement": encode_matrix(&set.complement),
        "ancilla_vectors": encode_matrix(&set.ancilla_vectors),
        "born_table": born_json(&p, &set),
        "residuals": residuals,
    });
    let cfg = config(args);
    let doc = io::document(
        "povm",
        &p.file,
        config_json(args, &cfg, json!({ "shrink": w.shrink })),
        cfg.seed,
        result,
    );
    Ok(pretty(&doc))
}

fn neumark_failure(e: NeumarkError) -> Failure {
    match e {
        NeumarkError::Linalg(l) => Failure::singular(l.to_string()),
        NeumarkError::NotCompletion { .. } => Failure::invalid(format!("completeness: {e}")),
        other => Failure::mismatch(other.to_string()),
    }
}

pub fn neumark_cmd(args: &SolveArgs, w: &WeightArgs, tensor: bool) -> Result<String, Failure> {
    let p = load(args)?;
    let (x, source) = resolve_weights(&p, args, w)?;
    let set = povm_set(&p, &x)?;
    let n = p.states.n();
    let u = if tensor {
        if set.ancilla_dim != n {
            return Err(Failure::mismatch(format!(
                "--tensor needs ancilla dimension N = {n}, got {}; try --shrink below 1",
                set.ancilla_dim
            )));
        }
        let full = povm::ancilla_full(&p.states, &x).map_err(povm_failure)?;
        neumark::extend_tensor(&set.xi_x, &full).map_err(neumark_failure)?
    } else {
        neumark::extend(&set.xi_x, &set.ancilla_vectors, None).map_err(neumark_failure)?
    };
    let result = json!({
        "weights": x.values(),
        "weights_source": source,
        "n": u.n,
        "ancilla_dim": u.n_a,
        "dimension": u.dim(),
        "tensor_form": u.tensor_form,
        "construction": u.construction,
        "unitary": encode_matrix(&u.u),
        "residuals": u.residuals(),
        "statistics": neumark::project_statistics(&u, &p.states),
        "born_table": born_json(&p, &set),
    });
    let cfg = config(args);
    let doc = io::document(
        "neumark",
        &p.file,
        config_json(args, &cfg, json!({ "shrink": w.shrink, "tensor": tensor })),
        cfg.seed,
        result,
    );
    Ok(pretty(&doc))
}

pub fn simulate_cmd(
    args: &SolveArgs,
    w: &WeightArgs,
    trials: u64,
    workers: Option<usize>,
) -> Result<String, Failure> {
    let p = load(args)?;
    let (x, source) = resolve_weights(&p, args, w)?;
    let set = povm_set(&p, &x)?;
    let workers = workers.unwrap_or_else(rayon::current_num_threads);
    let report = simulator::simulate_with_workers(&p.states, &p.priors, &set, trials, args.seed, workers)
        .map_err(|e| match e {
            SimulationError::DimensionMismatch { .. } => Failure::mismatch(e.to_string()),
            other => Failure::parse(other.to_string()),
        })?;
    let result = json!({
        "weights": x.values(),
        "weights_source": source,
        "report": report,
        "born_table": born_json(&p, &set),
    });
    let cfg = config(args);
    let doc = io::document(
        "simulate",
        &p.file,
        config_json(
            args,
            &cfg,
            json!({ "shrink": w.shrink, "trials": trials, "workers": workers }),
        ),
        args.seed,
        result,
    );
    Ok(pretty(&doc))
}

pub fn parse_spec(spec: Option<&str>, spec_file: Option<&str>) -> Result<FamilySpec, Failure> {
    let text = match (spec, spec_file) {
        (Some(s), None) => s.to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Failure::parse(format!("cannot read {path}: {e}")))?,
        _ => return Err(Failure::parse("pass exactly one of --spec and --spec-file")),
    };
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("family spec: {e}")))
}

pub fn gen_matrix_file(spec: &FamilySpec) -> Result<MatrixFile, Failure> {
    let g = families::gen(spec).map_err(|e| Failure::invalid(e.to_string()))?;
    let mut file = MatrixFile::from_states(&g.states, Some(&g.priors));
    file.family = Some(spec.clone());
    file.known_pm = g.known_pm;
    Ok(file)
}

pub fn gen_cmd(spec: &FamilySpec) -> Result<String, Failure> {
    Ok(gen_matrix_file(spec)?.to_json())
}
