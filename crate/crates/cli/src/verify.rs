//! Re-checks a stored document from its own contents.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use usd_core::families;
use usd_core::linalg::{self, CMatrix, C64};
use usd_core::neumark::{self, Construction, NeumarkUnitary, ProjectedStatistics};
use usd_core::optimizer;
use usd_core::simulator::{self, SimulationReport};
use usd_core::{AnglePoint, Priors, StateSet, WeightDiag};

use crate::commands::gen_matrix_file;
use crate::exit::Failure;
use crate::io::{self, decode_matrix, Document, Entry, Loaded, MatrixFile};

const TIGHT: f64 = 1e-9;
const OBJECTIVE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &str, residual: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        residual,
        tolerance,
        // NaN residuals fail.
        passed: residual <= tolerance,
    }
}

fn flag(name: &str, ok: bool) -> Check {
    Check {
        name: name.to_string(),
        residual: if ok { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed: ok,
    }
}

fn field<T: DeserializeOwned>(v: &Value, key: &str) -> Result<T, Failure> {
    let raw = v
        .get(key)
        .ok_or_else(|| Failure::parse(format!("result.{key}: missing")))?;
    serde_json::from_value(raw.clone()).map_err(|e| Failure::parse(format!("result.{key}: {e}")))
}

fn matrix_field(v: &Value, key: &str, rows: usize) -> Result<CMatrix, Failure> {
    let cols: Vec<Vec<Entry>> = field(v, key)?;
    decode_matrix(&cols, rows, &format!("result.{key}"))
}

fn doc_states(doc: &Document) -> Result<StateSet, Failure> {
    let normalize = doc.config.get("normalize").and_then(Value::as_bool).unwrap_or(false);
    doc.input.state_set(normalize)
}

fn doc_priors(doc: &Document) -> Result<Priors, Failure> {
    let over: Option<Vec<f64>> = doc
        .config
        .get("priors_override")
        .and_then(|p| serde_json::from_value(p.clone()).ok());
    doc.input.priors(over.as_deref())
}

fn weights(doc: &Document, n: usize) -> Result<WeightDiag, Failure> {
    let raw: Vec<f64> = field(&doc.result, "weights")?;
    if raw.len() != n {
        return Err(Failure::mismatch(format!(
            "result.weights: expected {n} values, got {}",
            raw.len()
        )));
    }
    WeightDiag::new(raw).map_err(|e| Failure::parse(format!("result.weights: {e}")))
}

fn min_eig(m: &CMatrix) -> f64 {
    linalg::herm_eigenvalues(&m.hermitian_part()).map_or(f64::NEG_INFINITY, |v| v[0])
}

fn duan_guo(states: &StateSet, x: &WeightDiag) -> Check {
    let r = optimizer::feasibility_check(states, x).ok();
    let worst = r.map_or(f64::NEG_INFINITY, |r| {
        r.gram_form_min_eigenvalue.min(r.reciprocal_form_min_eigenvalue)
    });
    check("duan-guo", -worst, 1e-8)
}

fn table_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut m: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        if ra.len() != rb.len() {
            return f64::INFINITY;
        }
        for (x, y) in ra.iter().zip(rb) {
            m = m.max((x - y).abs());
        }
    }
    m
}

fn verify_optimize(doc: &Document, checks: &mut Vec<Check>) -> Result<(), Failure> {
    let states = doc_states(doc)?;
    let priors = doc_priors(doc)?;
    let n = states.n();
    let x = weights(doc, n)?;
    let p_m: f64 = field(&doc.result, "p_m")?;
    let t: Vec<f64> = field(&doc.result, "t_m")?;
    checks.push(duan_guo(&states, &x));
    let chefles = optimizer::chefles_residual(&states, &x).map_or(f64::INFINITY, f64::abs);
    checks.push(check("chefles", chefles, OBJECTIVE));
    checks.push(check(
        "mean-efficiency",
        (x.mean_efficiency(&priors) - p_m).abs(),
        TIGHT,
    ));
    let objective = AnglePoint::new(t)
        .ok()
        .filter(|a| a.dimension() == n)
        .and_then(|a| optimizer::efficiency_at(&states, &priors, &a).ok())
        .map_or(f64::INFINITY, |e| (e - p_m).abs());
    checks.push(check("objective", objective, OBJECTIVE));
    Ok(())
}

fn verify_povm(doc: &Document, checks: &mut Vec<Check>) -> Result<(), Failure> {
    let states = doc_states(doc)?;
    let n = states.n();
    let x = weights(doc, n)?;
    let cols: Vec<Vec<Vec<Entry>>> = field(&doc.result, "detectors")?;
    if cols.len() != n {
        return Err(Failure::mismatch(format!(
            "result.detectors: expected {n} operators, got {}",
            cols.len()
        )));
    }
    let detectors = cols
        .iter()
        .enumerate()
        .map(|(k, c)| decode_matrix(c, n, &format!("result.detectors[{k}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let complement = matrix_field(&doc.result, "complement", n)?;
    let ancilla = matrix_field(&doc.result, "ancilla_vectors", n)?;
    let table: Vec<Vec<f64>> = field(&doc.result, "born_table")?;

    let mut total = complement.clone();
    for d in &detectors {
        total = &total + d;
    }
    checks.push(check("completeness", total.identity_residual(), TIGHT));
    let herm = detectors
        .iter()
        .chain(std::iter::once(&complement))
        .map(CMatrix::hermitian_defect)
        .fold(0.0, f64::max);
    checks.push(check("hermiticity", herm, TIGHT));
    let psd = detectors
        .iter()
        .chain(std::iter::once(&complement))
        .map(min_eig)
        .fold(f64::INFINITY, f64::min);
    checks.push(check("psd", -psd, TIGHT));
    let ancilla_res = if ancilla.ncols() == 0 {
        complement.max_abs()
    } else {
        (&ancilla * &ancilla.adjoint()).max_abs_diff(&complement)
    };
    checks.push(check("ancilla", ancilla_res, TIGHT));
    checks.push(duan_guo(&states, &x));

    let xx = states.xi().scale_columns(x.values());
    let recomputed = (0..n)
        .map(|k| {
            let v = xx.column(k);
            CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()).max_abs_diff(&detectors[k])
        })
        .fold(0.0, f64::max);
    checks.push(check("detectors", recomputed, TIGHT));

    let expect = |m: &CMatrix, v: &[C64]| -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                acc += v[a].conj() * m[(a, b)] * v[b];
            }
        }
        acc.re
    };
    let direct: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let v = states.psi().column(j);
            let mut row: Vec<f64> = detectors.iter().map(|d| expect(d, &v)).collect();
            row.push(expect(&complement, &v));
            row
        })
        .collect();
    checks.push(check("born-table", table_diff(&direct, &table), TIGHT));
    let cross = (0..n)
        .flat_map(|j| (0..n).filter(move |k| *k != j).map(move |k| (j, k)))
        .map(|(j, k)| table.get(j).and_then(|r| r.get(k)).copied().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    checks.push(check("unambiguity", cross, TIGHT));
    Ok(())
}

fn verify_neumark(doc: &Document, checks: &mut Vec<Check>) -> Result<(), Failure> {
    let states = doc_states(doc)?;
    let n = states.n();
    let x = weights(doc, n)?;
    let n_a: usize = field(&doc.result, "ancilla_dim")?;
    let construction: Construction = field(&doc.result, "construction")?;
    let tensor_form: bool = field(&doc.result, "tensor_form")?;
    let u = matrix_field(&doc.result, "unitary", n + n_a)?;
    if u.ncols() != n + n_a {
        return Err(Failure::mismatch(format!(
            "result.unitary: expected {} columns, got {}",
            n + n_a,
            u.ncols()
        )));
    }
    let stored: ProjectedStatistics = field(&doc.result, "statistics")?;
    let born: Vec<Vec<f64>> = field(&doc.result, "born_table")?;
    let nu = NeumarkUnitary {
        u,
        n,
        n_a,
        tensor_form,
        construction,
    };
    let r = nu.residuals();
    checks.push(check("unitarity", r.unitarity, TIGHT));
    checks.push(check("xy1", r.xy1, TIGHT));
    checks.push(check("xy2", r.xy2, TIGHT));
    checks.push(check("xy5", r.xy5, TIGHT));
    let xx = states.xi().scale_columns(x.values());
    checks.push(check("top-block", nu.xi().max_abs_diff(&xx), TIGHT));
    let fresh = neumark::project_statistics(&nu, &states);
    let stat_diff = table_diff(&fresh.success, &stored.success).max(table_diff(
        &[fresh.inconclusive.clone()],
        &[stored.inconclusive.clone()],
    ));
    checks.push(check("statistics", stat_diff, TIGHT));
    let combined: Vec<Vec<f64>> = fresh
        .success
        .iter()
        .zip(&fresh.inconclusive)
        .map(|(row, inc)| {
            let mut r = row.clone();
            r.push(*inc);
            r
        })
        .collect();
    checks.push(check("born-table", table_diff(&combined, &born), TIGHT));
    Ok(())
}

fn verify_simulate(doc: &Document, checks: &mut Vec<Check>) -> Result<(), Failure> {
    let states = doc_states(doc)?;
    let priors = doc_priors(doc)?;
    let n = states.n();
    let x = weights(doc, n)?;
    let rep: SimulationReport = field(&doc.result, "report")?;
    let total: u64 = rep.per_state.iter().flatten().sum();
    checks.push(flag("counts", total == rep.trials && rep.per_state.len() == n));
    checks.push(check(
        "rates",
        (rep.success_rate + rep.inconclusive_rate + rep.error_rate - 1.0).abs(),
        1e-12,
    ));
    checks.push(flag("unambiguity", rep.misidentifications() == 0));
    checks.push(check(
        "theory",
        (x.mean_efficiency(&priors) - rep.theoretical_pm).abs(),
        TIGHT,
    ));
    let set = usd_core::povm::complement(&states, &x).map_err(|e| Failure::invalid(e.to_string()))?;
    let again = simulator::simulate_with_workers(&states, &priors, &set, rep.trials, rep.seed, rep.workers)
        .map_err(|e| Failure::invalid(e.to_string()))?;
    checks.push(flag("reproducible", again.per_state == rep.per_state));
    Ok(())
}

fn verify_matrix_file(file: &MatrixFile, checks: &mut Vec<Check>) -> Result<(), Failure> {
    let states = file.state_set(false)?;
    checks.push(flag("states", states.n() == file.n));
    let Some(spec) = &file.family else {
        return Ok(());
    };
    let fresh = gen_matrix_file(spec)?;
    checks.push(flag("regenerate", fresh.states == file.states));
    checks.push(flag("known-pm", fresh.known_pm == file.known_pm));
    let report = families::verify_family(spec).map_err(|e| Failure::invalid(e.to_string()))?;
    for c in report.checks {
        checks.push(Check {
            name: c.name,
            residual: c.residual,
            tolerance: c.tolerance,
            passed: c.passed,
        });
    }
    Ok(())
}

pub fn verify(path: &str) -> Result<String, Failure> {
    let loaded = io::read(path)?;
    let mut checks = Vec::new();
    let kind = match &loaded {
        Loaded::Matrix(m) => {
            verify_matrix_file(m, &mut checks)?;
            "state-file".to_string()
        }
        Loaded::Document(doc) => {
            checks.push(flag("tool", doc.tool == io::TOOL));
            checks.push(flag("input-digest", doc.input.sha256() == doc.input_sha256));
            match doc.command.as_str() {
                "optimize" => verify_optimize(doc, &mut checks)?,
                "povm" => verify_povm(doc, &mut checks)?,
                "neumark" => verify_neumark(doc, &mut checks)?,
                "simulate" => verify_simulate(doc, &mut checks)?,
                other => return Err(Failure::parse(format!("command: unknown document kind {other:?}"))),
            }
            doc.command.clone()
        }
    };
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let report = serde_json::to_string_pretty(&json!({
        "ok": failed.is_empty(),
        "kind": kind,
        "checks": checks,
    }))
    .expect("plain data serializes");
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(Failure::invalid(format!("verification failed: {}", failed.join(", "))).with_output(report))
    }
}
