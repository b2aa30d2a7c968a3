//! JSON model files.
//!
//! ```json
//! {
//!   "states": 3,
//!   "actions": ["up", "down"],
//!   "transition": [[[...], ...], ...],
//!   "reward": [[r(0,0), r(0,1)], ...],
//!   "c_obs": 0.25,
//!   "gamma": 0.99,
//!   "switching_cost": 0.1,
//!   "horizon": 200,
//!   "absorbing": [{"state": 0, "pinned_value": 0.0}]
//! }
//! ```
//!
//! `states` and `actions` are counts or label lists. Exactly one of
//! `transition` (one `L × L` stochastic matrix per action) or `generator`
//! (one rate matrix per action, discretized by `P = exp(Q)`) is required.
//! `switching_cost` is a scalar or a `d × d` matrix. Optional
//! `reward_timing` is `"start"` (default) or `"end"`.

use std::path::Path;

use ocm_core::expm::expm;
use ocm_core::model::{validate_generator, OcmModel, RewardTiming};
use ocm_core::Matrix;
use serde_json::{json, Map, Value};

use crate::error::{OcmError, Result};

const KEYS: &[&str] = &[
    "states",
    "actions",
    "transition",
    "generator",
    "reward",
    "c_obs",
    "gamma",
    "switching_cost",
    "horizon",
    "absorbing",
    "reward_timing",
];

pub fn load_model(path: &Path) -> Result<OcmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| OcmError::io(path, e))?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<OcmModel> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| OcmError::config("$", format!("invalid JSON at line {} column {}: {e}", e.line(), e.column())))?;
    model_from_value(&value)
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| OcmError::config(path, format!("expected a finite number, got {v}")))
}

fn count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| OcmError::config(path, format!("expected a nonnegative integer, got {v}")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| OcmError::config(path, format!("expected an array, got {v}")))
}

fn matrix(v: &Value, path: &str, rows: usize, cols: usize) -> Result<Matrix> {
    let outer = array(v, path)?;
    if outer.len() != rows {
        return Err(OcmError::config(path, format!("expected {rows} rows, got {}", outer.len())));
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, row) in outer.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let inner = array(row, &rp)?;
        if inner.len() != cols {
            return Err(OcmError::config(&rp, format!("expected {cols} columns, got {}", inner.len())));
        }
        for (j, x) in inner.iter().enumerate() {
            m[(i, j)] = number(x, &format!("{rp}[{j}]"))?;
        }
    }
    Ok(m)
}

// count or list of labels
fn cardinality(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    let v = obj
        .get(key)
        .ok_or_else(|| OcmError::config(key, "missing required key"))?;
    let n = match v {
        Value::Array(labels) => {
            for (i, l) in labels.iter().enumerate() {
                if !l.is_string() {
                    return Err(OcmError::config(format!("{key}[{i}]"), "labels must be strings"));
                }
            }
            labels.len()
        }
        other => count(other, key)?,
    };
    if n == 0 {
        return Err(OcmError::config(key, "must be at least 1"));
    }
    Ok(n)
}

fn check_stochastic(p: &Matrix, a: usize) -> Result<()> {
    let l = p.nrows();
    for row in 0..l {
        let path = format!("transition[{a}][{row}]");
        let mut sum = 0.0;
        for col in 0..l {
            let v = p[(row, col)];
            if v < 0.0 {
                return Err(OcmError::config(format!("{path}[{col}]"), format!("negative probability {v}")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ocm_core::model::STOCHASTIC_TOL {
            return Err(OcmError::config(path, format!("row {row} sums to {sum}, expected 1")));
        }
    }
    Ok(())
}

pub fn model_from_value(value: &Value) -> Result<OcmModel> {
    let obj = value
        .as_object()
        .ok_or_else(|| OcmError::config("$", "model must be a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(OcmError::config(k.as_str(), "unknown key"));
    }
    let l = cardinality(obj, "states")?;
    let d = cardinality(obj, "actions")?;

    let transitions = match (obj.get("transition"), obj.get("generator")) {
        (Some(_), Some(_)) => return Err(OcmError::config("generator", "give either transition or generator, not both")),
        (None, None) => return Err(OcmError::config("transition", "missing required key (or generator)")),
        (Some(t), None) => {
            let mats = array(t, "transition")?;
            if mats.len() != d {
                return Err(OcmError::config("transition", format!("expected {d} matrices, got {}", mats.len())));
            }
            let mut out = Vec::with_capacity(d);
            for (a, m) in mats.iter().enumerate() {
                let p = matrix(m, &format!("transition[{a}]"), l, l)?;
                check_stochastic(&p, a)?;
                out.push(p);
            }
            out
        }
        (None, Some(g)) => {
            let mats = array(g, "generator")?;
            if mats.len() != d {
                return Err(OcmError::config("generator", format!("expected {d} matrices, got {}", mats.len())));
            }
            let mut out = Vec::with_capacity(d);
            for (a, m) in mats.iter().enumerate() {
                let q = matrix(m, &format!("generator[{a}]"), l, l)?;
                validate_generator(a, &q)?;
                let p = expm(&q).map_err(|e| OcmError::config(format!("generator[{a}]"), e.to_string()))?;
                out.push(p);
            }
            out
        }
    };

    let reward = matrix(
        obj.get("reward")
            .ok_or_else(|| OcmError::config("reward", "missing required key"))?,
        "reward",
        l,
        d,
    )?;
    let get_num = |key: &str| -> Result<f64> {
        number(
            obj.get(key)
                .ok_or_else(|| OcmError::config(key, "missing required key"))?,
            key,
        )
    };
    let c_obs = get_num("c_obs")?;
    let gamma = get_num("gamma")?;
    let horizon = count(
        obj.get("horizon")
            .ok_or_else(|| OcmError::config("horizon", "missing required key"))?,
        "horizon",
    )?;
    let mut model = OcmModel::new(transitions, reward, c_obs, gamma, horizon)?;

    match obj.get("switching_cost") {
        None => {}
        Some(v @ Value::Number(_)) => model = model.with_uniform_switching_cost(number(v, "switching_cost")?)?,
        Some(v) => model = model.with_switching_cost(matrix(v, "switching_cost", d, d)?)?,
    }

    if let Some(abs) = obj.get("absorbing") {
        for (i, e) in array(abs, "absorbing")?.iter().enumerate() {
            let path = format!("absorbing[{i}]");
            let eo = e
                .as_object()
                .ok_or_else(|| OcmError::config(&path, "expected {\"state\", \"pinned_value\"}"))?;
            let state = count(
                eo.get("state")
                    .ok_or_else(|| OcmError::config(format!("{path}.state"), "missing"))?,
                &format!("{path}.state"),
            )?;
            if state >= l {
                return Err(OcmError::config(format!("{path}.state"), format!("state {state} out of range (L = {l})")));
            }
            let pinned = number(
                eo.get("pinned_value")
                    .ok_or_else(|| OcmError::config(format!("{path}.pinned_value"), "missing"))?,
                &format!("{path}.pinned_value"),
            )?;
            model = model.with_absorbing(state, pinned)?;
        }
    }

    if let Some(t) = obj.get("reward_timing") {
        let s = t
            .as_str()
            .ok_or_else(|| OcmError::config("reward_timing", "expected \"start\" or \"end\""))?;
        let timing: RewardTiming = s.parse()?;
        model = model.with_reward_timing(timing);
    }
    Ok(model)
}

fn matrix_json(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Serializes a model in the file format, with explicit transition matrices.
pub fn model_to_value(model: &OcmModel) -> Value {
    let mut obj = json!({
        "states": model.num_states(),
        "actions": model.num_actions(),
        "transition": model.transitions().iter().map(matrix_json).collect::<Vec<_>>(),
        "reward": matrix_json(model.reward()),
        "c_obs": model.c_obs(),
        "gamma": model.discount(),
        "horizon": model.horizon(),
    });
    let map = obj.as_object_mut().expect("object");
    if model.has_switching_cost() {
        map.insert("switching_cost".into(), matrix_json(model.switching_cost()));
    }
    if !model.absorbing().is_empty() {
        let abs = model
            .absorbing()
            .iter()
            .map(|&(s, v)| json!({"state": s, "pinned_value": v}))
            .collect();
        map.insert("absorbing".into(), Value::Array(abs));
    }
    if model.reward_timing() == RewardTiming::EndOfStep {
        map.insert("reward_timing".into(), json!("end"));
    }
    obj
}
