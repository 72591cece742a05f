//! JSON model files.
//!
//! ```text
//! {"version":1,"input_dim":2,"output_dim":1,"layers":[
//!   {"type":"linear","w":[[..],..],"b":[..]},
//!   {"type":"batchnorm","gamma":[..],"beta":[..],"running_mean":[..],"running_var":[..]},
//!   {"type":"relu"},
//!   {"type":"dropout","rate":0.1}]}
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is bit-exact.
//! An optional top-level `"loss"` entry records the objective the network was trained with
//! (see [`LossKind::to_json`]); readers that do not need it ignore it.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::layer::Layer;
use super::model::MlpModel;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::matrix::Matrix;

pub const MODEL_FILE_VERSION: u64 = 1;

pub fn to_json(model: &MlpModel) -> Value {
    let layers: Vec<Value> = model
        .layers()
        .iter()
        .map(|l| match l {
            Layer::Linear { w, b } => json!({
                "type": "linear",
                "w": w.row_iter().collect::<Vec<_>>(),
                "b": b.data(),
            }),
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => json!({
                "type": "batchnorm",
                "gamma": gamma.data(),
                "beta": beta.data(),
                "running_mean": running_mean.data(),
                "running_var": running_var.data(),
            }),
            Layer::Relu => json!({ "type": "relu" }),
            Layer::Dropout { rate } => json!({ "type": "dropout", "rate": rate }),
        })
        .collect();
    json!({
        "version": MODEL_FILE_VERSION,
        "input_dim": model.input_dim(),
        "output_dim": model.output_dim(),
        "layers": layers,
    })
}

pub fn to_string(model: &MlpModel) -> String {
    serde_json::to_string(&to_json(model)).expect("model JSON serialisation cannot fail")
}

pub fn from_str(text: &str) -> Result<MlpModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e))?;
    from_json(&value)
}

pub fn from_json(value: &Value) -> Result<MlpModel> {
    let root = object(value, "$")?;
    let version = field(root, "$", "version")?
        .as_u64()
        .ok_or_else(|| Error::parse("$.version", "expected an unsigned integer"))?;
    if version != MODEL_FILE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_FILE_VERSION,
        });
    }
    let input_dim = uint(field(root, "$", "input_dim")?, "$.input_dim")?;
    let output_dim = uint(field(root, "$", "output_dim")?, "$.output_dim")?;
    let layers_v = field(root, "$", "layers")?
        .as_array()
        .ok_or_else(|| Error::parse("$.layers", "expected an array"))?;
    let mut layers = Vec::with_capacity(layers_v.len());
    for (k, lv) in layers_v.iter().enumerate() {
        let path = format!("$.layers[{k}]");
        let obj = object(lv, &path)?;
        let kind = field(obj, &path, "type")?
            .as_str()
            .ok_or_else(|| Error::parse(format!("{path}.type"), "expected a string"))?;
        let layer = match kind {
            "linear" => {
                let w = matrix(field(obj, &path, "w")?, &format!("{path}.w"))?;
                let b = row(field(obj, &path, "b")?, &format!("{path}.b"))?;
                if b.cols() != w.rows() {
                    return Err(Error::parse(
                        format!("{path}.b"),
                        format!("expected {} entries, got {}", w.rows(), b.cols()),
                    ));
                }
                Layer::Linear { w, b }
            }
            "batchnorm" => {
                let gamma = row(field(obj, &path, "gamma")?, &format!("{path}.gamma"))?;
                let width = gamma.cols();
                let mut rest = Vec::new();
                for name in ["beta", "running_mean", "running_var"] {
                    let p = format!("{path}.{name}");
                    let m = row(field(obj, &path, name)?, &p)?;
                    if m.cols() != width {
                        return Err(Error::parse(
                            p,
                            format!("expected {width} entries, got {}", m.cols()),
                        ));
                    }
                    rest.push(m);
                }
                let running_var = rest.pop().expect("three entries");
                let running_mean = rest.pop().expect("three entries");
                let beta = rest.pop().expect("three entries");
                if running_var.data().iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::parse(
                        format!("{path}.running_var"),
                        "entries must be positive",
                    ));
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                }
            }
            "relu" => Layer::Relu,
            "dropout" => {
                let rate = field(obj, &path, "rate")?
                    .as_f64()
                    .ok_or_else(|| Error::parse(format!("{path}.rate"), "expected a number"))?;
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::parse(format!("{path}.rate"), "must lie in [0, 1)"));
                }
                Layer::Dropout { rate }
            }
            other => {
                return Err(Error::parse(
                    format!("{path}.type"),
                    format!("unknown layer type {other:?}"),
                ))
            }
        };
        layers.push(layer);
    }
    let model = MlpModel::from_layers(layers).map_err(|e| Error::parse("$.layers", e))?;
    if model.input_dim() != input_dim || model.output_dim() != output_dim {
        return Err(Error::parse(
            "$",
            format!(
                "declared dims {input_dim}->{output_dim} disagree with layers {}->{}",
                model.input_dim(),
                model.output_dim()
            ),
        ));
    }
    Ok(model)
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

/// Loads a model in evaluation mode.
pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

/// Saves `model` together with the loss that shapes its output.
pub fn save_model_with_loss(model: &MlpModel, loss: &LossKind, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut v = to_json(model);
    v["loss"] = loss.to_json();
    let text = serde_json::to_string(&v).expect("model JSON serialisation cannot fail");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a model and, when present, the loss it was trained with.
pub fn load_model_with_loss(path: impl AsRef<Path>) -> Result<(MlpModel, Option<LossKind>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::parse("$", e))?;
    let model = from_json(&value)?;
    let loss = match value.get("loss") {
        Some(v) => Some(LossKind::from_json(v)?),
        None => None,
    };
    Ok((model, loss))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::parse(path, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::parse(format!("{path}.{name}"), "missing field"))
}

fn uint(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::parse(path, "expected an unsigned integer"))
}

fn floats(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| Error::parse(format!("{path}[{i}]"), "expected a finite number"))
        })
        .collect()
}

fn row(v: &Value, path: &str) -> Result<Matrix> {
    let data = floats(v, path)?;
    Ok(Matrix::new(1, data.len(), data).expect("length matches"))
}

fn matrix(v: &Value, path: &str) -> Result<Matrix> {
    let rows_v = v
        .as_array()
        .ok_or_else(|| Error::parse(path, "expected an array of rows"))?;
    let rows = rows_v
        .iter()
        .enumerate()
        .map(|(i, r)| floats(r, &format!("{path}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows).map_err(|e| Error::parse(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_model, mlp_spec, Architecture, LayerSpec, Mode};
    use crate::rng;

    fn trained_like_model() -> MlpModel {
        let spec = mlp_spec(3, 2, &Architecture { hidden: vec![7, 5], ..Default::default() });
        let mut m = init_model(&spec, 21).unwrap();
        m.set_mode(Mode::Train);
        let x = Matrix::from_fn(9, 3, |i, j| ((i * 5 + j * 11) % 7) as f64 / 7.0);
        let mut r = rng::from_seed(1);
        m.forward(&x, Some(&mut r)).unwrap();
        m.set_mode(Mode::Eval);
        m
    }

    #[test]
    fn loss_entry_round_trips() {
        use crate::losses::{DirectionU, QuantileLevels};
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = init_model(&[LayerSpec::Linear { inputs: 2, outputs: 3 }], 1).unwrap();
        let losses = [
            LossKind::Composite(QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap()),
            LossKind::Pinball { tau: 0.3 },
            LossKind::Squared,
            LossKind::Geometric(DirectionU::new(vec![0.1, -0.2, 0.0]).unwrap()),
            LossKind::Marginal { tau: 0.7 },
        ];
        for loss in losses {
            save_model_with_loss(&m, &loss, &p).unwrap();
            let (back, l) = load_model_with_loss(&p).unwrap();
            assert_eq!(back.layers(), m.layers());
            assert_eq!(l, Some(loss));
            assert_eq!(load_model(&p).unwrap().layers(), m.layers());
        }
        save_model(&m, &p).unwrap();
        assert_eq!(load_model_with_loss(&p).unwrap().1, None);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = trained_like_model();
        let back = from_str(&to_string(&m)).unwrap();
        assert_eq!(m.layers(), back.layers());
        let x = Matrix::from_fn(4, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 2.0));
        assert_eq!(m.predict(&x).unwrap(), back.predict(&x).unwrap());
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let text = to_string(&trained_like_model());
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_str(cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let mut v = to_json(&trained_like_model());
        v["version"] = json!(2);
        assert!(matches!(
            from_json(&v),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn errors_carry_field_path() {
        let mut v = to_json(&trained_like_model());
        v["layers"][0]["w"][1][2] = json!("oops");
        match from_json(&v) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "$.layers[0].w[1][2]"),
            other => panic!("unexpected {other:?}"),
        }
        let mut v = to_json(&trained_like_model());
        v["layers"][1].as_object_mut().unwrap().remove("running_var");
        match from_json(&v) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "$.layers[1].running_var"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = trained_like_model();
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap().layers(), m.layers());
        assert!(matches!(
            load_model(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }
}
