//! JSON checkpoints: model config plus named weight tensors.
//!
//! Values are written through serde_json, whose float formatting round-trips
//! `f64` exactly, so a save/load cycle restores bit-identical weights.

use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use super::tensor::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::ioutil;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SavedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CheckpointFile<C> {
    config: C,
    tensors: Vec<SavedTensor>,
}

pub fn save<C: Serialize>(path: &Path, config: &C, params: &ParamSet) -> Result<()> {
    let tensors = params
        .iter()
        .map(|p| SavedTensor {
            name: p.name.clone(),
            rows: p.value.rows,
            cols: p.value.cols,
            data: p.value.data.clone(),
        })
        .collect();
    let file = CheckpointFile { config, tensors };
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    ioutil::write_atomic(path, &bytes)
}

pub fn load<C: DeserializeOwned>(path: &Path) -> Result<(C, Vec<SavedTensor>)> {
    let text = ioutil::read_file(path)?;
    let file: CheckpointFile<C> = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Ok((file.config, file.tensors))
}

/// Overwrite an already-registered parameter set with saved values, matched
/// by name. Every parameter must be covered and shapes must agree.
pub fn restore(params: &mut ParamSet, tensors: &[SavedTensor]) -> Result<()> {
    for p in params.iter_mut() {
        let saved = tensors
            .iter()
            .find(|t| t.name == p.name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{}'", p.name)))?;
        if saved.rows != p.value.rows || saved.cols != p.value.cols {
            return Err(Error::Checkpoint(format!(
                "tensor '{}' has shape {}x{}, expected {}x{}",
                p.name, saved.rows, saved.cols, p.value.rows, p.value.cols
            )));
        }
        p.value = Tensor { rows: saved.rows, cols: saved.cols, data: saved.data.clone() };
        for g in p.grad.data.iter_mut() {
            *g = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::{Init, ParamId, ParamSet};
    use crate::rng::SeededRng;

    #[derive(Debug, PartialEq, serde::Serialize, serde::Deserialize)]
    struct DemoConfig {
        hidden: usize,
        lr: f64,
    }

    fn demo_params(seed: u64) -> ParamSet {
        let mut rng = SeededRng::new(seed);
        let mut params = ParamSet::new();
        params.register("enc.w", 3, 4, Init::Uniform(0.08), &mut rng);
        params.register("enc.b", 3, 1, Init::Const(1.0), &mut rng);
        params
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let params = demo_params(42);
        let config = DemoConfig { hidden: 3, lr: 0.01 };
        save(&path, &config, &params).unwrap();

        let (loaded_config, tensors) = load::<DemoConfig>(&path).unwrap();
        assert_eq!(loaded_config, config);
        let mut fresh = demo_params(999);
        assert_ne!(
            fresh.get(ParamId(0)).value.data,
            params.get(ParamId(0)).value.data
        );
        restore(&mut fresh, &tensors).unwrap();
        for (a, b) in fresh.iter().zip(params.iter()) {
            assert_eq!(a.value.data, b.value.data, "tensor {}", a.name);
        }
    }

    #[test]
    fn restore_rejects_missing_and_misshapen_tensors() {
        let params = demo_params(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save(&path, &DemoConfig { hidden: 3, lr: 0.01 }, &params).unwrap();
        let (_, mut tensors) = load::<DemoConfig>(&path).unwrap();

        let mut missing = demo_params(1);
        let removed = tensors.remove(1);
        assert!(restore(&mut missing, &tensors).is_err());

        tensors.push(SavedTensor { rows: 99, ..removed });
        let mut misshapen = demo_params(1);
        let err = restore(&mut misshapen, &tensors).unwrap_err();
        assert!(err.to_string().contains("shape"));
    }
}
