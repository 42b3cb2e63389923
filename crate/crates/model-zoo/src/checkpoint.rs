//! Checkpoints: a JSON config manifest plus the flat parameter vector as
//! little-endian `f64` bits, so restored models are bit-identical.

use std::fs;
use std::path::Path;

use crate::{Forecaster, ModelConfig, ModelError};

const MAGIC: &[u8; 4] = b"NEMW";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &Forecaster, dir: &Path) -> Result<(), ModelError> {
    fs::create_dir_all(dir)?;
    let config = serde_json::to_string_pretty(&model.config)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    fs::write(dir.join("config.json"), config)?;
    let mut bytes = Vec::with_capacity(8 + model.params.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    for &v in model.params.data() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fs::write(dir.join("params.bin"), bytes)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Forecaster, ModelError> {
    let config: ModelConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let bytes = fs::read(dir.join("params.bin"))?;
    if bytes.len() < 8 || &bytes[0..4] != MAGIC {
        return Err(ModelError::Checkpoint("bad parameter file header".into()));
    }
    let mut model = Forecaster::build(config, 0)?;
    let n = (bytes.len() - 8) / 8;
    if n != model.params.len() {
        return Err(ModelError::Checkpoint(format!(
            "parameter count mismatch: file {n}, architecture {}",
            model.params.len()
        )));
    }
    let values: Vec<f64> = (0..n)
        .map(|i| {
            f64::from_bits(u64::from_le_bytes(
                bytes[8 + i * 8..16 + i * 8].try_into().unwrap(),
            ))
        })
        .collect();
    model.params.restore(&values);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ModelFamily;
    use ndarray::Array3;

    #[test]
    fn round_trip_restores_identical_forecasts() {
        let cfg = crate::ModelConfig::new(ModelFamily::DLinear, 1, 1)
            .with_setting(48, 8)
            .with_features(1);
        let model = Forecaster::build(cfg, 9).unwrap();
        let dir = std::env::temp_dir().join(format!("nembench-ckpt-{}", std::process::id()));
        save_checkpoint(&model, &dir).unwrap();
        let restored = load_checkpoint(&dir).unwrap();
        let input = Array3::from_shape_fn((2, 48, 1), |(b, t, _)| (b + t) as f64 * 0.01);
        let a = model.forecast(&input).unwrap();
        let b = restored.forecast(&input).unwrap();
        assert_eq!(a, b);
        fs::remove_dir_all(dir).ok();
    }
}
