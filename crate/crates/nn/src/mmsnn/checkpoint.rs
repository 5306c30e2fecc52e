use std::path::Path;

use physiogait_core::container::{Block, BlockData, Container};
use physiogait_core::Rng;
use serde_json::json;

use super::config::ExperimentConfig;
use super::model::Mmsnn;
use crate::autodiff::layers::Layer;
use crate::autodiff::Scalar;
use crate::error::{Error, Result};

pub const CHECKPOINT_KIND: &str = "checkpoint";

impl<T: Scalar> Mmsnn<T> {
    /// Parameters, batch-norm running statistics and the head as `f32`
    /// blocks in declaration order; sequence statistics as `f64` blocks.
    pub fn to_container(&self) -> Container {
        let to32 = |v: &[T]| v.iter().map(|x| x.to_f64_lossy() as f32).collect::<Vec<f32>>();
        let mut blocks = Vec::new();
        let mut encoders_meta = Vec::new();
        for (e, enc) in self.encoders().iter().enumerate() {
            let mut shapes = Vec::new();
            for (l, layer) in enc.net.layers().iter().enumerate() {
                for p in layer.params() {
                    let name = format!("e{e}.l{l}.{}", p.name);
                    shapes.push(json!([name, p.shape]));
                    blocks.push(Block::f32(name, to32(&p.value)));
                }
                if let Layer::BatchNorm(bn) = layer {
                    blocks.push(Block::f32(format!("e{e}.l{l}.running_mean"), to32(&bn.running_mean)));
                    blocks.push(Block::f32(format!("e{e}.l{l}.running_var"), to32(&bn.running_var)));
                }
            }
            if let Some((mean, std)) = &enc.norm {
                blocks.push(Block::f64(format!("e{e}.norm_mean"), mean.clone()));
                blocks.push(Block::f64(format!("e{e}.norm_std"), std.clone()));
            }
            encoders_meta.push(json!({
                "encoder": enc.config.to_string(),
                "input_shape": enc.net.input_shape(),
                "layers": enc.net.specs(),
                "params": shapes,
            }));
        }
        blocks.push(Block::f32("head", to32(&self.head.value)));
        let meta = json!({
            "config": self.config(),
            "config_hash": self.config().hash(),
            "seed": self.config().seed,
            "n_classes": self.n_classes(),
            "encoders": encoders_meta,
        });
        let mut c = Container::new(CHECKPOINT_KIND, meta);
        blocks.into_iter().for_each(|b| c.push(b));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("expected a {CHECKPOINT_KIND:?} container, found {:?}", c.kind)));
        }
        let config: ExperimentConfig = serde_json::from_value(c.meta["config"].clone())?;
        let n_classes = c.meta["n_classes"].as_u64().ok_or_else(|| Error::Checkpoint("missing n_classes".into()))? as usize;
        let mut model = Self::new(config, n_classes, &mut Rng::new(0))?;
        let load = |name: &str, dst: &mut [T]| -> Result<()> {
            let data = c.block(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
            if data.len() != dst.len() {
                return Err(Error::Checkpoint(format!("block {name:?} holds {} values, expected {}", data.len(), dst.len())));
            }
            dst.iter_mut().zip(data.to_f64()).for_each(|(d, v)| *d = T::of(v));
            Ok(())
        };
        for (e, enc) in model.encoders_mut().iter_mut().enumerate() {
            for (l, layer) in enc.net.layers_mut().iter_mut().enumerate() {
                for p in layer.params_mut() {
                    load(&format!("e{e}.l{l}.{}", p.name), &mut p.value)?;
                }
                if let Layer::BatchNorm(bn) = layer {
                    load(&format!("e{e}.l{l}.running_mean"), &mut bn.running_mean)?;
                    load(&format!("e{e}.l{l}.running_var"), &mut bn.running_var)?;
                }
            }
            if let (Ok(BlockData::F64(mean)), Ok(BlockData::F64(std))) =
                (c.block(&format!("e{e}.norm_mean")), c.block(&format!("e{e}.norm_std")))
            {
                enc.norm = Some((mean.clone(), std.clone()));
            }
        }
        load("head", &mut model.head.value)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.to_container().write(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}
