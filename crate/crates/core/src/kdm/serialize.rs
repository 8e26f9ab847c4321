use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::KdmModel;
use super::train::TrainConfig;

/// Version written into every model document. Readers reject anything
/// else.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk form of a model. Weights are stored post-softmax so the
/// document stands on its own; loading takes their logs as the logits,
/// which evaluates to the same mixture. Components are in standardized
/// coordinates, matching `standardize_mean` and `standardize_scale`.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    dim: usize,
    column_names: Vec<String>,
    standardize_mean: Vec<f64>,
    standardize_scale: Vec<f64>,
    sigma: f64,
    weights: Vec<f64>,
    components: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_log_likelihood: Option<f64>,
}

impl KdmModel {
    pub fn to_json_string(&self) -> Result<String> {
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            dim: self.dim,
            column_names: self.column_names.clone(),
            standardize_mean: self.standardize_mean.clone(),
            standardize_scale: self.standardize_scale.clone(),
            sigma: self.sigma(),
            weights: self.weights(),
            components: self.components.clone(),
            train_config: self.train_config.clone(),
            final_log_likelihood: self.final_log_likelihood,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<KdmModel> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model document version {}, this build reads version {}",
                doc.version, MODEL_FORMAT_VERSION
            )));
        }
        let mut model = KdmModel::from_parts(
            doc.dim,
            doc.components,
            &doc.weights,
            doc.sigma,
            doc.standardize_mean,
            doc.standardize_scale,
            doc.column_names,
        )
        .map_err(|e| Error::Schema(format!("invalid model document: {e}")))?;
        model.train_config = doc.train_config;
        model.final_log_likelihood = doc.final_log_likelihood;
        Ok(model)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<KdmModel> {
        let text = match fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!(
                    "model not found at {}",
                    path.display()
                )));
            }
            Err(e) => return Err(e.into()),
        };
        KdmModel::from_json_str(&text)
    }
}
