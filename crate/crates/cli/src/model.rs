//! Fitted model files: TOML with the sample file, its size, every model
//! parameter and the fit diagnostics. Loading refits nothing; it rebuilds
//! the precision structure at the stored parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sli::{FitDiagnostics, FittedModel, SliParams};

use crate::config::{base_dir, DataSection};
use crate::error::{invalid, CliError, CliResult};
use crate::io::read_samples;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_samples: usize,
    pub nll: f64,
    pub data: DataSection,
    pub params: SliParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

impl ModelFile {
    pub fn from_model(model: &FittedModel, data: DataSection) -> Self {
        ModelFile { n_samples: model.data.len(), nll: model.nll, data, params: model.params.clone(), diagnostics: model.diagnostics.clone() }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = toml::to_string_pretty(self).map_err(|e| CliError::compute(format!("cannot serialize model: {e}")))?;
        std::fs::write(path, text).map_err(|e| CliError::compute(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut m: ModelFile = toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        m.data.path = std::path::absolute(base_dir(path).join(&m.data.path))
            .map_err(|e| CliError::usage(format!("cannot resolve {}: {e}", m.data.path.display())))?;
        m.params.validate(m.data.dimension).map_err(invalid("model parameters"))?;
        Ok(m)
    }

    /// Reads the samples and rebuilds the model at the stored parameters.
    pub fn load(&self) -> CliResult<FittedModel> {
        let data = read_samples(&self.data.path, self.data.dimension)?;
        if data.len() != self.n_samples {
            return Err(CliError::usage(format!(
                "{} has {} samples but the model was fitted to {}",
                self.data.path.display(),
                data.len(),
                self.n_samples
            )));
        }
        let mut model = FittedModel::from_params(data, self.params.clone())?;
        model.diagnostics = self.diagnostics.clone();
        Ok(model)
    }
}
