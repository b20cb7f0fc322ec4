use std::path::{Path, PathBuf};

use deixis_core::gesture::GestureModels;
use deixis_core::planner::{backend_registry, CompletionBackend, BACKEND_URL_ENV};
use deixis_core::registry::Registry;
use deixis_core::scene::Ontology;
use serde::Deserialize;

use crate::{CliError, GlobalOpts};

pub const DEFAULT_NOISE: f64 = 0.003;

/// Settings shared by every subcommand: a config file overlaid with flags.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    #[serde(default)]
    pub transcripts: Option<PathBuf>,
    #[serde(default)]
    pub models: Option<PathBuf>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Config {
    /// Reads `--config` if given, applies the flags and checks the result.
    pub fn resolve(g: &GlobalOpts) -> Result<Self, CliError> {
        let mut c = match &g.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
                let mut c: Config = serde_json::from_str(&text)
                    .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
                // Paths in a config file are relative to the file.
                let base = path.parent().unwrap_or(Path::new("."));
                for p in [
                    &mut c.ontology,
                    &mut c.transcripts,
                    &mut c.models,
                    &mut c.out,
                ]
                .into_iter()
                .flatten()
                {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                c
            }
            None => Config::default(),
        };
        macro_rules! overlay {
            ($($f:ident <- $g:ident),*) => {$( if g.$g.is_some() { c.$f = g.$g.clone(); } )*};
        }
        overlay!(ontology <- ontology, transcripts <- transcripts, models <- models, backend <- backend, seed <- seed, noise_sigma <- noise, out <- out);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, p) in [("ontology", &self.ontology), ("models", &self.models)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::Domain(format!(
                        "{name} file not found: {}",
                        p.display()
                    )));
                }
            }
        }
        if let Some(noise) = self.noise_sigma {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--noise must be a non-negative number, got {noise}"
                )));
            }
        }
        match self.backend.as_deref() {
            None | Some("rule") => {}
            Some("replay") => match &self.transcripts {
                Some(d) if d.is_dir() => {}
                Some(d) => {
                    return Err(CliError::Domain(format!(
                        "transcript store not found: {}",
                        d.display()
                    )))
                }
                None => return Err(CliError::Usage("backend replay needs --transcripts".into())),
            },
            Some("remote") => {
                if remote_url().is_none() {
                    return Err(CliError::Domain(format!(
                        "backend remote needs {BACKEND_URL_ENV}"
                    )));
                }
            }
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "--backend: unknown backend '{other}' (available: remote, replay, rule)"
                )))
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn noise(&self) -> f64 {
        self.noise_sigma.unwrap_or(DEFAULT_NOISE)
    }

    pub fn backend_name(&self) -> &str {
        self.backend.as_deref().unwrap_or("rule")
    }

    pub fn ontology(&self) -> Result<Ontology, CliError> {
        match &self.ontology {
            Some(p) => {
                Ontology::load(p).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))
            }
            None => Ok(Ontology::builtin()),
        }
    }

    pub fn gesture_models(&self) -> Result<Option<GestureModels>, CliError> {
        self.models
            .as_ref()
            .map(|p| {
                GestureModels::load(p)
                    .map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))
            })
            .transpose()
    }

    pub fn registry(&self) -> Result<Registry<dyn CompletionBackend>, CliError> {
        let store = self.transcripts.as_deref().filter(|d| d.is_dir());
        backend_registry(store, remote_url().as_deref()).map_err(CliError::domain)
    }

    pub fn backend(&self) -> Result<std::sync::Arc<dyn CompletionBackend>, CliError> {
        self.registry()?
            .get(self.backend_name())
            .map_err(CliError::domain)
    }
}

pub fn remote_url() -> Option<String> {
    std::env::var(BACKEND_URL_ENV)
        .ok()
        .map(|u| u.trim().to_owned())
        .filter(|u| !u.is_empty())
}
