use std::collections::BTreeSet;
use std::sync::Arc;

use super::backend::CompletionBackend;
use super::prompt::Prompt;
use crate::scene::{ObjectEntry, SceneError, SemanticFilter};

/// Semantic filter that asks a completion backend which scene labels match.
/// The answer must be a comma-separated subset of the scene's labels.
pub struct CompletionFilter {
    backend: Arc<dyn CompletionBackend>,
}

impl CompletionFilter {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self { backend }
    }

    pub fn prompt(target: &str, labels: &BTreeSet<&str>) -> Prompt {
        let vocab: Vec<&str> = labels.iter().copied().collect();
        Prompt::raw(
            "# List the object labels that can be called the given name.\n# Answer with a comma-separated subset of the labels, or an empty line.".to_owned(),
            format!("# Labels: {}\n# Name: {target}", vocab.join(", ")),
        )
    }
}

impl SemanticFilter for CompletionFilter {
    fn name(&self) -> &str {
        "completion"
    }

    fn filter(
        &self,
        target: &str,
        objects: &[ObjectEntry],
    ) -> Result<Vec<ObjectEntry>, SceneError> {
        let labels: BTreeSet<&str> = objects.iter().map(|o| o.label.as_str()).collect();
        let reject = |message: String| SceneError::FilterRejected {
            filter: "completion".into(),
            message,
        };
        let text = self
            .backend
            .complete(&Self::prompt(target, &labels))
            .map_err(|e| reject(e.to_string()))?;
        let first = text.lines().next().unwrap_or("");
        let mut chosen = BTreeSet::new();
        for item in first.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if !labels.contains(item) {
                return Err(reject(format!(
                    "answer names '{item}', which is not a scene label"
                )));
            }
            chosen.insert(item);
        }
        Ok(objects
            .iter()
            .filter(|o| chosen.contains(o.label.as_str()))
            .cloned()
            .collect())
    }
}
