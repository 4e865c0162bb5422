use crate::corpus::Document;

use super::{HitCountProvider, NgdError};

/// Hit counts over an in-memory corpus: Λ is the number of documents whose
/// normalized text contains every term as a case-folded substring, and Υ is
/// the document count.
#[derive(Debug, Clone)]
pub struct OfflineProvider {
    id: String,
    texts: Vec<String>,
}

impl OfflineProvider {
    pub fn new(docs: &[Document]) -> Result<Self, NgdError> {
        if docs.is_empty() {
            return Err(NgdError::EmptyCorpus);
        }
        Ok(Self {
            id: "offline".into(),
            texts: docs
                .iter()
                .map(|d| String::from_utf8_lossy(&d.normalized_bytes).to_lowercase())
                .collect(),
        })
    }
}

impl HitCountProvider for OfflineProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError> {
        if terms.is_empty() {
            return Err(NgdError::EmptyTerms);
        }
        let folded: Vec<String> = terms.iter().map(|t| t.to_lowercase()).collect();
        Ok(self
            .texts
            .iter()
            .filter(|text| folded.iter().all(|t| text.contains(t.as_str())))
            .count() as u64)
    }

    fn total(&self) -> Result<u64, NgdError> {
        Ok(self.texts.len() as u64)
    }
}
