//! Prompt templates, stored byte-for-byte as raw text resources.

use std::borrow::Cow;
use std::fmt;

use crate::error::{AxeError, Result};

const PRUNER: &str = include_str!("../../templates/pruner.txt");
const SCHEMA_EXTRACTOR: &str = include_str!("../../templates/schema_extractor.txt");
const QA_EXTRACTOR: &str = include_str!("../../templates/qa_extractor.txt");

pub const QUERY_PLACEHOLDER: &str = "{query}";
pub const CONTENT_PLACEHOLDER: &str = "{content}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateName {
    Pruner,
    SchemaExtractor,
    QaExtractor,
}

impl TemplateName {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Pruner => "pruner",
            TemplateName::SchemaExtractor => "schema_extractor",
            TemplateName::QaExtractor => "qa_extractor",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: Cow<'static, str>,
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> PromptTemplate {
        let body = match name {
            TemplateName::Pruner => PRUNER,
            TemplateName::SchemaExtractor => SCHEMA_EXTRACTOR,
            TemplateName::QaExtractor => QA_EXTRACTOR,
        };
        PromptTemplate {
            name,
            body: Cow::Borrowed(body),
        }
    }

    pub fn pruner() -> PromptTemplate {
        Self::builtin(TemplateName::Pruner)
    }

    pub fn schema_extractor() -> PromptTemplate {
        Self::builtin(TemplateName::SchemaExtractor)
    }

    pub fn qa_extractor() -> PromptTemplate {
        Self::builtin(TemplateName::QaExtractor)
    }

    pub fn custom(name: TemplateName, body: impl Into<String>) -> PromptTemplate {
        PromptTemplate {
            name,
            body: Cow::Owned(body.into()),
        }
    }

    /// Substitutes the first `{query}` and `{content}` verbatim in a single
    /// pass, so placeholder-looking text inside either value is left alone.
    pub fn render(&self, query: &str, content: &str) -> Result<String> {
        if query.trim().is_empty() {
            return Err(AxeError::EmptyQuery);
        }
        let missing = |placeholder| AxeError::MissingPlaceholder {
            template: self.name.as_str(),
            placeholder,
        };
        let q = self.body.find(QUERY_PLACEHOLDER).ok_or_else(|| missing(QUERY_PLACEHOLDER))?;
        let c = self
            .body
            .find(CONTENT_PLACEHOLDER)
            .ok_or_else(|| missing(CONTENT_PLACEHOLDER))?;
        let mut parts = [(q, QUERY_PLACEHOLDER, query), (c, CONTENT_PLACEHOLDER, content)];
        parts.sort_by_key(|p| p.0);
        let mut out = String::with_capacity(self.body.len() + query.len() + content.len());
        let mut pos = 0;
        for (at, placeholder, value) in parts {
            out.push_str(&self.body[pos..at]);
            out.push_str(value);
            pos = at + placeholder.len();
        }
        out.push_str(&self.body[pos..]);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn sha(s: &str) -> String {
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    #[test]
    fn stored_templates_match_golden_hashes() {
        assert_eq!(
            sha(PRUNER),
            "6de5cbe13a911607dd0570014e5f5b4c0b4d0ee9fafba3041c4578fcdf0564a4"
        );
        assert_eq!(
            sha(SCHEMA_EXTRACTOR),
            "9073ec1b57704f02eabaaf2e13ad081dcf189515fc920bc1be09d8a41fa77431"
        );
        assert_eq!(
            sha(QA_EXTRACTOR),
            "a775d1430e3979bda2d0f906d673fa843bfad00394c37a1cf4717cea7adad651"
        );
    }

    #[test]
    fn pruner_render() {
        let out = PromptTemplate::pruner().render("Price", "0: <p>$5</p>").unwrap();
        assert!(out.starts_with("You are a Smart and Clever Context Selector"));
        assert!(out.contains("Query/Schema:\nPrice\n"));
        assert!(out.contains("**Content:**\n0: <p>$5</p>\n"));
        assert_eq!(out.len(), PRUNER.len() - 16 + 5 + 12);
    }

    #[test]
    fn empty_query_rejected() {
        assert!(matches!(
            PromptTemplate::pruner().render(" ", "x"),
            Err(AxeError::EmptyQuery)
        ));
    }

    #[test]
    fn missing_placeholder() {
        let t = PromptTemplate::custom(TemplateName::Pruner, "only {query}");
        assert!(matches!(
            t.render("q", "c"),
            Err(AxeError::MissingPlaceholder { placeholder: "{content}", .. })
        ));
    }

    #[test]
    fn placeholders_inside_values_untouched() {
        let t = PromptTemplate::custom(TemplateName::QaExtractor, "C={content};Q={query}");
        assert_eq!(t.render("{content}", "{query}").unwrap(), "C={query};Q={content}");
    }

    #[test]
    fn double_braces_kept_verbatim() {
        let out = PromptTemplate::qa_extractor().render("q", "c").unwrap();
        assert!(out.ends_with(r#"{{"answer": "The extracted text or synthesized answer"}}"#));
    }
}
