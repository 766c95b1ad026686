use edubot_core::Corpus;

use crate::extract::ScrapeDocument;

pub const HEADING_PLACEHOLDER: &str = "{heading}";
pub const MAX_ANSWER_CHARS: usize = 2000;

pub fn default_templates() -> Vec<String> {
    vec!["What is {heading}?".to_owned(), "Tell me about {heading}".to_owned()]
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no question templates given")]
    NoTemplates,
    #[error("template {0:?} does not contain {HEADING_PLACEHOLDER}")]
    MissingPlaceholder(String),
}

pub fn validate_templates(templates: &[String]) -> Result<(), TemplateError> {
    if templates.is_empty() {
        return Err(TemplateError::NoTemplates);
    }
    match templates.iter().find(|t| !t.contains(HEADING_PLACEHOLDER)) {
        Some(bad) => Err(TemplateError::MissingPlaceholder(bad.clone())),
        None => Ok(()),
    }
}

/// Splits `body` into pieces of at most `max` chars, preferring to cut after
/// a sentence end (`.`, `!` or `?` followed by whitespace). A single sentence
/// longer than `max` is cut hard.
pub fn chunk_text(body: &str, max: usize) -> Vec<String> {
    assert!(max > 0);
    let mut sentences: Vec<&str> = Vec::new();
    let mut start = 0;
    let mut prev: Option<char> = None;
    for (i, c) in body.char_indices() {
        if c.is_whitespace() && matches!(prev, Some('.' | '!' | '?')) {
            sentences.push(&body[start..i]);
            start = i;
        }
        prev = Some(c);
    }
    sentences.push(&body[start..]);

    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut current_len = 0;
    for sentence in sentences {
        let sentence = sentence.trim();
        if sentence.is_empty() {
            continue;
        }
        let len = sentence.chars().count();
        let joined = if current.is_empty() { len } else { current_len + 1 + len };
        if joined <= max {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(sentence);
            current_len = joined;
            continue;
        }
        if !current.is_empty() {
            chunks.push(std::mem::take(&mut current));
        }
        if len <= max {
            current = sentence.to_owned();
            current_len = len;
        } else {
            let chars: Vec<char> = sentence.chars().collect();
            let mut pieces = chars.chunks(max).map(|p| p.iter().collect::<String>().trim().to_owned());
            let last = pieces.next_back().unwrap_or_default();
            chunks.extend(pieces.filter(|p| !p.is_empty()));
            current_len = last.chars().count();
            current = last;
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// One conversation `[question, answer]` per section, template and chunk.
/// The page title becomes the only category.
pub fn document_to_corpus(doc: &ScrapeDocument, templates: &[String]) -> Result<Corpus, TemplateError> {
    validate_templates(templates)?;
    let mut conversations = Vec::new();
    for section in &doc.sections {
        let chunks = chunk_text(&section.body, MAX_ANSWER_CHARS);
        for template in templates {
            let question = template.replace(HEADING_PLACEHOLDER, &section.heading);
            for chunk in &chunks {
                conversations.push(vec![question.clone(), chunk.clone()]);
            }
        }
    }
    Ok(Corpus {
        categories: vec![doc.title.clone()],
        conversations,
    })
}
