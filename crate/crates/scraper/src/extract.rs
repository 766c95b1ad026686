//! Reduces an HTML page to a title and heading-delimited text sections.

use edubot_core::{clean_whitespace, Timestamp};
use scraper::{ElementRef, Html, Node, Selector};
use serde::Serialize;
use url::Url;

/// Elements whose content never counts as page text.
const SKIPPED: &[&str] = &[
    "script", "style", "nav", "header", "footer", "noscript", "template", "svg",
];

/// Elements that separate words. Everything else is treated as inline.
const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "caption", "dd", "details", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "form", "h4", "h5", "h6", "hr", "li", "main", "ol", "p", "pre", "section",
    "summary", "table", "td", "th", "tr", "ul",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScrapeDocument {
    pub url: String,
    pub title: String,
    pub sections: Vec<Section>,
    pub fetched_at: Timestamp,
}

impl PartialEq for ScrapeDocument {
    /// Compares content only; `fetched_at` is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.url == other.url && self.title == other.title && self.sections == other.sections
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("page has no extractable text")]
    EmptyDocument,
}

struct Draft {
    heading: Option<String>,
    text: String,
}

#[derive(Default)]
struct Walker {
    title: Option<String>,
    first_h1: Option<String>,
    finished: Vec<Draft>,
    current: Option<Draft>,
}

impl Walker {
    fn current(&mut self) -> &mut Draft {
        self.current.get_or_insert_with(|| Draft {
            heading: None,
            text: String::new(),
        })
    }

    fn push_text(&mut self, text: &str) {
        self.current().text.push_str(text);
    }

    fn separate(&mut self) {
        self.current().text.push(' ');
    }

    fn start_section(&mut self, heading: String) {
        if let Some(done) = self.current.take() {
            self.finished.push(done);
        }
        self.current = Some(Draft {
            heading: Some(heading),
            text: String::new(),
        });
    }

    fn walk(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        match node.value() {
            Node::Text(text) => self.push_text(text),
            Node::Element(element) => {
                let name = element.name();
                if SKIPPED.contains(&name) {
                    return;
                }
                let el = ElementRef::wrap(node).expect("element node");
                match name {
                    "title" => {
                        if self.title.is_none() {
                            let title = visible_text(el);
                            if !title.is_empty() {
                                self.title = Some(title);
                            }
                        }
                    }
                    "h1" | "h2" | "h3" => {
                        let heading = visible_text(el);
                        if heading.is_empty() {
                            return;
                        }
                        if name == "h1" && self.first_h1.is_none() {
                            self.first_h1 = Some(heading.clone());
                        }
                        self.start_section(heading);
                    }
                    _ => {
                        let block = BLOCKS.contains(&name);
                        if block {
                            self.separate();
                        }
                        for child in node.children() {
                            self.walk(child);
                        }
                        if block {
                            self.separate();
                        }
                    }
                }
            }
            _ => {
                for child in node.children() {
                    self.walk(child);
                }
            }
        }
    }
}

/// Cleaned text of an element, ignoring skipped descendants.
fn visible_text(el: ElementRef<'_>) -> String {
    fn collect(node: ego_tree::NodeRef<'_, Node>, out: &mut String) {
        match node.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) if SKIPPED.contains(&e.name()) => {}
            Node::Element(e) => {
                let block = e.name() == "br" || BLOCKS.contains(&e.name());
                if block {
                    out.push(' ');
                }
                for child in node.children() {
                    collect(child, out);
                }
                if block {
                    out.push(' ');
                }
            }
            _ => {}
        }
    }
    let mut out = String::new();
    collect(*el, &mut out);
    defang(&clean_whitespace(&out))
}

/// Breaks up any `<` directly followed by a letter so that decoded entities
/// such as `&lt;b&gt;` can never read as a tag.
fn defang(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '<' && chars.peek().is_some_and(|n| n.is_alphabetic()) {
            out.push(' ');
        }
    }
    out
}

/// Extracts title and sections from tag-soup HTML.
///
/// The title is `<title>`, else the first `h1`, else the URL. `h1`-`h3`
/// start new sections; text before the first heading forms a section under
/// the page title. Sections without body text are dropped.
pub fn extract_document(html: &[u8], url: &Url) -> Result<ScrapeDocument, ExtractError> {
    let source = String::from_utf8_lossy(html);
    let parsed = Html::parse_document(&source);

    let mut walker = Walker::default();
    walker.walk(parsed.tree.root());
    if let Some(last) = walker.current.take() {
        walker.finished.push(last);
    }

    let title = walker
        .title
        .or(walker.first_h1)
        .unwrap_or_else(|| url.to_string());
    let sections: Vec<Section> = walker
        .finished
        .into_iter()
        .filter_map(|draft| {
            let body = defang(&clean_whitespace(&draft.text));
            if body.is_empty() {
                return None;
            }
            Some(Section {
                heading: draft.heading.unwrap_or_else(|| title.clone()),
                body,
            })
        })
        .collect();
    if sections.is_empty() {
        return Err(ExtractError::EmptyDocument);
    }
    Ok(ScrapeDocument {
        url: url.to_string(),
        title,
        sections,
        fetched_at: Timestamp::now(),
    })
}

/// Distinct same-origin `http(s)` links in document order, without fragments.
pub fn same_origin_links(html: &[u8], base: &Url) -> Vec<Url> {
    let source = String::from_utf8_lossy(html);
    let parsed = Html::parse_document(&source);
    let anchors = Selector::parse("a[href]").expect("static selector");
    let mut links: Vec<Url> = Vec::new();
    for a in parsed.select(&anchors) {
        let Some(href) = a.value().attr("href") else { continue };
        let Ok(mut link) = base.join(href.trim()) else { continue };
        link.set_fragment(None);
        if matches!(link.scheme(), "http" | "https") && link.origin() == base.origin() && !links.contains(&link) {
            links.push(link);
        }
    }
    links
}
