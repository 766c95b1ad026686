//! Input preprocessors: pure text normalizations applied before matching.

/// Trims the ends and collapses every internal whitespace run to one space.
pub fn clean_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Decodes `&amp; &lt; &gt; &quot; &#39;` and numeric character references.
///
/// Malformed or unknown references are left verbatim. Decoding repeats until
/// the text no longer changes, so `&amp;lt;` ends up as `<` and the function
/// is idempotent.
pub fn unescape_html(text: &str) -> String {
    let mut current = decode_once(text);
    loop {
        let next = decode_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn decode_once(text: &str) -> String {
    if !text.contains('&') {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match decode_reference(tail) {
            Some((ch, consumed)) => {
                out.push(ch);
                rest = &tail[consumed..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// `tail` starts with `&`. Returns the decoded char and the byte length consumed.
fn decode_reference(tail: &str) -> Option<(char, usize)> {
    const NAMED: [(&str, char); 4] = [("&amp;", '&'), ("&lt;", '<'), ("&gt;", '>'), ("&quot;", '"')];
    for (entity, ch) in NAMED {
        if tail.starts_with(entity) {
            return Some((ch, entity.len()));
        }
    }

    let body = tail.strip_prefix("&#")?;
    let end = body.find(';')?;
    let digits = &body[..end];
    let code = if let Some(hex) = digits.strip_prefix('x').or_else(|| digits.strip_prefix('X')) {
        if hex.is_empty() || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        u32::from_str_radix(hex, 16).ok()?
    } else {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse::<u32>().ok()?
    };
    if code == 0 {
        return None;
    }
    let ch = char::from_u32(code)?;
    Some((ch, 2 + end + 1))
}

/// Full preprocessing chain used by the engine.
///
/// Whitespace is cleaned again after decoding because a numeric reference can
/// produce a tab or newline.
pub fn preprocess(raw: &str) -> String {
    clean_whitespace(&unescape_html(&clean_whitespace(raw)))
}
