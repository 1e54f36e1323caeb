//! Small text helpers shared by ingestion and planning.

/// Lowercase ASCII-alphanumeric runs joined by `-`; used for derived ids.
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for part in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|p| !p.is_empty())
    {
        if !out.is_empty() {
            out.push('-');
        }
        out.push_str(&part.to_lowercase());
    }
    out
}

/// Profile key as used in placeholders: `Usual Bedtime` -> `usual_bedtime`.
pub fn normalize_key(key: &str) -> String {
    slug(key).replace('-', "_")
}
