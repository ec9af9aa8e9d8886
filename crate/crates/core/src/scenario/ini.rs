use super::Issue;

/// One `key = value` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Split INI text into entries. Keys before the first section header,
/// malformed lines and repeated keys are reported; parsing continues after
/// each problem.
pub fn parse_ini(src: &str) -> (Vec<Entry>, Vec<Issue>) {
    let mut entries: Vec<Entry> = Vec::new();
    let mut issues = Vec::new();
    let mut section: Option<String> = None;
    for (n, raw) in src.lines().enumerate() {
        let line = n + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with(';') {
            continue;
        }
        if let Some(rest) = text.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = Some(name.trim().to_string()),
                _ => issues.push(Issue::at(line, format!("malformed section header `{text}`"))),
            }
            continue;
        }
        let Some((key, value)) = text.split_once('=') else {
            issues.push(Issue::at(line, format!("expected `key = value`, got `{text}`")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            issues.push(Issue::at(line, "empty key"));
            continue;
        }
        let Some(sec) = &section else {
            issues.push(Issue::at(line, format!("key `{key}` appears before any [section]")));
            continue;
        };
        if let Some(first) = entries.iter().find(|e| e.section == *sec && e.key == key) {
            issues.push(Issue::at(line, format!("duplicate key `{key}` in [{sec}] (first on line {})", first.line)));
            continue;
        }
        entries.push(Entry { section: sec.clone(), key: key.to_string(), value: value.to_string(), line });
    }
    (entries, issues)
}
