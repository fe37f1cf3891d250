//! Canonical answer extraction.

/// Pull the final answer out of raw executor output and normalize it.
///
/// A JSON object carrying a `final_answer` key, either as the whole output
/// or on one line of it, takes precedence; otherwise the whole text is
/// normalized.
pub fn extract_and_normalize(raw: &str) -> String {
    match structured_answer(raw) {
        Some(ans) => normalize_answer(&ans),
        None => normalize_answer(raw),
    }
}

fn structured_answer(raw: &str) -> Option<String> {
    if !raw.contains("final_answer") {
        return None;
    }
    let from_value = |v: serde_json::Value| -> Option<String> {
        match v.get("final_answer")? {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Null => Some(String::new()),
            other => Some(other.to_string()),
        }
    };
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(raw.trim()) {
        if let Some(a) = from_value(v) {
            return Some(a);
        }
    }
    raw.lines()
        .map(str::trim)
        .filter(|l| l.contains("final_answer"))
        .find_map(|l| serde_json::from_str::<serde_json::Value>(l).ok().and_then(from_value))
}

/// Trim, lowercase, collapse whitespace, drop trailing periods, then
/// canonicalize plain decimal numbers.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    let stripped = collapsed.trim_end_matches(['.', ' ']);
    canonical_number(stripped).unwrap_or_else(|| stripped.to_string())
}

/// `[+-]digits[.digits]` with leading zeros, a `+` sign and trailing
/// fractional zeros removed; `-0` becomes `0`.
fn canonical_number(s: &str) -> Option<String> {
    let (neg, body) = match s.as_bytes().first()? {
        b'+' => (false, &s[1..]),
        b'-' => (true, &s[1..]),
        _ => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || (int.is_empty() && frac.is_none_or(str::is_empty)) {
        return None;
    }
    if let Some(f) = frac {
        if !all_digits(f) {
            return None;
        }
    }
    let int = int.trim_start_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let frac = frac.map(|f| f.trim_end_matches('0')).unwrap_or("");
    let mut out = String::new();
    let zero = int == "0" && frac.is_empty();
    if neg && !zero {
        out.push('-');
    }
    out.push_str(int);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    Some(out)
}
