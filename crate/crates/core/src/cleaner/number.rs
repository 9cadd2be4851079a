//! Number and label normalization for semi-structured report cells.
//!
//! Accepted renderings:
//!
//! * ASCII, Persian (`۰`–`۹`) and Arabic-Indic (`٠`–`٩`) digits
//! * thousands separators `,` and `٬` (groups of three), decimal point `.` or `٫`
//! * negatives as `(500)`, `-500`, `−500` or `+500` for explicit positives
//! * a cell made only of dash glyphs (`-`, `‐`, `‑`, `‒`, `–`, `—`, `―`, `−`, `ـ`)
//!   means the value is missing
//!
//! Bidirectional control marks are stripped before parsing.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumberError {
    /// The cell explicitly marks the value as missing. Not zero.
    #[error("value marked missing")]
    Missing,
    #[error("unparseable number {0:?}")]
    Unparseable(String),
}

const DASHES: &[char] = &[
    '-', '\u{2010}', '\u{2011}', '\u{2012}', '\u{2013}', '\u{2014}', '\u{2015}', '\u{2212}',
    '\u{0640}',
];

fn is_format_control(c: char) -> bool {
    matches!(
        c,
        '\u{200B}'..='\u{200F}' | '\u{061C}' | '\u{202A}'..='\u{202E}' | '\u{2066}'..='\u{2069}' | '\u{FEFF}'
    )
}

fn ascii_digit(c: char) -> Option<char> {
    match c {
        '0'..='9' => Some(c),
        '\u{06F0}'..='\u{06F9}' => char::from_digit(c as u32 - 0x06F0, 10),
        '\u{0660}'..='\u{0669}' => char::from_digit(c as u32 - 0x0660, 10),
        _ => None,
    }
}

/// Parse a report cell into a finite number.
pub fn normalize_number(text: &str) -> Result<f64, NumberError> {
    let unparseable = || NumberError::Unparseable(text.to_string());
    let cleaned: String = text.chars().filter(|c| !is_format_control(*c)).collect();
    let cell = cleaned.trim();
    if cell.is_empty() {
        return Err(unparseable());
    }
    if cell.chars().all(|c| DASHES.contains(&c) || c.is_whitespace()) {
        return Err(NumberError::Missing);
    }

    let mut mapped = String::with_capacity(cell.len());
    for c in cell.chars() {
        let m = match c {
            '\u{066C}' => ',',
            '\u{066B}' => '.',
            '\u{2212}' => '-',
            other => ascii_digit(other).unwrap_or(other),
        };
        mapped.push(m);
    }

    let (negative, body) = if let Some(inner) = mapped
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
    {
        (true, inner.trim())
    } else if let Some(rest) = mapped.strip_prefix('-') {
        (true, rest)
    } else if let Some(rest) = mapped.strip_prefix('+') {
        (false, rest)
    } else {
        (false, mapped.as_str())
    };

    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits_only = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let mut canonical = String::with_capacity(body.len() + 1);
    if negative {
        canonical.push('-');
    }
    if int_part.contains(',') {
        let mut groups = int_part.split(',');
        let head = groups.next().unwrap_or_default();
        if !digits_only(head) || head.len() > 3 {
            return Err(unparseable());
        }
        canonical.push_str(head);
        for g in groups {
            if g.len() != 3 || !digits_only(g) {
                return Err(unparseable());
            }
            canonical.push_str(g);
        }
    } else if digits_only(int_part) {
        canonical.push_str(int_part);
    } else {
        return Err(unparseable());
    }
    if let Some(f) = frac_part {
        if !digits_only(f) {
            return Err(unparseable());
        }
        canonical.push('.');
        canonical.push_str(f);
    }
    let value: f64 = canonical.parse().map_err(|_| unparseable())?;
    if !value.is_finite() {
        return Err(unparseable());
    }
    Ok(value)
}

/// Normalize a row label for table lookup: strip bidi marks, unify Arabic and
/// Persian letter variants, treat ZWNJ as a space, collapse whitespace, and
/// lowercase. Trailing colons are dropped.
pub fn normalize_label(label: &str) -> String {
    let unified: String = label
        .chars()
        .filter_map(|c| match c {
            '\u{064A}' | '\u{0649}' => Some('\u{06CC}'),
            '\u{0643}' => Some('\u{06A9}'),
            '\u{200C}' => Some(' '),
            c if is_format_control(c) => None,
            c => Some(c),
        })
        .collect();
    let collapsed = unified.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches([':', '\u{061B}']).trim_end().to_lowercase()
}
