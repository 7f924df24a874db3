//! Answer and question normalization shared by generation and judging.

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

/// Lowercase, punctuation replaced by spaces, whitespace collapsed.
pub fn normalize_answer(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Key used to detect exact duplicate questions: case, whitespace and
/// trailing punctuation are ignored.
pub fn normalize_question(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .to_string()
}

/// The leading yes/no token of an answer, if any.
pub fn parse_binary(text: &str) -> Option<bool> {
    match normalize_answer(text).split(' ').next()? {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// First number in `text`: a digit string (optionally signed or decimal) or
/// an English number word from zero to twenty.
pub fn parse_number(text: &str) -> Option<f64> {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().find_map(|tok| {
        let tok = tok.trim_end_matches(['.', '-']).trim_start_matches('.');
        let digit = |s: &str| s.starts_with(|c: char| c.is_ascii_digit());
        let (negative, body) = match tok.strip_prefix('-') {
            Some(rest) if digit(rest) => (true, rest),
            _ => (false, tok),
        };
        if digit(body) {
            let v: f64 = body.parse().ok().filter(|v: &f64| v.is_finite())?;
            Some(if negative { -v } else { v })
        } else {
            NUMBER_WORDS.iter().position(|w| *w == body).map(|n| n as f64)
        }
    })
}

/// Canonical text of a parsed count: integral values without a fraction.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
