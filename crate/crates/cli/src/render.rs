//! Number formatting and table rendering for reports.

/// Rounds `v` to `decimals` places, half to even, and formats it.
///
/// Rounding works on the shortest decimal representation that round-trips
/// to `v`, so a value written as 0.2745 rounds like the decimal 0.2745
/// rather than like its binary approximation.
pub fn fixed(v: f64, decimals: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let repr = format!("{}", v.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().chain(frac_part.bytes()).map(|b| b - b'0').collect();
    let int_len = int_part.len();
    let keep = int_len + decimals;
    if digits.len() > keep {
        let rest = &digits[keep..];
        let first = rest[0];
        let tail_nonzero = rest[1..].iter().any(|&d| d != 0);
        let last_kept_odd = keep > 0 && digits[keep - 1] % 2 == 1;
        let round_up = first > 5 || (first == 5 && (tail_nonzero || last_kept_odd));
        digits.truncate(keep);
        if round_up {
            let mut i = keep;
            loop {
                if i == 0 {
                    digits.insert(0, 1);
                    break;
                }
                i -= 1;
                if digits[i] == 9 {
                    digits[i] = 0;
                } else {
                    digits[i] += 1;
                    break;
                }
            }
        }
    } else {
        digits.resize(keep, 0);
    }
    let int_digits = digits.len() - decimals;
    let mut out = String::new();
    let all_zero = digits.iter().all(|&d| d == 0);
    if v.is_sign_negative() && !all_zero {
        out.push('-');
    }
    let int_str: String = digits[..int_digits].iter().map(|d| char::from(b'0' + d)).collect();
    out.push_str(if int_str.is_empty() { "0" } else { &int_str });
    if decimals > 0 {
        out.push('.');
        out.extend(digits[int_digits..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Metric cell: three decimals.
pub fn metric(v: f64) -> String {
    fixed(v, 3)
}

/// Signed percentage with two decimals, e.g. `-5.15%` or `+7.69%`.
pub fn percent(v: f64) -> String {
    let s = fixed(v, 2);
    if s.starts_with('-') || s.chars().all(|c| c == '0' || c == '.') {
        format!("{s}%")
    } else {
        format!("+{s}%")
    }
}

/// Pipe table with a header separator row.
pub fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let line = |cells: &[String]| {
        let escaped: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
        format!("| {} |\n", escaped.join(" | "))
    };
    let mut out = line(header);
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Dense ranks (1 = largest). Equal rendered values share a rank.
pub fn ranks(values: &[Option<f64>]) -> Vec<Option<usize>> {
    let mut distinct: Vec<String> = values.iter().flatten().map(|v| metric(*v)).collect();
    distinct.sort_by(|a, b| b.parse::<f64>().unwrap().total_cmp(&a.parse::<f64>().unwrap()));
    distinct.dedup();
    values
        .iter()
        .map(|v| v.map(|v| distinct.iter().position(|d| *d == metric(v)).unwrap() + 1))
        .collect()
}
