//! Reserved attribute names shared by every stage of the pipeline.

pub const PHI: &str = "phi";
pub const UPSILON: &str = "upsilon";
pub const TID: &str = "tid";

pub fn is_reserved(symbol: &str) -> bool {
    matches!(symbol, PHI | UPSILON | TID)
}

/// Maps user-facing spellings (`φ`, `υ`) onto internal attribute names.
pub fn canonical(symbol: &str) -> &str {
    match symbol {
        "φ" => PHI,
        "υ" => UPSILON,
        other => other,
    }
}

/// Greek rendering used by human-readable output.
pub fn display(symbol: &str) -> &str {
    match symbol {
        PHI => "φ",
        UPSILON => "υ",
        other => other,
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Compares identifiers so that embedded digit runs sort numerically (`f2 < f10`).
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(c), Some(d)) if c.is_ascii_digit() && d.is_ascii_digit() => {
                let n = x.iter().take_while(|c| c.is_ascii_digit()).count();
                let m = y.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (trim_zeros(&x[..n]), trim_zeros(&y[..m]));
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[n..];
                y = &y[m..];
            }
            (Some(c), Some(d)) => {
                if c != d {
                    return c.cmp(d);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let k = d.iter().take_while(|&&c| c == b'0').count();
    &d[k.min(d.len().saturating_sub(1))..]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut ids = vec!["f10", "f2", "f1", "g1", "f9"];
        ids.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(ids, ["f1", "f2", "f9", "f10", "g1"]);
        assert_eq!(natural_cmp("x01", "x1"), std::cmp::Ordering::Less);
    }

    #[test]
    fn aliases() {
        assert_eq!(canonical("φ"), PHI);
        assert_eq!(display(UPSILON), "υ");
        assert!(is_identifier("x0") && !is_identifier("0x") && !is_identifier(""));
    }
}
