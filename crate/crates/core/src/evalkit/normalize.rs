use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

static PUNCTUATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}+").unwrap());

fn pass(s: &str) -> String {
    let folded: String = s.nfkc().collect::<String>().to_lowercase();
    let stripped = PUNCTUATION.replace_all(&folded, "");
    let refolded: String = stripped.nfkc().collect();
    refolded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// NFKC fold, lowercase, drop punctuation, collapse whitespace.
///
/// Repeated until stable: lowercasing or compatibility folding can expose new
/// punctuation or change the composition, and the result must be idempotent.
pub fn normalize_text(s: &str) -> String {
    let mut current = pass(s);
    for _ in 0..8 {
        let next = pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_text("  The U.S.! "), "the us");
        assert_eq!(normalize_text("the us"), "the us");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("Ｔｏｋｙｏ\u{3000}Tower"), "tokyo tower");
        assert_eq!(normalize_text("北京。"), "北京");
        assert_eq!(normalize_text("¿Qué?\n\tNo"), "qué no");
    }
}
