//! Rule-based English inflection for keyword lemmas.

use std::collections::BTreeSet;

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn vowel_groups(w: &[u8]) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for &c in w {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Monosyllabic consonant-vowel-consonant endings double the final
/// consonant before a vowel suffix (`dam` -> `dammed`).
fn doubles_final(w: &[u8]) -> bool {
    let n = w.len();
    if n < 3 || vowel_groups(w) != 1 {
        return false;
    }
    let (a, b, c) = (w[n - 3], w[n - 2], w[n - 1]);
    !is_vowel(a) && is_vowel(b) && !is_vowel(c) && !matches!(c, b'w' | b'x' | b'y')
}

fn consonant_y(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == b'y' && !is_vowel(w[n - 2])
}

fn plural(lemma: &str) -> String {
    let w = lemma.as_bytes();
    if ["s", "x", "z", "ch", "sh"].iter().any(|s| lemma.ends_with(s)) {
        format!("{lemma}es")
    } else if consonant_y(w) {
        format!("{}ies", &lemma[..lemma.len() - 1])
    } else {
        format!("{lemma}s")
    }
}

fn past(lemma: &str) -> String {
    let w = lemma.as_bytes();
    if lemma.ends_with('e') {
        format!("{lemma}d")
    } else if consonant_y(w) {
        format!("{}ied", &lemma[..lemma.len() - 1])
    } else if doubles_final(w) {
        format!("{lemma}{}ed", w[w.len() - 1] as char)
    } else {
        format!("{lemma}ed")
    }
}

fn progressive(lemma: &str) -> String {
    let w = lemma.as_bytes();
    if let Some(stem) = lemma.strip_suffix("ie") {
        format!("{stem}ying")
    } else if lemma.ends_with('e') && !["ee", "ye", "oe"].iter().any(|s| lemma.ends_with(s)) && w.len() > 1 {
        format!("{}ing", &lemma[..lemma.len() - 1])
    } else if doubles_final(w) {
        format!("{lemma}{}ing", w[w.len() - 1] as char)
    } else {
        format!("{lemma}ing")
    }
}

/// The lemma plus its rule-generated forms. Vowel-less abbreviations
/// (`blvd`, `st`) only get the plural.
pub fn rule_forms(lemma: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    out.insert(lemma.to_string());
    if lemma.is_empty() || !lemma.is_ascii() {
        return out;
    }
    out.insert(plural(lemma));
    if lemma.bytes().any(is_vowel) {
        out.insert(past(lemma));
        out.insert(progressive(lemma));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn e_drop_and_plain_suffixes() {
        assert_eq!(rule_forms("evacuate"), set(&["evacuate", "evacuates", "evacuated", "evacuating"]));
        assert_eq!(rule_forms("help"), set(&["help", "helps", "helped", "helping"]));
    }

    #[test]
    fn consonant_doubling() {
        assert!(rule_forms("dam").contains("dammed"));
        assert!(rule_forms("dam").contains("damming"));
        assert!(rule_forms("open").contains("opened"));
        assert!(rule_forms("drown").contains("drowning"));
    }

    #[test]
    fn y_and_ie_endings() {
        assert!(rule_forms("supply").contains("supplies"));
        assert!(rule_forms("supply").contains("supplied"));
        assert!(rule_forms("die").contains("dying"));
        assert!(rule_forms("die").contains("died"));
    }

    #[test]
    fn abbreviations_only_pluralize() {
        assert_eq!(rule_forms("blvd"), set(&["blvd", "blvds"]));
        assert_eq!(rule_forms("st"), set(&["st", "sts"]));
        assert!(rule_forms("gas").contains("gases"));
    }
}
