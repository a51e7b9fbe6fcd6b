//! Event categories, keyword lexicon and keyword matching.

mod category;
mod inflect;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub use category::{EventCategory, LabelSet, UnknownCategory, NUM_CLASSES, NUM_EVENTS};
pub use inflect::rule_forms;

/// The shipped default lexicon.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.toml");

#[derive(Debug, Deserialize)]
struct LexiconFile {
    categories: BTreeMap<String, CategoryEntry>,
}

#[derive(Debug, Deserialize)]
struct CategoryEntry {
    keywords: Vec<String>,
    #[serde(default)]
    variants: BTreeMap<String, Vec<String>>,
}

/// One keyword occurrence in a token list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeywordHit {
    pub category: EventCategory,
    pub lemma: String,
    pub token_index: usize,
}

#[derive(Debug, Clone)]
pub struct KeywordLexicon {
    lemmas: BTreeMap<EventCategory, Vec<String>>,
    variants: BTreeMap<(EventCategory, String), BTreeSet<String>>,
    surface: HashMap<String, Vec<(EventCategory, String)>>,
}

impl Default for KeywordLexicon {
    fn default() -> Self {
        KeywordLexicon::from_toml(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

impl KeywordLexicon {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: LexiconFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("lexicon: {e}")))?;
        let mut lemmas = BTreeMap::new();
        let mut variants = BTreeMap::new();
        for (code, entry) in file.categories {
            let cat: EventCategory = code
                .parse()
                .map_err(|e: UnknownCategory| Error::Config(format!("lexicon: {e}")))?;
            if !cat.is_event() {
                return Err(Error::Config("lexicon: OTHER cannot carry keywords".into()));
            }
            let mut list: Vec<String> = Vec::new();
            for kw in &entry.keywords {
                let kw = kw.trim().to_lowercase();
                if kw.is_empty() || kw.contains(char::is_whitespace) {
                    return Err(Error::Config(format!("lexicon: bad keyword {kw:?} in {code}")));
                }
                if !list.contains(&kw) {
                    list.push(kw);
                }
            }
            for kw in &list {
                let extra = entry.variants.get(kw.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                variants.insert((cat, kw.clone()), expand_variants(kw, extra));
            }
            for lemma in entry.variants.keys() {
                if !list.contains(&lemma.to_lowercase()) {
                    return Err(Error::Config(format!("lexicon: variants for unknown keyword {lemma:?}")));
                }
            }
            lemmas.insert(cat, list);
        }
        let mut surface: HashMap<String, Vec<(EventCategory, String)>> = HashMap::new();
        for ((cat, lemma), forms) in &variants {
            for f in forms {
                surface.entry(f.clone()).or_default().push((*cat, lemma.clone()));
            }
        }
        Ok(KeywordLexicon {
            lemmas,
            variants,
            surface,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn categories(&self) -> impl Iterator<Item = EventCategory> + '_ {
        self.lemmas.keys().copied()
    }

    pub fn lemmas(&self, cat: EventCategory) -> &[String] {
        self.lemmas.get(&cat).map_or(&[], Vec::as_slice)
    }

    pub fn surface_forms(&self, cat: EventCategory, lemma: &str) -> Option<&BTreeSet<String>> {
        self.variants.get(&(cat, lemma.to_string()))
    }

    /// Categories (and lemmas) a single token belongs to.
    pub fn lookup(&self, token: &str) -> &[(EventCategory, String)] {
        self.surface.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn is_keyword(&self, token: &str) -> bool {
        self.surface.contains_key(token)
    }

    /// Every token that is a surface form yields one hit per category it
    /// belongs to. Hits are ordered by token index, then category.
    pub fn match_keywords<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<KeywordHit> {
        let mut hits = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            for (cat, lemma) in self.lookup(tok.as_ref()) {
                hits.push(KeywordHit {
                    category: *cat,
                    lemma: lemma.clone(),
                    token_index: i,
                });
            }
        }
        hits.sort_by(|a, b| (a.token_index, a.category, &a.lemma).cmp(&(b.token_index, b.category, &b.lemma)));
        hits
    }

    /// Positions of tokens that are keywords of any category.
    pub fn keyword_positions<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| self.is_keyword(t.as_ref()))
            .map(|(i, _)| i)
            .collect()
    }

    /// The keyword-matching baseline: every category with a hit, or `{Other}`.
    pub fn keyword_baseline_predict<S: AsRef<str>>(&self, tokens: &[S]) -> LabelSet {
        self.match_keywords(tokens)
            .into_iter()
            .map(|h| h.category)
            .collect::<LabelSet>()
            .normalized()
    }
}

/// Lemma, its rule-generated inflections and any explicit overrides.
pub fn expand_variants<S: AsRef<str>>(lemma: &str, overrides: &[S]) -> BTreeSet<String> {
    let mut forms = rule_forms(lemma);
    forms.extend(overrides.iter().map(|s| s.as_ref().trim().to_lowercase()));
    forms
}
