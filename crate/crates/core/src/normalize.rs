//! Attribute-name preprocessing: rule-based tokenization plus tf-idf keyword
//! selection for knowledge-base anchoring.
//!
//! Raw attribute names arrive as `Rpt_Date`, `Avg Speed`, `Streetname` or
//! `Jul-10`. Four rule classes turn them into word lists:
//!
//! - **identity** — delimiter or camel-case splitting was enough;
//! - **abbreviation** — a token expanded through the abbreviation dictionary;
//! - **word cutting** — an unbroken run was split by greedy longest-match
//!   against a wordlist;
//! - **override** — a manual raw-name -> tokens rule applied.
//!
//! One token is then chosen as the keyword by tf-idf over the corpus of all
//! token lists (ties go to the earliest position).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Which rule class produced a tokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleTag {
    Identity,
    Abbreviation,
    WordCutting,
    Override,
}

/// A normalized attribute name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedAttribute {
    pub raw: String,
    pub tokens: Vec<String>,
    pub rule: RuleTag,
    /// Chosen keyword; defaults to the first token until
    /// [`assign_keywords`] scores the corpus.
    pub keyword: String,
    /// An unbroken run had no dictionary hit and was kept verbatim.
    pub flagged: bool,
}

/// Normalization dictionaries. All lookups are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct Dictionaries {
    /// abbreviation -> expansion (the expansion may be several words).
    pub abbreviations: BTreeMap<String, String>,
    /// Known words for cutting unbroken runs.
    pub wordlist: BTreeSet<String>,
    /// Manual raw-name -> token list rules.
    pub overrides: BTreeMap<String, Vec<String>>,
}

impl Dictionaries {
    /// Parses a TSV abbreviation dictionary (`abbr<TAB>expansion` per line).
    pub fn parse_abbreviations(input: &str) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.splitn(2, '\t');
            let (abbr, expansion) = (fields.next().unwrap_or(""), fields.next());
            let Some(expansion) = expansion else {
                return Err(Error::data(format!(
                    "abbreviations line {}: expected abbr<TAB>expansion",
                    i + 1
                )));
            };
            out.insert(abbr.trim().to_lowercase(), expansion.trim().to_lowercase());
        }
        Ok(out)
    }

    /// Parses a newline-delimited wordlist.
    pub fn parse_wordlist(input: &str) -> BTreeSet<String> {
        input
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect()
    }

    /// Parses a TSV override file (`raw-name<TAB>token token ...` per line).
    pub fn parse_overrides(input: &str) -> Result<BTreeMap<String, Vec<String>>> {
        let mut out = BTreeMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.splitn(2, '\t');
            let (raw, tokens) = (fields.next().unwrap_or(""), fields.next());
            let Some(tokens) = tokens else {
                return Err(Error::data(format!(
                    "overrides line {}: expected raw<TAB>tokens",
                    i + 1
                )));
            };
            let tokens: Vec<String> =
                tokens.split_whitespace().map(str::to_lowercase).collect();
            if tokens.is_empty() {
                return Err(Error::data(format!("overrides line {}: empty token list", i + 1)));
            }
            out.insert(raw.trim().to_lowercase(), tokens);
        }
        Ok(out)
    }
}

/// Splits on spaces, underscores, hyphens, camel-case boundaries and
/// letter/digit boundaries; lowercases the result.
fn delimiter_split(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for c in raw.chars() {
        let boundary = match prev {
            None => false,
            Some(p) => {
                (p.is_lowercase() && c.is_uppercase())
                    || (p.is_alphabetic() && c.is_ascii_digit())
                    || (p.is_ascii_digit() && c.is_alphabetic())
            }
        };
        if c == ' ' || c == '_' || c == '-' {
            if !current.is_empty() {
                tokens.push(current.to_lowercase());
                current = String::new();
            }
            prev = None;
            continue;
        }
        if boundary && !current.is_empty() {
            tokens.push(current.to_lowercase());
            current = String::new();
        }
        current.push(c);
        prev = Some(c);
    }
    if !current.is_empty() {
        tokens.push(current.to_lowercase());
    }
    tokens
}

/// Greedy longest-match cut of `token` into wordlist words. Succeeds only
/// when the whole token decomposes into at least two words.
fn cut_word(token: &str, wordlist: &BTreeSet<String>) -> Option<Vec<String>> {
    let chars: Vec<char> = token.chars().collect();
    let mut parts = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let mut matched = None;
        for end in (pos + 1..=chars.len()).rev() {
            let piece: String = chars[pos..end].iter().collect();
            if wordlist.contains(&piece) {
                matched = Some((piece, end));
                break;
            }
        }
        match matched {
            Some((piece, end)) => {
                parts.push(piece);
                pos = end;
            }
            None => return None,
        }
    }
    if parts.len() >= 2 {
        Some(parts)
    } else {
        None
    }
}

/// Applies the normalization rules to one raw attribute name.
///
/// Order: manual overrides win outright; otherwise the name is
/// delimiter-split, abbreviations are expanded per token, and unbroken runs
/// are cut against the wordlist. A run that neither expands nor cuts is kept
/// verbatim and flagged.
pub fn normalize_attribute(raw: &str, dicts: &Dictionaries) -> Result<TokenizedAttribute> {
    if raw.trim().is_empty() {
        return Err(Error::data("empty attribute name"));
    }
    if let Some(tokens) = dicts.overrides.get(&raw.trim().to_lowercase()) {
        return Ok(TokenizedAttribute {
            raw: raw.to_string(),
            tokens: tokens.clone(),
            rule: RuleTag::Override,
            keyword: tokens[0].clone(),
            flagged: false,
        });
    }
    let split = delimiter_split(raw);
    let mut tokens = Vec::new();
    let mut expanded = false;
    let mut cut = false;
    let mut flagged = false;
    for token in split {
        if let Some(expansion) = dicts.abbreviations.get(&token) {
            tokens.extend(expansion.split_whitespace().map(str::to_string));
            expanded = true;
            continue;
        }
        if token.chars().all(char::is_alphabetic) && !dicts.wordlist.contains(&token) {
            if let Some(parts) = cut_word(&token, &dicts.wordlist) {
                tokens.extend(parts);
                cut = true;
                continue;
            }
            if !dicts.wordlist.is_empty() && token.chars().count() >= 4 {
                flagged = true;
            }
        }
        tokens.push(token);
    }
    let rule = if expanded {
        RuleTag::Abbreviation
    } else if cut {
        RuleTag::WordCutting
    } else {
        RuleTag::Identity
    };
    let keyword = tokens[0].clone();
    Ok(TokenizedAttribute { raw: raw.to_string(), tokens, rule, keyword, flagged })
}

/// Document-frequency statistics over a corpus of token lists.
#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn from_docs<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut stats = CorpusStats::default();
        for doc in docs {
            stats.doc_count += 1;
            let unique: BTreeSet<&String> = doc.iter().collect();
            for token in unique {
                *stats.doc_freq.entry(token.clone()).or_insert(0) += 1;
            }
        }
        stats
    }

    /// `ln(N / df)`, with unseen tokens treated as frequency 1.
    pub fn idf(&self, token: &str) -> f64 {
        if self.doc_count == 0 {
            return 0.0;
        }
        let df = self.doc_freq.get(token).copied().unwrap_or(1).max(1);
        (self.doc_count as f64 / df as f64).ln()
    }
}

/// Index of the token with the highest tf-idf score; ties break to the
/// earliest position. `idf` supplies the corpus weight per token.
fn keyword_index(tokens: &[String], idf: impl Fn(&str) -> f64) -> usize {
    let len = tokens.len() as f64;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut best = 0;
    let mut best_score = f64::MIN;
    for (i, t) in tokens.iter().enumerate() {
        let tf = counts[t.as_str()] as f64 / len;
        let score = tf * idf(t);
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// The token with the highest tf-idf value within its list.
pub fn select_keyword(tokens: &[String], corpus: &CorpusStats) -> Result<String> {
    if tokens.is_empty() {
        return Err(Error::parameter("token list is empty"));
    }
    Ok(tokens[keyword_index(tokens, |t| corpus.idf(t))].clone())
}

/// Scores every attribute's tokens against the corpus they form and fills
/// in the keywords.
pub fn assign_keywords(attrs: &mut [TokenizedAttribute]) {
    let stats = CorpusStats::from_docs(attrs.iter().map(|a| a.tokens.as_slice()));
    for attr in attrs {
        if let Ok(keyword) = select_keyword(&attr.tokens, &stats) {
            attr.keyword = keyword;
        }
    }
}
