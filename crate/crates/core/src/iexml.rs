//! IeXML annotation reader.
//!
//! Only three elements are interpreted: `<e id="...">` entity mentions,
//! nested `<w id="n">` words and `<s>` sentences. Everything else (unknown
//! tags, punctuation, free text) is tolerated and skipped. Sentences may be
//! wrapped in `<s>...</s>` or just terminated by a trailing `</s>`; text with
//! no sentence markup at all is a single sentence.
//!
//! An entity id is a `|`-separated list of readings, each of the form
//! `SRC:CUI:T1[,T2...][::w1,w2...]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub source: String,
    pub cui: String,
    pub semtypes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_ids: Option<Vec<u32>>,
}

/// A `<w>` element: its id and byte span within the mention surface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub id: u32,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub sentence_index: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub words: Vec<Word>,
    pub readings: Vec<Reading>,
}

impl EntityMention {
    pub fn word_text(&self, id: u32) -> Option<&str> {
        self.words.iter().find(|w| w.id == id).map(|w| &self.surface[w.start..w.end])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub object_type: String,
    pub sentence_count: usize,
    pub mentions: Vec<EntityMention>,
    pub frequencies: BTreeMap<String, u32>,
}

impl AnnotatedDocument {
    pub fn reading_count(&self) -> usize {
        self.mentions.iter().map(|m| m.readings.len()).sum()
    }

    /// Every reading paired with the sentence it occurs in.
    pub fn readings(&self) -> impl Iterator<Item = (usize, &Reading)> {
        self.mentions.iter().flat_map(|m| m.readings.iter().map(move |r| (m.sentence_index, r)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MissingId,
    MalformedId(String),
    MalformedWordId(String),
    UnknownWord { id: u32 },
    Unbalanced(String),
    UnterminatedTag,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::MissingId => f.write_str("entity without id attribute"),
            ParseErrorKind::MalformedId(id) => write!(f, "malformed entity id `{id}`"),
            ParseErrorKind::MalformedWordId(id) => write!(f, "malformed word id `{id}`"),
            ParseErrorKind::UnknownWord { id } => write!(f, "reading references word {id} but the entity has no such <w>"),
            ParseErrorKind::Unbalanced(what) => write!(f, "unbalanced tags: {what}"),
            ParseErrorKind::UnterminatedTag => f.write_str("unterminated tag"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("document `{doc_id}` at byte {offset}: {kind}")]
pub struct ParseError {
    pub doc_id: String,
    pub offset: usize,
    pub kind: ParseErrorKind,
}

struct Tag<'a> {
    name: String,
    closing: bool,
    self_closing: bool,
    attrs: &'a str,
}

fn scan_tag(text: &str, start: usize) -> Option<(usize, &str)> {
    // returns the index one past '>' and the inner text; quote-aware
    let bytes = text.as_bytes();
    let mut quote = None;
    let mut i = start + 1;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some((i + 1, &text[start + 1..i])),
            None => {}
        }
        i += 1;
    }
    None
}

fn split_tag(inner: &str) -> Tag<'_> {
    let (closing, rest) = match inner.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, inner),
    };
    let rest = rest.trim_start();
    let (self_closing, rest) = match rest.trim_end().strip_suffix('/') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    let name_end = rest.find(|c: char| c.is_whitespace()).unwrap_or(rest.len());
    Tag { name: rest[..name_end].to_ascii_lowercase(), closing, self_closing, attrs: &rest[name_end..] }
}

fn attribute(attrs: &str, key: &str) -> Option<String> {
    let mut rest = attrs;
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            return None;
        }
        let eq = rest.find('=')?;
        let name = rest[..eq].trim();
        let after = rest[eq + 1..].trim_start();
        let quote = after.chars().next()?;
        let (value, next) = if quote == '"' || quote == '\'' {
            let close = after[1..].find(quote)? + 1;
            (&after[1..close], &after[close + 1..])
        } else {
            let end = after.find(char::is_whitespace).unwrap_or(after.len());
            (&after[..end], &after[end..])
        };
        if name.eq_ignore_ascii_case(key) {
            return Some(decode_entities(value));
        }
        rest = next;
    }
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let decoded = tail.find(';').and_then(|semi| {
            let ent = &tail[1..semi];
            let ch = match ent {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                _ if ent.starts_with("#x") => u32::from_str_radix(&ent[2..], 16).ok().and_then(char::from_u32),
                _ if ent.starts_with('#') => ent[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            ch.map(|c| (c, semi + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &tail[len..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Parses one reading: `SRC:CUI:T1[,T2...][::w1,w2...]`.
pub fn parse_reading(raw: &str) -> Result<Reading, ParseErrorKind> {
    let malformed = || ParseErrorKind::MalformedId(raw.to_string());
    let (main, words) = match raw.split_once("::") {
        Some((m, w)) => (m, Some(w)),
        None => (raw, None),
    };
    let parts: Vec<&str> = main.split(':').collect();
    let [source, cui, types] = parts.as_slice() else {
        return Err(malformed());
    };
    let semtypes: Vec<String> = types.split(',').map(|t| t.trim().to_string()).collect();
    if source.is_empty() || cui.is_empty() || semtypes.iter().any(String::is_empty) {
        return Err(malformed());
    }
    let word_ids = match words {
        None => None,
        Some(w) => Some(w.split(',').map(|x| x.trim().parse::<u32>().map_err(|_| malformed())).collect::<Result<Vec<_>, _>>()?),
    };
    Ok(Reading { source: source.to_string(), cui: cui.to_string(), semtypes, word_ids })
}

fn reading_id(r: &Reading) -> String {
    let mut s = format!("{}:{}:{}", r.source, r.cui, r.semtypes.join(","));
    if let Some(ws) = &r.word_ids {
        let ids: Vec<String> = ws.iter().map(u32::to_string).collect();
        let _ = write!(s, "::{}", ids.join(","));
    }
    s
}

struct OpenMention {
    offset: usize,
    surface: String,
    words: Vec<Word>,
    readings: Vec<Reading>,
    open_word: Option<(u32, usize)>,
}

/// Parses an IeXML document.
pub fn parse_iexml(doc_id: &str, object_type: &str, text: &str) -> Result<AnnotatedDocument, ParseError> {
    let err = |offset: usize, kind: ParseErrorKind| ParseError { doc_id: doc_id.to_string(), offset, kind };

    let mut mentions = Vec::new();
    let mut closed_sentences = 0usize;
    let mut pending = false;
    let mut open_s: Option<usize> = None;
    let mut mention: Option<OpenMention> = None;

    let mut pos = 0;
    while pos < text.len() {
        let next_lt = text[pos..].find('<').map_or(text.len(), |i| pos + i);
        if next_lt > pos {
            let chunk = decode_entities(&text[pos..next_lt]);
            match mention.as_mut() {
                Some(m) => m.surface.push_str(&chunk),
                None => pending |= !chunk.trim().is_empty(),
            }
            pos = next_lt;
            continue;
        }

        if text[pos..].starts_with("<!--") {
            pos = text[pos..].find("-->").map_or(text.len(), |i| pos + i + 3);
            continue;
        }
        let (end, inner) = scan_tag(text, pos).ok_or_else(|| err(pos, ParseErrorKind::UnterminatedTag))?;
        if inner.starts_with('?') || inner.starts_with('!') {
            pos = end;
            continue;
        }
        let tag = split_tag(inner);
        let at = pos;
        pos = end;

        match (tag.name.as_str(), tag.closing) {
            ("s", false) => {
                if mention.is_some() {
                    return Err(err(at, ParseErrorKind::Unbalanced("<s> inside <e>".into())));
                }
                if open_s.is_some() {
                    return Err(err(at, ParseErrorKind::Unbalanced("nested <s>".into())));
                }
                if pending {
                    closed_sentences += 1;
                    pending = false;
                }
                if tag.self_closing {
                    continue;
                }
                open_s = Some(at);
            }
            ("s", true) => {
                if mention.is_some() {
                    return Err(err(at, ParseErrorKind::Unbalanced("</s> inside <e>".into())));
                }
                open_s = None;
                closed_sentences += 1;
                pending = false;
            }
            ("e", false) => {
                if mention.is_some() {
                    return Err(err(at, ParseErrorKind::Unbalanced("nested <e>".into())));
                }
                let id = attribute(tag.attrs, "id").ok_or_else(|| err(at, ParseErrorKind::MissingId))?;
                let readings = id.split('|').map(parse_reading).collect::<Result<Vec<_>, _>>().map_err(|k| err(at, k))?;
                let m = OpenMention { offset: at, surface: String::new(), words: Vec::new(), readings, open_word: None };
                pending = true;
                if tag.self_closing {
                    mentions.push(close_mention(m, closed_sentences).map_err(|k| err(at, k))?);
                } else {
                    mention = Some(m);
                }
            }
            ("e", true) => {
                let m = mention.take().ok_or_else(|| err(at, ParseErrorKind::Unbalanced("</e> without <e>".into())))?;
                if m.open_word.is_some() {
                    return Err(err(at, ParseErrorKind::Unbalanced("</e> inside <w>".into())));
                }
                let offset = m.offset;
                mentions.push(close_mention(m, closed_sentences).map_err(|k| err(offset, k))?);
            }
            ("w", false) => {
                let Some(m) = mention.as_mut() else { continue };
                if m.open_word.is_some() {
                    return Err(err(at, ParseErrorKind::Unbalanced("nested <w>".into())));
                }
                let raw = attribute(tag.attrs, "id").unwrap_or_default();
                let id = raw.trim().parse::<u32>().map_err(|_| err(at, ParseErrorKind::MalformedWordId(raw.clone())))?;
                if tag.self_closing {
                    let here = m.surface.len();
                    m.words.push(Word { id, start: here, end: here });
                } else {
                    m.open_word = Some((id, m.surface.len()));
                }
            }
            ("w", true) => {
                let Some(m) = mention.as_mut() else { continue };
                let (id, start) =
                    m.open_word.take().ok_or_else(|| err(at, ParseErrorKind::Unbalanced("</w> without <w>".into())))?;
                m.words.push(Word { id, start, end: m.surface.len() });
            }
            _ => {}
        }
    }

    if let Some(m) = mention {
        return Err(err(m.offset, ParseErrorKind::Unbalanced("unclosed <e>".into())));
    }
    if let Some(at) = open_s {
        return Err(err(at, ParseErrorKind::Unbalanced("unclosed <s>".into())));
    }
    let sentence_count = closed_sentences + usize::from(pending);

    let mut frequencies = BTreeMap::new();
    for m in &mentions {
        for r in &m.readings {
            *frequencies.entry(r.cui.clone()).or_insert(0) += 1;
        }
    }
    Ok(AnnotatedDocument {
        doc_id: doc_id.to_string(),
        object_type: object_type.to_string(),
        sentence_count,
        mentions,
        frequencies,
    })
}

fn close_mention(m: OpenMention, sentence_index: usize) -> Result<EntityMention, ParseErrorKind> {
    for r in &m.readings {
        for &w in r.word_ids.iter().flatten() {
            if !m.words.iter().any(|x| x.id == w) {
                return Err(ParseErrorKind::UnknownWord { id: w });
            }
        }
    }
    Ok(EntityMention { sentence_index, surface: m.surface, words: m.words, readings: m.readings })
}

/// Canonical IeXML: one `<s>` element per sentence holding its mentions.
pub fn to_iexml(doc: &AnnotatedDocument) -> String {
    let mut out = String::new();
    for s in 0..doc.sentence_count {
        out.push_str("<s>");
        let mut first = true;
        for m in doc.mentions.iter().filter(|m| m.sentence_index == s) {
            if !first {
                out.push(' ');
            }
            first = false;
            let ids: Vec<String> = m.readings.iter().map(reading_id).collect();
            let _ = write!(out, "<e id=\"{}\">", escape(&ids.join("|")));
            let mut cursor = 0;
            let mut words: Vec<&Word> = m.words.iter().collect();
            words.sort_by_key(|w| (w.start, w.end));
            for w in words {
                out.push_str(&escape(&m.surface[cursor..w.start]));
                let _ = write!(out, "<w id=\"{}\">{}</w>", w.id, escape(&m.surface[w.start..w.end]));
                cursor = w.end;
            }
            out.push_str(&escape(&m.surface[cursor..]));
            out.push_str("</e>");
        }
        out.push_str("</s>\n");
    }
    out
}

/// Unordered pairs of distinct concepts sharing at least one sentence.
pub fn sentence_cooccurrences(doc: &AnnotatedDocument) -> BTreeSet<(String, String)> {
    let mut by_sentence: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    for (s, r) in doc.readings() {
        by_sentence.entry(s).or_default().insert(r.cui.as_str());
    }
    let mut pairs = BTreeSet::new();
    for cuis in by_sentence.values() {
        let cuis: Vec<&str> = cuis.iter().copied().collect();
        for (i, a) in cuis.iter().enumerate() {
            for b in &cuis[i + 1..] {
                pairs.insert((a.to_string(), b.to_string()));
            }
        }
    }
    pairs
}

pub fn concept_frequencies(doc: &AnnotatedDocument) -> BTreeMap<String, u32> {
    doc.frequencies.clone()
}
