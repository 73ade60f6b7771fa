//! Minimal CoNLL-U reader.
//!
//! Only the columns the extractor needs are kept. Document metadata is read
//! from `# newdoc id = ...`, `# meta month = YYYY-MM` and
//! `# meta country = XX` comment lines; a `newdoc` line resets month and
//! country. Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar month, ordered chronologically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: u16,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: u16, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Input(format!("month out of range: {month}")));
        }
        Ok(YearMonth { year, month })
    }

    /// The month `n` months after this one.
    pub fn plus_months(self, n: usize) -> Self {
        let total = self.year as usize * 12 + (self.month as usize - 1) + n;
        YearMonth {
            year: (total / 12) as u16,
            month: (total % 12) as u8 + 1,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Input(format!("expected YYYY-MM, found `{s}`")))?;
        let year = y
            .parse::<u16>()
            .map_err(|_| Error::Input(format!("bad year in `{s}`")))?;
        let month = m
            .parse::<u8>()
            .map_err(|_| Error::Input(format!("bad month in `{s}`")))?;
        YearMonth::new(year, month)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    /// 1-based head index, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(surface: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            surface: surface.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }

    pub fn is_punct(&self) -> bool {
        self.upos == "PUNCT"
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedSentence {
    pub doc_id: String,
    pub month: YearMonth,
    pub country: Option<String>,
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Checks that every head index points inside the sentence.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.head > n || tok.head == i + 1 {
                return Err(Error::Input(format!(
                    "doc {}: token {} (`{}`) has invalid head {}",
                    self.doc_id,
                    i + 1,
                    tok.surface,
                    tok.head
                )));
            }
        }
        Ok(())
    }

    /// Indices (0-based) of the dependents of token `idx` (0-based).
    pub fn children(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head == idx + 1)
            .map(|(i, _)| i)
    }
}

#[derive(Default)]
struct DocState {
    doc_id: Option<String>,
    month: Option<YearMonth>,
    country: Option<String>,
}

fn meta_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.strip_prefix(key)?;
    let rest = rest.trim_start();
    let rest = rest.strip_prefix('=')?;
    Some(rest.trim())
}

/// Parses every sentence in a CoNLL-U stream. `path` is used for error messages only.
pub fn parse_conllu<R: BufRead>(reader: R, path: &Path) -> Result<Vec<ParsedSentence>> {
    let mut out = Vec::new();
    let mut state = DocState::default();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_start = 0;

    let mut flush = |tokens: &mut Vec<Token>, state: &DocState, line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let doc_id = state
            .doc_id
            .clone()
            .ok_or_else(|| Error::parse(path, line, "sentence without `# newdoc id`"))?;
        let month = state
            .month
            .ok_or_else(|| Error::parse(path, line, "sentence without `# meta month`"))?;
        out.push(ParsedSentence {
            doc_id,
            month,
            country: state.country.clone(),
            tokens: std::mem::take(tokens),
        });
        Ok(())
    };

    let mut lineno = 0;
    for line in reader.lines() {
        lineno += 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &state, sent_start)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(id) = meta_value(comment, "newdoc id") {
                flush(&mut tokens, &state, sent_start)?;
                state = DocState {
                    doc_id: Some(id.to_string()),
                    ..DocState::default()
                };
            } else if let Some(m) = meta_value(comment, "meta month") {
                state.month = Some(
                    m.parse()
                        .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?,
                );
            } else if let Some(c) = meta_value(comment, "meta country") {
                state.country = Some(c.to_string());
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        if tokens.is_empty() {
            sent_start = lineno;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad token id `{}`", cols[0])))?;
        if id != tokens.len() + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("token id {id} out of sequence"),
            ));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad head `{}`", cols[6])))?;
        let lemma = if cols[2] == "_" && cols[1] != "_" {
            cols[1]
        } else {
            cols[2]
        };
        tokens.push(Token::new(cols[1], lemma, cols[3], head, cols[7]));
    }
    flush(&mut tokens, &state, sent_start)?;
    Ok(out)
}

/// Reads and concatenates every `*.conllu` file under `dir`, in file-name order.
pub fn read_conllu_dir(dir: &Path) -> Result<Vec<ParsedSentence>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "conllu").unwrap_or(false))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let reader = std::io::BufReader::new(std::fs::File::open(&f)?);
        out.extend(parse_conllu(reader, &f)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "# newdoc id = d1\n# meta month = 2017-04\n# meta country = US\n\
# text = Trump met Putin\n\
1\tTrump\tTrump\tPROPN\t_\t_\t2\tnsubj\t_\t_\n\
2\tmet\tmeet\tVERB\t_\t_\t0\troot\t_\t_\n\
3\tPutin\tPutin\tPROPN\t_\t_\t2\tobj\t_\t_\n\
\n\
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tdo\tdo\tAUX\t_\t_\t0\troot\t_\t_\n\
2\tn't\tnot\tPART\t_\t_\t1\tadvmod\t_\t_\n\
\n";

    #[test]
    fn parses_metadata_and_tokens() {
        let sents = parse_conllu(DOC.as_bytes(), Path::new("x")).unwrap();
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].doc_id, "d1");
        assert_eq!(sents[0].month, YearMonth::new(2017, 4).unwrap());
        assert_eq!(sents[0].country.as_deref(), Some("US"));
        assert_eq!(sents[0].tokens[1].lemma, "meet");
        assert_eq!(sents[1].tokens.len(), 2);
        assert_eq!(sents[0].children(1).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn missing_month_is_an_error() {
        let doc = "# newdoc id = d1\n1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n";
        let err = parse_conllu(doc.as_bytes(), Path::new("f.conllu")).unwrap_err();
        assert!(err.to_string().contains("meta month"), "{err}");
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let doc = "# newdoc id = d1\n# meta month = 2016-01\n1\ta\ta\n";
        let err = parse_conllu(doc.as_bytes(), Path::new("f.conllu")).unwrap_err();
        assert!(err.to_string().starts_with("f.conllu:3:"), "{err}");
    }

    #[test]
    fn year_month_arithmetic() {
        let ym: YearMonth = "2016-11".parse().unwrap();
        assert_eq!(ym.plus_months(3).to_string(), "2017-02");
        assert!("2016-13".parse::<YearMonth>().is_err());
    }

    #[test]
    fn validate_rejects_out_of_range_head() {
        let s = ParsedSentence {
            doc_id: "d".into(),
            month: YearMonth::new(2016, 1).unwrap(),
            country: None,
            tokens: vec![Token::new("a", "a", "NOUN", 5, "nsubj")],
        };
        assert!(s.validate().is_err());
    }
}
