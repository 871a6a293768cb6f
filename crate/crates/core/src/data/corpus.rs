use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SentencePair {
    pub fn new(source: Vec<String>, target: Vec<String>) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Empty("sentence pair side"));
        }
        Ok(Self { source, target })
    }

    /// Whitespace-tokenised pair.
    pub fn from_text(source: &str, target: &str) -> Result<Self> {
        Self::new(tokenize(source), tokenize(target))
    }

    pub fn side(&self, side: Side) -> &[String] {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    provenance: String,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>, provenance: impl Into<String>) -> Result<Self> {
        if pairs.iter().any(|p| p.source.is_empty() || p.target.is_empty()) {
            return Err(Error::Empty("sentence pair side"));
        }
        Ok(Self { pairs, provenance: provenance.into() })
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Swaps source and target, for training a backward model.
    pub fn reversed(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair { source: p.target.clone(), target: p.source.clone() })
                .collect(),
            provenance: format!("{} (reversed)", self.provenance),
        }
    }

    /// Content ids per pair under the given vocabularies.
    pub fn encode(&self, src: &Vocabulary, tgt: &Vocabulary) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.pairs
            .iter()
            .map(|p| (src.lookup(&p.source), tgt.lookup(&p.target)))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&p.source.join(" "));
            out.push('\t');
            out.push_str(&p.target.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, provenance: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (s, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("{provenance}:{}: missing TAB", lineno + 1)))?;
            if t.contains('\t') {
                return Err(Error::Parse(format!("{provenance}:{}: more than one TAB", lineno + 1)));
            }
            let pair = SentencePair::from_text(s, t)
                .map_err(|_| Error::Parse(format!("{provenance}:{}: empty side", lineno + 1)))?;
            pairs.push(pair);
        }
        Self::new(pairs, provenance)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint(self.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let c = ParallelCorpus::new(
            vec![
                SentencePair::from_text("s1 s2", "t2 t1").unwrap(),
                SentencePair::from_text("s3", "t3").unwrap(),
            ],
            "mem",
        )
        .unwrap();
        let p = dir.path().join("c.tsv");
        c.save(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "s1 s2\tt2 t1\ns3\tt3\n");
        let back = ParallelCorpus::load(&p).unwrap();
        assert_eq!(back.pairs(), c.pairs());
        assert_eq!(back.fingerprint(), c.fingerprint());
    }

    #[test]
    fn parse_errors() {
        assert!(ParallelCorpus::parse("no tab here\n", "x").is_err());
        assert!(ParallelCorpus::parse("a\t\n", "x").is_err());
        assert!(ParallelCorpus::parse("a\tb\tc\n", "x").is_err());
        assert!(SentencePair::from_text("", "x").is_err());
    }
}
