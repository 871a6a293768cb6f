use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a hypothesis/score file: `id, source, hypothesis, score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: u64,
    pub source: String,
    pub hypothesis: String,
    pub score: f64,
}

pub fn write_score_tsv(rows: &[ScoreRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').has_headers(false).from_path(path)?;
    for r in rows {
        w.write_record([r.id.to_string(), r.source.clone(), r.hypothesis.clone(), format!("{:?}", r.score)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_score_tsv(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').has_headers(false).from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_keeps_full_precision() {
        let rows = vec![
            ScoreRow { id: 0, source: "s1 s2".into(), hypothesis: "t1".into(), score: -1.0397207708399179 },
            ScoreRow { id: 7, source: "s3".into(), hypothesis: "t4 t5".into(), score: -0.1 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.tsv");
        write_score_tsv(&rows, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().next().unwrap(), "0\ts1 s2\tt1\t-1.0397207708399179");
        assert_eq!(read_score_tsv(&p).unwrap(), rows);
    }
}
