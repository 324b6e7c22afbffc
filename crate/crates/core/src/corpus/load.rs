use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use log::warn;

use super::{Document, Label, LabelSpace, LabeledCorpus};
use crate::error::{Error, Result};

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn column(path: &Path, headers: &StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
}

/// Reads one ISOT file; returns the documents and the number of rows skipped
/// for empty text.
fn read_isot_file(path: &Path, label: Label, tag: &str) -> Result<(Vec<Document>, usize)> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let title_col = column(path, &headers, "title")?;
    let text_col = column(path, &headers, "text")?;

    let mut docs = Vec::new();
    let mut skipped = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let title = record.get(title_col).unwrap_or("");
        let text = record.get(text_col).unwrap_or("");
        if text.trim().is_empty() {
            skipped += 1;
            continue;
        }
        docs.push(Document::from_title_text(format!("isot-{tag}-{row}"), title, text, Some(label), "isot"));
    }
    Ok((docs, skipped))
}

/// Loads the ISOT pair of CSVs (`title,text,subject,date`). Subject and date
/// are ignored; rows with empty text are skipped and counted.
pub fn load_isot(fake_csv: impl AsRef<Path>, real_csv: impl AsRef<Path>) -> Result<LabeledCorpus> {
    let (mut docs, skipped_fake) = read_isot_file(fake_csv.as_ref(), Label::Fake, "fake")?;
    let (real, skipped_real) = read_isot_file(real_csv.as_ref(), Label::Real, "real")?;
    docs.extend(real);
    let skipped = skipped_fake + skipped_real;
    if skipped > 0 {
        warn!("isot: skipped {skipped} rows with empty text");
    }
    Ok(LabeledCorpus::new("isot", LabelSpace::veracity(), docs)?.with_skipped_rows(skipped))
}

/// Loads a canonical `id,title,text,label` CSV. The corpus is named after the
/// file stem.
pub fn load_canonical(path: impl AsRef<Path>, label_space: LabelSpace) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "canonical".to_string());
    load_canonical_named(path, label_space, &name)
}

pub(crate) fn load_canonical_named(path: &Path, label_space: LabelSpace, name: &str) -> Result<LabeledCorpus> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let id_col = column(path, &headers, "id")?;
    let title_col = column(path, &headers, "title")?;
    let text_col = column(path, &headers, "text")?;
    let label_col = column(path, &headers, "label")?;

    let mut ids = HashSet::new();
    let mut docs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let id = record.get(id_col).unwrap_or("").to_string();
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let text = record.get(text_col).unwrap_or("");
        if text.trim().is_empty() {
            return Err(Error::EmptyText(id));
        }
        let label = label_space.parse_label(record.get(label_col).unwrap_or(""))?;
        let title = record.get(title_col).unwrap_or("");
        docs.push(Document::from_title_text(id, title, text, Some(label), name));
    }
    LabeledCorpus::new(name, label_space, docs)
}

/// Writes a corpus in canonical form. The text column holds the body with
/// the title prefix removed, so loading the file back reproduces each body.
pub fn write_canonical(corpus: &LabeledCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = WriterBuilder::new().from_writer(file);
    writer.write_record(["id", "title", "text", "label"]).map_err(|e| Error::csv(path, e))?;
    for doc in corpus.documents() {
        let prefix = format!("{} ", doc.title);
        let (title, text) = if !doc.title.trim().is_empty() && doc.body.starts_with(&prefix) {
            (doc.title.as_str(), &doc.body[prefix.len()..])
        } else {
            ("", doc.body.as_str())
        };
        let label = doc.label.map(Label::as_str).unwrap_or("");
        writer.write_record([doc.id.as_str(), title, text, label]).map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn isot_two_single_rows() {
        let dir = tempfile::tempdir().unwrap();
        let fake = write(dir.path(), "Fake.csv", "title,text,subject,date\nA,body a,news,2017\n");
        let real = write(dir.path(), "True.csv", "title,text,subject,date\nB,body b,politics,2017\n");
        let corpus = load_isot(&fake, &real).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.counts(), [1, 1]);
        assert_eq!(corpus.documents()[0].id, "isot-fake-0");
        assert_eq!(corpus.documents()[1].id, "isot-real-0");
        assert_eq!(corpus.documents()[0].body, "A body a");
    }

    #[test]
    fn isot_skips_empty_text() {
        let dir = tempfile::tempdir().unwrap();
        let fake = write(
            dir.path(),
            "Fake.csv",
            "title,text,subject,date\n\
             One,\"first, quoted \"\"text\"\"\",news,d\n\
             Two,,news,d\n\
             Three,third,news,d\n",
        );
        let real = write(dir.path(), "True.csv", "title,text,subject,date\n");
        let corpus = load_isot(&fake, &real).unwrap();
        assert_eq!(corpus.count(Label::Fake), 2);
        assert_eq!(corpus.skipped_rows(), 1);
        assert_eq!(corpus.documents()[0].body, "One first, quoted \"text\"");
        assert_eq!(corpus.documents()[1].id, "isot-fake-2");
    }

    #[test]
    fn isot_missing_file_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let real = write(dir.path(), "True.csv", "title,text,subject,date\nB,b,s,d\n");
        let missing = dir.path().join("nope.csv");
        let err = load_isot(&missing, &real).unwrap_err();
        assert!(err.to_string().contains("nope.csv"));

        let bad = write(dir.path(), "Bad.csv", "title,subject,date\nB,s,d\n");
        assert!(matches!(load_isot(&bad, &real), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn canonical_counts_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ok = write(dir.path(), "cc.csv", "id,title,text,label\n1,t,a,fake\n2,t,b,FAKE\n3,,c,real\n4,t,d,Real\n");
        let corpus = load_canonical(&ok, LabelSpace::veracity()).unwrap();
        assert_eq!(corpus.counts(), [2, 2]);
        assert_eq!(corpus.name(), "cc");

        let op = write(dir.path(), "op.csv", "id,title,text,label\n1,t,a,opinion\n");
        let err = load_canonical(&op, LabelSpace::veracity()).unwrap_err();
        assert!(err.to_string().contains("unknown label"));

        let dup = write(dir.path(), "dup.csv", "id,title,text,label\n1,t,a,fake\n1,t,b,real\n");
        assert!(matches!(load_canonical(&dup, LabelSpace::veracity()), Err(Error::DuplicateId(_))));

        let empty = write(dir.path(), "empty.csv", "id,title,text,label\n1,t,  ,fake\n");
        assert!(matches!(load_canonical(&empty, LabelSpace::veracity()), Err(Error::EmptyText(_))));
    }

    #[test]
    fn canonical_write_then_load_preserves_bodies() {
        let dir = tempfile::tempdir().unwrap();
        let docs = vec![
            Document::from_title_text("a", "Head, line", "Text \"quoted\"\nnext", Some(Label::Fact), "x"),
            Document::from_title_text("b", "", "Only text", Some(Label::Opinion), "x"),
        ];
        let corpus = LabeledCorpus::new("fo", LabelSpace::subjectivity(), docs).unwrap();
        let path = dir.path().join("fo.csv");
        write_canonical(&corpus, &path).unwrap();
        let back = load_canonical(&path, LabelSpace::subjectivity()).unwrap();
        let bodies: Vec<_> = back.documents().iter().map(|d| d.body.clone()).collect();
        assert_eq!(bodies, vec!["Head, line Text \"quoted\"\nnext", "Only text"]);
        assert_eq!(back.labels(), corpus.labels());
    }
}
