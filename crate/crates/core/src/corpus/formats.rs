//! Readers and writers for `bio-tsv`, `bracket-lines` and `massive-parallel`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnnotatedUtterance, BioMode, CorpusError, Dataset, LabelSchema, RecordMeta};
use crate::bracket::{self, IndexLabels};
use crate::prompt::SlotOperation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    BioTsv,
    MassiveParallel,
    BracketLines,
}

impl DatasetFormat {
    pub const ALL: [DatasetFormat; 3] = [
        DatasetFormat::BioTsv,
        DatasetFormat::MassiveParallel,
        DatasetFormat::BracketLines,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetFormat::BioTsv => "bio-tsv",
            DatasetFormat::MassiveParallel => "massive-parallel",
            DatasetFormat::BracketLines => "bracket-lines",
        }
    }

    /// Guesses a format from a file extension (`.tsv`, `.jsonl`, `.bracket`/`.txt`).
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "tsv" => Some(DatasetFormat::BioTsv),
            "jsonl" | "json" => Some(DatasetFormat::MassiveParallel),
            "bracket" | "txt" => Some(DatasetFormat::BracketLines),
            _ => None,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetFormat::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown dataset format {s:?}"))
    }
}

impl std::fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn read_dataset(path: &Path, format: DatasetFormat, schema: Option<&LabelSchema>) -> Result<Dataset, CorpusError> {
    let text = fs::read_to_string(path)?;
    read_dataset_str(&text, format, &path.display().to_string(), schema)
}

pub fn read_dataset_str(
    text: &str,
    format: DatasetFormat,
    provenance: &str,
    schema: Option<&LabelSchema>,
) -> Result<Dataset, CorpusError> {
    let mut dataset = match format {
        DatasetFormat::BioTsv => read_bio_tsv(text, schema)?,
        DatasetFormat::BracketLines => read_bracket_lines(text, schema)?,
        DatasetFormat::MassiveParallel => read_massive(text, schema)?,
    };
    dataset.provenance = provenance.to_string();
    Ok(dataset)
}

pub fn write_dataset(path: &Path, d: &Dataset, format: DatasetFormat) -> Result<(), CorpusError> {
    let text = write_dataset_string(d, format)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_dataset_string(d: &Dataset, format: DatasetFormat) -> Result<String, CorpusError> {
    match format {
        DatasetFormat::BioTsv => Ok(write_bio_tsv(d)),
        DatasetFormat::BracketLines => write_bracket_lines(d),
        DatasetFormat::MassiveParallel => write_massive(d),
    }
}

#[derive(Debug, Default)]
struct Header {
    intent: String,
    lang: String,
    domain: Option<String>,
    slots: Vec<String>,
}

fn parse_header(line: &str, lineno: usize) -> Result<Header, CorpusError> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| CorpusError::format(lineno, "expected `# intent=<label> lang=<code>` header"))?;
    let mut header = Header::default();
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| CorpusError::format(lineno, format!("header field {field:?} is not key=value")))?;
        match key {
            "intent" => header.intent = value.to_string(),
            "lang" => header.lang = value.to_string(),
            "domain" => header.domain = Some(value.to_string()),
            "slots" => {
                header.slots = value.split(',').map(str::to_string).collect();
                if header.slots.iter().any(String::is_empty) {
                    return Err(CorpusError::format(lineno, "empty slot label in header"));
                }
            }
            _ => return Err(CorpusError::format(lineno, format!("unknown header key {key:?}"))),
        }
    }
    if header.intent.is_empty() || header.lang.is_empty() {
        return Err(CorpusError::format(lineno, "header requires intent= and lang="));
    }
    Ok(header)
}

fn write_header(out: &mut String, u: &AnnotatedUtterance, with_slots: bool) {
    write!(out, "# intent={} lang={}", u.intent, u.language).unwrap();
    if let Some(d) = &u.domain {
        write!(out, " domain={d}").unwrap();
    }
    if with_slots && !u.slots.is_empty() {
        let labels: Vec<&str> = u.slots.iter().map(|s| s.label.as_str()).collect();
        write!(out, " slots={}", labels.join(",")).unwrap();
    }
    out.push('\n');
}

fn finish(
    mut u: AnnotatedUtterance,
    header: Header,
    schema: Option<&LabelSchema>,
    line: usize,
) -> Result<AnnotatedUtterance, CorpusError> {
    u.domain = header.domain;
    if let Some(schema) = schema {
        schema.check(&u, line)?;
    }
    Ok(u)
}

fn read_bio_tsv(text: &str, schema: Option<&LabelSchema>) -> Result<Dataset, CorpusError> {
    let mut records = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    loop {
        while lines.next_if(|(_, l)| l.trim().is_empty()).is_some() {}
        let Some((header_line, line)) = lines.next() else {
            break;
        };
        let header = parse_header(line, header_line)?;
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        while let Some((lineno, line)) = lines.next_if(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(CorpusError::format(
                    lineno,
                    format!("expected token<TAB>tag, found {} field(s)", fields.len()),
                ));
            }
            tokens.push(fields[0].to_string());
            tags.push(fields[1].to_string());
        }
        let u = AnnotatedUtterance::from_bio(
            &tokens,
            &tags,
            header.intent.clone(),
            header.lang.clone(),
            BioMode::Strict,
        )
        .map_err(|e| {
            let line = match &e {
                CorpusError::IllegalTagSequence { position, .. } => header_line + 1 + position,
                _ => header_line,
            };
            CorpusError::format(line, e.to_string())
        })?;
        records.push(finish(u, header, schema, header_line)?);
    }
    Ok(Dataset::new(records, ""))
}

fn write_bio_tsv(d: &Dataset) -> String {
    let mut out = String::new();
    for u in &d.records {
        write_header(&mut out, u, false);
        let (tokens, tags) = u.to_bio();
        for (tok, tag) in tokens.iter().zip(&tags) {
            writeln!(out, "{tok}\t{tag}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn labels_map(labels: &[String]) -> IndexLabels {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| (i as u32 + 1, l.clone()))
        .collect()
}

fn read_bracket_lines(text: &str, schema: Option<&LabelSchema>) -> Result<Dataset, CorpusError> {
    let mut records = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((header_line, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let header = parse_header(line, header_line)?;
        let (lineno, body) = lines
            .next()
            .ok_or_else(|| CorpusError::format(header_line + 1, "missing utterance line after header"))?;
        let expected = labels_map(&header.slots);
        let tagged = bracket::parse_brackets(body, &expected)
            .map_err(|report| CorpusError::format(lineno, format!("bracket annotation rejected: {report}")))?;
        let u = AnnotatedUtterance::new(tagged.tokens, header.intent.clone(), header.lang.clone(), tagged.slots)
            .map_err(|e| CorpusError::format(lineno, e.to_string()))?;
        records.push(finish(u, header, schema, lineno)?);
    }
    Ok(Dataset::new(records, ""))
}

fn write_bracket_lines(d: &Dataset) -> Result<String, CorpusError> {
    let mut out = String::new();
    for u in &d.records {
        write_header(&mut out, u, true);
        let s = bracket::serialize_canonical(u).map_err(|e| CorpusError::InvalidUtterance(e.to_string()))?;
        out.push_str(s.as_str());
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct SlotMethodEntry {
    slot: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<SlotOperation>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MassiveRecord {
    id: String,
    locale: String,
    intent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    annot_utt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<String>,
    #[serde(default)]
    slot_method: Vec<SlotMethodEntry>,
}

fn read_massive(text: &str, schema: Option<&LabelSchema>) -> Result<Dataset, CorpusError> {
    let mut records = Vec::new();
    let mut meta = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MassiveRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::format(lineno, format!("invalid JSON record: {e}")))?;
        let labels: Vec<String> = rec.slot_method.iter().map(|m| m.slot.clone()).collect();
        if labels.iter().any(String::is_empty) {
            return Err(CorpusError::format(lineno, "empty slot label in slot_method"));
        }
        let tagged = bracket::parse_brackets(&rec.annot_utt, &labels_map(&labels))
            .map_err(|report| CorpusError::format(lineno, format!("annot_utt rejected: {report}")))?;
        // slot_method[k-1] describes bracket index k; spans come back in text order.
        let slot_methods = tagged
            .indices
            .iter()
            .map(|&k| rec.slot_method[(k - 1) as usize].method)
            .collect();
        let mut u = AnnotatedUtterance::new(tagged.tokens, rec.intent, rec.locale, tagged.slots)
            .map_err(|e| CorpusError::format(lineno, e.to_string()))?;
        u.domain = rec.scenario;
        if let Some(schema) = schema {
            schema.check(&u, lineno)?;
        }
        records.push(u);
        meta.push(RecordMeta {
            id: rec.id,
            partition: rec.partition,
            slot_indices: tagged.indices,
            slot_methods,
        });
    }
    let mut d = Dataset::new(records, "");
    d.meta = Some(meta);
    Ok(d)
}

fn write_massive(d: &Dataset) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (i, u) in d.records.iter().enumerate() {
        let meta = d.meta.as_ref().and_then(|m| m.get(i));
        let indices = match meta {
            Some(m) if m.slot_indices.len() == u.slots.len() => m.slot_indices.clone(),
            _ => bracket::identity_index_map(u.slots.len()),
        };
        let (annot, _) = bracket::serialize_brackets(&u.tokens, &u.slots, &indices)
            .map_err(|e| CorpusError::InvalidUtterance(e.to_string()))?;
        let mut slot_method: Vec<Option<SlotMethodEntry>> = (0..u.slots.len()).map(|_| None).collect();
        for (j, (span, &k)) in u.slots.iter().zip(&indices).enumerate() {
            let entry = slot_method
                .get_mut(k as usize - 1)
                .ok_or_else(|| CorpusError::InvalidUtterance(format!("bracket index {k} out of range")))?;
            *entry = Some(SlotMethodEntry {
                slot: span.label.clone(),
                method: meta.and_then(|m| m.slot_methods.get(j).copied().flatten()),
            });
        }
        let rec = MassiveRecord {
            id: meta.map(|m| m.id.clone()).unwrap_or_else(|| i.to_string()),
            locale: u.language.clone(),
            intent: u.intent.clone(),
            scenario: u.domain.clone(),
            annot_utt: annot.into_string(),
            partition: meta.and_then(|m| m.partition.clone()),
            slot_method: slot_method
                .into_iter()
                .map(|e| e.expect("indices are a permutation"))
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    Ok(out)
}
