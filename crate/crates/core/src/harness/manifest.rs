use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::harmonize::CompositionTask;
use crate::imagecore::{load_image, load_mask};
use crate::scheduler::Conditioning;

/// One source/target pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    pub paste_x: usize,
    pub paste_y: usize,
    pub src_gsd: f64,
    pub tar_gsd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_country: Option<String>,
}

impl ManifestEntry {
    /// Prompt text for the entry, present when both labels are given.
    pub fn prompt(&self) -> Option<String> {
        match (&self.source_label, &self.target_country) {
            (Some(label), Some(country)) => Some(format!("A satellite image of a {label} in {country}")),
            _ => None,
        }
    }

    pub fn conditioning(&self) -> Conditioning {
        self.prompt().map(|p| Conditioning::from_text(&p)).unwrap_or_default()
    }

    /// Loads the images; relative paths resolve against `base_dir`.
    pub fn load_task(&self, base_dir: &Path) -> Result<CompositionTask> {
        let resolve = |p: &Path| if p.is_relative() { base_dir.join(p) } else { p.to_path_buf() };
        let source = load_image(resolve(&self.source_path))?;
        let target = load_image(resolve(&self.target_path))?;
        let mut task = CompositionTask::new(source, target, (self.paste_x, self.paste_y), self.src_gsd, self.tar_gsd)
            .with_conditioning(self.conditioning());
        if let Some(m) = &self.mask_path {
            task = task.with_mask(load_mask(resolve(m))?);
        }
        Ok(task)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative entry paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("manifest entries serialize")
    }
}

fn invalid(entry: usize, field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        entry,
        field: field.into(),
        reason: reason.into(),
    }
}

fn required<'a>(obj: &'a Map<String, Value>, entry: usize, field: &str) -> Result<&'a Value> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(invalid(entry, field, "is missing")),
        Some(v) => Ok(v),
    }
}

fn path_field(obj: &Map<String, Value>, entry: usize, field: &str) -> Result<Option<PathBuf>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if !s.is_empty() => Ok(Some(PathBuf::from(s))),
        Some(_) => Err(invalid(entry, field, "must be a non-empty string")),
    }
}

fn text_field(obj: &Map<String, Value>, entry: usize, field: &str) -> Result<Option<String>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(invalid(entry, field, "must be a string")),
    }
}

fn coord_field(obj: &Map<String, Value>, entry: usize, field: &str) -> Result<usize> {
    let v = required(obj, entry, field)?;
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| invalid(entry, field, format!("must be a non-negative integer, got {v}")))
}

fn gsd_field(obj: &Map<String, Value>, entry: usize, field: &str) -> Result<f64> {
    let v = required(obj, entry, field)?;
    match v.as_f64() {
        Some(g) if g.is_finite() && g > 0.0 => Ok(g),
        _ => Err(invalid(entry, field, format!("must be a positive number, got {v}"))),
    }
}

const KNOWN_FIELDS: [&str; 9] = [
    "source_path",
    "target_path",
    "mask_path",
    "paste_x",
    "paste_y",
    "src_gsd",
    "tar_gsd",
    "source_label",
    "target_country",
];

fn parse_entry(i: usize, value: &Value) -> Result<ManifestEntry> {
    let obj = value
        .as_object()
        .ok_or_else(|| invalid(i, "<entry>", "must be a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        return Err(invalid(i, k, "is not a known field"));
    }
    let path = |field: &str| -> Result<PathBuf> {
        required(obj, i, field)?;
        Ok(path_field(obj, i, field)?.expect("checked present"))
    };
    Ok(ManifestEntry {
        source_path: path("source_path")?,
        target_path: path("target_path")?,
        mask_path: path_field(obj, i, "mask_path")?,
        paste_x: coord_field(obj, i, "paste_x")?,
        paste_y: coord_field(obj, i, "paste_y")?,
        src_gsd: gsd_field(obj, i, "src_gsd")?,
        tar_gsd: gsd_field(obj, i, "tar_gsd")?,
        source_label: text_field(obj, i, "source_label")?,
        target_country: text_field(obj, i, "target_country")?,
    })
}

/// Parses manifest JSON text; entry numbers in errors are zero-based.
pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Array(items) = value else {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "manifest must be a JSON array of entries".into(),
        });
    };
    let entries = items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_entry(i, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Manifest {
        entries,
        base_dir: base_dir.into(),
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{save_image, ImageGrid};

    const MINIMAL: &str = r#"[{"source_path":"s.png","target_path":"t.png","paste_x":2,"paste_y":3,"src_gsd":0.5,"tar_gsd":1.0}]"#;

    #[test]
    fn minimal_entry_loads_with_full_mask() {
        let dir = tempfile::tempdir().unwrap();
        save_image(&ImageGrid::filled(4, 4, 3, 0.2).unwrap(), dir.path().join("s.png")).unwrap();
        save_image(&ImageGrid::filled(10, 10, 3, 0.8).unwrap(), dir.path().join("t.png")).unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, MINIMAL).unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.entries.len(), 1);
        let task = m.entries[0].load_task(&m.base_dir).unwrap();
        assert!(task.source_mask.is_none());
        let placed = crate::harmonize::place(&task).unwrap();
        assert_eq!(placed.source_mask.count(), 4);
        assert!(task.conditioning.as_bytes().is_empty());
    }

    #[test]
    fn labels_fill_the_prompt_template() {
        let text = r#"[{"source_path":"s.png","target_path":"t.png","paste_x":0,"paste_y":0,"src_gsd":1,"tar_gsd":1,"source_label":"port","target_country":"Japan"}]"#;
        let m = parse_manifest(text, "").unwrap();
        assert_eq!(
            m.entries[0].conditioning().as_text(),
            Some("A satellite image of a port in Japan")
        );
    }

    #[test]
    fn validation_names_the_field() {
        let cases = [
            (MINIMAL.replace("0.5", "0"), "src_gsd"),
            (MINIMAL.replace(r#""paste_x":2,"#, ""), "paste_x"),
            (MINIMAL.replace(r#""paste_y":3"#, r#""paste_y":-3"#), "paste_y"),
            (MINIMAL.replace(r#""target_path":"t.png","#, ""), "target_path"),
            (MINIMAL.replace(r#""tar_gsd":1.0"#, r#""tar_gsd":"x""#), "tar_gsd"),
            (MINIMAL.replace(r#""src_gsd""#, r#""src_gds""#), "src_gds"),
        ];
        for (text, want) in cases {
            match parse_manifest(&text, "") {
                Err(Error::Validation { entry: 0, field, .. }) => assert_eq!(field, want),
                other => panic!("{want}: {other:?}"),
            }
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        match parse_manifest("[\n{\"source_path\": \n", "") {
            Err(Error::Parse { line, .. }) => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_manifest("{}", ""), Err(Error::Parse { .. })));
    }

    #[test]
    fn serialization_round_trips() {
        let m = parse_manifest(MINIMAL, "").unwrap();
        assert_eq!(parse_manifest(&m.to_json(), "").unwrap(), m);
    }
}
