//! Dataset ingestion and the feature CSV format.
//!
//! A dataset is `root/<class>/<image>.{pgm,png}`. Classes and files are taken
//! in byte order of their names so row order never depends on directory
//! enumeration. Feature CSV columns are `sample_id`, `class`, then one
//! `ln_s_a<α>_e<ε>` column per descriptor entry, α-major and ε-minor. Sample
//! ids are `<class>/<file>#<window>`, windows numbered row-major from 0.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::image::{load_image, split_windows};
use crate::prism::{descriptor_vector, DescriptorLayout};
use crate::stats::{FeatureMatrix, LabeledDataset};
use crate::GrayImage;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "png"];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetImage {
    pub class: usize,
    pub path: PathBuf,
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub images: Vec<DatasetImage>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

pub fn scan_dataset(root: &Path) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::Ingest(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }
    let mut classes = Vec::new();
    let mut images = Vec::new();
    for (name, path) in sorted_entries(root)? {
        if !path.is_dir() {
            continue;
        }
        let files: Vec<(String, PathBuf)> = sorted_entries(&path)?
            .into_iter()
            .filter(|(_, p)| is_image(p))
            .collect();
        if files.is_empty() {
            return Err(Error::Ingest(format!(
                "class directory {} contains no .pgm or .png images",
                path.display()
            )));
        }
        let class = classes.len();
        classes.push(name);
        images.extend(files.into_iter().map(|(file_name, path)| DatasetImage {
            class,
            path,
            file_name,
        }));
    }
    if classes.is_empty() {
        return Err(Error::Ingest(format!(
            "dataset root {} has no class subdirectories",
            root.display()
        )));
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        classes,
        images,
    })
}

impl Dataset {
    /// SHA-256 over every image's relative path and bytes, in dataset order.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for img in &self.images {
            let bytes = fs::read(&img.path).map_err(|e| Error::io(&img.path, e))?;
            let rel = format!("{}/{}", self.classes[img.class], img.file_name);
            h.update((rel.len() as u64).to_le_bytes());
            h.update(rel.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex(&h.finalize()))
    }

    pub fn load_images(&self) -> Result<Vec<GrayImage>> {
        self.images
            .par_iter()
            .map(|e| load_image(&e.path))
            .collect()
    }

    /// Cuts each loaded image into `window × window` tiles.
    pub fn split_all(&self, images: &[GrayImage], window: usize) -> Result<Vec<Vec<GrayImage>>> {
        images
            .par_iter()
            .zip(&self.images)
            .map(|(img, entry)| {
                let tiles = split_windows(img, window)?;
                if tiles.is_empty() {
                    return Err(Error::Ingest(format!(
                        "{} is {}x{}, smaller than the {window}-pixel window",
                        entry.path.display(),
                        img.width(),
                        img.height()
                    )));
                }
                Ok(tiles)
            })
            .collect()
    }

    pub fn load_windows(&self, window: usize) -> Result<Vec<Vec<GrayImage>>> {
        self.split_all(&self.load_images()?, window)
    }

    pub fn sample_id(&self, image: usize, window: usize) -> String {
        let entry = &self.images[image];
        format!("{}/{}#{window}", self.classes[entry.class], entry.file_name)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

pub fn column_name(alpha: f64, eps: usize) -> String {
    format!("ln_s_a{alpha}_e{eps}")
}

/// Inverse of [`column_name`].
pub fn parse_column_name(name: &str) -> Option<(f64, usize)> {
    let rest = name.strip_prefix("ln_s_a")?;
    let (a, e) = rest.rsplit_once("_e")?;
    Some((a.parse().ok()?, e.parse().ok()?))
}

/// Descriptor rows with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dataset: LabeledDataset,
}

impl FeatureTable {
    pub fn features(&self) -> &FeatureMatrix {
        &self.dataset.features
    }

    /// Distinct α values of the columns, in column order.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = Vec::new();
        for c in self.features().columns() {
            let (a, _) = parse_column_name(c).ok_or_else(|| {
                Error::Argument(format!("column {c:?} is not a descriptor column"))
            })?;
            if !out.contains(&a) {
                out.push(a);
            }
        }
        Ok(out)
    }

    /// The dataset restricted to one exponent's columns.
    pub fn for_alpha(&self, alpha: f64) -> Result<LabeledDataset> {
        let cols: Vec<usize> = self
            .features()
            .columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| parse_column_name(c).is_some_and(|(a, _)| a == alpha))
            .map(|(j, _)| j)
            .collect();
        if cols.is_empty() {
            return Err(Error::Argument(format!(
                "no descriptor columns for alpha {alpha}"
            )));
        }
        self.dataset
            .with_features(self.features().select_columns(&cols)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let m = self.features();
        let mut header = vec!["sample_id".to_string(), "class".to_string()];
        header.extend(m.columns().iter().cloned());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for i in 0..m.rows() {
            let mut rec = vec![
                m.row_ids()[i].clone(),
                self.dataset.class_names[self.dataset.labels[i]].clone(),
            ];
            rec.extend(m.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = r.records();
        let header = match records.next() {
            Some(rec) => rec.map_err(|e| parse_error(&e, 1))?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty feature file".into(),
                })
            }
        };
        if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "class" {
            return Err(Error::Parse {
                line: 1,
                message: "header must be sample_id,class,<descriptor columns…>".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let cols = columns.len();

        let mut ids = Vec::new();
        let mut class_of_row = Vec::new();
        let mut data = Vec::new();
        for rec in records {
            let rec = rec.map_err(|e| parse_error(&e, 0))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != cols + 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", cols + 2, rec.len()),
                });
            }
            ids.push(rec[0].to_string());
            class_of_row.push(rec[1].to_string());
            for (j, field) in rec.iter().skip(2).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {}: {field:?} is not a number", columns[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {}: non-finite value", columns[j]),
                    });
                }
                data.push(v);
            }
        }
        if ids.is_empty() {
            return Err(Error::Parse {
                line: 2,
                message: "feature file has no samples".into(),
            });
        }
        let class_names: Vec<String> = class_of_row
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let labels = class_of_row
            .iter()
            .map(|c| class_names.binary_search(c).expect("collected above"))
            .collect();
        let matrix = FeatureMatrix::new(ids.len(), cols, data, ids, columns)?;
        Ok(Self {
            dataset: LabeledDataset::new(matrix, labels, class_names)?,
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn parse_error(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Descriptor rows for every window, in sample order.
pub fn describe_windows(
    cfg: &ExperimentConfig,
    windows: &[GrayImage],
) -> Result<(Vec<Vec<f64>>, DescriptorLayout)> {
    let range = cfg.exponent_range()?;
    let described: Vec<(Vec<f64>, DescriptorLayout)> = windows
        .par_iter()
        .map(|w| {
            let d = descriptor_vector(w, &cfg.schedule_for(w)?, &range)?;
            Ok((d.values, d.layout))
        })
        .collect::<Result<_>>()?;
    let layout = described
        .first()
        .map(|d| d.1.clone())
        .ok_or_else(|| Error::Ingest("no windows to describe".into()))?;
    if let Some(i) = described.iter().position(|d| d.1 != layout) {
        return Err(Error::Dimension(format!(
            "window {i} has a different descriptor layout than window 0"
        )));
    }
    Ok((described.into_iter().map(|d| d.0).collect(), layout))
}

/// Builds the feature table from windows grouped per dataset image.
pub fn feature_table(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    windows: &[Vec<GrayImage>],
) -> Result<FeatureTable> {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut flat = Vec::new();
    for (i, tiles) in windows.iter().enumerate() {
        for (k, tile) in tiles.iter().enumerate() {
            ids.push(dataset.sample_id(i, k));
            labels.push(dataset.images[i].class);
            flat.push(tile.clone());
        }
    }
    let (rows, layout) = describe_windows(cfg, &flat)?;
    let columns: Vec<String> = layout.entries().map(|(a, e)| column_name(a, e)).collect();
    let data = rows.into_iter().flatten().collect();
    let matrix = FeatureMatrix::new(ids.len(), columns.len(), data, ids, columns)?;
    Ok(FeatureTable {
        dataset: LabeledDataset::new(matrix, labels, dataset.classes.clone())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_names_round_trip() {
        for (a, e) in [(1.0, 2), (1.1, 64), (-0.5, 3), (0.0, 10)] {
            assert_eq!(parse_column_name(&column_name(a, e)), Some((a, e)));
        }
        assert_eq!(column_name(1.0, 2), "ln_s_a1_e2");
        assert_eq!(parse_column_name("class"), None);
    }

    #[test]
    fn csv_parse_errors_name_the_line() {
        let text = "sample_id,class,ln_s_a1_e2\na#0,a,1.5\nb#0,b,oops\n";
        match FeatureTable::from_reader(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("ln_s_a1_e2"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let short = "sample_id,class,ln_s_a1_e2,ln_s_a1_e4\na#0,a,1.5,2\nb#0,b,3\n";
        assert!(matches!(
            FeatureTable::from_reader(short.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            FeatureTable::from_reader("id,label,x\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let text =
            "sample_id,class,ln_s_a1_e2,ln_s_a2_e2\nx#0,b,0.1,1e-300\ny#0,a,3.141592653589793,-2\n";
        let t = FeatureTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(t.dataset.class_names, vec!["a", "b"]);
        assert_eq!(t.dataset.labels, vec![1, 0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        t.write_csv(&p).unwrap();
        let back = FeatureTable::read_csv(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.alphas().unwrap(), vec![1.0, 2.0]);
        assert_eq!(t.for_alpha(2.0).unwrap().features.row(0), &[1e-300]);
    }
}
