//! Categorical tables: loading, indexing, description and synthesis.
//!
//! Values are stored per attribute as dictionary codes in first-appearance
//! order. Labels ride along for evaluation only; nothing in the
//! representation-learning path reads them.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{component_rng, Stream};

/// Stand-in value for empty cells.
pub const MISSING: &str = "⟨missing⟩";

/// Which input column holds the class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDataset {
    attr_names: Vec<String>,
    value_dicts: Vec<Vec<String>>,
    /// `codes[j][i]` is the dictionary index of object `i` in attribute `j`.
    codes: Vec<Vec<u32>>,
    labels: Option<Vec<String>>,
    label_name: Option<String>,
    offsets: Vec<usize>,
}

impl CategoricalDataset {
    /// Builds a dataset from raw string columns, assigning dictionary codes
    /// in first-appearance order. Empty cells become [`MISSING`].
    pub fn from_columns(
        attr_names: Vec<String>,
        columns: Vec<Vec<String>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::data("dataset has no attributes"));
        }
        if attr_names.len() != columns.len() {
            return Err(Error::data(format!(
                "{} attribute names for {} columns",
                attr_names.len(),
                columns.len()
            )));
        }
        let n_o = columns[0].len();
        let mut dicts = Vec::with_capacity(columns.len());
        let mut codes = Vec::with_capacity(columns.len());
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n_o {
                return Err(Error::data(format!(
                    "column {} has {} rows, expected {n_o}",
                    attr_names[j],
                    col.len()
                )));
            }
            let mut dict: Vec<String> = Vec::new();
            let mut lookup: HashMap<String, u32> = HashMap::new();
            let mut col_codes = Vec::with_capacity(n_o);
            for cell in col {
                let cell = if cell.is_empty() {
                    MISSING.to_string()
                } else {
                    cell
                };
                let code = match lookup.get(&cell) {
                    Some(&c) => c,
                    None => {
                        let c = dict.len() as u32;
                        lookup.insert(cell.clone(), c);
                        dict.push(cell);
                        c
                    }
                };
                col_codes.push(code);
            }
            dicts.push(dict);
            codes.push(col_codes);
        }
        Self::from_codes(attr_names, dicts, codes, labels)
    }

    /// Builds a dataset from pre-coded columns and validates every invariant.
    pub fn from_codes(
        attr_names: Vec<String>,
        value_dicts: Vec<Vec<String>>,
        codes: Vec<Vec<u32>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n_a = codes.len();
        if n_a == 0 {
            return Err(Error::data("dataset has no attributes"));
        }
        if attr_names.len() != n_a || value_dicts.len() != n_a {
            return Err(Error::data("attribute names, dictionaries and columns disagree in count"));
        }
        let n_o = codes[0].len();
        if n_o == 0 {
            return Err(Error::data("dataset has no objects"));
        }
        for j in 0..n_a {
            let dict = &value_dicts[j];
            if dict.is_empty() {
                return Err(Error::data(format!("attribute {} has an empty dictionary", attr_names[j])));
            }
            let mut seen = std::collections::HashSet::with_capacity(dict.len());
            if !dict.iter().all(|v| seen.insert(v.as_str())) {
                return Err(Error::data(format!("attribute {} has duplicate values", attr_names[j])));
            }
            if codes[j].len() != n_o {
                return Err(Error::data(format!("attribute {} has a ragged column", attr_names[j])));
            }
            if let Some(&bad) = codes[j].iter().find(|&&c| c as usize >= dict.len()) {
                return Err(Error::data(format!(
                    "attribute {} has out-of-range code {bad}",
                    attr_names[j]
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n_o {
                return Err(Error::data(format!("{} labels for {n_o} objects", l.len())));
            }
        }
        let mut offsets = Vec::with_capacity(n_a);
        let mut acc = 0;
        for d in &value_dicts {
            offsets.push(acc);
            acc += d.len();
        }
        Ok(Self {
            attr_names,
            value_dicts,
            codes,
            labels,
            label_name: None,
            offsets,
        })
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = Some(name.into());
        self
    }

    pub fn n_objects(&self) -> usize {
        self.codes[0].len()
    }

    pub fn n_attributes(&self) -> usize {
        self.codes.len()
    }

    /// Total number of distinct values over all attributes.
    pub fn n_values(&self) -> usize {
        self.value_dicts.iter().map(Vec::len).sum()
    }

    pub fn n_values_in(&self, attr: usize) -> usize {
        self.value_dicts[attr].len()
    }

    pub fn attr_names(&self) -> &[String] {
        &self.attr_names
    }

    pub fn value_dict(&self, attr: usize) -> &[String] {
        &self.value_dicts[attr]
    }

    pub fn value_dicts(&self) -> &[Vec<String>] {
        &self.value_dicts
    }

    /// Dictionary codes of attribute `attr`, one per object.
    pub fn column(&self, attr: usize) -> &[u32] {
        &self.codes[attr]
    }

    pub fn cell(&self, object: usize, attr: usize) -> usize {
        self.codes[attr][object] as usize
    }

    /// Offset of attribute `attr`'s dictionary inside the concatenated value list.
    pub fn global_value_offset(&self, attr: usize) -> usize {
        self.offsets[attr]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_name.as_deref()
    }

    /// Labels as dense class ids in first-appearance order.
    pub fn label_ids(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|l| encode_labels(l).0)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| encode_labels(l).1.len())
    }

    /// Drops the labels, e.g. before handing the table to a learner.
    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            label_name: None,
            ..self.clone()
        }
    }

    /// Object counts per value of attribute `attr`.
    pub fn value_counts(&self, attr: usize) -> Vec<usize> {
        let mut counts = vec![0; self.n_values_in(attr)];
        for &c in &self.codes[attr] {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Re-codes another table's cells against this table's dictionaries.
    /// Unseen values are rejected.
    pub fn recode(&self, other: &CategoricalDataset) -> Result<CategoricalDataset> {
        if other.n_attributes() != self.n_attributes() {
            return Err(Error::data(format!(
                "expected {} attributes, found {}",
                self.n_attributes(),
                other.n_attributes()
            )));
        }
        let mut codes = Vec::with_capacity(self.n_attributes());
        for j in 0..self.n_attributes() {
            let lookup: HashMap<&str, u32> = self.value_dicts[j]
                .iter()
                .enumerate()
                .map(|(i, v)| (v.as_str(), i as u32))
                .collect();
            let mut col = Vec::with_capacity(other.n_objects());
            for &c in other.column(j) {
                let v = &other.value_dicts[j][c as usize];
                match lookup.get(v.as_str()) {
                    Some(&code) => col.push(code),
                    None => {
                        return Err(Error::data(format!(
                            "unseen value {v:?} in attribute {}",
                            self.attr_names[j]
                        )))
                    }
                }
            }
            codes.push(col);
        }
        let mut out = CategoricalDataset::from_codes(
            self.attr_names.clone(),
            self.value_dicts.clone(),
            codes,
            other.labels.clone(),
        )?;
        out.label_name = other.label_name.clone();
        Ok(out)
    }

    /// CSV text with a header; the label column, if any, goes last.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header: Vec<&str> = self.attr_names.iter().map(String::as_str).collect();
        if self.labels.is_some() {
            header.push(self.label_name.as_deref().unwrap_or("label"));
        }
        w.write_record(&header).map_err(|e| Error::parse(e.to_string()))?;
        for i in 0..self.n_objects() {
            let mut row: Vec<&str> = (0..self.n_attributes())
                .map(|j| self.value_dicts[j][self.cell(i, j)].as_str())
                .collect();
            if let Some(l) = &self.labels {
                row.push(&l[i]);
            }
            w.write_record(&row).map_err(|e| Error::parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::parse(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_text(path, &self.to_csv_string()?)
    }
}

fn encode_labels(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut classes: Vec<String> = Vec::new();
    let mut lookup: HashMap<&str, usize> = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            *lookup.entry(l.as_str()).or_insert_with(|| {
                classes.push(l.clone());
                classes.len() - 1
            })
        })
        .collect();
    (ids, classes)
}

/// Loads a CSV file, treating every column as categorical text.
pub fn load_csv(path: &Path, has_header: bool, label_column: Option<&LabelColumn>) -> Result<CategoricalDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, has_header, label_column)
}

pub fn read_csv<R: Read>(
    reader: R,
    has_header: bool,
    label_column: Option<&LabelColumn>,
) -> Result<CategoricalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut width = None;
    let mut line = 0usize;
    for rec in records.by_ref() {
        line += 1;
        let rec = rec.map_err(|e| Error::parse(format!("row {line}: {e}")))?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::parse(format!(
                    "row {line} has {} fields, expected {w}",
                    fields.len()
                )))
            }
            _ => {}
        }
        if has_header && header.is_none() {
            header = Some(fields);
        } else {
            rows.push(fields);
        }
    }
    let width = width.ok_or_else(|| Error::parse("empty file"))?;
    if rows.is_empty() {
        return Err(Error::parse("file has no data rows"));
    }
    let names = header.unwrap_or_else(|| (0..width).map(|j| format!("attr{j}")).collect());

    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Index(i)) if *i < width => Some(*i),
        Some(LabelColumn::Index(i)) => {
            return Err(Error::config(format!("label column index {i} out of range (width {width})")))
        }
        Some(LabelColumn::Name(n)) => Some(
            names
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::config(format!("unknown label column {n:?}")))?,
        ),
    };
    if width - usize::from(label_idx.is_some()) == 0 {
        return Err(Error::data("no attribute columns besides the label"));
    }

    let mut columns: Vec<Vec<String>> = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (j, cell) in row.into_iter().enumerate() {
            columns[j].push(cell);
        }
    }
    let mut labels = None;
    let mut label_name = None;
    let mut attr_names = names;
    if let Some(li) = label_idx {
        labels = Some(columns.remove(li));
        label_name = Some(attr_names.remove(li));
    }
    let ds = CategoricalDataset::from_columns(attr_names, columns, labels)?;
    Ok(match label_name {
        Some(n) => ds.with_label_name(n),
        None => ds,
    })
}

/// Summary counts of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFactors {
    pub n_o: usize,
    pub n_a: usize,
    /// Number of classes, 0 when unlabeled.
    pub n_c: usize,
    /// Mean number of distinct values per attribute.
    pub n_av: f64,
    /// Largest number of distinct values over attributes.
    pub n_mv: usize,
}

pub fn describe(ds: &CategoricalDataset) -> DataFactors {
    let n_a = ds.n_attributes();
    DataFactors {
        n_o: ds.n_objects(),
        n_a,
        n_c: ds.n_classes(),
        n_av: ds.n_values() as f64 / n_a as f64,
        n_mv: (0..n_a).map(|j| ds.n_values_in(j)).max().unwrap_or(0),
    }
}

impl fmt::Display for DataFactors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_o={}", self.n_o)?;
        writeln!(f, "n_a={}", self.n_a)?;
        writeln!(f, "n_c={}", self.n_c)?;
        writeln!(f, "n_av={}", self.n_av)?;
        writeln!(f, "n_mv={}", self.n_mv)
    }
}

/// Parameters of the planted-cluster generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_o: usize,
    pub n_a: usize,
    pub n_mv: usize,
    pub n_clusters: usize,
    /// Probability that a cell takes its cluster's preferred value.
    pub separation: f64,
    pub seed: u64,
}

/// Generates a labeled table with planted clusters.
///
/// Every attribute gets exactly `n_mv` distinct values. Each cluster prefers
/// one value per attribute (distinct across clusters while `n_clusters <=
/// n_mv`); a cell takes the preferred value with probability `separation`
/// and a uniform draw otherwise. Values that never got drawn are planted on
/// objects of cluster `value % n_clusters`.
pub fn synth_generate(spec: &SynthSpec) -> Result<CategoricalDataset> {
    let SynthSpec {
        n_o,
        n_a,
        n_mv,
        n_clusters,
        separation,
        seed,
    } = *spec;
    if n_o == 0 || n_a == 0 || n_mv == 0 || n_clusters == 0 {
        return Err(Error::config("synthetic counts must be positive"));
    }
    if n_clusters > n_o {
        return Err(Error::config(format!("{n_clusters} clusters for {n_o} objects")));
    }
    if n_mv > n_o {
        return Err(Error::config(format!("{n_mv} values cannot all appear in {n_o} objects")));
    }
    if !(0.0..=1.0).contains(&separation) {
        return Err(Error::config(format!("separation {separation} outside [0, 1]")));
    }
    let mut rng = component_rng(seed, Stream::Synth);

    let mut cluster: Vec<usize> = (0..n_o).map(|i| i % n_clusters).collect();
    cluster.shuffle(&mut rng);

    let mut codes: Vec<Vec<usize>> = Vec::with_capacity(n_a);
    for _ in 0..n_a {
        let mut perm: Vec<usize> = (0..n_mv).collect();
        perm.shuffle(&mut rng);
        let preferred: Vec<usize> = (0..n_clusters).map(|c| perm[c % n_mv]).collect();
        let mut col: Vec<usize> = cluster
            .iter()
            .map(|&c| {
                if rng.random::<f64>() < separation {
                    preferred[c]
                } else {
                    rng.random_range(0..n_mv)
                }
            })
            .collect();

        let mut counts = vec![0usize; n_mv];
        for &v in &col {
            counts[v] += 1;
        }
        for v in 0..n_mv {
            if counts[v] > 0 {
                continue;
            }
            let target = v % n_clusters;
            let mut candidates: Vec<usize> = (0..n_o)
                .filter(|&i| cluster[i] == target && counts[col[i]] > 1)
                .collect();
            if candidates.is_empty() {
                candidates = (0..n_o).filter(|&i| counts[col[i]] > 1).collect();
            }
            let i = candidates[rng.random_range(0..candidates.len())];
            counts[col[i]] -= 1;
            col[i] = v;
            counts[v] += 1;
        }
        codes.push(col);
    }

    let names = (0..n_a).map(|j| format!("a{j}")).collect();
    let columns = codes
        .into_iter()
        .map(|col| col.into_iter().map(|v| format!("v{v}")).collect())
        .collect();
    let labels = cluster.iter().map(|c| format!("c{c}")).collect();
    Ok(CategoricalDataset::from_columns(names, columns, Some(labels))?.with_label_name("cluster"))
}
