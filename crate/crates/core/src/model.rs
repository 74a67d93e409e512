//! Versioned plain-text model files.
//!
//! ```text
//! catcouple-model 1
//! [config]
//! key=value
//! [attributes]
//! name<TAB>value<TAB>value...
//! [kernels]
//! gaussian:0.03125
//! [couplings]
//! intra 0 3 1
//! 0.5
//! ...
//! [omega]
//! 1.0,1.0,...
//! ```
//!
//! Fields are tab separated; backslash escapes `\\`, `\t`, `\n` and `\r`.
//! Reals use shortest round-trip formatting, so a reloaded model reproduces
//! the saved embedding bitwise.

use std::path::Path;

use nalgebra::DMatrix;

use crate::coupling::{CouplingKind, CouplingSpace};
use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::heterogeneity::{vector_representation, HeterogeneityParams};
use crate::io::{fmt_f64, read_text, write_text};
use crate::kernel::{build_stack, KernelFunction, KernelStack};
use crate::par::Exec;

pub const MAGIC: &str = "catcouple-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: Vec<(String, String)>,
    pub attr_names: Vec<String>,
    pub value_dicts: Vec<Vec<String>>,
    pub bank: Vec<KernelFunction>,
    pub spaces: Vec<CouplingSpace>,
    pub omega: Vec<f64>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(Error::parse(format!("bad escape \\{other:?} in model file"))),
        }
    }
    Ok(out)
}

fn parse_reals(line: &str) -> Result<Vec<f64>> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(',')
        .map(|t| t.parse::<f64>().map_err(|e| Error::parse(format!("bad real {t:?}: {e}"))))
        .collect()
}

impl Model {
    pub fn new(
        config: Vec<(String, String)>,
        ds: &CategoricalDataset,
        bank: &[KernelFunction],
        spaces: Vec<CouplingSpace>,
        params: &HeterogeneityParams,
    ) -> Self {
        Self {
            config,
            attr_names: ds.attr_names().to_vec(),
            value_dicts: ds.value_dicts().to_vec(),
            bank: bank.to_vec(),
            spaces,
            omega: params.as_slice().to_vec(),
        }
    }

    /// Dictionary-only table used to re-code new data.
    fn template(&self) -> Result<CategoricalDataset> {
        CategoricalDataset::from_codes(
            self.attr_names.clone(),
            self.value_dicts.clone(),
            vec![vec![0]; self.attr_names.len()],
            None,
        )
    }

    /// Re-codes `ds` against the training dictionaries; unseen values fail.
    pub fn recode(&self, ds: &CategoricalDataset) -> Result<CategoricalDataset> {
        if ds.attr_names() != self.attr_names.as_slice() {
            return Err(Error::data("attribute names differ from the model's"));
        }
        self.template()?.recode(ds)
    }

    /// Kernel stack over the training kernels, indexed by `ds`'s objects.
    pub fn stack_for(&self, ds: &CategoricalDataset, exec: Exec) -> Result<KernelStack> {
        let recoded = self.recode(ds)?;
        build_stack(&self.spaces, &self.bank, &recoded, exec)
    }

    /// Embedding of a (possibly new) table under the learned weights.
    pub fn transform(&self, ds: &CategoricalDataset, exec: Exec) -> Result<DMatrix<f64>> {
        let stack = self.stack_for(ds, exec)?;
        let params = HeterogeneityParams::from_flat(&stack, self.omega.clone())?;
        vector_representation(&stack, &params, exec)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n[config]\n");
        for (k, v) in &self.config {
            out.push_str(&format!("{}={}\n", escape(k), escape(v)));
        }
        out.push_str("[attributes]\n");
        for (name, dict) in self.attr_names.iter().zip(&self.value_dicts) {
            let mut fields = vec![escape(name)];
            fields.extend(dict.iter().map(|v| escape(v)));
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out.push_str("[kernels]\n");
        for k in &self.bank {
            out.push_str(&format!("{k}\n"));
        }
        out.push_str("[couplings]\n");
        for s in &self.spaces {
            out.push_str(&format!("{} {} {} {}\n", s.kind.as_str(), s.attr, s.n_values(), s.dim()));
            for i in 0..s.n_values() {
                let row: Vec<String> = s.vectors.row(i).iter().map(|&x| fmt_f64(x)).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out.push_str("[omega]\n");
        let w: Vec<String> = self.omega.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&w.join(","));
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::parse("empty model file"))?;
        match head.split_once(' ') {
            Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(Error::parse(format!("unsupported model version {v}"))),
            _ => return Err(Error::parse("not a model file")),
        }
        let expect = |line: Option<&str>, tag: &str| -> Result<()> {
            if line == Some(tag) {
                Ok(())
            } else {
                Err(Error::parse(format!("expected {tag} section, found {line:?}")))
            }
        };

        let mut config = Vec::new();
        let mut line = lines.next();
        expect(line, "[config]")?;
        loop {
            line = lines.next();
            match line {
                Some(l) if !l.starts_with('[') => {
                    let (k, v) = l.split_once('=').ok_or_else(|| Error::parse(format!("bad config line {l:?}")))?;
                    config.push((unescape(k)?, unescape(v)?));
                }
                _ => break,
            }
        }

        expect(line, "[attributes]")?;
        let (mut attr_names, mut value_dicts) = (Vec::new(), Vec::new());
        loop {
            line = lines.next();
            match line {
                Some(l) if !l.starts_with('[') => {
                    let mut fields = l.split('\t').map(unescape);
                    attr_names.push(fields.next().ok_or_else(|| Error::parse("empty attribute line"))??);
                    value_dicts.push(fields.collect::<Result<Vec<_>>>()?);
                }
                _ => break,
            }
        }

        expect(line, "[kernels]")?;
        let mut bank = Vec::new();
        loop {
            line = lines.next();
            match line {
                Some(l) if !l.starts_with('[') => bank.push(l.parse()?),
                _ => break,
            }
        }

        expect(line, "[couplings]")?;
        let mut spaces = Vec::new();
        loop {
            line = lines.next();
            let Some(l) = line.filter(|l| !l.starts_with('[')) else { break };
            let parts: Vec<&str> = l.split(' ').collect();
            let [kind, attr, rows, cols] = parts[..] else {
                return Err(Error::parse(format!("bad coupling header {l:?}")));
            };
            let kind = match kind {
                "intra" => CouplingKind::Intra,
                "inter" => CouplingKind::Inter,
                k => return Err(Error::parse(format!("unknown coupling kind {k:?}"))),
            };
            let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(format!("bad count {s:?}: {e}")));
            let (attr, rows, cols) = (num(attr)?, num(rows)?, num(cols)?);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let r = parse_reals(lines.next().ok_or_else(|| Error::parse("truncated coupling block"))?)?;
                if r.len() != cols {
                    return Err(Error::parse("coupling row has wrong width"));
                }
                data.extend(r);
            }
            if attr >= attr_names.len() {
                return Err(Error::parse("coupling attribute out of range"));
            }
            let column_key = match kind {
                CouplingKind::Intra => Vec::new(),
                CouplingKind::Inter => (0..attr_names.len())
                    .filter(|&k| k != attr)
                    .flat_map(|k| (0..value_dicts[k].len()).map(move |u| (k, u)))
                    .collect(),
            };
            spaces.push(CouplingSpace {
                attr,
                kind,
                vectors: DMatrix::from_row_slice(rows, cols, &data),
                column_key,
            });
        }

        expect(line, "[omega]")?;
        let omega = parse_reals(lines.next().unwrap_or(""))?;
        let model = Self {
            config,
            attr_names,
            value_dicts,
            bank,
            spaces,
            omega,
        };
        let expected: usize = model.spaces.iter().map(|s| s.n_values()).sum::<usize>() * model.bank.len();
        if model.omega.len() != expected {
            return Err(Error::parse(format!(
                "model has {} weights, layout needs {expected}",
                model.omega.len()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{read_csv, LabelColumn};
    use crate::kernel::default_bank;
    use crate::solver::{fit, FitConfig};

    const TOY: &str = "Texture,Color,RootShape,Sweetness
clear,white,straight,low
blurry,yellow,straight,low
blurry,yellow,curled,low
clear,green,slightly curled,low
blurry,green,curled,high
clear,black,slightly curled,high
";

    #[test]
    fn save_load_transform_reproduces_embedding() {
        let ds = read_csv(TOY.as_bytes(), true, Some(&LabelColumn::Name("Sweetness".into()))).unwrap();
        let cfg = FitConfig {
            max_iterations: 20,
            ..FitConfig::default()
        };
        let out = fit(&ds, &default_bank(), &cfg).unwrap();
        let spaces = crate::coupling::build_all(&ds, Exec::Sequential);
        let model = Model::new(cfg.echo(), &ds, &default_bank(), spaces, &out.params);
        let back = Model::from_text(&model.to_text()).unwrap();
        assert_eq!(back, model);
        let x = back.transform(&ds, Exec::Sequential).unwrap();
        assert_eq!(x, out.representation.embedding);

        let unseen = read_csv("Texture,Color,RootShape\nclear,purple,curled\n".as_bytes(), true, None).unwrap();
        assert!(back.transform(&unseen, Exec::Sequential).is_err());
    }

    #[test]
    fn escapes_round_trip() {
        for s in ["a\tb", "x\\y", "line\nbreak", "plain"] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
        }
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(Model::from_text("hello").is_err());
        assert!(Model::from_text("catcouple-model 99\n").is_err());
    }
}
