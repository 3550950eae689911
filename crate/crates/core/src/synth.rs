//! Synthetic GeNIS-like flow tables with class-conditional feature
//! distributions, pure-noise columns and constant columns.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::data::{reference, Category, Column, FlowTable, Task, Taxonomy};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    /// Parameters `[mu, sigma]` of the underlying normal.
    LogNormal,
    /// Parameters `[shape, scale]`.
    Gamma,
    /// Parameters `[mean, sd]`.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFeature {
    pub name: String,
    pub dist: Dist,
    /// Two distribution parameters per class name.
    pub params: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCategorical {
    pub name: String,
    pub levels: Vec<String>,
    /// Level weights per class name.
    pub weights: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub name: String,
    /// Percent of all rows.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub classes: Vec<ClassRatio>,
    pub benign_class: String,
    pub features: Vec<SynthFeature>,
    pub categorical: Vec<SynthCategorical>,
    /// Standard-normal columns named `Noise1..`, identical across classes.
    pub noise_columns: usize,
    /// Columns named `Const1..` holding 1.0 everywhere.
    pub constant_columns: usize,
    /// Adds a random `SrcAddr` column, which the exclusion policy drops.
    pub identifiers: bool,
    pub seed: u64,
}

pub const NOISE_PREFIX: &str = "Noise";
pub const CONSTANT_PREFIX: &str = "Const";

impl Default for SynthSpec {
    /// The four GeNIS classes at their dataset shares, with the union of the
    /// two reference selections as informative features.
    fn default() -> Self {
        let classes: Vec<ClassRatio> = [("DoS", 80.22), ("Recon", 7.52), ("Benign", 7.37), ("Bruteforce", 4.89)]
            .into_iter()
            .map(|(name, ratio)| ClassRatio {
                name: name.into(),
                ratio,
            })
            .collect();
        let taxonomy = Taxonomy::genis();
        let mut names: Vec<&str> = reference::BINARY_SELECTION.to_vec();
        for name in reference::MULTICLASS_SELECTION {
            if !names.contains(&name) {
                names.push(name);
            }
        }
        let features = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let timed = taxonomy.category_of(name) == Some(Category::TimeBased);
                let params = classes
                    .iter()
                    .enumerate()
                    .map(|(c, class)| {
                        let level = ((c + j) % classes.len()) as f64;
                        let p = if timed {
                            [4.0 + 6.0 * level, 0.5]
                        } else {
                            [4.0 + 1.2 * level, 0.35]
                        };
                        (class.name.clone(), p)
                    })
                    .collect();
                SynthFeature {
                    name: name.to_string(),
                    dist: if timed { Dist::Gamma } else { Dist::LogNormal },
                    params,
                }
            })
            .collect();
        let protocol = SynthCategorical {
            name: "Protocol".into(),
            levels: vec!["tcp".into(), "udp".into(), "icmp".into()],
            weights: [
                ("DoS", vec![0.6, 0.3, 0.1]),
                ("Recon", vec![0.4, 0.2, 0.4]),
                ("Benign", vec![0.5, 0.45, 0.05]),
                ("Bruteforce", vec![0.95, 0.05, 0.0]),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        };
        SynthSpec {
            n_rows: 20_000,
            classes,
            benign_class: "Benign".into(),
            features,
            categorical: vec![protocol],
            noise_columns: 4,
            constant_columns: 2,
            identifiers: true,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.classes.iter().map(|c| c.ratio).sum();
        if (total - 100.0).abs() > 1e-9 {
            return Err(Error::Config(format!("class ratios sum to {total}, expected 100")));
        }
        if self.classes.len() < 2 {
            return Err(Error::Config("at least two classes are needed".into()));
        }
        if self.n_rows < self.classes.len() {
            return Err(Error::Config(format!(
                "{} rows cannot hold {} classes",
                self.n_rows,
                self.classes.len()
            )));
        }
        if !self.classes.iter().any(|c| c.name == self.benign_class) {
            return Err(Error::Config(format!("benign class {:?} has no ratio", self.benign_class)));
        }
        for (class, n) in self.classes.iter().zip(self.class_counts()) {
            if n == 0 {
                return Err(Error::Config(format!("class {} receives zero rows", class.name)));
            }
        }
        for f in &self.features {
            for class in &self.classes {
                let [a, b] = f.params.get(&class.name).copied().ok_or_else(|| {
                    Error::Config(format!("feature {} has no parameters for class {}", f.name, class.name))
                })?;
                let ok = match f.dist {
                    Dist::LogNormal | Dist::Normal => a.is_finite() && b > 0.0 && b.is_finite(),
                    Dist::Gamma => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
                };
                if !ok {
                    return Err(Error::Config(format!(
                        "feature {} has invalid parameters [{a}, {b}] for class {}",
                        f.name, class.name
                    )));
                }
            }
        }
        for c in &self.categorical {
            for class in &self.classes {
                let w = c.weights.get(&class.name).ok_or_else(|| {
                    Error::Config(format!("column {} has no weights for class {}", c.name, class.name))
                })?;
                if w.len() != c.levels.len() || WeightedIndex::new(w).is_err() {
                    return Err(Error::Config(format!("column {} has invalid weights for {}", c.name, class.name)));
                }
            }
        }
        Ok(())
    }

    /// Rows per class by largest remainder, so each count is within one row
    /// of `ratio * n_rows / 100`.
    pub fn class_counts(&self) -> Vec<usize> {
        let exact: Vec<f64> = self.classes.iter().map(|c| c.ratio * self.n_rows as f64 / 100.0).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().take(self.n_rows.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}

fn sampler(dist: Dist, [a, b]: [f64; 2]) -> Box<dyn Fn(&mut rand_chacha::ChaCha8Rng) -> f64> {
    match dist {
        Dist::LogNormal => {
            let d = LogNormal::new(a, b).expect("validated");
            Box::new(move |r| d.sample(r))
        }
        Dist::Gamma => {
            let d = Gamma::new(a, b).expect("validated");
            Box::new(move |r| d.sample(r))
        }
        Dist::Normal => {
            let d = Normal::new(a, b).expect("validated");
            Box::new(move |r| d.sample(r))
        }
    }
}

/// Draws a labeled table with `CategoryLabel` and `BinaryLabel` columns.
/// Every column draws from its own random stream.
pub fn synth_generate(spec: &SynthSpec) -> Result<FlowTable> {
    spec.validate()?;
    let mut class_of: Vec<usize> = spec
        .class_counts()
        .into_iter()
        .enumerate()
        .flat_map(|(c, n)| std::iter::repeat(c).take(n))
        .collect();
    class_of.shuffle(&mut stream_rng(spec.seed, 0));

    let mut columns = Vec::new();
    let mut stream = 1u64;
    for f in &spec.features {
        let draws: Vec<_> = spec.classes.iter().map(|c| sampler(f.dist, f.params[&c.name])).collect();
        let mut rng = stream_rng(spec.seed, stream);
        stream += 1;
        columns.push(Column::numeric(f.name.clone(), class_of.iter().map(|&c| draws[c](&mut rng)).collect()));
    }
    for f in &spec.categorical {
        let picks: Vec<WeightedIndex<f64>> = spec
            .classes
            .iter()
            .map(|c| WeightedIndex::new(&f.weights[&c.name]).expect("validated"))
            .collect();
        let mut rng = stream_rng(spec.seed, stream);
        stream += 1;
        let values = class_of
            .iter()
            .map(|&c| f.levels[picks[c].sample(&mut rng)].clone())
            .collect();
        columns.push(Column::categorical(f.name.clone(), values));
    }
    for i in 1..=spec.noise_columns {
        let mut rng = stream_rng(spec.seed, 1000 + i as u64);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let values = (0..class_of.len()).map(|_| normal.sample(&mut rng)).collect();
        columns.push(Column::numeric(format!("{NOISE_PREFIX}{i}"), values));
    }
    for i in 1..=spec.constant_columns {
        columns.push(Column::numeric(format!("{CONSTANT_PREFIX}{i}"), vec![1.0; class_of.len()]));
    }
    if spec.identifiers {
        let mut rng = stream_rng(spec.seed, 2000);
        let values = (0..class_of.len())
            .map(|_| format!("10.0.{}.{}", rng.gen_range(0..4u8), rng.gen_range(1..255u8)))
            .collect();
        columns.push(Column::categorical("SrcAddr", values));
    }
    let names: Vec<String> = class_of.iter().map(|&c| spec.classes[c].name.clone()).collect();
    let binary = names
        .iter()
        .map(|n| if *n == spec.benign_class { "Benign" } else { "Malicious" }.to_string())
        .collect();
    columns.push(Column::label(Task::Multiclass.label_column(), names));
    columns.push(Column::label(Task::Binary.label_column(), binary));
    FlowTable::with_fallback_taxonomy(columns, Taxonomy::genis(), Category::General)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_ratios() {
        let spec = SynthSpec {
            n_rows: 10_000,
            ..SynthSpec::default()
        };
        assert_eq!(spec.class_counts(), vec![8022, 752, 737, 489]);
        let odd = SynthSpec {
            n_rows: 997,
            ..SynthSpec::default()
        };
        let counts = odd.class_counts();
        assert_eq!(counts.iter().sum::<usize>(), 997);
        for (c, n) in odd.classes.iter().zip(counts) {
            assert!((n as f64 - c.ratio * 9.97).abs() <= 1.0);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SynthSpec {
            n_rows: 500,
            ..SynthSpec::default()
        };
        let a = synth_generate(&spec).unwrap();
        assert_eq!(a, synth_generate(&spec).unwrap());
        let b = synth_generate(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.numeric("Const1").unwrap(), &[1.0; 500][..]);
        assert!(a.taxonomy().get("SrcAddr").unwrap().excluded);
    }

    #[test]
    fn degenerate_specs_fail() {
        let mut spec = SynthSpec::default();
        spec.classes[0].ratio += 1.0;
        assert!(synth_generate(&spec).is_err());
        let tiny = SynthSpec {
            n_rows: 10,
            ..SynthSpec::default()
        };
        assert!(matches!(synth_generate(&tiny), Err(Error::Config(_))));
    }
}
