//! Layer-wise DNN profiles.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub workload_mac: f64,
    pub output_bits: f64,
}

/// A chain of layers with per-layer work and output size.
#[derive(Clone, Debug, PartialEq)]
pub struct DnnProfile {
    name: String,
    input_bits: f64,
    layers: Vec<Layer>,
}

#[derive(Deserialize, Serialize)]
struct CsvRow {
    layer: String,
    workload_mac: f64,
    output_bits: f64,
}

const YOLO_CSV: &str = include_str!("../../profiles/yolo.csv");
const RESNET50_CSV: &str = include_str!("../../profiles/resnet50.csv");

pub const BUILTIN_PROFILES: [&str; 2] = ["yolo", "resnet50"];

impl DnnProfile {
    pub fn new(name: impl Into<String>, input_bits: f64, layers: Vec<Layer>) -> Result<Self> {
        let name = name.into();
        if layers.is_empty() {
            return Err(Error::invalid("dnn profile", format!("`{name}` has no layers")));
        }
        if !(input_bits.is_finite() && input_bits > 0.0) {
            return Err(Error::invalid(
                "dnn profile",
                format!("`{name}` input size {input_bits}"),
            ));
        }
        for l in &layers {
            if !(l.workload_mac.is_finite() && l.workload_mac > 0.0) {
                return Err(Error::invalid(
                    "dnn profile",
                    format!("`{name}` layer `{}` workload {}", l.name, l.workload_mac),
                ));
            }
            if !(l.output_bits.is_finite() && l.output_bits > 0.0) {
                return Err(Error::invalid(
                    "dnn profile",
                    format!("`{name}` layer `{}` output size {}", l.name, l.output_bits),
                ));
            }
        }
        Ok(Self {
            name,
            input_bits,
            layers,
        })
    }

    /// Builds a profile from bare numbers; layers are named `l1`, `l2`, ...
    pub fn from_sizes(name: &str, workloads: &[f64], sizes: &[f64]) -> Result<Self> {
        if sizes.len() != workloads.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: workloads.len() + 1,
                actual: sizes.len(),
            });
        }
        let layers = workloads
            .iter()
            .zip(&sizes[1..])
            .enumerate()
            .map(|(i, (c, s))| Layer {
                name: format!("l{}", i + 1),
                workload_mac: *c,
                output_bits: *s,
            })
            .collect();
        Self::new(name, sizes[0], layers)
    }

    pub fn from_csv_reader(name: &str, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["layer", "workload_mac", "output_bits"] {
            return Err(Error::invalid(
                "dnn profile csv",
                format!(
                    "header must be `layer,workload_mac,output_bits`, got `{}`",
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let mut rows = rdr.deserialize::<CsvRow>();
        let input = rows
            .next()
            .transpose()?
            .ok_or_else(|| Error::invalid("dnn profile csv", "no rows"))?;
        if input.layer != "input" || input.workload_mac != 0.0 {
            return Err(Error::invalid(
                "dnn profile csv",
                "first data row must be `input,0,<bits>`",
            ));
        }
        let layers = rows
            .map(|r| {
                r.map(|r| Layer {
                    name: r.layer,
                    workload_mac: r.workload_mac,
                    output_bits: r.output_bits,
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(name, input.output_bits, layers)
    }

    pub fn from_csv_path(name: &str, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(name, file)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(CsvRow {
            layer: "input".into(),
            workload_mac: 0.0,
            output_bits: self.input_bits,
        })?;
        for l in &self.layers {
            w.serialize(CsvRow {
                layer: l.name.clone(),
                workload_mac: l.workload_mac,
                output_bits: l.output_bits,
            })?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::invalid("dnn profile csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Bundled synthetic profiles.
    pub fn builtin(name: &str) -> Result<Self> {
        let csv = match name {
            "yolo" => YOLO_CSV,
            "resnet50" => RESNET50_CSV,
            other => {
                return Err(Error::UnknownName {
                    kind: "profile",
                    name: other.to_string(),
                    available: BUILTIN_PROFILES.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        Self::from_csv_reader(name, csv.as_bytes())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of layers `L`.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_bits(&self) -> f64 {
        self.input_bits
    }

    /// Data sizes `s_0 ..= s_L`, input first.
    pub fn sizes(&self) -> Vec<f64> {
        std::iter::once(self.input_bits)
            .chain(self.layers.iter().map(|l| l.output_bits))
            .collect()
    }

    /// Workloads `c_1 ..= c_L`.
    pub fn workloads(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.workload_mac).collect()
    }

    pub fn total_workload(&self) -> f64 {
        self.layers.iter().map(|l| l.workload_mac).sum()
    }
}

/// Layer boundaries worth cutting at.
///
/// Boundary `l` (after layer `l`, `1 <= l < L`) is dropped when some earlier
/// boundary and some later boundary (the final output included) both carry
/// strictly less data: any cut there can slide to the smaller side without
/// increasing delay.
pub fn prune_splitting_points(dnn: &DnnProfile) -> Vec<usize> {
    let s = dnn.sizes();
    let l_max = dnn.len();
    let mut prefix_min = vec![f64::INFINITY; l_max + 1];
    let mut run = f64::INFINITY;
    for l in 0..=l_max {
        prefix_min[l] = run;
        run = run.min(s[l]);
    }
    let mut suffix_min = vec![f64::INFINITY; l_max + 1];
    let mut run = f64::INFINITY;
    for l in (0..=l_max).rev() {
        suffix_min[l] = run;
        run = run.min(s[l]);
    }
    (1..l_max)
        .filter(|&l| !(prefix_min[l] < s[l] && suffix_min[l] < s[l]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(s: &[f64]) -> DnnProfile {
        DnnProfile::from_sizes("t", &vec![1.0; s.len() - 1], s).unwrap()
    }

    #[test]
    fn prune_examples() {
        assert_eq!(
            prune_splitting_points(&sizes(&[10.0, 8.0, 9.0, 7.0, 7.0, 5.0])),
            vec![1, 3, 4]
        );
        assert_eq!(
            prune_splitting_points(&sizes(&[6.0, 5.0, 4.0, 3.0, 2.0])),
            vec![1, 2, 3]
        );
        assert!(prune_splitting_points(&sizes(&[3.0, 4.0, 5.0, 6.0, 1.0])).is_empty());
    }

    #[test]
    fn prune_keeps_boundary_below_final_output() {
        // Boundary 2 carries more than boundary 1 but less than the final
        // output, so no neighbour on its right dominates it.
        assert_eq!(prune_splitting_points(&sizes(&[5.0, 2.0, 3.0, 4.0])), vec![1, 2]);
        assert_eq!(prune_splitting_points(&sizes(&[5.0, 6.0, 3.0, 4.0])), vec![2]);
    }

    #[test]
    fn csv_round_trip() {
        let p = DnnProfile::from_sizes("x", &[4.0, 8.0], &[6.0, 3.0, 1.0]).unwrap();
        let text = p.to_csv_string().unwrap();
        assert!(text.starts_with("layer,workload_mac,output_bits\ninput,0"));
        let back = DnnProfile::from_csv_reader("x", text.as_bytes()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn csv_rejects_bad_input() {
        let no_input = "layer,workload_mac,output_bits\nconv,3,4\n";
        assert!(DnnProfile::from_csv_reader("x", no_input.as_bytes()).is_err());
        let bad_header = "name,mac,bits\ninput,0,4\n";
        assert!(DnnProfile::from_csv_reader("x", bad_header.as_bytes()).is_err());
        let zero = "layer,workload_mac,output_bits\ninput,0,4\nconv,0,4\n";
        assert!(DnnProfile::from_csv_reader("x", zero.as_bytes()).is_err());
        let empty = "layer,workload_mac,output_bits\ninput,0,4\n";
        assert!(DnnProfile::from_csv_reader("x", empty.as_bytes()).is_err());
    }

    #[test]
    fn builtins_load() {
        for name in BUILTIN_PROFILES {
            let p = DnnProfile::builtin(name).unwrap();
            assert!(p.len() >= 10);
            assert!(!prune_splitting_points(&p).is_empty());
        }
        assert!(DnnProfile::builtin("vgg").is_err());
    }
}
