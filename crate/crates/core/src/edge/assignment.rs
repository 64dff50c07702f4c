//! Mapping layers onto path positions and the resulting delay.

use serde::{Deserialize, Serialize};

use super::dnn::DnnProfile;
use super::network::{InferencePath, NetworkGraph};
use crate::error::{Error, Result};

/// Path position (`0 ..= M`) of every layer; never decreasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerAssignment(Vec<usize>);

impl LayerAssignment {
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("layer assignment", "no layers"));
        }
        if positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid(
                "layer assignment",
                format!("{positions:?} sends data backwards"),
            ));
        }
        Ok(Self(positions))
    }

    /// Every one of `layers` layers on path position `position`.
    pub fn uniform(layers: usize, position: usize) -> Self {
        Self(vec![position; layers.max(1)])
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn layers(&self) -> usize {
        self.0.len()
    }

    /// Last layer computed strictly before link `j` (1-based), 0 for the raw
    /// input. The result for each link is the cut index that link carries.
    pub fn cuts(&self, hops: usize) -> Vec<usize> {
        (1..=hops)
            .map(|j| self.0.iter().rposition(|&p| p < j).map_or(0, |l| l + 1))
            .collect()
    }

    fn check(&self, path: &InferencePath, dnn: &DnnProfile) -> Result<()> {
        if self.layers() != dnn.len() {
            return Err(Error::DimensionMismatch {
                expected: dnn.len(),
                actual: self.layers(),
            });
        }
        if let Some(&p) = self.0.last().filter(|&&p| p > path.hops()) {
            return Err(Error::invalid(
                "layer assignment",
                format!("position {p} beyond a {}-hop path", path.hops()),
            ));
        }
        Ok(())
    }
}

/// Work per path position and data per link, in raw units.
#[derive(Clone, Debug, PartialEq)]
pub struct Loads {
    pub work_mac: Vec<f64>,
    pub link_bits: Vec<f64>,
}

pub fn loads(path: &InferencePath, f: &LayerAssignment, dnn: &DnnProfile) -> Result<Loads> {
    f.check(path, dnn)?;
    let mut work_mac = vec![0.0; path.hops() + 1];
    for (layer, &p) in dnn.layers().iter().zip(f.positions()) {
        work_mac[p] += layer.workload_mac;
    }
    let sizes = dnn.sizes();
    let link_bits = f.cuts(path.hops()).into_iter().map(|l| sizes[l]).collect();
    Ok(Loads { work_mac, link_bits })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayBreakdown {
    pub compute_s: f64,
    pub transmission_s: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.compute_s + self.transmission_s
    }
}

pub fn delay_breakdown(
    path: &InferencePath,
    f: &LayerAssignment,
    dnn: &DnnProfile,
    graph: &NetworkGraph,
) -> Result<DelayBreakdown> {
    let l = loads(path, f, dnn)?;
    let compute_s = l.work_mac.iter().zip(path.speeds(graph)).map(|(w, p)| w / p).sum();
    let transmission_s = l.link_bits.iter().zip(path.rates(graph)).map(|(u, b)| u / b).sum();
    Ok(DelayBreakdown {
        compute_s,
        transmission_s,
    })
}

/// End-to-end inference delay in seconds.
pub fn delay(path: &InferencePath, f: &LayerAssignment, dnn: &DnnProfile, graph: &NetworkGraph) -> Result<f64> {
    delay_breakdown(path, f, dnn, graph).map(|d| d.total())
}

/// All monotone assignments, in lexicographic order.
///
/// With `candidate_splits`, layers between consecutive candidates are fused
/// into one block that always shares a node.
pub fn enumerate_assignments(
    path: &InferencePath,
    dnn: &DnnProfile,
    candidate_splits: Option<&[usize]>,
) -> Vec<LayerAssignment> {
    enumerate_for(path.hops(), dnn.len(), candidate_splits)
}

pub(crate) fn enumerate_for(hops: usize, layers: usize, candidate_splits: Option<&[usize]>) -> Vec<LayerAssignment> {
    // Block `i` ends after layer `ends[i]`.
    let ends: Vec<usize> = match candidate_splits {
        Some(splits) => {
            let mut e: Vec<usize> = splits.iter().copied().filter(|&s| s >= 1 && s < layers).collect();
            e.sort_unstable();
            e.dedup();
            e.push(layers);
            e
        }
        None => (1..=layers).collect(),
    };
    let mut out = Vec::new();
    let mut blocks = vec![0usize; ends.len()];
    fill(&mut blocks, 0, 0, hops, &mut |b| {
        let mut positions = Vec::with_capacity(layers);
        let mut start = 0;
        for (&end, &p) in ends.iter().zip(b) {
            positions.extend(std::iter::repeat_n(p, end - start));
            start = end;
        }
        out.push(LayerAssignment(positions));
    });
    out
}

fn fill(blocks: &mut [usize], i: usize, min: usize, max: usize, emit: &mut impl FnMut(&[usize])) {
    if i == blocks.len() {
        emit(blocks);
        return;
    }
    for p in min..=max {
        blocks[i] = p;
        fill(blocks, i + 1, p, max, emit);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateVerdict {
    AllOnDestination,
    AllOnSource,
    Inconclusive,
}

/// Sufficient conditions under which one end of the path should run the
/// whole network.
///
/// Moving layer `l` one hop downstream across link `j` pays off iff
/// `b_j (1/p_{j-1} - 1/p_j) > (s_{l-1} - s_l) / c_l`. When that holds for
/// every link and layer, everything belongs on the destination; when the
/// reverse holds everywhere, on the source.
pub fn degenerate_assignment_check(
    path: &InferencePath,
    dnn: &DnnProfile,
    graph: &NetworkGraph,
) -> Result<DegenerateVerdict> {
    if path.hops() == 0 {
        return Err(Error::invalid("degenerate check", "path has no links"));
    }
    let p = path.speeds(graph);
    let b = path.rates(graph);
    let s = dnn.sizes();
    let c = dnn.workloads();
    let gain: Vec<f64> = (0..path.hops()).map(|j| b[j] * (1.0 / p[j] - 1.0 / p[j + 1])).collect();
    let cost: Vec<f64> = (0..dnn.len()).map(|l| (s[l] - s[l + 1]) / c[l]).collect();
    let min_gain = gain.iter().copied().fold(f64::INFINITY, f64::min);
    let max_gain = gain.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_cost = cost.iter().copied().fold(f64::INFINITY, f64::min);
    let max_cost = cost.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(if min_gain > max_cost {
        DegenerateVerdict::AllOnDestination
    } else if max_gain < min_cost {
        DegenerateVerdict::AllOnSource
    } else {
        DegenerateVerdict::Inconclusive
    })
}
