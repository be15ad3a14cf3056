//! Labeled training data: sampled false/true seed pairs with Monte Carlo
//! blocked-influence labels.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{estimate_blocked, Instance, DEFAULT_LABEL_REPLICATIONS};
use crate::error::{Error, Result};
use crate::features::{FalseSeedContext, FeatureScratch, FEATURE_DIM};
use crate::graph::{Graph, NodeId, NodeStats};
use crate::io::atomic_write;
use crate::seed::tagged_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Fraction of nodes, ranked by out-degree, that form the false-seed pool.
    pub rho: f64,
    pub pareto_shape: f64,
    pub pareto_scale: f64,
    /// Upper bound on the number of false seeds.
    pub k_cap: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            rho: 0.1,
            pareto_shape: 9.0,
            pareto_scale: 10.0,
            k_cap: 50,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("rho {} outside (0, 1]", self.rho)));
        }
        if !(self.pareto_shape > 1.0) || !(self.pareto_scale >= 1.0) {
            return Err(Error::InvalidParameter(
                "Pareto shape must exceed 1 and scale must be at least 1".into(),
            ));
        }
        if self.k_cap == 0 {
            return Err(Error::InvalidParameter("k_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// The top `ceil(rho * n)` nodes by out-degree, ties by ascending id.
pub fn high_impact_pool(graph: &Graph, rho: f64) -> Vec<NodeId> {
    let n = graph.node_count();
    let size = ((rho * n as f64).ceil() as usize).clamp(1, n);
    let mut nodes: Vec<NodeId> = (0..n).collect();
    nodes.sort_by(|&a, &b| graph.out_degree(b).cmp(&graph.out_degree(a)).then(a.cmp(&b)));
    nodes.truncate(size);
    nodes
}

/// Number of false seeds: a rounded Pareto draw, capped.
pub fn sample_false_seed_count<R: Rng + ?Sized>(config: &SamplerConfig, rng: &mut R) -> Result<usize> {
    config.validate()?;
    let pareto = Pareto::new(config.pareto_scale, config.pareto_shape)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let draw: f64 = pareto.sample(rng);
    Ok((draw.round() as usize).clamp(1, config.k_cap))
}

pub fn sample_false_seeds<R: Rng + ?Sized>(
    graph: &Graph,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    let pool = high_impact_pool(graph, config.rho);
    let mut k = sample_false_seed_count(config, rng)?;
    if k > pool.len() {
        log::warn!("false seed count {k} exceeds the pool of {}; clamping", pool.len());
        k = pool.len();
    }
    let mut s_f: Vec<NodeId> = index::sample(rng, pool.len(), k).iter().map(|i| pool[i]).collect();
    s_f.sort_unstable();
    Ok(s_f)
}

/// Uniform sample of `k` nodes outside the sorted set `exclude`.
fn sample_outside<R: Rng + ?Sized>(n: usize, exclude: &[NodeId], k: usize, rng: &mut R) -> Vec<NodeId> {
    let mut picked: Vec<NodeId> = index::sample(rng, n - exclude.len(), k)
        .iter()
        .map(|mut v| {
            // shift past every excluded id at or below the running position
            for &x in exclude {
                if x <= v {
                    v += 1;
                }
            }
            v
        })
        .collect();
    picked.sort_unstable();
    picked
}

/// Draws false seeds, then `k_t` uniform in `0..=k_f`, then true seeds
/// uniformly from the remaining nodes.
pub fn sample_instance<R: Rng + ?Sized>(graph: &Graph, config: &SamplerConfig, rng: &mut R) -> Result<Instance> {
    let s_f = sample_false_seeds(graph, config, rng)?;
    let k_t = rng.random_range(0..=s_f.len()).min(graph.node_count() - s_f.len());
    let s_t = sample_outside(graph.node_count(), &s_f, k_t, rng);
    Instance::new(graph, &s_f, &s_t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub s_f: Vec<NodeId>,
    pub s_t: Vec<NodeId>,
    pub label: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<[f64; FEATURE_DIM]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub graph_fingerprint: String,
    pub label_replications: usize,
    pub h_radius: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph_fingerprint: String,
    pub label_replications: usize,
    pub h_radius: u32,
    pub records: Vec<DatasetRecord>,
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub count: usize,
    pub label_replications: usize,
    pub sampler: SamplerConfig,
    pub h_radius: u32,
    pub master_seed: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            count: 1000,
            label_replications: DEFAULT_LABEL_REPLICATIONS,
            sampler: SamplerConfig::default(),
            h_radius: 2,
            master_seed: 0,
        }
    }
}

/// Instance `i` is drawn from a stream seeded by `(master_seed, i)` and
/// labeled with blocked-influence replications seeded by the same pair, so
/// records can be produced in any order. Features are cached when `stats`
/// is given.
pub fn generate_dataset(
    graph: &Graph,
    stats: Option<&NodeStats>,
    options: &GenerateOptions,
) -> Result<Dataset> {
    if options.count == 0 || options.label_replications == 0 {
        return Err(Error::InvalidParameter("count and label replications must be >= 1".into()));
    }
    if options.h_radius == 0 {
        return Err(Error::InvalidParameter("radius H must be >= 1".into()));
    }
    options.sampler.validate()?;
    let seed = options.master_seed;
    let records = (0..options.count as u64)
        .into_par_iter()
        .map_init(
            || FeatureScratch::new(graph.node_count()),
            |scratch, i| -> Result<DatasetRecord> {
                let mut rng = ChaCha8Rng::seed_from_u64(tagged_seed(seed, "instance", i));
                let inst = sample_instance(graph, &options.sampler, &mut rng)?;
                let label = estimate_blocked(
                    graph,
                    &inst,
                    options.label_replications,
                    tagged_seed(seed, "label", i),
                )?
                .mean;
                let features = match stats {
                    Some(stats) => Some(
                        FalseSeedContext::with_scratch(graph, stats, inst.s_f(), options.h_radius, scratch)?
                            .features(graph, stats, inst.s_t(), scratch)?
                            .to_array(),
                    ),
                    None => None,
                };
                Ok(DatasetRecord {
                    s_f: inst.s_f().to_vec(),
                    s_t: inst.s_t().to_vec(),
                    label,
                    features,
                })
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        graph_fingerprint: graph.fingerprint().to_string(),
        label_replications: options.label_replications,
        h_radius: options.h_radius,
        records,
    })
}

impl Dataset {
    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            graph_fingerprint: self.graph_fingerprint.clone(),
            label_replications: self.label_replications,
            h_radius: self.h_radius,
            count: self.records.len(),
        }
    }

    pub fn check_graph(&self, graph: &Graph) -> Result<()> {
        if self.graph_fingerprint != graph.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: self.graph_fingerprint.clone(),
                found: graph.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    /// Computes features for every record that lacks them.
    pub fn fill_features(&mut self, graph: &Graph, stats: &NodeStats) -> Result<()> {
        self.check_graph(graph)?;
        let h = self.h_radius;
        self.records
            .par_iter_mut()
            .filter(|r| r.features.is_none())
            .map_init(
                || FeatureScratch::new(graph.node_count()),
                |scratch, r| -> Result<()> {
                    let inst = Instance::new(graph, &r.s_f, &r.s_t)?;
                    let ctx = FalseSeedContext::with_scratch(graph, stats, inst.s_f(), h, scratch)?;
                    r.features = Some(ctx.features(graph, stats, inst.s_t(), scratch)?.to_array());
                    Ok(())
                },
            )
            .collect()
    }

    /// Feature rows and labels; every record must carry features.
    pub fn training_arrays(&self) -> Result<(Vec<[f64; FEATURE_DIM]>, Vec<f64>)> {
        let inputs = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.features.ok_or_else(|| {
                    Error::InvalidInput(format!("record {i} has no cached features"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((inputs, self.records.iter().map(|r| r.label).collect()))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header())?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        atomic_write(path, &buf)
    }

    pub fn read_jsonl<R: Read>(source: R) -> Result<Self> {
        let mut lines = BufReader::new(source).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("dataset file is empty".into()))??;
        let header: DatasetHeader = serde_json::from_str(&header_line)?;
        let mut records = Vec::with_capacity(header.count);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            if !record.label.is_finite() {
                return Err(Error::Parse {
                    line: i + 2,
                    message: "label is not finite".into(),
                });
            }
            records.push(record);
        }
        if records.len() != header.count {
            return Err(Error::InvalidInput(format!(
                "header announces {} records, file has {}",
                header.count,
                records.len()
            )));
        }
        Ok(Dataset {
            graph_fingerprint: header.graph_fingerprint,
            label_replications: header.label_replications,
            h_radius: header.h_radius,
            records,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{compute_node_stats, ClosenessMode};
    use crate::synth::power_law_digraph;

    fn four_coin() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (0, 2, 0.5), (1, 2, 0.5)]).unwrap()
    }

    #[test]
    fn pool_size_follows_rho() {
        let g = power_law_digraph(768, 1532, 3).unwrap();
        assert_eq!(high_impact_pool(&g, 0.1).len(), 77);
        let pool = high_impact_pool(&g, 0.1);
        assert!(pool.windows(2).all(|w| g.out_degree(w[0]) >= g.out_degree(w[1])));
    }

    #[test]
    fn pareto_counts_concentrate() {
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<usize> = (0..10_000)
            .map(|_| sample_false_seed_count(&cfg, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<usize>() as f64 / draws.len() as f64;
        // closed-form mean of the continuous draw: shape * scale / (shape - 1)
        assert!((mean - 11.25).abs() < 0.1, "{mean}");
        let in_band = draws.iter().filter(|&&k| (10..=15).contains(&k)).count();
        assert!(in_band as f64 / draws.len() as f64 > 0.9);
    }

    #[test]
    fn single_node_pool() {
        let g = power_law_digraph(50, 100, 3).unwrap();
        let cfg = SamplerConfig {
            rho: 0.01,
            ..SamplerConfig::default()
        };
        let top = high_impact_pool(&g, 0.01);
        assert_eq!(top.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            assert_eq!(sample_false_seeds(&g, &cfg, &mut rng).unwrap(), top);
        }
    }

    #[test]
    fn instances_are_feasible() {
        let g = power_law_digraph(200, 500, 4).unwrap();
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let inst = sample_instance(&g, &cfg, &mut rng).unwrap();
            assert!(inst.s_t().len() <= inst.s_f().len());
            assert!(inst.s_t().iter().all(|v| inst.s_f().binary_search(v).is_err()));
        }
    }

    #[test]
    fn sample_outside_skips_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let picked = sample_outside(6, &[1, 2, 4], 3, &mut rng);
            assert_eq!(picked, vec![0, 3, 5]);
        }
    }

    #[test]
    fn tiny_graph_labels_are_bounded() {
        let g = four_coin();
        let stats = compute_node_stats(&g, ClosenessMode::Exact).unwrap();
        let opts = GenerateOptions {
            count: 100,
            label_replications: 200,
            sampler: SamplerConfig {
                rho: 1.0,
                k_cap: 1,
                ..SamplerConfig::default()
            },
            ..GenerateOptions::default()
        };
        let ds = generate_dataset(&g, Some(&stats), &opts).unwrap();
        assert_eq!(ds.records.len(), 100);
        for r in &ds.records {
            assert!((0.0..=3.0).contains(&r.label));
            if r.s_t.is_empty() {
                assert_eq!(r.label, 0.0);
            }
            assert!(r.features.is_some());
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let g = power_law_digraph(120, 300, 5).unwrap().assign_degree_probabilities();
        let opts = GenerateOptions {
            count: 30,
            label_replications: 50,
            master_seed: 17,
            ..GenerateOptions::default()
        };
        let bytes = |ds: &Dataset| {
            let mut buf = Vec::new();
            ds.write_jsonl(&mut buf).unwrap();
            buf
        };
        let a = bytes(&generate_dataset(&g, None, &opts).unwrap());
        let b = bytes(&generate_dataset(&g, None, &opts).unwrap());
        assert_eq!(a, b);
        let back = Dataset::read_jsonl(a.as_slice()).unwrap();
        assert_eq!(bytes(&back), a);
    }

    #[test]
    fn fingerprint_binding() {
        let g = four_coin();
        let ds = generate_dataset(&g, None, &GenerateOptions {
            count: 2,
            label_replications: 10,
            sampler: SamplerConfig { rho: 1.0, k_cap: 1, ..SamplerConfig::default() },
            ..GenerateOptions::default()
        })
        .unwrap();
        let other = g.with_uniform_probability(0.3).unwrap();
        assert!(matches!(ds.check_graph(&other), Err(Error::FingerprintMismatch { .. })));
        assert!(ds.training_arrays().is_err());
    }

    #[test]
    fn header_count_must_match() {
        let text = "{\"graph_fingerprint\":\"x\",\"label_replications\":1,\"h_radius\":2,\"count\":2}\n\
                    {\"s_f\":[0],\"s_t\":[],\"label\":0.0}\n";
        assert!(matches!(Dataset::read_jsonl(text.as_bytes()), Err(Error::InvalidInput(_))));
    }
}
