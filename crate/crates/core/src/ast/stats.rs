use std::collections::BTreeMap;
use std::fmt;

use super::IndexedAst;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusStats {
    pub count: usize,
    pub nodes_min: usize,
    pub nodes_mean: f64,
    pub nodes_max: usize,
    /// depth → number of trees
    pub depth_histogram: BTreeMap<usize, usize>,
    /// algorithm label (or `-` when absent) → number of trees
    pub label_histogram: BTreeMap<String, usize>,
}

pub fn corpus_stats<'a, I>(corpus: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a IndexedAst>,
{
    let mut s = CorpusStats::default();
    let mut total = 0usize;
    for t in corpus {
        let n = t.node_count();
        s.nodes_min = if s.count == 0 { n } else { s.nodes_min.min(n) };
        s.nodes_max = s.nodes_max.max(n);
        total += n;
        s.count += 1;
        *s.depth_histogram.entry(t.depth()).or_default() += 1;
        let label = t.algorithm_label.clone().unwrap_or_else(|| "-".into());
        *s.label_histogram.entry(label).or_default() += 1;
    }
    if s.count > 0 {
        s.nodes_mean = total as f64 / s.count as f64;
    }
    s
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trees\t{}", self.count)?;
        writeln!(
            f,
            "nodes\tmin={}\tmean={:.2}\tmax={}",
            self.nodes_min, self.nodes_mean, self.nodes_max
        )?;
        for (d, c) in &self.depth_histogram {
            writeln!(f, "depth\t{d}\t{c}")?;
        }
        for (l, c) in &self.label_histogram {
            writeln!(f, "label\t{l}\t{c}")?;
        }
        Ok(())
    }
}
