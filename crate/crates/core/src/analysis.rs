//! Cross-method uniqueness and overlap, score distributions, and reports.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, PairId};
use crate::error::{Error, Result};
use crate::scores::{fingerprint, ColumnMeta, ScoreColumn};
use crate::selection::{SelectionMeta, SelectionResult};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedSelection {
    pub name: String,
    pub ids: BTreeSet<PairId>,
}

impl NamedSelection {
    pub fn new(name: impl Into<String>, ids: impl IntoIterator<Item = PairId>) -> Self {
        NamedSelection {
            name: name.into(),
            ids: ids.into_iter().collect(),
        }
    }
}

impl From<&SelectionResult> for NamedSelection {
    fn from(s: &SelectionResult) -> Self {
        NamedSelection::new(s.method.clone(), s.selected.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodUniqueness {
    pub method: String,
    pub size: usize,
    pub unique_count: usize,
    /// `100 * |U_i| / |union|`.
    pub unique_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub methods: Vec<MethodUniqueness>,
    pub union_size: usize,
    /// Entry `(i, j)` is `|S_i ∩ S_j|`.
    pub overlap: Vec<Vec<usize>>,
}

fn check_names(selections: &[NamedSelection]) -> Result<()> {
    let mut names = BTreeSet::new();
    for s in selections {
        if !names.insert(s.name.as_str()) {
            return Err(Error::domain(format!("duplicate method name `{}`", s.name)));
        }
    }
    Ok(())
}

/// `U_i`: the ids of each set that appear in no other set.
pub fn unique_sets(selections: &[NamedSelection]) -> Vec<BTreeSet<PairId>> {
    let mut membership: HashMap<PairId, usize> = HashMap::new();
    for s in selections {
        for &id in &s.ids {
            *membership.entry(id).or_default() += 1;
        }
    }
    selections
        .iter()
        .map(|s| s.ids.iter().copied().filter(|id| membership[id] == 1).collect())
        .collect()
}

pub fn overlap_matrix(selections: &[NamedSelection]) -> Vec<Vec<usize>> {
    let n = selections.len();
    let mut m = vec![vec![0; n]; n];
    for i in 0..n {
        m[i][i] = selections[i].ids.len();
        for j in i + 1..n {
            let shared = selections[i].ids.intersection(&selections[j].ids).count();
            m[i][j] = shared;
            m[j][i] = shared;
        }
    }
    m
}

pub fn unique_samples(selections: &[NamedSelection]) -> Result<UniquenessReport> {
    if selections.len() < 2 {
        return Err(Error::domain("uniqueness analysis needs at least two selections"));
    }
    check_names(selections)?;
    let union_size = selections
        .iter()
        .flat_map(|s| s.ids.iter())
        .collect::<BTreeSet<_>>()
        .len();
    let methods = selections
        .iter()
        .zip(unique_sets(selections))
        .map(|(s, u)| MethodUniqueness {
            method: s.name.clone(),
            size: s.ids.len(),
            unique_count: u.len(),
            unique_pct: unique_pct(u.len(), union_size),
        })
        .collect();
    Ok(UniquenessReport {
        methods,
        union_size,
        overlap: overlap_matrix(selections),
    })
}

pub fn unique_pct(unique_count: usize, union_size: usize) -> f64 {
    if union_size == 0 {
        0.0
    } else {
        100.0 * unique_count as f64 / union_size as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n - 1) sample variance; 0 for a single value.
    pub variance: f64,
    pub std_dev: f64,
    /// Adjusted Fisher-Pearson coefficient; 0 when undefined (n < 3 or zero variance).
    pub skewness: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Linear interpolation between closest ranks on sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn distribution_stats(scores: &[f64], bins: usize) -> Result<DistributionStats> {
    if scores.is_empty() {
        return Err(Error::domain("statistics of an empty list"));
    }
    if bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("statistics of non-finite values"));
    }
    let n = scores.len();
    let nf = n as f64;
    let mean = compensated_sum(scores.iter().copied()) / nf;
    let m2 = compensated_sum(scores.iter().map(|x| (x - mean).powi(2))) / nf;
    let m3 = compensated_sum(scores.iter().map(|x| (x - mean).powi(3))) / nf;
    let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    let skewness = if n < 3 || m2 == 0.0 {
        0.0
    } else {
        (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * m3 / m2.powf(1.5)
    };

    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let (min, max) = (sorted[0], sorted[n - 1]);

    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in scores {
        let idx = if x >= max || width == 0.0 {
            bins - 1
        } else {
            (((x - min) / width) as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_lo: min + i as f64 * width,
            bin_hi: if i + 1 == bins { max } else { min + (i + 1) as f64 * width },
            count,
        })
        .collect();

    Ok(DistributionStats {
        count: n,
        mean,
        variance,
        std_dev: variance.sqrt(),
        skewness,
        min,
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max,
        histogram,
    })
}

impl DistributionStats {
    /// `bin_lo,bin_hi,count` rows with a header.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for b in &self.histogram {
            let _ = writeln!(out, "{:?},{:?},{}", b.bin_lo, b.bin_hi, b.count);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::domain(format!("unknown report format `{other}`"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub column: String,
    /// `"all"` or the name of the selection the scores were restricted to.
    pub subset: String,
    pub stats: DistributionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusStats>,
    pub selections: Vec<SelectionMeta>,
    pub columns: Vec<ColumnMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessReport>,
    pub distributions: Vec<ScoreDistribution>,
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    selections: Vec<SelectionMeta>,
    columns: &'a [ColumnMeta],
}

impl Report {
    /// Assembles a report; distributions are given for every column over all
    /// pairs and over each selection.
    pub fn build(
        corpus: Option<CorpusStats>,
        selections: &[SelectionResult],
        columns: &[ScoreColumn],
        bins: usize,
    ) -> Result<Report> {
        let n_docs = corpus
            .map(|c| c.pair_count)
            .or_else(|| columns.first().map(ScoreColumn::len));
        if let Some(n) = n_docs {
            for c in columns {
                if c.len() != n {
                    return Err(Error::domain(format!(
                        "column `{}` has {} scores but the corpus has {n} pairs",
                        c.method,
                        c.len()
                    )));
                }
            }
            for s in selections {
                if let Some(&bad) = s.selected.iter().find(|&&id| id >= n) {
                    return Err(Error::UnknownIds {
                        method: s.method.clone(),
                        ids: vec![bad],
                    });
                }
            }
        }
        let named: Vec<NamedSelection> = selections.iter().map(NamedSelection::from).collect();
        check_names(&named)?;
        let uniqueness = if named.len() >= 2 {
            Some(unique_samples(&named)?)
        } else {
            None
        };
        let mut distributions = Vec::new();
        for c in columns {
            distributions.push(ScoreDistribution {
                column: c.method.clone(),
                subset: "all".to_owned(),
                stats: distribution_stats(&c.scores, bins)?,
            });
            for s in selections {
                if s.selected.is_empty() {
                    continue;
                }
                let subset: Vec<f64> = s.selected.iter().map(|&id| c.scores[id]).collect();
                distributions.push(ScoreDistribution {
                    column: c.method.clone(),
                    subset: s.method.clone(),
                    stats: distribution_stats(&subset, bins)?,
                });
            }
        }
        let selection_meta: Vec<SelectionMeta> = selections.iter().map(SelectionResult::meta).collect();
        let column_meta: Vec<ColumnMeta> = columns.iter().map(ScoreColumn::metadata).collect();
        let fingerprint = fingerprint(&FingerprintInput {
            selections: selection_meta.clone(),
            columns: &column_meta,
        });
        Ok(Report {
            fingerprint,
            corpus,
            selections: selection_meta,
            columns: column_meta,
            uniqueness,
            distributions,
        })
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("serializable");
                s.push('\n');
                s
            }
            ReportFormat::Markdown => self.markdown(),
            ReportFormat::Csv => self.csv(),
        }
    }

    fn markdown(&self) -> String {
        let mut md = String::from("# Data selection report\n\n");
        let _ = writeln!(md, "Config fingerprint: `{}`\n", self.fingerprint);
        if let Some(c) = &self.corpus {
            md.push_str("## Corpus\n\n| Pairs | Source vocabulary | Target vocabulary |\n|---:|---:|---:|\n");
            let _ = writeln!(md, "| {} | {} | {} |\n", c.pair_count, c.source_vocab_size, c.target_vocab_size);
        }
        if !self.selections.is_empty() {
            md.push_str("## Selections\n\n| Method | k | Selected | Direction | Seed | Flags |\n|---|---:|---:|---|---:|---|\n");
            for s in &self.selections {
                let flags: Vec<String> = s.flags.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} |",
                    s.method,
                    s.k,
                    s.selected,
                    s.direction.map_or("-".to_owned(), |d| d.to_string()),
                    s.seed.map_or("-".to_owned(), |x| x.to_string()),
                    flags.join(" ")
                );
            }
            let _ = writeln!(md, "\nTies are broken by {}.\n", crate::selection::TIE_BREAK.replace('_', " "));
        }
        if let Some(u) = &self.uniqueness {
            md.push_str("## Unique samples\n\n| Method | Unique Samples | % of Unique Samples |\n|---|---:|---:|\n");
            for m in &u.methods {
                let _ = writeln!(md, "| {} | {} | {:.2}% |", m.method, m.unique_count, m.unique_pct);
            }
            let _ = writeln!(md, "\nUnion of all selections: {} pairs.\n", u.union_size);
            md.push_str("## Overlap\n\n|");
            for m in &u.methods {
                let _ = write!(md, " | {}", m.method);
            }
            md.push_str(" |\n|---");
            for _ in &u.methods {
                md.push_str("|---:");
            }
            md.push_str("|\n");
            for (m, row) in u.methods.iter().zip(&u.overlap) {
                let _ = write!(md, "| {}", m.method);
                for v in row {
                    let _ = write!(md, " | {v}");
                }
                md.push_str(" |\n");
            }
            md.push('\n');
        }
        if !self.distributions.is_empty() {
            md.push_str("## Score distributions\n\n| Column | Subset | n | Mean | Std | Skew | Min | Q1 | Median | Q3 | Max |\n|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
            for d in &self.distributions {
                let s = &d.stats;
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {:.6} | {:.6} | {:.6} | {:.6} | {:.6} | {:.6} | {:.6} | {:.6} |",
                    d.column, d.subset, s.count, s.mean, s.std_dev, s.skewness, s.min, s.q1, s.median, s.q3, s.max
                );
            }
        }
        md
    }

    /// Long format: `section,row,column,value`.
    fn csv(&self) -> String {
        let mut out = String::from("section,row,column,value\n");
        let mut put = |section: &str, row: &str, column: &str, value: String| {
            let _ = writeln!(out, "{section},{row},{column},{value}");
        };
        put("config", "", "fingerprint", self.fingerprint.clone());
        if let Some(c) = &self.corpus {
            put("corpus", "", "pair_count", c.pair_count.to_string());
            put("corpus", "", "source_vocab_size", c.source_vocab_size.to_string());
            put("corpus", "", "target_vocab_size", c.target_vocab_size.to_string());
        }
        for s in &self.selections {
            put("selection", &s.method, "k", s.k.to_string());
            put("selection", &s.method, "selected", s.selected.to_string());
            if let Some(d) = s.direction {
                put("selection", &s.method, "direction", d.to_string());
            }
            if let Some(seed) = s.seed {
                put("selection", &s.method, "seed", seed.to_string());
            }
            for (k, v) in &s.flags {
                put("selection", &s.method, &format!("flag:{k}"), v.clone());
            }
        }
        if let Some(u) = &self.uniqueness {
            put("uniqueness", "", "union_size", u.union_size.to_string());
            for (m, row) in u.methods.iter().zip(&u.overlap) {
                put("uniqueness", &m.method, "unique_count", m.unique_count.to_string());
                put("uniqueness", &m.method, "unique_pct", format!("{:?}", m.unique_pct));
                for (other, v) in u.methods.iter().zip(row) {
                    put("overlap", &m.method, &other.method, v.to_string());
                }
            }
        }
        for d in &self.distributions {
            let row = format!("{}/{}", d.column, d.subset);
            let s = &d.stats;
            put("distribution", &row, "count", s.count.to_string());
            for (name, v) in [
                ("mean", s.mean),
                ("variance", s.variance),
                ("std_dev", s.std_dev),
                ("skewness", s.skewness),
                ("min", s.min),
                ("q1", s.q1),
                ("median", s.median),
                ("q3", s.q3),
                ("max", s.max),
            ] {
                put("distribution", &row, name, format!("{v:?}"));
            }
        }
        out
    }
}

/// Convenience wrapper: build and render in one step.
pub fn emit_report(
    corpus: Option<CorpusStats>,
    selections: &[SelectionResult],
    columns: &[ScoreColumn],
    format: ReportFormat,
) -> Result<String> {
    Ok(Report::build(corpus, selections, columns, DEFAULT_BINS)?.render(format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::Direction;

    fn sel(name: &str, ids: &[PairId]) -> NamedSelection {
        NamedSelection::new(name, ids.iter().copied())
    }

    #[test]
    fn uniqueness_two_sets() {
        let r = unique_samples(&[sel("s1", &[1, 2]), sel("s2", &[2, 3])]).unwrap();
        assert_eq!(r.union_size, 3);
        assert_eq!(r.methods[0].unique_count, 1);
        assert_eq!(r.methods[1].unique_count, 1);
        assert!((r.methods[0].unique_pct - 33.333).abs() < 1e-3);
        assert_eq!(r.overlap, vec![vec![2, 1], vec![1, 2]]);
    }

    #[test]
    fn uniqueness_identical_sets() {
        let r = unique_samples(&[sel("a", &[1, 2]), sel("b", &[1, 2]), sel("c", &[1, 2])]).unwrap();
        assert!(r.methods.iter().all(|m| m.unique_count == 0 && m.unique_pct == 0.0));
    }

    #[test]
    fn uniqueness_errors() {
        assert!(unique_samples(&[sel("a", &[1])]).is_err());
        assert!(unique_samples(&[sel("a", &[1]), sel("a", &[2])]).is_err());
    }

    #[test]
    fn reported_row_relationship() {
        let pct = unique_pct(825, 29_255);
        assert!((pct - 2.82).abs() < 0.005);
    }

    #[test]
    fn overlap_examples() {
        let m = overlap_matrix(&[sel("a", &[1, 2]), sel("b", &[3, 4])]);
        assert_eq!(m[0][1], 0);
        let five: Vec<PairId> = (0..5).collect();
        let m = overlap_matrix(&[sel("a", &five), sel("b", &five)]);
        assert!(m.iter().flatten().all(|&v| v == 5));
        let m = overlap_matrix(&[sel("a", &[1, 2, 3]), sel("b", &[3, 4])]);
        assert_eq!(m[0][1], 1);
    }

    #[test]
    fn stats_examples() {
        let s = distribution_stats(&[2.5; 7], 4).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 7);

        let s = distribution_stats(&[0.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(s.mean, 0.25);
        assert!((s.variance - 0.25).abs() < 1e-15);
        assert!(s.skewness > 0.0);
        // m2 = 3/16, m3 = 3/32, so G1 = sqrt(12)/2 * m3 / m2^1.5 = 2
        assert!((s.skewness - 2.0).abs() < 1e-12);

        let s = distribution_stats(&[1.0, 2.0, 3.0], 3).unwrap();
        let counts: Vec<usize> = s.histogram.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 1, 1]);
        assert_eq!(s.median, 2.0);
        assert_eq!((s.q1, s.q3), (1.5, 2.5));

        assert!(distribution_stats(&[], 3).is_err());
        assert!(distribution_stats(&[1.0], 0).is_err());
    }

    #[test]
    fn histogram_csv_layout() {
        let s = distribution_stats(&[0.0, 1.0], 2).unwrap();
        assert_eq!(s.histogram_csv(), "bin_lo,bin_hi,count\n0.0,0.5,1\n0.5,1.0,1\n");
    }

    fn selection(method: &str, ids: &[PairId]) -> SelectionResult {
        crate::selection::top_k(ids, ids.len(), method)
    }

    #[test]
    fn report_is_deterministic_and_matches_uniqueness() {
        let stats = CorpusStats { pair_count: 5, source_vocab_size: 7, target_vocab_size: 6 };
        let sels = [selection("s1", &[1, 2]), selection("s2", &[2, 3])];
        let cols = [ScoreColumn::new("tfidf", Direction::HigherBetter, vec![0.1, 0.5, 0.2, 0.9, 0.0])];
        for format in [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json] {
            let a = emit_report(Some(stats), &sels, &cols, format).unwrap();
            let b = emit_report(Some(stats), &sels, &cols, format).unwrap();
            assert_eq!(a, b);
        }
        let md = emit_report(Some(stats), &sels, &cols, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| s1 | 1 | 33.33% |"));
        assert!(md.contains("| s2 | 1 | 33.33% |"));
        assert!(md.contains("Union of all selections: 3 pairs."));
    }

    #[test]
    fn report_with_corpus_only() {
        let stats = CorpusStats { pair_count: 2, source_vocab_size: 1, target_vocab_size: 1 };
        let r = Report::build(Some(stats), &[], &[], DEFAULT_BINS).unwrap();
        assert!(r.uniqueness.is_none());
        assert!(r.distributions.is_empty());
        let md = r.render(ReportFormat::Markdown);
        assert!(md.contains("| 2 | 1 | 1 |"));
        assert!(!md.contains("Unique samples"));
    }

    #[test]
    fn report_rejects_foreign_ids() {
        let stats = CorpusStats { pair_count: 2, source_vocab_size: 1, target_vocab_size: 1 };
        let sels = [selection("s1", &[0, 5]), selection("s2", &[1])];
        assert!(Report::build(Some(stats), &sels, &[], DEFAULT_BINS).is_err());
    }

    #[test]
    fn fingerprint_tracks_ranking_flags() {
        let cols = [ScoreColumn::new("x", Direction::HigherBetter, vec![1.0, 2.0])];
        let a = Report::build(None, &[], &cols, 4).unwrap();
        let cols2 = [cols[0].clone().with_flag("side", "source")];
        let b = Report::build(None, &[], &cols2, 4).unwrap();
        assert_ne!(a.fingerprint, b.fingerprint);
    }
}
