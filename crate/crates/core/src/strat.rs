//! CIDEr-based stratification, the score table behind every correlation,
//! and ranking of pre-gen metrics against a post-gen metric.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::datamodel::{Dataset, TraceSet};
use crate::error::{Error, Result};
use crate::postgen::{self, EmbeddingTable, IdfTable, ImagePostgen, POSTGEN_METRICS};
use crate::pregen::{self, enumerate_metrics, PregenConfig};
use crate::stats::{pearson, CorrelationResult};

/// Images split into `k` strata, stratum 0 holding the lowest scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumAssignment {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl StratumAssignment {
    /// Image ids of one stratum, ascending.
    pub fn members(&self, stratum: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == stratum)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &s in self.assignment.values() {
            sizes[s] += 1;
        }
        sizes
    }
}

/// Sorts images by score (ties by id) and cuts them into `k` contiguous
/// chunks; the first `N mod k` chunks get one extra image.
pub fn stratify(scores: &BTreeMap<String, f64>, k: usize) -> Result<StratumAssignment> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::TooManyStrata { k, images: n });
    }
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(id, &s)| (id, s)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let (base, extra) = (n / k, n % k);
    let mut assignment = BTreeMap::new();
    let mut it = order.into_iter();
    for stratum in 0..k {
        let size = base + usize::from(stratum < extra);
        for (id, _) in it.by_ref().take(size) {
            assignment.insert(id.clone(), stratum);
        }
    }
    Ok(StratumAssignment { k, assignment })
}

/// One sample of the study: a model evaluated on one stratum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleKey {
    pub model_id: String,
    pub k: usize,
    pub stratum: usize,
}

/// `(model, k, stratum, metric) -> value`, at most one value per key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    columns: BTreeMap<String, BTreeMap<SampleKey, f64>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: SampleKey, metric: &str, value: f64) -> Result<()> {
        let column = self.columns.entry(metric.to_owned()).or_default();
        if column.contains_key(&key) {
            return Err(Error::Config(format!(
                "duplicate score for model {} k={} stratum={} metric {metric}",
                key.model_id, key.k, key.stratum
            )));
        }
        column.insert(key, value);
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = (SampleKey, String, f64)>) -> Result<()> {
        for (key, metric, value) in rows {
            self.insert(key, &metric, value)?;
        }
        Ok(())
    }

    pub fn metrics(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, metric: &str) -> Option<&BTreeMap<SampleKey, f64>> {
        self.columns.get(metric)
    }

    pub fn get(&self, key: &SampleKey, metric: &str) -> Option<f64> {
        self.columns.get(metric)?.get(key).copied()
    }

    /// Distinct samples over all metrics.
    pub fn samples(&self) -> Vec<SampleKey> {
        let mut keys: Vec<SampleKey> = self
            .columns
            .values()
            .flat_map(|c| c.keys().cloned())
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }

    pub fn num_rows(&self) -> usize {
        self.columns.values().map(BTreeMap::len).sum()
    }

    /// Values of `x` and `y` on samples where both exist, in key order.
    /// With `finite_only`, samples where either value is non-finite are
    /// dropped.
    pub fn paired(&self, x: &str, y: &str, finite_only: bool) -> Result<Vec<(SampleKey, f64, f64)>> {
        let cx = self
            .column(x)
            .ok_or_else(|| Error::Config(format!("metric {x} not in score table")))?;
        let cy = self
            .column(y)
            .ok_or_else(|| Error::Config(format!("metric {y} not in score table")))?;
        Ok(cx
            .iter()
            .filter_map(|(k, &vx)| cy.get(k).map(|&vy| (k.clone(), vx, vy)))
            .filter(|(_, vx, vy)| !finite_only || (vx.is_finite() && vy.is_finite()))
            .collect())
    }

    /// `model_id,k,stratum,metric,value`, sorted by sample then metric.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut rows: Vec<(&SampleKey, &str, f64)> = self
            .columns
            .iter()
            .flat_map(|(m, c)| c.iter().map(move |(k, &v)| (k, m.as_str(), v)))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0).then_with(|| a.1.cmp(b.1)));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model_id", "k", "stratum", "metric", "value"])?;
        for (key, metric, value) in rows {
            w.write_record([
                key.model_id.as_str(),
                &key.k.to_string(),
                &key.stratum.to_string(),
                metric,
                &value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut table = ScoreTable::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let field = |idx: usize, name: &str| {
                record.get(idx).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing field `{name}`"),
                })
            };
            let num = |idx: usize, name: &str| -> Result<usize> {
                field(idx, name)?.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("field `{name}`: expected an integer"),
                })
            };
            let key = SampleKey {
                model_id: field(0, "model_id")?.to_owned(),
                k: num(1, "k")?,
                stratum: num(2, "stratum")?,
            };
            let metric = field(3, "metric")?;
            let value: f64 = field(4, "value")?.parse().map_err(|_| Error::Parse {
                line,
                message: "field `value`: expected a number".into(),
            })?;
            table.insert(key, metric, value)?;
        }
        Ok(table)
    }
}

/// Everything needed to score one model on a dataset.
pub struct ModelRun<'a> {
    pub model_id: &'a str,
    pub traces: &'a TraceSet,
    /// Dataset with generated captions.
    pub dataset: &'a Dataset,
}

/// Scores a model on every stratum of every `k`: all 504 pre-gen metrics
/// and the corpus post-gen metrics. Strata are formed from per-image
/// CIDEr-D with `idf` built once over the whole dataset.
pub fn expand_strata(
    run: &ModelRun<'_>,
    idf: &IdfTable,
    emb: &EmbeddingTable,
    k_values: &[usize],
    config: &PregenConfig,
) -> Result<Vec<(SampleKey, String, f64)>> {
    let dataset_ids: Vec<&str> = run.dataset.images().iter().map(|i| i.image_id.as_str()).collect();
    let trace_ids: Vec<&str> = run.traces.image_ids().collect();
    if dataset_ids != trace_ids {
        return Err(Error::Config(format!(
            "model {}: traces cover {} images, dataset has {}",
            run.model_id,
            trace_ids.len(),
            dataset_ids.len()
        )));
    }
    let per_image: BTreeMap<String, ImagePostgen> = postgen::score_images(run.dataset, idf, emb)?;
    let cider: BTreeMap<String, f64> = per_image
        .iter()
        .map(|(id, s)| (id.clone(), s.cider))
        .collect();

    let mut rows = Vec::new();
    for &k in k_values {
        let strata = stratify(&cider, k)?;
        for stratum in 0..k {
            let members = strata.members(stratum);
            let key = SampleKey {
                model_id: run.model_id.to_owned(),
                k,
                stratum,
            };
            let traces = run.traces.restrict(members.iter().copied())?;
            for (name, value) in pregen::compute_all(&traces, config)? {
                rows.push((key.clone(), name, value));
            }
            let post = postgen::corpus_from_images(members.iter().map(|id| &per_image[*id]))?;
            for (name, value) in post {
                rows.push((key.clone(), name, value));
            }
        }
    }
    Ok(rows)
}

/// Pearson correlation of two metrics over all samples where both are
/// present (and finite, when `finite_only`).
pub fn correlate(table: &ScoreTable, x: &str, y: &str, finite_only: bool) -> Result<CorrelationResult> {
    let pairs = table.paired(x, y, finite_only)?;
    let xs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let p = pearson(&xs, &ys).map_err(|e| match e {
        Error::NonFinite(_) => Error::NonFinite(x.to_owned()),
        Error::DegenerateSample(msg) => Error::DegenerateSample(format!("{x} vs {y}: {msg}")),
        other => other,
    })?;
    Ok(CorrelationResult::new(x, y, xs.len(), p))
}

/// A pre-gen metric excluded from ranking, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedMetric {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub postgen_metric: String,
    /// Every valid pre-gen metric, best first.
    pub ranked: Vec<CorrelationResult>,
    pub skipped: Vec<SkippedMetric>,
}

impl Ranking {
    pub fn top(&self, k: usize) -> &[CorrelationResult] {
        &self.ranked[..k.min(self.ranked.len())]
    }
}

/// Correlates every pre-gen metric present in the table against
/// `postgen_metric`. Metrics with any non-finite or degenerate sample are
/// skipped. Sorted by descending R², ties by name.
pub fn rank_pregen(table: &ScoreTable, postgen_metric: &str) -> Result<Ranking> {
    if table.samples().len() < 3 {
        return Err(Error::DegenerateSample("need at least 3 strata rows".into()));
    }
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for id in enumerate_metrics() {
        let name = id.canonical_name();
        if table.column(&name).is_none() {
            continue;
        }
        match correlate(table, &name, postgen_metric, false) {
            Ok(c) => ranked.push(c),
            Err(e @ (Error::NonFinite(_) | Error::DegenerateSample(_))) => skipped.push(SkippedMetric {
                metric: name,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if ranked.is_empty() {
        return Err(Error::NothingToRank(postgen_metric.to_owned()));
    }
    ranked.sort_by(|a, b| {
        b.r_squared
            .total_cmp(&a.r_squared)
            .then_with(|| a.x_metric.cmp(&b.x_metric))
    });
    Ok(Ranking {
        postgen_metric: postgen_metric.to_owned(),
        ranked,
        skipped,
    })
}

/// Post-gen metric names present in a table.
pub fn postgen_metrics_in(table: &ScoreTable) -> Vec<&'static str> {
    POSTGEN_METRICS
        .into_iter()
        .filter(|m| table.column(m).is_some())
        .collect()
}

pub fn write_correlations_csv(writer: impl Write, results: &[CorrelationResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x_metric", "y_metric", "n", "r", "r2", "p"])?;
    for c in results {
        w.write_record([
            c.x_metric.as_str(),
            c.y_metric.as_str(),
            &c.n.to_string(),
            &c.r.to_string(),
            &c.r_squared.to_string(),
            &format!("{:?}", c.p_value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_ranking_csv(writer: impl Write, rankings: &[Ranking], top_k: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["postgen_metric", "rank", "pregen_metric", "r2", "r", "p"])?;
    for ranking in rankings {
        for (i, c) in ranking.top(top_k).iter().enumerate() {
            w.write_record([
                ranking.postgen_metric.as_str(),
                &(i + 1).to_string(),
                c.x_metric.as_str(),
                &c.r_squared.to_string(),
                &c.r.to_string(),
                &format!("{:?}", c.p_value),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `x,y,model_id,k,stratum` for one metric pair.
pub fn write_scatter_csv(writer: impl Write, table: &ScoreTable, x: &str, y: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "model_id", "k", "stratum"])?;
    for (key, vx, vy) in table.paired(x, y, false)? {
        w.write_record([
            vx.to_string(),
            vy.to_string(),
            key.model_id.clone(),
            key.k.to_string(),
            key.stratum.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_assignment_csv(writer: impl Write, strata: &[StratumAssignment]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["image_id", "k", "stratum"])?;
    for s in strata {
        for (id, stratum) in &s.assignment {
            w.write_record([id.as_str(), &s.k.to_string(), &stratum.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
