use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::artifacts::*;
use super::config::{PipelineConfig, SeedStream};
use super::run::{Manifest, StageRun};
use crate::annotate::{
    attach_events, cluster_majority_labels, create_session, propagate, reannotate_events, select_centroids,
    session_agreement, write_reannotated_csv, Agreement, AnnotationSession, WindowLabel,
};
use crate::corpus::{
    build_vocabulary, make_windows, parse_event_log, sample_windows, split_by_days, window_truth, ParseReport,
    SensorEvent, SplitPlan, Vocabulary, Window, NO_LABEL,
};
use crate::encoder::{embed_all, train_mlm, EncoderParams};
use crate::error::{Error, Result};
use crate::evalmap::{
    bootstrap_ci, kmeans, majority_vote_mapping, mapped_predictions, matched_accuracy, predict, BootstrapCi,
    ClusterLabelMap, LabelHierarchy, LabelUnification,
};
use crate::layout::HouseLayout;
use crate::neighbors::{build_knn, NeighborGraph, NeighborList};
use crate::scan::{assign_all, fine_tune_scan, ClusterAssignment};
use crate::synth::{generate, SynthConfig};
use crate::trends::{compare_periods, period_distribution, write_trend_csv, TrendDelta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub events: usize,
    pub vocabulary: usize,
    pub windows: usize,
    pub train_windows: usize,
    pub sampled: usize,
    pub days: usize,
    pub parse: ParseReport,
}

fn load_events(run: &mut StageRun<'_>) -> Result<Vec<SensorEvent>> {
    events_from_csv(&run.read(EVENTS)?)
}

fn load_windows(run: &mut StageRun<'_>) -> Result<Vec<Window>> {
    run.read_jsonl(WINDOWS)
}

fn load_sampled(run: &mut StageRun<'_>, windows: &[Window]) -> Result<Vec<Window>> {
    let sample: SampleRecord = run.read_json(SAMPLE)?;
    let keep: BTreeSet<usize> = sample.window_ids.into_iter().collect();
    Ok(windows.iter().filter(|w| keep.contains(&w.window_id)).cloned().collect())
}

fn load_encoder(run: &mut StageRun<'_>, name: &str) -> Result<EncoderParams> {
    EncoderParams::from_bytes(&run.read(name)?)
}

fn load_graph(run: &mut StageRun<'_>) -> Result<NeighborGraph> {
    let nodes: Vec<NeighborList> = run.read_jsonl(NEIGHBORS)?;
    let h = nodes.iter().map(|n| n.neighbors.len()).max().unwrap_or(0);
    Ok(NeighborGraph { h, nodes })
}

fn load_hierarchy(run: &mut StageRun<'_>) -> Result<LabelHierarchy> {
    match run.config.hierarchy.clone() {
        Some(path) => {
            let bytes = run.read_external(&path)?;
            LabelHierarchy::from_json(&String::from_utf8_lossy(&bytes))
        }
        None => Ok(LabelHierarchy::bundled()),
    }
}

fn load_unification(run: &mut StageRun<'_>) -> Result<Option<LabelUnification>> {
    match run.config.label_map.clone() {
        Some(path) => Ok(Some(serde_json::from_slice(&run.read_external(&path)?)?)),
        None => Ok(LabelUnification::bundled(&run.config.dataset_id)),
    }
}

fn load_session(run: &mut StageRun<'_>) -> Result<AnnotationSession> {
    let session: AnnotationSession = run.read_json(&session_file(&run.config.session_id))?;
    Ok(session)
}

/// Parses the event log, builds the vocabulary and windows, splits days and draws the training sample.
pub fn ingest(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("ingest", config)?;
    let path = config
        .dataset
        .clone()
        .ok_or_else(|| Error::invalid("no dataset given; set `dataset` or pass --dataset"))?;
    let bytes = run.read_external(&path)?;
    let parsed = parse_event_log(bytes.as_slice())?;
    if parsed.events.is_empty() {
        return Err(Error::invalid(format!("{} holds no events", path.display())));
    }
    let vocab = build_vocabulary(&parsed.events, config.temperature_bin_width)?;
    let windows = make_windows(&parsed.events, &vocab, config.l, config.stride)?;
    if windows.is_empty() {
        return Err(Error::invalid(format!(
            "{} events are fewer than the window length {}",
            parsed.events.len(),
            config.l
        )));
    }
    let split = split_by_days(&windows, config.train_ratio, config.seed_for(SeedStream::Split))?;
    let train: Vec<Window> = windows.iter().filter(|w| split.is_train(w)).cloned().collect();
    let sample_seed = config.seed_for(SeedStream::Sample);
    let sampled = sample_windows(&train, config.sample_fraction, sample_seed)?;
    if sampled.len() < 2 {
        return Err(Error::invalid(format!(
            "sample of {} training windows is too small; raise sample_fraction",
            sampled.len()
        )));
    }
    let report = IngestReport {
        events: parsed.events.len(),
        vocabulary: vocab.len(),
        windows: windows.len(),
        train_windows: train.len(),
        sampled: sampled.len(),
        days: split.train_days.len() + split.test_days.len(),
        parse: parsed.report,
    };
    run.write(EVENTS, &events_to_csv(&parsed.events)?)?;
    run.write_json(VOCAB, &vocab)?;
    run.write_jsonl(WINDOWS, &windows)?;
    run.write_json(SPLIT, &split)?;
    run.write_json(
        SAMPLE,
        &SampleRecord {
            fraction: config.sample_fraction,
            seed: sample_seed,
            window_ids: sampled.iter().map(|w| w.window_id).collect(),
        },
    )?;
    run.write_json(INGEST_REPORT, &report)?;
    run.finish()
}

/// Masked-token pre-training on the sampled windows; embeds them with the result.
pub fn pretrain(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("pretrain", config)?;
    let vocab: Vocabulary = run.read_json(VOCAB)?;
    let windows = load_windows(&mut run)?;
    let sampled = load_sampled(&mut run, &windows)?;
    let outcome = train_mlm(&sampled, &config.encoder_config(vocab.len()))?;
    let embeddings = embed_all(&outcome.params, &sampled)?;
    run.write(ENCODER, &outcome.params.to_bytes())?;
    run.write(PRETRAIN_LOSS, &loss_csv(&outcome.losses)?)?;
    run.write(EMBEDDINGS, &embeddings_to_bytes(&embeddings))?;
    run.finish()
}

pub fn neighbors(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("neighbors", config)?;
    let embeddings = embeddings_from_bytes(&run.read(EMBEDDINGS)?)?;
    let graph = build_knn(&embeddings, config.h)?;
    run.write_jsonl(NEIGHBORS, &graph.nodes)?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub k: usize,
    pub head_losses: Vec<f64>,
    pub selected_head: usize,
    pub cluster_sizes: Vec<usize>,
}

fn cluster_sizes(assignments: &[ClusterAssignment], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for a in assignments {
        sizes[a.cluster] += 1;
    }
    sizes
}

/// SCAN fine-tuning on the sampled windows, then assignment of every window.
pub fn cluster(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("cluster", config)?;
    let params = load_encoder(&mut run, ENCODER)?;
    let graph = load_graph(&mut run)?;
    let windows = load_windows(&mut run)?;
    let sampled = load_sampled(&mut run, &windows)?;
    let outcome = fine_tune_scan(&params, &graph, &sampled, &config.scan_config(config.k))?;
    let assignments = assign_all(&outcome.params, &outcome.head, &windows)?;
    let report = ScanReport {
        k: config.k,
        head_losses: outcome.head_losses.clone(),
        selected_head: outcome.selected_head,
        cluster_sizes: cluster_sizes(&assignments, config.k),
    };
    run.write(SCAN_ENCODER, &outcome.params.to_bytes())?;
    run.write(SCAN_HEAD, &outcome.head.to_bytes())?;
    run.write(SCAN_LOSS, &loss_csv(&outcome.losses)?)?;
    run.write_jsonl(ASSIGNMENTS, &assignments)?;
    run.write_json(SCAN_REPORT, &report)?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansReport {
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub cluster_sizes: Vec<usize>,
}

/// Baseline: k-means on the pre-trained embeddings of the sample, nearest centroid for every window.
pub fn kmeans_stage(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("kmeans", config)?;
    let params = load_encoder(&mut run, ENCODER)?;
    let sample = embeddings_from_bytes(&run.read(EMBEDDINGS)?)?;
    let windows = load_windows(&mut run)?;
    let points: Vec<Vec<f64>> = sample.into_iter().map(|e| e.values).collect();
    let fit = kmeans(&points, config.k, config.seed_for(SeedStream::KMeans), config.kmeans_max_iters)?;
    let all: Vec<Vec<f64>> = embed_all(&params, &windows)?.into_iter().map(|e| e.values).collect();
    let assignments: Vec<HardAssignment> = windows
        .iter()
        .zip(predict(&all, &fit.centroids))
        .map(|(w, cluster)| HardAssignment {
            window_id: w.window_id,
            cluster,
        })
        .collect();
    let mut sizes = vec![0; config.k];
    for a in &assignments {
        sizes[a.cluster] += 1;
    }
    run.write_jsonl(KMEANS_ASSIGNMENTS, &assignments)?;
    run.write_json(
        KMEANS_REPORT,
        &KMeansReport {
            k: config.k,
            iterations: fit.iterations,
            converged: fit.converged,
            cluster_sizes: sizes,
        },
    )?;
    run.finish()
}

/// Picks the `m` most confident windows per cluster and opens an annotation session on them.
///
/// Refuses to replace a session that already holds ratings.
pub fn centroids(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("centroids", config)?;
    let assignments: Vec<ClusterAssignment> = run.read_jsonl(ASSIGNMENTS)?;
    let windows = load_windows(&mut run)?;
    let events = load_events(&mut run)?;
    let session_name = session_file(&config.session_id);
    if run.exists(&session_name) {
        let existing: AnnotationSession = crate::io::read_json(&run.path(&session_name))?;
        if !existing.submissions.is_empty() {
            return Err(Error::invalid(format!(
                "{} already holds {} ratings; remove it or pick another session_id",
                run.path(&session_name).display(),
                existing.submissions.len()
            )));
        }
    }
    let k = assignments.first().map_or(0, |a| a.probs.len());
    let mut samples = select_centroids(&assignments, config.m)?;
    attach_events(&mut samples, &windows, &events)?;
    let session = create_session(
        config.session_id.clone(),
        config.dataset_id.clone(),
        samples.clone(),
        k,
        config.raters,
        config.seed_for(SeedStream::Session),
    )?;
    if let Some(path) = config.layout.clone() {
        let bytes = run.read_external(&path)?;
        let layout = HouseLayout::from_json(&String::from_utf8_lossy(&bytes))?;
        run.write_json(LAYOUT, &layout)?;
    }
    run.write_json(CENTROIDS, &samples)?;
    run.write_json(&session_name, &session)?;
    run.finish()
}

/// Labels of a session carried over to every window and every covered event.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub cluster_labels: ClusterLabelMap,
    pub window_labels: Vec<WindowLabel>,
    /// One label per event, "No Label" where no window covers it.
    pub event_labels: Vec<String>,
}

pub fn propagate_session(
    session: &AnnotationSession,
    hierarchy: &LabelHierarchy,
    assignments: &[ClusterAssignment],
    windows: &[Window],
    events: &[SensorEvent],
) -> Result<Propagation> {
    let cluster_labels = cluster_majority_labels(session, hierarchy)?;
    let window_labels = propagate(&cluster_labels, assignments)?;
    let event_labels = reannotate_events(&window_labels, windows, events)?;
    Ok(Propagation {
        cluster_labels,
        window_labels,
        event_labels,
    })
}

/// Re-annotated event CSV of a propagation.
pub fn reannotated_csv(events: &[SensorEvent], propagation: &Propagation) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_reannotated_csv(&mut out, events, &propagation.event_labels)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub leaf: Agreement,
    pub level_up: Agreement,
}

/// Turns the session's ratings into window and event labels plus agreement statistics.
pub fn propagate_stage(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("propagate", config)?;
    let session = load_session(&mut run)?;
    let hierarchy = load_hierarchy(&mut run)?;
    let assignments: Vec<ClusterAssignment> = run.read_jsonl(ASSIGNMENTS)?;
    let windows = load_windows(&mut run)?;
    let events = load_events(&mut run)?;
    let unmapped = session.unmapped_clusters();
    if !unmapped.is_empty() {
        tracing::warn!(?unmapped, "clusters without ratings are labeled Other");
    }
    let result = propagate_session(&session, &hierarchy, &assignments, &windows, &events)?;
    let agreement = AgreementReport {
        leaf: session_agreement(&session, &hierarchy, false)?,
        level_up: session_agreement(&session, &hierarchy, true)?,
    };
    run.write_json(CLUSTER_LABELS, &result.cluster_labels)?;
    run.write_jsonl(WINDOW_LABELS, &result.window_labels)?;
    run.write(REANNOTATED, &reannotated_csv(&events, &result)?)?;
    run.write_json(AGREEMENT, &agreement)?;
    run.finish()
}

/// A window that takes part in evaluation.
#[derive(Debug, Clone)]
pub struct EvalWindow {
    pub window_id: usize,
    pub day: NaiveDate,
    pub train: bool,
    pub truth: String,
}

/// Unified truth label of every window; windows without truth, or with
/// "No Label" unless `include_unlabeled`, are left out.
pub fn evaluation_windows(
    windows: &[Window],
    events: &[SensorEvent],
    split: &SplitPlan,
    unification: Option<&LabelUnification>,
    include_unlabeled: bool,
) -> Vec<EvalWindow> {
    windows
        .iter()
        .filter_map(|w| {
            let raw = window_truth(w, events)?;
            let truth = match unification {
                Some(u) => u.unify(&raw).to_string(),
                None => raw,
            };
            if truth == NO_LABEL && !include_unlabeled {
                return None;
            }
            Some(EvalWindow {
                window_id: w.window_id,
                day: w.day_key,
                train: split.is_train(w),
                truth,
            })
        })
        .collect()
}

/// Per-class (tp, fp, fn) of one test day over a shared label index.
struct DayTally(Vec<[usize; 3]>);

fn tally_f1(days: &[&DayTally], labels: usize) -> (f64, f64) {
    let mut sum = vec![[0usize; 3]; labels];
    for day in days {
        for (s, d) in sum.iter_mut().zip(&day.0) {
            for j in 0..3 {
                s[j] += d[j];
            }
        }
    }
    let present: Vec<&[usize; 3]> = sum.iter().filter(|t| t.iter().any(|&c| c > 0)).collect();
    let total: usize = present.iter().map(|t| t[0] + t[2]).sum();
    let f1 = |t: &[usize; 3]| {
        let denom = 2 * t[0] + t[1] + t[2];
        if denom == 0 {
            0.0
        } else {
            2.0 * t[0] as f64 / denom as f64
        }
    };
    let weighted = present.iter().map(|t| f1(t) * (t[0] + t[2]) as f64).sum::<f64>() / total.max(1) as f64;
    let macro_ = present.iter().map(|t| f1(t)).sum::<f64>() / present.len().max(1) as f64;
    (weighted, macro_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScores {
    pub k: usize,
    pub weighted_f1: BootstrapCi,
    pub macro_f1: BootstrapCi,
    /// Hungarian-matched accuracy over every evaluated window.
    pub matched_accuracy: f64,
    /// Cluster labels fitted by majority vote on training days.
    pub mapping: ClusterLabelMap,
}

/// Majority-vote mapping fitted on training-day windows, F1 on test-day
/// windows with a bootstrap over test days.
pub fn score_clusters(
    clusters: &BTreeMap<usize, usize>,
    k: usize,
    eval: &[EvalWindow],
    replicates: usize,
    seed: u64,
) -> Result<ScoresAndPredictions> {
    let cluster_of = |w: &EvalWindow| {
        clusters
            .get(&w.window_id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("window {} has no cluster assignment", w.window_id)))
    };
    let (train, test): (Vec<&EvalWindow>, Vec<&EvalWindow>) = eval.iter().partition(|w| w.train);
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "evaluation needs labeled windows on both sides of the split (train {}, test {})",
            train.len(),
            test.len()
        )));
    }
    let train_clusters = train.iter().map(|w| cluster_of(w)).collect::<Result<Vec<_>>>()?;
    let train_truth: Vec<&str> = train.iter().map(|w| w.truth.as_str()).collect();
    let mapping = majority_vote_mapping(&train_clusters, &train_truth, k)?;
    let test_clusters = test.iter().map(|w| cluster_of(w)).collect::<Result<Vec<_>>>()?;
    let predicted = mapped_predictions(&mapping, &test_clusters)?;

    let labels: BTreeSet<&str> = predicted
        .iter()
        .map(String::as_str)
        .chain(test.iter().map(|w| w.truth.as_str()))
        .collect();
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut days: BTreeMap<NaiveDate, DayTally> = BTreeMap::new();
    for (w, p) in test.iter().zip(&predicted) {
        let tally = days.entry(w.day).or_insert_with(|| DayTally(vec![[0; 3]; labels.len()]));
        let (p, t) = (index[p.as_str()], index[w.truth.as_str()]);
        if p == t {
            tally.0[p][0] += 1;
        } else {
            tally.0[p][1] += 1;
            tally.0[t][2] += 1;
        }
    }
    let units: Vec<DayTally> = days.into_values().collect();
    let weighted_f1 = bootstrap_ci(&units, |d| tally_f1(d, labels.len()).0, replicates, seed)?;
    let macro_f1 = bootstrap_ci(&units, |d| tally_f1(d, labels.len()).1, replicates, seed)?;

    let classes: BTreeMap<&str, usize> = eval
        .iter()
        .map(|w| w.truth.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let all_clusters = eval.iter().map(cluster_of).collect::<Result<Vec<_>>>()?;
    let all_classes: Vec<usize> = eval.iter().map(|w| classes[w.truth.as_str()]).collect();
    Ok(ScoresAndPredictions {
        scores: ClusteringScores {
            k,
            weighted_f1,
            macro_f1,
            matched_accuracy: matched_accuracy(&all_clusters, &all_classes),
            mapping,
        },
        test_truth: test.iter().map(|w| w.truth.clone()).collect(),
        test_predicted: predicted,
    })
}

/// Scores plus the test-day labelings they were computed from.
#[derive(Debug, Clone)]
pub struct ScoresAndPredictions {
    pub scores: ClusteringScores,
    pub test_truth: Vec<String>,
    pub test_predicted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub labels: Vec<String>,
    pub train_windows: usize,
    pub test_windows: usize,
    pub test_days: usize,
    pub scan: ClusteringScores,
    pub kmeans: Option<ClusteringScores>,
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    method: &'a str,
    k: usize,
    weighted_f1: f64,
    weighted_ci_low: f64,
    weighted_ci_high: f64,
    macro_f1: f64,
    macro_ci_low: f64,
    macro_ci_high: f64,
    matched_accuracy: f64,
}

impl<'a> MetricsRow<'a> {
    fn new(method: &'a str, s: &ClusteringScores) -> Self {
        Self {
            method,
            k: s.k,
            weighted_f1: s.weighted_f1.estimate,
            weighted_ci_low: s.weighted_f1.lower,
            weighted_ci_high: s.weighted_f1.upper,
            macro_f1: s.macro_f1.estimate,
            macro_ci_low: s.macro_f1.lower,
            macro_ci_high: s.macro_f1.upper,
            matched_accuracy: s.matched_accuracy,
        }
    }
}

fn eval_context(run: &mut StageRun<'_>) -> Result<(Vec<Window>, Vec<EvalWindow>)> {
    let windows = load_windows(run)?;
    let events = load_events(run)?;
    let split: SplitPlan = run.read_json(SPLIT)?;
    let unification = load_unification(run)?;
    let eval = evaluation_windows(&windows, &events, &split, unification.as_ref(), run.config.include_unlabeled);
    if eval.is_empty() {
        return Err(Error::invalid("the event log carries no truth labels to evaluate against"));
    }
    Ok((windows, eval))
}

/// Benchmarks SCAN (and k-means, when its assignments exist) against truth labels.
pub fn evaluate(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("evaluate", config)?;
    let (_, eval) = eval_context(&mut run)?;
    let seed = config.seed_for(SeedStream::Bootstrap);
    let assignments: Vec<ClusterAssignment> = run.read_jsonl(ASSIGNMENTS)?;
    let k = assignments.first().map_or(0, |a| a.probs.len());
    let scan_map: BTreeMap<usize, usize> = assignments.iter().map(|a| (a.window_id, a.cluster)).collect();
    let scan = score_clusters(&scan_map, k, &eval, config.bootstrap_replicates, seed)?.scores;
    let kmeans = if run.exists(KMEANS_ASSIGNMENTS) {
        let hard: Vec<HardAssignment> = run.read_jsonl(KMEANS_ASSIGNMENTS)?;
        let k = hard.iter().map(|a| a.cluster + 1).max().unwrap_or(0).max(config.k);
        let map = hard.iter().map(|a| (a.window_id, a.cluster)).collect();
        Some(score_clusters(&map, k, &eval, config.bootstrap_replicates, seed)?.scores)
    } else {
        None
    };
    let test: Vec<&EvalWindow> = eval.iter().filter(|w| !w.train).collect();
    let metrics = Metrics {
        labels: eval
            .iter()
            .map(|w| w.truth.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        train_windows: eval.len() - test.len(),
        test_windows: test.len(),
        test_days: test.iter().map(|w| w.day).collect::<BTreeSet<_>>().len(),
        scan,
        kmeans,
    };
    let mut rows = vec![MetricsRow::new("scan", &metrics.scan)];
    if let Some(km) = &metrics.kmeans {
        rows.push(MetricsRow::new("kmeans", km));
    }
    run.write_json(METRICS, &metrics)?;
    run.write(METRICS_CSV, &csv_bytes(&rows)?)?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub macro_f1: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub weighted_f1: f64,
}

/// Macro F1 with bootstrap interval for each cluster count in `sweep_k`.
pub fn sweep_k(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("sweep-k", config)?;
    let params = load_encoder(&mut run, ENCODER)?;
    let graph = load_graph(&mut run)?;
    let (windows, eval) = eval_context(&mut run)?;
    let sampled = load_sampled(&mut run, &windows)?;
    let seed = config.seed_for(SeedStream::Bootstrap);
    let mut rows = Vec::with_capacity(config.sweep_k.len());
    for &k in &config.sweep_k {
        if k > sampled.len() {
            return Err(Error::invalid(format!("k = {k} exceeds the {} sampled windows", sampled.len())));
        }
        let outcome = fine_tune_scan(&params, &graph, &sampled, &config.scan_config(k))?;
        let assignments = assign_all(&outcome.params, &outcome.head, &windows)?;
        let map = assignments.iter().map(|a| (a.window_id, a.cluster)).collect();
        let s = score_clusters(&map, k, &eval, config.bootstrap_replicates, seed)?.scores;
        tracing::info!(k, macro_f1 = s.macro_f1.estimate, "sweep point");
        rows.push(SweepRow {
            k,
            macro_f1: s.macro_f1.estimate,
            ci_low: s.macro_f1.lower,
            ci_high: s.macro_f1.upper,
            weighted_f1: s.weighted_f1.estimate,
        });
    }
    run.write(SWEEP_K, &csv_bytes(&rows)?)?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub period1: [NaiveDate; 2],
    pub period2: [NaiveDate; 2],
    pub truth: Option<TrendDelta>,
    pub discovered: Option<TrendDelta>,
}

fn periods(config: &PipelineConfig, days: &[NaiveDate]) -> Result<([NaiveDate; 2], [NaiveDate; 2])> {
    let given = [
        config.trend_period1_start,
        config.trend_period1_end,
        config.trend_period2_start,
        config.trend_period2_end,
    ];
    if let [Some(a), Some(b), Some(c), Some(d)] = given {
        return Ok(([a, b], [c, d]));
    }
    if given.iter().any(Option::is_some) {
        return Err(Error::invalid("set all four trend period bounds or none"));
    }
    if days.len() < 2 {
        return Err(Error::invalid("trends need at least 2 observed days"));
    }
    let mid = days.len() / 2;
    Ok(([days[0], days[mid - 1]], [days[mid], days[days.len() - 1]]))
}

fn delta_of(labeled: &[(NaiveDate, String)], p1: [NaiveDate; 2], p2: [NaiveDate; 2]) -> Result<TrendDelta> {
    let d1 = period_distribution(labeled, p1[0], p1[1])?;
    let d2 = period_distribution(labeled, p2[0], p2[1])?;
    Ok(compare_periods(&d1, &d2))
}

/// Label-share changes between two date ranges in truth space and, once labels were propagated, in discovered space.
pub fn trends(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("trends", config)?;
    let windows = load_windows(&mut run)?;
    let events = load_events(&mut run)?;
    let unification = load_unification(&mut run)?;
    let days: Vec<NaiveDate> = windows.iter().map(|w| w.day_key).collect::<BTreeSet<_>>().into_iter().collect();
    let (p1, p2) = periods(config, &days)?;

    let truth: Vec<(NaiveDate, String)> = windows
        .iter()
        .filter_map(|w| {
            let raw = window_truth(w, &events)?;
            let label = unification.as_ref().map_or(raw.clone(), |u| u.unify(&raw).to_string());
            (config.include_unlabeled || label != NO_LABEL).then_some((w.day_key, label))
        })
        .collect();
    let truth = if truth.is_empty() { None } else { Some(delta_of(&truth, p1, p2)?) };

    let discovered = if run.exists(WINDOW_LABELS) {
        let labels: Vec<WindowLabel> = run.read_jsonl(WINDOW_LABELS)?;
        let day: BTreeMap<usize, NaiveDate> = windows.iter().map(|w| (w.window_id, w.day_key)).collect();
        let labeled = labels
            .into_iter()
            .map(|l| {
                day.get(&l.window_id)
                    .map(|&d| (d, l.label))
                    .ok_or_else(|| Error::invalid(format!("labeled window {} is unknown", l.window_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Some(delta_of(&labeled, p1, p2)?)
    } else {
        None
    };
    if truth.is_none() && discovered.is_none() {
        return Err(Error::invalid(
            "no truth labels and no propagated labels; run `propagate` first",
        ));
    }
    for (name, delta) in [(TRENDS_TRUTH_CSV, &truth), (TRENDS_DISCOVERED_CSV, &discovered)] {
        if let Some(delta) = delta {
            let mut bytes = Vec::new();
            write_trend_csv(&mut bytes, delta)?;
            run.write(name, &bytes)?;
        }
    }
    run.write_json(
        TRENDS,
        &TrendReport {
            period1: p1,
            period2: p2,
            truth,
            discovered,
        },
    )?;
    run.finish()
}

/// Writes the synthetic household's annotated log, its layout and the generator settings.
pub fn synth(config: &PipelineConfig) -> Result<Manifest> {
    let mut run = StageRun::begin("synth", config)?;
    let synth_config: SynthConfig = match config.synth_config.clone() {
        Some(path) => serde_json::from_slice(&run.read_external(&path)?)?,
        None => SynthConfig::default(),
    };
    let house = generate(&synth_config)?;
    run.write(SYNTH_LOG, crate::corpus::format_annotated_log(&house.events).as_bytes())?;
    run.write_json(LAYOUT, &house.layout)?;
    run.write_json(SYNTH_CONFIG, &synth_config)?;
    run.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalmap::{f1_score, F1Mode};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn day_tallies_reproduce_f1_on_the_concatenation(
            rows in prop::collection::vec((0usize..3, 0usize..4, 0usize..4), 1..80),
        ) {
            let names = ["a", "b", "c", "d"];
            let labels: Vec<&str> = names.to_vec();
            let mut days: BTreeMap<usize, DayTally> = BTreeMap::new();
            let (mut pred, mut truth) = (Vec::new(), Vec::new());
            for &(d, p, t) in &rows {
                let tally = days.entry(d).or_insert_with(|| DayTally(vec![[0; 3]; 4]));
                if p == t { tally.0[p][0] += 1 } else { tally.0[p][1] += 1; tally.0[t][2] += 1 }
                pred.push(labels[p]);
                truth.push(labels[t]);
            }
            let units: Vec<&DayTally> = days.values().collect();
            let (w, m) = tally_f1(&units, 4);
            prop_assert!((w - f1_score(&pred, &truth, F1Mode::Weighted).unwrap()).abs() < 1e-12);
            prop_assert!((m - f1_score(&pred, &truth, F1Mode::Macro).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn default_periods_halve_the_days() {
        let days: Vec<NaiveDate> = (1..=5).map(|d| NaiveDate::from_ymd_opt(2024, 1, d).unwrap()).collect();
        let (p1, p2) = periods(&PipelineConfig::default(), &days).unwrap();
        assert_eq!(p1, [days[0], days[1]]);
        assert_eq!(p2, [days[2], days[4]]);
    }
}
