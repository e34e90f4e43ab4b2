//! Train/eval loops. Batches run one tape per graph; gradient maps are
//! averaged in index order so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Labels, TaskKind};
use crate::model::{
    init_params, model_forward, Checkpoint, Forward, GraphAux, LayerConfig, ParamStore,
};
use crate::numerics::{Tape, Tensor};
use crate::spectral::SpectralCache;

use super::adam::{adam_step, phi_clip_holds, AdamState};
use super::loss::{loss_on_tape, LossKind, Target};
use super::{Dataset, MetricsReport, TestMetric, TrainConfig, TrainError};

/// Loss and metric of a split under fixed parameters; dropout disabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub metric: TestMetric,
}

fn task_loss_kind(task: TaskKind) -> LossKind {
    match task {
        TaskKind::GraphRegression => LossKind::Mae,
        _ => LossKind::Xent,
    }
}

fn target_for(graph: &Graph, task: TaskKind) -> Result<Target, TrainError> {
    match (task, graph.labels()) {
        (TaskKind::NodeClass, Labels::Node(ls)) => {
            Ok(Target::Classes(ls.iter().map(|&c| c as usize).collect()))
        }
        (TaskKind::GraphClass, Labels::Graph(v)) => Ok(Target::Classes(vec![*v as usize])),
        (TaskKind::GraphRegression, Labels::Graph(v)) => Ok(Target::Values(vec![*v])),
        _ => Err(TrainError::ConfigMismatch(format!(
            "task {task:?} has no matching labels on a graph"
        ))),
    }
}

fn check_dims(config: &LayerConfig, dataset: &Dataset) -> Result<(), TrainError> {
    let expect_in = dataset.feature_dim();
    if config.l_in != expect_in {
        return Err(TrainError::ConfigMismatch(format!(
            "l_in {} but dataset features have dimension {expect_in}",
            config.l_in
        )));
    }
    let task = dataset.split.task;
    let want_out = match task {
        TaskKind::GraphRegression => 1,
        TaskKind::NodeClass | TaskKind::GraphClass => dataset.num_classes(),
        TaskKind::None => 0,
    };
    if config.out_dim != want_out {
        return Err(TrainError::ConfigMismatch(format!(
            "out_dim {} but the task needs {want_out}",
            config.out_dim
        )));
    }
    for cache in &dataset.caches {
        if cache.d != config.d {
            return Err(TrainError::ConfigMismatch(format!(
                "cache d = {} but config.d = {}",
                cache.d, config.d
            )));
        }
    }
    Ok(())
}

/// One graph's forward + loss on a fresh tape. Returns (loss id, bound
/// params) so callers can run backward.
#[allow(clippy::too_many_arguments)]
fn graph_loss(
    tape: &mut Tape<f64>,
    params: &ParamStore<f64>,
    config: &LayerConfig,
    graph: &Graph,
    cache: &SpectralCache<f64>,
    task: TaskKind,
    dropout: Option<(u64, u32, u64)>,
) -> Result<(crate::numerics::Vid, Vec<(String, crate::numerics::Vid)>), TrainError> {
    let aux = GraphAux::new(graph);
    let x = tape.input(Tensor::from_f64_slice(
        &[graph.n(), graph.feature_dim()],
        graph.features(),
    )?);
    let mut fwd = Forward::new(tape, params, config);
    if let Some((seed, epoch, unit)) = dropout {
        fwd = fwd.with_dropout(seed, epoch, unit);
    }
    let graph_level = task != TaskKind::NodeClass;
    let out = fwd.model_forward(&aux, cache, x, graph_level)?;
    let bound = fwd.bound_params().to_vec();
    let target = target_for(graph, task)?;
    let loss = loss_on_tape(tape, out, &target, task_loss_kind(task))?;
    Ok((loss, bound))
}

/// Correct predictions (classification) or absolute errors (regression).
fn graph_metric(
    params: &ParamStore<f64>,
    config: &LayerConfig,
    graph: &Graph,
    cache: &SpectralCache<f64>,
    task: TaskKind,
) -> Result<(f64, usize), TrainError> {
    let mut tape = Tape::new();
    let graph_level = task != TaskKind::NodeClass;
    let (out, _, _) = model_forward(&mut tape, params, config, graph, cache, graph_level)?;
    let pred = tape.value(out);
    match (task, graph.labels()) {
        (TaskKind::NodeClass, Labels::Node(ls)) => {
            let k = config.out_dim;
            let mut correct = 0;
            for (u, &label) in ls.iter().enumerate() {
                let row = &pred.data()[u * k..(u + 1) * k];
                let arg = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                if arg == label as usize {
                    correct += 1;
                }
            }
            Ok((correct as f64, ls.len()))
        }
        (TaskKind::GraphClass, Labels::Graph(v)) => {
            let row = pred.data();
            let arg = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            Ok(((arg == *v as usize) as u8 as f64, 1))
        }
        (TaskKind::GraphRegression, Labels::Graph(v)) => {
            Ok(((pred.data()[0] - v).abs(), 1))
        }
        _ => Err(TrainError::ConfigMismatch("labels missing for task".into())),
    }
}

/// Evaluates fixed parameters on a list of graph indices. No dropout, no
/// parameter mutation.
pub fn evaluate(
    params: &ParamStore<f64>,
    config: &LayerConfig,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<EvalReport, TrainError> {
    check_dims(config, dataset)?;
    let task = dataset.split.task;
    let mut loss_sum = 0.0;
    let mut metric_sum = 0.0;
    let mut metric_count = 0usize;
    for &gi in indices {
        let mut tape = Tape::new();
        let (loss, _) = graph_loss(
            &mut tape,
            params,
            config,
            &dataset.graphs[gi],
            &dataset.caches[gi],
            task,
            None,
        )?;
        loss_sum += tape.value(loss).item();
        let (msum, mcount) =
            graph_metric(params, config, &dataset.graphs[gi], &dataset.caches[gi], task)?;
        metric_sum += msum;
        metric_count += mcount;
    }
    let loss = loss_sum / indices.len().max(1) as f64;
    let metric = match task {
        TaskKind::GraphRegression => TestMetric::Mae(metric_sum / metric_count.max(1) as f64),
        _ => TestMetric::Accuracy(metric_sum / metric_count.max(1) as f64),
    };
    Ok(EvalReport { loss, metric })
}

/// Accuracy of always predicting the most frequent class in the given split.
pub fn majority_baseline(dataset: &Dataset, indices: &[usize]) -> f64 {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut total = 0usize;
    for &gi in indices {
        match dataset.graphs[gi].labels() {
            Labels::Node(ls) => {
                for &l in ls {
                    *counts.entry(l).or_default() += 1;
                    total += 1;
                }
            }
            Labels::Graph(v) => {
                *counts.entry(*v as i64).or_default() += 1;
                total += 1;
            }
            Labels::None => {}
        }
    }
    let best = counts.values().copied().max().unwrap_or(0);
    best as f64 / total.max(1) as f64
}

/// Full training run: shuffled batches, Adam, best-validation checkpointing.
/// Deterministic for fixed (dataset, configs, seed).
pub fn train(
    dataset: &Dataset,
    config: &LayerConfig,
    tc: &TrainConfig,
) -> Result<(Checkpoint<f64>, MetricsReport), TrainError> {
    tc.validate()?;
    config.validate()?;
    check_dims(config, dataset)?;
    let started = Instant::now();
    let task = dataset.split.task;
    let mut params = init_params::<f64>(config, tc.seed)?;
    let mut adam: AdamState<f64> = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x7241_494E);

    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_val: Option<TestMetric> = None;
    let mut train_losses = Vec::with_capacity(tc.epochs);
    let mut val_losses = Vec::with_capacity(tc.epochs);
    let mut val_metrics = Vec::with_capacity(tc.epochs);

    for epoch in 0..tc.epochs {
        let mut order = dataset.split.train.clone();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(tc.batch_size) {
            let mut grad_sum: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut batch_loss = 0.0;
            for &gi in batch {
                let mut tape = Tape::new();
                let (loss, bound) = graph_loss(
                    &mut tape,
                    &params,
                    config,
                    &dataset.graphs[gi],
                    &dataset.caches[gi],
                    task,
                    Some((tc.seed, epoch as u32, gi as u64)),
                )?;
                batch_loss += tape.value(loss).item();
                let grads = tape.backward(loss)?;
                for (name, vid) in bound {
                    let g = grads.grad(vid);
                    let slot = grad_sum.entry(name).or_insert_with(|| vec![0.0; g.len()]);
                    for (s, &v) in slot.iter_mut().zip(g.data()) {
                        *s += v;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(TrainError::DivergenceDetected {
                    epoch,
                    last_good: Box::new(Checkpoint {
                        config: config.clone(),
                        params: best_params,
                    }),
                });
            }
            let grads: Vec<(String, Tensor<f64>)> = grad_sum
                .into_iter()
                .map(|(name, mut data)| {
                    for v in data.iter_mut() {
                        *v *= scale;
                    }
                    let shape = params.get(&name).expect("bound param").shape().to_vec();
                    (name, Tensor::from_vec(&shape, data).expect("gradient shape"))
                })
                .collect();
            adam_step(&mut params, &grads, &mut adam, tc, config);
            debug_assert!(phi_clip_holds(&params, config));
            epoch_loss += batch_loss;
            batches += 1;
        }
        train_losses.push(epoch_loss / batches.max(1) as f64);
        let val = evaluate(&params, config, dataset, &dataset.split.val)?;
        val_losses.push(val.loss);
        val_metrics.push(val.metric.value());
        let improved = match best_val {
            None => true,
            Some(prev) => val.metric.at_least(prev) && val.metric != prev,
        };
        if improved {
            best_val = Some(val.metric);
            best_params = params.clone();
            best_epoch = epoch;
        }
    }

    let test = evaluate(&best_params, config, dataset, &dataset.split.test)?;
    let report = MetricsReport {
        seed: tc.seed,
        train_loss: train_losses,
        val_loss: val_losses,
        val_metric: val_metrics,
        best_epoch,
        test_metric: test.metric,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    Ok((Checkpoint { config: config.clone(), params: best_params }, report))
}
