use crate::dataset::{one_hot, to_input_vector, Dataset, MinMaxScaler};
use crate::error::{Error, Result};
use crate::rng::{sub_seed, SeededRng};

use super::{loss_mse, Network, NetworkConfig};

/// Stream tag for the per-epoch shuffle, kept apart from weight init.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_loss: f64,
    /// Mean per-sample loss of each epoch, measured during the pass.
    pub loss_history: Vec<f64>,
    /// The target loss was reached before `max_epochs` ran out.
    pub stopped_early: bool,
}

impl TrainReport {
    /// `epoch,loss` rows, epochs 1-based.
    pub fn loss_history_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, loss) in self.loss_history.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, loss));
        }
        out
    }
}

/// Trains a classifier on labeled motor samples with one-hot targets.
pub fn train(config: &NetworkConfig, data: &Dataset) -> Result<(Network, TrainReport)> {
    let inputs: Vec<Vec<f64>> = data.iter().map(|s| to_input_vector(&s.sample)).collect();
    let targets: Vec<Vec<f64>> = data.iter().map(|s| one_hot(s.label)).collect();
    train_vectors(config, &inputs, &targets)
}

/// Per-sample SGD on arbitrary `(input, target)` pairs.
///
/// Each epoch visits every sample once (reshuffled first when
/// `shuffle_each_epoch` is set) and updates all parameters after each
/// sample. Training stops after `max_epochs` or as soon as the epoch's mean
/// loss is `<= target_loss`.
pub fn train_vectors(
    config: &NetworkConfig,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::usage("training data is empty"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Length {
            expected: inputs.len(),
            actual: targets.len(),
        });
    }

    let mut net = Network::init(config)?;
    if config.normalize_inputs {
        net.set_scaler(Some(MinMaxScaler::fit_rows(inputs)?))?;
    }
    // Validate and scale every input once up front.
    let prepared: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| net.prepare_input(x))
        .collect::<Result<_>>()?;
    for t in targets {
        net.check_target(t)?;
    }

    let mut rng = SeededRng::new(sub_seed(config.seed, SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut loss_history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        if config.shuffle_each_epoch {
            rng.shuffle(&mut order);
        }
        let mut total = 0.0;
        for &i in &order {
            let activations = net.forward_prepared(&prepared[i]);
            total += loss_mse(&activations[activations.len() - 1], &targets[i])?;
            let grads = net.backprop_prepared(&prepared[i], &activations, &targets[i]);
            net.apply_gradients(&grads, config.learning_rate);
        }
        let mean = total / inputs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        loss_history.push(mean);
        if mean <= config.target_loss {
            stopped_early = true;
            break;
        }
    }

    let report = TrainReport {
        epochs_run: loss_history.len(),
        final_loss: *loss_history.last().expect("at least one epoch runs"),
        loss_history,
        stopped_early,
    };
    Ok((net, report))
}
