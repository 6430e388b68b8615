//! A 2-4-1 network learning XOR, the smallest problem a single layer
//! cannot solve.

use motorfault::neuralnet::train_vectors;
use motorfault::NetworkConfig;

fn main() -> motorfault::Result<()> {
    let inputs = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let targets = vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]];
    let config = NetworkConfig {
        input_dim: 2,
        hidden_layers: vec![4],
        output_dim: 1,
        learning_rate: 0.5,
        max_epochs: 20_000,
        target_loss: 1e-3,
        seed: 7,
        ..NetworkConfig::motor()
    };
    let (net, report) = train_vectors(&config, &inputs, &targets)?;
    println!("epochs {} final loss {:.6}", report.epochs_run, report.final_loss);

    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(&targets) {
        let y = net.predict(x)?[0];
        total += net.loss(x, t)?;
        println!("{:?} -> {y:.4} (rounded {})", x, y.round());
    }
    println!("mean loss {:.6}", total / inputs.len() as f64);
    Ok(())
}
