//! Argmax versus the sequential threshold rule, which can reject a sample
//! when no output is confident enough.

use motorfault::evaluation::{decide, frequency_report};
use motorfault::faultgen::{generate_paper_scale_with_noise};
use motorfault::neuralnet::train;
use motorfault::{evaluate, DecisionRule, NetworkConfig};

fn main() -> motorfault::Result<()> {
    let outputs = [0.10, 0.40, 0.35, 0.05, 0.02, 0.01, 0.03];
    for rule in [DecisionRule::argmax(), DecisionRule::threshold(0.5)?, DecisionRule::threshold(0.3)?] {
        let r = decide(&outputs, &rule)?;
        println!("{:?} {:.2}: {:?} (margin {:.2})", rule.mode, rule.threshold, r.predicted, r.margin);
    }

    // noisier data, a short training run, then compare both rules
    let (train_set, test) = generate_paper_scale_with_noise(9, 0.08)?;
    let config = NetworkConfig {
        max_epochs: 60,
        ..NetworkConfig::motor().with_seed(9)
    };
    let (net, _) = train(&config, &train_set)?;
    for rule in [DecisionRule::argmax(), DecisionRule::threshold(0.7)?] {
        let (matrix, accuracy) = evaluate(&net, &test, &rule)?;
        let report = frequency_report(&matrix);
        println!("\n{:?}: accuracy {accuracy:.3}, rejected {}", rule.mode, report.rejected);
        print!("{}", matrix.to_csv());
    }
    Ok(())
}
