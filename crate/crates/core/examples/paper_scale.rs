//! Train the 6-10-7 motor classifier on synthetic paper-scale data and
//! print the frequency report.
//!
//! ```text
//! cargo run --release --example paper_scale -- 1
//! ```

use std::time::Instant;

use motorfault::evaluation::{frequency_report, regression_fit};
use motorfault::faultgen::generate_paper_scale;
use motorfault::neuralnet::train;
use motorfault::{evaluate, DecisionRule, NetworkConfig};

fn main() -> motorfault::Result<()> {
    let seed = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seed must be an integer"));
    let start = Instant::now();

    let (train_set, test_set) = generate_paper_scale(seed)?;
    let config = NetworkConfig::motor().with_seed(seed);
    let (net, report) = train(&config, &train_set)?;
    println!(
        "trained {} epochs, final loss {:.6}{}",
        report.epochs_run,
        report.final_loss,
        if report.stopped_early { " (target reached)" } else { "" }
    );

    let (matrix, accuracy) = evaluate(&net, &test_set, &DecisionRule::argmax())?;
    println!("{}", frequency_report(&matrix));
    println!("accuracy {accuracy:.6}");
    let fit = regression_fit(&net, &train_set)?;
    println!("regression r {:.6} on {} points", fit.r, fit.points.len());
    println!("elapsed {:.2?}", start.elapsed());
    Ok(())
}
