//! Save a trained model to its text format and load it back.

use motorfault::dataset::table1_fixture;
use motorfault::neuralnet::{load_model, save_model, train};
use motorfault::NetworkConfig;

fn main() -> motorfault::Result<()> {
    let config = NetworkConfig {
        max_epochs: 300,
        normalize_inputs: true,
        ..NetworkConfig::motor().with_seed(5)
    };
    let (net, report) = train(&config, &table1_fixture())?;
    println!("trained for {} epochs, loss {:.5}", report.epochs_run, report.final_loss);

    let bytes = save_model(&net);
    let text = String::from_utf8_lossy(&bytes);
    for line in text.lines().take(14) {
        println!("  {line}");
    }
    println!("  ... ({} bytes)", bytes.len());

    let loaded = load_model(&bytes)?;
    let x = [2.66, 2.62, 2.70, 0.49, 0.48, 0.49];
    let (a, b) = (net.predict(&x)?, loaded.predict(&x)?);
    let identical = a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits());
    println!("outputs identical after reload: {identical}");
    println!("file identical after re-save: {}", save_model(&loaded) == bytes);
    Ok(())
}
