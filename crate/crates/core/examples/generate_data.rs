//! Synthetic data around the reference signatures, then a stratified split.

use motorfault::dataset::{split, table1_fixture};
use motorfault::faultgen::{default_signatures, generate, GeneratorSpec};
use motorfault::FaultClass;

fn main() -> motorfault::Result<()> {
    println!("reference rows:\n{}", table1_fixture().to_csv_fixed(6));

    for sig in default_signatures() {
        println!("{:<36} centroid {:.6?}", sig.label.description(), sig.centroid);
    }

    let spec = GeneratorSpec::new([40; 7], 42).with_relative_noise(0.02);
    let data = generate(&spec)?;
    let (train, test) = split(&data, 0.25, 42)?;
    println!("\n{} samples -> {} train / {} test", data.len(), train.len(), test.len());
    for class in FaultClass::ALL {
        println!(
            "  {:<32} train {:>3} test {:>3}",
            class.to_string(),
            train.class_counts()[class.index()],
            test.class_counts()[class.index()]
        );
    }

    let csv = test.to_csv();
    println!("\nfirst test rows:");
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
