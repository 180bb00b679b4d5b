//! Train the default desk-scale network on synthetic blobs and print the
//! entropy trajectory.

use ska::{synthetic_blobs, train, Network, NetworkConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synthetic_blobs(10, 20, 16, 0.25, 42)?;
    let mut config = NetworkConfig::new(vec![16, 32, 24, 16, 10]);
    config.steps = 50;
    config.learning_rate = 1.0;
    let mut net = Network::new(&config)?;
    let history = train(&mut net, &data.features, &data.labels, data.n_classes, &config)?;
    for step in history.steps() {
        println!("step {:2}  network entropy {:10.4} bits", step.step, step.network_entropy);
    }
    Ok(())
}
