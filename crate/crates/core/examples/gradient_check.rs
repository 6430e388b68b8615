//! Compare backpropagated gradients against central finite differences.

use motorfault::rng::SeededRng;
use motorfault::{Network, NetworkConfig};

fn main() -> motorfault::Result<()> {
    let h = 1e-5;
    let mut rng = SeededRng::new(3);
    for hidden in [vec![4], vec![10], vec![8, 5], vec![3, 6, 2]] {
        let config = NetworkConfig::motor().with_hidden(hidden.clone()).with_seed(rng.next_u64());
        let mut net = Network::init(&config)?;
        let x: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 3.0)).collect();
        let mut t = vec![0.0; 7];
        t[rng.below(7)] = 1.0;

        let grads = net.backprop_gradients(&x, &t)?;
        let mut worst_abs: f64 = 0.0;
        let mut count = 0;
        for l in 0..grads.len() {
            for k in 0..grads[l].weights.len() {
                let w = net.layers()[l].weights()[k];
                net.layers_mut()[l].weights_mut()[k] = w + h;
                let plus = net.loss(&x, &t)?;
                net.layers_mut()[l].weights_mut()[k] = w - h;
                let minus = net.loss(&x, &t)?;
                net.layers_mut()[l].weights_mut()[k] = w;
                let numeric = (plus - minus) / (2.0 * h);
                worst_abs = worst_abs.max((numeric - grads[l].weights[k]).abs());
                count += 1;
            }
        }
        println!("hidden {hidden:?}: {count} weights, max |analytic - numeric| = {worst_abs:.2e}");
    }
    Ok(())
}
