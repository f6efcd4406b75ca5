//! Finite-difference check of every model family's backward pass.

use inertia_core::estimators::{build_model, induced_adjacency, Family, ModelSpec};
use inertia_core::grid::build_ieee24;
use rand::{Rng, SeedableRng};

fn main() -> inertia_core::Result<()> {
    let sys = build_ieee24();
    let buses: Vec<usize> = sys.generator_buses().into_iter().take(4).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for family in Family::ALL {
        let mut spec = ModelSpec::new(family, [buses.len(), 2, 16], 11);
        spec.fc = vec![8];
        spec.conv_channels = [3, 4];
        spec.lstm_units = 5;
        spec.gcn_hidden = 6;
        spec.adjacency = Some(induced_adjacency(&sys, &buses));
        let model = build_model(&spec)?;
        let x: Vec<f64> = (0..model.net.in_size()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r = model.net.grad_check(&x, &[1.0], 1e-5);
        println!(
            "{:<5} {:>5} params  max rel error {:.2e}  ({} checked, {} kinks skipped)",
            family.name(),
            model.net.n_params(),
            r.max_rel_error,
            r.checked,
            r.excluded
        );
    }
    Ok(())
}
