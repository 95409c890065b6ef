//! Train a jamming classifier for the 10 MHz pilot layout and run the base
//! station's debounced detector over a frame stream with a jamming burst.
//!
//! ```bash
//! cargo run --release -p twinet --example jamming_detection
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twinet::pilotguard::{generate_frame, BaseStation, Deployment, DetectLoop, ModelFactory, ModelRequest, PilotConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pilots = PilotConfig::mhz10();
    let built = ModelFactory::default().build(&ModelRequest::new(&pilots, 7), 1)?;
    println!(
        "{}: {} subcarriers, pilots {:?}",
        pilots.label(),
        pilots.n_subcarriers(),
        pilots.pilot_indices()
    );
    println!(
        "train accuracy {:.4}, test accuracy {:.4}, trained in {:.2} s",
        built.train_accuracy, built.test_accuracy, built.timings.model_creation_s
    );

    let station = BaseStation::new(Deployment::new(pilots.clone(), built.model)?);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // clean, a burst on the third pilot, clean, a two-frame blip on the first
    let script = [(0, 10), (3, 6), (0, 5), (1, 2), (0, 5)];
    let mut detector = DetectLoop::default();
    let mut index = 0;
    for (jam, frames) in script {
        for _ in 0..frames {
            let frame = generate_frame(&pilots, jam, &mut rng)?;
            if let Some(e) = detector.on_frame(&station, &frame)? {
                println!(
                    "frame {:>2}: jamming on pilot subcarrier {} (class {}, model v{})",
                    e.frame_index, e.pilot_subcarrier, e.jam_class, e.model_version
                );
            }
            index += 1;
        }
    }
    println!("{index} frames classified");
    Ok(())
}
