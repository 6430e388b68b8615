//! Serve a trained model over TCP, replay sensor frames into it and watch
//! debounced fault notifications arrive.

use std::sync::Arc;
use std::thread;

use motorfault::dataset::table1_fixture;
use motorfault::faultgen::generate_paper_scale;
use motorfault::neuralnet::train;
use motorfault::stream::{replay, Response, SensorFrame, Server, StreamConfig};
use motorfault::{FaultClass, NetworkConfig};

fn main() -> motorfault::Result<()> {
    let (train_set, _) = generate_paper_scale(1)?;
    let (net, _) = train(&NetworkConfig::motor().with_seed(1), &train_set)?;

    let server = Server::bind(
        Arc::new(net),
        StreamConfig {
            port: 0,
            echo_events: false,
            ..StreamConfig::default()
        },
    )?;
    let addr = server.local_addr();
    let shutdown = server.shutdown_handle();
    let events = server.subscribe();
    let worker = thread::spawn(move || server.run());
    println!("serving on {addr}");

    // healthy, then a single-phasing episode, then healthy again
    let table = table1_fixture();
    let row = |c: FaultClass| table.iter().find(|s| s.label == c).unwrap().sample;
    let pattern = [
        FaultClass::NoFault,
        FaultClass::NoFault,
        FaultClass::SinglePhasingUnderVoltage,
        FaultClass::SinglePhasingUnderVoltage,
        FaultClass::SinglePhasingUnderVoltage,
        FaultClass::SinglePhasingUnderVoltage,
        FaultClass::NoFault,
        FaultClass::Overload,
        FaultClass::NoFault,
    ];
    let frames: Vec<SensorFrame> = pattern
        .iter()
        .enumerate()
        .map(|(i, &c)| SensorFrame {
            timestamp: 1_700_000_000_000 + 100 * i as u64,
            source_id: "motor-7".to_owned(),
            sample: row(c),
        })
        .collect();

    replay(&frames, addr, 50.0, |frame, response| match response {
        Response::Ok { code, activation } => {
            println!("{} -> class {code} ({activation:.3})", frame.timestamp)
        }
        Response::Err(reason) => println!("{} -> error: {reason}", frame.timestamp),
    })?;

    shutdown.shutdown();
    let summary = worker.join().expect("server thread panicked")?;
    for event in events.try_iter() {
        println!("event: {}", event.to_log_line());
    }
    println!(
        "{} frames, {} errors, {} events",
        summary.frames, summary.errors, summary.events
    );
    Ok(())
}
