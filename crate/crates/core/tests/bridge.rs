//! Bridge client against scripted fake workers over TCP and stdio.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use mnas_core::eval::bridge::{BridgeClient, BridgeEvaluator, Endpoint, PROTOCOL};
use mnas_core::eval::{EvalError, Evaluator};
use mnas_core::space::{decode, sample_uniform, Genotype, SpaceConfig};
use rand::SeedableRng;
use serde_json::Value;

fn genotype(seed: u64) -> Genotype {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sample_uniform(&SpaceConfig::default(), &mut rng)
}

fn hello() -> String {
    format!("{{\"type\":\"hello\",\"protocol\":\"{PROTOCOL}\"}}\n")
}

fn result_line(id: u64, fitness: f64) -> String {
    format!("{{\"type\":\"result\",\"id\":{id},\"fitness\":{fitness},\"metrics\":{{\"dsc\":{fitness}}},\"wall_seconds\":0.5}}\n")
}

/// Serves one connection: sends `greeting`, then hands every request to
/// `script`, which returns the lines to send back (possibly none).
fn fake_worker<F>(greeting: String, mut script: F) -> String
where
    F: FnMut(&Value) -> Vec<String> + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let address = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut writer = stream.try_clone().unwrap();
        writer.write_all(greeting.as_bytes()).unwrap();
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            let request: Value = serde_json::from_str(&line).unwrap();
            for reply in script(&request) {
                if writer.write_all(reply.as_bytes()).is_err() {
                    return;
                }
            }
        }
    });
    address
}

fn connect(address: String, timeout: Duration) -> Result<BridgeClient, EvalError> {
    BridgeClient::connect(&Endpoint::Tcp { address }, timeout)
}

#[test]
fn round_trip_decodes_request_and_returns_fitness() {
    let g = genotype(1);
    let expected = g.clone();
    let address = fake_worker(hello(), move |req| {
        assert_eq!(req["type"], "eval");
        assert_eq!(req["epochs"], 3);
        assert_eq!(req["seed"], 9);
        let sent = decode(req["genotype"].as_str().unwrap()).unwrap();
        assert_eq!(sent, expected);
        vec![result_line(req["id"].as_u64().unwrap(), 0.75)]
    });
    let mut client = connect(address, Duration::from_secs(5)).unwrap();
    let r = client.evaluate(&g, 3, 9).unwrap();
    assert_eq!(r.fitness, 0.75);
    assert_eq!(r.metrics["dsc"], 0.75);
    assert_eq!(r.cost.wall_seconds, 0.5);
    assert_eq!(r.cost.epochs, 3);
}

#[test]
fn interleaved_replies_are_matched_by_id() {
    let mut held = None;
    let address = fake_worker(hello(), move |req| {
        let id = req["id"].as_u64().unwrap();
        // answer the second request first, then the first
        match held.take() {
            None => {
                held = Some(id);
                vec![]
            }
            Some(first) => vec![result_line(id, 0.2), result_line(first, 0.1)],
        }
    });
    let mut client = connect(address, Duration::from_secs(5)).unwrap();
    let a = client.submit(&genotype(1), 1, 0).unwrap();
    let b = client.submit(&genotype(2), 1, 0).unwrap();
    assert_eq!(client.wait(a).unwrap().fitness, 0.1);
    assert_eq!(client.wait(b).unwrap().fitness, 0.2);
}

#[test]
fn mismatched_id_is_a_protocol_error() {
    let address = fake_worker(hello(), |req| vec![result_line(req["id"].as_u64().unwrap() + 100, 0.5)]);
    let mut client = connect(address, Duration::from_secs(5)).unwrap();
    let err = client.evaluate(&genotype(1), 1, 0).unwrap_err();
    assert!(
        matches!(err, EvalError::Protocol { ref message, .. } if message.contains("id")),
        "{err:?}"
    );
}

#[test]
fn silent_worker_times_out() {
    let address = fake_worker(hello(), |_| vec![]);
    let mut client = connect(address, Duration::from_millis(200)).unwrap();
    let start = Instant::now();
    let err = client.evaluate(&genotype(1), 1, 0).unwrap_err();
    assert!(matches!(err, EvalError::Timeout { id: 1, .. }), "{err:?}");
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn worker_error_record_is_reported() {
    let address = fake_worker(hello(), |req| {
        vec![format!(
            "{{\"type\":\"error\",\"id\":{},\"message\":\"non-finite loss\"}}\n",
            req["id"]
        )]
    });
    let mut evaluator = BridgeEvaluator::new(connect(address, Duration::from_secs(5)).unwrap(), 1, 0);
    match evaluator.evaluate(&genotype(1)) {
        Err(EvalError::Worker { id: 1, message }) => assert_eq!(message, "non-finite loss"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn out_of_range_fitness_is_rejected() {
    let address = fake_worker(hello(), |req| vec![result_line(req["id"].as_u64().unwrap(), 1.5)]);
    let mut client = connect(address, Duration::from_secs(5)).unwrap();
    assert!(matches!(
        client.evaluate(&genotype(1), 1, 0),
        Err(EvalError::Protocol { .. })
    ));
}

#[test]
fn handshake_requires_hello_with_matching_protocol() {
    let address = fake_worker(
        "{\"type\":\"hello\",\"protocol\":\"mnas-bridge/0\"}\n".into(),
        |_| vec![],
    );
    assert!(matches!(
        connect(address, Duration::from_secs(5)),
        Err(EvalError::Protocol { .. })
    ));
    let address = fake_worker(result_line(1, 0.5), |_| vec![]);
    assert!(matches!(
        connect(address, Duration::from_secs(5)),
        Err(EvalError::Protocol { .. })
    ));
}

#[test]
fn closed_connection_is_an_io_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let address = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        stream.write_all(hello().as_bytes()).unwrap();
        let mut line = String::new();
        BufReader::new(stream.try_clone().unwrap())
            .read_line(&mut line)
            .unwrap();
    });
    let mut client = connect(address, Duration::from_secs(5)).unwrap();
    let err = client.evaluate(&genotype(1), 1, 0).unwrap_err();
    assert!(matches!(err, EvalError::Io(_) | EvalError::Protocol { .. }), "{err:?}");
}

#[cfg(unix)]
#[test]
fn command_endpoint_speaks_over_stdio() {
    let script = format!(
        r#"printf '%s\n' '{{"type":"hello","protocol":"{PROTOCOL}"}}'
while IFS= read -r line; do
  id=$(printf '%s' "$line" | sed 's/.*"id":\([0-9]*\).*/\1/')
  printf '{{"type":"result","id":%s,"fitness":0.25,"metrics":{{}},"wall_seconds":0.0}}\n' "$id"
done"#
    );
    let endpoint = Endpoint::Command {
        program: "sh".into(),
        args: vec!["-c".into(), script],
    };
    let mut client = BridgeClient::connect(&endpoint, Duration::from_secs(5)).unwrap();
    for seed in 0..3 {
        assert_eq!(client.evaluate(&genotype(seed), 1, 0).unwrap().fitness, 0.25);
    }
}
