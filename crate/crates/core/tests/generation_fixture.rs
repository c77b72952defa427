use cemrag::generation::{request_body, FailureMode, FixtureServer, Responder};
use cemrag::{GenerationClient, GenerationConfig, GenerationError};

fn client(server: &FixtureServer, retries: u32) -> GenerationClient {
    GenerationClient::new(GenerationConfig {
        retries,
        backoff_ms: 5,
        timeout_ms: 5_000,
        ..GenerationConfig::new(server.url())
    })
    .unwrap()
}

#[test]
fn success_on_first_attempt() {
    let server = FixtureServer::start(Responder::Fixed("Normal chest.".into())).unwrap();
    let r = client(&server, 3).generate("a", "prompt").unwrap();
    assert_eq!(r.text, "Normal chest.");
    assert_eq!(r.attempt_count, 1);
    assert_eq!(server.hits(), 1);
}

#[test]
fn retries_server_errors_then_succeeds() {
    let server =
        FixtureServer::start_with_failures(Responder::Fixed("ok".into()), 2, FailureMode::ServerError).unwrap();
    let r = client(&server, 3).generate("a", "p").unwrap();
    assert_eq!(r.attempt_count, 3);
    assert_eq!(server.hits(), 3);
}

#[test]
fn retries_dropped_connections() {
    let server = FixtureServer::start_with_failures(Responder::Fixed("ok".into()), 1, FailureMode::Drop).unwrap();
    let r = client(&server, 2).generate("a", "p").unwrap();
    assert_eq!(r.attempt_count, 2);
}

#[test]
fn gives_up_after_retry_budget() {
    let server =
        FixtureServer::start_with_failures(Responder::Fixed("ok".into()), 10, FailureMode::ServerError).unwrap();
    let err = client(&server, 2).generate("a", "p").unwrap_err();
    assert!(matches!(err, GenerationError::Exhausted { attempts: 3, .. }), "{err:?}");
    assert_eq!(server.hits(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = FixtureServer::start_with_failures(Responder::Fixed("ok".into()), 5, FailureMode::BadRequest).unwrap();
    let err = client(&server, 3).generate("a", "p").unwrap_err();
    assert!(matches!(err, GenerationError::Rejected { status: 400, .. }), "{err:?}");
    assert_eq!(server.hits(), 1);
}

#[test]
fn unreachable_endpoint_is_an_error() {
    let url = {
        let server = FixtureServer::start(Responder::Deterministic).unwrap();
        server.url()
    };
    let client = GenerationClient::new(GenerationConfig {
        retries: 1,
        backoff_ms: 1,
        ..GenerationConfig::new(url)
    })
    .unwrap();
    assert!(client.generate("a", "p").is_err());
}

#[test]
fn nonzero_temperature_is_overridden_with_warning() {
    let server = FixtureServer::start(Responder::Fixed("ok".into())).unwrap();
    let client = GenerationClient::new(GenerationConfig {
        temperature: 0.7,
        ..GenerationConfig::new(server.url())
    })
    .unwrap();
    assert_eq!(client.warnings().len(), 1);
    assert_eq!(client.config().temperature, 0.0);
    client.generate("a", "hello").unwrap();
    let body: serde_json::Value = serde_json::from_slice(&server.bodies()[0]).unwrap();
    assert_eq!(body["temperature"], serde_json::json!(0.0));
    assert_eq!(body["prompt"], "hello");
}

#[test]
fn request_bodies_are_byte_deterministic() {
    let server = FixtureServer::start(Responder::Deterministic).unwrap();
    let c = client(&server, 0);
    c.generate("a", "same prompt").unwrap();
    c.generate("b", "same prompt").unwrap();
    let bodies = server.bodies();
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], request_body("same prompt", c.config()));
}

#[test]
fn batch_preserves_input_order() {
    let server = FixtureServer::start(Responder::Deterministic).unwrap();
    let c = client(&server, 1);
    let items: Vec<(String, String)> = (0..24)
        .map(|i| (format!("id{i}"), format!("P\n\nFINDINGS 1:\nreport {i}\n")))
        .collect();
    let serial = c.generate_batch(&items, 1);
    let parallel = c.generate_batch(&items, 6);
    for (i, (s, p)) in serial.iter().zip(&parallel).enumerate() {
        let (s, p) = (s.as_ref().unwrap(), p.as_ref().unwrap());
        assert_eq!(s.id, format!("id{i}"));
        assert_eq!(s.text, format!("report {i}"));
        assert_eq!((&s.id, &s.text), (&p.id, &p.text));
    }
}

#[test]
fn missing_endpoint_without_env_is_rejected() {
    if std::env::var_os(cemrag::generation::ENDPOINT_ENV).is_some() {
        return;
    }
    assert!(matches!(
        GenerationClient::new(GenerationConfig::default()),
        Err(GenerationError::NoEndpoint)
    ));
}
